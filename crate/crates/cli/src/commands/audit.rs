use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::Serialize;

use semdiff_core::audit::{distinguishability, mae, mean, spearman, ScoreSeries};
use semdiff_core::model::{load_dataset, CodePairRecord};

use crate::io::{attach_scores, Classify, CmdResult};

/// Name under which the surface similarity itself can be audited as a metric.
pub const SURFACE_METRIC: &str = "surface_sim";

#[derive(Debug, Clone, Serialize)]
pub struct MetricAudit {
    pub metric: String,
    pub n: usize,
    pub mae: f64,
    /// Spearman of the metric against surface similarity over equivalent pairs.
    pub spearman_rho: Option<f64>,
    pub spearman_p: Option<f64>,
    pub n_equivalent: usize,
    pub eq_mean: Option<f64>,
    pub neq_mean: Option<f64>,
    pub distinguishability: Option<f64>,
}

pub struct Split {
    /// df_score at or above this marks a pair as equivalent.
    pub eq_min: f64,
    /// df_score at or below this marks a pair as non-equivalent.
    pub neq_max: f64,
}

fn metric_value(r: &CodePairRecord, metric: &str) -> Option<f64> {
    if metric == SURFACE_METRIC {
        r.surface_sim
    } else {
        r.metric_scores.get(metric).copied()
    }
}

pub fn audit_metric(records: &[CodePairRecord], metric: &str, split: &Split) -> CmdResult<MetricAudit> {
    let scored: Vec<&CodePairRecord> = records.iter().filter(|r| r.scored().is_some()).collect();
    let missing: Vec<&str> = scored
        .iter()
        .filter(|r| metric_value(r, metric).is_none())
        .map(|r| r.pair_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(anyhow!("metric {metric}: no score for {}", missing.join(", "))).data();
    }
    let values: Vec<f64> = scored.iter().map(|r| metric_value(r, metric).expect("checked")).collect();
    let truth: Vec<f64> = scored.iter().map(|r| r.scored().expect("filtered")).collect();
    let series = ScoreSeries::new(metric, values.clone(), truth.clone())
        .map_err(|e| anyhow!("metric {metric}: {e}"))
        .data()?;

    let eq: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] >= split.eq_min).collect();
    let neq: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] <= split.neq_max).collect();
    let eq_vals: Vec<f64> = eq.iter().map(|&i| values[i]).collect();
    let neq_vals: Vec<f64> = neq.iter().map(|&i| values[i]).collect();

    let with_surface: Vec<(f64, f64)> = eq
        .iter()
        .filter_map(|&i| scored[i].surface_sim.map(|s| (values[i], s)))
        .collect();
    let (m, s): (Vec<f64>, Vec<f64>) = with_surface.iter().copied().unzip();
    let rank = match spearman(&m, &s) {
        Ok(sp) => Some(sp),
        Err(e) => {
            log::warn!("metric {metric}: no Spearman correlation on equivalent pairs: {e}");
            None
        }
    };
    let d = match distinguishability(&eq_vals, &neq_vals) {
        Ok(d) => Some(d),
        Err(e) => {
            log::warn!("metric {metric}: no distinguishability: {e}");
            None
        }
    };
    Ok(MetricAudit {
        metric: metric.to_string(),
        n: series.len(),
        mae: mae(&series),
        spearman_rho: rank.map(|r| r.rho),
        spearman_p: rank.map(|r| r.p_value),
        n_equivalent: eq.len(),
        eq_mean: mean(&eq_vals).ok(),
        neq_mean: mean(&neq_vals).ok(),
        distinguishability: d,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

pub fn run(
    input: &Path,
    scores: &[(String, PathBuf)],
    metrics: Option<&[String]>,
    split: &Split,
    out: Option<&Path>,
) -> CmdResult {
    let mut records = load_dataset(input).data()?.records;
    attach_scores(&mut records, scores)?;
    let names: Vec<String> = match metrics {
        Some(m) => m.to_vec(),
        None => {
            let mut set: BTreeSet<String> = records.iter().flat_map(|r| r.metric_scores.keys().cloned()).collect();
            if records.iter().all(|r| r.surface_sim.is_some()) {
                set.insert(SURFACE_METRIC.to_string());
            }
            set.into_iter().collect()
        }
    };
    if names.is_empty() {
        return Err(anyhow!("no metric scores to audit; pass --scores NAME=PATH")).usage();
    }
    let audits = names
        .iter()
        .map(|m| audit_metric(&records, m, split))
        .collect::<CmdResult<Vec<_>>>()?;

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "{:<20} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "metric", "n", "MAE", "rho", "p", "EQ", "NEQ", "d"
    );
    let short = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
    for a in &audits {
        let _ = writeln!(
            stdout,
            "{:<20} {:>6} {:>10.4} {:>10} {:>10} {:>10} {:>10} {:>10}",
            a.metric,
            a.n,
            a.mae,
            short(a.spearman_rho),
            short(a.spearman_p),
            short(a.eq_mean),
            short(a.neq_mean),
            short(a.distinguishability)
        );
    }
    if let Some(out) = out {
        let mut w = csv::Writer::from_path(out).data()?;
        w.write_record([
            "metric", "n", "mae", "spearman_rho", "spearman_p", "n_equivalent", "eq_mean", "neq_mean", "d",
        ])
        .data()?;
        for a in &audits {
            w.write_record([
                a.metric.clone(),
                a.n.to_string(),
                a.mae.to_string(),
                cell(a.spearman_rho),
                cell(a.spearman_p),
                a.n_equivalent.to_string(),
                cell(a.eq_mean),
                cell(a.neq_mean),
                cell(a.distinguishability),
            ])
            .data()?;
        }
        w.flush().data()?;
    }
    Ok(())
}
