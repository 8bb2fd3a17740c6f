use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::Serialize;

use semdiff_core::model::{load_dataset, RegionThresholds};
use semdiff_core::regions::{
    classify, mean_boundary_distance, points_from_records, region_coverage, select_thresholds, Coverage, RegionError,
    RegionLabel,
};

use crate::config::RunConfig;
use crate::io::{attach_scores, Classify, CmdResult};

#[derive(Debug, Serialize)]
struct Report {
    metrics: Vec<String>,
    delta: f64,
    error_flavor: String,
    thresholds: RegionThresholds,
    /// Absent when the thresholds were given rather than searched.
    objective: Option<f64>,
    feasible_candidates: Option<usize>,
    coverage: Coverage,
    fractions: [f64; 3],
    mean_boundary_distance: Option<f64>,
}

pub fn parse_thresholds(s: &str) -> anyhow::Result<RegionThresholds> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b, c, d] => RegionThresholds::new(*a, *b, *c, *d)
            .ok_or_else(|| anyhow!("thresholds must lie in [0, 1] with x_lo < x_hi and y_lo < y_hi")),
        _ => Err(anyhow!("expected x_lo,x_hi,y_lo,y_hi")),
    }
}

pub fn run(
    cfg: &RunConfig,
    input: &Path,
    scores: &[(String, PathBuf)],
    metrics: Option<&[String]>,
    fixed: Option<RegionThresholds>,
    scatter: Option<&Path>,
    out: Option<&Path>,
) -> CmdResult {
    let mut records = load_dataset(input).data()?.records;
    attach_scores(&mut records, scores)?;
    let metrics: Vec<String> = match metrics {
        Some(m) => m.to_vec(),
        None => records
            .iter()
            .flat_map(|r| r.metric_scores.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let region_err = |e: RegionError| match e {
        RegionError::InvalidDelta(_) | RegionError::NoMetrics => Err(anyhow!("{e}")).usage(),
        _ => Err(anyhow!("{e}")).data(),
    };
    let points = match points_from_records(&records, &metrics) {
        Ok(p) => p,
        Err(e) => return region_err(e),
    };
    let (thresholds, objective, feasible) = match fixed {
        Some(th) => (th, None, None),
        None => match select_thresholds(&points, metrics.len(), cfg.regions.delta, cfg.regions.error_flavor) {
            Ok(sel) => (sel.thresholds, Some(sel.objective), Some(sel.feasible)),
            Err(e) => return region_err(e),
        },
    };
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    let coverage = region_coverage(&xy, &thresholds);
    let report = Report {
        fractions: [RegionLabel::Sfd, RegionLabel::Dfs, RegionLabel::Control].map(|l| coverage.fraction(l)),
        metrics,
        delta: cfg.regions.delta,
        error_flavor: format!("{:?}", cfg.regions.error_flavor).to_lowercase(),
        thresholds,
        objective,
        feasible_candidates: feasible,
        coverage,
        mean_boundary_distance: mean_boundary_distance(&xy, &thresholds).ok(),
    };
    if let Some(path) = scatter {
        let mut w = csv::Writer::from_path(path).data()?;
        w.write_record(["x", "y", "label"]).data()?;
        for (x, y) in &xy {
            w.write_record([x.to_string(), y.to_string(), classify(*x, *y, &thresholds).as_str().to_string()])
                .data()?;
        }
        w.flush().data()?;
    }
    let text = serde_json::to_string_pretty(&report).data()? + "\n";
    match out {
        Some(path) => std::fs::write(path, text).data(),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
