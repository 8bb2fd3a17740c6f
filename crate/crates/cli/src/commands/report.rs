use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use semdiff_core::audit::mean;
use semdiff_core::model::{load_dataset, CodePairRecord, ALL_TIMED_OUT};

use crate::io::{Classify, CmdResult};

#[derive(Debug, Default, Serialize)]
struct Group {
    pairs: usize,
    with_surface_sim: usize,
    mean_surface_sim: Option<f64>,
    scored: usize,
    mean_df_score: Option<f64>,
    all_timed_out: usize,
    unscored: usize,
}

/// Variant kind from the pair id conventions used by `variants`.
fn kind(r: &CodePairRecord) -> &'static str {
    if r.pair_id.ends_with(":opt") {
        "optimized"
    } else if r.pair_id.contains(":mut:") {
        "mutated"
    } else {
        "other"
    }
}

fn summarize<'a>(records: impl Iterator<Item = &'a CodePairRecord>) -> Group {
    let records: Vec<_> = records.collect();
    let sims: Vec<f64> = records.iter().filter_map(|r| r.surface_sim).collect();
    let dfs: Vec<f64> = records.iter().filter_map(|r| r.scored()).collect();
    Group {
        pairs: records.len(),
        with_surface_sim: sims.len(),
        mean_surface_sim: mean(&sims).ok(),
        scored: dfs.len(),
        mean_df_score: mean(&dfs).ok(),
        all_timed_out: records.iter().filter(|r| r.df_score == Some(ALL_TIMED_OUT)).count(),
        unscored: records.iter().filter(|r| r.df_score.is_none()).count(),
    }
}

pub fn run(input: &Path, json: bool) -> CmdResult {
    let ds = load_dataset(input).data()?;
    let mut groups: BTreeMap<&str, Group> = BTreeMap::new();
    for k in ["mutated", "optimized", "other"] {
        let g = summarize(ds.records.iter().filter(|r| kind(r) == k));
        if g.pairs > 0 {
            groups.insert(k, g);
        }
    }
    groups.insert("all", summarize(ds.records.iter()));
    if json {
        println!("{}", serde_json::to_string_pretty(&groups).data()?);
        return Ok(());
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"));
    println!("dataset {} (config {})", input.display(), ds.header.config_digest);
    println!(
        "{:<10} {:>7} {:>11} {:>9} {:>9} {:>9}",
        "kind", "pairs", "SurfaceSim", "df_score", "timeout", "unscored"
    );
    for (k, g) in &groups {
        println!(
            "{:<10} {:>7} {:>11} {:>9} {:>9} {:>9}",
            k,
            g.pairs,
            opt(g.mean_surface_sim),
            opt(g.mean_df_score),
            g.all_timed_out,
            g.unscored
        );
    }
    Ok(())
}
