use std::path::Path;

use anyhow::anyhow;
use semdiff_core::model::{load_tasks, save_variants, DatasetHeader, Provenance, VariantKind, VariantRecord};
use semdiff_core::mutation::generate_mutants;
use semdiff_core::optimizer::{
    request_all, HttpProvider, OptimizationOutcome, OptimizationProvider, OptimizerError, StubProvider,
};
use semdiff_core::surface::parses;

use crate::config::RunConfig;
use crate::io::{Classify, CmdResult};

fn provider(cfg: &RunConfig) -> CmdResult<Option<Box<dyn OptimizationProvider>>> {
    if let Some(path) = &cfg.stub_fixture {
        return Ok(Some(Box::new(StubProvider::from_fixture(path).data()?)));
    }
    if cfg.optimizer.endpoint.is_empty() {
        log::warn!("no optimizer endpoint or stub fixture configured; generating mutants only");
        return Ok(None);
    }
    // a missing key or a bad provider section is a usage problem
    let p = HttpProvider::new(cfg.optimizer.clone()).usage()?;
    Ok(Some(Box::new(p)))
}

/// Mutants and (when a provider is configured) one optimized variant per task.
pub fn run(cfg: &RunConfig, tasks_path: &Path, out: &Path) -> CmdResult {
    let tasks = load_tasks(tasks_path).data()?;
    let limits = cfg.mutation_limits().usage()?;
    let provider = provider(cfg)?;

    let usable: Vec<_> = tasks
        .iter()
        .filter(|t| {
            let ok = parses(&t.reference_code);
            if !ok {
                log::warn!("task {}: reference code does not parse; skipped", t.task_id);
            }
            ok
        })
        .cloned()
        .collect();

    let optimized = match &provider {
        Some(p) => {
            let in_flight = cfg.optimizer.max_in_flight.min(cfg.jobs).max(1);
            request_all(&usable, p.as_ref(), in_flight)
        }
        None => Vec::new(),
    };

    let mut records = Vec::new();
    let mut transport_failures = 0;
    for (i, task) in usable.iter().enumerate() {
        match optimized.get(i) {
            Some(Ok(OptimizationOutcome::Optimized { code, strategies })) => records.push(VariantRecord {
                variant_id: format!("{}:opt", task.task_id),
                task_id: task.task_id.clone(),
                variant_code: code.clone(),
                variant_kind: VariantKind::Optimized,
                provenance: Provenance::Optimized {
                    strategies: strategies.clone(),
                },
                parses_ok: true,
            }),
            Some(Ok(OptimizationOutcome::NotOptimizable)) => {
                log::info!("task {}: optimizer reports nothing to optimize", task.task_id)
            }
            Some(Err(e)) => {
                if matches!(e, OptimizerError::Transport(_)) {
                    transport_failures += 1;
                }
                log::warn!("task {}: no optimized variant: {e}", task.task_id)
            }
            None => {}
        }
        match generate_mutants(&task.task_id, &task.reference_code, &limits) {
            Ok(mutants) => records.extend(mutants),
            Err(e) => log::warn!("task {}: mutation failed: {e}", task.task_id),
        }
    }
    save_variants(&DatasetHeader::with_digest(cfg.digest()), &records, out).data()?;
    log::info!("wrote {} variants for {} tasks to {}", records.len(), usable.len(), out.display());
    if !usable.is_empty() && transport_failures == usable.len() {
        return Err(anyhow!("every optimizer request failed in transport")).runner();
    }
    Ok(())
}
