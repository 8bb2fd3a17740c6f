use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use semdiff_core::model::{save_dataset, Dataset, DatasetHeader};
use semdiff_core::surface::surface_sim;

use crate::config::RunConfig;
use crate::io::{load_pairs, tasks_by_id, Classify, CmdResult};

/// Fills surface_sim for every pair. Pairs that fail to parse keep no value.
pub fn run(cfg: &RunConfig, input: &Path, tasks: Option<&Path>, out: &Path) -> CmdResult {
    let tasks = tasks.map(tasks_by_id).transpose()?;
    let records = load_pairs(input, tasks.as_ref())?;
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<f64>>> = records.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..cfg.jobs.min(records.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(r) = records.get(i) else { break };
                match surface_sim(&r.code_ori, &r.code_var) {
                    Ok(v) => *slots[i].lock().expect("slot") = Some(v),
                    Err(e) => log::warn!("pair {}: {e}", r.pair_id),
                }
            });
        }
    });
    let mut records = records;
    for (r, slot) in records.iter_mut().zip(slots) {
        r.surface_sim = slot.into_inner().expect("slot");
    }
    let ds = Dataset::new(DatasetHeader::with_digest(cfg.digest()), records);
    save_dataset(&ds, out).data()
}
