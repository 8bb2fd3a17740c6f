use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use semdiff_core::harness::{pair_plan, score_many, HarnessError, ProcessRunner, Runner, RunnerError, ScoreJob, ToyRunner};
use semdiff_core::model::{save_dataset, CodePairRecord, Dataset, DatasetAppender, DatasetHeader};

use crate::config::RunConfig;
use crate::io::{load_pairs, tasks_by_id, Classify, CmdResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ErrorNote {
    pair_id: String,
    error: String,
}

pub fn errors_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".errors.jsonl");
    out.with_file_name(name)
}

/// Records already in `path` from an earlier run with the same configuration.
/// A torn last line (the process died mid-write) is cut off.
fn read_checkpoint(path: &Path, header: &DatasetHeader) -> CmdResult<HashMap<String, CodePairRecord>> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashMap::new()),
        Err(e) => return Err(e).with_context(|| format!("cannot read {}", path.display())).data(),
    };
    let mut done = HashMap::new();
    let mut offset = 0usize;
    let mut keep = 0usize;
    let mut seen_header = false;
    for (i, chunk) in bytes.split_inclusive(|b| *b == b'\n').enumerate() {
        let complete = chunk.ends_with(b"\n");
        let text = String::from_utf8_lossy(chunk);
        let text = text.trim();
        let at = offset;
        offset += chunk.len();
        if text.is_empty() {
            keep = offset;
            continue;
        }
        if !seen_header {
            let found: DatasetHeader = serde_json::from_str(text)
                .with_context(|| format!("{}: first line is not a dataset header", path.display()))
                .data()?;
            if found.config_digest != header.config_digest {
                return Err(anyhow!(
                    "{} was written with a different configuration (digest {}); pass --restart to discard it",
                    path.display(),
                    found.config_digest
                ))
                .data();
            }
            seen_header = true;
            keep = offset;
            continue;
        }
        match serde_json::from_str::<CodePairRecord>(text) {
            Ok(r) if complete => {
                done.insert(r.pair_id.clone(), r);
                keep = offset;
            }
            _ if offset == bytes.len() => {
                log::warn!("{}: discarding a torn last line", path.display());
                keep = at;
            }
            Err(e) => return Err(anyhow!("{}:{}: {e}", path.display(), i + 1)).data(),
            Ok(_) => unreachable!("only the last chunk can lack a newline"),
        }
    }
    if keep < bytes.len() {
        let f = OpenOptions::new().write(true).open(path).data()?;
        f.set_len(keep as u64).data()?;
    }
    Ok(done)
}

fn read_notes(path: &Path) -> HashMap<String, String> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return HashMap::new();
    };
    text.lines()
        .filter_map(|l| serde_json::from_str::<ErrorNote>(l).ok())
        .map(|n| (n.pair_id, n.error))
        .collect()
}

type RunnerFactory = Box<dyn Fn() -> Result<Box<dyn Runner>, RunnerError> + Sync>;

fn runner_factory(cfg: &RunConfig) -> CmdResult<RunnerFactory> {
    let spec = cfg
        .runner
        .clone()
        .ok_or_else(|| anyhow!("no runner configured: pass --runner <path> (or --runner toy)"))
        .usage()?;
    if spec == "toy" {
        return Ok(Box::new(|| Ok(Box::new(ToyRunner::new()) as Box<dyn Runner>)));
    }
    let args = cfg.runner_args.clone();
    Ok(Box::new(move || {
        let mut r = ProcessRunner::new(&spec, args.clone());
        r.start()?;
        Ok(Box::new(r) as Box<dyn Runner>)
    }))
}

/// Differential scoring with pair-level checkpointing into `out`.
pub fn run(cfg: &RunConfig, input: &Path, tasks: &Path, out: &Path, restart: bool) -> CmdResult {
    let tasks = tasks_by_id(tasks)?;
    let pairs = load_pairs(input, Some(&tasks))?;
    let header = DatasetHeader::with_digest(cfg.digest());
    let notes_path = errors_path(out);
    let make_runner = runner_factory(cfg)?;
    // fail fast if the runner cannot start at all
    drop(make_runner().runner()?);

    if restart {
        for p in [out, notes_path.as_path()] {
            if p.exists() {
                std::fs::remove_file(p).data()?;
            }
        }
    }
    let mut done = read_checkpoint(out, &header)?;
    let mut notes = read_notes(&notes_path);
    if !done.is_empty() {
        log::info!("resuming: {} of {} pairs already scored", done.len(), pairs.len());
    }

    let run_plan = cfg.plan();
    let mut jobs = Vec::new();
    let mut appender = DatasetAppender::open(out, &header).data()?;
    let mut notes_file = OpenOptions::new().create(true).append(true).open(&notes_path).data()?;
    let note = |pair_id: &str, error: String, file: &mut std::fs::File| -> CmdResult {
        log::warn!("pair {pair_id}: {error}");
        let line = serde_json::to_string(&ErrorNote {
            pair_id: pair_id.to_string(),
            error: error.clone(),
        })
        .data()?;
        writeln!(file, "{line}").data()
    };
    for pair in &pairs {
        if done.contains_key(&pair.pair_id) {
            continue;
        }
        match tasks.get(&pair.task_id) {
            Some(task) => jobs.push(ScoreJob {
                plan: pair_plan(&run_plan, &cfg.harness, pair),
                pair: pair.clone(),
                task: task.clone(),
            }),
            None => {
                note(&pair.pair_id, format!("unknown task {:?}", pair.task_id), &mut notes_file)?;
                notes.insert(pair.pair_id.clone(), format!("unknown task {:?}", pair.task_id));
                appender.append(pair).data()?;
                done.insert(pair.pair_id.clone(), pair.clone());
            }
        }
    }

    let mut first_io_error = None;
    let total = jobs.len();
    let mut finished = 0usize;
    score_many(&jobs, &cfg.harness, cfg.jobs, &make_runner, |i, result| {
        let mut rec = jobs[i].pair.clone();
        match result {
            Ok(score) => score.apply(&mut rec),
            Err(e) => {
                let msg = match &e {
                    HarnessError::InitRejected(m) => format!("runner rejected the pair: {m}"),
                    other => other.to_string(),
                };
                if let Err(err) = note(&rec.pair_id, msg.clone(), &mut notes_file) {
                    first_io_error.get_or_insert(err);
                }
                notes.insert(rec.pair_id.clone(), msg);
            }
        }
        if let Err(e) = appender.append(&rec) {
            first_io_error.get_or_insert(crate::io::Failure::Data(e.into()));
        }
        finished += 1;
        log::info!("[{finished}/{total}] {} -> {:?}", rec.pair_id, rec.df_score);
        done.insert(rec.pair_id.clone(), rec);
    });
    if let Some(e) = first_io_error {
        return Err(e);
    }
    drop(appender);

    let records: Vec<CodePairRecord> = pairs
        .iter()
        .map(|p| done.remove(&p.pair_id).expect("every pair scored"))
        .collect();
    save_dataset(&Dataset::new(header, records), out).data()?;

    let ordered: Vec<String> = pairs
        .iter()
        .filter_map(|p| notes.get(&p.pair_id).map(|e| (p.pair_id.clone(), e.clone())))
        .map(|(pair_id, error)| serde_json::to_string(&ErrorNote { pair_id, error }).expect("note serializes"))
        .collect();
    if ordered.is_empty() {
        std::fs::remove_file(&notes_path).data()?;
    } else {
        std::fs::write(&notes_path, ordered.join("\n") + "\n").data()?;
        log::warn!("{} pairs could not be scored; see {}", ordered.len(), notes_path.display());
    }
    Ok(())
}
