//! Failure classes, input detection and metric score files.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use semdiff_core::model::{load_dataset, load_tasks, load_variants, CodePairRecord, TaskSpec};

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Runner(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runner(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (Failure::Usage(e) | Failure::Data(e) | Failure::Runner(e)) = self;
        // causes already spelled out by the message above them are skipped
        let mut shown = String::new();
        for cause in e.chain() {
            let text = cause.to_string();
            if shown.contains(&text) {
                continue;
            }
            if !shown.is_empty() {
                shown.push_str(": ");
            }
            shown.push_str(&text);
        }
        f.write_str(&shown)
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub trait Classify<T> {
    fn usage(self) -> CmdResult<T>;
    fn data(self) -> CmdResult<T>;
    fn runner(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn data(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Data(e.into()))
    }
    fn runner(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Runner(e.into()))
    }
}

pub fn tasks_by_id(path: &Path) -> CmdResult<HashMap<String, TaskSpec>> {
    let tasks = load_tasks(path).data()?;
    Ok(tasks.into_iter().map(|t| (t.task_id.clone(), t)).collect())
}

enum InputKind {
    Variants,
    Pairs,
}

fn detect(path: &Path) -> anyhow::Result<InputKind> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("{}: not JSON", path.display()))?;
        if v.get("variant_id").is_some() {
            return Ok(InputKind::Variants);
        }
        if v.get("pair_id").is_some() {
            return Ok(InputKind::Pairs);
        }
    }
    Ok(InputKind::Pairs)
}

/// Pairs from a dataset file, or from a variants file (each variant against
/// its task's reference; needs `tasks`).
pub fn load_pairs(path: &Path, tasks: Option<&HashMap<String, TaskSpec>>) -> CmdResult<Vec<CodePairRecord>> {
    match detect(path).data()? {
        InputKind::Pairs => Ok(load_dataset(path).data()?.records),
        InputKind::Variants => {
            let tasks = tasks
                .ok_or_else(|| anyhow!("{} holds variants; --tasks is needed to pair them", path.display()))
                .usage()?;
            let (_, variants) = load_variants(path).data()?;
            variants
                .into_iter()
                .map(|v| {
                    let task = tasks
                        .get(&v.task_id)
                        .ok_or_else(|| anyhow!("variant {} names unknown task {:?}", v.variant_id, v.task_id))?;
                    Ok(CodePairRecord::new(
                        v.variant_id,
                        &task.task_id,
                        &task.reference_code,
                        v.variant_code,
                        task.level,
                    ))
                })
                .collect::<anyhow::Result<_>>()
                .data()
        }
    }
}

/// `name=path` as given to `--scores`.
pub fn parse_score_arg(arg: &str) -> anyhow::Result<(String, PathBuf)> {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => bail!("expected NAME=PATH, got {arg:?}"),
    }
}

/// Reads `pair_id -> score` from CSV (`pair_id,score` header) or JSONL
/// (`{"pair_id": ..., "score": ...}` per line), chosen by extension.
pub fn read_scores(path: &Path) -> anyhow::Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let mut put = |id: String, score: f64, line: usize| -> anyhow::Result<()> {
        if !score.is_finite() {
            bail!("{}:{line}: score for {id} is not finite", path.display());
        }
        if out.insert(id.clone(), score).is_some() {
            bail!("{}:{line}: duplicate pair_id {id:?}", path.display());
        }
        Ok(())
    };
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
        for (i, row) in rdr.deserialize::<(String, f64)>().enumerate() {
            let (id, score) = row.with_context(|| format!("{}:{}", path.display(), i + 2))?;
            put(id, score, i + 2)?;
        }
    } else {
        #[derive(serde::Deserialize)]
        struct Row {
            pair_id: String,
            score: f64,
        }
        let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
            put(row.pair_id, row.score, i + 1)?;
        }
    }
    Ok(out)
}

/// Merges side files into the records' metric_scores. Side files win over
/// scores already present.
pub fn attach_scores(records: &mut [CodePairRecord], files: &[(String, PathBuf)]) -> CmdResult {
    for (name, path) in files {
        let scores = read_scores(path).data()?;
        for r in records.iter_mut() {
            if let Some(s) = scores.get(&r.pair_id) {
                r.metric_scores.insert(name.clone(), *s);
            }
        }
    }
    Ok(())
}
