//! Differential execution of code pairs and the functional-similarity score.
//!
//! For each of R repetitions a fresh buffer set is generated, both sides run
//! on every buffer, and the repetition scores `matched / executed`, where
//! inputs on which either side timed out (or the binding program failed) are
//! left out of both counts. A repetition that overruns its wall-clock budget,
//! or executes nothing, is discarded. The pair's score is the mean over the
//! surviving repetitions, or [`ALL_TIMED_OUT`] when none survive.

pub mod protocol;
pub mod runner;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzz::{generate_buffers, FuzzPlan, FUNCTION_LEVEL_INPUTS, PROGRAM_LEVEL_INPUTS};
use crate::model::{CodePairRecord, Level, TaskSpec, ALL_TIMED_OUT};
pub use protocol::{InitRequest, Outcome};
pub use runner::{ExecutionResult, ProcessRunner, Runner, RunnerError, ToyRunner};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    /// Overrides the level-specific input count when set.
    pub n_inputs: Option<usize>,
    pub repetitions: usize,
    pub repetition_budget_seconds: f64,
    pub per_input_timeout_seconds: f64,
    pub errors_match: bool,
    pub function_inputs: usize,
    pub program_inputs: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            n_inputs: None,
            repetitions: 5,
            repetition_budget_seconds: 60.0,
            per_input_timeout_seconds: 1.0,
            errors_match: true,
            function_inputs: FUNCTION_LEVEL_INPUTS,
            program_inputs: PROGRAM_LEVEL_INPUTS,
        }
    }
}

impl HarnessConfig {
    pub fn inputs_for(&self, level: Level) -> usize {
        self.n_inputs.unwrap_or(match level {
            Level::Function => self.function_inputs,
            Level::Program => self.program_inputs,
        })
    }

    pub fn budget(&self) -> Duration {
        Duration::from_secs_f64(self.repetition_budget_seconds)
    }

    pub fn per_input_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.per_input_timeout_seconds)
    }

    pub fn validate(&self) -> Result<(), String> {
        let n_ok = self.n_inputs.map_or(true, |n| n >= 1) && self.function_inputs >= 1 && self.program_inputs >= 1;
        if !n_ok {
            return Err("input counts must be at least 1".into());
        }
        if self.repetitions == 0 {
            return Err("repetitions must be at least 1".into());
        }
        let t = self.repetition_budget_seconds;
        let t_in = self.per_input_timeout_seconds;
        if !(t.is_finite() && t > 0.0) {
            return Err(format!("repetition budget {t} must be positive"));
        }
        if !(t_in.is_finite() && t_in > 0.0) {
            return Err(format!("per-input timeout {t_in} must be positive"));
        }
        if t_in > t {
            return Err(format!("per-input timeout {t_in} exceeds the repetition budget {t}"));
        }
        Ok(())
    }
}

/// Whether two non-timeout outcomes count as agreeing.
pub fn canonical_equal(a: &Outcome, b: &Outcome, errors_match: bool) -> bool {
    match (a, b) {
        (Outcome::Output(x), Outcome::Output(y)) => x == y,
        (Outcome::ErrorToken(x), Outcome::ErrorToken(y)) => errors_match && x == y,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepStatus {
    Survived,
    /// Overran the repetition budget; discarded.
    OverBudget,
    /// Every input was excluded; discarded.
    NothingExecuted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepStats {
    pub seed: u64,
    pub n_inputs: usize,
    /// Inputs run before the repetition ended.
    pub attempted: usize,
    pub executed: usize,
    pub excluded: usize,
    pub timeouts: usize,
    pub bind_errors: usize,
    pub matched: usize,
    pub status: RepStatus,
}

impl RepStats {
    /// `matched / executed` for a surviving repetition.
    pub fn score(&self) -> Option<f64> {
        (self.status == RepStatus::Survived).then(|| self.matched as f64 / self.executed as f64)
    }

    /// `matched / N`, dividing by all inputs as the original algorithm does.
    pub fn literal_score(&self) -> Option<f64> {
        (self.status == RepStatus::Survived).then(|| self.matched as f64 / self.n_inputs as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub rep_scores: Vec<f64>,
    pub df_score: f64,
    pub repetitions: Vec<RepStats>,
}

impl PairScore {
    fn from_reps(repetitions: Vec<RepStats>) -> Self {
        let rep_scores: Vec<f64> = repetitions.iter().filter_map(RepStats::score).collect();
        PairScore {
            df_score: mean_or_sentinel(&rep_scores),
            rep_scores,
            repetitions,
        }
    }

    /// The score with `matched / N` repetition scores.
    pub fn literal_df_score(&self) -> f64 {
        let lit: Vec<f64> = self.repetitions.iter().filter_map(RepStats::literal_score).collect();
        mean_or_sentinel(&lit)
    }

    /// Copies the scores into `record`.
    pub fn apply(&self, record: &mut CodePairRecord) {
        record.rep_scores = Some(self.rep_scores.clone());
        record.df_score = Some(self.df_score);
    }
}

fn mean_or_sentinel(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        ALL_TIMED_OUT
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid harness configuration: {0}")]
    Config(String),
    #[error("pair does not load: {0}")]
    InitRejected(String),
    #[error(transparent)]
    RunnerCrashed(RunnerError),
}

impl From<RunnerError> for HarnessError {
    fn from(e: RunnerError) -> Self {
        match e {
            RunnerError::InitRejected(msg) => HarnessError::InitRejected(msg),
            other => HarnessError::RunnerCrashed(other),
        }
    }
}

pub fn init_request(pair: &CodePairRecord, task: &TaskSpec) -> InitRequest {
    InitRequest {
        mode: pair.level,
        code_a: pair.code_ori.clone(),
        code_b: pair.code_var.clone(),
        binding: task.binding_program.clone(),
        entry: task.entry_point.clone(),
    }
}

/// The fuzz plan for one pair: the run's plan with the input count for the
/// pair's level and a seed derived from the run seed and the pair id.
pub fn pair_plan(run_plan: &FuzzPlan, cfg: &HarnessConfig, pair: &CodePairRecord) -> FuzzPlan {
    FuzzPlan {
        n_inputs: cfg.inputs_for(pair.level),
        ..run_plan.reseeded(crate::fuzz::fnv1a64(pair.pair_id.as_bytes()))
    }
}

/// Scores one pair. Loads it into `runner`, then runs `cfg.repetitions`
/// repetitions of `plan.n_inputs` inputs; repetition `r` (from 1) uses the
/// plan reseeded with `r`.
pub fn score_pair(
    pair: &CodePairRecord,
    task: &TaskSpec,
    cfg: &HarnessConfig,
    plan: &FuzzPlan,
    runner: &mut dyn Runner,
) -> Result<PairScore, HarnessError> {
    cfg.validate().map_err(HarnessError::Config)?;
    plan.validate().map_err(HarnessError::Config)?;
    runner.init(&init_request(pair, task))?;
    let budget = cfg.budget();
    let t_in = cfg.per_input_timeout();
    let mut reps = Vec::with_capacity(cfg.repetitions);
    for r in 1..=cfg.repetitions {
        let rep_plan = plan.reseeded(r as u64);
        let started = Instant::now();
        let buffers = generate_buffers(&rep_plan);
        let mut stats = RepStats {
            seed: rep_plan.seed,
            n_inputs: rep_plan.n_inputs,
            attempted: 0,
            executed: 0,
            excluded: 0,
            timeouts: 0,
            bind_errors: 0,
            matched: 0,
            status: RepStatus::Survived,
        };
        for buf in &buffers {
            if started.elapsed() > budget {
                stats.status = RepStatus::OverBudget;
                break;
            }
            let result = runner.exec(buf, t_in)?;
            stats.attempted += 1;
            if result.excluded() {
                stats.excluded += 1;
                if result.a == Outcome::Timeout || result.b == Outcome::Timeout {
                    stats.timeouts += 1;
                } else {
                    stats.bind_errors += 1;
                }
                continue;
            }
            stats.executed += 1;
            if canonical_equal(&result.a, &result.b, cfg.errors_match) {
                stats.matched += 1;
            }
        }
        if stats.status == RepStatus::Survived && started.elapsed() > budget {
            stats.status = RepStatus::OverBudget;
        }
        if stats.status == RepStatus::Survived && stats.executed == 0 {
            stats.status = RepStatus::NothingExecuted;
        }
        log::debug!(
            "pair {} rep {r}: {:?}, {}/{} matched, {} excluded",
            pair.pair_id,
            stats.status,
            stats.matched,
            stats.executed,
            stats.excluded
        );
        reps.push(stats);
    }
    Ok(PairScore::from_reps(reps))
}

/// One unit of work for [`score_many`].
#[derive(Debug, Clone)]
pub struct ScoreJob {
    pub pair: CodePairRecord,
    pub task: TaskSpec,
    pub plan: FuzzPlan,
}

/// Scores `jobs` on `workers` threads, each with its own runner from
/// `make_runner`. `on_done` sees `(job index, result)` in completion order on
/// the calling thread. A worker replaces its runner after a crash.
pub fn score_many<F, R>(
    jobs: &[ScoreJob],
    cfg: &HarnessConfig,
    workers: usize,
    make_runner: F,
    mut on_done: impl FnMut(usize, Result<PairScore, HarnessError>),
) where
    F: Fn() -> Result<R, RunnerError> + Sync,
    R: Runner,
{
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    thread::scope(|scope| {
        for _ in 0..workers.max(1).min(jobs.len().max(1)) {
            let tx = tx.clone();
            let next = &next;
            let make_runner = &make_runner;
            scope.spawn(move || {
                let mut runner: Option<R> = None;
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = jobs.get(i) else { break };
                    if runner.is_none() {
                        match make_runner() {
                            Ok(r) => runner = Some(r),
                            Err(e) => {
                                let _ = tx.send((i, Err(HarnessError::RunnerCrashed(e))));
                                continue;
                            }
                        }
                    }
                    let r = runner.as_mut().expect("runner present");
                    let result = score_pair(&job.pair, &job.task, cfg, &job.plan, r);
                    if matches!(result, Err(HarnessError::RunnerCrashed(_))) {
                        runner = None;
                    }
                    if tx.send((i, result)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);
        for (i, result) in rx {
            on_done(i, result);
        }
    });
}
