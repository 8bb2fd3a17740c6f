//! Statistics for auditing code evaluation metrics against functional
//! similarity: error, rank correlation, distinguishability and the
//! cross-paired datasets used to measure it.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::model::{CodePairRecord, Level};
use crate::regions::ExactSum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("empty series")]
    EmptySeries,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("mean inter-pair score is zero")]
    ZeroDenominator,
    #[error("cannot draw {requested} cross pairs from {tasks} tasks")]
    NotEnoughTasks { requested: usize, tasks: usize },
}

/// A metric's scores aligned with the ground truth, record by record.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub metric: String,
    pub scores: Vec<f64>,
    pub truth: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(metric: impl Into<String>, scores: Vec<f64>, truth: Vec<f64>) -> Result<Self, AuditError> {
        check_pair(&scores, &truth)?;
        Ok(ScoreSeries {
            metric: metric.into(),
            scores,
            truth,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

fn check_finite(xs: &[f64]) -> Result<(), AuditError> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(AuditError::NonFinite(i)),
        None => Ok(()),
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), AuditError> {
    if x.len() != y.len() {
        return Err(AuditError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(AuditError::EmptySeries);
    }
    check_finite(x)?;
    check_finite(y)
}

pub fn mae(series: &ScoreSeries) -> f64 {
    let total = ExactSum::of(series.scores.iter().zip(&series.truth).map(|(m, y)| (m - y).abs()));
    total.to_f64() / series.len() as f64
}

/// Correctly rounded sum divided by the count.
pub fn mean(xs: &[f64]) -> Result<f64, AuditError> {
    if xs.is_empty() {
        return Err(AuditError::EmptySeries);
    }
    check_finite(xs)?;
    Ok(ExactSum::of(xs.iter().copied()).to_f64() / xs.len() as f64)
}

/// Mean and sample (n−1) standard deviation; the deviation of one value is 0.
pub fn mean_std(xs: &[f64]) -> Result<(f64, f64), AuditError> {
    let m = mean(xs)?;
    if xs.len() == 1 {
        return Ok((m, 0.0));
    }
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((m, (ss / (xs.len() - 1) as f64).sqrt()))
}

/// 1-based ranks, ties sharing the average of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    pub p_value: f64,
}

/// Spearman's rank correlation with a two-sided p-value from the t
/// approximation on n−2 degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman, AuditError> {
    check_pair(x, y)?;
    let n = x.len();
    if n < 3 {
        return Err(AuditError::DegenerateInput(format!("need at least 3 points, got {n}")));
    }
    for (name, xs) in [("x", x), ("y", y)] {
        if xs.iter().all(|v| *v == xs[0]) {
            return Err(AuditError::DegenerateInput(format!("{name} is constant")));
        }
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y)).clamp(-1.0, 1.0);
    Ok(Spearman {
        rho,
        p_value: t_test_p(rho, n),
    })
}

fn t_test_p(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Ratio of the mean intra-pair score to the mean inter-pair score.
pub fn distinguishability(intra: &[f64], inter: &[f64]) -> Result<f64, AuditError> {
    let a = mean(intra)?;
    let b = mean(inter)?;
    if b == 0.0 {
        return Err(AuditError::ZeroDenominator);
    }
    Ok(a / b)
}

/// Distinguishability over repeated dataset constructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub per_run: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn distinguishability_runs(runs: &[(Vec<f64>, Vec<f64>)]) -> Result<RunSummary, AuditError> {
    let per_run = runs
        .iter()
        .map(|(intra, inter)| distinguishability(intra, inter))
        .collect::<Result<Vec<_>, _>>()?;
    let (mean, std) = mean_std(&per_run)?;
    Ok(RunSummary { per_run, mean, std })
}

/// Two functionally equivalent solutions of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPair {
    pub task_id: String,
    pub level: Level,
    pub slow: String,
    pub fast: String,
}

/// Each task's slow solution against its own fast solution.
pub fn own_pairs(tasks: &[SolutionPair]) -> Vec<CodePairRecord> {
    tasks
        .iter()
        .map(|t| CodePairRecord::new(format!("own:{}", t.task_id), t.task_id.clone(), &t.slow, &t.fast, t.level))
        .collect()
}

/// `count` distinct pairs (slow of task i, fast of task j), i ≠ j, drawn
/// without replacement and returned in (i, j) order.
pub fn cross_pair(tasks: &[SolutionPair], count: usize, seed: u64) -> Result<Vec<CodePairRecord>, AuditError> {
    let n = tasks.len();
    let available = n * n.saturating_sub(1);
    if n < 2 || count > available {
        return Err(AuditError::NotEnoughTasks {
            requested: count,
            tasks: n,
        });
    }
    let mut cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..count {
        let span = (cells.len() - k) as u64;
        let zone = u64::MAX - u64::MAX % span;
        let pick = loop {
            let v = rng.next_u64();
            if v < zone {
                break k + (v % span) as usize;
            }
        };
        cells.swap(k, pick);
    }
    let mut chosen = cells[..count].to_vec();
    chosen.sort_unstable();
    Ok(chosen
        .into_iter()
        .map(|(i, j)| {
            let (s, f) = (&tasks[i], &tasks[j]);
            CodePairRecord::new(format!("cross:{}:{}", s.task_id, f.task_id), s.task_id.clone(), &s.slow, &f.fast, s.level)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn mae_examples() {
        let s = |m: Vec<f64>, y: Vec<f64>| mae(&ScoreSeries::new("m", m, y).unwrap());
        assert_eq!(s(vec![0.5], vec![0.75]), 0.25);
        assert_eq!(s(vec![0.3, 0.9], vec![0.3, 0.9]), 0.0);
        assert_eq!(s(vec![1.0, 0.0], vec![0.0, 1.0]), 1.0);
        assert_eq!(ScoreSeries::new("m", vec![], vec![]), Err(AuditError::EmptySeries));
        assert_eq!(ScoreSeries::new("m", vec![1.0], vec![]), Err(AuditError::LengthMismatch(1, 0)));
        assert_eq!(ScoreSeries::new("m", vec![f64::NAN], vec![1.0]), Err(AuditError::NonFinite(0)));
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 3.0, 3.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(average_ranks(&[0.5, -1.0]), vec![2.0, 1.0]);
    }

    #[test]
    fn spearman_examples() {
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]).unwrap();
        assert_eq!((r.rho, r.p_value), (1.0, 0.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().rho, -1.0);
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(AuditError::DegenerateInput(_))));
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(AuditError::DegenerateInput(_))));
    }

    #[test]
    fn spearman_p_value_matches_closed_form() {
        // with 1 degree of freedom the t distribution is Cauchy:
        // p = 1 - (2/pi) atan|t|
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 2.0];
        let r = spearman(&x, &y).unwrap();
        assert!(close(r.rho, 0.5));
        let t: f64 = 0.5 * (1.0f64 / 0.75).sqrt();
        let expected = 1.0 - 2.0 / std::f64::consts::PI * t.atan();
        assert!((r.p_value - expected).abs() < 1e-9, "{} vs {expected}", r.p_value);
    }

    #[test]
    fn distinguishability_examples() {
        assert!(close(distinguishability(&[0.8, 0.6], &[0.35]).unwrap(), 2.0));
        assert_eq!(distinguishability(&[0.4, 0.2, 0.7], &[0.4, 0.2, 0.7]).unwrap(), 1.0);
        assert_eq!(distinguishability(&[0.4], &[0.0, 0.0]), Err(AuditError::ZeroDenominator));
        assert_eq!(distinguishability(&[], &[0.5]), Err(AuditError::EmptySeries));
    }

    #[test]
    fn mean_std_examples() {
        let (m, s) = mean_std(&[2.0, 4.0]).unwrap();
        assert_eq!(m, 3.0);
        assert!(close(s, std::f64::consts::SQRT_2));
        assert_eq!(mean_std(&[5.0]).unwrap(), (5.0, 0.0));
        assert_eq!(mean_std(&[0.7; 10]).unwrap().1, 0.0);
        assert_eq!(mean_std(&[]), Err(AuditError::EmptySeries));
    }

    fn solutions(n: usize) -> Vec<SolutionPair> {
        (1..=n)
            .map(|i| SolutionPair {
                task_id: format!("t{i}"),
                level: Level::Function,
                slow: format!("s{i}"),
                fast: format!("f{i}"),
            })
            .collect()
    }

    #[test]
    fn cross_pairs() {
        let two = cross_pair(&solutions(2), 2, 9).unwrap();
        let codes: Vec<(&str, &str)> = two.iter().map(|p| (p.code_ori.as_str(), p.code_var.as_str())).collect();
        assert_eq!(codes, vec![("s1", "f2"), ("s2", "f1")]);
        assert_eq!(
            cross_pair(&solutions(2), 3, 9),
            Err(AuditError::NotEnoughTasks { requested: 3, tasks: 2 })
        );
        assert!(cross_pair(&solutions(1), 0, 9).is_err());
        let a = cross_pair(&solutions(10), 25, 4).unwrap();
        assert_eq!(a, cross_pair(&solutions(10), 25, 4).unwrap());
        assert_ne!(a, cross_pair(&solutions(10), 25, 5).unwrap());
        let mut ids: Vec<&str> = a.iter().map(|p| p.pair_id.as_str()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 25);
        for p in &a {
            assert_ne!(p.code_ori[1..], p.code_var[1..]);
        }
    }

    #[test]
    fn run_summary() {
        let runs = vec![(vec![0.8], vec![0.4]), (vec![0.9], vec![0.3])];
        let s = distinguishability_runs(&runs).unwrap();
        assert_eq!(s.per_run.len(), 2);
        assert!(close(s.per_run[0], 2.0) && close(s.per_run[1], 3.0));
        assert!(close(s.mean, 2.5));
    }
}
