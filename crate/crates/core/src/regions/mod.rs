//! Surface/functional similarity regions and threshold selection.
//!
//! Points live in the plane x = surface similarity, y = functional similarity.
//! Given thresholds `x_lo < x_hi`, `y_lo < y_hi`:
//!
//! * SFD (similar form, different semantics): `x >= x_hi` and `y <= y_lo`
//! * DFS (different form, similar semantics): `x <= x_lo` and `y >= y_hi`
//! * Control: everything else.
//!
//! [`select_thresholds`] scans a δ-grid of threshold tuples for the one that
//! maximises how much worse metrics do in the two corner regions than in
//! Control. Region error sums come from 2-D cumulative tables of exact sums,
//! so each candidate costs O(metrics) and the result is bit-identical to a
//! naive scan that sums each region with a correctly rounded summation.

pub mod exact;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exact::ExactSum;

use crate::model::{CodePairRecord, RegionThresholds, ALL_TIMED_OUT};

pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegionLabel {
    #[serde(rename = "SFD")]
    Sfd,
    #[serde(rename = "DFS")]
    Dfs,
    Control,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::Sfd => "SFD",
            RegionLabel::Dfs => "DFS",
            RegionLabel::Control => "Control",
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Boundary-inclusive classification.
pub fn classify(x: f64, y: f64, th: &RegionThresholds) -> RegionLabel {
    if x >= th.x_hi && y <= th.y_lo {
        RegionLabel::Sfd
    } else if x <= th.x_lo && y >= th.y_hi {
        RegionLabel::Dfs
    } else {
        RegionLabel::Control
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorFlavor {
    /// `|y - m|`
    #[default]
    Absolute,
    /// `(y - m)^2`
    Squared,
}

impl ErrorFlavor {
    pub fn error(self, truth: f64, score: f64) -> f64 {
        let d = truth - score;
        match self {
            ErrorFlavor::Absolute => d.abs(),
            ErrorFlavor::Squared => d * d,
        }
    }
}

impl std::str::FromStr for ErrorFlavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "absolute" | "abs" => Ok(ErrorFlavor::Absolute),
            "squared" | "sq" => Ok(ErrorFlavor::Squared),
            other => Err(format!("unknown error flavor {other:?} (expected absolute or squared)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("step size {0} must be in (0, 0.5]")]
    InvalidDelta(f64),
    #[error("no metrics given")]
    NoMetrics,
    #[error("point {index} is outside the unit square or lacks a score for every metric")]
    InvalidPoint { index: usize },
    #[error("no candidate leaves SFD, DFS and Control all non-empty; try a smaller step or more data")]
    NoFeasibleCandidate,
    #[error("records lack required scores: {}", .0.join(", "))]
    MissingScores(Vec<String>),
    #[error("no points fall in the Control region")]
    NoControlPoints,
}

/// One pair in the plane with its metric scores (aligned with a metric list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub x: f64,
    pub y: f64,
    pub scores: Vec<f64>,
}

/// Points for the records that have a surface similarity and a df_score other
/// than the all-timed-out sentinel. Records lacking either, or any of
/// `metrics`, are reported by pair_id.
pub fn points_from_records(records: &[CodePairRecord], metrics: &[String]) -> Result<Vec<RegionPoint>, RegionError> {
    let mut missing = Vec::new();
    let mut points = Vec::new();
    for r in records {
        if r.df_score == Some(ALL_TIMED_OUT) {
            continue;
        }
        let scores: Option<Vec<f64>> = metrics.iter().map(|m| r.metric_scores.get(m).copied()).collect();
        match (r.surface_sim, r.df_score, scores) {
            (Some(x), Some(y), Some(scores)) => points.push(RegionPoint { x, y, scores }),
            _ => missing.push(r.pair_id.clone()),
        }
    }
    if missing.is_empty() {
        Ok(points)
    } else {
        Err(RegionError::MissingScores(missing))
    }
}

/// Grid values `0, δ, 2δ, ..., 1`. When `1/δ` is (within 1e-9) an integer K
/// the values are `k/K`; otherwise multiples of δ below 1 followed by 1.
pub fn threshold_grid(delta: f64) -> Result<Vec<f64>, RegionError> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(RegionError::InvalidDelta(delta));
    }
    let k = (1.0 / delta).round();
    if ((1.0 / delta) - k).abs() < 1e-9 {
        let k = k as usize;
        return Ok((0..=k).map(|i| i as f64 / k as f64).collect());
    }
    let mut grid: Vec<f64> = (0..).map(|i| i as f64 * delta).take_while(|v| *v < 1.0).collect();
    grid.push(1.0);
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub thresholds: RegionThresholds,
    pub objective: f64,
    /// Candidates with all three regions non-empty.
    pub feasible: usize,
}

/// Per-metric error sums and a count over a set of points.
#[derive(Clone, Debug, Default, PartialEq)]
struct Cell {
    count: usize,
    sums: Vec<ExactSum>,
}

impl Cell {
    fn empty(metrics: usize) -> Self {
        Cell {
            count: 0,
            sums: vec![ExactSum::new(); metrics],
        }
    }

    fn absorb(&mut self, other: &Cell) {
        self.count += other.count;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
    }
}

/// Square table of cells indexed `[i][j]`, flattened.
struct Table {
    side: usize,
    cells: Vec<Cell>,
}

impl Table {
    fn new(side: usize, metrics: usize) -> Self {
        Table {
            side,
            cells: vec![Cell::empty(metrics); side * side],
        }
    }

    fn at(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.side + j]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut Cell {
        &mut self.cells[i * self.side + j]
    }

    /// Cumulates along `i` (ascending if `i_up`, else descending) then `j`.
    fn cumulate(&mut self, i_up: bool, j_up: bool) {
        let n = self.side;
        let order = |up: bool| -> Vec<usize> {
            if up {
                (0..n).collect()
            } else {
                (0..n).rev().collect()
            }
        };
        let (oi, oj) = (order(i_up), order(j_up));
        for w in oi.windows(2) {
            for j in 0..n {
                let prev = self.at(w[0], j).clone();
                self.at_mut(w[1], j).absorb(&prev);
            }
        }
        for i in 0..n {
            for w in oj.windows(2) {
                let prev = self.at(i, w[0]).clone();
                self.at_mut(i, w[1]).absorb(&prev);
            }
        }
    }
}

/// Corner-table sums rounded to doubles, precomputed per cell.
struct Rounded {
    count: usize,
    sums: Vec<f64>,
}

/// Grid search with a deterministic tie rule: maximise the mean over metrics of
/// `((E_DFS - E_Control) + (E_SFD - E_Control)) / 2`, where `E_Z` is the mean
/// error of the metric over region Z; among equal objectives the
/// lexicographically smallest `(x_lo, x_hi, y_lo, y_hi)` wins. Candidates with
/// an empty SFD, DFS or Control region are skipped.
pub fn select_thresholds(
    points: &[RegionPoint],
    n_metrics: usize,
    delta: f64,
    flavor: ErrorFlavor,
) -> Result<Selection, RegionError> {
    let grid = threshold_grid(delta)?;
    if n_metrics == 0 {
        return Err(RegionError::NoMetrics);
    }
    for (index, p) in points.iter().enumerate() {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(p.x) || !unit(p.y) || p.scores.len() != n_metrics || p.scores.iter().any(|s| !s.is_finite()) {
            return Err(RegionError::InvalidPoint { index });
        }
    }
    let g = grid.len();
    // first grid index a with v <= grid[a]; last index b with v >= grid[b]
    let up_index = |v: f64| grid.iter().position(|t| v <= *t).expect("grid ends at 1");
    let down_index = |v: f64| grid.iter().rposition(|t| v >= *t).expect("grid starts at 0");

    // dfs[a][d]: points with x <= grid[a] and y >= grid[d]
    // sfd[b][c]: points with x >= grid[b] and y <= grid[c]
    let mut dfs = Table::new(g, n_metrics);
    let mut sfd = Table::new(g, n_metrics);
    let mut total = Cell::empty(n_metrics);
    for p in points {
        let errs: Vec<f64> = p.scores.iter().map(|m| flavor.error(p.y, *m)).collect();
        let mut cell = Cell::empty(n_metrics);
        cell.count = 1;
        for (s, e) in cell.sums.iter_mut().zip(&errs) {
            s.add(*e);
        }
        dfs.at_mut(up_index(p.x), down_index(p.y)).absorb(&cell);
        sfd.at_mut(down_index(p.x), up_index(p.y)).absorb(&cell);
        total.absorb(&cell);
    }
    dfs.cumulate(true, false);
    sfd.cumulate(false, true);
    let round = |t: &Table| -> Vec<Rounded> {
        t.cells
            .iter()
            .map(|c| Rounded {
                count: c.count,
                sums: c.sums.iter().map(ExactSum::to_f64).collect(),
            })
            .collect()
    };
    let (dfs_r, sfd_r) = (round(&dfs), round(&sfd));

    let best = (0..g)
        .into_par_iter()
        .map(|a| {
            let mut best: Option<(f64, [usize; 4])> = None;
            let mut feasible = 0usize;
            let mut ctrl = vec![ExactSum::new(); n_metrics];
            for d in 1..g {
                let dc = &dfs_r[a * g + d];
                if dc.count == 0 {
                    continue;
                }
                let dcell = dfs.at(a, d);
                for b in a + 1..g {
                    for c in 0..d {
                        let sc = &sfd_r[b * g + c];
                        if sc.count == 0 {
                            continue;
                        }
                        let n_ctrl = total.count - dc.count - sc.count;
                        if n_ctrl == 0 {
                            continue;
                        }
                        let scell = sfd.at(b, c);
                        let mut acc = 0.0;
                        for k in 0..n_metrics {
                            ctrl[k].clone_from(&total.sums[k]);
                            ctrl[k] -= &dcell.sums[k];
                            ctrl[k] -= &scell.sums[k];
                            let e_ctrl = ctrl[k].to_f64() / n_ctrl as f64;
                            let e_dfs = dc.sums[k] / dc.count as f64;
                            let e_sfd = sc.sums[k] / sc.count as f64;
                            acc += ((e_dfs - e_ctrl) + (e_sfd - e_ctrl)) / 2.0;
                        }
                        let objective = acc / n_metrics as f64;
                        feasible += 1;
                        let idx = [a, b, c, d];
                        if best.is_none_or(|(o, i)| better(objective, idx, o, i)) {
                            best = Some((objective, idx));
                        }
                    }
                }
            }
            (best, feasible)
        })
        .reduce(
            || (None, 0),
            |(l, fl), (r, fr)| {
                let pick = match (l, r) {
                    (Some(x), Some(y)) => Some(if better(y.0, y.1, x.0, x.1) { y } else { x }),
                    (x, None) => x,
                    (None, y) => y,
                };
                (pick, fl + fr)
            },
        );
    match best {
        (Some((objective, [a, b, c, d])), feasible) => Ok(Selection {
            thresholds: RegionThresholds {
                x_lo: grid[a],
                x_hi: grid[b],
                y_lo: grid[c],
                y_hi: grid[d],
            },
            objective,
            feasible,
        }),
        (None, _) => Err(RegionError::NoFeasibleCandidate),
    }
}

fn better(objective: f64, idx: [usize; 4], than: f64, than_idx: [usize; 4]) -> bool {
    objective > than || (objective == than && idx < than_idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub total: usize,
    pub sfd: usize,
    pub dfs: usize,
    pub control: usize,
}

impl Coverage {
    pub fn count(&self, label: RegionLabel) -> usize {
        match label {
            RegionLabel::Sfd => self.sfd,
            RegionLabel::Dfs => self.dfs,
            RegionLabel::Control => self.control,
        }
    }

    /// Share of all points in `label`; 0 for an empty set.
    pub fn fraction(&self, label: RegionLabel) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(label) as f64 / self.total as f64
        }
    }
}

pub fn region_coverage(points: &[(f64, f64)], th: &RegionThresholds) -> Coverage {
    let mut cov = Coverage {
        total: points.len(),
        sfd: 0,
        dfs: 0,
        control: 0,
    };
    for (x, y) in points {
        match classify(*x, *y, th) {
            RegionLabel::Sfd => cov.sfd += 1,
            RegionLabel::Dfs => cov.dfs += 1,
            RegionLabel::Control => cov.control += 1,
        }
    }
    cov
}

/// Euclidean distance from `(x, y)` to the nearer corner region.
pub fn boundary_distance(x: f64, y: f64, th: &RegionThresholds) -> f64 {
    let to_sfd = (th.x_hi - x).max(0.0).hypot((y - th.y_lo).max(0.0));
    let to_dfs = (x - th.x_lo).max(0.0).hypot((th.y_hi - y).max(0.0));
    to_sfd.min(to_dfs)
}

/// Mean [`boundary_distance`] over the Control points.
pub fn mean_boundary_distance(points: &[(f64, f64)], th: &RegionThresholds) -> Result<f64, RegionError> {
    let dists: Vec<f64> = points
        .iter()
        .filter(|(x, y)| classify(*x, *y, th) == RegionLabel::Control)
        .map(|(x, y)| boundary_distance(*x, *y, th))
        .collect();
    if dists.is_empty() {
        return Err(RegionError::NoControlPoints);
    }
    Ok(dists.iter().sum::<f64>() / dists.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_thresholds() -> RegionThresholds {
        RegionThresholds::new(0.65, 0.90, 0.10, 0.90).unwrap()
    }

    #[test]
    fn classification_examples() {
        let th = reference_thresholds();
        assert_eq!(classify(0.95, 0.05, &th), RegionLabel::Sfd);
        assert_eq!(classify(0.50, 0.95, &th), RegionLabel::Dfs);
        assert_eq!(classify(0.70, 0.50, &th), RegionLabel::Control);
        // boundaries belong to the corners
        assert_eq!(classify(0.90, 0.10, &th), RegionLabel::Sfd);
        assert_eq!(classify(0.65, 0.90, &th), RegionLabel::Dfs);
    }

    #[test]
    fn grid_values() {
        assert_eq!(threshold_grid(0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = threshold_grid(0.05).unwrap();
        assert_eq!((g.len(), g[13], g[20]), (21, 0.65, 1.0));
        assert_eq!(threshold_grid(0.3).unwrap().last(), Some(&1.0));
        assert_eq!(threshold_grid(0.3).unwrap().len(), 5);
        assert!(threshold_grid(0.0).is_err());
        assert!(threshold_grid(0.6).is_err());
    }

    #[test]
    fn distances() {
        let th = reference_thresholds();
        assert_eq!(boundary_distance(0.90, 0.10, &th), 0.0);
        let d = boundary_distance(0.70, 0.50, &th);
        assert_eq!(d, 0.05f64.hypot(0.40));
        assert!((d - 0.4031).abs() < 1e-4);
        // x = 0.7, y = 0.7: distances 0.2 (to x_hi, y pinned by clamp 0.6) vs hypot(0.05, 0.2)
        let pts = [(0.70, 0.50), (0.75, 0.70)];
        let mean = mean_boundary_distance(&pts, &th).unwrap();
        let expected = (0.05f64.hypot(0.40) + 0.10f64.hypot(0.20)) / 2.0;
        assert!((mean - expected).abs() < 1e-15);
        assert_eq!(mean_boundary_distance(&[(0.95, 0.0)], &th), Err(RegionError::NoControlPoints));
    }

    #[test]
    fn coverage_counts() {
        let th = reference_thresholds();
        let pts = [(0.95, 0.05), (0.50, 0.95), (0.70, 0.50), (0.80, 0.80)];
        let cov = region_coverage(&pts, &th);
        assert_eq!((cov.sfd, cov.dfs, cov.control), (1, 1, 2));
        let sum: f64 = [RegionLabel::Sfd, RegionLabel::Dfs, RegionLabel::Control]
            .iter()
            .map(|l| cov.fraction(*l))
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let empty = region_coverage(&[], &th);
        assert_eq!((empty.total, empty.fraction(RegionLabel::Sfd)), (0, 0.0));
    }

    fn pt(x: f64, y: f64, m: f64) -> RegionPoint {
        RegionPoint { x, y, scores: vec![m] }
    }

    #[test]
    fn degenerate_data_has_no_feasible_candidate() {
        let pts = vec![pt(0.5, 0.5, 0.5); 10];
        assert_eq!(
            select_thresholds(&pts, 1, 0.25, ErrorFlavor::Absolute),
            Err(RegionError::NoFeasibleCandidate)
        );
    }

    #[test]
    fn corners_with_large_errors_are_found() {
        // the metric tracks x; corners are where that is most wrong
        let pts = vec![
            pt(1.0, 0.0, 1.0),
            pt(0.0, 1.0, 0.0),
            pt(0.5, 0.5, 0.5),
            pt(0.6, 0.6, 0.6),
        ];
        let sel = select_thresholds(&pts, 1, 0.25, ErrorFlavor::Absolute).unwrap();
        assert_eq!(sel.objective, 1.0);
        // smallest tuple isolating exactly the two corner points
        assert_eq!(sel.thresholds.as_tuple(), (0.0, 0.25, 0.0, 0.25));
    }

    #[test]
    fn input_checks() {
        assert_eq!(select_thresholds(&[], 0, 0.25, ErrorFlavor::Absolute), Err(RegionError::NoMetrics));
        assert_eq!(
            select_thresholds(&[pt(1.5, 0.0, 0.0)], 1, 0.25, ErrorFlavor::Absolute),
            Err(RegionError::InvalidPoint { index: 0 })
        );
        let mut r = CodePairRecord::new("p", "t", "a", "b", crate::model::Level::Function);
        r.surface_sim = Some(0.5);
        r.df_score = Some(1.0);
        assert_eq!(
            points_from_records(&[r.clone()], &["bleu".to_string()]),
            Err(RegionError::MissingScores(vec!["p".into()]))
        );
        r.df_score = Some(ALL_TIMED_OUT);
        assert_eq!(points_from_records(&[r], &["bleu".to_string()]), Ok(vec![]));
    }
}
