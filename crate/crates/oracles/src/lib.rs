//! Reference implementations written for clarity, not speed. Each one is
//! derived from the definition of the quantity it computes and shares no code
//! with the library it checks.

/// Correctly rounded sum (Shewchuk's partials with the final half-way
/// correction, as in CPython's `math.fsum`).
pub fn fsum(xs: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &x0 in xs {
        let mut x = x0;
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        let yr = x - hi;
        if y == yr {
            hi = x;
        }
    }
    hi
}

/// Levenshtein distance over chars with the full (m+1)×(n+1) table.
pub fn levenshtein_dp(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Ordered labeled tree in preorder: `parent[0]` is `None`, and every other
/// node's parent precedes it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub labels: Vec<String>,
    pub parent: Vec<Option<usize>>,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn is_ancestor(&self, a: usize, mut d: usize) -> bool {
        while let Some(p) = self.parent[d] {
            if p == a {
                return true;
            }
            d = p;
        }
        false
    }

    /// `a` lies wholly to the left of `b`: earlier in preorder, not an ancestor.
    fn left_of(&self, a: usize, b: usize) -> bool {
        a < b && !self.is_ancestor(a, b)
    }
}

/// Unit-cost tree edit distance as the cheapest Tai mapping, found by
/// enumerating every partial one-to-one node mapping. Exponential; keep trees
/// to a handful of nodes.
pub fn tai_distance(t1: &Tree, t2: &Tree) -> usize {
    fn search(t1: &Tree, t2: &Tree, i: usize, used: &mut Vec<bool>, pairs: &mut Vec<(usize, usize)>, best: &mut usize) {
        if i == t1.len() {
            let relabel = pairs.iter().filter(|(a, b)| t1.labels[*a] != t2.labels[*b]).count();
            let cost = relabel + (t1.len() - pairs.len()) + (t2.len() - pairs.len());
            *best = (*best).min(cost);
            return;
        }
        // leave node i unmapped (deleted)
        search(t1, t2, i + 1, used, pairs, best);
        for j in 0..t2.len() {
            if used[j] {
                continue;
            }
            let consistent = pairs.iter().all(|&(a, b)| {
                t1.is_ancestor(a, i) == t2.is_ancestor(b, j)
                    && t1.is_ancestor(i, a) == t2.is_ancestor(j, b)
                    && t1.left_of(a, i) == t2.left_of(b, j)
                    && t1.left_of(i, a) == t2.left_of(j, b)
            });
            if consistent {
                used[j] = true;
                pairs.push((i, j));
                search(t1, t2, i + 1, used, pairs, best);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    let mut best = t1.len() + t2.len();
    search(t1, t2, 0, &mut vec![false; t2.len()], &mut Vec::new(), &mut best);
    best
}

/// Rank of each value: 1 + (number strictly smaller) + (ties − 1)/2.
pub fn average_ranks_by_counting(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let less = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Textbook Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx.sqrt() * vy.sqrt())
}

pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks_by_counting(x), &average_ranks_by_counting(y))
}

/// A point with its truth `y`, position `x` and one score per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPoint {
    pub x: f64,
    pub y: f64,
    pub scores: Vec<f64>,
}

/// Exhaustive threshold search: every grid tuple `(x1, x2, y1, y2)` with
/// `x1 < x2`, `y1 < y2` in lexicographic order; regions by direct
/// classification, region sums by [`fsum`]. Returns the first tuple reaching
/// the maximum objective, or `None` if no tuple has all three regions
/// non-empty.
pub fn naive_thresholds(points: &[ScoredPoint], grid: &[f64], squared: bool) -> Option<([f64; 4], f64)> {
    let m = points.first().map_or(0, |p| p.scores.len());
    let err = |p: &ScoredPoint, k: usize| {
        let d = p.y - p.scores[k];
        if squared {
            d * d
        } else {
            d.abs()
        }
    };
    let mut best: Option<([f64; 4], f64)> = None;
    for (a, &x1) in grid.iter().enumerate() {
        for &x2 in &grid[a + 1..] {
            for (c, &y1) in grid.iter().enumerate() {
                for &y2 in &grid[c + 1..] {
                    let mut dfs = Vec::new();
                    let mut sfd = Vec::new();
                    let mut ctrl = Vec::new();
                    for p in points {
                        if p.x >= x2 && p.y <= y1 {
                            sfd.push(p);
                        } else if p.x <= x1 && p.y >= y2 {
                            dfs.push(p);
                        } else {
                            ctrl.push(p);
                        }
                    }
                    if dfs.is_empty() || sfd.is_empty() || ctrl.is_empty() {
                        continue;
                    }
                    let mean_err = |region: &[&ScoredPoint], k: usize| {
                        let errs: Vec<f64> = region.iter().map(|p| err(p, k)).collect();
                        fsum(&errs) / region.len() as f64
                    };
                    let mut acc = 0.0;
                    for k in 0..m {
                        let e_ctrl = mean_err(&ctrl, k);
                        let e_dfs = mean_err(&dfs, k);
                        let e_sfd = mean_err(&sfd, k);
                        acc += ((e_dfs - e_ctrl) + (e_sfd - e_ctrl)) / 2.0;
                    }
                    let objective = acc / m as f64;
                    if best.is_none_or(|(_, o)| objective > o) {
                        best = Some(([x1, x2, y1, y2], objective));
                    }
                }
            }
        }
    }
    best
}
