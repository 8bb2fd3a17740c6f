//! Ordered tree edit distance (Zhang–Shasha) with unit insert, delete and relabel costs.

use super::syntax::SyntaxTree;

/// Postorder view of a tree: labels, leftmost-leaf indices and keyroots.
struct Postorder<'a> {
    labels: Vec<&'a str>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(tree: &'a SyntaxTree) -> Self {
        let n = tree.len();
        let mut labels = Vec::with_capacity(n);
        let mut leftmost = Vec::with_capacity(n);
        let mut post_of = vec![0usize; n];
        if n > 0 {
            // (preorder node, next child to visit)
            let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
            while let Some(top) = stack.last_mut() {
                let (node, next) = *top;
                let kids = tree.children(node);
                if next < kids.len() {
                    top.1 += 1;
                    stack.push((kids[next], 0));
                    continue;
                }
                stack.pop();
                let post = labels.len();
                post_of[node] = post;
                labels.push(tree.label(node));
                leftmost.push(match kids.first() {
                    None => post,
                    Some(&first) => leftmost[post_of[first]],
                });
            }
        }
        let mut keyroots: Vec<usize> = (0..n)
            .filter(|&i| !(i + 1..n).any(|k| leftmost[k] == leftmost[i]))
            .collect();
        keyroots.sort_unstable();
        Postorder {
            labels,
            leftmost,
            keyroots,
        }
    }
}

/// Minimal number of unit-cost node insertions, deletions and relabelings
/// turning `a` into `b`.
pub fn tree_edit_distance(a: &SyntaxTree, b: &SyntaxTree) -> usize {
    let pa = Postorder::new(a);
    let pb = Postorder::new(b);
    let (n, m) = (pa.labels.len(), pb.labels.len());
    if n == 0 || m == 0 {
        return n + m;
    }
    let mut treedist = vec![0u32; n * m];
    let mut forest = vec![0u32; (n + 1) * (m + 1)];
    for &i in &pa.keyroots {
        for &j in &pb.keyroots {
            forest_distance(&pa, &pb, i, j, &mut treedist, &mut forest, m);
        }
    }
    treedist[(n - 1) * m + (m - 1)] as usize
}

fn forest_distance(
    pa: &Postorder,
    pb: &Postorder,
    i: usize,
    j: usize,
    treedist: &mut [u32],
    forest: &mut [u32],
    m: usize,
) {
    let li = pa.leftmost[i];
    let lj = pb.leftmost[j];
    let rows = i - li + 2;
    let cols = j - lj + 2;
    let idx = |r: usize, c: usize| r * cols + c;
    forest[idx(0, 0)] = 0;
    for r in 1..rows {
        forest[idx(r, 0)] = forest[idx(r - 1, 0)] + 1;
    }
    for c in 1..cols {
        forest[idx(0, c)] = forest[idx(0, c - 1)] + 1;
    }
    for r in 1..rows {
        let x = li + r - 1;
        for c in 1..cols {
            let y = lj + c - 1;
            let delete = forest[idx(r - 1, c)] + 1;
            let insert = forest[idx(r, c - 1)] + 1;
            if pa.leftmost[x] == li && pb.leftmost[y] == lj {
                let relabel = forest[idx(r - 1, c - 1)] + u32::from(pa.labels[x] != pb.labels[y]);
                let d = delete.min(insert).min(relabel);
                forest[idx(r, c)] = d;
                treedist[x * m + y] = d;
            } else {
                let rr = pa.leftmost[x] - li;
                let cc = pb.leftmost[y] - lj;
                let subtree = forest[idx(rr, cc)] + treedist[x * m + y];
                forest[idx(r, c)] = delete.min(insert).min(subtree);
            }
        }
    }
}
