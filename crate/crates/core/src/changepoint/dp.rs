use crate::changepoint::{ChangePointResult, SeriesMatrix};
use crate::error::{Error, Result};

/// Prefix sums of the column-centred data and of its squares, giving any
/// segment's squared error in O(m).
struct SegmentCost {
    m: usize,
    sums: Vec<f64>,
    squares: Vec<f64>,
}

impl SegmentCost {
    fn new(f: &SeriesMatrix) -> Self {
        let (l, m) = (f.len(), f.width());
        let means: Vec<f64> = (0..m)
            .map(|j| (0..l).map(|t| f.get(t, j)).sum::<f64>() / l as f64)
            .collect();
        let mut sums = vec![0.0; (l + 1) * m];
        let mut squares = vec![0.0; l + 1];
        for t in 0..l {
            let mut sq = 0.0;
            for j in 0..m {
                let v = f.get(t, j) - means[j];
                sums[(t + 1) * m + j] = sums[t * m + j] + v;
                sq += v * v;
            }
            squares[t + 1] = squares[t] + sq;
        }
        SegmentCost { m, sums, squares }
    }

    /// Squared error of rows `a..b` around their column means.
    fn cost(&self, a: usize, b: usize) -> f64 {
        let len = (b - a) as f64;
        let mut total = self.squares[b] - self.squares[a];
        for j in 0..self.m {
            let s = self.sums[b * self.m + j] - self.sums[a * self.m + j];
            total -= s * s / len;
        }
        total.max(0.0)
    }
}

/// Best `k`-subset of `candidates` under segment-mean squared error, found
/// by an exact dynamic program over the candidate positions only.
///
/// Asking for more breakpoints than there are distinct candidates returns
/// all of them with `shortfall` set.
pub fn dp_refine(f: &SeriesMatrix, candidates: &[usize], k: usize) -> Result<ChangePointResult> {
    let l = f.len();
    let mut nodes: Vec<usize> = candidates.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    if let Some(&bad) = nodes.iter().find(|&&b| b == 0 || b >= l) {
        return Err(Error::Contract(format!(
            "candidate {bad} outside 1..{l}"
        )));
    }
    let shortfall = k > nodes.len();
    let k = k.min(nodes.len());
    if k == 0 {
        let mut result = ChangePointResult::from_breakpoints(f, &[])?;
        result.shortfall = shortfall;
        return Ok(result);
    }

    let cost = SegmentCost::new(f);
    let c = nodes.len();
    // best[j][i]: least error covering rows 0..nodes[i] with j breakpoints,
    // the last of which is nodes[i].
    let mut best = vec![vec![f64::INFINITY; c]; k + 1];
    let mut back = vec![vec![usize::MAX; c]; k + 1];
    for i in 0..c {
        best[1][i] = cost.cost(0, nodes[i]);
    }
    for j in 2..=k {
        for i in j - 1..c {
            for p in j - 2..i {
                let v = best[j - 1][p] + cost.cost(nodes[p], nodes[i]);
                if v < best[j][i] {
                    best[j][i] = v;
                    back[j][i] = p;
                }
            }
        }
    }
    let (mut last, _) = (k - 1..c)
        .map(|i| (i, best[k][i] + cost.cost(nodes[i], l)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least k candidates");
    let mut chosen = vec![nodes[last]];
    for j in (2..=k).rev() {
        last = back[j][last];
        chosen.push(nodes[last]);
    }
    chosen.reverse();

    let mut result = ChangePointResult::from_breakpoints(f, &chosen)?;
    result.shortfall = shortfall;
    Ok(result)
}
