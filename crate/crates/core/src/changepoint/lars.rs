use crate::changepoint::{tv_weights, SeriesMatrix};
use crate::error::{Error, Result};

/// Row-major `rows × m` scratch matrix.
struct Block {
    m: usize,
    data: Vec<f64>,
}

impl Block {
    fn zeros(rows: usize, m: usize) -> Self {
        Block {
            m,
            data: vec![0.0; rows * m],
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.m..(i + 1) * self.m]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// δ-weighted correlation of every step basis vector with `r`:
/// `c_i = δ_i · Σ_{t ≥ i} r_t` for i in 1..l, returned at row i − 1.
/// `r` must have zero column sums, which makes the centred basis and the raw
/// step basis interchangeable.
fn correlations(r: &Block, l: usize, weights: &[f64]) -> Block {
    let m = r.m;
    let mut out = Block::zeros(l - 1, m);
    let mut suffix = vec![0.0; m];
    for t in (1..l).rev() {
        for (s, v) in suffix.iter_mut().zip(r.row(t)) {
            *s += v;
        }
        let w = weights[t - 1];
        for (o, s) in out.row_mut(t - 1).iter_mut().zip(&suffix) {
            *o = w * s;
        }
    }
    out
}

/// Inner product of the centred, weighted step vectors at positions i and j.
fn gram(i: usize, j: usize, l: usize, weights: &[f64]) -> f64 {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    weights[i - 1] * weights[j - 1] * (lo as f64) * ((l - hi) as f64) / l as f64
}

/// Solve `g x = b` for symmetric positive definite `g` (k × k) and every
/// column of `b` (k × m) by Cholesky factorisation.
fn cholesky_solve(g: &[f64], k: usize, b: &Block) -> Option<Block> {
    let mut low = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = g[i * k + j];
            for p in 0..j {
                s -= low[i * k + p] * low[j * k + p];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                low[i * k + i] = s.sqrt();
            } else {
                low[i * k + j] = s / low[j * k + j];
            }
        }
    }
    let m = b.m;
    let mut x = Block::zeros(k, m);
    for c in 0..m {
        let mut y = vec![0.0; k];
        for i in 0..k {
            let mut s = b.row(i)[c];
            for p in 0..i {
                s -= low[i * k + p] * y[p];
            }
            y[i] = s / low[i * k + i];
        }
        for i in (0..k).rev() {
            let mut s = y[i];
            for p in i + 1..k {
                s -= low[p * k + i] * x.row(p)[c];
            }
            x.row_mut(i)[c] = s / low[i * k + i];
        }
    }
    Some(x)
}

/// Smallest γ in [0, 1] where `‖c − γ a‖ = (1 − γ) cmax`.
fn entry_step(c: &[f64], a: &[f64], cmax: f64) -> Option<f64> {
    let c2 = cmax * cmax;
    let qa = dot(a, a) - c2;
    let qb = -2.0 * (dot(c, a) - c2);
    let qc = dot(c, c) - c2;
    let scale = c2.max(f64::MIN_POSITIVE);
    let mut roots = Vec::with_capacity(2);
    if qa.abs() <= 1e-12 * scale {
        if qb.abs() > 1e-15 * scale {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // Numerically stable pair of roots.
            let q = -0.5 * (qb + qb.signum() * sq);
            if q != 0.0 {
                roots.push(q / qa);
                roots.push(qc / q);
            } else {
                roots.push(0.0);
            }
        }
    }
    roots
        .into_iter()
        .filter(|g| g.is_finite() && *g >= -1e-12 && *g <= 1.0 + 1e-12)
        .map(|g| g.clamp(0.0, 1.0))
        .min_by(f64::total_cmp)
}

/// Up to `k_max` candidate breakpoints in the order the group fused LARS
/// path selects them.
///
/// Works on the column-centred data. Each step costs O(l·m) for the
/// correlation updates plus a k × k Cholesky solve on the active set.
/// Stops early once the residual is uncorrelated with every step, so a
/// constant matrix yields no candidates.
pub fn gflars_candidates(f: &SeriesMatrix, k_max: usize) -> Result<Vec<usize>> {
    let l = f.len();
    let m = f.width();
    if k_max == 0 || k_max > l - 1 {
        return Err(Error::Contract(format!(
            "candidate count {k_max} outside 1..={}",
            l - 1
        )));
    }
    let weights = tv_weights(l)?;

    let mut residual = Block::zeros(l, m);
    for j in 0..m {
        let mean = (0..l).map(|t| f.get(t, j)).sum::<f64>() / l as f64;
        for t in 0..l {
            residual.row_mut(t)[j] = f.get(t, j) - mean;
        }
    }
    let norm_f = f.sum_squares().sqrt();
    let tolerance = 1e-10 * norm_f.max(f64::MIN_POSITIVE);

    let mut corr = correlations(&residual, l, &weights);
    let norms = |corr: &Block| -> Vec<f64> {
        (0..l - 1).map(|i| dot(corr.row(i), corr.row(i)).sqrt()).collect()
    };
    let first = norms(&corr)
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, &n)| (i + 1, n));
    let mut active: Vec<usize> = match first {
        Some((pos, n)) if n > tolerance => vec![pos],
        _ => return Ok(Vec::new()),
    };

    while active.len() < k_max {
        let k = active.len();
        let cmax = active
            .iter()
            .map(|&p| dot(corr.row(p - 1), corr.row(p - 1)).sqrt())
            .fold(0.0, f64::max);
        if cmax <= tolerance {
            break;
        }

        let mut g = vec![0.0; k * k];
        for (a, &pa) in active.iter().enumerate() {
            for (b, &pb) in active.iter().enumerate() {
                g[a * k + b] = gram(pa, pb, l, &weights);
            }
        }
        let mut rhs = Block::zeros(k, m);
        for (a, &p) in active.iter().enumerate() {
            rhs.row_mut(a).copy_from_slice(corr.row(p - 1));
        }
        let Some(direction) = cholesky_solve(&g, k, &rhs) else {
            break;
        };

        // Fitted change along the direction: u = X̄_A · direction.
        let mut u = Block::zeros(l, m);
        for (a, &p) in active.iter().enumerate() {
            let w = weights[p - 1];
            let after = (l - p) as f64 / l as f64;
            let dir = direction.row(a);
            for t in 0..l {
                let basis = w * (if t >= p { 1.0 } else { 0.0 } - after);
                for (uv, d) in u.row_mut(t).iter_mut().zip(dir) {
                    *uv += basis * d;
                }
            }
        }
        let along = correlations(&u, l, &weights);

        let mut best: Option<(f64, usize)> = None;
        for pos in 1..l {
            if active.contains(&pos) {
                continue;
            }
            if let Some(gamma) = entry_step(corr.row(pos - 1), along.row(pos - 1), cmax) {
                if best.is_none_or(|(g, _)| gamma < g) {
                    best = Some((gamma, pos));
                }
            }
        }
        let (gamma, pos) = match best {
            Some(b) => b,
            None => break,
        };
        for (r, uv) in residual.data.iter_mut().zip(&u.data) {
            *r -= gamma * uv;
        }
        corr = correlations(&residual, l, &weights);
        active.push(pos);
    }
    Ok(active)
}
