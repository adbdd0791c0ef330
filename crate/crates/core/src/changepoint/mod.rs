//! Group change-points shared by a set of series.
//!
//! Candidates come from the group fused LARS path (breakpoints enter in the
//! order in which their δ-weighted group correlation with the residual
//! reaches the running maximum); an exact dynamic program over those
//! candidates then picks the best `K`-subset under squared loss. When `K`
//! is not given it is chosen by the relative residual drop.

mod dp;
mod lars;
mod oracle;

use serde::Serialize;

pub use dp::dp_refine;
pub use lars::gflars_candidates;
pub use oracle::{exhaustive_oracle, ORACLE_LIMIT};

use crate::error::{Error, Result};

/// Dense `l × m` matrix, time along rows, one column per series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    labels: Vec<String>,
}

impl SeriesMatrix {
    /// Build from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>], labels: Vec<String>) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::Contract("a series matrix needs at least one column".into()));
        }
        let rows = columns[0].len();
        if rows < 2 {
            return Err(Error::Contract(format!(
                "a series matrix needs at least 2 rows, got {rows}"
            )));
        }
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Contract("columns differ in length".into()));
        }
        if labels.len() != cols {
            return Err(Error::Contract("one label per column required".into()));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Contract("series matrix contains non-finite values".into()));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for t in 0..rows {
            data.extend(columns.iter().map(|c| c[t]));
        }
        Ok(SeriesMatrix {
            rows,
            cols,
            data,
            labels,
        })
    }

    /// Columns labelled `s0, s1, ...`.
    pub fn unlabeled(columns: &[Vec<f64>]) -> Result<Self> {
        let labels = (0..columns.len()).map(|j| format!("s{j}")).collect();
        Self::from_columns(columns, labels)
    }

    /// Number of time points `l`.
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Number of series `m`.
    pub fn width(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.data[t * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|t| self.get(t, j)).collect()
    }

    /// Same matrix with columns reordered by `order`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        let cols: Vec<Vec<f64>> = order.iter().map(|&j| self.column(j)).collect();
        let labels = order.iter().map(|&j| self.labels[j].clone()).collect();
        Self::from_columns(&cols, labels)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SeriesMatrix {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChangePointResult {
    /// Sorted positions in 1..l; `b` separates rows `b − 1` and `b`.
    pub breakpoints: Vec<usize>,
    /// Piecewise-constant approximation, `l` rows of `m` values.
    pub approximation: Vec<Vec<f64>>,
    /// Squared Frobenius distance between the data and the approximation.
    pub residual: f64,
    /// Fewer breakpoints than requested were available.
    pub shortfall: bool,
}

impl ChangePointResult {
    pub fn k(&self) -> usize {
        self.breakpoints.len()
    }

    /// Segment-mean approximation for the given breakpoints. Positions must
    /// be strictly increasing within 1..l.
    pub fn from_breakpoints(f: &SeriesMatrix, breakpoints: &[usize]) -> Result<Self> {
        let l = f.len();
        if breakpoints.windows(2).any(|w| w[0] >= w[1])
            || breakpoints.iter().any(|&b| b == 0 || b >= l)
        {
            return Err(Error::Contract(format!(
                "breakpoints {breakpoints:?} must increase strictly within 1..{l}"
            )));
        }
        let m = f.width();
        let mut approximation = Vec::with_capacity(l);
        let mut residual = 0.0;
        let bounds: Vec<usize> = std::iter::once(0)
            .chain(breakpoints.iter().copied())
            .chain(std::iter::once(l))
            .collect();
        for seg in bounds.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = (b - a) as f64;
            let means: Vec<f64> = (0..m)
                .map(|j| (a..b).map(|t| f.get(t, j)).sum::<f64>() / len)
                .collect();
            for t in a..b {
                for (j, mean) in means.iter().enumerate() {
                    let d = f.get(t, j) - mean;
                    residual += d * d;
                }
                approximation.push(means.clone());
            }
        }
        Ok(ChangePointResult {
            breakpoints: breakpoints.to_vec(),
            approximation,
            residual,
            shortfall: false,
        })
    }
}

/// Boundary correction δ_i = sqrt(l / (i (l − i))) for i in 1..l.
/// Index `i − 1` of the returned vector holds δ_i.
pub fn tv_weights(l: usize) -> Result<Vec<f64>> {
    if l < 2 {
        return Err(Error::Contract(format!(
            "weights need a length of at least 2, got {l}"
        )));
    }
    let lf = l as f64;
    Ok((1..l)
        .map(|i| {
            let i = i as f64;
            (lf / (i * (lf - i))).sqrt()
        })
        .collect())
}

/// Knobs for [`detect_group_changepoints`] when `K` is left to model
/// selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SelectionConfig {
    /// Keep adding breakpoints while each one removes at least this share of
    /// the zero-breakpoint residual.
    pub min_relative_drop: f64,
    /// Upper bound on K; the effective cap is also limited by l / 5.
    pub max_k: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            min_relative_drop: 0.02,
            max_k: 10,
        }
    }
}

/// Output of a detection run, with the residual path when `K` was selected.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Detection {
    pub result: ChangePointResult,
    /// `residuals[k]` for k = 0..=K_cap, present when K was model-selected.
    pub residual_path: Option<Vec<f64>>,
}

fn candidate_budget(k: usize, l: usize) -> usize {
    let slack = (2 * k).min(l - 1 - k);
    (k + slack).min(l - 1)
}

/// Group change-points of `f`, with exactly `k` breakpoints when given.
pub fn detect_group_changepoints(
    f: &SeriesMatrix,
    k: Option<usize>,
    selection: SelectionConfig,
) -> Result<Detection> {
    let l = f.len();
    match k {
        Some(k) => {
            if k > l - 1 {
                return Err(Error::Contract(format!(
                    "{k} breakpoints requested for a series of length {l}"
                )));
            }
            if k == 0 {
                return Ok(Detection {
                    result: ChangePointResult::from_breakpoints(f, &[])?,
                    residual_path: None,
                });
            }
            let candidates = gflars_candidates(f, candidate_budget(k, l))?;
            Ok(Detection {
                result: dp_refine(f, &candidates, k)?,
                residual_path: None,
            })
        }
        None => {
            let k_cap = selection.max_k.min(l / 5).min(l - 1);
            let budget = candidate_budget(k_cap, l);
            let path = if budget == 0 {
                Vec::new()
            } else {
                gflars_candidates(f, budget)?
            };
            // The LARS path is deterministic, so the candidates for a smaller
            // K are a prefix of these.
            let mut fits = vec![ChangePointResult::from_breakpoints(f, &[])?];
            for k in 1..=k_cap {
                let take = candidate_budget(k, l).min(path.len());
                fits.push(dp_refine(f, &path[..take], k)?);
            }
            let residuals: Vec<f64> = fits.iter().map(|r| r.residual).collect();
            let threshold = selection.min_relative_drop * residuals[0];
            let chosen = (1..fits.len())
                .rev()
                .find(|&k| {
                    !fits[k].shortfall
                        && residuals[0] > 0.0
                        && residuals[k - 1] - residuals[k] >= threshold
                })
                .unwrap_or(0);
            Ok(Detection {
                result: fits.swap_remove(chosen),
                residual_path: Some(residuals),
            })
        }
    }
}

#[cfg(test)]
mod tests;
