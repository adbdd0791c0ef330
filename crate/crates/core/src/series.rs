//! Per-series and multi-series statistics: relative frequency, word rank
//! score, smoothing, Wilson intervals, z-scoring, multi-term indices and
//! least-squares trends.
//!
//! Every function here is pure. Buckets with no tokens of the relevant order
//! are carried as a mask; masked points are excluded from means, fits and
//! standard deviations and are emitted as 0 (the wire format turns them into
//! nulls).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::BucketStats;
use crate::store::CountsSeries;

/// Standard normal deviate for a two-sided 95% interval.
pub const Z_95: f64 = 1.95996;

/// Largest n summed term by term in [`harmonic_number`].
const HARMONIC_EXACT_LIMIT: u64 = 1_000_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    RelativeFrequency,
    WordRankScore,
    Standardized,
    Index,
}

/// Transforms applied to a series, in application order.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Transform {
    RelativeFrequency,
    WordRankScore,
    /// Some buckets had no tokens and are masked.
    EmptyBucketMask { masked: usize },
    Smooth { window: usize },
    Wilson { z: f64 },
    Standardize,
    MultiTermIndex { members: usize },
    Crop { from: usize, to: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfidenceBand {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoredSeries {
    pub label: String,
    pub kind: SeriesKind,
    pub values: Vec<f64>,
    /// True where the bucket had no data.
    pub mask: Vec<bool>,
    pub applied: Vec<Transform>,
    pub ci: Option<ConfidenceBand>,
    /// Standardization met a zero standard deviation.
    pub degenerate: bool,
}

impl ScoredSeries {
    /// An unmasked series, mostly for tests and synthetic inputs.
    pub fn from_values(label: impl Into<String>, kind: SeriesKind, values: Vec<f64>) -> Self {
        let mask = vec![false; values.len()];
        ScoredSeries {
            label: label.into(),
            kind,
            values,
            mask,
            applied: Vec::new(),
            ci: None,
            degenerate: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values with masked buckets as `None`.
    pub fn masked_values(&self) -> Vec<Option<f64>> {
        self.values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| (!m).then_some(v))
            .collect()
    }

    fn unmasked(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .enumerate()
            .filter(|(_, (_, &m))| !m)
            .map(|(i, (&v, _))| (i, v))
    }
}

fn check_lengths(counts: &CountsSeries, stats: &[BucketStats]) -> Result<()> {
    if counts.counts.len() != stats.len() || counts.ranks.len() != stats.len() {
        return Err(Error::Contract(format!(
            "series of length {} against {} bucket stats",
            counts.counts.len(),
            stats.len()
        )));
    }
    Ok(())
}

fn mask_tag(mask: &[bool]) -> Option<Transform> {
    let masked = mask.iter().filter(|&&m| m).count();
    (masked > 0).then_some(Transform::EmptyBucketMask { masked })
}

/// f(t) = c(t) / n(t), with n(t) the token total of the n-gram's order.
pub fn relative_frequency(counts: &CountsSeries, stats: &[BucketStats]) -> Result<ScoredSeries> {
    check_lengths(counts, stats)?;
    let order = counts.ngram.order();
    let mut values = Vec::with_capacity(stats.len());
    let mut mask = Vec::with_capacity(stats.len());
    for (&c, s) in counts.counts.iter().zip(stats) {
        let n = s.order(order).n_total;
        mask.push(n == 0);
        values.push(if n == 0 { 0.0 } else { c as f64 / n as f64 });
    }
    let mut applied = vec![Transform::RelativeFrequency];
    applied.extend(mask_tag(&mask));
    Ok(ScoredSeries {
        label: counts.ngram.key(),
        kind: SeriesKind::RelativeFrequency,
        values,
        mask,
        applied,
        ci: None,
        degenerate: false,
    })
}

/// H_n = 1 + 1/2 + ... + 1/n.
///
/// Summed exactly (smallest terms first) up to n = 10^6, asymptotic
/// expansion beyond; absolute error stays below 1e-10.
pub fn harmonic_number(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("harmonic number of 0".into()));
    }
    if n <= HARMONIC_EXACT_LIMIT {
        return Ok((1..=n).rev().map(|j| 1.0 / j as f64).sum());
    }
    let x = n as f64;
    let inv2 = 1.0 / (x * x);
    Ok(x.ln() + EULER_GAMMA + 0.5 / x - inv2 / 12.0 + inv2 * inv2 / 120.0)
}

/// Zipf-derived score 1/(k·H) − 1/(k∅·H): the rank-implied frequency minus
/// that of an absent n-gram, so absence scores exactly 0.
pub fn word_rank_score(counts: &CountsSeries, stats: &[BucketStats]) -> Result<ScoredSeries> {
    check_lengths(counts, stats)?;
    let order = counts.ngram.order();
    let mut values = Vec::with_capacity(stats.len());
    let mut mask = Vec::with_capacity(stats.len());
    for ((&c, &rank), s) in counts.counts.iter().zip(&counts.ranks).zip(stats) {
        let o = s.order(order);
        if o.is_empty() {
            mask.push(true);
            values.push(0.0);
            continue;
        }
        mask.push(false);
        let zero_rank = o.zero_rank();
        if rank == 0 || rank > zero_rank || (c == 0) != (rank == zero_rank) {
            return Err(Error::State(format!(
                "rank table inconsistent for {} in bucket {}",
                counts.ngram, s.bucket
            )));
        }
        values.push(rank_score(rank, zero_rank, o.harmonic));
    }
    let mut applied = vec![Transform::WordRankScore];
    applied.extend(mask_tag(&mask));
    Ok(ScoredSeries {
        label: counts.ngram.key(),
        kind: SeriesKind::WordRankScore,
        values,
        mask,
        applied,
        ci: None,
        degenerate: false,
    })
}

/// Score of a single dense rank given the bucket's zero rank and H_{n(t)}.
pub fn rank_score(rank: u64, zero_rank: u64, harmonic: f64) -> f64 {
    if rank == zero_rank {
        return 0.0;
    }
    1.0 / (rank as f64 * harmonic) - 1.0 / (zero_rank as f64 * harmonic)
}

fn moving_average(values: &[f64], mask: &[bool], window: usize) -> (Vec<f64>, Vec<bool>) {
    let half = window / 2;
    let l = values.len();
    let mut out = Vec::with_capacity(l);
    let mut out_mask = Vec::with_capacity(l);
    for t in 0..l {
        if mask[t] {
            out.push(0.0);
            out_mask.push(true);
            continue;
        }
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(l - 1);
        let (sum, n) = (lo..=hi)
            .filter(|&i| !mask[i])
            .fold((0.0, 0usize), |(s, n), i| (s + values[i], n + 1));
        out.push(sum / n as f64);
        out_mask.push(false);
    }
    (out, out_mask)
}

/// Centred moving average over `window` buckets. Near the ends the window
/// is truncated to the available points and the divisor shrinks with it;
/// masked neighbours are skipped the same way. Bands, when present, are
/// averaged with the same windows.
pub fn smooth(series: &ScoredSeries, window: usize) -> Result<ScoredSeries> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Contract(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    if window > series.len() {
        return Err(Error::Contract(format!(
            "smoothing window {window} exceeds series length {}",
            series.len()
        )));
    }
    let (values, mask) = moving_average(&series.values, &series.mask, window);
    let ci = series.ci.as_ref().map(|band| ConfidenceBand {
        low: moving_average(&band.low, &series.mask, window).0,
        high: moving_average(&band.high, &series.mask, window).0,
    });
    let mut applied = series.applied.clone();
    applied.push(Transform::Smooth { window });
    Ok(ScoredSeries {
        values,
        mask,
        applied,
        ci,
        ..series.clone()
    })
}

/// Continuity-corrected Wilson score interval for `count` successes out of
/// `n_total` trials. `None` when `n_total` is 0.
///
/// The radicands are clamped at 0 and the bounds at [0, 1]. At the edges
/// (count 0 or count n) the corresponding bound is pinned to the observed
/// proportion, as the continuity correction would otherwise push it past.
pub fn wilson_interval(count: u64, n_total: u64, z: f64) -> Result<Option<(f64, f64)>> {
    if count > n_total {
        return Err(Error::Contract(format!(
            "count {count} exceeds total {n_total}"
        )));
    }
    if n_total == 0 {
        return Ok(None);
    }
    let n = n_total as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let centre = 2.0 * n * p + z2;
    let spread = z2 - 1.0 / n + 4.0 * n * p * (1.0 - p);
    let denom = 2.0 * (n + z2);
    let upper_root = (spread - (4.0 * p - 2.0)).max(0.0).sqrt();
    let lower_root = (spread + (4.0 * p - 2.0)).max(0.0).sqrt();
    let high = if count == n_total {
        1.0
    } else {
        ((centre + (z * upper_root + 1.0)) / denom).min(1.0)
    };
    let low = if count == 0 {
        0.0
    } else {
        ((centre - (z * lower_root + 1.0)) / denom).max(0.0)
    };
    Ok(Some((low, high)))
}

/// Attach Wilson bands to a relative-frequency series built from `counts`.
/// Empty buckets get a zero-width band at 0 and stay masked.
pub fn with_confidence_band(
    series: &ScoredSeries,
    counts: &CountsSeries,
    stats: &[BucketStats],
    z: f64,
) -> Result<ScoredSeries> {
    if series.kind != SeriesKind::RelativeFrequency {
        return Err(Error::InvalidCombination(
            "confidence intervals apply to relative-frequency series only".into(),
        ));
    }
    check_lengths(counts, stats)?;
    if series.len() != stats.len() {
        return Err(Error::Contract("series and counts differ in length".into()));
    }
    let order = counts.ngram.order();
    let mut low = Vec::with_capacity(stats.len());
    let mut high = Vec::with_capacity(stats.len());
    for (&c, s) in counts.counts.iter().zip(stats) {
        match wilson_interval(c, s.order(order).n_total, z)? {
            Some((lo, hi)) => {
                low.push(lo);
                high.push(hi);
            }
            None => {
                low.push(0.0);
                high.push(0.0);
            }
        }
    }
    let mut applied = series.applied.clone();
    applied.push(Transform::Wilson { z });
    Ok(ScoredSeries {
        ci: Some(ConfidenceBand { low, high }),
        applied,
        ..series.clone()
    })
}

/// Population mean and standard deviation over unmasked points.
fn moments(series: &ScoredSeries) -> Option<(f64, f64)> {
    let n = series.unmasked().count();
    if n == 0 {
        return None;
    }
    let mean = series.unmasked().map(|(_, v)| v).sum::<f64>() / n as f64;
    let var = series
        .unmasked()
        .map(|(_, v)| (v - mean) * (v - mean))
        .sum::<f64>()
        / n as f64;
    Some((mean, var.sqrt()))
}

/// z(t) = (f(t) − μ) / σ with population moments over unmasked buckets.
/// A zero σ (up to rounding) yields an all-zero series flagged degenerate.
pub fn standardize(series: &ScoredSeries) -> Result<ScoredSeries> {
    if series.len() < 2 {
        return Err(Error::Contract(format!(
            "standardization needs at least 2 buckets, got {}",
            series.len()
        )));
    }
    let mut applied = series.applied.clone();
    applied.push(Transform::Standardize);
    let scale = series
        .unmasked()
        .map(|(_, v)| v.abs())
        .fold(0.0f64, f64::max);
    let (values, degenerate) = match moments(series) {
        Some((mean, sd)) if sd > scale * 1e-12 && sd > 0.0 => (
            series
                .values
                .iter()
                .zip(&series.mask)
                .map(|(&v, &m)| if m { 0.0 } else { (v - mean) / sd })
                .collect(),
            false,
        ),
        _ => (vec![0.0; series.len()], true),
    };
    Ok(ScoredSeries {
        label: series.label.clone(),
        kind: SeriesKind::Standardized,
        values,
        mask: series.mask.clone(),
        applied,
        ci: None,
        degenerate,
    })
}

/// Per-bucket mean of the standardized members (members are standardized
/// here unless they already are). A bucket is masked only when every member
/// is masked there.
pub fn multi_term_index(members: &[ScoredSeries]) -> Result<ScoredSeries> {
    let Some(first) = members.first() else {
        return Err(Error::Contract("a multi-term index needs at least one series".into()));
    };
    let l = first.len();
    if members.iter().any(|s| s.len() != l) {
        return Err(Error::Contract("index members are on different timelines".into()));
    }
    let standardized: Vec<ScoredSeries> = members
        .iter()
        .map(|s| {
            if s.kind == SeriesKind::Standardized {
                Ok(s.clone())
            } else {
                standardize(s)
            }
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::with_capacity(l);
    let mut mask = Vec::with_capacity(l);
    for t in 0..l {
        let (sum, n) = standardized
            .iter()
            .filter(|s| !s.mask[t])
            .fold((0.0, 0usize), |(sum, n), s| (sum + s.values[t], n + 1));
        mask.push(n == 0);
        values.push(if n == 0 { 0.0 } else { sum / n as f64 });
    }
    let labels: Vec<&str> = members.iter().map(|s| s.label.as_str()).collect();
    let mut applied = first.applied.clone();
    if first.kind != SeriesKind::Standardized {
        applied.push(Transform::Standardize);
    }
    applied.push(Transform::MultiTermIndex {
        members: members.len(),
    });
    Ok(ScoredSeries {
        label: format!("[{}]", labels.join(" + ")),
        kind: SeriesKind::Index,
        values,
        mask,
        applied,
        ci: None,
        degenerate: standardized.iter().all(|s| s.degenerate),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    /// Change in value per bucket.
    pub slope: f64,
    /// Fitted value at the first bucket of the series.
    pub intercept: f64,
    /// Residual standard error, sqrt(SSR / (m − 2)); 0 for two points.
    pub stderr: f64,
    /// Number of unmasked points used.
    pub points: usize,
}

/// Ordinary least squares of value on bucket index over unmasked points.
pub fn linear_fit(series: &ScoredSeries) -> Result<FitResult> {
    let m = series.unmasked().count();
    if m < 2 {
        return Err(Error::Contract(format!(
            "a fit needs at least 2 unmasked points, got {m}"
        )));
    }
    let mf = m as f64;
    let x_mean = series.unmasked().map(|(i, _)| i as f64).sum::<f64>() / mf;
    let y_mean = series.unmasked().map(|(_, v)| v).sum::<f64>() / mf;
    let (sxx, sxy) = series.unmasked().fold((0.0, 0.0), |(sxx, sxy), (i, v)| {
        let dx = i as f64 - x_mean;
        (sxx + dx * dx, sxy + dx * (v - y_mean))
    });
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ssr: f64 = series
        .unmasked()
        .map(|(i, v)| {
            let r = v - (intercept + slope * i as f64);
            r * r
        })
        .sum();
    let stderr = if m == 2 {
        0.0
    } else {
        (ssr / (mf - 2.0)).sqrt()
    };
    Ok(FitResult {
        slope,
        intercept,
        stderr,
        points: m,
    })
}
