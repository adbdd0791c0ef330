use serde::Serialize;

use crate::changepoint::{
    detect_group_changepoints, ChangePointResult, SelectionConfig, SeriesMatrix,
};
use crate::error::{Error, Result};
use crate::query::{ChangepointRequest, Query, ScoreKind};
use crate::series::{
    linear_fit, multi_term_index, relative_frequency, smooth, standardize, with_confidence_band,
    word_rank_score, FitResult, ScoredSeries, SeriesKind, Transform, Z_95,
};
use crate::store::CorpusSnapshot;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChangepointSummary {
    /// Positions within the analysed range (first bucket of each new segment).
    pub positions: Vec<usize>,
    /// Bucket labels of those positions.
    pub labels: Vec<String>,
    pub k: usize,
    /// K came from model selection rather than the request.
    pub selected: bool,
    pub residual: f64,
    pub residual_path: Option<Vec<f64>>,
    /// Piecewise-constant approximation per output series (column-major),
    /// on the standardized scale the detection ran on.
    pub approximation: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryResult {
    pub corpus_id: String,
    /// Labels of the analysed buckets.
    pub timeline: Vec<String>,
    /// First analysed bucket on the corpus timeline.
    pub offset: usize,
    pub series: Vec<ScoredSeries>,
    /// One entry per series when regression was requested; `None` entries
    /// had fewer than two usable points.
    pub fits: Option<Vec<Option<FitResult>>>,
    pub changepoints: Option<ChangepointSummary>,
    pub warnings: Vec<String>,
}

/// Run a validated query against one snapshot.
///
/// Stage order, per group: fetch counts, score, confidence band (raw
/// singleton relative frequencies), smoothing, standardization, multi-term
/// merge; then regression per output series and group change-points across
/// all of them. With a range, every stage sees only the cropped buckets.
pub fn execute(query: &Query, snapshot: &CorpusSnapshot) -> Result<QueryResult> {
    query.validate()?;
    if query.corpus_id != snapshot.corpus_id() {
        return Err(Error::Contract(format!(
            "query for {} run against {}",
            query.corpus_id,
            snapshot.corpus_id()
        )));
    }
    let l = snapshot.bucket_count();
    let range = query.range.clone().unwrap_or(0..l);
    if range.start >= range.end || range.end > l {
        return Err(Error::Range {
            what: "bucket range",
            value: format!("{}..{}", range.start, range.end),
            low: "0".into(),
            high: l.to_string(),
        });
    }
    let stats = &snapshot.bucket_stats()[range.clone()];
    let cropped = range != (0..l);
    let mut warnings = Vec::new();

    let mut series = Vec::with_capacity(query.groups.len());
    for group in &query.groups {
        let mut members = Vec::with_capacity(group.members.len());
        let mut unseen = 0;
        for ngram in &group.members {
            let counts = snapshot.get_series(ngram)?.crop(range.clone());
            if counts.unseen {
                unseen += 1;
                warnings.push(format!("unseen term: {ngram}"));
            }
            let mut s = match query.score {
                ScoreKind::RelativeFrequency => relative_frequency(&counts, stats)?,
                ScoreKind::WordRankScore => word_rank_score(&counts, stats)?,
            };
            if cropped {
                s.applied.push(Transform::Crop {
                    from: range.start,
                    to: range.end,
                });
            }
            if query.ci {
                s = with_confidence_band(&s, &counts, stats, Z_95)?;
            }
            if let Some(w) = query.smoothing {
                s = smooth(&s, w)?;
            }
            members.push(s);
        }
        if group.index && unseen == group.members.len() {
            warnings.push(format!("all terms unseen in {}", group.label()));
        }

        let out = if group.index {
            let index = multi_term_index(&members)?;
            let degenerate = members
                .iter()
                .filter(|m| standardize(m).map(|z| z.degenerate).unwrap_or(true))
                .count();
            if degenerate > 0 {
                warnings.push(format!(
                    "{degenerate} member(s) of {} are constant and contribute zeros",
                    group.label()
                ));
            }
            index
        } else {
            let mut s = members.pop().expect("singleton group");
            if query.standardize {
                s = standardize(&s)?;
                if s.degenerate {
                    warnings.push(format!(
                        "{} is constant; standardized series set to zero",
                        s.label
                    ));
                }
            }
            s
        };
        series.push(out);
    }

    let fits = if query.regression {
        let mut fits = Vec::with_capacity(series.len());
        for s in &series {
            match linear_fit(s) {
                Ok(f) => fits.push(Some(f)),
                Err(_) => {
                    warnings.push(format!("{}: too few points for a fit", s.label));
                    fits.push(None);
                }
            }
        }
        Some(fits)
    } else {
        None
    };

    let timeline: Vec<String> = range.clone().map(|b| snapshot.config().bucket_label(b)).collect();
    let changepoints = match query.changepoints {
        None => None,
        Some(request) => Some(group_changepoints(&series, request, &timeline)?),
    };

    Ok(QueryResult {
        corpus_id: snapshot.corpus_id().to_owned(),
        timeline,
        offset: range.start,
        series,
        fits,
        changepoints,
        warnings,
    })
}

/// Fill masked points by linear interpolation between the nearest unmasked
/// neighbours, carrying the end values outwards. All-masked → zeros.
pub fn interpolate_masked(values: &[f64], mask: &[bool]) -> Vec<f64> {
    let known: Vec<usize> = (0..values.len()).filter(|&i| !mask[i]).collect();
    if known.is_empty() {
        return vec![0.0; values.len()];
    }
    (0..values.len())
        .map(|i| {
            if !mask[i] {
                return values[i];
            }
            let next = known.partition_point(|&k| k < i);
            match (next.checked_sub(1).map(|p| known[p]), known.get(next)) {
                (Some(a), Some(&b)) => {
                    let w = (i - a) as f64 / (b - a) as f64;
                    values[a] * (1.0 - w) + values[b] * w
                }
                (Some(a), None) => values[a],
                (None, Some(&b)) => values[b],
                (None, None) => unreachable!("known is non-empty"),
            }
        })
        .collect()
}

fn group_changepoints(
    series: &[ScoredSeries],
    request: ChangepointRequest,
    timeline: &[String],
) -> Result<ChangepointSummary> {
    let mut columns = Vec::with_capacity(series.len());
    for s in series {
        // Raw scores are z-scored so loud terms do not dominate the group norm.
        let z = match s.kind {
            SeriesKind::RelativeFrequency | SeriesKind::WordRankScore => standardize(s)?,
            SeriesKind::Standardized | SeriesKind::Index => s.clone(),
        };
        columns.push(interpolate_masked(&z.values, &z.mask));
    }
    let labels = series.iter().map(|s| s.label.clone()).collect();
    let f = SeriesMatrix::from_columns(&columns, labels)?;
    let k = match request {
        ChangepointRequest::Auto => None,
        ChangepointRequest::Fixed(k) => Some(k),
    };
    let detection = detect_group_changepoints(&f, k, SelectionConfig::default())?;
    let mut result = detection.result;

    // Breakpoints between two buckets that are empty in every series carry no
    // evidence.
    let all_masked = |t: usize| series.iter().all(|s| s.mask[t]);
    let kept: Vec<usize> = result
        .breakpoints
        .iter()
        .copied()
        .filter(|&b| !(all_masked(b - 1) && all_masked(b)))
        .collect();
    if kept.len() != result.breakpoints.len() {
        let shortfall = result.shortfall;
        result = ChangePointResult::from_breakpoints(&f, &kept)?;
        result.shortfall = shortfall;
    }

    let m = f.width();
    let approximation = (0..m)
        .map(|j| result.approximation.iter().map(|row| row[j]).collect())
        .collect();
    Ok(ChangepointSummary {
        labels: result.breakpoints.iter().map(|&b| timeline[b].clone()).collect(),
        k: result.breakpoints.len(),
        positions: result.breakpoints,
        selected: k.is_none(),
        residual: result.residual,
        residual_path: detection.residual_path,
        approximation,
    })
}
