//! Wire renderings of a [`QueryResult`]: the JSON body served by the API,
//! CSV export, and a plain-text table for terminals.

use serde::Serialize;

use crate::query::{ChangepointSummary, QueryResult};
use crate::series::{FitResult, SeriesKind, Transform};

#[derive(Serialize)]
struct WireSeries<'a> {
    label: &'a str,
    kind: SeriesKind,
    applied: &'a [Transform],
    degenerate: bool,
    /// `null` where the bucket had no data.
    values: Vec<Option<f64>>,
    ci_low: Option<Vec<Option<f64>>>,
    ci_high: Option<Vec<Option<f64>>>,
}

#[derive(Serialize)]
struct WireResult<'a> {
    corpus: &'a str,
    timeline: &'a [String],
    series: Vec<WireSeries<'a>>,
    fits: Option<&'a [Option<FitResult>]>,
    changepoints: Option<&'a ChangepointSummary>,
    warnings: &'a [String],
}

/// JSON body for `/api/series`.
pub fn to_json(result: &QueryResult) -> String {
    let series = result
        .series
        .iter()
        .map(|s| {
            let gap = |v: &[f64]| -> Vec<Option<f64>> {
                v.iter()
                    .zip(&s.mask)
                    .map(|(&x, &m)| (!m).then_some(x))
                    .collect()
            };
            WireSeries {
                label: &s.label,
                kind: s.kind,
                applied: &s.applied,
                degenerate: s.degenerate,
                values: s.masked_values(),
                ci_low: s.ci.as_ref().map(|b| gap(&b.low)),
                ci_high: s.ci.as_ref().map(|b| gap(&b.high)),
            }
        })
        .collect();
    let wire = WireResult {
        corpus: &result.corpus_id,
        timeline: &result.timeline,
        series,
        fits: result.fits.as_deref(),
        changepoints: result.changepoints.as_ref(),
        warnings: &result.warnings,
    };
    serde_json::to_string(&wire).expect("query results serialize")
}

/// Round to 12 significant digits and print without exponent.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return String::new();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("float formatting round-trips");
    format!("{rounded}")
}

/// CSV export: `date,<label>...`, one row per analysed bucket, 12
/// significant digits, empty cells for masked buckets, LF line endings.
pub fn to_csv(result: &QueryResult) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["date".to_string()];
    header.extend(result.series.iter().map(|s| s.label.clone()));
    w.write_record(&header).expect("write to memory");
    for (t, label) in result.timeline.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(result.series.iter().map(|s| {
            if s.mask[t] {
                String::new()
            } else {
                format_value(s.values[t])
            }
        }));
        w.write_record(&row).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
}

/// Human-readable table for the CLI.
pub fn to_table(result: &QueryResult) -> String {
    let mut out = String::new();
    let widths: Vec<usize> = result
        .series
        .iter()
        .map(|s| s.label.chars().count().max(14))
        .collect();
    out.push_str(&format!("{:<14}", "bucket"));
    for (s, w) in result.series.iter().zip(&widths) {
        out.push_str(&format!("  {:>w$}", s.label, w = w));
    }
    out.push('\n');
    for (t, label) in result.timeline.iter().enumerate() {
        out.push_str(&format!("{label:<14}"));
        for (s, w) in result.series.iter().zip(&widths) {
            let cell = if s.mask[t] {
                "-".to_string()
            } else {
                format!("{:.6e}", s.values[t])
            };
            out.push_str(&format!("  {cell:>w$}", w = w));
        }
        out.push('\n');
    }
    if let Some(fits) = &result.fits {
        for (s, fit) in result.series.iter().zip(fits) {
            match fit {
                Some(f) => out.push_str(&format!(
                    "fit {}: slope {:.6e}/bucket, intercept {:.6e}, stderr {:.6e}\n",
                    s.label, f.slope, f.intercept, f.stderr
                )),
                None => out.push_str(&format!("fit {}: n/a\n", s.label)),
            }
        }
    }
    if let Some(cp) = &result.changepoints {
        out.push_str(&format!(
            "change-points (K={}{}): {}\n",
            cp.k,
            if cp.selected { ", selected" } else { "" },
            if cp.labels.is_empty() {
                "none".to_string()
            } else {
                cp.labels.join(", ")
            }
        ));
    }
    out
}
