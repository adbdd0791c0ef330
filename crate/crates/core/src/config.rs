//! Corpus configuration and the calendar arithmetic behind time buckets.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest n-gram order a corpus may be built with.
pub const MAX_ORDER: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Hourly,
    Daily,
    Monthly,
    Quarterly,
    Yearly,
}

impl Resolution {
    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::Hourly => "hourly",
            Resolution::Daily => "daily",
            Resolution::Monthly => "monthly",
            Resolution::Quarterly => "quarterly",
            Resolution::Yearly => "yearly",
        }
    }

    /// Ordinal of the calendar unit containing `at`, on an axis shared by all
    /// dates. Subtracting two ordinals gives a bucket offset.
    fn ordinal(self, at: NaiveDateTime) -> i64 {
        let year = i64::from(at.year());
        let month0 = i64::from(at.month0());
        match self {
            Resolution::Yearly => year,
            Resolution::Quarterly => year * 4 + month0 / 3,
            Resolution::Monthly => year * 12 + month0,
            Resolution::Daily => i64::from(at.date().num_days_from_ce()),
            Resolution::Hourly => {
                i64::from(at.date().num_days_from_ce()) * 24 + i64::from(at.hour())
            }
        }
    }

    /// First instant of the unit with the given ordinal.
    fn unit_start(self, ordinal: i64) -> NaiveDateTime {
        let midnight = |d: NaiveDate| d.and_time(NaiveTime::MIN);
        match self {
            Resolution::Yearly => midnight(ymd(ordinal, 1)),
            Resolution::Quarterly => {
                midnight(ymd(ordinal.div_euclid(4), ordinal.rem_euclid(4) * 3 + 1))
            }
            Resolution::Monthly => {
                midnight(ymd(ordinal.div_euclid(12), ordinal.rem_euclid(12) + 1))
            }
            Resolution::Daily => midnight(from_ce(ordinal)),
            Resolution::Hourly => {
                midnight(from_ce(ordinal.div_euclid(24))) + Duration::hours(ordinal.rem_euclid(24))
            }
        }
    }

    fn label(self, at: NaiveDateTime) -> String {
        match self {
            Resolution::Yearly => format!("{:04}", at.year()),
            Resolution::Quarterly => format!("{:04}-Q{}", at.year(), at.month0() / 3 + 1),
            Resolution::Monthly => format!("{:04}-{:02}", at.year(), at.month()),
            Resolution::Daily => at.format("%Y-%m-%d").to_string(),
            Resolution::Hourly => at.format("%Y-%m-%dT%H").to_string(),
        }
    }
}

fn ymd(year: i64, month: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(year as i32, month as u32, 1).expect("calendar unit within chrono range")
}

fn from_ce(days: i64) -> NaiveDate {
    NaiveDate::from_num_days_from_ce_opt(days as i32).expect("day within chrono range")
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hourly" => Ok(Resolution::Hourly),
            "daily" => Ok(Resolution::Daily),
            "monthly" => Ok(Resolution::Monthly),
            "quarterly" => Ok(Resolution::Quarterly),
            "yearly" => Ok(Resolution::Yearly),
            other => Err(Error::Config(format!("unknown resolution {other:?}"))),
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Token normalization rules, applied in configured order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormRule {
    Lowercase,
    /// Trim leading and trailing punctuation; interior hyphens and
    /// apostrophes survive.
    StripPunctuation,
    /// Stemming hook. No stemmer ships with the engine, so this is the
    /// identity; it exists so configs naming it stay valid once one does.
    Stem,
}

impl NormRule {
    pub fn as_str(self) -> &'static str {
        match self {
            NormRule::Lowercase => "lowercase",
            NormRule::StripPunctuation => "strip-punctuation",
            NormRule::Stem => "stem",
        }
    }
}

impl FromStr for NormRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lowercase" => Ok(NormRule::Lowercase),
            "strip-punctuation" => Ok(NormRule::StripPunctuation),
            "stem" => Ok(NormRule::Stem),
            other => Err(Error::Config(format!("unknown normalization rule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub corpus_id: String,
    /// Display name; defaults to the id.
    pub title: String,
    pub resolution: Resolution,
    pub n_max: usize,
    /// Inclusive timeline bounds.
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub normalization: Vec<NormRule>,
}

impl CorpusConfig {
    /// A config with the default order (3) and lowercase + strip rules.
    pub fn new(
        corpus_id: impl Into<String>,
        resolution: Resolution,
        start: NaiveDateTime,
        end: NaiveDateTime,
    ) -> Result<Self> {
        let corpus_id = corpus_id.into();
        let config = CorpusConfig {
            title: corpus_id.clone(),
            corpus_id,
            resolution,
            n_max: 3,
            start,
            end,
            normalization: vec![NormRule::Lowercase, NormRule::StripPunctuation],
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus_id.is_empty()
            || self
                .corpus_id
                .chars()
                .any(|c| c.is_whitespace() || c == '/' || c == '\\' || c == '=')
        {
            return Err(Error::Config(format!(
                "corpus_id {:?} must be non-empty without whitespace, '/', '\\' or '='",
                self.corpus_id
            )));
        }
        if !(1..=MAX_ORDER).contains(&self.n_max) {
            return Err(Error::Config(format!(
                "n_max must be in 1..={MAX_ORDER}, got {}",
                self.n_max
            )));
        }
        if self.start >= self.end {
            return Err(Error::Config(format!(
                "start {} must precede end {}",
                self.start, self.end
            )));
        }
        Ok(())
    }

    /// Number of buckets `l` covering `[start, end]`.
    pub fn bucket_count(&self) -> usize {
        let r = self.resolution;
        (r.ordinal(self.end) - r.ordinal(self.start) + 1) as usize
    }

    /// Bucket holding `at`, or a range error when `at` lies outside the
    /// timeline.
    pub fn bucket_of(&self, at: NaiveDateTime) -> Result<usize> {
        if at < self.start || at > self.end {
            return Err(Error::Range {
                what: "date",
                value: at.to_string(),
                low: self.start.to_string(),
                high: self.end.to_string(),
            });
        }
        let r = self.resolution;
        Ok((r.ordinal(at) - r.ordinal(self.start)) as usize)
    }

    pub fn bucket_label(&self, bucket: usize) -> String {
        let r = self.resolution;
        r.label(r.unit_start(r.ordinal(self.start) + bucket as i64))
    }

    pub fn timeline(&self) -> Vec<String> {
        (0..self.bucket_count()).map(|b| self.bucket_label(b)).collect()
    }

    /// Resolve a bucket given either its label or any date inside it.
    pub fn resolve_bucket(&self, spec: &str) -> Result<usize> {
        let spec = spec.trim();
        if let Some(b) = (0..self.bucket_count()).find(|&b| self.bucket_label(b) == spec) {
            return Ok(b);
        }
        let at = parse_date(spec, Bound::Start)
            .ok_or_else(|| Error::Query(format!("cannot read {spec:?} as a bucket or date")))?;
        // Dates inside the first or last bucket but outside [start, end] still
        // name that bucket.
        let r = self.resolution;
        let offset = r.ordinal(at) - r.ordinal(self.start);
        if offset < 0 || offset as usize >= self.bucket_count() {
            return Err(Error::Range {
                what: "bucket",
                value: spec.to_string(),
                low: self.bucket_label(0),
                high: self.bucket_label(self.bucket_count() - 1),
            });
        }
        Ok(offset as usize)
    }

    /// Parse the declarative `key = value` format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut corpus_id = None;
        let mut title = None;
        let mut resolution = None;
        let mut n_max = 3usize;
        let mut start = None;
        let mut end = None;
        let mut normalization = vec![NormRule::Lowercase, NormRule::StripPunctuation];

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "corpus_id" => corpus_id = Some(value.to_string()),
                "title" => title = Some(value.to_string()),
                "resolution" => resolution = Some(value.parse()?),
                "n_max" => {
                    n_max = value
                        .parse()
                        .map_err(|_| Error::Config(format!("n_max {value:?} is not an integer")))?
                }
                "start" => {
                    start = Some(parse_date(value, Bound::Start).ok_or_else(|| {
                        Error::Config(format!("start {value:?} is not an ISO-8601 date"))
                    })?)
                }
                "end" => {
                    end = Some(parse_date(value, Bound::End).ok_or_else(|| {
                        Error::Config(format!("end {value:?} is not an ISO-8601 date"))
                    })?)
                }
                "normalization" => {
                    normalization = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }

        let missing = |k: &str| Error::Config(format!("missing required key {k:?}"));
        let corpus_id = corpus_id.ok_or_else(|| missing("corpus_id"))?;
        let config = CorpusConfig {
            title: title.unwrap_or_else(|| corpus_id.clone()),
            corpus_id,
            resolution: resolution.ok_or_else(|| missing("resolution"))?,
            n_max,
            start: start.ok_or_else(|| missing("start"))?,
            end: end.ok_or_else(|| missing("end"))?,
            normalization,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical `key = value` rendering; `parse(render())` round-trips.
    pub fn render(&self) -> String {
        let rules: Vec<&str> = self.normalization.iter().map(|r| r.as_str()).collect();
        format!(
            "corpus_id = {}\ntitle = {}\nresolution = {}\nn_max = {}\nstart = {}\nend = {}\nnormalization = {}\n",
            self.corpus_id,
            self.title,
            self.resolution,
            self.n_max,
            self.start.format("%Y-%m-%dT%H:%M:%S"),
            self.end.format("%Y-%m-%dT%H:%M:%S"),
            rules.join(", ")
        )
    }
}

/// Which end of a partial date to expand to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Start,
    End,
}

/// Read an ISO-8601 date of any precision (`1893`, `1893-04`, `1893-04-12`,
/// `1893-04-12T05:30:00`, RFC 3339 with offset). Partial dates expand to the
/// first or last instant of the period they name.
pub fn parse_date(s: &str, bound: Bound) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    let last_instant = |d: NaiveDate| d.and_hms_opt(23, 59, 59).expect("valid time");
    let pick = |first: NaiveDate, last: NaiveDate| match bound {
        Bound::Start => first.and_time(NaiveTime::MIN),
        Bound::End => last_instant(last),
    };
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(pick(d, d));
    }
    let parts: Vec<&str> = s.split('-').collect();
    let all_digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    match parts.as_slice() {
        [y] if all_digits(y) && y.len() == 4 => {
            let y: i32 = y.parse().ok()?;
            Some(pick(
                NaiveDate::from_ymd_opt(y, 1, 1)?,
                NaiveDate::from_ymd_opt(y, 12, 31)?,
            ))
        }
        [y, m] if all_digits(y) && all_digits(m) && y.len() == 4 => {
            let (y, m): (i32, u32) = (y.parse().ok()?, m.parse().ok()?);
            let first = NaiveDate::from_ymd_opt(y, m, 1)?;
            let next = if m == 12 {
                NaiveDate::from_ymd_opt(y + 1, 1, 1)?
            } else {
                NaiveDate::from_ymd_opt(y, m + 1, 1)?
            };
            Some(pick(first, next.pred_opt()?))
        }
        _ => None,
    }
}
