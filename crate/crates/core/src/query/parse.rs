use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::NGram;
use crate::store::{CorpusSnapshot, TrendStore};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    #[default]
    RelativeFrequency,
    WordRankScore,
}

impl ScoreKind {
    fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "relative_frequency" | "frequency" | "rf" => Ok(ScoreKind::RelativeFrequency),
            "word_rank_score" | "word_rank" | "rank" | "wrs" => Ok(ScoreKind::WordRankScore),
            other => Err(Error::Query(format!("unknown score {other:?}"))),
        }
    }
}

/// One chart line: a single n-gram, or a bracketed multi-term index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermGroup {
    pub members: Vec<NGram>,
    /// Written as `[a + b]`; merged into an index even with one member.
    pub index: bool,
}

impl TermGroup {
    pub fn label(&self) -> String {
        let keys: Vec<String> = self.members.iter().map(NGram::key).collect();
        if self.index {
            format!("[{}]", keys.join(" + "))
        } else {
            keys.join(" ")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ChangepointRequest {
    /// Choose K by residual drop.
    Auto,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Query {
    pub corpus_id: String,
    pub groups: Vec<TermGroup>,
    pub score: ScoreKind,
    pub smoothing: Option<usize>,
    pub ci: bool,
    pub standardize: bool,
    pub regression: bool,
    pub changepoints: Option<ChangepointRequest>,
    /// Half-open bucket interval the statistics are computed over.
    pub range: Option<Range<usize>>,
}

/// Raw request parameters, shared by the HTTP query string and the CLI.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryParams {
    pub corpus: String,
    pub q: String,
    pub score: Option<String>,
    pub smooth: Option<String>,
    pub ci: Option<String>,
    pub standardize: Option<String>,
    pub regression: Option<String>,
    /// `auto` (or empty / `true`) selects K; an integer fixes it.
    pub changepoints: Option<String>,
    pub from: Option<String>,
    pub to: Option<String>,
}

fn flag(name: &str, value: &Option<String>) -> Result<bool> {
    match value.as_deref().map(|v| v.trim().to_ascii_lowercase()) {
        None => Ok(false),
        Some(v) => match v.as_str() {
            "" | "1" | "true" | "yes" | "on" => Ok(true),
            "0" | "false" | "no" | "off" => Ok(false),
            _ => Err(Error::Query(format!("{name}={v:?} is not a boolean"))),
        },
    }
}

/// Split `a, b c, [d + e]` into groups of raw term strings.
pub fn split_terms(q: &str) -> Result<Vec<(Vec<String>, bool)>> {
    if q.trim().is_empty() {
        return Err(Error::Query("empty query".into()));
    }
    let mut items = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for c in q.chars() {
        match c {
            '[' => {
                if depth > 0 {
                    return Err(Error::Query("nested brackets".into()));
                }
                depth += 1;
            }
            ']' => {
                if depth == 0 {
                    return Err(Error::Query("unbalanced ']'".into()));
                }
                depth -= 1;
            }
            ',' if depth == 0 => {
                items.push(std::mem::take(&mut current));
                continue;
            }
            _ => {}
        }
        current.push(c);
    }
    if depth != 0 {
        return Err(Error::Query("unbalanced '['".into()));
    }
    items.push(current);

    items
        .into_iter()
        .map(|item| {
            let item = item.trim();
            if item.is_empty() {
                return Err(Error::Query("empty term".into()));
            }
            if let Some(inner) = item.strip_prefix('[') {
                let inner = inner
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Query(format!("text after group in {item:?}")))?;
                let members: Vec<String> = inner.split('+').map(|m| m.trim().to_owned()).collect();
                if members.iter().any(String::is_empty) {
                    return Err(Error::Query(format!("empty member in group {item:?}")));
                }
                Ok((members, true))
            } else if item.contains(['[', ']', '+']) {
                Err(Error::Query(format!("malformed term {item:?}")))
            } else {
                Ok((vec![item.to_owned()], false))
            }
        })
        .collect()
}

/// Validate request parameters against the corpus they name.
pub fn parse_query(params: &QueryParams, store: &TrendStore) -> Result<Query> {
    let snapshot = store.open_snapshot(params.corpus.trim())?;
    parse_query_for(params, &snapshot)
}

/// As [`parse_query`], against an already-resolved corpus.
pub fn parse_query_for(params: &QueryParams, snapshot: &CorpusSnapshot) -> Result<Query> {
    let config = snapshot.config();
    let groups = split_terms(&params.q)?
        .into_iter()
        .map(|(members, index)| {
            Ok(TermGroup {
                members: members
                    .iter()
                    .map(|m| NGram::parse(m, config))
                    .collect::<Result<_>>()?,
                index,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let score = ScoreKind::parse(params.score.as_deref().unwrap_or(""))?;
    let smoothing = match params.smooth.as_deref().map(str::trim) {
        None | Some("") => None,
        Some(s) => {
            let w: usize = s
                .parse()
                .map_err(|_| Error::Query(format!("smooth={s:?} is not an integer")))?;
            if w == 0 || w % 2 == 0 {
                return Err(Error::Query(format!("smoothing window must be odd, got {w}")));
            }
            (w > 1).then_some(w)
        }
    };
    let changepoints = match params
        .changepoints
        .as_deref()
        .map(|v| v.trim().to_ascii_lowercase())
    {
        None => None,
        Some(v) => match v.as_str() {
            "" | "auto" | "true" | "yes" | "on" => Some(ChangepointRequest::Auto),
            "false" | "no" | "off" => None,
            n => Some(ChangepointRequest::Fixed(n.parse().map_err(|_| {
                Error::Query(format!("changepoints={n:?} is neither `auto` nor a count"))
            })?)),
        },
    };

    let l = snapshot.bucket_count();
    let from = match params.from.as_deref().filter(|s| !s.trim().is_empty()) {
        Some(s) => Some(config.resolve_bucket(s)?),
        None => None,
    };
    let to = match params.to.as_deref().filter(|s| !s.trim().is_empty()) {
        Some(s) => Some(config.resolve_bucket(s)?),
        None => None,
    };
    let range = match (from, to) {
        (None, None) => None,
        (from, to) => {
            let (a, b) = (from.unwrap_or(0), to.unwrap_or(l - 1));
            if a > b {
                return Err(Error::Query(format!(
                    "range starts at {} after it ends at {}",
                    config.bucket_label(a),
                    config.bucket_label(b)
                )));
            }
            Some(a..b + 1)
        }
    };

    let query = Query {
        corpus_id: config.corpus_id.clone(),
        groups,
        score,
        smoothing,
        ci: flag("ci", &params.ci)?,
        standardize: flag("standardize", &params.standardize)?,
        regression: flag("regression", &params.regression)?,
        changepoints,
        range,
    };
    query.validate()?;
    Ok(query)
}

impl Query {
    /// Flag combinations the pipeline refuses.
    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() || self.groups.iter().any(|g| g.members.is_empty()) {
            return Err(Error::Query("every term group needs at least one n-gram".into()));
        }
        if self.ci {
            if self.standardize {
                return Err(Error::InvalidCombination(
                    "confidence intervals cannot be combined with standardization".into(),
                ));
            }
            if self.groups.iter().any(|g| g.index) {
                return Err(Error::InvalidCombination(
                    "confidence intervals are unavailable for multi-term indices".into(),
                ));
            }
            if self.score != ScoreKind::RelativeFrequency {
                return Err(Error::InvalidCombination(
                    "confidence intervals apply to relative frequencies only".into(),
                ));
            }
        }
        Ok(())
    }
}
