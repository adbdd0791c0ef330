//! Streaming ingestion: tokenize documents, extract n-grams and aggregate
//! their counts into time buckets.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::time::{Duration, Instant};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::config::{parse_date, Bound, CorpusConfig, NormRule};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::series::harmonic_number;
use crate::store::StoreWriter;

/// A dated text unit from a corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub date: NaiveDateTime,
    pub source: String,
    pub text: String,
}

/// A post-normalization token sequence of length 1..=n_max.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NGram {
    tokens: Vec<String>,
}

impl NGram {
    /// Build from already-normalized tokens. Tokens must be non-empty and
    /// free of whitespace.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Contract("an n-gram needs at least one token".into()));
        }
        if tokens
            .iter()
            .any(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::Contract(format!("invalid n-gram tokens {tokens:?}")));
        }
        Ok(NGram { tokens })
    }

    /// Normalize free text with the corpus rules and wrap the result.
    pub fn parse(text: &str, config: &CorpusConfig) -> Result<Self> {
        let tokens = tokenize(text, config);
        if tokens.is_empty() {
            return Err(Error::Query(format!("{text:?} has no tokens after normalization")));
        }
        if tokens.len() > config.n_max {
            return Err(Error::Query(format!(
                "{text:?} has {} tokens but the corpus indexes at most {}-grams",
                tokens.len(),
                config.n_max
            )));
        }
        Ok(NGram { tokens })
    }

    /// Rebuild from the space-joined storage key.
    pub(crate) fn from_key(key: &str) -> Self {
        NGram {
            tokens: key.split(' ').map(str::to_owned).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn order(&self) -> usize {
        self.tokens.len()
    }

    /// Space-joined form used as the storage key.
    pub fn key(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Split on whitespace and apply the normalization rules in configured order.
pub fn tokenize(text: &str, config: &CorpusConfig) -> Vec<String> {
    tokenize_with(text, &config.normalization)
}

pub fn tokenize_with(text: &str, rules: &[NormRule]) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let mut token = raw.to_owned();
            for rule in rules {
                match rule {
                    NormRule::Lowercase => token = token.to_lowercase(),
                    NormRule::StripPunctuation => {
                        let trimmed = token.trim_matches(is_punctuation);
                        if trimmed.len() != token.len() {
                            token = trimmed.to_owned();
                        }
                    }
                    NormRule::Stem => {}
                }
            }
            (!token.is_empty()).then_some(token)
        })
        .collect()
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{00AB}' | '\u{00BB}'
        )
}

/// All contiguous windows of length 1..=n_max, with multiplicity, keyed by the
/// space-joined n-gram.
pub fn extract_ngrams(tokens: &[String], n_max: usize) -> HashMap<String, u64> {
    let mut out = HashMap::new();
    for n in 1..=n_max.min(tokens.len()) {
        for window in tokens.windows(n) {
            *out.entry(window.join(" ")).or_insert(0) += 1;
        }
    }
    out
}

/// Why a record was turned away. Rejected records never touch any count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// 1-based input line, when the record came from a line stream.
    pub line: Option<usize>,
    pub reason: String,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    date: Option<String>,
    source: Option<String>,
    text: Option<String>,
}

/// Parse newline-delimited JSON records `{id, date, source, text}`. Blank
/// lines are skipped; everything else yields a document or a rejection.
pub fn read_documents<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = std::result::Result<Document, Rejection>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line_no = i + 1;
            let reject = |reason: String| {
                Some(Err(Rejection {
                    line: Some(line_no),
                    reason,
                }))
            };
            let line = match line {
                Ok(l) => l,
                Err(e) => return reject(format!("unreadable line: {e}")),
            };
            if line.trim().is_empty() {
                return None;
            }
            let raw: RawRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => return reject(format!("malformed record: {e}")),
            };
            let doc_id = match raw.id {
                Some(serde_json::Value::String(s)) if !s.is_empty() => s,
                Some(serde_json::Value::Number(n)) => n.to_string(),
                _ => return reject("missing id".into()),
            };
            let date = match raw.date.as_deref().map(|d| parse_date(d, Bound::Start)) {
                Some(Some(d)) => d,
                Some(None) => return reject(format!("unparseable date in {doc_id}")),
                None => return reject(format!("undated record {doc_id}")),
            };
            let Some(text) = raw.text else {
                return reject(format!("record {doc_id} has no text"));
            };
            Some(Ok(Document {
                doc_id,
                date,
                source: raw.source.unwrap_or_default(),
                text,
            }))
        })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IngestReport {
    pub docs_seen: u64,
    pub docs_rejected: u64,
    /// Repeated doc ids; ingestion is idempotent on id so these are no-ops.
    pub docs_duplicate: u64,
    /// Unigram token count per bucket.
    pub tokens_per_bucket: Vec<u64>,
    /// The first few rejections, for the operator.
    pub rejections: Vec<Rejection>,
    #[serde(skip)]
    pub elapsed: Duration,
}

const REPORTED_REJECTIONS: usize = 100;
const CHUNK: usize = 512;

impl IngestReport {
    pub fn buckets_populated(&self) -> usize {
        self.tokens_per_bucket.iter().filter(|&&n| n > 0).count()
    }

    fn reject(&mut self, rejection: Rejection) {
        self.docs_rejected += 1;
        if self.rejections.len() < REPORTED_REJECTIONS {
            self.rejections.push(rejection);
        }
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "docs seen:         {}", self.docs_seen)?;
        writeln!(f, "docs rejected:     {}", self.docs_rejected)?;
        writeln!(f, "docs duplicate:    {}", self.docs_duplicate)?;
        writeln!(
            f,
            "buckets populated: {} of {}",
            self.buckets_populated(),
            self.tokens_per_bucket.len()
        )?;
        writeln!(
            f,
            "tokens:            {}",
            self.tokens_per_bucket.iter().sum::<u64>()
        )?;
        for r in &self.rejections {
            match r.line {
                Some(line) => writeln!(f, "  rejected line {line}: {}", r.reason)?,
                None => writeln!(f, "  rejected: {}", r.reason)?,
            }
        }
        write!(f, "elapsed:           {:.3?}", self.elapsed)
    }
}

/// Tokenized form of one accepted document, produced off the writer thread.
pub(crate) struct PreparedDoc {
    pub doc: Document,
    pub bucket: usize,
    pub ngrams: HashMap<String, u64>,
    pub unigrams: u64,
}

/// Feed a document stream into an open store writer.
///
/// Tokenization and n-gram extraction run chunk-wise through `exec`; counts
/// are merged on the calling thread in stream order so the resulting store
/// is identical for either strategy.
pub fn ingest_corpus<I>(documents: I, store: &mut StoreWriter, exec: Exec) -> Result<IngestReport>
where
    I: IntoIterator<Item = std::result::Result<Document, Rejection>>,
{
    let started = Instant::now();
    store.begin_ingest()?;
    let config = store.config().clone();
    let mut report = IngestReport {
        tokens_per_bucket: vec![0; config.bucket_count()],
        ..Default::default()
    };

    let mut chunk: Vec<Document> = Vec::with_capacity(CHUNK);
    let mut iter = documents.into_iter();
    loop {
        chunk.clear();
        for item in iter.by_ref() {
            report.docs_seen += 1;
            match item {
                Ok(doc) => chunk.push(doc),
                Err(rejection) => report.reject(rejection),
            }
            if chunk.len() == CHUNK {
                break;
            }
        }
        if chunk.is_empty() {
            break;
        }
        let prepared = exec.map(&chunk, |doc| prepare(doc, &config));
        for item in prepared {
            match item {
                Ok(p) => {
                    let bucket = p.bucket;
                    let unigrams = p.unigrams;
                    if store.add(p)? {
                        report.tokens_per_bucket[bucket] += unigrams;
                    } else {
                        report.docs_duplicate += 1;
                    }
                }
                Err(rejection) => report.reject(rejection),
            }
        }
    }

    store.end_ingest();
    report.elapsed = started.elapsed();
    Ok(report)
}

fn prepare(doc: &Document, config: &CorpusConfig) -> std::result::Result<PreparedDoc, Rejection> {
    if doc.doc_id.is_empty() {
        return Err(Rejection {
            line: None,
            reason: "empty doc id".into(),
        });
    }
    let bucket = config.bucket_of(doc.date).map_err(|_| Rejection {
        line: None,
        reason: format!("{} dated {} outside corpus timeline", doc.doc_id, doc.date),
    })?;
    let tokens = tokenize(&doc.text, config);
    Ok(PreparedDoc {
        doc: doc.clone(),
        bucket,
        unigrams: tokens.len() as u64,
        ngrams: extract_ngrams(&tokens, config.n_max),
    })
}

/// Per-order totals for one bucket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStats {
    /// n(t): token instances of this order in the bucket.
    pub n_total: u64,
    /// D(t): number of distinct non-zero counts.
    pub distinct_freqs: u64,
    /// H_{n(t)}; 0 for an empty bucket.
    pub harmonic: f64,
}

impl OrderStats {
    pub const EMPTY: OrderStats = OrderStats {
        n_total: 0,
        distinct_freqs: 0,
        harmonic: 0.0,
    };

    /// Dense rank shared by every n-gram absent from the bucket.
    pub fn zero_rank(&self) -> u64 {
        self.distinct_freqs + 1
    }

    pub fn is_empty(&self) -> bool {
        self.n_total == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub bucket: usize,
    /// Indexed by order - 1.
    pub orders: Vec<OrderStats>,
}

impl BucketStats {
    pub fn order(&self, order: usize) -> &OrderStats {
        &self.orders[order - 1]
    }

    pub fn empty(&self) -> bool {
        self.orders.iter().all(OrderStats::is_empty)
    }
}

/// Dense ranks for the counts of one order within one bucket: most frequent
/// gets 1, ties share a rank, each smaller distinct count takes the next
/// integer. Zero counts are treated as absent and get `D + 1`.
pub fn rank_bucket(counts: &[u64]) -> (Vec<u64>, OrderStats) {
    let mut distinct: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
    distinct.sort_unstable_by(|a, b| b.cmp(a));
    distinct.dedup();
    let d = distinct.len() as u64;
    let ranks = counts
        .iter()
        .map(|&c| {
            if c == 0 {
                d + 1
            } else {
                // Position within a descending list.
                distinct.partition_point(|&x| x > c) as u64 + 1
            }
        })
        .collect();
    let n_total: u64 = counts.iter().sum();
    let harmonic = if n_total == 0 {
        0.0
    } else {
        harmonic_number(n_total).expect("n_total >= 1")
    };
    (
        ranks,
        OrderStats {
            n_total,
            distinct_freqs: d,
            harmonic,
        },
    )
}

/// Compute ranks and bucket statistics, then write the immutable segments.
pub fn finalize_buckets(store: &mut StoreWriter) -> Result<Vec<BucketStats>> {
    store.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Resolution;

    fn config() -> CorpusConfig {
        CorpusConfig::new(
            "t",
            Resolution::Yearly,
            parse_date("1890", Bound::Start).unwrap(),
            parse_date("1920", Bound::End).unwrap(),
        )
        .unwrap()
    }

    fn toks(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        let c = config();
        assert_eq!(tokenize("Basket Ball!", &c), ["basket", "ball"]);
        assert!(tokenize("", &c).is_empty());
        assert_eq!(
            tokenize("co-ed organisations", &c),
            ["co-ed", "organisations"]
        );
        assert_eq!(tokenize("\"It's\" -- done.", &c), ["it's", "done"]);
    }

    #[test]
    fn tokenize_rule_order_matters_only_for_enabled_rules() {
        assert_eq!(tokenize_with("Basket, Ball!", &[]), ["Basket,", "Ball!"]);
        assert_eq!(
            tokenize_with("Basket, Ball!", &[NormRule::StripPunctuation]),
            ["Basket", "Ball"]
        );
        assert_eq!(
            tokenize_with("ÉCOLE", &[NormRule::Lowercase, NormRule::Stem]),
            ["école"]
        );
    }

    #[test]
    fn ngram_extraction_examples() {
        let got = extract_ngrams(&toks(&["basket", "ball"]), 2);
        assert_eq!(got.len(), 3);
        assert_eq!(got["basket"], 1);
        assert_eq!(got["ball"], 1);
        assert_eq!(got["basket ball"], 1);

        let got = extract_ngrams(&toks(&["a", "a", "a"]), 1);
        assert_eq!(got.len(), 1);
        assert_eq!(got["a"], 3);

        assert!(extract_ngrams(&[], 3).is_empty());
    }

    #[test]
    fn dense_rank_examples() {
        // {the:50, of:30, cat:10, dog:10}
        let (ranks, stats) = rank_bucket(&[50, 30, 10, 10]);
        assert_eq!(ranks, [1, 2, 3, 3]);
        assert_eq!(stats.distinct_freqs, 3);
        assert_eq!(stats.zero_rank(), 4);
        assert_eq!(stats.n_total, 100);

        let (ranks, stats) = rank_bucket(&[]);
        assert!(ranks.is_empty());
        assert!(stats.is_empty());
        assert_eq!(stats.zero_rank(), 1);

        let (ranks, stats) = rank_bucket(&[5, 5]);
        assert_eq!(ranks, [1, 1]);
        assert_eq!(stats.zero_rank(), 2);

        let (ranks, _) = rank_bucket(&[0, 7, 0]);
        assert_eq!(ranks, [2, 1, 2]);
    }

    #[test]
    fn record_reader_rejects_malformed_lines() {
        let input = concat!(
            r#"{"id":"a","date":"1893-04-12","source":"Sun","text":"Basket ball"}"#,
            "\n\n",
            r#"{"id":"b","source":"Sun","text":"no date"}"#,
            "\n",
            "not json\n",
            r#"{"id":7,"date":"1900","text":"numeric id"}"#,
            "\n",
            r#"{"id":"c","date":"soon","text":"bad date"}"#,
            "\n",
        );
        let out: Vec<_> = read_documents(input.as_bytes()).collect();
        assert_eq!(out.len(), 5);
        assert_eq!(out[0].as_ref().unwrap().doc_id, "a");
        assert_eq!(out[1].as_ref().unwrap_err().line, Some(3));
        assert!(out[2].is_err());
        assert_eq!(out[3].as_ref().unwrap().doc_id, "7");
        assert!(out[4].is_err());
    }

    #[test]
    fn ngram_parse_respects_order_limit() {
        let c = config();
        assert_eq!(NGram::parse("Basket Ball", &c).unwrap().key(), "basket ball");
        assert!(NGram::parse("a b c d", &c).is_err());
        assert!(NGram::parse("!!", &c).is_err());
        assert!(NGram::new(vec![]).is_err());
        assert!(NGram::new(vec!["a b".into()]).is_err());
    }
}
