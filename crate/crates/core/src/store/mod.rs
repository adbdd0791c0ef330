//! Immutable per-corpus segments: n-gram series, bucket statistics,
//! postings and the raw documents behind them.
//!
//! A corpus directory is written once by [`StoreWriter`] and read through
//! [`CorpusSnapshot`]s, which load and checksum every segment up front and
//! never change afterwards. Sharing a snapshot across threads is free.

mod codec;
mod segment;
mod writer;

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

pub use writer::StoreWriter;

use crate::config::CorpusConfig;
use crate::error::{Error, Result};
use crate::ingest::{tokenize, BucketStats, NGram, OrderStats};
use codec::Decoder;
use segment::{
    DOCS_FILE, DOCS_MAGIC, KEYS_FILE, KEYS_MAGIC, POSTINGS_FILE, POSTINGS_MAGIC, SEGMENT_VERSION,
    STATS_FILE, STATS_MAGIC,
};

/// Most doc ids kept per (n-gram, bucket) posting list.
pub const POSTING_CAP: usize = 10_000;

/// Width of a drill-down snippet, in characters of normalized text.
pub const SNIPPET_WIDTH: usize = 240;

/// Raw counts and dense ranks of one n-gram over the whole timeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountsSeries {
    pub ngram: NGram,
    pub corpus_id: String,
    pub counts: Vec<u64>,
    /// Dense rank per bucket; the bucket's zero rank where the count is 0.
    pub ranks: Vec<u64>,
    /// The n-gram occurs nowhere in the corpus.
    pub unseen: bool,
}

impl CountsSeries {
    /// Restrict to a bucket sub-interval.
    pub fn crop(&self, range: Range<usize>) -> CountsSeries {
        CountsSeries {
            ngram: self.ngram.clone(),
            corpus_id: self.corpus_id.clone(),
            counts: self.counts[range.clone()].to_vec(),
            ranks: self.ranks[range].to_vec(),
            unseen: self.unseen,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DocumentHit {
    pub doc_id: String,
    pub source: String,
    pub date: String,
    pub snippet: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DocumentPage {
    pub ngram: String,
    pub bucket: usize,
    pub page: usize,
    pub page_size: usize,
    /// Listed documents available for paging.
    pub total: usize,
    /// Documents that matched, including any dropped by the posting cap.
    pub total_matches: usize,
    pub truncated: bool,
    pub hits: Vec<DocumentHit>,
}

struct KeyEntry {
    key: Box<str>,
    postings_offset: usize,
    points: Range<usize>,
}

#[derive(Clone, Copy)]
struct Point {
    bucket: u32,
    count: u64,
    rank: u64,
}

struct StoredDoc {
    doc_id: String,
    date: String,
    bucket: u32,
    source: String,
    text: String,
}

/// Read-only view of one finalized corpus.
pub struct CorpusSnapshot {
    dir: PathBuf,
    config: CorpusConfig,
    keys: Vec<KeyEntry>,
    points: Vec<Point>,
    stats: Vec<BucketStats>,
    postings: Vec<u8>,
    docs: Vec<StoredDoc>,
}

impl CorpusSnapshot {
    /// Load and verify a finalized corpus directory. Fails with a state error
    /// while a writer is active or after an interrupted finalize, and with a
    /// corrupt-segment error naming the file when a checksum does not match.
    pub fn open(dir: impl AsRef<Path>) -> Result<Arc<Self>> {
        let dir = dir.as_ref();
        let loaded = segment::load(dir)?;
        let config = loaded.config;
        let l = config.bucket_count();
        let n_max = config.n_max;

        let keys_path = dir.join(KEYS_FILE);
        let mut d = Decoder::new(&loaded.files[KEYS_FILE], &keys_path);
        d.header(KEYS_MAGIC, SEGMENT_VERSION)?;
        let n_keys = d.u64()? as usize;
        if n_keys != loaded.ngrams {
            return Err(d.corrupt("key count disagrees with manifest"));
        }
        let mut keys = Vec::with_capacity(n_keys);
        let mut points = Vec::new();
        let mut previous: Option<&str> = None;
        for _ in 0..n_keys {
            let key = d.str()?;
            if previous.is_some_and(|p| p >= key) {
                return Err(d.corrupt("key table not sorted"));
            }
            previous = Some(key);
            let order = key.split(' ').count();
            if key.is_empty() || order > n_max {
                return Err(d.corrupt(format!("bad key {key:?}")));
            }
            let postings_offset = d.u64()? as usize;
            let n_points = d.u32()? as usize;
            let start = points.len();
            for _ in 0..n_points {
                let p = Point {
                    bucket: d.u32()?,
                    count: d.u64()?,
                    rank: d.u64()?,
                };
                if p.bucket as usize >= l {
                    return Err(d.corrupt("bucket beyond timeline"));
                }
                points.push(p);
            }
            keys.push(KeyEntry {
                key: key.into(),
                postings_offset,
                points: start..points.len(),
            });
        }
        if !d.finished() {
            return Err(d.corrupt("trailing bytes"));
        }

        let stats_path = dir.join(STATS_FILE);
        let mut d = Decoder::new(&loaded.files[STATS_FILE], &stats_path);
        d.header(STATS_MAGIC, SEGMENT_VERSION)?;
        if d.u32()? as usize != l || d.u32()? as usize != n_max {
            return Err(d.corrupt("stats shape disagrees with manifest"));
        }
        let mut stats = Vec::with_capacity(l);
        for bucket in 0..l {
            let mut orders = Vec::with_capacity(n_max);
            for _ in 0..n_max {
                orders.push(OrderStats {
                    n_total: d.u64()?,
                    distinct_freqs: d.u64()?,
                    harmonic: d.f64()?,
                });
            }
            stats.push(BucketStats { bucket, orders });
        }
        if !d.finished() {
            return Err(d.corrupt("trailing bytes"));
        }

        let docs_path = dir.join(DOCS_FILE);
        let mut d = Decoder::new(&loaded.files[DOCS_FILE], &docs_path);
        d.header(DOCS_MAGIC, SEGMENT_VERSION)?;
        let n_docs = d.u64()? as usize;
        if n_docs != loaded.documents {
            return Err(d.corrupt("document count disagrees with manifest"));
        }
        let mut docs = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            docs.push(StoredDoc {
                doc_id: d.str()?.to_owned(),
                date: d.str()?.to_owned(),
                bucket: d.u32()?,
                source: d.str()?.to_owned(),
                text: d.str()?.to_owned(),
            });
        }
        if !d.finished() {
            return Err(d.corrupt("trailing bytes"));
        }

        let mut files = loaded.files;
        let postings = files.remove(POSTINGS_FILE).expect("loaded");
        Decoder::new(&postings, &dir.join(POSTINGS_FILE)).header(POSTINGS_MAGIC, SEGMENT_VERSION)?;

        Ok(Arc::new(CorpusSnapshot {
            dir: dir.to_path_buf(),
            config,
            keys,
            points,
            stats,
            postings,
            docs,
        }))
    }

    pub fn config(&self) -> &CorpusConfig {
        &self.config
    }

    pub fn corpus_id(&self) -> &str {
        &self.config.corpus_id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn bucket_count(&self) -> usize {
        self.stats.len()
    }

    pub fn document_count(&self) -> usize {
        self.docs.len()
    }

    pub fn timeline(&self) -> Vec<String> {
        self.config.timeline()
    }

    /// Vocabulary of one order, in key order.
    pub fn vocabulary(&self, order: usize) -> impl Iterator<Item = NGram> + '_ {
        self.keys
            .iter()
            .filter(move |k| k.key.split(' ').count() == order)
            .map(|k| NGram::from_key(&k.key))
    }

    fn find(&self, key: &str) -> Option<&KeyEntry> {
        self.keys
            .binary_search_by(|k| (*k.key).cmp(key))
            .ok()
            .map(|i| &self.keys[i])
    }

    /// Dense series over the full timeline. An n-gram seen nowhere comes back
    /// all-zero with zero ranks and `unseen` set.
    pub fn get_series(&self, ngram: &NGram) -> Result<CountsSeries> {
        let order = ngram.order();
        if order > self.config.n_max {
            return Err(Error::Contract(format!(
                "{ngram} is a {order}-gram; corpus {} indexes at most {}-grams",
                self.corpus_id(),
                self.config.n_max
            )));
        }
        let mut counts = vec![0u64; self.bucket_count()];
        let mut ranks: Vec<u64> = self
            .stats
            .iter()
            .map(|s| s.order(order).zero_rank())
            .collect();
        let entry = self.find(&ngram.key());
        if let Some(entry) = entry {
            for p in &self.points[entry.points.clone()] {
                counts[p.bucket as usize] = p.count;
                ranks[p.bucket as usize] = p.rank;
            }
        }
        Ok(CountsSeries {
            ngram: ngram.clone(),
            corpus_id: self.corpus_id().to_owned(),
            counts,
            ranks,
            unseen: entry.is_none(),
        })
    }

    pub fn get_bucket_stats(&self, bucket: usize) -> Result<&BucketStats> {
        self.stats.get(bucket).ok_or_else(|| Error::Range {
            what: "bucket",
            value: bucket.to_string(),
            low: "0".into(),
            high: self.bucket_count().to_string(),
        })
    }

    pub fn bucket_stats(&self) -> &[BucketStats] {
        &self.stats
    }

    fn postings_for(&self, entry: &KeyEntry, bucket: usize) -> Result<Option<(usize, bool, Vec<u32>)>> {
        let path = self.dir.join(POSTINGS_FILE);
        let mut d = Decoder::at(&self.postings, entry.postings_offset, &path);
        let n = d.u32()?;
        for _ in 0..n {
            let b = d.u32()? as usize;
            let total = d.u32()? as usize;
            let truncated = d.u8()? != 0;
            let len = d.u32()? as usize;
            if b == bucket {
                let mut ids = Vec::with_capacity(len);
                for _ in 0..len {
                    let id = d.u32()?;
                    if id as usize >= self.docs.len() {
                        return Err(d.corrupt("posting references unknown document"));
                    }
                    ids.push(id);
                }
                return Ok(Some((total, truncated, ids)));
            }
            for _ in 0..len {
                d.u32()?;
            }
        }
        Ok(None)
    }

    /// Documents containing `ngram` in `bucket`, ordered by doc id.
    pub fn list_documents(
        &self,
        ngram: &NGram,
        bucket: usize,
        page: usize,
        page_size: usize,
    ) -> Result<DocumentPage> {
        self.get_bucket_stats(bucket)?;
        if page_size == 0 {
            return Err(Error::Contract("page_size must be positive".into()));
        }
        let found = match self.find(&ngram.key()) {
            Some(entry) => self.postings_for(entry, bucket)?,
            None => None,
        };
        let (total_matches, truncated, ids) = found.unwrap_or((0, false, Vec::new()));
        let hits = ids
            .iter()
            .skip(page.saturating_mul(page_size))
            .take(page_size)
            .map(|&id| {
                let doc = &self.docs[id as usize];
                DocumentHit {
                    doc_id: doc.doc_id.clone(),
                    source: doc.source.clone(),
                    date: doc.date.clone(),
                    snippet: snippet(&tokenize(&doc.text, &self.config), ngram.tokens()),
                }
            })
            .collect();
        Ok(DocumentPage {
            ngram: ngram.key(),
            bucket,
            page,
            page_size,
            total: ids.len(),
            total_matches,
            truncated,
            hits,
        })
    }

    /// Doc ids in a bucket, in id order. Used to audit postings.
    pub fn documents_in_bucket(&self, bucket: usize) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.docs
            .iter()
            .filter(move |d| d.bucket as usize == bucket)
            .map(|d| (d.doc_id.as_str(), d.text.as_str()))
    }
}

/// Fixed-width window of the normalized text centred on the first
/// occurrence of `needle`.
pub fn snippet(tokens: &[String], needle: &[String]) -> String {
    let text = tokens.join(" ");
    let chars: Vec<char> = text.chars().collect();
    if chars.len() <= SNIPPET_WIDTH {
        return text;
    }
    let Some(pos) = tokens.windows(needle.len()).position(|w| w == needle) else {
        return chars[..SNIPPET_WIDTH].iter().collect();
    };
    let start_char: usize = tokens[..pos].iter().map(|t| t.chars().count() + 1).sum();
    let match_chars = needle.iter().map(|t| t.chars().count()).sum::<usize>() + needle.len() - 1;
    let centre = start_char + match_chars / 2;
    let from = centre
        .saturating_sub(SNIPPET_WIDTH / 2)
        .min(chars.len() - SNIPPET_WIDTH);
    chars[from..from + SNIPPET_WIDTH].iter().collect()
}

/// The set of finalized corpora a process serves, keyed by corpus id.
#[derive(Clone, Default)]
pub struct TrendStore {
    corpora: BTreeMap<String, Arc<CorpusSnapshot>>,
}

impl TrendStore {
    pub fn open<P: AsRef<Path>>(dirs: &[P]) -> Result<Self> {
        let mut store = TrendStore::default();
        for dir in dirs {
            store.insert(CorpusSnapshot::open(dir)?)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, snapshot: Arc<CorpusSnapshot>) -> Result<()> {
        let id = snapshot.corpus_id().to_owned();
        if self.corpora.contains_key(&id) {
            return Err(Error::Config(format!("corpus id {id:?} loaded twice")));
        }
        self.corpora.insert(id, snapshot);
        Ok(())
    }

    pub fn open_snapshot(&self, corpus_id: &str) -> Result<Arc<CorpusSnapshot>> {
        self.corpora
            .get(corpus_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("unknown corpus {corpus_id:?}")))
    }

    pub fn corpora(&self) -> impl Iterator<Item = &Arc<CorpusSnapshot>> {
        self.corpora.values()
    }

    pub fn get_series(&self, corpus_id: &str, ngram: &NGram) -> Result<CountsSeries> {
        self.open_snapshot(corpus_id)?.get_series(ngram)
    }

    pub fn get_bucket_stats(&self, corpus_id: &str, bucket: usize) -> Result<BucketStats> {
        self.open_snapshot(corpus_id)?.get_bucket_stats(bucket).cloned()
    }

    pub fn list_documents(
        &self,
        corpus_id: &str,
        ngram: &NGram,
        bucket: usize,
        page: usize,
        page_size: usize,
    ) -> Result<DocumentPage> {
        self.open_snapshot(corpus_id)?
            .list_documents(ngram, bucket, page, page_size)
    }
}

#[cfg(test)]
mod tests;
