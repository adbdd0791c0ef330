use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::CorpusConfig;
use crate::error::{Error, Result};
use crate::ingest::{rank_bucket, BucketStats, OrderStats, PreparedDoc};
use crate::store::codec::{sha256_hex, Encoder};
use crate::store::segment::{
    write_manifest, DOCS_FILE, DOCS_MAGIC, KEYS_FILE, KEYS_MAGIC, LOCK_FILE, PARTIAL_MARKER,
    POSTINGS_FILE, POSTINGS_MAGIC, SEGMENT_VERSION, STATS_FILE, STATS_MAGIC,
};
use crate::store::POSTING_CAP;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum WriterState {
    Open,
    Ingesting,
    Ingested,
    Finalized,
}

#[derive(Default)]
struct NgramAcc {
    counts: BTreeMap<u32, u64>,
    postings: BTreeMap<u32, Vec<u32>>,
}

struct AcceptedDoc {
    doc_id: String,
    date: String,
    bucket: u32,
    source: String,
    text: String,
}

/// Exclusive writer for one corpus directory.
///
/// Holds `.lock` for its lifetime and leaves a `.partial` marker in place
/// until [`StoreWriter::finalize`] has written every segment, so readers
/// refuse a directory whose last write did not complete.
pub struct StoreWriter {
    dir: PathBuf,
    config: CorpusConfig,
    state: WriterState,
    docs: Vec<AcceptedDoc>,
    doc_ids: HashMap<String, u32>,
    ngrams: HashMap<Box<str>, NgramAcc>,
}

impl StoreWriter {
    pub fn create(dir: impl AsRef<Path>, config: CorpusConfig) -> Result<Self> {
        config.validate()?;
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let lock = dir.join(LOCK_FILE);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => {
                    Error::State(format!("{} is locked by another writer", dir.display()))
                }
                _ => Error::io(&lock, e),
            })?;
        let writer = StoreWriter {
            dir,
            config,
            state: WriterState::Open,
            docs: Vec::new(),
            doc_ids: HashMap::new(),
            ngrams: HashMap::new(),
        };
        let marker = writer.dir.join(PARTIAL_MARKER);
        fs::write(&marker, b"ingest in progress\n").map_err(|e| Error::io(&marker, e))?;
        Ok(writer)
    }

    pub fn config(&self) -> &CorpusConfig {
        &self.config
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub(crate) fn begin_ingest(&mut self) -> Result<()> {
        match self.state {
            WriterState::Open | WriterState::Ingested => {
                self.state = WriterState::Ingesting;
                Ok(())
            }
            WriterState::Ingesting => Err(Error::State("ingest already running".into())),
            WriterState::Finalized => Err(Error::State("corpus already finalized".into())),
        }
    }

    pub(crate) fn end_ingest(&mut self) {
        self.state = WriterState::Ingested;
    }

    /// Merge one tokenized document. Returns false when the id was already
    /// ingested, in which case nothing changes.
    pub(crate) fn add(&mut self, prepared: PreparedDoc) -> Result<bool> {
        if self.state != WriterState::Ingesting {
            return Err(Error::State("documents can only be added during ingest".into()));
        }
        if self.doc_ids.contains_key(&prepared.doc.doc_id) {
            return Ok(false);
        }
        let ordinal = self.docs.len() as u32;
        let bucket = prepared.bucket as u32;
        for (key, count) in prepared.ngrams {
            let acc = self.ngrams.entry(key.into_boxed_str()).or_default();
            *acc.counts.entry(bucket).or_insert(0) += count;
            acc.postings.entry(bucket).or_default().push(ordinal);
        }
        let doc = prepared.doc;
        self.doc_ids.insert(doc.doc_id.clone(), ordinal);
        self.docs.push(AcceptedDoc {
            doc_id: doc.doc_id,
            date: doc.date.format("%Y-%m-%dT%H:%M:%S").to_string(),
            bucket,
            source: doc.source,
            text: doc.text,
        });
        Ok(true)
    }

    /// Rank every bucket, write the four segments plus manifest, and clear
    /// the partial marker.
    pub fn finalize(&mut self) -> Result<Vec<BucketStats>> {
        match self.state {
            WriterState::Ingested => {}
            WriterState::Finalized => return Err(Error::State("corpus already finalized".into())),
            _ => return Err(Error::State("finalize requires a completed ingest".into())),
        }
        let l = self.config.bucket_count();
        let n_max = self.config.n_max;

        // Documents are stored sorted by id; postings refer to that order.
        let mut order: Vec<u32> = (0..self.docs.len() as u32).collect();
        order.sort_by(|&a, &b| self.docs[a as usize].doc_id.cmp(&self.docs[b as usize].doc_id));
        let mut remap = vec![0u32; order.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as u32;
        }

        let mut keys: Vec<&str> = self.ngrams.keys().map(|k| &**k).collect();
        keys.sort_unstable();

        // points[k] = (bucket, count, rank) for key k.
        let mut points: Vec<Vec<(u32, u64, u64)>> = Vec::with_capacity(keys.len());
        // members[bucket][order-1] = (key index, point index, count)
        let mut members: Vec<Vec<Vec<(usize, usize, u64)>>> = vec![vec![Vec::new(); n_max]; l];
        for (k, key) in keys.iter().enumerate() {
            let order_idx = key.split(' ').count() - 1;
            let acc = &self.ngrams[*key];
            let mut pts = Vec::with_capacity(acc.counts.len());
            for (i, (&bucket, &count)) in acc.counts.iter().enumerate() {
                members[bucket as usize][order_idx].push((k, i, count));
                pts.push((bucket, count, 0));
            }
            points.push(pts);
        }

        let mut stats = Vec::with_capacity(l);
        for (bucket, per_order) in members.iter().enumerate() {
            let mut orders = Vec::with_capacity(n_max);
            for entries in per_order {
                if entries.is_empty() {
                    orders.push(OrderStats::EMPTY);
                    continue;
                }
                let counts: Vec<u64> = entries.iter().map(|e| e.2).collect();
                let (ranks, order_stats) = rank_bucket(&counts);
                for (&(k, i, _), rank) in entries.iter().zip(ranks) {
                    points[k][i].2 = rank;
                }
                orders.push(order_stats);
            }
            stats.push(BucketStats { bucket, orders });
        }

        let mut keys_seg = Encoder::with_header(KEYS_MAGIC, SEGMENT_VERSION);
        let mut postings_seg = Encoder::with_header(POSTINGS_MAGIC, SEGMENT_VERSION);
        keys_seg.u64(keys.len() as u64);
        for (k, key) in keys.iter().enumerate() {
            keys_seg.str(key);
            keys_seg.u64(postings_seg.len() as u64);
            keys_seg.u32(points[k].len() as u32);
            for &(bucket, count, rank) in &points[k] {
                keys_seg.u32(bucket);
                keys_seg.u64(count);
                keys_seg.u64(rank);
            }

            let acc = &self.ngrams[*key];
            postings_seg.u32(acc.postings.len() as u32);
            for (&bucket, ids) in &acc.postings {
                let mut ids: Vec<u32> = ids.iter().map(|&o| remap[o as usize]).collect();
                ids.sort_unstable();
                ids.dedup();
                let total = ids.len();
                ids.truncate(POSTING_CAP);
                postings_seg.u32(bucket);
                postings_seg.u32(total as u32);
                postings_seg.u8(u8::from(total > POSTING_CAP));
                postings_seg.u32(ids.len() as u32);
                for id in ids {
                    postings_seg.u32(id);
                }
            }
        }

        let mut stats_seg = Encoder::with_header(STATS_MAGIC, SEGMENT_VERSION);
        stats_seg.u32(l as u32);
        stats_seg.u32(n_max as u32);
        for s in &stats {
            for o in &s.orders {
                stats_seg.u64(o.n_total);
                stats_seg.u64(o.distinct_freqs);
                stats_seg.f64(o.harmonic);
            }
        }

        let mut docs_seg = Encoder::with_header(DOCS_MAGIC, SEGMENT_VERSION);
        docs_seg.u64(self.docs.len() as u64);
        for &old in &order {
            let d = &self.docs[old as usize];
            docs_seg.str(&d.doc_id);
            docs_seg.str(&d.date);
            docs_seg.u32(d.bucket);
            docs_seg.str(&d.source);
            docs_seg.str(&d.text);
        }

        let mut checksums = Vec::new();
        for (name, seg) in [
            (KEYS_FILE, &keys_seg),
            (STATS_FILE, &stats_seg),
            (POSTINGS_FILE, &postings_seg),
            (DOCS_FILE, &docs_seg),
        ] {
            write_atomic(&self.dir.join(name), &seg.buf)?;
            checksums.push((name, sha256_hex(&seg.buf)));
        }
        write_manifest(
            &self.dir,
            &self.config,
            self.docs.len(),
            keys.len(),
            &checksums,
        )?;
        let marker = self.dir.join(PARTIAL_MARKER);
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;

        self.state = WriterState::Finalized;
        Ok(stats)
    }
}

impl Drop for StoreWriter {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.dir.join(LOCK_FILE));
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
