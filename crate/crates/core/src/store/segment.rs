//! File names, magics and the plain-text manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::config::CorpusConfig;
use crate::error::{Error, Result};
use crate::store::codec::sha256_hex;
use crate::store::writer::write_atomic;

pub(crate) const SEGMENT_VERSION: u32 = 1;
pub(crate) const FORMAT: &str = "trends-segment-1";

pub(crate) const MANIFEST_FILE: &str = "MANIFEST";
pub(crate) const LOCK_FILE: &str = ".lock";
pub(crate) const PARTIAL_MARKER: &str = ".partial";

pub(crate) const KEYS_FILE: &str = "keys.seg";
pub(crate) const STATS_FILE: &str = "stats.seg";
pub(crate) const POSTINGS_FILE: &str = "postings.seg";
pub(crate) const DOCS_FILE: &str = "docs.seg";

pub(crate) const KEYS_MAGIC: &[u8; 4] = b"TKEY";
pub(crate) const STATS_MAGIC: &[u8; 4] = b"TSTA";
pub(crate) const POSTINGS_MAGIC: &[u8; 4] = b"TPST";
pub(crate) const DOCS_MAGIC: &[u8; 4] = b"TDOC";

pub(crate) const SEGMENTS: [&str; 4] = [KEYS_FILE, STATS_FILE, POSTINGS_FILE, DOCS_FILE];

const CONFIG_KEYS: [&str; 7] = [
    "corpus_id",
    "title",
    "resolution",
    "n_max",
    "start",
    "end",
    "normalization",
];

pub(crate) fn write_manifest(
    dir: &Path,
    config: &CorpusConfig,
    documents: usize,
    ngrams: usize,
    checksums: &[(&str, String)],
) -> Result<()> {
    let mut text = format!("format = {FORMAT}\n");
    text.push_str(&config.render());
    text.push_str(&format!("buckets = {}\n", config.bucket_count()));
    text.push_str(&format!("documents = {documents}\n"));
    text.push_str(&format!("ngrams = {ngrams}\n"));
    for (name, sum) in checksums {
        text.push_str(&format!("{name}.sha256 = {sum}\n"));
    }
    write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
}

/// Parsed manifest plus the verified segment bytes.
pub(crate) struct LoadedSegments {
    pub config: CorpusConfig,
    pub documents: usize,
    pub ngrams: usize,
    pub files: BTreeMap<&'static str, Vec<u8>>,
}

pub(crate) fn load(dir: &Path) -> Result<LoadedSegments> {
    if dir.join(PARTIAL_MARKER).exists() {
        return Err(Error::State(format!(
            "{} has not been finalized (ingest in progress or interrupted)",
            dir.display()
        )));
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&manifest_path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::NotFound(format!(
                "no corpus manifest in {}",
                dir.display()
            )))
        }
        Err(e) => return Err(Error::io(&manifest_path, e)),
    };

    let mut entries = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::corrupt(&manifest_path, format!("bad line {line:?}")))?;
        entries.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| {
        entries
            .get(k)
            .ok_or_else(|| Error::corrupt(&manifest_path, format!("missing key {k}")))
    };
    if get("format")? != FORMAT {
        return Err(Error::corrupt(&manifest_path, "unknown format"));
    }
    let config_text: String = CONFIG_KEYS
        .iter()
        .filter_map(|k| entries.get(*k).map(|v| format!("{k} = {v}\n")))
        .collect();
    let config = CorpusConfig::parse(&config_text)
        .map_err(|e| Error::corrupt(&manifest_path, e.to_string()))?;
    let number = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::corrupt(&manifest_path, format!("{k} is not a number")))
    };
    if number("buckets")? != config.bucket_count() {
        return Err(Error::corrupt(
            &manifest_path,
            "bucket count disagrees with timeline",
        ));
    }

    let mut files = BTreeMap::new();
    for name in SEGMENTS {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expected = get(&format!("{name}.sha256"))?;
        if &sha256_hex(&bytes) != expected {
            return Err(Error::corrupt(&path, "checksum mismatch"));
        }
        files.insert(name, bytes);
    }
    Ok(LoadedSegments {
        config,
        documents: number("documents")?,
        ngrams: number("ngrams")?,
        files,
    })
}
