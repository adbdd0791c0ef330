//! Corpus trends engine.
//!
//! Dated documents are tokenized into n-grams and counted per time bucket
//! ([`ingest`]), frozen into immutable per-corpus segments ([`store`]), and
//! served through a query pipeline ([`query`]) that scores, smooths,
//! standardizes, indexes, fits and segments the resulting time series
//! ([`series`], [`changepoint`]).

pub mod changepoint;
pub mod config;
pub mod error;
pub mod exec;
pub mod fixture;
pub mod ingest;
pub mod query;
pub mod series;
pub mod store;

pub use config::{CorpusConfig, NormRule, Resolution};
pub use error::{Error, Result};
pub use exec::Exec;
pub use ingest::{
    extract_ngrams, finalize_buckets, ingest_corpus, read_documents, tokenize, BucketStats,
    Document, IngestReport, NGram, OrderStats,
};
pub use store::{CorpusSnapshot, CountsSeries, StoreWriter, TrendStore};
