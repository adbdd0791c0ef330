use std::fs;

use super::codec::{Decoder, Encoder};
use super::segment::{MANIFEST_FILE, PARTIAL_MARKER};
use super::*;
use crate::config::{parse_date, Bound, Resolution};
use crate::exec::Exec;
use crate::ingest::{ingest_corpus, Document};

fn config() -> CorpusConfig {
    CorpusConfig::new(
        "small",
        Resolution::Yearly,
        parse_date("1900", Bound::Start).unwrap(),
        parse_date("1902", Bound::End).unwrap(),
    )
    .unwrap()
}

fn doc(id: &str, year: i32, text: &str) -> Document {
    Document {
        doc_id: id.into(),
        date: parse_date(&year.to_string(), Bound::Start).unwrap(),
        source: "Gazette".into(),
        text: text.into(),
    }
}

fn build(dir: &std::path::Path, docs: Vec<Document>) -> Arc<CorpusSnapshot> {
    let mut w = StoreWriter::create(dir, config()).unwrap();
    ingest_corpus(docs.into_iter().map(Ok), &mut w, Exec::default()).unwrap();
    w.finalize().unwrap();
    drop(w);
    CorpusSnapshot::open(dir).unwrap()
}

fn gram(s: &str) -> NGram {
    NGram::new(s.split(' ').map(str::to_owned).collect()).unwrap()
}

fn small(dir: &std::path::Path) -> Arc<CorpusSnapshot> {
    build(
        dir,
        vec![
            doc("b", 1900, "the cat sat on the mat"),
            doc("a", 1900, "The dog, the cat."),
            doc("c", 1902, "dog days"),
        ],
    )
}

#[test]
fn counts_ranks_and_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let snap = small(tmp.path());
    assert_eq!(snap.bucket_count(), 3);
    assert_eq!(snap.document_count(), 3);
    assert_eq!(snap.timeline(), ["1900", "1901", "1902"]);

    let the = snap.get_series(&gram("the")).unwrap();
    assert_eq!(the.counts, [4, 0, 0]);
    let cat = snap.get_series(&gram("cat")).unwrap();
    assert_eq!(cat.counts, [2, 0, 0]);
    // 1900 unigrams: the 4, cat 2, sat/on/mat/dog 1 → D = 3.
    assert_eq!(the.ranks[0], 1);
    assert_eq!(cat.ranks[0], 2);
    assert_eq!(snap.get_series(&gram("dog")).unwrap().ranks, [3, 1, 1]);
    assert_eq!(the.ranks[2], 2);

    let s0 = snap.get_bucket_stats(0).unwrap();
    assert_eq!(s0.order(1).n_total, 10);
    assert_eq!(s0.order(1).distinct_freqs, 3);
    assert_eq!(s0.order(1).zero_rank(), 4);
    assert_eq!(s0.order(2).n_total, 8);
    assert_eq!(s0.order(3).n_total, 6);
    assert!(snap.get_bucket_stats(1).unwrap().empty());
    assert_eq!(snap.get_bucket_stats(2).unwrap().order(3).n_total, 0);
    assert!(matches!(snap.get_bucket_stats(3), Err(Error::Range { .. })));

    let bigram = snap.get_series(&gram("the cat")).unwrap();
    assert_eq!(bigram.counts, [2, 0, 0]);
}

#[test]
fn unseen_and_oversized_queries() {
    let tmp = tempfile::tempdir().unwrap();
    let snap = small(tmp.path());
    let unseen = snap.get_series(&gram("zebra")).unwrap();
    assert!(unseen.unseen);
    assert_eq!(unseen.counts, [0, 0, 0]);
    assert_eq!(unseen.ranks, [4, 1, 2]);
    assert!(matches!(
        snap.get_series(&gram("a b c d")),
        Err(Error::Contract(_))
    ));
}

#[test]
fn vocabulary_is_sorted_per_order() {
    let tmp = tempfile::tempdir().unwrap();
    let snap = small(tmp.path());
    let words: Vec<String> = snap.vocabulary(1).map(|g| g.key()).collect();
    assert_eq!(words, ["cat", "days", "dog", "mat", "on", "sat", "the"]);
    assert!(snap.vocabulary(2).all(|g| g.order() == 2));
}

#[test]
fn documents_are_listed_in_id_order() {
    let tmp = tempfile::tempdir().unwrap();
    let snap = small(tmp.path());
    let page = snap.list_documents(&gram("the cat"), 0, 0, 10).unwrap();
    assert_eq!(page.total, 2);
    assert_eq!(page.total_matches, 2);
    assert!(!page.truncated);
    let ids: Vec<&str> = page.hits.iter().map(|h| h.doc_id.as_str()).collect();
    assert_eq!(ids, ["a", "b"]);
    assert_eq!(page.hits[0].snippet, "the dog the cat");
    assert_eq!(page.hits[0].date, "1900-01-01T00:00:00");

    let second = snap.list_documents(&gram("the cat"), 0, 1, 1).unwrap();
    assert_eq!(second.hits.len(), 1);
    assert_eq!(second.hits[0].doc_id, "b");
    assert!(snap
        .list_documents(&gram("the cat"), 0, 5, 1)
        .unwrap()
        .hits
        .is_empty());
    assert!(snap.list_documents(&gram("the"), 1, 0, 10).unwrap().hits.is_empty());
    assert!(snap.list_documents(&gram("the"), 9, 0, 10).is_err());
    assert!(snap.list_documents(&gram("the"), 0, 0, 0).is_err());
}

#[test]
fn crop_keeps_the_window() {
    let tmp = tempfile::tempdir().unwrap();
    let snap = small(tmp.path());
    let dog = snap.get_series(&gram("dog")).unwrap().crop(1..3);
    assert_eq!(dog.counts, [0, 1]);
    assert_eq!(dog.ranks, [1, 1]);
}

#[test]
fn snippet_centres_on_the_match() {
    let tokens: Vec<String> = (0..200).map(|i| format!("w{i}")).collect();
    let s = snippet(&tokens, &["w100".to_string()]);
    assert_eq!(s.chars().count(), SNIPPET_WIDTH);
    let at = s.find("w100").unwrap();
    assert!(at > 80 && at < 160, "{at}");
    let head = snippet(&tokens, &["w0".to_string()]);
    assert!(head.starts_with("w0 w1"));
    let short: Vec<String> = vec!["a".into(), "b".into()];
    assert_eq!(snippet(&short, &["b".to_string()]), "a b");
}

#[test]
fn writer_lock_and_states() {
    let tmp = tempfile::tempdir().unwrap();
    let mut w = StoreWriter::create(tmp.path(), config()).unwrap();
    assert!(matches!(
        StoreWriter::create(tmp.path(), config()),
        Err(Error::State(_))
    ));
    assert!(matches!(
        CorpusSnapshot::open(tmp.path()),
        Err(Error::State(_))
    ));
    ingest_corpus(vec![Ok(doc("x", 1901, "one"))], &mut w, Exec::Sequential).unwrap();
    w.finalize().unwrap();
    assert!(matches!(w.finalize(), Err(Error::State(_))));
    assert!(ingest_corpus(Vec::new(), &mut w, Exec::Sequential).is_err());
    drop(w);
    assert!(!tmp.path().join(PARTIAL_MARKER).exists());
    assert!(CorpusSnapshot::open(tmp.path()).is_ok());
}

#[test]
fn missing_and_corrupt_segments() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(matches!(
        CorpusSnapshot::open(tmp.path().join("nothing")),
        Err(Error::NotFound(_))
    ));
    small(tmp.path());
    let keys = tmp.path().join("keys.seg");
    let mut bytes = fs::read(&keys).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    fs::write(&keys, bytes).unwrap();
    match CorpusSnapshot::open(tmp.path()) {
        Err(Error::Corrupt { path, .. }) => assert!(path.ends_with("keys.seg")),
        Err(other) => panic!("unexpected error {other}"),
        Ok(_) => panic!("corrupt segment was accepted"),
    }
}

#[test]
fn manifest_is_plain_text() {
    let tmp = tempfile::tempdir().unwrap();
    small(tmp.path());
    let manifest = fs::read_to_string(tmp.path().join(MANIFEST_FILE)).unwrap();
    assert!(manifest.contains("corpus_id = small"));
    assert!(manifest.contains("documents = 3"));
    for file in ["keys.seg", "stats.seg", "postings.seg", "docs.seg"] {
        assert!(manifest.contains(&format!("{file}.sha256")), "{file}");
    }
}

#[test]
fn duplicate_ids_are_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let mut w = StoreWriter::create(tmp.path(), config()).unwrap();
    let report = ingest_corpus(
        vec![Ok(doc("x", 1900, "a b")), Ok(doc("x", 1901, "c d e"))],
        &mut w,
        Exec::Sequential,
    )
    .unwrap();
    assert_eq!(report.docs_duplicate, 1);
    assert_eq!(report.tokens_per_bucket, [2, 0, 0]);
    w.finalize().unwrap();
}

#[test]
fn trend_store_lookup() {
    let a = tempfile::tempdir().unwrap();
    small(a.path());
    let store = TrendStore::open(&[a.path()]).unwrap();
    assert_eq!(store.corpora().count(), 1);
    assert!(matches!(store.open_snapshot("nope"), Err(Error::NotFound(_))));
    assert_eq!(store.get_series("small", &gram("dog")).unwrap().counts, [1, 0, 1]);
    assert!(TrendStore::open(&[a.path(), a.path()]).is_err());
}

#[test]
fn codec_round_trip_and_bounds() {
    let mut e = Encoder::with_header(b"TEST", 1);
    e.u8(7);
    e.u32(70_000);
    e.u64(u64::MAX);
    e.f64(-0.125);
    e.str("héllo");
    let bytes = e.buf;
    let path = std::path::Path::new("mem");
    let mut d = Decoder::new(&bytes, path);
    d.header(b"TEST", 1).unwrap();
    assert_eq!(d.u8().unwrap(), 7);
    assert_eq!(d.u32().unwrap(), 70_000);
    assert_eq!(d.u64().unwrap(), u64::MAX);
    assert_eq!(d.f64().unwrap(), -0.125);
    assert_eq!(d.str().unwrap(), "héllo");
    assert!(d.finished());
    assert!(matches!(d.u8(), Err(Error::Corrupt { .. })));

    let mut wrong = Decoder::new(&bytes, path);
    assert!(wrong.header(b"NOPE", 1).is_err());
    let mut truncated = Decoder::new(&bytes[..bytes.len() - 2], path);
    truncated.header(b"TEST", 1).unwrap();
    truncated.u8().unwrap();
    truncated.u32().unwrap();
    truncated.u64().unwrap();
    truncated.f64().unwrap();
    assert!(truncated.str().is_err());
}
