//! Deterministic synthetic corpus with known injected trends, used by the
//! test suites, benchmarks and the README walkthrough.
//!
//! 200 documents dated 1890–1920 (6 or 7 per year) of Zipf-distributed
//! filler vocabulary, plus:
//!
//! * `hoopball` and `hoop ball`: absent before 1893, 1–3 occurrences of each
//!   per document from 1893, 5–7 from 1911;
//! * `basket ball`: written `Basket Ball!` in roughly half the documents from
//!   1893 on;
//! * `aeroplane`: once per document before 1905, four times from 1905.
//!
//! Filler words never contain the injected tokens.

use std::io::Write;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_date, Bound, CorpusConfig, Resolution};
use crate::ingest::Document;

pub const FIXTURE_DOCS: usize = 200;
pub const FIRST_YEAR: i32 = 1890;
pub const LAST_YEAR: i32 = 1920;
pub const ONSET_YEAR: i32 = 1893;
pub const SHIFT_YEAR: i32 = 1911;
pub const STEP_TERM: &str = "aeroplane";
pub const STEP_YEAR: i32 = 1905;
pub const DEFAULT_SEED: u64 = 1893;

const SOURCES: [&str; 5] = [
    "Evening Star",
    "New-York Tribune",
    "The Sun",
    "Omaha Daily Bee",
    "The Seattle Star",
];

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ter", "son", "vel", "dra", "pun", "gor", "tis", "ne", "ru", "sel", "ga",
    "fen", "wo", "pra", "di", "mor", "el", "cu", "jas", "tre", "vin",
];

pub fn fixture_config() -> CorpusConfig {
    let mut config = CorpusConfig::new(
        "fixture",
        Resolution::Yearly,
        parse_date(&FIRST_YEAR.to_string(), Bound::Start).expect("valid year"),
        parse_date(&LAST_YEAR.to_string(), Bound::End).expect("valid year"),
    )
    .expect("valid fixture config");
    config.title = "Synthetic fixture corpus".into();
    config
}

/// The config file text matching [`fixture_config`].
pub fn fixture_config_text() -> String {
    fixture_config().render()
}

fn vocabulary() -> Vec<String> {
    let mut words = Vec::new();
    for a in SYLLABLES {
        for b in SYLLABLES {
            if a != b {
                words.push(format!("{a}{b}"));
            }
            if words.len() == 400 {
                return words;
            }
        }
    }
    words
}

/// Filler word index drawn from a Zipf(1) law over `n` words.
fn zipf_index(rng: &mut ChaCha8Rng, cumulative: &[f64]) -> usize {
    let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
    cumulative.partition_point(|&c| c < u).min(cumulative.len() - 1)
}

pub fn fixture_documents(seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary();
    let mut cumulative = Vec::with_capacity(vocab.len());
    let mut acc = 0.0;
    for k in 1..=vocab.len() {
        acc += 1.0 / k as f64;
        cumulative.push(acc);
    }
    let years = (LAST_YEAR - FIRST_YEAR + 1) as usize;

    (0..FIXTURE_DOCS)
        .map(|i| {
            let year = FIRST_YEAR + (i * years / FIXTURE_DOCS) as i32;
            let month = rng.random_range(1..=12);
            let day = rng.random_range(1..=28);
            let date = NaiveDate::from_ymd_opt(year, month, day)
                .expect("valid date")
                .and_hms_opt(0, 0, 0)
                .expect("valid time");

            let length = rng.random_range(100..140);
            let mut units: Vec<String> = (0..length)
                .map(|_| {
                    let word = &vocab[zipf_index(&mut rng, &cumulative)];
                    match rng.random_range(0..20) {
                        0 => capitalize(word),
                        1 => format!("{word},"),
                        2 => format!("{word}."),
                        _ => word.clone(),
                    }
                })
                .collect();

            let mut inject = |rng: &mut ChaCha8Rng, phrase: &str, times: usize| {
                for _ in 0..times {
                    let at = rng.random_range(0..=units.len());
                    units.insert(at, phrase.to_string());
                }
            };
            if year >= ONSET_YEAR {
                let (lo, hi) = if year >= SHIFT_YEAR { (5, 7) } else { (1, 3) };
                let a = rng.random_range(lo..=hi);
                let b = rng.random_range(lo..=hi);
                inject(&mut rng, "hoopball", a);
                inject(&mut rng, "Hoop ball", b);
                if rng.random_bool(0.5) {
                    inject(&mut rng, "Basket Ball!", 1);
                }
            }
            let step = if year >= STEP_YEAR { 4 } else { 1 };
            inject(&mut rng, STEP_TERM, step);

            Document {
                doc_id: format!("doc-{i:04}"),
                date,
                source: SOURCES[rng.random_range(0..SOURCES.len())].to_string(),
                text: units.join(" "),
            }
        })
        .collect()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Write documents as newline-delimited JSON records.
pub fn write_jsonl<W: Write>(documents: &[Document], mut out: W) -> std::io::Result<()> {
    for d in documents {
        let record = serde_json::json!({
            "id": d.doc_id,
            "date": d.date.format("%Y-%m-%d").to_string(),
            "source": d.source,
            "text": d.text,
        });
        writeln!(out, "{record}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shape() {
        let docs = fixture_documents(DEFAULT_SEED);
        assert_eq!(docs.len(), FIXTURE_DOCS);
        assert_eq!(docs, fixture_documents(DEFAULT_SEED));
        let config = fixture_config();
        let mut per_bucket = vec![0; config.bucket_count()];
        for d in &docs {
            per_bucket[config.bucket_of(d.date).unwrap()] += 1;
        }
        assert!(per_bucket.iter().all(|&n| n == 6 || n == 7));
        assert!(vocabulary()
            .iter()
            .all(|w| !w.contains("hoop") && !w.contains("ball") && w != STEP_TERM));
    }
}
