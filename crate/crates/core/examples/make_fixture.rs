//! Write the synthetic fixture corpus as `fixture.jsonl` plus `fixture.conf`.
//!
//! cargo run -p trends-core --example make_fixture -- <out-dir> [seed]

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use trends_core::fixture::{fixture_config_text, fixture_documents, write_jsonl, DEFAULT_SEED};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "fixture".into()));
    let seed = match args.next() {
        Some(s) => s.parse().expect("seed must be an integer"),
        None => DEFAULT_SEED,
    };
    fs::create_dir_all(&out)?;
    let docs = fixture_documents(seed);
    write_jsonl(&docs, BufWriter::new(File::create(out.join("fixture.jsonl"))?))?;
    fs::write(out.join("fixture.conf"), fixture_config_text())?;
    println!("wrote {} documents to {}", docs.len(), out.display());
    Ok(())
}
