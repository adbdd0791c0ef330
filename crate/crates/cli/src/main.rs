use std::fs::File;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use trends_core::query::{self, QueryParams};
use trends_core::{
    ingest_corpus, read_documents, CorpusConfig, CorpusSnapshot, Error, Exec, StoreWriter,
    TrendStore,
};
use trends_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "trends", version, about = "Build, serve and query n-gram trend corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a finalized corpus directory from JSON-lines documents.
    Ingest {
        /// Corpus config file (key = value).
        #[arg(long)]
        config: PathBuf,
        /// Input files of {id, date, source, text} records, one per line.
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        /// Output corpus directory.
        #[arg(long)]
        out: PathBuf,
        /// Tokenize on the calling thread only.
        #[arg(long)]
        sequential: bool,
    },
    /// Serve the HTTP API over finalized corpora.
    Serve {
        #[arg(long, num_args = 1..)]
        corpora: Vec<PathBuf>,
        #[arg(long)]
        listen: Option<SocketAddr>,
        /// Service config file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a series query offline against one corpus directory.
    Query(QueryArgs),
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated terms; `[a + b]` builds a multi-term index.
    q: String,
    /// relative_frequency or word_rank_score.
    #[arg(long)]
    score: Option<String>,
    /// Odd moving-average window.
    #[arg(long)]
    smooth: Option<usize>,
    #[arg(long)]
    ci: bool,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    regression: bool,
    /// Group change-points; K fixed with `--changepoints=K`, else selected.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "auto")]
    changepoints: Option<String>,
    /// First bucket (label or date), inclusive.
    #[arg(long)]
    from: Option<String>,
    /// Last bucket (label or date), inclusive.
    #[arg(long)]
    to: Option<String>,
    /// Write CSV here (`-` for stdout) instead of printing a table.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Print the API's JSON body instead of a table.
    #[arg(long, conflicts_with = "csv")]
    json: bool,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Ingest {
            config,
            input,
            out,
            sequential,
        } => ingest(&config, &input, &out, sequential),
        Command::Serve {
            corpora,
            listen,
            config,
        } => serve(corpora, listen, config),
        Command::Query(args) => run_query(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            eprintln!("\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn ingest(config: &Path, inputs: &[PathBuf], out: &Path, sequential: bool) -> Result<(), Failure> {
    let config = CorpusConfig::load(config)
        .map_err(|e| Failure::Usage(anyhow!(e).context("cannot use --config")))?;
    for path in inputs {
        if !path.is_file() {
            return Err(Failure::Usage(anyhow!("input {} is not a readable file", path.display())));
        }
    }
    let exec = if sequential { Exec::Sequential } else { Exec::default() };
    let mut writer = StoreWriter::create(out, config).context("cannot create corpus directory")?;
    let mut streams = Vec::with_capacity(inputs.len());
    for path in inputs {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        streams.push(read_documents(BufReader::new(file)));
    }
    let report = ingest_corpus(streams.into_iter().flatten(), &mut writer, exec).context("ingest failed")?;
    writer.finalize().context("finalize failed")?;
    println!("{report}");
    println!("corpus written to {}", out.display());
    Ok(())
}

fn serve(corpora: Vec<PathBuf>, listen: Option<SocketAddr>, config: Option<PathBuf>) -> Result<(), Failure> {
    let base = match &config {
        Some(path) => ServiceConfig::load(path)
            .map_err(|e| Failure::Usage(anyhow!(e).context("cannot use --config")))?,
        None => ServiceConfig::default(),
    };
    let config = base.with_overrides(listen, corpora);
    if config.corpora.is_empty() {
        return Err(Failure::Usage(anyhow!("no corpora given (--corpora or config file)")));
    }

    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(io::stdout)
        .init();

    let store = TrendStore::open(&config.corpora).context("refusing to start")?;
    let runtime = tokio::runtime::Runtime::new().context("cannot start runtime")?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(config.listen)
            .await
            .with_context(|| format!("cannot listen on {}", config.listen))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        trends_service::serve(AppState::new(store), listener, shutdown)
            .await
            .context("server failed")
    })?;
    Ok(())
}

fn run_query(args: QueryArgs) -> Result<(), Failure> {
    let snapshot = CorpusSnapshot::open(&args.corpus)
        .with_context(|| format!("cannot open corpus {}", args.corpus.display()))?;
    let flag = |on: bool| on.then(|| "1".to_string());
    let params = QueryParams {
        corpus: snapshot.corpus_id().to_owned(),
        q: args.q,
        score: args.score,
        smooth: args.smooth.map(|w| w.to_string()),
        ci: flag(args.ci),
        standardize: flag(args.standardize),
        regression: flag(args.regression),
        changepoints: args.changepoints,
        from: args.from,
        to: args.to,
    };
    let parsed = query::parse_query_for(&params, &snapshot).map_err(|e| match e {
        Error::Query(_) | Error::InvalidCombination(_) | Error::Range { .. } => {
            Failure::Usage(anyhow!(e))
        }
        other => Failure::Runtime(anyhow!(other)),
    })?;
    let result = query::execute(&parsed, &snapshot).map_err(|e| match e {
        Error::InvalidCombination(_) | Error::Contract(_) => Failure::Usage(anyhow!(e)),
        other => Failure::Runtime(anyhow!(other)),
    })?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }

    let rendered = match (&args.csv, args.json) {
        (Some(_), _) => query::to_csv(&result),
        (None, true) => query::to_json(&result),
        (None, false) => query::to_table(&result),
    };
    match &args.csv {
        Some(path) if path.as_os_str() != "-" => std::fs::write(path, rendered.as_bytes())
            .with_context(|| format!("cannot write {}", path.display()))?,
        _ => io::stdout()
            .write_all(rendered.as_bytes())
            .context("cannot write to stdout")?,
    }
    Ok(())
}
