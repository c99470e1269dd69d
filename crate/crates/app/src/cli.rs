//! Argument parsing and subcommand dispatch.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{error::ErrorKind, Parser, Subcommand};
use vizkg_core::corpus::{self, Table};
use vizkg_core::eval;
use vizkg_core::infer;
use vizkg_core::model::{self, PipelineConfig, VisModel};
use vizkg_core::synthetic;

use crate::service::{self, AppState};
use crate::store::DatasetStore;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

/// Environment variable that takes precedence over `serve --port`.
pub const PORT_ENV: &str = "KG4VIS_PORT";

#[derive(Debug, Parser)]
#[command(name = "vizkg", version, about = "Explainable chart recommendation from a knowledge-graph embedding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a labeled JSONL corpus
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON pipeline configuration; omitted fields keep their defaults
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the per-step loss as CSV
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Recommend charts for a CSV or table-JSON file
    Recommend {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(short, default_value_t = service::DEFAULT_K)]
        k: usize,
        /// Displayed rules per chart type considered for match tags
        #[arg(long, default_value_t = service::DISPLAY_PER_TYPE)]
        per_type: usize,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the displayed rules grouped by chart type
    Rules {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = service::DISPLAY_PER_TYPE)]
        per_type: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the feature × chart-type confidence matrix as CSV
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// k-fold cross-validation on a labeled corpus
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed of the fold assignment
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write per-fold metrics as CSV
        #[arg(long)]
        fold_csv: Option<PathBuf>,
    },
    /// Serve the HTTP API for a trained model
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory persisting uploaded datasets; in memory when omitted
        #[arg(long)]
        datasets: Option<PathBuf>,
    },
    /// Write the synthetic labeled corpus used by the test suite
    Synth {
        #[arg(long, default_value_t = 300)]
        tables: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            // clap routes help to stdout and errors (with usage) to stderr
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn load_corpus(path: &Path) -> Result<Vec<corpus::CorpusRecord>> {
    let (records, report) = corpus::parse_corpus(path).with_context(|| format!("reading {}", path.display()))?;
    for d in &report.diagnostics {
        log::warn!("{}:{}: {}", path.display(), d.line, d.message);
    }
    let records = corpus::clean_records(records);
    if records.is_empty() {
        bail!("{} has no labeled records", path.display());
    }
    log::info!("{} labeled records from {}", records.len(), path.display());
    Ok(records)
}

fn load_model(path: &Path) -> Result<VisModel> {
    VisModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

/// CSV unless the extension says JSON.
fn load_table(path: &Path) -> Result<Table> {
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let table = if is_json {
        corpus::parse_table_json(&std::fs::read_to_string(path)?, id)
    } else {
        corpus::parse_csv_table(File::open(path)?, id)
    };
    table.with_context(|| format!("parsing table {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train {
            corpus,
            out,
            config,
            loss_csv,
        } => {
            let cfg = read_config(config.as_deref())?;
            let records = load_corpus(&corpus)?;
            let fitted = model::fit(&records, &cfg)?;
            fitted.model.save(&out).with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = loss_csv {
                fitted.report.write_csv(File::create(&path)?, 1)?;
            }
            log::info!(
                "saved {} ({} entities, {} relations, {} triples)",
                out.display(),
                fitted.graph.vocab.n_entities(),
                fitted.graph.vocab.n_relations(),
                fitted.graph.triples.len()
            );
        }
        Command::Recommend {
            model,
            table,
            k,
            per_type,
            out,
        } => {
            let model = load_model(&model)?;
            let table = load_table(&table)?;
            let rules = infer::generate_rules(&model)?;
            let displayed = infer::top_rules(&rules, per_type)?;
            let rec = infer::recommend(&model, &table, k, &displayed)?;
            write_json(out.as_deref(), &rec)?;
        }
        Command::Rules {
            model,
            per_type,
            out,
            matrix,
        } => {
            let model = load_model(&model)?;
            let rules = infer::generate_rules(&model)?;
            write_json(out.as_deref(), &infer::top_rules(&rules, per_type)?)?;
            if let Some(path) = matrix {
                infer::write_rule_matrix(File::create(&path)?, &rules)?;
            }
        }
        Command::Evaluate {
            corpus,
            folds,
            out,
            config,
            seed,
            fold_csv,
        } => {
            let cfg = read_config(config.as_deref())?;
            let records = load_corpus(&corpus)?;
            let report = eval::cross_validate(&records, &cfg, folds, seed)?;
            write_json(out.as_deref(), &report)?;
            if let Some(path) = fold_csv {
                report.write_fold_csv(File::create(&path)?)?;
            }
        }
        Command::Serve {
            model,
            port,
            host,
            datasets,
        } => {
            let port = match std::env::var(PORT_ENV) {
                Ok(v) => v.parse().with_context(|| format!("{PORT_ENV}={v} is not a port"))?,
                Err(_) => port,
            };
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .with_context(|| format!("bad address {host}:{port}"))?;
            let model = load_model(&model)?;
            let store = match datasets {
                Some(dir) => DatasetStore::open(&dir)?,
                None => DatasetStore::in_memory(),
            };
            let state = Arc::new(AppState::new(model, store)?);
            serve(addr, state)?;
        }
        Command::Synth { tables, seed, out } => {
            corpus::write_corpus(&out, &synthetic::separable_corpus(tables, seed))?;
        }
    }
    Ok(())
}

fn serve(addr: SocketAddr, state: Arc<AppState>) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        let bound = listener.local_addr()?;
        log::info!("listening on http://{bound}");
        eprintln!("listening on http://{bound}");
        axum::serve(listener, service::router(state)).await?;
        Ok(())
    })
}
