//! The `askg` command line. Every verb prints one human-readable summary,
//! or one JSON document with `--json`; failures print a one-line reason and
//! exit nonzero.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use askg_core::annotate::{parse_corpus, seed_corpus, Annotator, Hyperparams, Ontology};
use askg_core::build::build_graph;
use askg_core::graphstore::{snapshot_save, ImportBatch};
use askg_core::ingest::{gen_fixture, load_staging, parse_csv, save_staging, ColumnManifest, FixtureSpec};
use askg_core::resolve::{resolve_staging, write_report, EntityTable, Resolver, ENTITIES_JSON};
use askg_core::translate::ConversationContext;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::Config;
use crate::engine::Engine;

#[derive(Debug, Parser)]
#[command(name = "askg", version, about = "Aviation safety knowledge graph")]
pub struct Cli {
    /// Print one JSON document instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// TOML configuration file.
    #[arg(long, global = true, env = "ASKG_CONFIG")]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set cache.ttl_secs=60`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic CSV with alias truth and expected counts.
    GenFixture {
        #[arg(long, default_value_t = 1000)]
        records: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        alias_rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a CSV into a staging directory.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolve entity aliases; writes entities.json into the staging directory.
    Resolve {
        #[arg(long)]
        staging: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Merge rule and lexical candidates.
        #[arg(long)]
        apply: bool,
        /// Merge candidate report (CSV).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build the graph and save a snapshot.
    Build {
        #[arg(long)]
        staging: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        /// Defaults to entities.json in the staging directory, when present.
        #[arg(long)]
        entities: Option<PathBuf>,
        #[arg(long, default_value_t = ImportBatch::DEFAULT_BATCH_SIZE)]
        batch_size: usize,
    },
    /// Train or apply the entity span classifier.
    #[command(subcommand)]
    Annotate(AnnotateCommand),
    /// Answer one question against a snapshot.
    Query(QueryArgs),
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnnotateCommand {
    /// Train the span classifier.
    Train {
        /// `text<TAB>label` lines; the bundled seed corpus when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify one span.
    Predict {
        #[arg(long)]
        model: PathBuf,
        text: String,
    },
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub question: String,
    /// Print the translated query without running it.
    #[arg(long)]
    pub cypher_only: bool,
    /// Keep conversation context across invocations under this id.
    #[arg(long)]
    pub session: Option<String>,
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[arg(long)]
    pub page: Option<usize>,
    #[arg(long)]
    pub page_size: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CliError(pub String);

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError(e.to_string())
}

/// What a verb produced: a text line and the same facts as JSON.
pub struct Output {
    pub text: String,
    pub json: serde_json::Value,
}

impl Cli {
    pub fn load_config(&self) -> Result<Config, CliError> {
        let mut overrides = self.set.clone();
        match &self.command {
            Command::Resolve { threshold: Some(t), .. } => overrides.push(format!("resolution_threshold={t}")),
            Command::Query(QueryArgs { snapshot: Some(p), .. }) | Command::Serve { snapshot: Some(p), .. } => {
                overrides.push(format!("snapshot={}", p.display()))
            }
            _ => {}
        }
        if let Command::Serve { bind: Some(b), .. } = &self.command {
            overrides.push(format!("bind={b}"));
        }
        Config::load(self.config.as_deref(), std::env::vars(), &overrides).map_err(fail)
    }
}

fn session_path(dir: &Path, id: &str) -> Result<PathBuf, CliError> {
    let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if !ok {
        return Err(CliError(format!("session id {id:?} may only use letters, digits, '-' and '_'")));
    }
    Ok(dir.join(format!("{id}.json")))
}

fn load_session(engine: &Engine, dir: &Path, id: &str) -> Result<ConversationContext, CliError> {
    let path = session_path(dir, id)?;
    match std::fs::read_to_string(&path) {
        Ok(text) => {
            let mut ctx: ConversationContext =
                serde_json::from_str(&text).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
            ctx.bound = engine.config().context_turns;
            Ok(ctx)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(engine.new_context(id)),
        Err(e) => Err(CliError(format!("{}: {e}", path.display()))),
    }
}

fn save_session(dir: &Path, ctx: &ConversationContext) -> Result<(), CliError> {
    let path = session_path(dir, &ctx.session_id)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError(format!("{}: {e}", dir.display())))?;
    let text = serde_json::to_string_pretty(ctx).expect("contexts serialize");
    std::fs::write(&path, text).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn query(config: Config, args: &QueryArgs) -> Result<Output, CliError> {
    let snapshot = config
        .snapshot
        .clone()
        .ok_or_else(|| CliError("no snapshot: pass --snapshot or set snapshot in the configuration".into()))?;
    let session_dir = config.session_dir.clone();
    let engine = Engine::new(config).map_err(fail)?;
    engine.load_snapshot(&snapshot).map_err(fail)?;
    let ctx = match &args.session {
        Some(id) => load_session(&engine, &session_dir, id)?,
        None => engine.new_context("cli"),
    };
    if args.cypher_only {
        let t = engine.translate_only(&args.question, &ctx).map_err(fail)?;
        return Ok(Output {
            text: t.query.clone(),
            json: serde_json::to_value(&t).expect("translations serialize"),
        });
    }
    let (response, next) = engine.answer(&args.question, &ctx, args.page, args.page_size).map_err(fail)?;
    if args.session.is_some() {
        save_session(&session_dir, &next)?;
    }
    let mut text = format!("{}\nCypher: {}", response.answer.text, response.cypher);
    if !response.answer.verified {
        let v: Vec<String> = response.answer.violations.iter().map(ToString::to_string).collect();
        text.push_str(&format!("\nUnverified: {}", v.join("; ")));
    }
    Ok(Output {
        text,
        json: serde_json::to_value(&response).expect("responses serialize"),
    })
}

fn serve(config: Config, json_out: bool) -> Result<Output, CliError> {
    let engine = Engine::new(config.clone()).map_err(fail)?;
    if let Some(p) = &config.snapshot {
        engine.load_snapshot(p).map_err(fail)?;
    }
    let engine = Arc::new(engine);
    let runtime = tokio::runtime::Runtime::new().map_err(fail)?;
    runtime
        .block_on(crate::http::serve(
            engine.clone(),
            &config.bind,
            |addr| {
                if json_out {
                    println!("{}", json!({"listening": addr.to_string()}));
                } else {
                    println!("listening on http://{addr}");
                }
            },
            async {
                let _ = tokio::signal::ctrl_c().await;
            },
        ))
        .map_err(|e| CliError(format!("{}: {e}", config.bind)))?;
    Ok(Output {
        text: format!("served {} queries", engine.log().len()),
        json: json!({"queries": engine.log().len()}),
    })
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let config = cli.load_config()?;
    match &cli.command {
        Command::GenFixture {
            records,
            seed,
            alias_rate,
            out,
        } => {
            let counts = gen_fixture(out, &FixtureSpec::new(*records, *seed, *alias_rate)).map_err(fail)?;
            Ok(Output {
                text: format!(
                    "wrote {} rows ({} malformed, {} alias clusters) to {}",
                    counts.rows,
                    counts.malformed,
                    counts.alias_clusters,
                    out.display()
                ),
                json: serde_json::to_value(&counts).expect("counts serialize"),
            })
        }
        Command::Ingest { input, out } => {
            let set = parse_csv(input, &ColumnManifest::default()).map_err(fail)?;
            save_staging(&set, out).map_err(fail)?;
            Ok(Output {
                text: format!(
                    "staged {} records, rejected {} rows, into {}",
                    set.records.len(),
                    set.rejects.len(),
                    out.display()
                ),
                json: json!({
                    "records": set.records.len(),
                    "rejects": set.rejects,
                    "sha256": set.provenance.sha256,
                }),
            })
        }
        Command::Resolve {
            staging, apply, report, ..
        } => {
            let set = load_staging(staging).map_err(fail)?;
            let resolution =
                resolve_staging(&set, &Resolver::default(), config.resolution_threshold, *apply).map_err(fail)?;
            resolution.entities.save(&staging.join(ENTITIES_JSON)).map_err(fail)?;
            if let Some(path) = report {
                let file = std::fs::File::create(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
                write_report(&resolution.candidates, file).map_err(fail)?;
            }
            Ok(Output {
                text: format!(
                    "{} entities, {} merge candidates, {} applied",
                    resolution.entities.entities().len(),
                    resolution.candidates.len(),
                    resolution.applied
                ),
                json: json!({
                    "entities": resolution.entities.entities().len(),
                    "candidates": resolution.candidates.len(),
                    "applied": resolution.applied,
                }),
            })
        }
        Command::Build {
            staging,
            snapshot,
            entities,
            batch_size,
        } => {
            let set = load_staging(staging).map_err(fail)?;
            let default_table = staging.join(ENTITIES_JSON);
            let table_path = entities.clone().or_else(|| default_table.exists().then_some(default_table));
            let table = table_path.map(|p| EntityTable::load(&p)).transpose().map_err(fail)?;
            let (graph, report) = build_graph(&set, table.as_ref(), &Resolver::default(), *batch_size).map_err(fail)?;
            if report.import.transactions_failed > 0 {
                let first = report.import.failures.first().map(|f| f.reason.clone()).unwrap_or_default();
                return Err(CliError(format!(
                    "{} import transactions failed; first: {first}",
                    report.import.transactions_failed
                )));
            }
            snapshot_save(&graph, snapshot).map_err(fail)?;
            let stats = graph.stats();
            Ok(Output {
                text: format!(
                    "built {} nodes and {} relationships into {}",
                    stats.nodes,
                    stats.relationships,
                    snapshot.display()
                ),
                json: json!({"stats": stats, "report": report}),
            })
        }
        Command::Annotate(AnnotateCommand::Train { corpus, out }) => {
            let examples = match corpus {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| CliError(format!("{}: {e}", p.display())))?;
                    parse_corpus(&text).map_err(fail)?
                }
                None => seed_corpus(),
            };
            let model = Annotator::train(&examples, &Ontology::default(), Hyperparams::default()).map_err(fail)?;
            model.save(out).map_err(fail)?;
            Ok(Output {
                text: format!("trained on {} spans, saved to {}", examples.len(), out.display()),
                json: json!({"examples": examples.len(), "model": out}),
            })
        }
        Command::Annotate(AnnotateCommand::Predict { model, text }) => {
            let span = Annotator::load(model).map_err(fail)?.predict_span(text).map_err(fail)?;
            Ok(Output {
                text: format!("{} ({:.3})", span.label, span.confidence),
                json: serde_json::to_value(&span).expect("spans serialize"),
            })
        }
        Command::Query(args) => query(config, args),
        Command::Serve { .. } => serve(config, cli.json),
    }
}

pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if cli.json {
                println!("{}", out.json);
            } else {
                println!("{}", out.text);
            }
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            let line = e.0.replace('\n', " ");
            if cli.json {
                println!("{}", json!({"error": line}));
            }
            eprintln!("askg: {line}");
            std::process::ExitCode::FAILURE
        }
    }
}
