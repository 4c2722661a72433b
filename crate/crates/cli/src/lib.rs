//! `germen` command-line driver: streaming ingestion with snapshots,
//! class reports, size distributions, noyau components, evaluation, the
//! presentation-order check, and the curation service.

pub mod service;

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use germen_core::aggregation::{CurationSession, ExportOptions, ValenceMode};
use germen_core::corpus::parse_line;
use germen_core::saliency::{classes_by_size, render_class_report, term_contributions};
use germen_core::{
    evaluate, permutation_test, read_corpus, Classification, Config, DensityKind, Engine, Rule,
    SurplombantMode,
};

#[derive(Debug, Parser)]
#[command(name = "germen", version, about = "Order-invariant incremental density-peak clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a corpus in file order and write a snapshot.
    Ingest(IngestArgs),
    /// Class reports: members by number of heads and salient terms.
    Report(ReportArgs),
    /// Noyau size distribution as CSV.
    Sizes(SnapshotArg),
    /// Connected components of the noyau graph.
    Components(ComponentsArgs),
    /// Recall/precision of a predicted classification against a reference.
    Eval(EvalArgs),
    /// Ingest shuffled copies of a corpus and compare with file order.
    Permtest(PermtestArgs),
    /// Serve the curation HTTP/JSON API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityArg {
    Sum,
    Coefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurplombantArg {
    Strict,
    Dominates,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Neighbors kept per node (ties at the cutoff are all kept).
    #[arg(long)]
    pub k: Option<usize>,
    /// Links need a similarity strictly above this.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long, value_enum)]
    pub density: Option<DensityArg>,
    #[arg(long, value_enum)]
    pub surplombant: Option<SurplombantArg>,
    /// Let a node with no denser in-neighbor inherit from older,
    /// equally dense ones. Makes results depend on arrival order when
    /// densities tie exactly.
    #[arg(long)]
    pub plateau_oldest: bool,
}

impl ConfigArgs {
    fn is_empty(&self) -> bool {
        self.k.is_none()
            && self.threshold.is_none()
            && self.rule.is_none()
            && self.density.is_none()
            && self.surplombant.is_none()
            && !self.plateau_oldest
    }

    pub fn to_config(&self) -> Config {
        let base = Config::default();
        Config {
            k: self.k.unwrap_or(base.k),
            sim_threshold: self.threshold.unwrap_or(base.sim_threshold),
            rule: match self.rule {
                Some(RuleArg::A) => Rule::A,
                Some(RuleArg::B) => Rule::B,
                None => base.rule,
            },
            density: match self.density {
                Some(DensityArg::Sum) => DensityKind::Sum,
                Some(DensityArg::Coefficient) => DensityKind::Coefficient,
                None => base.density,
            },
            surplombant: match self.surplombant {
                Some(SurplombantArg::Strict) => SurplombantMode::StrictGreater,
                Some(SurplombantArg::Dominates) => SurplombantMode::DominatesNeighborhood,
                None => base.surplombant,
            },
            plateau_oldest: self.plateau_oldest,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Corpus file, one `doc_id<TAB>term=count...` record per line.
    pub corpus: PathBuf,
    /// Where to write the final snapshot.
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Write one JSON ingestion report per document here instead of stdout.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Continue from this snapshot; its configuration is kept.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SnapshotArg {
    pub snapshot: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    pub snapshot: PathBuf,
    /// Doc id of the class head.
    #[arg(long, conflicts_with = "all", required_unless_present = "all")]
    pub class: Option<String>,
    /// Every class, largest first.
    #[arg(long)]
    pub all: bool,
    /// Structured output with full-precision weights.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValenceArgs {
    /// Number of heads a document needs to link noyaux.
    #[arg(long, default_value_t = 2)]
    pub valence: usize,
    /// Also link through documents with more heads than the valence.
    #[arg(long)]
    pub at_least: bool,
}

impl ValenceArgs {
    fn mode(&self) -> ValenceMode {
        if self.at_least {
            ValenceMode::AtLeast
        } else {
            ValenceMode::Exact
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ComponentsArgs {
    pub snapshot: PathBuf,
    #[command(flatten)]
    pub valence: ValenceArgs,
    /// Hide components involving fewer documents.
    #[arg(long, default_value_t = 0)]
    pub min_docs: usize,
    /// Emit one labeled group per component, in the export format.
    #[arg(long)]
    pub as_classification: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    pub reference: PathBuf,
    pub predicted: PathBuf,
    /// Full report instead of the curve CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PermtestArgs {
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    pub snapshot: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Curation journal, replayed at startup and appended to.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    #[command(flatten)]
    pub valence: ValenceArgs,
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Ingest(args) => ingest(&args, &mut stdout)?,
        Command::Report(args) => report(&args, &mut stdout)?,
        Command::Sizes(args) => sizes(&load(&args.snapshot)?, &mut stdout)?,
        Command::Components(args) => components(&args, &mut stdout)?,
        Command::Eval(args) => eval(&args, &mut stdout)?,
        Command::Permtest(args) => return permtest(&args, &mut stdout),
        Command::Serve(args) => serve(args)?,
    }
    Ok(ExitCode::SUCCESS)
}

pub fn load(path: &Path) -> anyhow::Result<Engine> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Engine::from_json(&text).with_context(|| format!("loading snapshot {}", path.display()))
}

fn read_docs(path: &Path) -> anyhow::Result<Vec<germen_core::RawDocument>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_corpus(BufReader::new(file))?)
}

pub fn ingest(args: &IngestArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let mut engine = match &args.resume {
        Some(path) => {
            if !args.config.is_empty() {
                bail!("configuration flags cannot be combined with --resume");
            }
            load(path)?
        }
        None => Engine::new(args.config.to_config())?,
    };
    let file = File::open(&args.corpus).with_context(|| format!("opening {}", args.corpus.display()))?;
    let mut log: Box<dyn Write + '_> = match &args.log {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(&mut *out),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let Some(doc) = parse_line(&line?, line_no)? else {
            continue;
        };
        let report = engine
            .ingest(&doc)
            .with_context(|| format!("corpus line {line_no}"))?;
        serde_json::to_writer(&mut log, &report)?;
        log.write_all(b"\n")?;
    }
    log.flush()?;
    drop(log);
    fs::write(&args.snapshot, engine.to_json())
        .with_context(|| format!("writing {}", args.snapshot.display()))?;
    eprintln!(
        "ingested {} documents, {} heads",
        engine.len(),
        engine.labels().head_nodes().len()
    );
    Ok(())
}

pub fn report(args: &ReportArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let engine = load(&args.snapshot)?;
    let heads = match &args.class {
        Some(doc_id) => vec![engine.require_node(doc_id)?],
        None => classes_by_size(&engine).into_iter().map(|(h, _)| h).collect(),
    };
    let profiles = heads
        .into_iter()
        .map(|h| term_contributions(&engine, h))
        .collect::<Result<Vec<_>, _>>()?;
    if args.json {
        let value = match (&args.class, profiles.as_slice()) {
            (Some(_), [one]) => serde_json::to_value(one)?,
            _ => serde_json::to_value(&profiles)?,
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
    } else {
        for (i, p) in profiles.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
            }
            write!(out, "{}", render_class_report(p))?;
        }
    }
    Ok(())
}

pub fn sizes(engine: &Engine, out: &mut impl Write) -> anyhow::Result<()> {
    writeln!(out, "size,count,log10_size,log10_count")?;
    for s in service::sizes(engine) {
        writeln!(
            out,
            "{},{},{},{}",
            s.size,
            s.count,
            (s.size as f64).log10(),
            (s.count as f64).log10()
        )?;
    }
    Ok(())
}

pub fn components(args: &ComponentsArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let engine = load(&args.snapshot)?;
    let (valence, mode) = (args.valence.valence, args.valence.mode());
    if args.as_classification {
        let session =
            CurationSession::with_doc_ids(engine.labels().all_heads(), &engine.doc_ids(), valence, mode)?;
        let all = session.export(engine.labels(), &engine.doc_ids(), ExportOptions::default())?;
        let mut kept = Classification::default();
        for (component, group) in session.components().iter().zip(all.0) {
            if component.component.documents >= args.min_docs {
                kept.0.push(group);
            }
        }
        write!(out, "{}", kept.to_json())?;
    } else {
        let listed = service::list_components(&engine, None, valence, mode, args.min_docs)?;
        writeln!(out, "{}", serde_json::to_string_pretty(&listed)?)?;
    }
    Ok(())
}

fn read_classification(path: &Path) -> anyhow::Result<Classification> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Classification::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn eval(args: &EvalArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let reference = read_classification(&args.reference)?;
    let predicted = read_classification(&args.predicted)?;
    let report = evaluate(&reference, &predicted)?;
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        write!(out, "{}", report.curve_csv())?;
    }
    Ok(())
}

pub fn permtest(args: &PermtestArgs, out: &mut impl Write) -> anyhow::Result<ExitCode> {
    let docs = read_docs(&args.corpus)?;
    let outcome = permutation_test(&docs, &args.config.to_config(), args.n, args.seed)?;
    match &outcome.divergence {
        None => {
            writeln!(out, "PASS {} permutations of {} documents", outcome.permutations, outcome.documents)?;
            Ok(ExitCode::SUCCESS)
        }
        Some(d) => {
            writeln!(
                out,
                "FAIL permutation {}: document {} {} expected {} got {}",
                d.permutation, d.doc_id, d.field, d.expected, d.got
            )?;
            Ok(ExitCode::FAILURE)
        }
    }
}

pub fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let engine = load(&args.snapshot)?;
    let state = service::ServiceState::new(
        engine,
        args.valence.valence,
        args.valence.mode(),
        args.journal.as_deref(),
    )?;
    let app = service::router(Arc::new(tokio::sync::RwLock::new(state)));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .with_context(|| format!("binding {}", args.addr))?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
