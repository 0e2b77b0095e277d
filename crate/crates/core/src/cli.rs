//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 partial or runtime failure, 2 configuration
//! error, usage error or empty corpus.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::analyze::{
    agreement_eval, bias_profile, corpus_stats, parse_gold_jsonl, top_types, AnalyzeError, BiasEntry, CorpusStats,
};
use crate::annotate::Method;
use crate::complete::{nearest_completions, search, QueryOutput, SchemaIndex, SchemaPrefix, DEFAULT_K};
use crate::config::{BackendConfig, ConfigError, PipelineConfig};
use crate::harvest::HarvestError;
use crate::ontology::Ontology;
use crate::pipeline::{run_pipeline, PipelineError, RunReport, Stage, CORPUS_DIR};
use crate::store::{load_corpus, scan_sidecars};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Types profiled by `stats` for value skew.
pub const SENSITIVE_TYPES: [&str; 6] = ["country", "city", "gender", "ethnicity", "race", "nationality"];
const TOP_TYPES: usize = 25;
const TOP_VALUES: usize = 10;

#[derive(Debug, Parser)]
#[command(
    name = "tableforge",
    version,
    about = "Build and query a corpus of relational tables harvested from CSV files"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Pipeline configuration (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated topics, replacing the configured list
    #[arg(long, global = true)]
    pub topics: Option<String>,
    /// Semantic annotation threshold in [0, 1]
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// `live`, or a simulated backend directory (optionally `simulated:<dir>`)
    #[arg(long, global = true)]
    pub backend: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment topic queries and download matching files
    Harvest,
    /// Harvest, then parse downloaded files
    Parse,
    /// Parse, then apply license and table filters
    Curate,
    /// Curate, then annotate accepted tables
    Annotate,
    /// Run every stage and store the corpus
    Pipeline,
    /// Corpus statistics for the stored corpus
    Stats,
    /// Agreement of stored annotations with gold labels
    Eval {
        /// Gold labels (JSON lines)
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "semantic")]
        method: Method,
    },
    /// Nearest schema completions for a prefix
    Complete {
        /// Comma-separated attribute names
        #[arg(long)]
        prefix: String,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
    /// Tables whose schema best matches a free-text query
    Search {
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Harvest => "harvest",
            Command::Parse => "parse",
            Command::Curate => "curate",
            Command::Annotate => "annotate",
            Command::Pipeline => "pipeline",
            Command::Stats => "stats",
            Command::Eval { .. } => "eval",
            Command::Complete { .. } => "complete",
            Command::Search { .. } => "search",
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(t) = &cli.topics {
        cfg.topics = t.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        cfg.topics_file = None;
    }
    if let Some(t) = cli.threshold {
        cfg.threshold = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(b) = &cli.backend {
        cfg.backend = BackendConfig::parse(b);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut report = RunReport::new(cli.command.name(), &cfg);
    let code = match execute(&cli.command, &cfg, &mut report) {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            report.error = Some(message);
            code
        }
    };
    report.exit_code = code;
    report.partial_failure = code == EXIT_PARTIAL;
    if let Err(e) = report.write(&cfg.out) {
        eprintln!("error: cannot write run report: {e}");
        return code.max(EXIT_PARTIAL);
    }
    code
}

struct Failure(i32, String);

fn fail(code: i32, e: impl std::fmt::Display) -> Failure {
    Failure(code, e.to_string())
}

fn pipeline_failure(e: PipelineError) -> Failure {
    let code = match &e {
        PipelineError::Config(_) => EXIT_CONFIG,
        PipelineError::Harvest(HarvestError::AuthMissing | HarvestError::Malformed { .. }) => EXIT_CONFIG,
        _ => EXIT_PARTIAL,
    };
    fail(code, e)
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| fail(EXIT_PARTIAL, format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct StatsOutput {
    corpus: CorpusStats,
    /// Keyed by `<method>/<ontology>`.
    top_types: BTreeMap<String, Vec<(String, usize)>>,
    bias: Vec<BiasEntry>,
}

fn execute(command: &Command, cfg: &PipelineConfig, report: &mut RunReport) -> Result<i32, Failure> {
    let corpus_dir = cfg.out.join(CORPUS_DIR);
    let stage = match command {
        Command::Harvest => Some(Stage::Harvest),
        Command::Parse => Some(Stage::Parse),
        Command::Curate => Some(Stage::Curate),
        Command::Annotate => Some(Stage::Annotate),
        Command::Pipeline => Some(Stage::Store),
        _ => None,
    };
    if let Some(stage) = stage {
        let counts = run_pipeline(cfg, stage).map_err(pipeline_failure)?;
        let code = if counts.is_partial() { EXIT_PARTIAL } else { EXIT_OK };
        print_json(&counts);
        report.counts = Some(counts);
        return Ok(code);
    }

    let metas = scan_sidecars(&corpus_dir).map_err(|e| fail(EXIT_PARTIAL, e))?;
    if metas.is_empty() {
        return Err(fail(EXIT_CONFIG, AnalyzeError::EmptyCorpus));
    }
    match command {
        Command::Stats => {
            let stats = corpus_stats(&metas).map_err(|e| fail(EXIT_CONFIG, e))?;
            let mut keys: Vec<(Method, Ontology)> =
                metas.iter().flat_map(|m| m.annotations.iter().map(|a| (a.method, a.ontology))).collect();
            keys.sort();
            keys.dedup();
            let top = keys.into_iter().map(|(m, o)| (format!("{m}/{o}"), top_types(&metas, TOP_TYPES, m, o))).collect();
            let corpus = load_corpus(&corpus_dir).map_err(|e| fail(EXIT_PARTIAL, e))?;
            let sensitive: Vec<String> = SENSITIVE_TYPES.iter().map(|s| s.to_string()).collect();
            let bias = bias_profile(&corpus, &sensitive, None, TOP_VALUES);
            print!("{}", stats.summary());
            write_json(&cfg.out.join("stats.json"), &StatsOutput { corpus: stats, top_types: top, bias })?;
        }
        Command::Eval { gold, method } => {
            let text = fs::read_to_string(gold).map_err(|e| fail(EXIT_CONFIG, format!("{}: {e}", gold.display())))?;
            let labels = parse_gold_jsonl(&text).map_err(|e| fail(EXIT_CONFIG, e))?;
            let corpus = load_corpus(&corpus_dir).map_err(|e| fail(EXIT_PARTIAL, e))?;
            let registries = cfg.load_registries().map_err(|e| fail(EXIT_CONFIG, e))?;
            let r = agreement_eval(&corpus, &labels, *method, &registries).map_err(|e| fail(EXIT_CONFIG, e))?;
            fs::write(cfg.out.join("disagreements.jsonl"), r.disagreements_jsonl())
                .map_err(|e| fail(EXIT_PARTIAL, e))?;
            write_json(&cfg.out.join("agreement.json"), &r)?;
            print_json(&r.per_ontology);
        }
        Command::Complete { prefix, k } => {
            let provider = cfg.provider().map_err(|e| fail(EXIT_CONFIG, e))?;
            let prefix = SchemaPrefix::parse(prefix).map_err(|e| fail(EXIT_CONFIG, e))?;
            let index =
                SchemaIndex::build(metas.iter().map(|m| (m.table_id.clone(), m.columns.clone())).collect(), &provider);
            let c = nearest_completions(&prefix, &index, *k, &provider).map_err(|e| fail(EXIT_PARTIAL, e))?;
            print_json(&QueryOutput::from_completions(&prefix, *k, &c));
        }
        Command::Search { query, k } => {
            let provider = cfg.provider().map_err(|e| fail(EXIT_CONFIG, e))?;
            let index =
                SchemaIndex::build(metas.iter().map(|m| (m.table_id.clone(), m.columns.clone())).collect(), &provider);
            let hits = search(query, &index, *k, &provider).map_err(|e| fail(EXIT_PARTIAL, e))?;
            print_json(&QueryOutput::from_search(query, *k, &hits));
        }
        _ => unreachable!("stage commands handled above"),
    }
    Ok(EXIT_OK)
}
