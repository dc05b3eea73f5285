use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rob2_core::evaluation::SeverityLayout;
use rob2_core::qa::ContextMode;
use rob2_core::retrieval::RetrieverKind;

#[derive(Debug, Parser)]
#[command(name = "rob2", version, about = "LLM-assisted ROB2 risk-of-bias assessment")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file. Defaults to ROB2_CONFIG, then <data-dir>/rob2.toml.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Holds ingested documents and the default config file.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Released dataset directory.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Directory for machine-readable outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate parsed trial reports and store them under the data directory.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Answer every signaling question of one document and export the session.
    Assess(AssessArgs),
    #[command(subcommand)]
    Eval(EvalCommand),
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[arg(long)]
    pub doc: String,
    #[arg(long, default_value = "topk:3", value_parser = parse_mode)]
    pub mode: ContextMode,
    /// Model name; `stub` runs offline.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value = "embedding", value_parser = parse_retriever)]
    pub retriever: RetrieverKind,
    #[arg(long, default_value = "cli")]
    pub annotator: String,
    /// Stamp every event with the Unix epoch so exports are reproducible.
    #[arg(long)]
    pub fixed_clock: bool,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Recall@k of the annotator evidence paragraph.
    Retrieval {
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
        k: Vec<usize>,
        /// Only this retriever; both by default.
        #[arg(long, value_parser = parse_retriever)]
        retriever: Option<RetrieverKind>,
    },
    /// Score model answers against the manual subset.
    Qa(QaArgs),
}

#[derive(Debug, Args)]
pub struct QaArgs {
    #[arg(long, value_parser = parse_mode)]
    pub mode: ContextMode,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value = "embedding", value_parser = parse_retriever)]
    pub retriever: RetrieverKind,
    /// Documents processed at once.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Seed for few-shot sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub fewshot: bool,
    /// JSON-lines response cache; reruns read from it instead of the model.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub fixed_clock: bool,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Answer and rationale sources and evidence feedback of assisted sessions.
    Usage,
    /// F1 per domain for every stored run.
    Table2 {
        /// Defaults to <out>/runs.
        #[arg(long)]
        runs: Option<PathBuf>,
    },
    /// Error counts by severity, averaged over stored runs.
    Severity {
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Layout::BySeverity)]
        layout: Layout,
    },
    /// Inter-rater agreement on dual-annotated documents.
    Kappa,
    /// Stored judgments per level.
    Distribution,
    /// Stored judgments against judgments re-derived from the answers.
    Consistency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    BySeverity,
    ByAlternative,
}

impl From<Layout> for SeverityLayout {
    fn from(l: Layout) -> Self {
        match l {
            Layout::BySeverity => SeverityLayout::BySeverity,
            Layout::ByAlternative => SeverityLayout::ByAlternative,
        }
    }
}

fn parse_mode(s: &str) -> Result<ContextMode, String> {
    s.parse()
}

fn parse_retriever(s: &str) -> Result<RetrieverKind, String> {
    s.parse()
}
