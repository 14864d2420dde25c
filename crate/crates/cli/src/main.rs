use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dqm_core::graph::sample_path;
use dqm_core::pipeline::{
    load_tree, run_pipeline, stage_seed, PipelineConfig, PipelineError, QuestionSource, Stage,
    StageStatus,
};
use dqm_core::scoring::BackendKind;

/// Build a domain question map from a Markdown textbook.
#[derive(Debug, Parser)]
#[command(name = "dqm", version)]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the outline and split sections into chunks.
    Ingest,
    /// Build the labeled pair dataset from the chunks.
    Pairs,
    /// Generate one question per chunk.
    Questions,
    /// Embed every question with its context.
    Score,
    /// Merge nodes, build the weighted graph and prune it to a spanning tree.
    Build,
    /// Write the tree as JSON, DOT and GraphML.
    Export,
    /// Score the specificity classifier (and question generation, if configured).
    Eval,
    /// Run several stages in order.
    Run {
        /// Comma-separated stages, or `all`.
        #[arg(long, default_value = "all")]
        stages: String,
    },
    /// Print a random learning path from the built tree.
    Path {
        /// Number of questions on the path.
        #[arg(short = 'k', long, default_value_t = 4)]
        length: usize,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Tfidf,
    Oracle,
    Remote,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QgArg {
    Template,
    Remote,
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Markdown textbook.
    #[arg(short, long, global = true)]
    input: Option<PathBuf>,
    /// Directory for artifacts and the manifest.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Weight of specificity confidence against similarity in edge weights.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Edge weight threshold for the diagnostic report.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Number of questions left after merging.
    #[arg(long, global = true)]
    target_nodes: Option<usize>,
    /// Run seed; each stage derives its own seed from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Embedding and specificity backend.
    #[arg(long, value_enum, global = true)]
    backend: Option<BackendArg>,
    /// Question generator.
    #[arg(long, value_enum, global = true)]
    qg: Option<QgArg>,
    /// Model service base URL.
    #[arg(long, env = "DQM_ENDPOINT", global = true)]
    endpoint: Option<String>,
    /// Rerun stages even when their inputs are unchanged.
    #[arg(long, global = true)]
    force: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

impl Overrides {
    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.input {
            config.input = v.clone();
        }
        if let Some(v) = &self.output {
            config.output_dir = v.clone();
        }
        if let Some(v) = self.lambda {
            config.lambda = v;
        }
        if let Some(v) = self.tau {
            config.tau = v;
        }
        if let Some(v) = self.target_nodes {
            config.target_nodes = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(b) = self.backend {
            config.backend.kind = match b {
                BackendArg::Tfidf => BackendKind::TfidfBaseline,
                BackendArg::Oracle => BackendKind::HierarchyOracle,
                BackendArg::Remote => BackendKind::Remote,
            };
        }
        if let Some(q) = self.qg {
            config.question_generator = match q {
                QgArg::Template => QuestionSource::Template,
                QgArg::Remote => QuestionSource::Remote,
            };
        }
        if let Some(e) = &self.endpoint {
            config.backend.endpoint = Some(e.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

fn run_stages(config: &PipelineConfig, stages: &[Stage], force: bool) -> anyhow::Result<()> {
    let outcomes = run_pipeline(config, stages, force)?;
    for o in outcomes {
        let status = match o.status {
            StageStatus::Ran => "ran",
            StageStatus::Skipped => "skipped",
        };
        println!("{:<10} {:<8} {:>8.2}s", o.stage.name(), status, o.duration.as_secs_f64());
    }
    Ok(())
}

fn print_path(config: &PipelineConfig, length: usize, json: bool) -> anyhow::Result<()> {
    let tree = load_tree(&config.output_dir)?;
    let steps = sample_path(&tree, length, stage_seed(config.seed, "path"))
        .with_context(|| format!("sampling a {length}-question path"))?;
    if json {
        println!("{}", serde_json::to_string_pretty(&steps)?);
        return Ok(());
    }
    for (i, step) in steps.iter().enumerate() {
        println!("{:>2}. [{}] {}", i + 1, step.node_id, step.question);
        if let Some(link) = step.link {
            println!("      {}", link.arrow());
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let config = cli.opts.config()?;
    let force = cli.opts.force;
    let single = |stage| run_stages(&config, &[stage], force);
    match cli.command {
        Command::Ingest => single(Stage::Ingest),
        Command::Pairs => single(Stage::Pairs),
        Command::Questions => single(Stage::Questions),
        Command::Score => single(Stage::Score),
        Command::Build => single(Stage::Build),
        Command::Export => single(Stage::Export),
        Command::Eval => single(Stage::Eval),
        Command::Run { stages } => run_stages(&config, &Stage::parse_list(&stages)?, force),
        Command::Path { length, json } => print_path(&config, length, json),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.opts.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<PipelineError>())
                .map_or(1, PipelineError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
