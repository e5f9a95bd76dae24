//! `condebias` — conceptor-based soft debiasing of word embeddings, with
//! hard-debiasing baselines, association-test (WEAT) evaluation grids,
//! similarity-retention scoring, and 2-D projection exports.

mod commands;
mod config;
mod support;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "condebias",
    version,
    about = "Soft debiasing of word embeddings with conceptor matrices",
    long_about = "Fits conceptor matrices to bias-word subspaces, debiases embedding \
tables with negated conceptors (or hard-debiasing baselines), and evaluates the \
result with association tests, similarity retention, and PCA projections."
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each can also come from the
/// environment with the `CONDEBIAS_` prefix.
#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// Aperture used when fitting conceptors.
    #[arg(long, global = true, default_value_t = 2.0, env = "CONDEBIAS_ALPHA")]
    alpha: f64,

    /// Seed for Monte Carlo permutation draws.
    #[arg(long, global = true, default_value_t = 42, env = "CONDEBIAS_SEED")]
    seed: u64,

    /// Worker threads for grid cells and permutation draws (0 = all cores).
    #[arg(long, global = true, default_value_t = 0, env = "CONDEBIAS_WORKERS")]
    workers: usize,

    /// Retry the lowercased form when a word is not in the table.
    #[arg(long, global = true, env = "CONDEBIAS_LOWERCASE_FALLBACK")]
    lowercase_fallback: bool,

    /// Unit-normalize every vector right after loading a table.
    #[arg(long, global = true, env = "CONDEBIAS_NORMALIZE")]
    normalize: bool,

    /// Subtract the mean vector right after loading a table (after
    /// --normalize when both are set).
    #[arg(long, global = true, env = "CONDEBIAS_CENTER")]
    center: bool,

    /// Permutation scheme for p-values: auto, exact, or mc:N.
    #[arg(
        long,
        global = true,
        default_value = "auto",
        env = "CONDEBIAS_PERMUTATIONS"
    )]
    permutations: String,

    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = "CONDEBIAS_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build, combine, or inspect conceptor files.
    Conceptor {
        #[command(subcommand)]
        action: ConceptorCmd,
    },
    /// Debias one embedding table and write the result.
    Debias(DebiasArgs),
    /// Run an association-test grid from a JSON config.
    Weat(WeatArgs),
    /// Project tokens onto the top-2 principal components of a basis set.
    Project(ProjectArgs),
    /// Score similarity datasets on original vs debiased tables.
    Simeval(SimevalArgs),
    /// Average token-instance vectors into a type-level table.
    IngestTokens(IngestArgs),
}

#[derive(Subcommand, Debug)]
enum ConceptorCmd {
    /// Fit a conceptor to the vectors of one or more word lists.
    Compute(ConceptorComputeArgs),
    /// OR several saved conceptors into one.
    Combine(ConceptorCombineArgs),
    /// Print the eigenvalue/shrinkage spectrum of a saved conceptor.
    Inspect(ConceptorInspectArgs),
}

#[derive(Args, Debug)]
struct ConceptorComputeArgs {
    /// Embedding table the word vectors come from.
    #[arg(long)]
    table: PathBuf,
    /// Word list file(s); one token per line, `#` comments.
    #[arg(long = "list", required = true)]
    lists: Vec<PathBuf>,
    /// How multiple lists combine: single (exactly one list), union
    /// (pool all words), or or (one conceptor per list, OR-combined).
    #[arg(long, default_value = "union")]
    mode: String,
    /// Output conceptor file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConceptorCombineArgs {
    /// Saved conceptor files to OR together (apertures must match).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output conceptor file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConceptorInspectArgs {
    /// Saved conceptor file.
    input: PathBuf,
}

#[derive(Args, Debug)]
struct DebiasArgs {
    /// Embedding table to debias.
    #[arg(long)]
    table: PathBuf,
    /// Debiasing method.
    #[arg(long, default_value = "conceptor", value_parser = ["none", "conceptor", "mu", "bolukbasi"])]
    method: String,
    /// Saved conceptor to negate and apply (method=conceptor).
    #[arg(long, conflicts_with = "subspace_list")]
    conceptor: Option<PathBuf>,
    /// Word list(s) to fit the subspace from (method=conceptor or mu).
    #[arg(long = "subspace-list")]
    subspace_list: Vec<PathBuf>,
    /// List combination mode when fitting from lists.
    #[arg(long, default_value = "union")]
    mode: String,
    /// Principal components to remove (method=mu).
    #[arg(long, default_value_t = 1)]
    num_components: usize,
    /// Definitional pair file, `left<TAB>right` per line (method=bolukbasi;
    /// bundled gender pairs when omitted).
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Skip the equalize step (method=bolukbasi).
    #[arg(long)]
    no_equalize: bool,
    /// Which tokens the neutralize step touches (method=bolukbasi).
    #[arg(long, default_value = "non-list", value_parser = ["non-list", "all"])]
    neutralize_scope: String,
    /// Treat the table as token-instance (contextual) vectors.
    #[arg(long)]
    contextual: bool,
    /// Output table path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct WeatArgs {
    /// JSON run configuration (see README for the schema).
    #[arg(long)]
    config: PathBuf,
    /// Report TSV path (default: weat_report.tsv under --out-dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an aligned plain-text mirror next to the TSV.
    #[arg(long)]
    mirror: bool,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    /// Embedding table to project.
    #[arg(long)]
    table: PathBuf,
    /// Word list that defines the projection plane (>= 3 resolvable words).
    #[arg(long)]
    basis: PathBuf,
    /// Word list of tokens to emit coordinates for.
    #[arg(long)]
    targets: PathBuf,
    /// Saved conceptor; when given, a debiased variant is emitted too.
    #[arg(long)]
    conceptor: Option<PathBuf>,
    /// Treat the table file as a token-instance stream: one output row per
    /// instance, basis fitted on per-token averages.
    #[arg(long)]
    instances: bool,
    /// Output TSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimevalArgs {
    /// Original embedding table.
    #[arg(long)]
    table: PathBuf,
    /// Pre-debiased table to compare against.
    #[arg(long, conflicts_with = "conceptor")]
    debiased: Option<PathBuf>,
    /// Saved conceptor; the debiased variant is derived by negating it.
    #[arg(long)]
    conceptor: Option<PathBuf>,
    /// Similarity dataset file(s): `word1 word2 score` per line.
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
    /// Report TSV path (default: simeval_report.tsv under --out-dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an aligned plain-text mirror next to the TSV.
    #[arg(long)]
    mirror: bool,
    /// Rank correlation (Spearman) instead of Pearson.
    #[arg(long)]
    spearman: bool,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Token-instance stream: `token v1 .. vd` lines, repeats allowed.
    #[arg(long)]
    stream: PathBuf,
    /// Output table path (one averaged vector per distinct token).
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.workers)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: could not build worker pool: {e}");
            return ExitCode::from(2);
        }
    };

    let outcome = pool.install(|| run(&cli));
    match outcome {
        // Commands report row-level failures through a nonzero code.
        Ok(code) => ExitCode::from(code),
        // Validation / IO / config problems.
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let global = &cli.global;
    match &cli.command {
        Command::Conceptor { action } => match action {
            ConceptorCmd::Compute(args) => commands::conceptor::compute(global, args),
            ConceptorCmd::Combine(args) => commands::conceptor::combine(global, args),
            ConceptorCmd::Inspect(args) => commands::conceptor::inspect(global, args),
        },
        Command::Debias(args) => commands::debias::run(global, args),
        Command::Weat(args) => {
            let config = config::RunConfig::load(&args.config)
                .with_context(|| format!("loading config {}", args.config.display()))?;
            commands::weat::run(global, args, config)
        }
        Command::Project(args) => commands::project::run(global, args),
        Command::Simeval(args) => commands::simeval::run(global, args),
        Command::IngestTokens(args) => commands::ingest::run(global, args),
    }
}
