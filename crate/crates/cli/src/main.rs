mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{load_config, UsageError};
use divrec_core::io::WorkdirLock;
use divrec_core::Error as CoreError;
use stages::StageCtx;

#[derive(Parser)]
#[command(
    name = "divrec",
    version,
    about = "Diversity-aware game recommendation pipeline"
)]
struct Cli {
    /// Config file; defaults apply when the default path is absent.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Set one config value, e.g. --override train.lr=0.01 (repeatable).
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Silence stale-artifact warnings and break an existing workdir lock.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Read the raw interactions and items, filter, index, and split.
    Ingest,
    /// Build percentile, category preference, and balanced preference matrices.
    Preprocess,
    /// Learn category-aware user and item representations.
    Embed,
    /// Cluster the representations and build the directed subgraphs.
    Select,
    /// Train the ranking model on the selected subgraphs.
    Train,
    /// Score the test fold and write the metrics report.
    Evaluate,
    /// Print one user's top-N recommendations as JSON.
    Recommend {
        /// External user id.
        #[arg(long)]
        user: String,
        /// List length.
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Run a hyperparameter grid against one shared preparation.
    Sweep {
        /// User-side cluster ratio candidates (repeatable).
        #[arg(long = "beta-u", value_name = "RATIO")]
        beta_u: Vec<f64>,
        /// Item-side cluster ratio candidates (repeatable).
        #[arg(long = "beta-i", value_name = "RATIO")]
        beta_i: Vec<f64>,
        /// Also run the selection and weighting ablations at the base ratios.
        #[arg(long)]
        ablations: bool,
    },
    /// Run ingest through evaluate in order.
    All,
    /// Write a block-structured synthetic dataset to the configured input paths.
    MakeSynthetic {
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 100)]
        items: usize,
        #[arg(long, default_value_t = 10)]
        categories: usize,
        /// Defaults to the dataset seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Fraction of interactions with zero playtime.
        #[arg(long, value_name = "SHARE")]
        zero_share: Option<f64>,
        /// Interactions generated per user.
        #[arg(long, value_name = "COUNT")]
        per_user: Option<usize>,
    },
}

enum CliError {
    Usage(UsageError),
    Core(CoreError),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(CoreError::Numeric(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    divrec_core::par::init_from_env().map_err(UsageError)?;
    let explicit = cli.config.is_some();
    let path = cli
        .config
        .clone()
        .unwrap_or_else(|| PathBuf::from("divrec.toml"));
    let cfg = load_config(&path, explicit, &cli.overrides)?;
    let ctx = StageCtx::new(cfg, cli.force)?;

    // Mutating commands take exclusive ownership of the workdir.
    let _lock = if matches!(cli.cmd, Cmd::Recommend { .. }) {
        None
    } else {
        std::fs::create_dir_all(ctx.workdir()).map_err(CoreError::from)?;
        Some(WorkdirLock::acquire(ctx.workdir(), cli.force)?)
    };

    match cli.cmd {
        Cmd::Ingest => stages::ingest(&ctx)?,
        Cmd::Preprocess => stages::preprocess(&ctx)?,
        Cmd::Embed => stages::embed(&ctx)?,
        Cmd::Select => stages::select(&ctx)?,
        Cmd::Train => stages::train(&ctx)?,
        Cmd::Evaluate => {
            stages::evaluate(&ctx)?;
        }
        Cmd::Recommend { user, n } => {
            if n == 0 {
                return Err(UsageError("--n must be at least 1".into()).into());
            }
            let line = stages::recommend(&ctx, &user, n)?;
            let json = serde_json::to_string(&line).map_err(CoreError::from)?;
            println!("{json}");
        }
        Cmd::Sweep {
            beta_u,
            beta_i,
            ablations,
        } => {
            stages::sweep(&ctx, &beta_u, &beta_i, ablations)?;
        }
        Cmd::All => stages::all(&ctx)?,
        Cmd::MakeSynthetic {
            users,
            items,
            categories,
            seed,
            zero_share,
            per_user,
        } => {
            let seed = seed.unwrap_or(ctx.params.seed);
            stages::make_synthetic(&ctx, users, items, categories, seed, zero_share, per_user)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else
            // is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
