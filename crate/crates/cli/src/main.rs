use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rad_cli::{
    cmd_build, cmd_decide, cmd_ingest, cmd_trace, load_config, CliError, Outcome, Overrides,
    TraceTarget,
};
use rad_core::BackendKind;

#[derive(Parser)]
#[command(name = "rad", version, about = "Retrieval augmented decision-making")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the mock backends.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// Gateway backend: mock or remote.
    #[arg(long, global = true)]
    backend: Option<BackendKind>,
    /// Embedding backend: mock or remote.
    #[arg(long, global = true)]
    embedding_backend: Option<BackendKind>,
    /// Omit timestamps so repeated runs produce identical files.
    #[arg(long, global = true)]
    reproducible: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Segment and index a directory of .txt/.md files.
    Ingest {
        corpus_dir: PathBuf,
        /// Store directory (default from config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the weighted criteria model for a request file.
    Build {
        request: PathBuf,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the options in a request file against a model.
    Decide {
        options: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Show where a criterion or an option's total comes from.
    Trace {
        report: PathBuf,
        #[arg(long, conflicts_with = "option", required_unless_present = "option")]
        criterion: Option<usize>,
        #[arg(long)]
        option: Option<String>,
        /// Resolve source chunks against this store.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let g = cli.global;
    let overrides = Overrides {
        config: g.config,
        seed: g.seed,
        top_k: g.top_k,
        backend: g.backend,
        embedding_backend: g.embedding_backend,
        reproducible: g.reproducible,
    };
    if let Command::Trace {
        report,
        criterion,
        option,
        store,
    } = &cli.command
    {
        let target = match (criterion, option) {
            (Some(c), _) => TraceTarget::Criterion(*c),
            (_, Some(o)) => TraceTarget::Option(o.clone()),
            _ => unreachable!("clap requires one of the two"),
        };
        return cmd_trace(report, &target, store.as_deref());
    }

    let config = load_config(&overrides)?;
    let paths = &config.paths;
    match cli.command {
        Command::Ingest { corpus_dir, out } => {
            cmd_ingest(&config, &corpus_dir, &out.unwrap_or_else(|| paths.store.clone()))
        }
        Command::Build { request, store, out } => cmd_build(
            &config,
            &store.unwrap_or_else(|| paths.store.clone()),
            &request,
            &out.unwrap_or_else(|| paths.model.clone()),
        ),
        Command::Decide {
            options,
            model,
            store,
            out,
        } => {
            let store = store.or_else(|| paths.store.is_dir().then(|| paths.store.clone()));
            cmd_decide(
                &config,
                &model.unwrap_or_else(|| paths.model.clone()),
                &options,
                store.as_deref(),
                &out.unwrap_or_else(|| paths.report.clone()),
            )
        }
        Command::Trace { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", out.stdout);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
