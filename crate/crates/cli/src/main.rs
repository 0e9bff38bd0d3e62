mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use commands::{Format, Outcome, Sink};
use config::{RunConfig, EXAMPLE_CONFIG};

const EXIT_PARSE: u8 = 3;
const EXIT_PRECONDITION: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "qme",
    version,
    about = "Spanning/separated counts and entropy estimates for maps on quasi-metric spaces",
    after_help = "Exit codes: 0 success, 1 check failure, 2 precondition or usage problem, 3 configuration error.\n\
                  Set QME_LOG=info (or debug) for progress messages. `qme example-config` prints a \
                  documented configuration with every default."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads [default: available parallelism].
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest cloud solved exactly in auto mode; overrides `exact_threshold` [default: 64].
    #[arg(long, global = true)]
    exact_threshold: Option<usize>,
    /// Seed for sampled checks; overrides `seed` [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the quasi-metric axioms on the cloud.
    Validate,
    /// Minimal spanning and maximal separated counts on the (n, eps) grid.
    Counts,
    /// Entropy estimates for the configured variants.
    Entropy,
    /// Count-level and estimate-level relations between the entropy variants.
    Compare,
    /// Power rule h''(T^m) = m h''(T).
    Power {
        /// Exponent; overrides `power` [default: 2].
        #[arg(long)]
        m: Option<usize>,
    },
    /// Print a documented example configuration.
    ExampleConfig,
}

fn load(cli: &Cli, path: &Path) -> Result<config::Experiment, config::ConfigError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(t) = cli.exact_threshold {
        cfg.exact_threshold = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.resolve(base)
}

fn run(cli: Cli) -> u8 {
    if let Command::ExampleConfig = cli.command {
        print!("{EXAMPLE_CONFIG}");
        return 0;
    }
    let Some(path) = cli.config.clone() else {
        eprintln!("error: --config is required for this command");
        return EXIT_PRECONDITION;
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return EXIT_PRECONDITION;
        }
    }
    let exp = match load(&cli, &path) {
        Ok(exp) => exp,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_PARSE;
        }
    };
    let dir = cli.out.clone().unwrap_or_else(|| exp.config.output.dir.clone());
    let mut sink = Sink::new(dir, exp.config.output.prefix.clone(), cli.format);
    info!("{} points, map {}, quasi-metric {}", exp.cloud.len(), exp.map.name(), exp.qmetric.description);
    let result = match cli.command {
        Command::Validate => commands::validate(&exp, &mut sink),
        Command::Counts => commands::counts(&exp, &mut sink),
        Command::Entropy => commands::entropy(&exp, &mut sink),
        Command::Compare => commands::compare(&exp, &mut sink),
        Command::Power { m } => commands::power(&exp, m.unwrap_or(exp.config.power), &mut sink),
        Command::ExampleConfig => unreachable!("handled above"),
    };
    match result {
        Ok(outcome) => {
            info!("{} files written to {}", sink.written().len(), sink.dir().display());
            if outcome != Outcome::Success {
                error!("finished with {outcome:?}");
            }
            outcome.code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_PRECONDITION
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QME_LOG", "warn")).init();
    let cli = Cli::parse();
    ExitCode::from(run(cli))
}
