use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixreg::io::{run, Command, RunConfig, Settings};

/// Mixture linear regression with normal, t, skew-normal and skew-t errors.
#[derive(Parser)]
#[command(name = "mixreg", version)]
struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Fit one error family to a CSV dataset.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        family: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo bias and MSE study for one error case.
    Simulate {
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Comma-separated families, default all four.
        #[arg(long)]
        families: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit several families to one dataset, optionally with added outliers.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        families: Option<String>,
        /// `x,y:count` appends `count` copies of the point.
        #[arg(long)]
        outliers: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Response column, default the last.
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    no_intercept: bool,
    /// Number of components.
    #[arg(long)]
    g: Option<usize>,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    fix_nu: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// standard or accelerated.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    screen_iterations: Option<usize>,
    /// ecm or ecme.
    #[arg(long)]
    nu_update: Option<String>,
    /// shortcut or solve.
    #[arg(long)]
    lambda_update: Option<String>,
}

impl CommonArgs {
    fn into_settings(self) -> Settings {
        Settings {
            fix_nu: self.fix_nu,
            seed: self.seed,
            out: self.out,
            format: self.format,
            preset: self.preset,
            max_iterations: self.max_iterations,
            epsilon: self.epsilon,
            starts: self.starts,
            screen_iterations: self.screen_iterations,
            nu_update: self.nu_update,
            lambda_update: self.lambda_update,
            ..Settings::default()
        }
    }
}

impl DataArgs {
    fn apply(self, s: Settings) -> Settings {
        Settings {
            input: self.input,
            response: self.response,
            no_intercept: self.no_intercept.then_some(true),
            g: self.g,
            ..s
        }
    }
}

fn settings(sub: Sub) -> (Command, Settings) {
    match sub {
        Sub::Fit { data, family, common } => {
            (Command::Fit, Settings { family, ..data.apply(common.into_settings()) })
        }
        Sub::Simulate { case, n, replicates, families, common } => {
            (Command::Simulate, Settings { case, n, replicates, families, ..common.into_settings() })
        }
        Sub::Compare { data, families, outliers, common } => {
            (Command::Compare, Settings { families, outliers, ..data.apply(common.into_settings()) })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, flags) = settings(cli.command);
    let result = cli
        .config
        .as_deref()
        .map(Settings::from_toml_file)
        .transpose()
        .and_then(|file| RunConfig::resolve(command, flags.or(file.unwrap_or_default())))
        .and_then(|config| run(&config));
    match result {
        Ok(outcome) => {
            for path in &outcome.written {
                eprintln!("wrote {}", path.display());
            }
            if !outcome.all_converged {
                eprintln!("warning: not every fit converged");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
