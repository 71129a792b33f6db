use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use skewlimit_cli::commands::{self, ReproduceSettings, Source};
use skewlimit_cli::{exit_code, CliError, Exit, ExperimentConfig, Format, Outcome};

#[derive(Parser)]
#[command(
    name = "skewlimit",
    version,
    about = "Small-noise limits of skew diffusions with non-Lipschitz drift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for ensembles and Gamma grids (default: all cores).
    #[arg(long, global = true, env = "SKEWLIMIT_WORKERS")]
    workers: Option<usize>,

    /// Directory for report files; without it the report goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Report format; overrides `output.formats` from the config.
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<Format>,

    /// Master seed; overrides `run.master_seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct Input {
    /// TOML experiment file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,

    /// Built-in problem instead of a config file (see `list-presets`).
    #[arg(long)]
    preset: Option<String>,
}

impl Input {
    fn source(&self) -> Source {
        match (&self.config, &self.preset) {
            (Some(path), _) => Source::File(path.clone()),
            (None, Some(name)) => Source::Preset(name.clone()),
            (None, None) => unreachable!("clap requires one of them"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing conditions (exit 2 if any fails).
    Validate(Input),
    /// Case label, extremal solutions, asymptotic constants and Gamma.
    Analyze {
        #[command(flatten)]
        input: Input,
        /// Number of time intervals for the extremal samples.
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Tail-integral approximations Gamma_K(eps) and their limit.
    Gamma {
        #[command(flatten)]
        input: Input,
        /// Cutoffs K (comma separated); default from the config.
        #[arg(long = "K", value_delimiter = ',')]
        k: Option<Vec<f64>>,
        /// Noise levels (comma separated); default from the config.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// One Monte Carlo ensemble.
    Simulate {
        #[command(flatten)]
        input: Input,
        /// Noise level; default is the smallest eps of the ladder.
        #[arg(long)]
        eps: Option<f64>,
        /// Also write the first N paths as (t, eta, xi) tables (needs --out).
        #[arg(long, default_value_t = 0)]
        dump_paths: usize,
    },
    /// Monte Carlo ensembles along the eps ladder.
    Converge(Input),
    /// Every worked example: closed forms, numeric limit and Monte Carlo.
    ReproduceExamples {
        #[arg(long, default_value_t = ReproduceSettings::default().n_paths)]
        paths: usize,
        #[arg(long, default_value_t = ReproduceSettings::default().eps)]
        eps: f64,
        #[arg(long, default_value_t = ReproduceSettings::default().step)]
        step: f64,
    },
    /// Print the names of the built-in problems.
    ListPresets,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Usage as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Exit> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()).into());
        }
        pool = pool.num_threads(n);
    }
    pool.build_global().context("starting worker pool")?;

    let load = |input: &Input| -> anyhow::Result<ExperimentConfig> {
        Ok(commands::load(&input.source(), cli.seed)?)
    };
    let (outcome, formats) = match &cli.command {
        Command::ListPresets => {
            for p in skewlimit_cli::presets::PRESETS {
                println!("{:<16} {}", p.name, p.about);
            }
            return Ok(Exit::Success);
        }
        Command::Validate(input) => {
            let cfg = load(input)?;
            (commands::validate(&cfg)?, cfg.output.clone())
        }
        Command::Analyze { input, samples } => {
            let cfg = load(input)?;
            (commands::analyze(&cfg, *samples)?, cfg.output.clone())
        }
        Command::Gamma { input, k, eps } => {
            let cfg = load(input)?;
            (
                commands::gamma_table(&cfg, k.as_deref(), eps.as_deref())?,
                cfg.output.clone(),
            )
        }
        Command::Simulate {
            input,
            eps,
            dump_paths,
        } => {
            let cfg = load(input)?;
            let dump = (*dump_paths).max(cfg.output.dump_paths);
            if dump > 0 && cli.out.is_none() && cfg.output.directory.is_none() {
                return Err(CliError::Usage(
                    "--dump-paths needs an output directory (--out)".into(),
                )
                .into());
            }
            (commands::simulate(&cfg, *eps, dump)?, cfg.output.clone())
        }
        Command::Converge(input) => {
            let cfg = load(input)?;
            (commands::converge(&cfg)?, cfg.output.clone())
        }
        Command::ReproduceExamples { paths, eps, step } => {
            let settings = ReproduceSettings {
                eps: *eps,
                step: *step,
                n_paths: *paths,
                master_seed: cli.seed.unwrap_or(ReproduceSettings::default().master_seed),
                ..ReproduceSettings::default()
            };
            (commands::reproduce_examples(&settings)?, Default::default())
        }
    };
    emit(
        &outcome,
        cli.out.or(formats.directory),
        cli.format.map(|f| vec![f]).unwrap_or(formats.formats),
    )?;
    Ok(outcome.exit)
}

fn emit(outcome: &Outcome, dir: Option<PathBuf>, formats: Vec<Format>) -> anyhow::Result<()> {
    match dir {
        Some(dir) => {
            let written = outcome
                .write_to(&dir, &formats)
                .with_context(|| format!("writing reports to {}", dir.display()))?;
            println!("{}", outcome.summary);
            for path in written.iter().filter(|p| !p.starts_with(dir.join("paths"))) {
                println!("wrote {}", path.display());
            }
            let dumped = written.len()
                - written
                    .iter()
                    .filter(|p| !p.starts_with(dir.join("paths")))
                    .count();
            if dumped > 0 {
                println!(
                    "wrote {dumped} path files under {}",
                    dir.join("paths").display()
                );
            }
        }
        None => {
            eprintln!("{}", outcome.summary);
            print!(
                "{}",
                outcome.render(formats.first().copied().unwrap_or(Format::Csv))
            );
        }
    }
    Ok(())
}
