use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use skyharvest::agent::Enhancements;
use skyharvest::experiment::{
    cmd_eval, cmd_plot, cmd_sweep, cmd_train, Algorithm, EvalSource, ExperimentError, RunConfig, TrainOptions,
};

#[derive(Parser)]
#[command(name = "skyharvest", version, about = "Train and evaluate UAV data-collection agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or play a baseline) into a run directory.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Replace an existing run directory.
        #[arg(long)]
        force: bool,
        /// Suppress progress output.
        #[arg(long)]
        quiet: bool,
    },
    /// Deterministic evaluation of a run directory or a checkpoint.
    Eval {
        /// Run directory written by `train`.
        #[arg(long, conflicts_with_all = ["checkpoint", "config"])]
        run: Option<PathBuf>,
        /// Checkpoint to evaluate under --config.
        #[arg(long, requires = "config")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Evaluation episodes per seed.
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        #[arg(long)]
        algo: Option<Algo>,
        /// Directory for per-episode CSVs and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate over several sensor counts.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated sensor counts, e.g. 3,6,9.
        #[arg(long, value_delimiter = ',')]
        sensors: Vec<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Render SVG plots for one or more run directories.
    Plot {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Print a complete config with every default materialized.
    Config {
        #[arg(long, value_enum, default_value = "tiny")]
        preset: Preset,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seeds; replaces the config's list.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algo>,
    /// Enhancements to switch off: any of pfam, per, vrc.
    #[arg(long, value_delimiter = ',')]
    ablate: Option<Vec<String>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Sacppv,
    Sac,
    Random,
    Greedy,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Sacppv => Algorithm::Sacppv,
            Algo::Sac => Algorithm::Sac,
            Algo::Random => Algorithm::Random,
            Algo::Greedy => Algorithm::Greedy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Paper,
    Tiny,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, ExperimentError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(n) = self.episodes {
            cfg.episodes = n;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.to_string_lossy().into_owned();
        }
        if let Some(a) = self.algo {
            cfg.algorithm = a.into();
        }
        if let Some(names) = &self.ablate {
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            cfg.agent.enhancements = Enhancements::ablate(&names)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Train { run, force, quiet } => {
            let cfg = run.load()?;
            let dir = cmd_train(&cfg, &TrainOptions { force, verbose: !quiet })?;
            println!("{}", dir.display());
        }
        Command::Eval { run, checkpoint, config, episodes, seed, algo, out } => {
            let source = match (run, config) {
                (Some(dir), _) => EvalSource::Run(dir),
                (None, Some(path)) => {
                    let mut cfg = RunConfig::load(&path)?;
                    if let Some(a) = algo {
                        cfg.algorithm = a.into();
                    }
                    EvalSource::Checkpoint { checkpoint, config: Box::new(cfg) }
                }
                (None, None) => return Err(ExperimentError::Usage("eval needs --run or --config".into())),
            };
            let seeds = (!seed.is_empty()).then_some(seed);
            let summary = cmd_eval(&source, episodes, seeds, out.as_deref())?;
            for s in &summary.per_seed {
                println!(
                    "seed {}: return {:.4} ± {:.4}, fair data {:.4e} ± {:.4e}, energy {:.2} ± {:.2}",
                    s.seed, s.return_mean, s.return_std, s.fair_data_mean, s.fair_data_std, s.energy_mean, s.energy_std
                );
            }
            println!("{}", summary.display());
        }
        Command::Sweep { run, sensors, force } => {
            let cfg = run.load()?;
            let out = run.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir).join("sweep"));
            let report = cmd_sweep(&cfg, &sensors, &out, force)?;
            for (n, m) in &report.means {
                println!("n_sensors {n}: mean fair data {m:.4e}");
            }
            let verdict = if report.nondecreasing { "nondecreasing" } else { "not monotone" };
            println!("trend: {verdict}");
            println!("{}", report.csv.display());
            println!("{}", report.svg.display());
        }
        Command::Plot { runs, out } => {
            for p in cmd_plot(&runs, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Config { preset } => {
            let cfg = match preset {
                Preset::Paper => RunConfig::paper(),
                Preset::Tiny => RunConfig::tiny(),
            };
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
