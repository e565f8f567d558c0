use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use reflect_core::agent::{Mode, ReflectorKind};
use reflect_core::env::EnvKind;
use reflect_core::harness::{
    self, ablate, execute_ablate, execute_calibrate, execute_run, AblationSpec, BackendKind, HarnessConfig,
    HarnessError, Overrides,
};
use reflect_core::llm::CacheMode;

#[derive(Parser)]
#[command(
    name = "reflect",
    version,
    about = "Run, calibrate, ablate and report reflective agent experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over a task set.
    Run(Common),
    /// Build a constitution for cooperative runs.
    Calibrate(Common),
    /// Sweep reflection/summarization frequencies and category knockouts.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// (r_freq, s_freq) cells as `r:s,r:s,...`; defaults to the six-cell grid.
        #[arg(long)]
        cells: Option<String>,
        /// Knockout cells as `abstract,error,progress,abstract+error+progress`.
        #[arg(long)]
        knockouts: Option<String>,
        /// Skip the ReAct reference row.
        #[arg(long)]
        no_react: bool,
    },
    /// Tabulate metrics files.
    Report {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        /// Write `<OUT>.md` and `<OUT>.csv` instead of printing markdown.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    reflector: Option<ReflectorKind>,
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long, value_delimiter = ',')]
    task_types: Option<Vec<String>>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r_freq: Option<u32>,
    #[arg(long)]
    s_freq: Option<u32>,
    #[arg(long)]
    max_turns: Option<u32>,
    /// Reflexion trials per task.
    #[arg(long)]
    trials: Option<u32>,
    /// Calibration tasks per task type; several values give one file each.
    #[arg(long, value_delimiter = ',')]
    calibration_factor: Vec<u32>,
    #[arg(long)]
    few_shot: Option<usize>,
    /// Constitution to read (cooperative) or write (calibrate).
    #[arg(long)]
    constitution: Option<PathBuf>,
    #[arg(long)]
    rulebook: Option<PathBuf>,
    /// JSON task list to use instead of generated tasks.
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Repeat the run over this many consecutive seeds.
    #[arg(long)]
    seeds: Option<u32>,
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    #[arg(long)]
    llm_backend: Option<BackendKind>,
    #[arg(long)]
    cache: Option<CacheMode>,
    #[arg(long)]
    cache_file: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write each task's initial world state to states.txt.
    #[arg(long)]
    dump_state: bool,
}

impl Common {
    fn resolve(&self) -> Result<HarnessConfig, HarnessError> {
        let overrides = Overrides {
            mode: self.mode,
            reflector: self.reflector,
            env: self.env,
            task_types: self.task_types.clone(),
            n: self.n,
            r_freq: self.r_freq,
            s_freq: self.s_freq,
            max_turns: self.max_turns,
            trials: self.trials,
            calibration_factor: self.calibration_factor.first().copied(),
            few_shot: self.few_shot,
            constitution: self.constitution.clone(),
            rulebook: self.rulebook.clone(),
            tasks_file: self.tasks.clone(),
            seed: self.seed,
            seeds: self.seeds,
            llm_endpoint: self.llm_endpoint.clone(),
            llm_model: self.llm_model.clone(),
            backend: self.llm_backend,
            cache: self.cache,
            cache_file: self.cache_file.clone(),
            out_dir: self.out_dir.clone(),
            dump_state: self.dump_state,
        };
        HarnessConfig::resolve(self.config.as_deref(), &overrides)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run(common) => {
            let cfg = common.resolve()?;
            for art in execute_run(&cfg)? {
                println!("{}", art.summary());
            }
        }
        Command::Calibrate(common) => {
            let cfg = common.resolve()?;
            cfg.env_kind()?;
            let factors = if common.calibration_factor.is_empty() {
                vec![cfg.run.calibration_factor]
            } else {
                common.calibration_factor.clone()
            };
            for path in execute_calibrate(&cfg, &factors)? {
                println!("{}", path.display());
            }
        }
        Command::Ablate {
            common,
            cells,
            knockouts,
            no_react,
        } => {
            let cfg = common.resolve()?;
            let defaults = AblationSpec::default();
            let spec = AblationSpec {
                cells: match cells {
                    Some(c) => ablate::parse_cells(&c)?,
                    None => defaults.cells,
                },
                knockouts: match knockouts {
                    Some(k) => ablate::parse_knockouts(&k)?,
                    None => defaults.knockouts,
                },
                react_reference: !no_react,
            };
            print!("{}", execute_ablate(&cfg, &spec)?.markdown());
        }
        Command::Report { metrics, out } => {
            let (md, csv) = harness::report(&metrics)?;
            match out {
                Some(stem) => {
                    for (ext, text) in [("md", &md), ("csv", &csv)] {
                        let path = stem.with_extension(ext);
                        std::fs::write(&path, text).map_err(|e| HarnessError::Io {
                            path: path.display().to_string(),
                            source: e,
                        })?;
                    }
                }
                None => print!("{md}"),
            }
        }
    }
    Ok(())
}
