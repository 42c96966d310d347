use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mimofb_cli::describe::describe;
use mimofb_cli::run::write_file;
use mimofb_cli::{CliError, CliResult, ExperimentConfig, Runner, Scenario, SMOKE_PRESET};

#[derive(Parser)]
#[command(
    name = "mimofb",
    version,
    about = "Learned limited feedback for MIMO beamforming"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "MIMOFB_THREADS")]
    threads: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a feedback model and save it.
    Train(RunArgs),
    /// Design a codebook and save it.
    DesignCodebook(RunArgs),
    /// Average normalized effective gain per scheme.
    EvalGain(RunArgs),
    /// QPSK symbol error rate per scheme and data SNR.
    EvalSer(RunArgs),
    /// Online receiver latency per scheme.
    BenchTime(RunArgs),
    /// Small end-to-end run of every scheme.
    Smoke(RunArgs),
    /// Summarize a model or codebook file and check its integrity.
    Describe { path: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination (stdout when absent).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Model file (template with {L}, {B}, {seed}, {psi}).
    #[arg(long)]
    model: Option<String>,
    /// Codebook file (template with {L}, {B}, {seed}, {psi}).
    #[arg(long)]
    codebook: Option<String>,
    /// Override any config value, e.g. `--set pilots.length=6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.sets.clone();
        if let Some(s) = self.seed {
            o.push(format!("seed={s}"));
        }
        if let Some(p) = &self.output {
            o.push(format!("output={}", toml_string(&p.display().to_string())));
        }
        if let Some(m) = &self.model {
            o.push(format!("artifacts.model={}", toml_string(m)));
        }
        if let Some(c) = &self.codebook {
            o.push(format!("artifacts.codebook={}", toml_string(c)));
        }
        o
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn execute(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("threads", e.to_string()))?;
    }
    let (args, scenario) = match cli.command {
        Command::Describe { path } => {
            print!("{}", describe(&path)?);
            return Ok(());
        }
        Command::Train(a) => (a, Scenario::Train),
        Command::DesignCodebook(a) => (a, Scenario::DesignCodebook),
        Command::EvalGain(a) => (a, Scenario::Fig2Gain),
        Command::EvalSer(a) => (a, Scenario::Fig3Ser),
        Command::BenchTime(a) => (a, Scenario::Table1Timing),
        Command::Smoke(a) => (a, Scenario::Smoke),
    };
    let base = if scenario == Scenario::Smoke {
        SMOKE_PRESET
    } else {
        ""
    };
    let cfg = ExperimentConfig::load(base, args.config.as_deref(), &args.overrides())?;
    // artifact preparation may reuse the config of the experiment it prepares for
    let prepares = matches!(scenario, Scenario::Train | Scenario::DesignCodebook);
    if let Some(s) = cfg.scenario {
        if s != scenario && !prepares {
            return Err(CliError::config(
                "scenario",
                format!("config is for `{s}`, command runs `{scenario}`"),
            ));
        }
    }
    let out = Runner {
        verbose: !cli.quiet,
    }
    .run(&cfg, scenario)?;
    if matches!(scenario, Scenario::Train | Scenario::DesignCodebook) && out.rows.is_empty() {
        return Ok(());
    }
    match &cfg.output {
        Some(p) => write_file(p, &out.csv())?,
        None => print!("{}", out.csv()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
