use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qlgrad::harness::{self, ExperimentConfig, HarnessError, Mode, MANIFEST_FILE};

#[derive(Parser)]
#[command(name = "qlgrad", version, about = "Quasi-linear elliptic solver and gradient-bound verifier")]
struct Cli {
    /// Output root; overrides QLAB_OUTPUT_ROOT.
    #[arg(long, global = true)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    config: PathBuf,
    /// Mirrors the `seed` key; the config wins.
    #[arg(long)]
    seed: Option<u64>,
    /// Mirrors the `output` key; the config wins.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and dump the solution.
    Solve(RunArgs),
    /// Solve and run every configured check.
    Verify(RunArgs),
    /// Run the ODE-level checks.
    Ode(RunArgs),
    /// Dyadic refinement study.
    Study {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Summarize a manifest.
    Report { manifest: PathBuf },
}

/// Applies flags whose keys are absent from the config; warns when both disagree.
fn merge_flags(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| HarnessError::Io {
        path: args.config.display().to_string(),
        msg: e.to_string(),
    })?;
    let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Parse(e.to_string()))?;
    if let Some(seed) = args.seed {
        if raw.contains_key("seed") {
            if seed != cfg.seed {
                eprintln!("warning: --seed {seed} ignored, the config sets seed = {}", cfg.seed);
            }
        } else {
            cfg.seed = seed;
        }
    }
    if let Some(out) = &args.output {
        match &cfg.output {
            Some(o) if o != out => {
                eprintln!("warning: --output {} ignored, the config sets output = {}", out.display(), o.display())
            }
            Some(_) => {}
            None => cfg.output = Some(out.clone()),
        }
    }
    Ok(())
}

fn run(args: &RunArgs, mode: Mode, levels: Option<usize>) -> Result<bool, HarnessError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    merge_flags(&mut cfg, args)?;
    let dir = harness::run_dir(&cfg, &args.config);
    let m = harness::execute(&cfg, mode, &dir, levels)?;
    let s = harness::report(&dir.join(MANIFEST_FILE))?;
    print!("{}", s.text);
    println!("manifest: {}", dir.join(MANIFEST_FILE).display());
    Ok(m.ok())
}

fn report(path: &Path) -> Result<bool, HarnessError> {
    let s = harness::report(path)?;
    print!("{}", s.text);
    Ok(harness::RunManifest::read(path)?.ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(root) = &cli.output_root {
        std::env::set_var("QLAB_OUTPUT_ROOT", root);
    }
    let res = match &cli.command {
        Command::Solve(a) => run(a, Mode::Solve, None),
        Command::Verify(a) => run(a, Mode::Verify, None),
        Command::Ode(a) => run(a, Mode::Ode, None),
        Command::Study { run: a, levels } => run(a, Mode::Study, *levels),
        Command::Report { manifest } => report(manifest),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
