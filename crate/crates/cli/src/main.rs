//! `focklab`: configuration-driven experiments on truncated Fock spaces.

mod config;
mod presets;
mod runner;
mod suite;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::runner::Artifacts;

#[derive(Parser)]
#[command(name = "focklab", version, about = "Numerical experiments on weighted Fock spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        config: PathBuf,
    },
    /// List the built-in operators.
    Presets,
    /// Run the fast invariant suite.
    Check {
        /// Also write every artifact to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Caps the global pool at `FOCKLAB_THREADS` when set.
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("FOCKLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("FOCKLAB_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        bail!("FOCKLAB_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn report(a: &Artifacts) {
    let m = &a.manifest;
    println!("{} ({}), trust radius {:.4}, untrusted samples {}", a.stem, m.operator.as_deref().unwrap_or("-"), m.trust_radius, m.untrusted_samples);
    for inv in &m.invariants {
        println!(
            "  [{}] {} = {:.3e} (tol {:.1e})",
            if inv.pass { "PASS" } else { "FAIL" },
            inv.name,
            inv.value,
            inv.tolerance
        );
    }
    for w in &m.warnings {
        println!("  warning: {w}");
    }
}

fn run_config(path: &Path) -> Result<bool> {
    let cfg = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let dir = match &cfg.output_dir {
        Some(d) => base.join(d),
        None => base.join("focklab-out"),
    };
    let art = runner::run(&cfg)?;
    art.write(&dir)?;
    report(&art);
    println!("manifest {} sha256 {}", dir.join(art.manifest_name()).display(), art.manifest_hash());
    Ok(art.manifest.passed)
}

fn check(out: Option<&Path>) -> Result<bool> {
    let res = suite::run_suite()?;
    for a in &res.runs {
        report(a);
        if let Some(dir) = out {
            a.write(dir)?;
        }
    }
    let failed = res.runs.iter().filter(|a| !a.manifest.passed).count();
    println!("{} experiments, {} failed", res.runs.len(), failed);
    println!("suite manifest sha256 {}", res.hash);
    Ok(res.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Run { config } => run_config(config),
        Command::Presets => {
            print!("{}", presets::list_presets());
            Ok(true)
        }
        Command::Check { out } => check(out.as_deref()),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
