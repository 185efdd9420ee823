use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use blowup_core::io::schema::check_dir;
use blowup_core::io::{emit_outputs, run_pipeline, Manifest, Mode, RunConfig};
use blowup_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "blowup",
    version,
    about = "Simulation, mode analysis and shooting for the exponential reaction-diffusion system"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct StageArgs {
    /// Config file (TOML). Defaults apply to missing keys.
    #[arg(long, value_name = "PATH", conflicts_with = "seed_manifest")]
    config: Option<PathBuf>,
    /// Run directory; defaults to outputs.directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replay the config recorded in a previous run's manifest.
    #[arg(long, value_name = "PATH")]
    seed_manifest: Option<PathBuf>,
    /// Worker threads; overrides the config field.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the eigensystem, quadrature and semigroup identities.
    SpectralVerify(StageArgs),
    /// Run the similarity-variable solver from one initial datum.
    Simulate(StageArgs),
    /// Search for the two-parameter initial data that stays in the shrinking set.
    Shoot(StageArgs),
    /// Run the physical solver and check the intermediate and regular regions.
    VerifyRegions(StageArgs),
    /// Run sweep.mode for every point in sweep.points.
    Sweep(StageArgs),
    /// Rewrite the plot files of a completed run directory.
    Emit { dir: PathBuf },
    /// Validate every data file under a directory against the bundled schemas.
    Check { dir: PathBuf },
    /// Print the canonical form and hash of a config.
    Config {
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
    },
}

fn load_config(a: &StageArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match (&a.config, &a.seed_manifest) {
        (_, Some(m)) => Manifest::load(m)?.config,
        (Some(p), None) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        (None, None) => RunConfig::default(),
    };
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stage(mode: Mode, a: &StageArgs) -> anyhow::Result<ExitCode> {
    let cfg = match load_config(a) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(ExitCode::from(2));
        }
    };
    let dir = a.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.outputs.directory));
    match run_pipeline(&cfg, mode, &dir) {
        Ok(o) => {
            println!("{mode}: {} ({} failures)", o.dir.display(), o.failures);
            Ok(if o.failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            Ok(ExitCode::from(2))
        }
        Err(e) => {
            eprintln!("{mode} failed: {e}");
            Ok(ExitCode::from(1))
        }
    }
}

fn check(dir: &Path) -> anyhow::Result<ExitCode> {
    let mut bad = 0;
    for (p, r) in check_dir(dir)? {
        match r {
            Ok(name) => println!("ok\t{name}\t{}", p.display()),
            Err(e) => {
                bad += 1;
                println!("FAIL\t{e}");
            }
        }
    }
    Ok(if bad == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::SpectralVerify(a) => stage(Mode::SpectralVerify, a),
        Cmd::Simulate(a) => stage(Mode::Simulate, a),
        Cmd::Shoot(a) => stage(Mode::Shoot, a),
        Cmd::VerifyRegions(a) => stage(Mode::VerifyRegions, a),
        Cmd::Sweep(a) => stage(Mode::Sweep, a),
        Cmd::Emit { dir } => emit_outputs(dir).map_err(Into::into).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }),
        Cmd::Check { dir } => check(dir),
        Cmd::Config { config } => (|| {
            let cfg = match config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            print!("{}", cfg.canonical()?);
            println!("# hash: {}", cfg.hash()?);
            Ok(ExitCode::SUCCESS)
        })(),
    };
    res.unwrap_or_else(|e: anyhow::Error| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
