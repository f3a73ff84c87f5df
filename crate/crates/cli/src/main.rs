use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pscslice_core::{emit_report, parse_config, run_scenario, Error, RunOutcome, Stage};
use rayon::prelude::*;

/// Overrides `[output] dir` of every config.
const OUT_DIR_ENV: &str = "SLICEPSC_OUT_DIR";

/// Exit code of a completed certificate with a negative verdict.
const EXIT_NEGATIVE: u8 = 1;

#[derive(Parser)]
#[command(
    name = "pscslice",
    version,
    about = "Slice scalar-curvature workbench for X x S^1"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Angle condition and ellipticity of the slice
    CheckAngle { config: PathBuf },
    /// Calibrate the forcing and solve the Dirichlet problem
    Solve { config: PathBuf },
    /// Full pipeline up to the curvature certificate
    Certify { config: PathBuf },
    /// Certify every `*.ini` in a directory, scenarios in parallel
    Batch {
        dir: PathBuf,
        #[arg(long, value_parser = parse_stage, default_value = "certify")]
        stage: Stage,
    },
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    match s {
        "check-angle" => Ok(Stage::CheckAngle),
        "solve" => Ok(Stage::Solve),
        "certify" => Ok(Stage::Certify),
        _ => Err(format!("unknown stage `{s}` (check-angle, solve, certify)")),
    }
}

fn summary(o: &RunOutcome) -> String {
    let r = &o.report;
    let mut s = format!(
        "max angle {:.6} margin {:.3e} min R_h {:.6e}",
        r.angle.max_angle, r.angle.margin, r.min_r_h
    );
    if let Some(sv) = &r.solve {
        s += &format!(
            " | C {:.4} eps {} |F| {:.3e} c1 {:.3e} eta' {:.3e} K1 {:.3e}",
            sv.c, sv.epsilon, sv.forcing_norm, sv.c1, sv.eta_prime, sv.k1
        );
    }
    if let Some(c) = &r.certificate {
        s += &format!(
            " | max K2 {:.3e} min R_exact {:.6e} min R_bound {:.6e}",
            c.k2_max, c.summary.min_r_exact, c.summary.min_r_bound
        );
    }
    if let Some(v) = r.verdict {
        s += if v {
            " | verdict positive"
        } else {
            " | verdict negative"
        };
    }
    s
}

/// Run one config and write its report; returns the exit code and a status line.
fn run_one(path: &Path, stage: Stage) -> (u8, String) {
    let run = || -> Result<(RunOutcome, Vec<PathBuf>), Error> {
        let config = parse_config(path)?;
        let outcome = run_scenario(&config, stage)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let dir = match std::env::var_os(OUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ if config.output.dir.is_absolute() => config.output.dir.clone(),
            _ => base.join(&config.output.dir),
        };
        let written = emit_report(&outcome.report, &outcome.fields, outcome.wall_time, &dir)?;
        Ok((outcome, written))
    };
    match run() {
        Ok((o, written)) => {
            let code = if o.report.verdict == Some(false) {
                EXIT_NEGATIVE
            } else {
                0
            };
            let mut line = summary(&o);
            for f in &o.report.flags {
                line += &format!("\n  flag: {f}");
            }
            for w in &o.report.warnings {
                line += &format!("\n  warning: {w}");
            }
            line += &format!("\n  report: {}", written[0].display());
            (code, line)
        }
        Err(e) => {
            let kind = if e.is_hypothesis_violation() {
                "hypothesis violated"
            } else {
                "error"
            };
            (e.exit_code() as u8, format!("{kind}: {e}"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::CheckAngle { config } => single(&config, Stage::CheckAngle),
        Command::Solve { config } => single(&config, Stage::Solve),
        Command::Certify { config } => single(&config, Stage::Certify),
        Command::Batch { dir, stage } => batch(&dir, stage),
    };
    ExitCode::from(code)
}

fn single(path: &Path, stage: Stage) -> u8 {
    let (code, line) = run_one(path, stage);
    if code > EXIT_NEGATIVE {
        eprintln!("{}: {line}", path.display());
    } else {
        println!("{}: {line}", path.display());
    }
    code
}

fn batch(dir: &Path, stage: Stage) -> u8 {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{}", Error::io(dir.display().to_string(), e));
            return 5;
        }
    };
    let mut configs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ini"))
        .collect();
    configs.sort();
    if configs.is_empty() {
        eprintln!("{}: no .ini configs found", dir.display());
        return 4;
    }
    let results: Vec<(u8, String)> = configs.par_iter().map(|p| run_one(p, stage)).collect();
    for (p, (code, line)) in configs.iter().zip(&results) {
        println!("[exit {code}] {}: {line}", p.display());
    }
    results.iter().map(|r| r.0).max().unwrap_or(0)
}
