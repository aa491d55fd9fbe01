//! Command-line front end: decompose / print / verify over a TOML run config.
//!
//! Exit codes: 0 success, 2 infeasible (material or search), 3 invariant
//! violation, 4 I/O or parse failure.

use aeroprint::config::PipelineConfig;
use aeroprint::pipeline::{run_decompose, run_print, run_verify};
use aeroprint::sampler::AngleMode;
use aeroprint::scheduler::FeasibilityMode;
use aeroprint::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "aeroprint",
    version,
    about = "Collaborative aerial 3D-printing planner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split the input mesh into per-UAV chunks and write the schedule
    Decompose(Common),
    /// Slice scheduled chunks, generate trajectories and simulate the print
    Print(Common),
    /// Re-check invariants over previously written artifacts
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration file (TOML)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the config's `[output] dir`
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// How the connectivity and extruder tilt limits combine
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Fleet feasibility rule for the search and assignment
    #[arg(long, value_enum)]
    feasibility: Option<FeasibilityArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PaperMax,
    SafeMin,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeasibilityArg {
    PerUav,
    CapacityReuse,
}

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::PrimalInfeasible { .. }
        | Error::SearchExhausted { .. }
        | Error::AssignmentFailed { .. } => EXIT_INFEASIBLE,
        Error::Parse { .. }
        | Error::NotWatertight { .. }
        | Error::NonPositiveVolume { .. }
        | Error::FaceIndexOutOfRange { .. }
        | Error::MissingArtifact(_)
        | Error::Config(_)
        | Error::Io(_)
        | Error::Json(_) => EXIT_IO,
        _ => EXIT_INVARIANT,
    }
}

fn load_config(common: &Common) -> aeroprint::Result<(PipelineConfig, PathBuf, PathBuf)> {
    let mut cfg = PipelineConfig::from_path(&common.config)?;
    if let Some(mode) = common.mode {
        cfg.sampler.angle_mode = match mode {
            ModeArg::PaperMax => AngleMode::PaperMax,
            ModeArg::SafeMin => AngleMode::SafeMin,
        };
    }
    if let Some(feas) = common.feasibility {
        cfg.fleet.feasibility = match feas {
            FeasibilityArg::PerUav => FeasibilityMode::PerUav,
            FeasibilityArg::CapacityReuse => FeasibilityMode::CapacityReuse,
        };
    }
    let config_dir = common
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let out_dir = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, config_dir, out_dir))
}

fn decompose(common: &Common) -> aeroprint::Result<u8> {
    let (cfg, config_dir, out_dir) = load_config(common)?;
    let summary = run_decompose(&cfg, &config_dir, &out_dir)?;
    println!(
        "decomposed {:.3} L into {} chunks with {} cuts (cost {:.6})",
        summary.input_volume_l,
        summary.chunk_volumes_l.len(),
        summary.cut_count,
        summary.cost
    );
    for (id, volume) in &summary.chunk_volumes_l {
        println!("  chunk {id}: {volume:.3} L");
    }
    for (uav, used) in &summary.consumed_l {
        println!("  {uav}: {used:.3} L committed");
    }
    println!("artifacts written to {}", out_dir.display());
    Ok(0)
}

fn print_cmd(common: &Common) -> aeroprint::Result<u8> {
    let (cfg, _, out_dir) = load_config(common)?;
    let summary = run_print(&cfg, &out_dir)?;
    println!(
        "printed {} chunks in {:.1} s simulated time",
        summary.chunks.len(),
        summary.makespan_s
    );
    for c in &summary.chunks {
        println!(
            "  chunk {} on {}: {:.1} m path, {:.1} s, {:.3}/{:.3} L deposited (gap {:.1}%)",
            c.chunk,
            c.uav,
            c.path_length_m,
            c.duration_s,
            c.deposited_l,
            c.volume_l,
            c.material_gap * 100.0
        );
    }
    println!(
        "tracking error: max {:.4} m, mean {:.4} m, rms {:.4} m",
        summary.tracking.max_error, summary.tracking.mean_error, summary.tracking.rms_error
    );
    Ok(0)
}

fn verify(common: &Common) -> aeroprint::Result<u8> {
    let (cfg, _, out_dir) = load_config(common)?;
    let report = run_verify(&cfg, &out_dir)?;
    for check in &report.checks {
        let status = if check.passed { "ok" } else { "FAIL" };
        if check.detail.is_empty() {
            println!("{status:4} {}", check.name);
        } else {
            println!("{status:4} {}: {}", check.name, check.detail);
        }
    }
    if report.ok() {
        println!("all checks passed");
        Ok(0)
    } else {
        eprintln!("verification failed");
        Ok(EXIT_INVARIANT)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Decompose(c) => decompose(c),
        Command::Print(c) => print_cmd(c),
        Command::Verify(c) => verify(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
