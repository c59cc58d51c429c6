use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use torsionlab_cli::commands::{self, CommandError, Outcome, Status};
use torsionlab_cli::config::RunConfig;

/// Numerical torsion of annulus twist maps and the pendulum flow.
#[derive(Debug, Parser)]
#[command(name = "torsionlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads; TORSIONLAB_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides `output.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Finite-horizon torsion at a list of points.
    Torsion(Common),
    /// Zero-torsion point on an essential curve.
    FindZero {
        #[command(flatten)]
        common: Common,
        /// Skip the negative-torsion certificate.
        #[arg(long)]
        assume_negative_torsion: bool,
    },
    /// Zero-torsion search across a band of circles.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        assume_negative_torsion: bool,
    },
    /// Certify Torsion_1 < 0 on a grid.
    Certify(Common),
    /// Torsion/variation identity on an invariant curve.
    Birkhoff(Common),
    /// Linking number of two points and a torsion root between them.
    Linking(Common),
    /// Time-one torsion computed through tilts.
    Tilt(Common),
}

fn threads(flag: Option<usize>) -> Option<usize> {
    std::env::var("TORSIONLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .or(flag)
        .filter(|&n| n > 0)
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Route the outputs: CSV to `--out`/`output.csv` or stdout, JSON to
/// `output.json`, next to the CSV or stdout, summary to stderr.
fn emit(outcome: &Outcome, out: Option<PathBuf>, cfg: &RunConfig) -> Result<(), String> {
    let csv_path = out.or_else(|| cfg.output.csv.clone());
    let to_stdout_allowed = !outcome.summary_is_result;
    if let Some(t) = &outcome.table {
        match &csv_path {
            Some(p) => write_file(p, &t.to_csv())?,
            None if to_stdout_allowed && outcome.json.is_none() => print!("{}", t.to_csv()),
            None => {}
        }
    }
    if let Some(json) = &outcome.json {
        match (&cfg.output.json, &csv_path) {
            (Some(p), _) => write_file(p, json)?,
            (None, Some(p)) => write_file(Path::new(&format!("{}.json", p.display())), json)?,
            (None, None) if to_stdout_allowed => print!("{json}"),
            (None, None) => {}
        }
    }
    if outcome.summary_is_result && csv_path.is_none() {
        println!("{}", outcome.summary);
    } else {
        eprintln!("{}", outcome.summary);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32, (i32, String)> {
    let (common, assume) = match &cli.command {
        Command::FindZero { common, assume_negative_torsion }
        | Command::Sweep { common, assume_negative_torsion } => (common, *assume_negative_torsion),
        Command::Torsion(c)
        | Command::Certify(c)
        | Command::Birkhoff(c)
        | Command::Linking(c)
        | Command::Tilt(c) => (c, false),
    };
    let cfg = RunConfig::load(&common.config).map_err(|e| (3, e.to_string()))?;
    let result: Result<Outcome, CommandError> = match &cli.command {
        Command::Torsion(_) => commands::torsion(&cfg),
        Command::FindZero { .. } => commands::find_zero(&cfg, assume),
        Command::Sweep { .. } => commands::sweep(&cfg, assume),
        Command::Certify(_) => commands::certify(&cfg),
        Command::Birkhoff(_) => commands::birkhoff(&cfg),
        Command::Linking(_) => commands::linking(&cfg),
        Command::Tilt(_) => commands::tilt(&cfg),
    };
    match result {
        Ok(outcome) => {
            emit(&outcome, common.out.clone(), &cfg).map_err(|e| (3, e))?;
            Ok(if outcome.status == Status::Pass { 0 } else { 1 })
        }
        Err(e) => {
            let mut msg = format!("error: {e}");
            if let Some(cert) = e.certificate_json() {
                msg.push('\n');
                msg.push_str(&cert);
            }
            Err((e.exit_code(), msg))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match threads(cli.threads) {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err((3, format!("cannot start {n} threads: {e}"))),
        },
        None => run(cli),
    };
    match code {
        Ok(c) => ExitCode::from(c as u8),
        Err((c, msg)) => {
            eprintln!("{msg}");
            ExitCode::from(c as u8)
        }
    }
}
