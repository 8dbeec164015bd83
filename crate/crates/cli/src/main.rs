use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use sensim::experiment::{run_sweep, write_ledger_csv, write_rows};
use sensim::{
    simulate, simulate_traced, AccessMethod, ResultRow, SensingAntennaConfig, SimParams, SweepSpec,
};

/// Simulates WLAN sensing exchanges sharing the medium with saturated data
/// traffic and writes one CSV row per simulated point.
///
/// Without --config a single point is run. With --config the whole grid of
/// that configuration is swept; the swept parameters then come from the grid.
#[derive(Parser, Debug)]
#[command(name = "sensim", version)]
struct Args {
    /// Sweep configuration: 1 (SAW x nSTA), 2 (apps x nSTA), 3 (STRA x nSTA).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    config: Option<u32>,

    /// Channel access for sensing: edca, pifs or none.
    #[arg(long)]
    access: Option<AccessMethod>,

    #[arg(long)]
    nsta: Option<u32>,

    #[arg(long)]
    numapp: Option<u32>,

    /// SAW duration code (window length is code / 127 * 12.7 ms).
    #[arg(long = "saw-duration")]
    saw_duration: Option<u32>,

    /// Antenna configuration as TxR, for example 2x2.
    #[arg(long)]
    stra: Option<SensingAntennaConfig>,

    #[arg(long = "duration-s")]
    duration_s: Option<f64>,

    #[arg(long)]
    seed: Option<u64>,

    /// `key = value` file applied before the other flags.
    #[arg(long = "param-file")]
    param_file: Option<PathBuf>,

    /// Result CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Event trace of a single run.
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Per-window ledger CSV of a single run.
    #[arg(long)]
    ledger: Option<PathBuf>,

    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

type BoxError = Box<dyn std::error::Error>;

fn params(args: &Args) -> Result<SimParams, BoxError> {
    let mut p = SimParams::default();
    if let Some(path) = &args.param_file {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        p.apply_param_file(&text)?;
    }
    if let Some(v) = args.access {
        p.access = v;
    }
    if let Some(v) = args.nsta {
        p.n_sta = v;
    }
    if let Some(v) = args.numapp {
        p.num_app = v;
    }
    if let Some(v) = args.saw_duration {
        p.saw_duration_code = v;
    }
    if let Some(v) = args.stra {
        p.stra = v;
    }
    if let Some(v) = args.duration_s {
        if !(v.is_finite() && v > 0.0) {
            return Err("--duration-s must be a positive number of seconds".into());
        }
        p.sim_duration = Duration::from_secs_f64(v);
    }
    if let Some(v) = args.seed {
        p.rng_seed = v;
    }
    Ok(p)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, BoxError> {
    Ok(match path {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| format!("{}: {e}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(args: Args) -> Result<(), BoxError> {
    let p = params(&args)?;
    if let Some(config) = args.config {
        let swept = [
            ("--nsta", args.nsta.is_some()),
            ("--numapp", args.numapp.is_some()),
            ("--saw-duration", args.saw_duration.is_some()),
            ("--stra", args.stra.is_some()),
            ("--trace", args.trace.is_some()),
            ("--ledger", args.ledger.is_some()),
        ];
        if let Some((flag, _)) = swept.iter().find(|(_, set)| *set) {
            return Err(format!("{flag} cannot be combined with --config").into());
        }
        let spec = SweepSpec::new(config, &p)?;
        let mut out = output(&args.out)?;
        run_sweep(&spec, &mut out, args.jobs)?;
        out.flush()?;
        return Ok(());
    }

    p.validate()?;
    let run = match &args.trace {
        Some(path) => {
            let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            simulate_traced(&p, BufWriter::new(file))?
        }
        None => simulate(&p)?,
    };
    if let Some(path) = &args.ledger {
        let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        write_ledger_csv(run.ledgers(), BufWriter::new(file))?;
    }
    let row = ResultRow::from_run(&p, &run)?;
    let mut out = output(&args.out)?;
    write_rows(&[row], &mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sensim: {e}");
            ExitCode::from(2)
        }
    }
}
