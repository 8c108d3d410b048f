use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use timeopt::bench::{self, RBConfig};
use timeopt::circuit::parse_circuit;
use timeopt::gateset::{
    build_dynamic_gateset, build_static_gateset, fit_rabi, CalibrationConfig, DurationPolicy,
    GateSet, Mode, STATIC_DURATIONS,
};
use timeopt::scheduler::compile;
use timeopt::sim::{simulate_rabi, GateModel, NoiseModel};
use timeopt::{Error, DT_NS};

#[derive(Parser)]
#[command(
    name = "timeopt",
    version,
    about = "Slack-aware pulse-duration scheduling and benchmarking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a circuit into a pulse schedule.
    Schedule(ScheduleArgs),
    /// Build a gate set by simulated calibration.
    Calibrate(CalibrateArgs),
    /// Simulate and fit a Rabi amplitude sweep.
    Rabi(RabiArgs),
    /// Run randomized benchmarking under both scheduling policies.
    Rb(RbArgs),
}

#[derive(Args)]
struct ScheduleArgs {
    /// Circuit file, text or JSON.
    circuit: PathBuf,
    #[arg(long)]
    gateset: PathBuf,
    /// Keep every gate at its minimum duration.
    #[arg(long)]
    no_optimize: bool,
    #[arg(long)]
    out: PathBuf,
    /// Also write the dependency graph in Graphviz format.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    mode: Mode,
    /// Static: the duration list. Dynamic: its minimum and maximum bound the range.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    durations: Option<Vec<u64>>,
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    qubits: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RabiArgs {
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    amplitudes: Vec<f64>,
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    samples: usize,
    /// Fixed window in dt; defaults to two nominal periods per amplitude.
    #[arg(long)]
    window: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RbArgs {
    #[arg(long)]
    qubits: usize,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    lengths: Vec<usize>,
    #[arg(long, default_value = "static")]
    mode: Mode,
    #[arg(long, default_value_t = 32)]
    min_dur: u64,
    #[arg(long, default_value_t = 512)]
    max_dur: u64,
    #[arg(long, default_value_t = 1024)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    circuits: usize,
    /// Pre-built gate set; calibrated on the fly otherwise.
    #[arg(long)]
    gateset: Option<PathBuf>,
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Disable all noise.
    #[arg(long, conflicts_with = "noise")]
    noiseless: bool,
    /// Use exact gate unitaries instead of simulated pulses.
    #[arg(long)]
    ideal: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Schedule(a) => schedule(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Rabi(a) => rabi(a),
        Command::Rb(a) => rb(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn noise_model(path: Option<&Path>) -> Result<NoiseModel, Error> {
    match path {
        Some(p) => NoiseModel::load(p),
        None => Ok(NoiseModel::default()),
    }
}

fn schedule(a: ScheduleArgs) -> Result<(), Error> {
    let circuit = parse_circuit(&std::fs::read_to_string(&a.circuit)?)?;
    let gs = GateSet::load(&a.gateset)?;
    let (sch, graph) = compile(&circuit, &gs, !a.no_optimize)?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&sch.to_json())?)?;
    if let Some(dot) = &a.dot {
        std::fs::write(dot, graph.to_dot())?;
    }
    println!(
        "makespan {} dt ({} ns), {} operations",
        sch.makespan,
        sch.makespan as f64 * DT_NS,
        sch.ops.len()
    );
    Ok(())
}

fn build_gateset(
    mode: Mode,
    durations: &[u64],
    width: usize,
    nm: &NoiseModel,
) -> Result<GateSet, Error> {
    let cfg = CalibrationConfig::default();
    let gs = match mode {
        Mode::Static => build_static_gateset(durations, width, nm, &cfg)?,
        Mode::Dynamic => {
            let min = durations.iter().copied().min().unwrap_or(32);
            let max = durations.iter().copied().max().unwrap_or(512);
            build_dynamic_gateset(DurationPolicy::dynamic_mode(min, max), width, nm, &cfg)?
        }
    };
    Ok(gs)
}

fn calibrate(a: CalibrateArgs) -> Result<(), Error> {
    let nm = noise_model(a.noise.as_deref())?;
    let durations = a.durations.unwrap_or_else(|| STATIC_DURATIONS.to_vec());
    let gs = build_gateset(a.mode, &durations, a.qubits, &nm)?;
    std::fs::write(&a.out, gs.to_json())?;
    for row in &gs.impls {
        println!(
            "q{} {} {} dt amplitude {:.6} fidelity {:.6}",
            row.qubit,
            row.kind,
            row.duration_dt,
            row.amplitude,
            row.fidelity.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn rabi(a: RabiArgs) -> Result<(), Error> {
    let nm = noise_model(a.noise.as_deref())?;
    nm.validate(1)?;
    let traces = simulate_rabi(&a.amplitudes, a.window, a.samples, nm.qubit(0), nm.dt_ns);
    let mut w = csv_writer(&a.out)?;
    w.write_record(["amplitude", "time_ns", "p0", "fit_p0"])?;
    for tr in &traces {
        let fit = fit_rabi(&tr.times_s, &tr.p0);
        match &fit {
            Ok(f) => println!(
                "amplitude {} omega {:.3} Hz rms {:.2e}",
                tr.amplitude, f.omega_hz, f.rms_residual
            ),
            Err(e) => println!("amplitude {} fit failed: {e}", tr.amplitude),
        }
        for (t, p) in tr.times_s.iter().zip(&tr.p0) {
            let fitted = fit
                .as_ref()
                .map_or(String::new(), |f| f.eval(*t).to_string());
            w.write_record([
                tr.amplitude.to_string(),
                (t * 1e9).to_string(),
                p.to_string(),
                fitted,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, Error> {
    Ok(csv::Writer::from_writer(File::create(path)?))
}

fn rb(a: RbArgs) -> Result<(), Error> {
    let nm = if a.noiseless {
        NoiseModel::noiseless()
    } else {
        noise_model(a.noise.as_deref())?
    };
    let mut cfg = RBConfig::new(a.qubits, a.lengths, a.mode, a.min_dur, a.max_dur);
    cfg.circuits_per_length = a.circuits;
    cfg.shots = a.shots;
    cfg.seed = a.seed;
    cfg.validate()?;
    let gs = match &a.gateset {
        Some(p) => GateSet::load(p)?,
        None => {
            let durations: Vec<u64> = match a.mode {
                Mode::Static => STATIC_DURATIONS
                    .iter()
                    .copied()
                    .filter(|d| (a.min_dur..=a.max_dur).contains(d))
                    .collect(),
                Mode::Dynamic => vec![a.min_dur, a.max_dur],
            };
            build_gateset(a.mode, &durations, a.qubits, &nm)?
        }
    };
    let model = if a.ideal {
        GateModel::Ideal
    } else {
        GateModel::Pulse
    };
    let res = bench::run_rb(&cfg, &gs, &nm, model)?;
    bench::write_outputs(&res, &nm, &a.out_dir)?;
    for s in res.summaries() {
        println!(
            "length {:>4} {:<9} mean P(0) {:.4} latency {:.1} ns",
            s.length,
            s.policy.name(),
            s.mean_p0,
            s.mean_latency_ns
        );
    }
    Ok(())
}
