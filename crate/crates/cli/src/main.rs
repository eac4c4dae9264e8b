mod config;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sandman_core::airlink::{generate_frame, Constellation, JammerKind, Seed};
use sandman_core::harness::{self, BerPoint};
use sandman_core::pe_array::run_block;
use sandman_core::receiver::{BlockInput, NumericMode};

use config::{DetectorChoice, RunConfig};

#[derive(Parser)]
#[command(name = "sandman-sim", version, about = "BER sweeps and cycle reports for the jammer-nulling MIMO receiver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte-Carlo BER sweep; writes results.csv, the config echo and ber.svg.
    Sweep(Common),
    /// Runs one seeded block on the PE array and prints the cycle report.
    Cycles(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// SNR points in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Vec<f64>,
    /// none | barrage | pilot | data
    #[arg(long, value_delimiter = ',')]
    jammer: Vec<JammerKind>,
    /// qpsk | 16qam
    #[arg(long = "mod", value_delimiter = ',')]
    modulation: Vec<Constellation>,
    /// sandman | sandman_float | sandman_fixed | sandman_array | lmmse
    #[arg(long, value_delimiter = ',', value_parser = DetectorChoice::parse)]
    detector: Vec<DetectorChoice>,
    #[arg(long)]
    tmax: Option<usize>,
    /// float | fixed
    #[arg(long)]
    numeric: Option<NumericMode>,
    #[arg(long)]
    clock_mhz: Option<f64>,
}

enum Failure {
    Config(String),
    Detector(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Detector(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Detector(m) | Failure::Io(m) => m,
        }
    }
}

fn io<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

/// Loads the config and applies the flags. Returns the raw file text too.
fn load(c: &Common) -> Result<(RunConfig, Option<String>), Failure> {
    let (mut cfg, text) = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            (config::parse(&text, &p.display().to_string()).map_err(Failure::Config)?, Some(text))
        }
        None => (RunConfig::default(), None),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = &c.out_dir {
        cfg.out_dir = Some(d.clone());
    }
    if let Some(&s) = c.snr.first() {
        cfg.sweep.snr_points = c.snr.clone();
        cfg.cycles.snr_db = s;
    }
    if let Some(&j) = c.jammer.first() {
        cfg.sweep.jammers = c.jammer.clone();
        cfg.cycles.jammer = j;
    }
    if let Some(&m) = c.modulation.first() {
        cfg.sweep.constellations = c.modulation.clone();
        cfg.cycles.constellation = m;
    }
    if !c.detector.is_empty() {
        cfg.sweep.detectors = c.detector.clone();
    }
    if let Some(t) = c.tmax {
        cfg.detector.t_max = t;
    }
    if let Some(n) = c.numeric {
        cfg.detector.numeric = n;
    }
    if let Some(f) = c.clock_mhz {
        cfg.clock_mhz = f;
    }
    if !(cfg.clock_mhz.is_finite() && cfg.clock_mhz >= 0.0) {
        return Err(Failure::Config("clock_mhz must be a non-negative number".into()));
    }
    Ok((cfg, text))
}

fn threads() -> Result<Option<usize>, Failure> {
    match std::env::var("SANDMAN_SIM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Config(format!("SANDMAN_SIM_THREADS: expected a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn plot(points: &[BerPoint]) -> String {
    let mut series: Vec<svg::Series> = Vec::new();
    for p in points {
        let label = format!("{} {} {}", p.detector, p.jammer.kind.name(), p.constellation);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((p.snr_db, p.ber)),
            None => series.push(svg::Series {
                label,
                points: vec![(p.snr_db, p.ber)],
            }),
        }
    }
    svg::ber_plot(&series)
}

fn cmd_sweep(c: &Common) -> Result<(), Failure> {
    let (cfg, text) = load(c)?;
    let spec = cfg.sweep_spec();
    spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("sandman-out"));
    fs::create_dir_all(&out).map_err(io(&out))?;

    let points = match threads()? {
        Some(n) => harness::run_sweep_threads(&spec, n),
        None => harness::run_sweep(&spec),
    }
    .map_err(|e| Failure::Config(e.to_string()))?;

    let csv = out.join("results.csv");
    fs::write(&csv, harness::to_csv(&points)).map_err(io(&csv))?;
    if let Some(t) = text {
        let p = out.join("config.toml");
        fs::write(&p, t).map_err(io(&p))?;
    }
    let p = out.join("effective.toml");
    fs::write(&p, cfg.to_toml()).map_err(io(&p))?;
    if cfg.plot {
        // best effort
        if let Err(e) = fs::write(out.join("ber.svg"), plot(&points)) {
            eprintln!("warning: ber.svg not written: {e}");
        }
    }

    for p in &points {
        println!(
            "{:>7} {:<14} {:<8} {:<6} frames {:>6} errors {:>6} ber {:.3e}",
            p.snr_db,
            p.detector.name(),
            p.jammer.kind.name(),
            p.constellation.name(),
            p.frames_run,
            p.bit_errors,
            p.ber
        );
    }
    println!("wrote {}", csv.display());

    let failed: Vec<String> = points
        .iter()
        .filter(|p| p.failed())
        .map(|p| format!("{} at {} dB: {:?}", p.detector, p.snr_db, p.status))
        .collect();
    if !failed.is_empty() {
        return Err(Failure::Detector(format!("detector failed in {} cell(s): {}", failed.len(), failed.join("; "))));
    }
    Ok(())
}

fn cmd_cycles(c: &Common) -> Result<(), Failure> {
    let (mut cfg, _) = load(c)?;
    if c.numeric == Some(NumericMode::Float) {
        return Err(Failure::Config("the PE array runs the fixed-point datapath; --numeric float is not supported here".into()));
    }
    cfg.detector.numeric = NumericMode::Fixed;
    cfg.detector.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let fc = cfg.frame.with_constellation(cfg.cycles.constellation);
    fc.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let jam = cfg.jammer(cfg.cycles.jammer);
    let seed = Seed::cell(cfg.seed, cfg.cycles.snr_db, &jam, fc.constellation, 0);
    let frame = generate_frame(&fc, &jam, cfg.cycles.snr_db, seed).map_err(|e| Failure::Config(e.to_string()))?;
    let (_, report) = run_block(&BlockInput::from_frame(&frame), &cfg.detector, &cfg.cycle_model)
        .map_err(|e| Failure::Detector(e.to_string()))?;

    let f = cfg.clock_mhz * 1e6;
    print!("{}", report.text_table(f));
    if let Some(out) = &cfg.out_dir {
        fs::create_dir_all(out).map_err(io(out))?;
        let p = out.join("cycles.csv");
        fs::write(&p, report.to_csv()).map_err(io(&p))?;
        let p = out.join("effective.toml");
        fs::write(&p, cfg.to_toml()).map_err(io(&p))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Sweep(c) => cmd_sweep(c),
        Cmd::Cycles(c) => cmd_cycles(c),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
