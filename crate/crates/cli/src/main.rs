//! `phasenoise`: FBM phase-noise analysis for oscillator-based TRNGs.
//!
//! Units are SI throughout: seconds, hertz, radians. Scalar reports are JSON
//! on stdout, curves and traces are CSV.

mod lags;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use phasenoise::allan::{self, FitWeighting};
use phasenoise::entropy::{self, DtBounds};
use phasenoise::fbm::{self, HurstExponent, NoiseMixture, OscillatorConfig, TimeGrid};
use phasenoise::leakage;
use phasenoise::spectrum;
use phasenoise::trace::{self, ReadOptions, TraceFormat};
use phasenoise::{Error, Tolerance};

#[derive(Parser)]
#[command(
    name = "phasenoise",
    version,
    about = "Closed-form phase-noise analysis for oscillator TRNGs"
)]
#[command(
    after_help = "Series tolerances can be overridden with PHASENOISE_ABS_TOL, \
PHASENOISE_REL_TOL and PHASENOISE_MAX_TERMS."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate FBM phase paths, written as CSV (one column per path)
    Simulate(SimulateArgs),
    /// Covariance and correlation of phi^H, or a correlation curve
    Covariance(CovarianceArgs),
    /// Wigner-Ville spectrum of phi^H over a frequency range (CSV)
    Spectrum(SpectrumArgs),
    /// Phase variance left after observing the full history up to a gap
    Leakage(LeakageArgs),
    /// Security report for one sampling interval (JSON), optional curves
    Entropy(EntropyArgs),
    /// Second-difference variance curve of a phase trace (CSV)
    Avar(AvarArgs),
    /// Fit white and flicker coefficients to a phase trace (JSON)
    Calibrate(CalibrateArgs),
    /// Min-entropy against sampling interval (CSV), or the smallest interval for a target
    Bandwidth(BandwidthArgs),
}

#[derive(Args)]
struct MixtureArgs {
    /// Hurst exponent of a single component, in (0, 1.5)
    #[arg(long, conflicts_with_all = ["c_white", "c_flicker"])]
    hurst: Option<f64>,
    /// Amplitude of the single component (rad s^-H)
    #[arg(long, default_value_t = 1.0, requires = "hurst")]
    coeff: f64,
    /// White frequency noise amplitude c_1/2 (rad s^-1/2)
    #[arg(long)]
    c_white: Option<f64>,
    /// Flicker frequency noise amplitude c_1 (rad s^-1)
    #[arg(long)]
    c_flicker: Option<f64>,
}

impl MixtureArgs {
    fn mixture(&self) -> Result<NoiseMixture, Error> {
        if let Some(h) = self.hurst {
            return NoiseMixture::single(HurstExponent::new(h)?, self.coeff);
        }
        match (self.c_white, self.c_flicker) {
            (None, None) => Err(Error::Domain(
                "give --hurst, or --c-white and/or --c-flicker".into(),
            )),
            (w, f) => NoiseMixture::white_flicker(w.unwrap_or(0.0), f.unwrap_or(0.0)),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    mix: MixtureArgs,
    /// First sample time (s); with --dt the grid starts at dt instead
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    /// Last sample time (s)
    #[arg(long, default_value_t = 2.0)]
    t1: f64,
    /// Number of sample times
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of independent paths
    #[arg(long, default_value_t = 1)]
    paths: usize,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Long-trace mode: uniform grid dt, 2 dt, ..., n dt (s) from the hybrid
    /// convolution generator instead of exact Cholesky sampling on [t0, t1]
    #[arg(long)]
    dt: Option<f64>,
    /// Output CSV file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CovarianceArgs {
    /// Hurst exponent, in (0, 1.5)
    #[arg(long)]
    hurst: f64,
    /// Earlier time s (s)
    #[arg(long, required_unless_present = "curve")]
    s: Option<f64>,
    /// Later time t (s)
    #[arg(long, required_unless_present = "curve")]
    t: Option<f64>,
    /// Emit correlation against the time ratio t/s as CSV instead
    #[arg(long)]
    curve: bool,
    /// Largest ratio t/s on the curve
    #[arg(long, default_value_t = 100.0)]
    ratio_max: f64,
    /// Curve points, log-spaced
    #[arg(long, default_value_t = 200)]
    points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectrumKind {
    /// S(t, omega)
    Instantaneous,
    /// (1/T) int_0^T S(s, omega) ds
    TimeAveraged,
    /// Long-time spectrum of fractional frequency, needs --f0 and --dt
    FractionalFrequency,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Hurst exponent, in (0, 1.5)
    #[arg(long)]
    hurst: f64,
    #[arg(long, value_enum, default_value = "time-averaged")]
    kind: SpectrumKind,
    /// Time t, or averaging horizon T (s)
    #[arg(long, default_value_t = 1.0)]
    time: f64,
    /// Lowest angular frequency (rad/s)
    #[arg(long, default_value_t = 0.1)]
    omega_min: f64,
    /// Highest angular frequency (rad/s)
    #[arg(long, default_value_t = 1e4)]
    omega_max: f64,
    /// Points, log-spaced
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Oscillator frequency (Hz), fractional-frequency kind only
    #[arg(long)]
    f0: Option<f64>,
    /// Counter gate time (s), fractional-frequency kind only
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct LeakageArgs {
    #[command(flatten)]
    mix: MixtureArgs,
    /// Gap between the last observation and the target time (s)
    #[arg(long)]
    gap: f64,
}

#[derive(Args)]
struct EntropyArgs {
    #[command(flatten)]
    mix: MixtureArgs,
    /// Sampling interval between bits (s)
    #[arg(long)]
    dt: f64,
    /// Duty cycle of the sampled square wave, in (0, 1)
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Also solve for the smallest interval reaching this min-entropy (bits)
    #[arg(long)]
    target: Option<f64>,
    /// Write bias and min-entropy against phase variance to this CSV
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Smallest phase variance on the curves (rad^2)
    #[arg(long, default_value_t = 1e-2)]
    sigma2_min: f64,
    /// Largest phase variance on the curves (rad^2)
    #[arg(long, default_value_t = 20.0)]
    sigma2_max: f64,
    /// Curve points, log-spaced
    #[arg(long, default_value_t = 100)]
    points: usize,
}

#[derive(Args)]
struct TraceArgs {
    /// Trace file
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Sampling interval (s); required for raw traces, fills a missing CSV header
    #[arg(long)]
    dt: Option<f64>,
    /// Oscillator frequency (Hz); fills a missing CSV header
    #[arg(long)]
    f0: Option<f64>,
    /// CSV column with the phase (0-based)
    #[arg(long, default_value_t = 0)]
    column: usize,
    /// Lags in samples: `a:b`, `a:b:step`, or a comma list
    #[arg(long, default_value = "1:100")]
    lags: String,
}

impl TraceArgs {
    fn load(&self) -> Result<trace::PhaseTrace, Error> {
        let opts = ReadOptions {
            dt: self.dt,
            f0: self.f0,
            column: self.column,
        };
        trace::read_trace(&self.input, self.format.into(), &opts)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    RawF64Le,
}

impl From<FormatArg> for TraceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => TraceFormat::Csv,
            FormatArg::RawF64Le => TraceFormat::RawF64Le,
        }
    }
}

#[derive(Args)]
struct AvarArgs {
    #[command(flatten)]
    trace: TraceArgs,
    /// Output CSV file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    trace: TraceArgs,
    /// Point weights for the least-squares fit
    #[arg(long, value_enum, default_value = "inverse-variance")]
    weighting: WeightingArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    /// count / (lag * var^2), refined once on the fitted model
    InverseVariance,
    /// Difference counts only
    Counts,
}

#[derive(Args)]
struct BandwidthArgs {
    #[command(flatten)]
    mix: MixtureArgs,
    /// Duty cycle, in (0, 1)
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Smallest sampling interval (s)
    #[arg(long, default_value_t = 1e-9)]
    dt_min: f64,
    /// Largest sampling interval (s)
    #[arg(long, default_value_t = 1e-3)]
    dt_max: f64,
    /// Curve points, log-spaced
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Report the smallest interval reaching this min-entropy (bits) as JSON
    #[arg(long)]
    target: Option<f64>,
}

fn logspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, Error> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(Error::Domain(format!(
            "need 0 < min < max and at least 2 points, got {lo}..{hi} with {n}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

fn sink(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(value: &impl Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Domain(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<(), Error> {
    let mix = a.mix.mixture()?;
    if a.paths == 0 {
        return Err(Error::Domain("--paths must be positive".into()));
    }
    let mut out = sink(&a.out)?;
    let (dt, t0, columns): (f64, f64, Vec<Vec<f64>>) = match a.dt {
        Some(dt) => {
            let cols = (0..a.paths as u64)
                .map(|p| fbm::simulate_uniform(&mix, a.n, dt, a.seed.wrapping_add(p)))
                .collect::<Result<_, _>>()?;
            (dt, dt, cols)
        }
        None => {
            if a.n < 2 {
                return Err(Error::Domain("--n must be at least 2".into()));
            }
            let grid = TimeGrid::linspace(a.t0, a.t1, a.n)?;
            let sim = fbm::simulate(&mix, &grid, a.paths, a.seed)?;
            let cols = sim
                .values
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect();
            ((a.t1 - a.t0) / (a.n - 1) as f64, a.t0, cols)
        }
    };
    writeln!(out, "# dt={dt:e} t0={t0:e} seed={}", a.seed)?;
    let names: Vec<String> = (0..columns.len()).map(|p| format!("path{p}")).collect();
    writeln!(out, "{}", names.join(","))?;
    for i in 0..columns[0].len() {
        let row: Vec<String> = columns.iter().map(|c| format!("{:e}", c[i])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CovarianceReport {
    hurst: f64,
    s: f64,
    t: f64,
    covariance: f64,
    correlation: f64,
    variance_s: f64,
    variance_t: f64,
}

fn covariance(a: &CovarianceArgs) -> Result<(), Error> {
    let h = HurstExponent::new(a.hurst)?;
    let tol = Tolerance::from_env()?;
    if a.curve {
        let mut out = sink(&None)?;
        writeln!(out, "ratio,correlation")?;
        for r in logspace(1.0, a.ratio_max, a.points)? {
            writeln!(out, "{r:e},{:e}", fbm::correlation(h, 1.0, r)?)?;
        }
        out.flush()?;
        return Ok(());
    }
    let (s, t) = (a.s.unwrap_or_default(), a.t.unwrap_or_default());
    let variance_s = fbm::covariance_with(h, s, s, &tol)?;
    let variance_t = fbm::covariance_with(h, t, t, &tol)?;
    print_json(&CovarianceReport {
        hurst: a.hurst,
        s,
        t,
        covariance: fbm::covariance_with(h, s, t, &tol)?,
        correlation: fbm::correlation(h, s, t)?,
        variance_s,
        variance_t,
    })
}

fn spectrum_cmd(a: &SpectrumArgs) -> Result<(), Error> {
    let h = HurstExponent::new(a.hurst)?;
    let mut out = sink(&None)?;
    match a.kind {
        SpectrumKind::FractionalFrequency => {
            let f0 =
                a.f0.ok_or_else(|| Error::Domain("--f0 is required".into()))?;
            let dt =
                a.dt.ok_or_else(|| Error::Domain("--dt is required".into()))?;
            writeln!(out, "omega,value")?;
            for w in logspace(a.omega_min, a.omega_max, a.points)? {
                writeln!(
                    out,
                    "{w:e},{:e}",
                    spectrum::fractional_frequency(h, f0, dt, w)?
                )?;
            }
        }
        kind => {
            writeln!(out, "omega,value,branch")?;
            for w in logspace(a.omega_min, a.omega_max, a.points)? {
                let p = match kind {
                    SpectrumKind::Instantaneous => spectrum::instantaneous(h, a.time, w)?,
                    _ => spectrum::time_averaged(h, a.time, w)?,
                };
                writeln!(out, "{:e},{:e},{}", p.omega, p.value, p.branch.as_str())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LeakageReport {
    gap_s: f64,
    variance: f64,
    per_component: Vec<(f64, f64)>,
}

fn leakage_cmd(a: &LeakageArgs) -> Result<(), Error> {
    let mix = a.mix.mixture()?;
    print_json(&LeakageReport {
        gap_s: a.gap,
        variance: leakage::conditional_variance(&mix, a.gap)?,
        per_component: leakage::conditional_breakdown(&mix, a.gap)?,
    })
}

#[derive(Serialize)]
struct EntropyOutput {
    #[serde(flatten)]
    report: entropy::SecurityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_dt: Option<f64>,
}

fn entropy_cmd(a: &EntropyArgs) -> Result<(), Error> {
    let mix = a.mix.mixture()?;
    // only the sampling interval and duty cycle enter the report
    let osc = OscillatorConfig::new(1.0, a.alpha, 0.0, a.dt)?;
    let report = entropy::bandwidth_report(&mix, &osc)?;
    let min_dt = a
        .target
        .map(|t| entropy::solve_min_dt(&mix, a.alpha, t))
        .transpose()?;
    if let Some(path) = &a.curves {
        let mut out = sink(&Some(path.clone()))?;
        writeln!(out, "sigma2,bias,min_entropy")?;
        for s2 in logspace(a.sigma2_min, a.sigma2_max, a.points)? {
            let b = entropy::bias(s2, a.alpha)?;
            writeln!(out, "{s2:e},{b:e},{:e}", entropy::entropy_of_bias(b))?;
        }
        out.flush()?;
    }
    print_json(&EntropyOutput {
        report,
        target_bits: a.target,
        min_dt,
    })
}

fn avar_cmd(a: &AvarArgs) -> Result<(), Error> {
    let tr = a.trace.load()?;
    let curve = allan::estimate(&tr, &lags::parse(&a.trace.lags)?)?;
    let normalized = tr.f0.map(|f0| curve.normalized(f0));
    let mut out = sink(&a.out)?;
    writeln!(out, "lag_s,var,var_normalized,count")?;
    for i in 0..curve.len() {
        let norm = normalized
            .as_ref()
            .map(|n| format!("{:e}", n[i]))
            .unwrap_or_default();
        writeln!(
            out,
            "{:e},{:e},{norm},{}",
            curve.lags[i], curve.variances[i], curve.counts[i]
        )?;
    }
    out.flush()?;
    Ok(())
}

fn calibrate_cmd(a: &CalibrateArgs) -> Result<(), Error> {
    let tr = a.trace.load()?;
    let curve = allan::estimate(&tr, &lags::parse(&a.trace.lags)?)?;
    let weighting = match a.weighting {
        WeightingArg::InverseVariance => FitWeighting::InverseVariance,
        WeightingArg::Counts => FitWeighting::Counts,
    };
    print_json(&allan::fit_mixture_with(&curve, weighting)?)
}

#[derive(Serialize)]
struct BandwidthSolution {
    target_bits: f64,
    min_dt: f64,
    report: entropy::SecurityReport,
}

fn bandwidth_cmd(a: &BandwidthArgs) -> Result<(), Error> {
    let mix = a.mix.mixture()?;
    if let Some(target) = a.target {
        let bounds = DtBounds {
            min: a.dt_min,
            max: a.dt_max,
        };
        let dt = entropy::solve_min_dt_in(&mix, a.alpha, target, bounds)?;
        let report =
            entropy::bandwidth_report(&mix, &OscillatorConfig::new(1.0, a.alpha, 0.0, dt)?)?;
        return print_json(&BandwidthSolution {
            target_bits: target,
            min_dt: dt,
            report,
        });
    }
    let mut out = sink(&None)?;
    writeln!(out, "dt,sigma2,bias,min_entropy")?;
    for dt in logspace(a.dt_min, a.dt_max, a.points)? {
        let r = entropy::bandwidth_report(&mix, &OscillatorConfig::new(1.0, a.alpha, 0.0, dt)?)?;
        writeln!(
            out,
            "{dt:e},{:e},{:e},{:e}",
            r.sigma2, r.bias, r.min_entropy_bits
        )?;
    }
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Covariance(a) => covariance(a),
        Command::Spectrum(a) => spectrum_cmd(a),
        Command::Leakage(a) => leakage_cmd(a),
        Command::Entropy(a) => entropy_cmd(a),
        Command::Avar(a) => avar_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Bandwidth(a) => bandwidth_cmd(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
