//! The `lattes` command line.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::bloch::{find_mixed_cycles, iterate_ml, BlochVector};
use crate::error::{Error, Result};
use crate::experiments::{
    self, histogram_to_table, with_workers, BackwardExperimentConfig, BranchPolicy,
    ConvergenceHistogram, ForwardExperimentConfig, OutputFormat,
};
use crate::oracle::oracle_sweep;
use crate::riemann::{find_pure_cycles, iterate_fl, ExtendedComplex};

#[derive(Debug, Parser)]
#[command(
    name = "lattes",
    version,
    about = "Lattès-map qubit protocol: orbits, fixed cycles, oracle checks and convergence experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print an orbit of f_L (pure state) or M_L (Bloch vector).
    Iterate(IterateArgs),
    /// Print the fixed cycles of period at most 2.
    Cycles(CyclesArgs),
    /// Compare the two-qubit simulation with the closed-form maps.
    OracleCheck(OracleArgs),
    /// Forward iteration towards the completely mixed state.
    Forward(ForwardArgs),
    /// Backward iteration towards the pure states.
    Backward(BackwardArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("start").required(true).args(["z", "bloch"]))]
pub struct IterateArgs {
    /// Pure-state label as `re,im`, a real number, or `inf`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_z)]
    pub z: Option<ExtendedComplex>,
    /// Bloch vector as `u,v,w`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_bloch)]
    pub bloch: Option<BlochVector>,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Space {
    Pure,
    Bloch,
}

#[derive(Debug, Args)]
pub struct CyclesArgs {
    #[arg(long, default_value_t = 2)]
    pub max_period: usize,
    #[arg(long, value_enum, default_value_t = Space::Pure)]
    pub space: Space,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads; all cores when omitted. Does not affect the output.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Largest tolerated fraction of samples hitting the iteration cap.
    #[arg(long, default_value_t = 0.0)]
    pub max_non_converged_fraction: f64,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[arg(long, default_value_t = experiments::DEFAULT_FORWARD_SAMPLES)]
    pub samples: u64,
    /// Run the full 1.6 million sample study (overrides --samples).
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long, default_value_t = experiments::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Sampling radius; `1 - epsilon` when omitted.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = experiments::DEFAULT_MAX_ITERATIONS)]
    pub cap: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Policy {
    Random,
    #[value(alias = "plus-only")]
    PlusOnly,
    #[value(alias = "minus-only")]
    MinusOnly,
}

impl From<Policy> for BranchPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Random => BranchPolicy::Random,
            Policy::PlusOnly => BranchPolicy::PlusOnly,
            Policy::MinusOnly => BranchPolicy::MinusOnly,
        }
    }
}

#[derive(Debug, Args)]
pub struct BackwardArgs {
    #[arg(long, default_value_t = experiments::DEFAULT_BACKWARD_SAMPLES)]
    pub samples: u64,
    /// Radius of the starting ball around the completely mixed state.
    #[arg(long, default_value_t = experiments::DEFAULT_START_RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = experiments::DEFAULT_PURITY_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = Policy::Random)]
    pub policy: Policy,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = experiments::DEFAULT_MAX_ITERATIONS)]
    pub cap: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_error(input: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        input: input.to_string(),
        reason: reason.into(),
    }
}

fn parse_numbers(input: &str, expected: usize) -> Result<Vec<f64>> {
    let parts: Vec<_> = input.split(',').map(str::trim).collect();
    if parts.len() != expected {
        return Err(parse_error(
            input,
            format!("expected {expected} comma-separated numbers"),
        ));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_error(input, format!("`{p}` is not a finite number")))
        })
        .collect()
}

/// Parses `re,im`, a bare real number, or `inf`.
pub fn parse_z(input: &str) -> Result<ExtendedComplex> {
    let s = input.trim();
    if s.eq_ignore_ascii_case("inf") {
        return Ok(ExtendedComplex::Infinity);
    }
    let n = if s.contains(',') { 2 } else { 1 };
    let xs = parse_numbers(s, n)?;
    Ok(ExtendedComplex::Finite(Complex64::new(
        xs[0],
        *xs.get(1).unwrap_or(&0.0),
    )))
}

/// Parses `u,v,w` and checks that the point lies in the Bloch ball.
pub fn parse_bloch(input: &str) -> Result<BlochVector> {
    let xs = parse_numbers(input, 3)?;
    BlochVector::new(xs[0], xs[1], xs[2]).validated()
}

/// Bloch coordinates of the fixed cycles as published, to three decimals.
const PUBLISHED_BLOCH_CYCLES: [(&str, &[[f64; 3]]); 5] = [
    ("C0", &[[0.0, 0.0, 0.0]]),
    ("C1", &[[1.0, 0.0, 0.0]]),
    ("C2", &[[-0.382, 0.786, 0.486]]),
    ("C3", &[[-0.382, -0.786, -0.486]]),
    ("C4", &[[-0.382, -0.786, 0.486], [-0.382, 0.786, -0.486]]),
];

/// Closed forms of the pure cycles as published.
const PUBLISHED_PURE_CYCLES: [(&str, &str); 4] = [
    ("c1", "1"),
    ("c2", "sqrt((i-2)/2) - (i+1)/2"),
    ("c3", "-sqrt((i-2)/2) - (i+1)/2"),
    (
        "c4",
        "sqrt((-i-2)/2) + (i-1)/2 <-> -sqrt((-i-2)/2) + (i-1)/2",
    ),
];

/// Largest coordinate gap between each computed Bloch cycle and its
/// published three-decimal value.
pub fn published_bloch_deviations(max_period: usize) -> Result<Vec<(&'static str, f64)>> {
    let cycles = find_mixed_cycles(max_period)?;
    Ok(cycles
        .iter()
        .map(|c| {
            let published = PUBLISHED_BLOCH_CYCLES
                .iter()
                .find(|(label, _)| *label == c.label)
                .map(|(_, pts)| *pts)
                .expect("every cycle has a published value");
            let gap = c
                .points
                .iter()
                .zip(published)
                .flat_map(|(p, q)| p.as_array().into_iter().zip(*q).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            (c.label, gap)
        })
        .collect())
}

fn cmd_iterate(args: &IterateArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(z) = args.z {
        writeln!(out, "step\tz")?;
        for (k, p) in iterate_fl(z, args.steps).iter().enumerate() {
            writeln!(out, "{k}\t{p}")?;
        }
    } else if let Some(b) = args.bloch {
        writeln!(out, "step\tu\tv\tw\tpurity")?;
        for (k, p) in iterate_ml(b, args.steps).iter().enumerate() {
            writeln!(out, "{k}\t{}\t{}\t{}\t{}", p.u, p.v, p.w, p.purity())?;
        }
    }
    Ok(())
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(" <-> ")
}

fn cmd_cycles(args: &CyclesArgs, out: &mut dyn Write) -> Result<()> {
    match args.space {
        Space::Pure => {
            writeln!(
                out,
                "label\tperiod\tpoints\tresidual\tmultiplier\t|multiplier|\tstability\tclosed_form"
            )?;
            for c in find_pure_cycles(args.max_period)? {
                let form = PUBLISHED_PURE_CYCLES
                    .iter()
                    .find(|(l, _)| *l == c.label)
                    .map_or("", |(_, f)| f);
                writeln!(
                    out,
                    "{}\t{}\t{}\t{:.3e}\t{:.6}{:+.6}i\t{:.6}\t{}\t{}",
                    c.label,
                    c.period,
                    join(&c.points, |p| format!("{p:.12}")),
                    c.residual,
                    c.multiplier.re,
                    c.multiplier.im,
                    c.multiplier.norm(),
                    c.stability,
                    form,
                )?;
            }
        }
        Space::Bloch => {
            let gaps = published_bloch_deviations(args.max_period)?;
            writeln!(
                out,
                "label\tperiod\tpoints\tpurity\tresidual\tpublished_gap"
            )?;
            for (c, (_, gap)) in find_mixed_cycles(args.max_period)?.iter().zip(gaps) {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{:.3e}\t{:.3e}",
                    c.label,
                    c.period,
                    join(&c.points, |p| format!("{p:.6}")),
                    join(&c.points, |p| format!("{:.6}", p.purity())),
                    c.residual,
                    gap,
                )?;
            }
        }
    }
    Ok(())
}

/// Result of a subcommand that ran to completion.
#[derive(Debug, PartialEq)]
pub enum Outcome {
    Success,
    /// The command ran but a check failed; carries the diagnostic line.
    CheckFailed(String),
}

fn cmd_oracle_check(args: &OracleArgs, out: &mut dyn Write) -> Result<Outcome> {
    if args.samples == 0 {
        return Err(Error::InvalidConfig("samples must be at least 1".into()));
    }
    let report = oracle_sweep(args.samples, args.seed)?;
    writeln!(out, "samples\t{}", report.samples)?;
    for (name, dev) in [
        ("pure f_0 (chordal)", report.pure_f0),
        ("pure f_L (chordal)", report.pure_fl),
        ("mixed S (entrywise)", report.mixed_s),
        ("mixed M_L (Bloch)", report.mixed_ml),
        ("success probability", report.success_gap),
    ] {
        let verdict = if dev < args.tolerance { "pass" } else { "FAIL" };
        writeln!(out, "{name}\t{dev:.3e}\t{verdict}")?;
    }
    let worst = report.max_deviation();
    if worst < args.tolerance {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::CheckFailed(format!(
            "oracle deviation {worst:e} exceeds tolerance {:e}",
            args.tolerance
        )))
    }
}

fn run_experiment<F>(output: &OutputArgs, run: F, out: &mut dyn Write) -> Result<Outcome>
where
    F: FnOnce() -> Result<ConvergenceHistogram> + Send,
{
    if !(0.0..=1.0).contains(&output.max_non_converged_fraction) {
        return Err(Error::InvalidConfig(
            "max-non-converged-fraction must lie in [0, 1]".into(),
        ));
    }
    if let Some(dir) = output.out.as_ref().and_then(|p| p.parent()) {
        if !dir.as_os_str().is_empty() && !dir.is_dir() {
            return Err(Error::InvalidConfig(format!(
                "output directory {} does not exist",
                dir.display()
            )));
        }
    }
    let h = match output.workers {
        Some(0) => return Err(Error::InvalidConfig("workers must be at least 1".into())),
        Some(n) => with_workers(n, run)??,
        None => run()?,
    };
    let text = OutputFormat::from(output.format).render(&histogram_to_table(&h));
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    let fraction = h.non_converged_fraction();
    if fraction > output.max_non_converged_fraction {
        Ok(Outcome::CheckFailed(format!(
            "{} of {} samples hit the iteration cap (fraction {fraction:e} > {:e})",
            h.non_converged,
            h.total(),
            output.max_non_converged_fraction
        )))
    } else {
        Ok(Outcome::Success)
    }
}

fn cmd_forward(args: &ForwardArgs, out: &mut dyn Write) -> Result<Outcome> {
    let samples = if args.paper_scale {
        experiments::PAPER_SCALE_SAMPLES
    } else {
        args.samples
    };
    let mut config = ForwardExperimentConfig::new(samples, args.epsilon, args.seed);
    config.max_iterations = args.cap;
    if let Some(r) = args.radius {
        config.sampling_radius = r;
    }
    config.validate()?;
    run_experiment(&args.output, || experiments::run_forward(&config), out)
}

fn cmd_backward(args: &BackwardArgs, out: &mut dyn Write) -> Result<Outcome> {
    let config = BackwardExperimentConfig {
        sample_count: args.samples,
        start_radius: args.radius,
        purity_threshold: args.threshold,
        branch_policy: args.policy.into(),
        max_iterations: args.cap,
        rng_seed: args.seed,
    };
    config.validate()?;
    run_experiment(&args.output, || experiments::run_backward(&config), out)
}

/// Executes a parsed command, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    match &cli.command {
        Command::Iterate(a) => cmd_iterate(a, out).map(|_| Outcome::Success),
        Command::Cycles(a) => cmd_cycles(a, out).map(|_| Outcome::Success),
        Command::OracleCheck(a) => cmd_oracle_check(a, out),
        Command::Forward(a) => cmd_forward(a, out),
        Command::Backward(a) => cmd_backward(a, out),
    }
}
