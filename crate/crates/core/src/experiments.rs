//! Seeded Monte Carlo convergence experiments.
//!
//! * Forward: draw states uniformly from the ball of radius `1 − ε`, iterate
//!   [`apply_ml`] and record how many steps each needs to come within `ε` of
//!   the completely mixed state.
//! * Backward: draw states from a small ball around the completely mixed
//!   state, iterate the inverse branches and record how many steps each
//!   needs to reach a purity threshold.
//!
//! Sample `i` always draws from ChaCha stream `i` of the master seed, so the
//! result does not depend on how rayon splits the work.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bloch::{apply_ml, inverse_ml, BlochVector, Branch};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Default precision for the forward experiment.
pub const DEFAULT_EPSILON: f64 = 1e-3;
/// Default starting radius for the backward experiment.
pub const DEFAULT_START_RADIUS: f64 = 1e-2;
pub const DEFAULT_PURITY_THRESHOLD: f64 = 0.99;
pub const DEFAULT_MAX_ITERATIONS: u64 = 1_000_000;
pub const DEFAULT_FORWARD_SAMPLES: u64 = 100_000;
pub const DEFAULT_BACKWARD_SAMPLES: u64 = 10_000;
/// Sample count of the full-size forward study.
pub const PAPER_SCALE_SAMPLES: u64 = 1_600_000;

/// Deterministic generator for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw from the solid ball of the given radius.
pub fn sample_ball_uniform<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> BlochVector {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    let r = radius * rng.random::<f64>().cbrt();
    BlochVector::new(r * x, r * y, r * z)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardExperimentConfig {
    pub sample_count: u64,
    /// Target radius around the completely mixed state.
    pub epsilon: f64,
    /// Radius of the sampling ball; `1 − epsilon` unless overridden.
    pub sampling_radius: f64,
    #[serde(rename = "cap")]
    pub max_iterations: u64,
    #[serde(rename = "seed")]
    pub rng_seed: u64,
}

impl ForwardExperimentConfig {
    pub fn new(sample_count: u64, epsilon: f64, rng_seed: u64) -> Self {
        ForwardExperimentConfig {
            sample_count,
            epsilon,
            sampling_radius: 1.0 - epsilon,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::InvalidConfig(
                "sample_count must be at least 1".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.sampling_radius > 0.0 && self.sampling_radius <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling radius must lie in (0, 1], got {}",
                self.sampling_radius
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for ForwardExperimentConfig {
    fn default() -> Self {
        Self::new(DEFAULT_FORWARD_SAMPLES, DEFAULT_EPSILON, 42)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    /// Fair coin per step.
    Random,
    PlusOnly,
    MinusOnly,
}

impl fmt::Display for BranchPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchPolicy::Random => "random",
            BranchPolicy::PlusOnly => "plus_only",
            BranchPolicy::MinusOnly => "minus_only",
        })
    }
}

impl BranchPolicy {
    fn choose<R: Rng + ?Sized>(self, rng: &mut R) -> Branch {
        match self {
            BranchPolicy::PlusOnly => Branch::Plus,
            BranchPolicy::MinusOnly => Branch::Minus,
            BranchPolicy::Random => {
                if rng.random::<bool>() {
                    Branch::Plus
                } else {
                    Branch::Minus
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackwardExperimentConfig {
    pub sample_count: u64,
    pub start_radius: f64,
    pub purity_threshold: f64,
    #[serde(rename = "policy")]
    pub branch_policy: BranchPolicy,
    #[serde(rename = "cap")]
    pub max_iterations: u64,
    #[serde(rename = "seed")]
    pub rng_seed: u64,
}

impl BackwardExperimentConfig {
    pub fn new(sample_count: u64, branch_policy: BranchPolicy, rng_seed: u64) -> Self {
        BackwardExperimentConfig {
            sample_count,
            start_radius: DEFAULT_START_RADIUS,
            purity_threshold: DEFAULT_PURITY_THRESHOLD,
            branch_policy,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::InvalidConfig(
                "sample_count must be at least 1".into(),
            ));
        }
        if !(self.start_radius > 0.0 && self.start_radius < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "start_radius must lie in (0, 1), got {}",
                self.start_radius
            )));
        }
        if !(self.purity_threshold > 0.5 && self.purity_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "purity_threshold must lie in (1/2, 1], got {}",
                self.purity_threshold
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for BackwardExperimentConfig {
    fn default() -> Self {
        Self::new(DEFAULT_BACKWARD_SAMPLES, BranchPolicy::Random, 42)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "experiment", rename_all = "lowercase")]
pub enum ExperimentConfig {
    Forward(ForwardExperimentConfig),
    Backward(BackwardExperimentConfig),
}

impl ExperimentConfig {
    pub fn sample_count(&self) -> u64 {
        match self {
            ExperimentConfig::Forward(c) => c.sample_count,
            ExperimentConfig::Backward(c) => c.sample_count,
        }
    }
}

/// Fate of one sampled trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleOutcome {
    pub initial: BlochVector,
    /// First-passage step count, `None` if the cap was hit.
    pub iterations: Option<u64>,
    pub terminal: BlochVector,
    /// Largest norm seen along the trajectory, initial point included.
    pub max_norm: f64,
}

fn forward_sample(config: &ForwardExperimentConfig, index: u64) -> SampleOutcome {
    let mut rng = sample_rng(config.rng_seed, index);
    let initial = sample_ball_uniform(config.sampling_radius, &mut rng);
    let target = config.epsilon * config.epsilon;
    let mut b = initial;
    let mut max_norm = b.norm();
    let mut steps = 0;
    while b.norm_sqr() > target {
        if steps == config.max_iterations {
            return SampleOutcome {
                initial,
                iterations: None,
                terminal: b,
                max_norm,
            };
        }
        b = apply_ml(&b);
        max_norm = max_norm.max(b.norm());
        steps += 1;
    }
    SampleOutcome {
        initial,
        iterations: Some(steps),
        terminal: b,
        max_norm,
    }
}

fn backward_sample(config: &BackwardExperimentConfig, index: u64) -> SampleOutcome {
    let mut rng = sample_rng(config.rng_seed, index);
    let initial = sample_ball_uniform(config.start_radius, &mut rng);
    let mut b = initial;
    let mut max_norm = b.norm();
    let mut steps = 0;
    while b.purity() < config.purity_threshold {
        if steps == config.max_iterations {
            return SampleOutcome {
                initial,
                iterations: None,
                terminal: b,
                max_norm,
            };
        }
        b = inverse_ml(&b, config.branch_policy.choose(&mut rng));
        max_norm = max_norm.max(b.norm());
        steps += 1;
    }
    SampleOutcome {
        initial,
        iterations: Some(steps),
        terminal: b,
        max_norm,
    }
}

/// Per-sample forward outcomes, in sample order.
pub fn forward_outcomes(config: &ForwardExperimentConfig) -> Result<Vec<SampleOutcome>> {
    config.validate()?;
    Ok((0..config.sample_count)
        .into_par_iter()
        .map(|i| forward_sample(config, i))
        .collect())
}

/// Per-sample backward outcomes, in sample order.
pub fn backward_outcomes(config: &BackwardExperimentConfig) -> Result<Vec<SampleOutcome>> {
    config.validate()?;
    Ok((0..config.sample_count)
        .into_par_iter()
        .map(|i| backward_sample(config, i))
        .collect())
}

/// First-passage counts of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceHistogram {
    pub counts: BTreeMap<u64, u64>,
    pub non_converged: u64,
    pub config: ExperimentConfig,
    /// Wall-clock time; not part of any written output.
    #[serde(skip)]
    pub runtime: Duration,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Tally {
    counts: BTreeMap<u64, u64>,
    non_converged: u64,
}

impl Tally {
    fn record(mut self, iterations: Option<u64>) -> Self {
        match iterations {
            Some(n) => *self.counts.entry(n).or_default() += 1,
            None => self.non_converged += 1,
        }
        self
    }

    fn merge(mut self, other: Tally) -> Self {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
        self.non_converged += other.non_converged;
        self
    }
}

fn tally<F>(sample_count: u64, sample: F) -> Tally
where
    F: Fn(u64) -> Option<u64> + Sync,
{
    (0..sample_count)
        .into_par_iter()
        .fold(Tally::default, |t, i| t.record(sample(i)))
        .reduce(Tally::default, Tally::merge)
}

pub fn run_forward(config: &ForwardExperimentConfig) -> Result<ConvergenceHistogram> {
    config.validate()?;
    let start = Instant::now();
    let t = tally(config.sample_count, |i| {
        forward_sample(config, i).iterations
    });
    Ok(ConvergenceHistogram {
        counts: t.counts,
        non_converged: t.non_converged,
        config: ExperimentConfig::Forward(config.clone()),
        runtime: start.elapsed(),
    })
}

pub fn run_backward(config: &BackwardExperimentConfig) -> Result<ConvergenceHistogram> {
    config.validate()?;
    let start = Instant::now();
    let t = tally(config.sample_count, |i| {
        backward_sample(config, i).iterations
    });
    Ok(ConvergenceHistogram {
        counts: t.counts,
        non_converged: t.non_converged,
        config: ExperimentConfig::Backward(config.clone()),
        runtime: start.elapsed(),
    })
}

/// Runs `f` on a dedicated rayon pool with `workers` threads.
pub fn with_workers<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

impl ConvergenceHistogram {
    pub fn converged(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn total(&self) -> u64 {
        self.converged() + self.non_converged
    }

    pub fn max_iterations(&self) -> Option<u64> {
        self.counts.keys().next_back().copied()
    }

    /// Lower median of the converged first-passage counts.
    pub fn median(&self) -> Option<u64> {
        let n = self.converged();
        if n == 0 {
            return None;
        }
        let rank = (n - 1) / 2;
        let mut seen = 0;
        for (&k, &c) in &self.counts {
            seen += c;
            if seen > rank {
                return Some(k);
            }
        }
        None
    }

    /// Fraction of samples that hit the iteration cap.
    pub fn non_converged_fraction(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.non_converged as f64 / n as f64,
        }
    }
}

/// Sentinel iteration value of the summary row counting capped samples.
pub const NON_CONVERGED_SENTINEL: i64 = -1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramRow {
    pub iterations: i64,
    pub count: u64,
}

/// The flat record form of a histogram, shared by the CSV and JSON writers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramTable {
    pub metadata: Map<String, Value>,
    pub rows: Vec<HistogramRow>,
}

/// Sorted `(iterations, count)` rows with a metadata header echoing the
/// configuration. Capped samples appear in a final row with iteration value
/// [`NON_CONVERGED_SENTINEL`]; a histogram with no samples has no rows.
pub fn histogram_to_table(h: &ConvergenceHistogram) -> HistogramTable {
    let mut metadata = Map::new();
    metadata.insert("schema_version".into(), SCHEMA_VERSION.into());
    if let Value::Object(config) = serde_json::to_value(&h.config).expect("config serializes") {
        metadata.extend(config);
    }
    let mut rows: Vec<_> = h
        .counts
        .iter()
        .map(|(&k, &count)| HistogramRow {
            iterations: k as i64,
            count,
        })
        .collect();
    if h.total() > 0 {
        rows.push(HistogramRow {
            iterations: NON_CONVERGED_SENTINEL,
            count: h.non_converged,
        });
    }
    HistogramTable { metadata, rows }
}

fn metadata_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl HistogramTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={}", metadata_value(v))?;
        }
        writeln!(out, "iterations,count")?;
        for row in &self.rows {
            writeln!(out, "{},{}", row.iterations, row.count)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn render(self, table: &HistogramTable) -> String {
        match self {
            OutputFormat::Csv => table.to_csv(),
            OutputFormat::Json => table.to_json(),
        }
    }
}

pub fn write_histogram(h: &ConvergenceHistogram, path: &Path, format: OutputFormat) -> Result<()> {
    let text = format.render(&histogram_to_table(h));
    std::fs::write(path, text)?;
    Ok(())
}
