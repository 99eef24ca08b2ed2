//! Seeded Monte Carlo: sampling cross-checks of the closed forms and the
//! buffer-pool reversal simulation.
//!
//! Everything here is deterministic in `(seed, stream_id)`: work is split
//! into fixed units (trials, or fixed-size sample chunks), each unit draws
//! from its own counter-derived substream (see [`rng`]), and aggregation is
//! pairwise over the units in index order. Thread count changes neither the
//! draws nor the aggregation tree, so outputs are bit-identical under any
//! parallelism, including none.

mod rng;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{BiodiversityLevel, InsuranceContract, ScenarioSpec};
use crate::valuation;
use crate::{Error, Result};

pub use rng::Substreams;

/// Samples per work unit in parallel batches. Fixed so that the unit
/// boundaries, and therefore the draws, depend only on the sample count.
const CHUNK: u64 = 8192;

/// Size, seed, and stream coordinates of a sampling run.
///
/// `stream_id` separates independent uses of the same seed (for example
/// replications of an experiment); the per-unit counter is managed
/// internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    /// Number of draws (or trials for the buffer pool). Must be >= 1.
    pub n_samples: u64,
    /// Master seed of the run.
    pub seed: u64,
    /// Substream family under the seed.
    pub stream_id: u64,
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be >= 1"));
        }
        Ok(())
    }

    fn substreams(&self) -> Substreams {
        Substreams::new(self.seed, self.stream_id)
    }
}

/// Summary statistics of a service sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    /// Sample mean.
    pub mean: f64,
    /// Sample standard deviation (0 for a single draw).
    pub sd: f64,
    /// Smallest draw.
    pub min: f64,
    /// Largest draw.
    pub max: f64,
}

/// Monte Carlo estimate of a certainty equivalent with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeEstimate {
    /// Estimated certainty equivalent.
    pub ce_hat: f64,
    /// Delta-method standard error of `ce_hat`.
    pub stderr: f64,
}

/// Draws `n_samples` from the service distribution at `v` and summarizes
/// them.
pub fn sample_service(
    scenario: &ScenarioSpec,
    v: BiodiversityLevel,
    cfg: &SamplerConfig,
) -> Result<SampleStats> {
    cfg.validate()?;
    scenario.check_bounds(v)?;
    let m = scenario.service.moments(v);
    let normal = Normal::new(m.mu, m.sigma)
        .map_err(|_| Error::NonFinite {
            context: "service distribution parameters".to_string(),
        })?;
    let subs = cfg.substreams();
    let chunks: Vec<Welford> = chunk_lengths(cfg.n_samples)
        .into_par_iter()
        .enumerate()
        .map(|(index, len)| {
            let mut rng = subs.stream(index as u64);
            let mut acc = Welford::new();
            for _ in 0..len {
                acc.push(normal.sample(&mut rng));
            }
            acc
        })
        .collect();
    let total = pairwise(&chunks, Welford::merge);
    Ok(SampleStats {
        mean: total.mean,
        sd: total.sd(),
        min: total.min,
        max: total.max,
    })
}

/// Monte Carlo certainty equivalent of net income at `v` under an optional
/// contract: `u^-1(mean of u(y))` for CARA utility.
///
/// The utility average is evaluated in log space (a streaming log-sum-exp),
/// so large `rho * y` magnitudes cannot overflow `exp`. The standard error
/// comes from the delta method applied to the utility mean; for `rho = 0`
/// the estimator degrades to the sample mean of income and its standard
/// error.
pub fn mc_certainty_equivalent(
    scenario: &ScenarioSpec,
    v: BiodiversityLevel,
    contract: Option<&InsuranceContract>,
    cfg: &SamplerConfig,
) -> Result<CeEstimate> {
    cfg.validate()?;
    let income = valuation::net_income_distribution(scenario, v, contract)?;
    let rho = scenario.preference.rho;
    let subs = cfg.substreams();
    let n = cfg.n_samples as f64;

    if rho == 0.0 {
        let chunks: Vec<Welford> = chunk_lengths(cfg.n_samples)
            .into_par_iter()
            .enumerate()
            .map(|(index, len)| {
                let mut rng = subs.stream(index as u64);
                let mut acc = Welford::new();
                for _ in 0..len {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    acc.push(income.mean + income.sd * z);
                }
                acc
            })
            .collect();
        let total = pairwise(&chunks, Welford::merge);
        return Ok(CeEstimate {
            ce_hat: total.mean,
            stderr: total.sd() / n.sqrt(),
        });
    }

    let chunks: Vec<LogSumExp> = chunk_lengths(cfg.n_samples)
        .into_par_iter()
        .enumerate()
        .map(|(index, len)| {
            let mut rng = subs.stream(index as u64);
            let mut acc = LogSumExp::new();
            for _ in 0..len {
                let z: f64 = StandardNormal.sample(&mut rng);
                let y = income.mean + income.sd * z;
                acc.push(-rho * y);
            }
            acc
        })
        .collect();
    let total = pairwise(&chunks, LogSumExp::merge);

    // mean of u' = exp(a - max); ce = -(max + ln(mean u')) / rho.
    let u_mean = total.sum / n;
    let ce_hat = -(total.max + u_mean.ln()) / rho;
    // Sample variance of u' via its sums, clamped against rounding.
    let var_u = ((total.sum_sq - total.sum * total.sum / n) / (n - 1.0)).max(0.0);
    let stderr = (var_u / n).sqrt() / (rho * u_mean);
    Ok(CeEstimate { ce_hat, stderr })
}

/// Parameters of a buffer-pool program for reversal risk.
///
/// Each period the program issues credits, retains `buffer_fraction` of
/// them in a pooled reserve, and sells the rest. With probability
/// `reversal_probability` a reversal destroys `reversal_severity` of the
/// carbon stored so far; the loss is debited from the buffer, and any excess
/// beyond the buffer is an unbacked deficit that invalidates already-sold
/// credits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferPoolSpec {
    /// Credits issued each period. Must be > 0.
    pub issuance_per_period: f64,
    /// Share of each issuance retained in the buffer, in `[0, 1]`.
    pub buffer_fraction: f64,
    /// Per-period probability of a reversal event, in `[0, 1]`.
    pub reversal_probability: f64,
    /// Fraction of the remaining carbon stock destroyed per event, in
    /// `(0, 1]`.
    pub reversal_severity: f64,
    /// Number of periods simulated. Must be >= 1.
    pub horizon: u32,
}

impl BufferPoolSpec {
    /// Checks every field invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("buffer.{name}");
        if !self.issuance_per_period.is_finite() || self.issuance_per_period <= 0.0 {
            return Err(Error::invalid(field("issuance_per_period"), "must be > 0"));
        }
        if !self.buffer_fraction.is_finite() || !(0.0..=1.0).contains(&self.buffer_fraction) {
            return Err(Error::invalid(field("buffer_fraction"), "must lie in [0, 1]"));
        }
        if !self.reversal_probability.is_finite()
            || !(0.0..=1.0).contains(&self.reversal_probability)
        {
            return Err(Error::invalid(
                field("reversal_probability"),
                "must lie in [0, 1]",
            ));
        }
        if !self.reversal_severity.is_finite()
            || !(self.reversal_severity > 0.0 && self.reversal_severity <= 1.0)
        {
            return Err(Error::invalid(
                field("reversal_severity"),
                "must lie in (0, 1]",
            ));
        }
        if self.horizon == 0 {
            return Err(Error::invalid(field("horizon"), "must be >= 1"));
        }
        Ok(())
    }
}

/// End-of-horizon accounting of a single buffer-pool trial.
///
/// Every issued credit ends in exactly one bucket, so
/// `net_credits + terminal_buffer + absorbed + deficit = issued`
/// up to floating rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    /// Whether any reversal exceeded the buffer during the trial.
    pub shortfall: bool,
    /// Credits issued over the horizon.
    pub issued: f64,
    /// Credits sold before accounting for invalidation.
    pub sold_gross: f64,
    /// Sold credits still backed at the end: `sold_gross - deficit`.
    pub net_credits: f64,
    /// Reserve remaining at the end of the horizon.
    pub terminal_buffer: f64,
    /// Reversal losses the buffer covered.
    pub absorbed: f64,
    /// Reversal losses nothing covered (invalidated sold credits).
    pub deficit: f64,
}

/// One period of a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodRecord {
    /// 1-based period index.
    pub period: u32,
    /// Credits issued this period.
    pub issued: f64,
    /// Buffer balance at the end of the period.
    pub buffer: f64,
    /// Carbon destroyed by a reversal this period (0 if none occurred).
    pub reversal: f64,
    /// New unbacked deficit created this period.
    pub deficit: f64,
}

/// Aggregate results over all buffer-pool trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSummary {
    /// Fraction of trials in which at least one reversal exceeded the
    /// buffer.
    pub shortfall_probability: f64,
    /// Mean reserve remaining at the end of the horizon.
    pub expected_terminal_buffer: f64,
    /// Mean sold credits still backed at the end of the horizon.
    pub expected_net_credits: f64,
    /// Number of trials behind the estimates.
    pub trials: u64,
    /// Binomial standard error of `shortfall_probability`.
    pub stderr_shortfall: f64,
}

/// Runs one trial on the given generator. Exactly one uniform is drawn per
/// period whether or not an event occurs, so trials line up draw-for-draw
/// across different `(reversal_probability, buffer_fraction)` settings: the
/// common-random-numbers coupling the monotonicity checks rely on.
pub fn simulate_trial(spec: &BufferPoolSpec, rng: &mut impl Rng) -> TrialOutcome {
    run_trial(spec, rng, |_| {})
}

fn run_trial(
    spec: &BufferPoolSpec,
    rng: &mut impl Rng,
    mut record: impl FnMut(PeriodRecord),
) -> TrialOutcome {
    let issuance = spec.issuance_per_period;
    let retained = spec.buffer_fraction * issuance;
    let sold_per_period = issuance - retained;

    let mut stock = 0.0_f64;
    let mut buffer = 0.0_f64;
    let mut issued = 0.0_f64;
    let mut sold = 0.0_f64;
    let mut absorbed = 0.0_f64;
    let mut deficit = 0.0_f64;
    let mut shortfall = false;

    for period in 1..=spec.horizon {
        issued += issuance;
        stock += issuance;
        buffer += retained;
        sold += sold_per_period;

        let u: f64 = rng.random();
        let mut loss = 0.0;
        let mut new_deficit = 0.0;
        if u < spec.reversal_probability {
            loss = spec.reversal_severity * stock;
            stock -= loss;
            if loss > buffer {
                shortfall = true;
                new_deficit = loss - buffer;
                deficit += new_deficit;
                absorbed += buffer;
                buffer = 0.0;
            } else {
                absorbed += loss;
                buffer -= loss;
            }
        }
        record(PeriodRecord {
            period,
            issued: issuance,
            buffer,
            reversal: loss,
            deficit: new_deficit,
        });
    }

    TrialOutcome {
        shortfall,
        issued,
        sold_gross: sold,
        net_credits: sold - deficit,
        terminal_buffer: buffer,
        absorbed,
        deficit,
    }
}

/// Simulates `trials` independent buffer-pool paths and aggregates them.
///
/// Trial `t` always draws from substream `t` of `(seed, stream_id)`, and
/// per-trial outcomes are reduced pairwise in trial order, so the summary is
/// bit-identical for a given configuration regardless of thread count.
pub fn simulate_buffer_pool(
    spec: &BufferPoolSpec,
    trials: u64,
    cfg: &SamplerConfig,
) -> Result<SimulationSummary> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let subs = Substreams::new(cfg.seed, cfg.stream_id);
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| simulate_trial(spec, &mut subs.stream(t)))
        .collect();

    let shortfalls = outcomes.iter().filter(|o| o.shortfall).count() as f64;
    let n = trials as f64;
    let p_hat = shortfalls / n;
    let buffers: Vec<f64> = outcomes.iter().map(|o| o.terminal_buffer).collect();
    let credits: Vec<f64> = outcomes.iter().map(|o| o.net_credits).collect();
    Ok(SimulationSummary {
        shortfall_probability: p_hat,
        expected_terminal_buffer: pairwise_sum(&buffers) / n,
        expected_net_credits: pairwise_sum(&credits) / n,
        trials,
        stderr_shortfall: (p_hat * (1.0 - p_hat) / n).sqrt(),
    })
}

/// Re-runs the first `trials` buffer-pool paths of a configuration and
/// returns their period-by-period trajectories. Uses the same substreams as
/// [`simulate_buffer_pool`], so the recorded paths are exactly the simulated
/// ones.
pub fn buffer_pool_trajectories(
    spec: &BufferPoolSpec,
    trials: u64,
    cfg: &SamplerConfig,
) -> Result<Vec<Vec<PeriodRecord>>> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let subs = Substreams::new(cfg.seed, cfg.stream_id);
    Ok((0..trials)
        .map(|t| {
            let mut path = Vec::with_capacity(spec.horizon as usize);
            run_trial(spec, &mut subs.stream(t), |record| path.push(record));
            path
        })
        .collect())
}

/// Lengths of the fixed work units covering `n` samples.
fn chunk_lengths(n: u64) -> Vec<u64> {
    let full = n / CHUNK;
    let rest = n % CHUNK;
    let mut lengths = vec![CHUNK; full as usize];
    if rest > 0 {
        lengths.push(rest);
    }
    lengths
}

/// Pairwise (balanced-tree) reduction in slice order.
fn pairwise<T: Copy>(items: &[T], merge: fn(T, T) -> T) -> T {
    debug_assert!(!items.is_empty());
    if items.len() == 1 {
        return items[0];
    }
    let mid = items.len() / 2;
    merge(pairwise(&items[..mid], merge), pairwise(&items[mid..], merge))
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Streaming mean/variance/extrema accumulator with an exact parallel merge.
#[derive(Debug, Clone, Copy)]
struct Welford {
    count: f64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Welford {
    fn new() -> Self {
        Welford {
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn merge(a: Welford, b: Welford) -> Welford {
        if a.count == 0.0 {
            return b;
        }
        if b.count == 0.0 {
            return a;
        }
        let count = a.count + b.count;
        let delta = b.mean - a.mean;
        Welford {
            count,
            mean: a.mean + delta * (b.count / count),
            m2: a.m2 + b.m2 + delta * delta * (a.count * b.count / count),
            min: a.min.min(b.min),
            max: a.max.max(b.max),
        }
    }

    fn sd(&self) -> f64 {
        if self.count < 2.0 {
            0.0
        } else {
            (self.m2 / (self.count - 1.0)).sqrt()
        }
    }
}

/// Streaming log-sum-exp accumulator for `sum exp(a_i - max)` and
/// `sum exp(2 (a_i - max))`; every stored exponent is <= 0 so nothing can
/// overflow.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    sum: f64,
    sum_sq: f64,
}

impl LogSumExp {
    fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }

    fn push(&mut self, a: f64) {
        if a <= self.max {
            let e = (a - self.max).exp();
            self.sum += e;
            self.sum_sq += e * e;
        } else {
            let r = (self.max - a).exp(); // 0 on the first push
            self.sum = self.sum * r + 1.0;
            self.sum_sq = self.sum_sq * r * r + 1.0;
            self.max = a;
        }
    }

    fn merge(a: LogSumExp, b: LogSumExp) -> LogSumExp {
        let max = a.max.max(b.max);
        let ra = (a.max - max).exp();
        let rb = (b.max - max).exp();
        LogSumExp {
            max,
            sum: a.sum * ra + b.sum * rb,
            sum_sq: a.sum_sq * ra * ra + b.sum_sq * rb * rb,
        }
    }
}
