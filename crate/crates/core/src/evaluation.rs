//! Monte-Carlo sweeps over the surface size `N` and the projected-gradient
//! oracle used to certify the relaxed optimum.
//!
//! Every `(N, trial)` pair draws one [`ChannelSet`] which all strategies
//! share, so comparisons between strategies are paired. Trials run on the
//! rayon pool (except in [`run_timing`]) and are folded in trial order, so
//! the metric values do not depend on scheduling.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::active::{fp_beamforming, rzf_beamforming, sum_rate, FpOptions};
use crate::channel::{effective_channel, sample_channels, ChannelSet, ScenarioConfig};
use crate::error::{Error, Result};
use crate::linalg::{c, frobenius_sq, CMatrix};
use crate::passive::{
    passive_design, sum_channel_gain, sum_channel_gain_gradient, Relaxation, RelaxedSolution,
    SolutionMethod,
};
use crate::projections::Architecture;

pub const METRIC_GAIN: &str = "sum_channel_gain";
pub const METRIC_RATE: &str = "sum_rate";
pub const METRIC_PASSIVE_TIME: &str = "passive_time_s";
pub const METRIC_PASSIVE_TIME_MEDIAN: &str = "passive_time_median_s";
pub const METRIC_TOTAL_TIME: &str = "total_time_s";
pub const METRIC_TOTAL_TIME_MEDIAN: &str = "total_time_median_s";

/// Stage-1 choice: no surface at all, or a relaxed solution projected onto
/// an architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PassiveSpec {
    NoRis,
    Projected {
        relaxation: Relaxation,
        arch: Architecture,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActiveSpec {
    Fp,
    Rzf,
    None,
}

/// One curve of an experiment, e.g. `PoP-FC+FP`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StrategySpec {
    pub passive: PassiveSpec,
    pub active: ActiveSpec,
}

impl StrategySpec {
    pub fn new(passive: PassiveSpec, active: ActiveSpec) -> Self {
        Self { passive, active }
    }

    pub fn projected(relaxation: Relaxation, arch: Architecture, active: ActiveSpec) -> Self {
        Self::new(PassiveSpec::Projected { relaxation, arch }, active)
    }

    /// `PoP-FC + FP`.
    pub fn proposed_1() -> Self {
        Self::projected(
            Relaxation::LowComplexity,
            Architecture::FullyConnected,
            ActiveSpec::Fp,
        )
    }

    /// `PoP-FC + RZF`.
    pub fn proposed_2() -> Self {
        Self::projected(
            Relaxation::LowComplexity,
            Architecture::FullyConnected,
            ActiveSpec::Rzf,
        )
    }

    pub fn uses_optimal_relaxation(&self) -> bool {
        matches!(
            self.passive,
            PassiveSpec::Projected {
                relaxation: Relaxation::Optimal,
                ..
            }
        )
    }

    /// Parses a label; a bare `GC` takes `default_group` as its group size.
    pub fn parse_with_group(s: &str, default_group: usize) -> Result<Self> {
        let invalid = || Error::Domain(format!("unrecognized strategy label `{s}`"));
        let trimmed = s.trim();
        match trimmed.to_ascii_lowercase().as_str() {
            "proposed1" | "proposed-1" => return Ok(Self::proposed_1()),
            "proposed2" | "proposed-2" => return Ok(Self::proposed_2()),
            _ => {}
        }
        let (passive, active) = match trimmed.split_once('+') {
            Some((p, a)) => (p.trim(), Some(a.trim())),
            None => (trimmed, None),
        };
        let active = match active.map(|a| a.to_ascii_uppercase()) {
            None => ActiveSpec::None,
            Some(a) if a == "FP" => ActiveSpec::Fp,
            Some(a) if a == "RZF" => ActiveSpec::Rzf,
            Some(_) => return Err(invalid()),
        };
        if passive.eq_ignore_ascii_case("noris") {
            return Ok(Self::new(PassiveSpec::NoRis, active));
        }
        let (relax, arch) = passive.split_once('-').ok_or_else(invalid)?;
        let relaxation = match relax.to_ascii_uppercase().as_str() {
            "POP" => Relaxation::LowComplexity,
            "POO" => Relaxation::Optimal,
            _ => return Err(invalid()),
        };
        let arch_up = arch.to_ascii_uppercase();
        let arch = match arch_up.as_str() {
            "FC" => Architecture::FullyConnected,
            "SC" => Architecture::SingleConnected,
            "GC" => Architecture::GroupConnected(default_group),
            other => {
                let size = other
                    .strip_prefix("GC")
                    .and_then(|g| g.parse::<usize>().ok())
                    .filter(|&g| g > 0)
                    .ok_or_else(invalid)?;
                Architecture::GroupConnected(size)
            }
        };
        Ok(Self::projected(relaxation, arch, active))
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.passive {
            PassiveSpec::NoRis => f.write_str("NoRIS")?,
            PassiveSpec::Projected { relaxation, arch } => write!(f, "{relaxation}-{arch}")?,
        }
        match self.active {
            ActiveSpec::Fp => f.write_str("+FP"),
            ActiveSpec::Rzf => f.write_str("+RZF"),
            ActiveSpec::None => Ok(()),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    /// Group-connected labels must carry their size here (`PoP-GC4`).
    fn from_str(s: &str) -> Result<Self> {
        let spec = Self::parse_with_group(s, 0)?;
        if let PassiveSpec::Projected {
            arch: Architecture::GroupConnected(0),
            ..
        } = spec.passive
        {
            return Err(Error::Domain(format!(
                "strategy `{s}` needs an explicit group size, e.g. PoP-GC2"
            )));
        }
        Ok(spec)
    }
}

/// One aggregated row: a metric of a strategy at one surface size.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub strategy: String,
    pub n: usize,
    pub metric: String,
    pub mean: f64,
    /// Unbiased sample standard deviation; NaN for a single trial or for
    /// median rows.
    pub std: f64,
    /// Mean wall-clock seconds per realization of the stages the experiment
    /// runs (passive only for channel gain, both stages otherwise).
    pub mean_time_s: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn find(&self, strategy: &str, n: usize, metric: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.n == n && r.metric == metric)
    }

    /// Mean of `metric` for `strategy` at `n`.
    pub fn mean(&self, strategy: &StrategySpec, n: usize, metric: &str) -> Option<f64> {
        self.find(&strategy.to_string(), n, metric).map(|r| r.mean)
    }
}

/// Sample mean and unbiased standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Metric values of one strategy on one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub gain: f64,
    /// NaN when no precoder was computed.
    pub rate: f64,
    pub passive_s: f64,
    pub active_s: f64,
}

/// Scattering matrix for `spec` on `ch` (`None` for the surface-less
/// reference).
fn stage_one(ch: &ChannelSet, passive: PassiveSpec) -> Result<Option<CMatrix>> {
    match passive {
        PassiveSpec::NoRis => Ok(None),
        PassiveSpec::Projected { relaxation, arch } => {
            Ok(Some(passive_design(ch, arch, relaxation)?.into_inner()))
        }
    }
}

/// Runs the two-stage pipeline for one strategy on one realization.
///
/// The effective channel without a surface is the direct channel `G`.
pub fn two_stage(
    ch: &ChannelSet,
    spec: StrategySpec,
    p_t: f64,
    fp: FpOptions,
) -> Result<TrialOutcome> {
    let t0 = Instant::now();
    let theta = stage_one(ch, spec.passive)?;
    let passive_s = t0.elapsed().as_secs_f64();

    let (f, gain) = match &theta {
        Some(theta) => (effective_channel(ch, theta)?, sum_channel_gain(ch, theta)?),
        None => (ch.g.clone(), frobenius_sq(&ch.g)),
    };

    let t1 = Instant::now();
    let rate = match spec.active {
        ActiveSpec::None => f64::NAN,
        ActiveSpec::Fp => {
            let (pre, _) = fp_beamforming(&f, p_t, ch.noise_power, fp)?;
            sum_rate(&f, &pre.w, ch.noise_power)?
        }
        ActiveSpec::Rzf => {
            let pre = rzf_beamforming(&f, p_t, ch.noise_power)?;
            sum_rate(&f, &pre.w, ch.noise_power)?
        }
    };
    let active_s = if spec.active == ActiveSpec::None {
        0.0
    } else {
        t1.elapsed().as_secs_f64()
    };
    Ok(TrialOutcome {
        gain,
        rate,
        passive_s,
        active_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Experiment {
    ChannelGain,
    SumRate,
    Timing,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::ChannelGain => "channel-gain",
            Experiment::SumRate => "sum-rate",
            Experiment::Timing => "timing",
        }
    }
}

fn fp_options(config: &ScenarioConfig) -> FpOptions {
    FpOptions {
        tol: config.fp_tol,
        max_iter: config.fp_max_iter,
    }
}

/// Validates the sweep and returns the `(N, strategies)` plan. Strategies
/// that relax optimally are dropped at sizes above `config.poo_max_n`.
fn plan(
    config: &ScenarioConfig,
    strategies: &[StrategySpec],
    n_list: &[usize],
    experiment: Experiment,
) -> Result<Vec<(usize, Vec<StrategySpec>)>> {
    config.validate()?;
    for s in strategies {
        let ok = match experiment {
            Experiment::ChannelGain => s.active == ActiveSpec::None,
            Experiment::SumRate | Experiment::Timing => s.active != ActiveSpec::None,
        };
        if !ok {
            return Err(Error::InvalidStrategy {
                strategy: s.to_string(),
                experiment: experiment.name(),
            });
        }
    }
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidConfig {
                key: "n",
                reason: "surface sizes must be positive".into(),
            });
        }
        let cfg_n = config.with_n(n);
        let mut active = Vec::new();
        for s in strategies {
            if let PassiveSpec::Projected { arch, .. } = s.passive {
                arch.check(n)?;
            }
            if s.uses_optimal_relaxation() && n > cfg_n.poo_max_n {
                continue;
            }
            active.push(*s);
        }
        out.push((n, active));
    }
    Ok(out)
}

fn aggregate(
    rows: &mut Vec<ResultRow>,
    spec: &StrategySpec,
    n: usize,
    metric: &str,
    values: &[f64],
    times: &[f64],
) {
    let (mean, std) = mean_std(values);
    rows.push(ResultRow {
        strategy: spec.to_string(),
        n,
        metric: metric.to_string(),
        mean,
        std,
        mean_time_s: mean_std(times).0,
        trials: values.len(),
    });
}

fn run_paired(
    config: &ScenarioConfig,
    strategies: &[StrategySpec],
    n_list: &[usize],
    experiment: Experiment,
) -> Result<ExperimentResult> {
    let plan = plan(config, strategies, n_list, experiment)?;
    let p_t = config.transmit_power();
    let fp = fp_options(config);
    let mut rows = Vec::new();
    for (n, specs) in plan {
        if specs.is_empty() {
            continue;
        }
        let cfg_n = config.with_n(n);
        // trial-major outcomes, one entry per strategy
        let outcomes: Vec<Vec<TrialOutcome>> = (0..cfg_n.trials as u64)
            .into_par_iter()
            .map(|t| {
                let ch = sample_channels(&cfg_n, t)?;
                specs
                    .iter()
                    .map(|s| two_stage(&ch, *s, p_t, fp))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        for (i, spec) in specs.iter().enumerate() {
            let column = outcomes.iter().map(|trial| trial[i]);
            let times: Vec<f64> = column.clone().map(|o| o.passive_s + o.active_s).collect();
            let (metric, values): (&str, Vec<f64>) = match experiment {
                Experiment::ChannelGain => (METRIC_GAIN, column.map(|o| o.gain).collect()),
                _ => (METRIC_RATE, column.map(|o| o.rate).collect()),
            };
            aggregate(&mut rows, spec, n, metric, &values, &times);
        }
    }
    Ok(ExperimentResult { rows })
}

/// Mean sum channel gain per strategy and `N` (active stage must be `None`).
pub fn run_channel_gain(
    config: &ScenarioConfig,
    strategies: &[StrategySpec],
    n_list: &[usize],
) -> Result<ExperimentResult> {
    run_paired(config, strategies, n_list, Experiment::ChannelGain)
}

/// Mean sum rate of the two-stage pipeline per strategy and `N`.
pub fn run_sum_rate(
    config: &ScenarioConfig,
    strategies: &[StrategySpec],
    n_list: &[usize],
) -> Result<ExperimentResult> {
    run_paired(config, strategies, n_list, Experiment::SumRate)
}

/// Wall-clock cost of the full two-stage solve, measured sequentially on one
/// thread. Channel generation is excluded. Emits mean and median rows for
/// the passive stage and for the total.
pub fn run_timing(
    config: &ScenarioConfig,
    strategies: &[StrategySpec],
    n_list: &[usize],
) -> Result<ExperimentResult> {
    let plan = plan(config, strategies, n_list, Experiment::Timing)?;
    let p_t = config.transmit_power();
    let fp = fp_options(config);
    let mut rows = Vec::new();
    for (n, specs) in plan {
        let cfg_n = config.with_n(n);
        let mut passive = vec![Vec::with_capacity(cfg_n.trials); specs.len()];
        let mut total = vec![Vec::with_capacity(cfg_n.trials); specs.len()];
        for t in 0..cfg_n.trials as u64 {
            let ch = sample_channels(&cfg_n, t)?;
            for (i, spec) in specs.iter().enumerate() {
                let o = two_stage(&ch, *spec, p_t, fp)?;
                passive[i].push(o.passive_s);
                total[i].push(o.passive_s + o.active_s);
            }
        }
        for (i, spec) in specs.iter().enumerate() {
            let mean_total = mean_std(&total[i]).0;
            let median_row = |metric: &str, values: &[f64]| ResultRow {
                strategy: spec.to_string(),
                n,
                metric: metric.to_string(),
                mean: median(values),
                std: f64::NAN,
                mean_time_s: mean_total,
                trials: values.len(),
            };
            aggregate(
                &mut rows,
                spec,
                n,
                METRIC_PASSIVE_TIME,
                &passive[i],
                &total[i],
            );
            rows.push(median_row(METRIC_PASSIVE_TIME_MEDIAN, &passive[i]));
            aggregate(&mut rows, spec, n, METRIC_TOTAL_TIME, &total[i], &total[i]);
            rows.push(median_row(METRIC_TOTAL_TIME_MEDIAN, &total[i]));
        }
    }
    Ok(ExperimentResult { rows })
}

/// Largest eigenvalue of `X ↦ H Hᴴ X E Eᴴ` (the Hessian of the sum channel
/// gain) by power iteration.
fn curvature(ch: &ChannelSet, rng: &mut ChaCha8Rng) -> f64 {
    let n = ch.n();
    let hh = &ch.h * ch.h.adjoint();
    let ee = &ch.e * ch.e.adjoint();
    let mut x = random_matrix(rng, n);
    let mut lambda = 0.0;
    for _ in 0..100 {
        let y = &hh * &x * &ee;
        let nrm = y.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        lambda = nrm / x.norm();
        x = y.map(|z| z / nrm);
    }
    lambda
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        c(
            StandardNormal.sample(&mut *rng),
            StandardNormal.sample(&mut *rng),
        )
    })
}

fn scale_into_ball(theta: &mut CMatrix, radius_sq: f64) {
    let nrm_sq = frobenius_sq(theta);
    if nrm_sq > radius_sq {
        let s = (radius_sq / nrm_sq).sqrt();
        theta.iter_mut().for_each(|z| *z *= s);
    }
}

/// Projected gradient ascent on `‖Θ‖_F² ≤ N` from `start`.
///
/// The step is `4 / λ` with `λ` the Hessian curvature; for a convex
/// objective every projected step is an ascent step, so the objective is
/// non-decreasing. Stops after `step_count` steps or when an iteration gains
/// less than `1e-15` relative.
pub fn projected_gradient_from(
    ch: &ChannelSet,
    start: &CMatrix,
    step_count: usize,
) -> Result<RelaxedSolution> {
    let n = ch.n();
    let radius_sq = n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let curv = curvature(ch, &mut rng);
    let step = if curv > 0.0 { 4.0 / curv } else { 1.0 };
    let mut theta = start.clone();
    scale_into_ball(&mut theta, radius_sq);
    let mut value = sum_channel_gain(ch, &theta)?;
    for _ in 0..step_count {
        // real-coordinate gradient: 2 H (Gᴴ + HᴴΘE) Eᴴ
        let grad = sum_channel_gain_gradient(ch, &theta)?;
        let mut next = &theta + grad.map(|z| z * (2.0 * step));
        scale_into_ball(&mut next, radius_sq);
        let next_value = sum_channel_gain(ch, &next)?;
        if next_value <= value * (1.0 + 1e-15) {
            if next_value > value {
                theta = next;
                value = next_value;
            }
            break;
        }
        theta = next;
        value = next_value;
    }
    Ok(RelaxedSolution {
        theta,
        method: SolutionMethod::ProjectedGradient,
        objective: value,
        degenerate: false,
    })
}

/// Best of `restarts` projected-gradient runs: one from `Θ = 0`, the rest
/// from seeded random points on the sphere `‖Θ‖_F² = N`.
///
/// Intended for small `N`; it does not use the eigendecomposition and serves
/// as an independent check on [`crate::passive::relaxed_optimal`].
pub fn projected_gradient_oracle(
    ch: &ChannelSet,
    step_count: usize,
    restarts: usize,
    seed: u64,
) -> Result<RelaxedSolution> {
    let n = ch.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = projected_gradient_from(ch, &CMatrix::zeros(n, n), step_count)?;
    for _ in 1..restarts.max(1) {
        let mut start = random_matrix(&mut rng, n);
        let s = (n as f64 / frobenius_sq(&start)).sqrt();
        start.iter_mut().for_each(|z| *z *= s);
        let sol = projected_gradient_from(ch, &start, step_count)?;
        if sol.objective > best.objective {
            best = sol;
        }
    }
    Ok(best)
}
