//! Monte Carlo SINR statistics over independent channel draws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sinr::{check_shapes, inner_precoders, sinr_terms, SinrTerms};
use crate::error::{Error, Result};
use crate::optimizer::interference_bound;
use crate::precoding::{InnerKind, PowerAllocation, SubspaceControl};
use crate::rng;
use crate::scenario::{ChannelSampler, Scenario};

/// Resampling attempts per draw before giving up.
const MAX_ATTEMPTS: u64 = 16;

/// Quantile levels reported for every user besides `ε_k`.
pub const REPORT_LEVELS: [f64; 5] = [0.01, 0.05, 0.1, 0.5, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloOptions {
    pub draws: usize,
    pub seed: u64,
    pub inner: InnerKind,
    pub sigma_e: f64,
    /// Largest fraction of draws that may be resampled after a singular ZF.
    pub max_resample_fraction: f64,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self {
            draws: 2000,
            seed: 0,
            inner: InnerKind::Zf,
            sigma_e: 0.0,
            max_resample_fraction: 0.01,
        }
    }
}

/// Raw per-draw terms, indexed `[user][draw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrSamples {
    pub sinr: Vec<Vec<f64>>,
    pub inter: Vec<Vec<f64>>,
    pub draws: usize,
    pub resampled: usize,
    /// Largest intra-cluster leakage relative to `1 + signal`.
    pub max_intra_leak: f64,
}

fn one_draw(
    scenario: &Scenario,
    sampler: &ChannelSampler,
    control: &SubspaceControl,
    power: &PowerAllocation,
    opts: &MonteCarloOptions,
    d: u64,
) -> Result<(Vec<SinrTerms>, u64)> {
    let stride = opts.draws as u64;
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let slot = d + attempt * stride;
        let draw = sampler.draw(opts.seed, slot);
        let mut err_rng = rng::stream(opts.seed, rng::DOMAIN_CSI_ERROR, slot);
        match inner_precoders(scenario, control, &draw, opts.inner, opts.sigma_e, &mut err_rng) {
            Ok(g) => {
                let terms = (0..scenario.topology.num_users())
                    .map(|k| sinr_terms(scenario, control, &g, power, &draw, k))
                    .collect();
                return Ok((terms, attempt));
            }
            Err(e @ Error::Singular { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// SINR and inter-cluster interference of every user over `opts.draws` draws.
///
/// Draw `d` uses channel slot `d`; a singular ZF draw is replaced by slot
/// `d + draws`, then `d + 2·draws`, so results do not depend on scheduling.
pub fn collect_sinr(
    scenario: &Scenario,
    control: &SubspaceControl,
    opts: &MonteCarloOptions,
) -> Result<SinrSamples> {
    check_shapes(scenario, control)?;
    if opts.draws == 0 {
        return Err(Error::Config("draws must be positive".into()));
    }
    let sampler = ChannelSampler::new(scenario)?;
    let power = PowerAllocation::from_scenario(scenario)?;
    let per_draw = (0..opts.draws as u64)
        .into_par_iter()
        .map(|d| one_draw(scenario, &sampler, control, &power, opts, d))
        .collect::<Result<Vec<_>>>()?;
    let users = scenario.topology.num_users();
    let mut sinr = vec![Vec::with_capacity(opts.draws); users];
    let mut inter = vec![Vec::with_capacity(opts.draws); users];
    let mut resampled = 0;
    let mut max_intra_leak: f64 = 0.0;
    for (terms, attempts) in per_draw {
        resampled += attempts as usize;
        for (k, t) in terms.iter().enumerate() {
            sinr[k].push(t.sinr);
            inter[k].push(t.inter);
            max_intra_leak = max_intra_leak.max(t.intra / (1.0 + t.signal));
        }
    }
    let cap = (opts.max_resample_fraction * opts.draws as f64).floor() as usize;
    if resampled > cap {
        return Err(Error::Numerical(format!(
            "{resampled} of {} draws needed resampling after a singular ZF (cap {cap})",
            opts.draws
        )));
    }
    if resampled > 0 {
        log::info!("resampled {resampled} singular ZF draws");
    }
    let exact_zf = opts.inner == InnerKind::Zf && opts.sigma_e == 0.0;
    if exact_zf && max_intra_leak > 1e-9 {
        return Err(Error::Numerical(format!(
            "zero forcing leaked {max_intra_leak:.3e} inside a cluster"
        )));
    }
    Ok(SinrSamples {
        sinr,
        inter,
        draws: opts.draws,
        resampled,
        max_intra_leak,
    })
}

/// Empirical quantile of sorted data with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// `√(p(1−p)/n)`.
pub fn binomial_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserOutage {
    pub user: usize,
    pub epsilon: f64,
    pub target: f64,
    pub satisfaction: f64,
    pub stderr: f64,
    /// `Φ̌_k(ε_k)`.
    pub sinr_at_epsilon: f64,
    /// `log2(1 + Φ̌_k(ε_k))`.
    pub outage_throughput: f64,
    /// `(level, quantile)` pairs at `REPORT_LEVELS`.
    pub quantiles: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub gamma: f64,
    pub draws: usize,
    pub resampled: usize,
    pub users: Vec<UserOutage>,
    pub min_satisfaction: f64,
    pub min_satisfaction_stderr: f64,
    /// `min_k Pr{SINR_k ≥ w_k γ} − max_k (1 − ε_k)`.
    pub probability_gap: f64,
    pub max_intra_leak: f64,
}

/// Satisfaction probabilities and quantiles at QoS level `γ`.
pub fn outage_statistics(
    scenario: &Scenario,
    control: &SubspaceControl,
    gamma: f64,
    opts: &MonteCarloOptions,
) -> Result<OutageReport> {
    if opts.draws < 100 {
        return Err(Error::Config(format!("outage statistics need at least 100 draws, got {}", opts.draws)));
    }
    let samples = collect_sinr(scenario, control, opts)?;
    Ok(summarize(scenario, &samples, gamma))
}

/// Turns raw samples into an [`OutageReport`].
pub fn summarize(scenario: &Scenario, samples: &SinrSamples, gamma: f64) -> OutageReport {
    let n = samples.draws;
    let users: Vec<UserOutage> = samples
        .sinr
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let target = scenario.weights[k] * gamma;
            let hits = s.iter().filter(|&&x| x >= target).count();
            let p = hits as f64 / n as f64;
            let sorted = sorted(s);
            let eps = scenario.epsilons[k];
            let at = quantile(&sorted, eps);
            UserOutage {
                user: k,
                epsilon: eps,
                target,
                satisfaction: p,
                stderr: binomial_stderr(p, n),
                sinr_at_epsilon: at,
                outage_throughput: (1.0 + at).log2(),
                quantiles: REPORT_LEVELS.iter().map(|&q| (q, quantile(&sorted, q))).collect(),
            }
        })
        .collect();
    let worst = users
        .iter()
        .min_by(|a, b| a.satisfaction.total_cmp(&b.satisfaction))
        .expect("at least one user");
    let target = scenario
        .epsilons
        .iter()
        .map(|e| 1.0 - e)
        .fold(f64::NEG_INFINITY, f64::max);
    OutageReport {
        gamma,
        draws: n,
        resampled: samples.resampled,
        min_satisfaction: worst.satisfaction,
        min_satisfaction_stderr: worst.stderr,
        probability_gap: worst.satisfaction - target,
        max_intra_leak: samples.max_intra_leak,
        users,
    }
}

/// Per-user `Pr{I_k > Î_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bounds: Vec<f64>,
    pub violation_rates: Vec<f64>,
    pub max_violation_rate: f64,
    pub draws: usize,
}

pub fn verify_interference_bound(
    scenario: &Scenario,
    control: &SubspaceControl,
    opts: &MonteCarloOptions,
) -> Result<BoundCheck> {
    let samples = collect_sinr(scenario, control, opts)?;
    Ok(bound_check(scenario, control, &samples))
}

pub fn bound_check(scenario: &Scenario, control: &SubspaceControl, samples: &SinrSamples) -> BoundCheck {
    let bounds: Vec<f64> = (0..scenario.topology.num_users())
        .map(|k| interference_bound(scenario, control, k))
        .collect();
    let violation_rates: Vec<f64> = samples
        .inter
        .iter()
        .zip(&bounds)
        .map(|(i, b)| i.iter().filter(|&&x| x > *b).count() as f64 / samples.draws as f64)
        .collect();
    BoundCheck {
        max_violation_rate: violation_rates.iter().copied().fold(0.0, f64::max),
        bounds,
        violation_rates,
        draws: samples.draws,
    }
}
