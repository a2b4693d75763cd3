//! Non-iterative calibration of `δ_k` against a block-diagonalization run.

use serde::{Deserialize, Serialize};

use super::problem::{projectors, QoSProblem, UserConstants};
use crate::error::{Error, Result};
use crate::evaluation::montecarlo::{collect_sinr, quantile, sorted, MonteCarloOptions};
use crate::precoding::{InnerKind, SubspaceControl};
use crate::scenario::Scenario;

/// How one `γ^BD` is formed from the per-user quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaAggregate {
    /// `min_k Φ̌_k(ε_k) / w_k`.
    #[default]
    Min,
    /// Each user is calibrated at its own `Φ̌_k(ε_k) / w_k`.
    PerUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineOptions {
    pub draws: usize,
    pub seed: u64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub aggregate: GammaAggregate,
    /// Absolute bisection tolerance on `δ`.
    pub tolerance: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            draws: 2000,
            seed: 0,
            delta_min: 2f64.ln(),
            delta_max: 1000f64.ln(),
            aggregate: GammaAggregate::Min,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub problem: QoSProblem,
    pub gamma_bd: f64,
    /// Level each user was calibrated at.
    pub gamma_per_user: Vec<f64>,
    pub deltas_before: Vec<f64>,
    pub deltas_after: Vec<f64>,
    /// Users whose `δ` was kept because no value in range satisfies the restriction.
    pub skipped: Vec<usize>,
}

/// Smaller of the two restriction margins of user `k` at `(δ, W, γ)`.
pub fn restriction_margin(problem: &QoSProblem, k: usize, delta: f64, w: &[crate::linalg::CMatrix], gamma: f64) -> f64 {
    let n = problem.user_cluster[k];
    let u = &problem.users[k];
    let trial = UserConstants::new(
        u.epsilon,
        delta,
        problem.cluster_size(n),
        u.weight,
        problem.lambda[n],
        u.power,
        u.gain,
    );
    let t = problem.signal_trace(n, &w[n]);
    let first = trial.a * t - gamma * problem.leakage(k, w) - trial.c(gamma);
    let second = t - trial.sigma * trial.sigma - (problem.cluster_size(n) as f64 - 1.0);
    first.min(second)
}

/// Largest `δ ∈ [lo, hi]` with a non-negative margin, or `None` if even `lo` fails.
///
/// Both margins decrease in `δ`, so plain bisection applies.
pub fn largest_delta(margin: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Option<f64> {
    if margin(lo) < 0.0 {
        return None;
    }
    if margin(hi) >= 0.0 {
        return Some(hi);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if margin(mid) >= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(a)
}

/// Replaces each `δ_k` by the largest value for which `F_bd` meets the
/// restriction at the level the BD run actually achieves at `ε_k`.
pub fn refine_delta(
    problem: &QoSProblem,
    scenario: &Scenario,
    f_bd: &SubspaceControl,
    opts: &RefineOptions,
) -> Result<RefineOutcome> {
    if opts.draws < 2000 {
        return Err(Error::Config(format!("refinement needs at least 2000 draws, got {}", opts.draws)));
    }
    if !(opts.delta_min > 0.0 && opts.delta_max > opts.delta_min) {
        return Err(Error::Config(format!(
            "bad delta range [{}, {}]",
            opts.delta_min, opts.delta_max
        )));
    }
    let samples = collect_sinr(
        scenario,
        f_bd,
        &MonteCarloOptions {
            draws: opts.draws,
            seed: opts.seed,
            inner: InnerKind::Zf,
            ..Default::default()
        },
    )?;
    let per_user: Vec<f64> = samples
        .sinr
        .iter()
        .enumerate()
        .map(|(k, s)| quantile(&sorted(s), problem.users[k].epsilon) / problem.users[k].weight)
        .collect();
    let gamma_bd = per_user.iter().copied().fold(f64::INFINITY, f64::min);
    let w = projectors(f_bd);
    let before: Vec<f64> = problem.users.iter().map(|u| u.delta).collect();
    let mut after = before.clone();
    let mut skipped = Vec::new();
    let mut used = Vec::with_capacity(before.len());
    for k in 0..problem.num_users() {
        let gamma = match opts.aggregate {
            GammaAggregate::Min => gamma_bd,
            GammaAggregate::PerUser => per_user[k],
        };
        used.push(gamma);
        match largest_delta(
            |d| restriction_margin(problem, k, d, &w, gamma),
            opts.delta_min,
            opts.delta_max,
            opts.tolerance,
        ) {
            Some(d) => after[k] = d,
            None => {
                log::warn!("user {k}: BD subspace fails the restriction for every delta in range; keeping {}", before[k]);
                skipped.push(k);
            }
        }
    }
    Ok(RefineOutcome {
        problem: problem.with_deltas(&after)?,
        gamma_bd,
        gamma_per_user: used,
        deltas_before: before,
        deltas_after: after,
        skipped,
    })
}
