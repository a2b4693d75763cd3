//! QoS problem constants and constraint evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, trace_product_re, trace_re, CMatrix, HermitianEigen};
use crate::precoding::{normalized_direct, SubspaceControl};
use crate::scenario::Scenario;

/// `(σ, a)` for a given `δ`: `σ = (√(2δ) + √(2δ + 4)) / 2`, `a = 1 − √(2δ)/σ`.
pub fn restriction_constants(delta: f64) -> (f64, f64) {
    let r = (2.0 * delta).sqrt();
    let sigma = (r + (2.0 * delta + 4.0).sqrt()) / 2.0;
    (sigma, 1.0 - r / sigma)
}

/// Per-user constants of the deterministic restriction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserConstants {
    pub epsilon: f64,
    pub delta: f64,
    pub sigma: f64,
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
    pub weight: f64,
    pub power: f64,
    /// Direct-link gain credited to the signal term (1 when omitted).
    pub gain: f64,
}

impl UserConstants {
    pub fn new(
        epsilon: f64,
        delta: f64,
        cluster_size: usize,
        weight: f64,
        lambda: f64,
        power: f64,
        gain: f64,
    ) -> Self {
        let (sigma, a) = restriction_constants(delta);
        Self {
            epsilon,
            delta,
            sigma,
            a,
            c1: a * (cluster_size as f64 - 1.0),
            c2: weight / (gain * lambda * power),
            weight,
            power,
            gain,
        }
    }

    /// `c_k(γ) = c_{k,2} γ + c_{k,1}`.
    pub fn c(&self, gamma: f64) -> f64 {
        self.c2 * gamma + self.c1
    }
}

/// One cross term `Θ̄_{k,n}` of user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTerm {
    pub cluster: usize,
    pub matrix: CMatrix,
}

/// All constants of the relaxed QoS problem.
#[derive(Debug, Clone, PartialEq)]
pub struct QoSProblem {
    pub antennas: usize,
    pub users: Vec<UserConstants>,
    pub user_cluster: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
    /// `λ_n = λ_max(Θ°_n)`.
    pub lambda: Vec<f64>,
    /// `Θ̄°_n = Θ°_n / λ_n`.
    pub theta_bar: Vec<CMatrix>,
    pub eta: Vec<f64>,
    /// `cross[k]` follows the order of `B_k`.
    pub cross: Vec<Vec<CrossTerm>>,
    /// `(k, index into cross[k])` for every `k ∈ Ū_n`.
    pub interfered: Vec<Vec<(usize, usize)>>,
    pub gamma_floor: f64,
    /// Largest relative Frobenius spread of the member shapes averaged into `Θ°_n`.
    pub shape_spread: f64,
}

impl QoSProblem {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_size(&self, n: usize) -> usize {
        self.clusters[n].len()
    }

    /// `Tr(Θ̄°_n W_n)`.
    pub fn signal_trace(&self, n: usize, w: &CMatrix) -> f64 {
        trace_product_re(&self.theta_bar[n], w)
    }

    /// `Σ_{n∈B_k} Tr(Θ̄_{k,n} W_n)`.
    pub fn leakage(&self, k: usize, w: &[CMatrix]) -> f64 {
        self.cross[k]
            .iter()
            .map(|c| trace_product_re(&c.matrix, &w[c.cluster]))
            .sum()
    }

    /// Left minus right side of the per-user constraint at `γ`.
    pub fn user_margin(&self, k: usize, w: &[CMatrix], gamma: f64) -> f64 {
        let u = &self.users[k];
        u.a * self.signal_trace(self.user_cluster[k], &w[self.user_cluster[k]])
            - gamma * self.leakage(k, w)
            - u.c(gamma)
    }

    /// `Tr(Θ̄°_n W_n) − η_n`.
    pub fn cluster_margin(&self, n: usize, w: &CMatrix) -> f64 {
        self.signal_trace(n, w) - self.eta[n]
    }

    /// Smallest constraint margin at `γ` (negative means violated).
    pub fn min_margin(&self, w: &[CMatrix], gamma: f64) -> f64 {
        let users = (0..self.num_users()).map(|k| self.user_margin(k, w, gamma));
        let clusters = (0..self.num_clusters()).map(|n| self.cluster_margin(n, &w[n]));
        users.chain(clusters).fold(f64::INFINITY, f64::min)
    }

    /// Margins of the original per-user restriction at `W = F Fᴴ`: the
    /// signal/leakage inequality and `Tr(Θ̄° W) ≥ σ_k² + |U| − 1`.
    pub fn restriction_margins(&self, k: usize, w: &[CMatrix], gamma: f64) -> (f64, f64) {
        let n = self.user_cluster[k];
        let t = self.signal_trace(n, &w[n]);
        let u = &self.users[k];
        let first = u.a * t - gamma * self.leakage(k, w) - u.c(gamma);
        let second = t - u.sigma * u.sigma - (self.cluster_size(n) as f64 - 1.0);
        (first, second)
    }

    /// Largest `γ` user `k` supports at fixed `W`, or `-∞` when the
    /// `γ`-independent part of the restriction already fails.
    pub fn user_gamma_limit(&self, k: usize, w: &[CMatrix]) -> f64 {
        let n = self.user_cluster[k];
        let t = self.signal_trace(n, &w[n]);
        let u = &self.users[k];
        let size = self.cluster_size(n) as f64;
        if t - u.sigma * u.sigma - (size - 1.0) < 0.0 {
            return f64::NEG_INFINITY;
        }
        (u.a * t - u.c1) / (self.leakage(k, w) + u.c2)
    }

    /// Best `γ` attainable by a fixed subspace under the per-user restriction.
    pub fn gamma_limit(&self, w: &[CMatrix]) -> f64 {
        (0..self.num_users())
            .map(|k| self.user_gamma_limit(k, w))
            .fold(f64::INFINITY, f64::min)
    }

    /// Replaces every `δ_k` and recomputes `σ_k`, `a_k`, `c_{k,1}` and `η_n`.
    pub fn with_deltas(&self, deltas: &[f64]) -> Result<Self> {
        if deltas.len() != self.num_users() {
            return Err(Error::Dimension(format!(
                "{} deltas for {} users",
                deltas.len(),
                self.num_users()
            )));
        }
        if let Some(d) = deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::Config(format!("delta must be positive, got {d}")));
        }
        let mut out = self.clone();
        for (k, (u, &d)) in out.users.iter_mut().zip(deltas).enumerate() {
            let n = self.user_cluster[k];
            let lambda = self.lambda[n];
            *u = UserConstants::new(u.epsilon, d, self.clusters[n].len(), u.weight, lambda, u.power, u.gain);
        }
        out.eta = eta(&out.users, &out.clusters);
        Ok(out)
    }
}

fn eta(users: &[UserConstants], clusters: &[Vec<usize>]) -> Vec<f64> {
    clusters
        .iter()
        .map(|members| {
            members
                .iter()
                .map(|&k| users[k].sigma.powi(2) + members.len() as f64 - 1.0)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Whether the direct-link gain `L_{k,b_k}` scales the signal term.
///
/// The direct channel is `√L_{k,b_k} Θ°^{1/2} z`, so the received signal
/// power carries `L_{k,b_k}`. `Included` divides `c_{k,2}` and every
/// `Θ̄_{k,n}` of user `k` by it; `Omitted` uses the constants without that
/// factor, which is only safe when every `L_{k,b_k} ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectGain {
    #[default]
    Included,
    Omitted,
}

/// Derives every constant of the QoS problem from a scenario.
pub fn build_constants(scenario: &Scenario) -> Result<QoSProblem> {
    build_constants_with(scenario, DirectGain::default())
}

pub fn build_constants_with(scenario: &Scenario, direct_gain: DirectGain) -> Result<QoSProblem> {
    let topo = &scenario.topology;
    let m = scenario.antennas();
    for (k, &e) in scenario.epsilons.iter().enumerate() {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::Config(format!("epsilon of user {k} is {e}, outside (0, 1)")));
        }
    }
    let mut lambda = Vec::with_capacity(topo.num_clusters());
    let mut theta_bar = Vec::with_capacity(topo.num_clusters());
    let mut shape_spread: f64 = 0.0;
    for n in 0..topo.num_clusters() {
        let shape = normalized_direct(scenario, n);
        let c = &topo.clusters[n];
        for &k in &c.users {
            let th = scenario.theta(k, c.bs).expect("direct edge");
            let member = th.scale(m as f64 / trace_re(th).max(f64::MIN_POSITIVE));
            let d = crate::linalg::frobenius(&(member - &shape)) / crate::linalg::frobenius(&shape);
            shape_spread = shape_spread.max(d);
        }
        let l = HermitianEigen::new(&shape).max();
        if !(l > 0.0) {
            return Err(Error::Numerical(format!("cluster {n} has a zero direct covariance")));
        }
        lambda.push(l);
        theta_bar.push(hermitian_part(&shape.unscale(l)));
    }
    if shape_spread > 1e-9 {
        log::info!("cluster members differ in shape by up to {shape_spread:.3e}; using the member average");
    }
    let clusters: Vec<Vec<usize>> = topo.clusters.iter().map(|c| c.users.clone()).collect();
    let gains: Vec<f64> = (0..topo.num_users())
        .map(|k| match direct_gain {
            DirectGain::Included => scenario.direct_pathloss(k),
            DirectGain::Omitted => 1.0,
        })
        .collect();
    if let Some(k) = gains.iter().position(|g| !(*g > 0.0)) {
        return Err(Error::Numerical(format!("user {k} has zero direct gain")));
    }
    let users: Vec<UserConstants> = (0..topo.num_users())
        .map(|k| {
            let n = topo.user_cluster[k];
            let eps = scenario.epsilons[k];
            UserConstants::new(
                eps,
                (1.0 / eps).ln(),
                clusters[n].len(),
                scenario.weights[k],
                lambda[n],
                scenario.powers[k],
                gains[k],
            )
        })
        .collect();
    let mut cross = Vec::with_capacity(topo.num_users());
    let mut interfered = vec![Vec::new(); topo.num_clusters()];
    for k in 0..topo.num_users() {
        let nk = topo.user_cluster[k];
        let mut terms = Vec::with_capacity(topo.interferers[k].len());
        for &n in &topo.interferers[k] {
            let theta = scenario
                .theta(k, topo.clusters[n].bs)
                .expect("interferer edge exists");
            let scale = scenario.weights[k] * scenario.cluster_power(n)
                / (gains[k] * lambda[nk] * scenario.powers[k]);
            interfered[n].push((k, terms.len()));
            terms.push(CrossTerm {
                cluster: n,
                matrix: hermitian_part(&theta.scale(scale)),
            });
        }
        cross.push(terms);
    }
    let eta = eta(&users, &clusters);
    Ok(QoSProblem {
        antennas: m,
        users,
        user_cluster: topo.user_cluster.clone(),
        clusters,
        lambda,
        theta_bar,
        eta,
        cross,
        interfered,
        gamma_floor: scenario.config.gamma_floor,
        shape_spread,
    })
}

/// `Î_k = Σ_{n∈B_k} P̄_n Tr(F_nᴴ Θ_{k,l̄_n} F_n)`.
pub fn interference_bound(scenario: &Scenario, control: &SubspaceControl, k: usize) -> f64 {
    let topo = &scenario.topology;
    topo.interferers[k]
        .iter()
        .map(|&n| {
            let theta = scenario.theta(k, topo.clusters[n].bs).expect("interferer edge");
            let f = &control.f[n];
            scenario.cluster_power(n) * trace_re(&(f.adjoint() * theta * f))
        })
        .sum()
}

/// `W_n = F_n F_nᴴ` for every cluster.
pub fn projectors(control: &SubspaceControl) -> Vec<CMatrix> {
    control.f.iter().map(crate::linalg::projector).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_at_five_percent() {
        let delta = (1.0f64 / 0.05).ln();
        let (sigma, a) = restriction_constants(delta);
        assert!((delta - 2.9957).abs() < 5e-5);
        assert!((sigma - 2.80434).abs() < 5e-5);
        assert!((a - 0.1272).abs() < 5e-5);
    }

    #[test]
    fn limit_as_epsilon_tends_to_one() {
        let delta = (1.0f64 / (1.0 - 1e-12)).ln();
        let (sigma, a) = restriction_constants(delta);
        assert!(delta < 1e-11);
        assert!((sigma - 1.0).abs() < 1e-5);
        assert!((a - 1.0).abs() < 1e-5);
    }

    #[test]
    fn singleton_cluster_constants() {
        let u = UserConstants::new(0.05, (20.0f64).ln(), 1, 2.0, 4.0, 0.5, 1.0);
        assert_eq!(u.c1, 0.0);
        assert!((u.c2 - 1.0).abs() < 1e-15);
        let e = eta(&[u.clone()], &[vec![0]]);
        assert!((e[0] - u.sigma * u.sigma).abs() < 1e-15);
    }
}
