//! One-ring spatial correlation for a half-wavelength uniform linear array.
//!
//! `[Θ]_{i,m} = ψ̄ ∫_{φmin}^{φmax} exp(jπ (i − m) sin φ) dφ`, with `ψ̄` chosen so
//! that `Tr Θ = M L`. The integral is evaluated with composite Gauss–Legendre
//! quadrature; the panel count grows with the array so that each panel sees
//! at most about two oscillations of the integrand at the largest lag.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{effective_rank, CMatrix, HermitianEigen, C64};

const NODES_PER_PANEL: usize = 16;

/// A per-link spatial covariance `Θ_{k,l}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCovariance {
    pub theta: CMatrix,
    pub pathloss: f64,
    pub rank: usize,
}

impl SpatialCovariance {
    /// Wraps a matrix, deriving `L = Tr Θ / M` and the effective rank.
    pub fn from_matrix(theta: CMatrix, rank_threshold: f64) -> Self {
        let m = theta.nrows().max(1);
        let pathloss = crate::linalg::trace_re(&theta) / m as f64;
        let eig = HermitianEigen::new(&theta);
        let rank = effective_rank(&eig.values, rank_threshold);
        Self {
            theta,
            pathloss,
            rank,
        }
    }

    pub fn antennas(&self) -> usize {
        self.theta.nrows()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            x = 0.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre nodes/weights on `[a, b]`.
pub fn composite_rule(a: f64, b: f64, panels: usize, per_panel: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(per_panel);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + 0.5 * h * xi, 0.5 * h * wi));
        }
    }
    out
}

fn panel_count(min_nodes: usize, antennas: usize, width: f64) -> usize {
    let by_budget = min_nodes.div_ceil(NODES_PER_PANEL);
    // π·d·|Δ sin φ| ≤ π·d·Δφ radians of phase at lag d.
    let cycles = (antennas.saturating_sub(1)) as f64 * width / 2.0;
    by_budget.max((cycles / 2.0).ceil() as usize).max(1)
}

/// Builds `Θ` for the window `[phi_min, phi_max]`.
///
/// A zero-width window is the single-path limit `Θ = L a aᴴ` with
/// `a_i = exp(jπ i sin φ0)`.
pub fn build_correlation(
    phi_min: f64,
    phi_max: f64,
    pathloss: f64,
    antennas: usize,
    min_nodes: usize,
    rank_threshold: f64,
) -> Result<SpatialCovariance> {
    if antennas == 0 {
        return Err(Error::Config("antenna count must be at least 1".into()));
    }
    if !(phi_min <= phi_max) || !phi_min.is_finite() || !phi_max.is_finite() {
        return Err(Error::Config(format!(
            "invalid angular window [{phi_min}, {phi_max}]"
        )));
    }
    if !(pathloss >= 0.0) {
        return Err(Error::Config(format!("negative path gain {pathloss}")));
    }
    let m = antennas;
    // lags[d] = E[h_{i+d} h_i^*] / L
    let lags: Vec<C64> = if phi_max == phi_min {
        let s = phi_min.sin();
        (0..m).map(|d| C64::from_polar(1.0, PI * d as f64 * s)).collect()
    } else {
        let rule = composite_rule(
            phi_min,
            phi_max,
            panel_count(min_nodes, m, phi_max - phi_min),
            NODES_PER_PANEL,
        );
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        (0..m)
            .map(|d| {
                if d == 0 {
                    return C64::new(1.0, 0.0);
                }
                let mut acc = C64::new(0.0, 0.0);
                for &(phi, w) in &rule {
                    acc += C64::from_polar(w, PI * d as f64 * phi.sin());
                }
                acc / total
            })
            .collect()
    };
    let theta = CMatrix::from_fn(m, m, |i, k| {
        let z = if i >= k { lags[i - k] } else { lags[k - i].conj() };
        z * pathloss
    });
    let eig = HermitianEigen::new(&theta);
    Ok(SpatialCovariance {
        rank: effective_rank(&eig.values, rank_threshold),
        theta,
        pathloss,
    })
}

/// Uniform angular window description stored alongside each link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularWindow {
    pub phi_min: f64,
    pub phi_max: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, hermitian_defect, trace_re};

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            // degree 2n-1 exact
            let deg = 2 * n - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn diagonal_equals_pathloss_and_trace() {
        let c = build_correlation(-0.3, 0.4, 0.25, 12, 64, 1e-6).unwrap();
        for i in 0..12 {
            assert!((c.theta[(i, i)].re - 0.25).abs() < 1e-15);
            assert!(c.theta[(i, i)].im.abs() < 1e-15);
        }
        assert!((trace_re(&c.theta) - 12.0 * 0.25).abs() < 1e-9 * 3.0);
        assert!(hermitian_defect(&c.theta) < 1e-14);
        let eig = HermitianEigen::new(&c.theta);
        assert!(eig.min() > -1e-10);
    }

    #[test]
    fn zero_spread_is_rank_one_steering() {
        let phi0 = 0.7;
        let c = build_correlation(phi0, phi0, 2.0, 6, 64, 1e-6).unwrap();
        assert_eq!(c.rank, 1);
        let a = crate::linalg::CVector::from_fn(6, |i, _| C64::from_polar(1.0, PI * i as f64 * phi0.sin()));
        let expect = (&a * a.adjoint()).scale(2.0);
        assert!(frobenius(&(expect - &c.theta)) < 1e-12);
    }

    /// Independent composite-Simpson oracle for one off-diagonal entry.
    fn simpson_lag(phi_min: f64, phi_max: f64, lag: f64, intervals: usize) -> C64 {
        let h = (phi_max - phi_min) / intervals as f64;
        let f = |phi: f64| C64::from_polar(1.0, PI * lag * phi.sin());
        let mut acc = f(phi_min) + f(phi_max);
        for i in 1..intervals {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += f(phi_min + i as f64 * h) * w;
        }
        acc * (h / 3.0) / (phi_max - phi_min)
    }

    #[test]
    fn two_antenna_entry_matches_simpson() {
        let half = PI / 12.0;
        let c = build_correlation(-half, half, 1.0, 2, 64, 1e-6).unwrap();
        // [Θ]_{1,2} (1-based) has lag i - m = -1.
        let oracle = simpson_lag(-half, half, -1.0, 640);
        assert!((c.theta[(0, 1)] - oracle).norm() < 1e-8);
        // symmetric window: the integral is real
        assert!(c.theta[(0, 1)].im.abs() < 1e-14);
    }

    #[test]
    fn large_array_matches_simpson() {
        let c = build_correlation(0.1, 0.1 + PI / 6.0, 1.0, 128, 64, 1e-6).unwrap();
        for lag in [1usize, 17, 64, 127] {
            let oracle = simpson_lag(0.1, 0.1 + PI / 6.0, lag as f64, 40_000);
            assert!((c.theta[(lag, 0)] - oracle).norm() < 1e-10, "lag {lag}");
        }
    }

    #[test]
    fn rejects_reversed_window() {
        assert!(build_correlation(0.5, 0.1, 1.0, 4, 64, 1e-6).is_err());
        assert!(build_correlation(0.0, 0.1, 1.0, 0, 64, 1e-6).is_err());
    }
}
