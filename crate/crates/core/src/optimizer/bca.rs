//! Bisection over `γ` with a dual feasibility solver per step.

use serde::{Deserialize, Serialize};

use super::dual::{solve_fixed_gamma, DualOptions, FixedGammaOutcome, FixedGammaStatus};
use super::problem::QoSProblem;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, CMatrix, HermitianEigen};
use crate::precoding::SubspaceControl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcaOptions {
    pub epsilon_bisect: f64,
    pub max_doublings: usize,
    pub dual: DualOptions,
}

impl Default for BcaOptions {
    fn default() -> Self {
        Self {
            epsilon_bisect: 1e-3,
            max_doublings: 60,
            dual: DualOptions::default(),
        }
    }
}

/// One call of the fixed-`γ` solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub gamma: f64,
    pub status: FixedGammaStatus,
    pub dual_iterations: usize,
    /// Feasible `W` came from the rounded ergodic average.
    pub from_average: bool,
    /// `init`, `double` or `bisect`.
    pub phase: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcaResult {
    /// Extracted subspaces; `None` when `γ°` is infeasible.
    pub control: Option<SubspaceControl>,
    pub dims: Vec<usize>,
    pub gamma: f64,
    /// Bisection iterations, doubling excluded.
    pub iterations: usize,
    pub feasible: bool,
    /// `max_n ‖W_n − W_n²‖_F` of the returned `W`.
    pub tightness_residual: f64,
    pub gamma_floor: f64,
    /// First infeasible level found by doubling.
    pub gamma_upper: f64,
    pub w: Option<Vec<CMatrix>>,
    pub trace: Vec<BisectionStep>,
}

impl BcaResult {
    /// `ceil(log2(|γ̄° − γ°| / ε))`.
    pub fn iteration_bound(&self, epsilon: f64) -> usize {
        iteration_bound(self.gamma_upper - self.gamma_floor, epsilon)
    }
}

pub fn iteration_bound(width: f64, epsilon: f64) -> usize {
    if width <= epsilon {
        0
    } else {
        (width.abs() / epsilon).log2().ceil() as usize
    }
}

/// `max_n ‖W_n − W_n²‖_F`.
pub fn tightness_residual(w: &[CMatrix]) -> f64 {
    w.iter()
        .map(|wn| frobenius(&(wn - wn * wn)))
        .fold(0.0, f64::max)
}

/// `F_n` from the eigenvectors of `W_n` with eigenvalue above 1/2.
pub fn extract_control(w: &[CMatrix]) -> SubspaceControl {
    SubspaceControl::new(
        w.iter()
            .map(|wn| {
                let eig = HermitianEigen::new(wn);
                let s = eig.values.iter().take_while(|&&v| v > 0.5).count();
                eig.leading(s)
            })
            .collect(),
    )
}

/// Runs bisection between `γ°` and a doubled upper level.
pub fn bca(problem: &QoSProblem, opts: &BcaOptions) -> Result<BcaResult> {
    let floor = problem.gamma_floor;
    if !(floor >= 0.0) || !(opts.epsilon_bisect > 0.0) {
        return Err(Error::Config(format!(
            "need gamma_floor >= 0 and epsilon_bisect > 0, got {floor} and {}",
            opts.epsilon_bisect
        )));
    }
    let mut trace = Vec::new();
    let mut solve = |gamma: f64, phase: &str| -> FixedGammaOutcome {
        let out = solve_fixed_gamma(problem, gamma, &opts.dual);
        log::debug!("{phase} gamma={gamma:.6e} -> {:?} after {} iterations", out.status, out.iterations);
        trace.push(BisectionStep {
            gamma,
            status: out.status,
            dual_iterations: out.iterations,
            from_average: out.from_average,
            phase: phase.to_string(),
        });
        out
    };

    let first = solve(floor, "init");
    let first_ok = first.status.is_feasible();
    let Some(mut best_w) = first.w.filter(|_| first_ok) else {
        log::warn!("QoS floor {floor} is infeasible");
        return Ok(BcaResult {
            control: None,
            dims: Vec::new(),
            gamma: floor,
            iterations: 0,
            feasible: false,
            tightness_residual: f64::NAN,
            gamma_floor: floor,
            gamma_upper: floor,
            w: None,
            trace,
        });
    };

    let mut upper = floor.max(1.0);
    let mut doublings = 0;
    loop {
        let feasible = upper == floor || solve(upper, "double").status.is_feasible();
        if !feasible {
            break;
        }
        if doublings == opts.max_doublings {
            return Err(Error::Unbounded {
                doublings,
                gamma: upper,
            });
        }
        upper *= 2.0;
        doublings += 1;
    }

    let (mut lo, mut hi) = (floor, upper);
    let mut iterations = 0;
    let tol = opts.epsilon_bisect * (1.0 + 1e-12);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let out = solve(mid, "bisect");
        iterations += 1;
        match out.w {
            Some(w) if out.status == FixedGammaStatus::Feasible => {
                lo = mid;
                best_w = w;
            }
            _ => hi = mid,
        }
    }

    let control = extract_control(&best_w);
    Ok(BcaResult {
        dims: control.dims(),
        control: Some(control),
        gamma: lo,
        iterations,
        feasible: true,
        tightness_residual: tightness_residual(&best_w),
        gamma_floor: floor,
        gamma_upper: upper,
        w: Some(best_w),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_formula() {
        assert_eq!(iteration_bound(8.0, 0.5), 4);
        assert_eq!(iteration_bound(8.0, 0.3), 5);
        assert_eq!(iteration_bound(0.1, 0.5), 0);
    }

    use crate::optimizer::build_constants;
    use crate::optimizer::fixtures::{diag, single_user};
    use crate::optimizer::restriction_constants;
    use crate::scenario::{Cluster, Scenario};

    fn five_percent_a() -> f64 {
        restriction_constants((20f64).ln()).1
    }

    #[test]
    fn single_user_closed_form() {
        let a = five_percent_a();
        for (power, weight) in [(1.0, 1.0), (2.0, 4.0), (3.0, 0.5)] {
            let sc = single_user(CMatrix::identity(8, 8), power, weight, 0.05);
            let r = bca(&build_constants(&sc).unwrap(), &BcaOptions::default()).unwrap();
            let expect = a * 8.0 * power / weight;
            assert!(r.feasible);
            assert!((r.gamma - expect).abs() <= 1e-3, "{} vs {expect}", r.gamma);
            assert_eq!(r.iterations, r.iteration_bound(1e-3));
            assert_eq!(r.dims, vec![8]);
        }
    }

    #[test]
    fn orthogonal_clusters_decouple() {
        let top: Vec<f64> = (0..16).map(|i| if i < 8 { 2.0 } else { 0.0 }).collect();
        let bottom: Vec<f64> = top.iter().map(|v| 2.0 - v).collect();
        let sc = Scenario::from_links(
            crate::optimizer::fixtures::config(16),
            1,
            vec![Cluster { bs: 0, users: vec![0] }, Cluster { bs: 0, users: vec![1] }],
            vec![((0, 0), diag(&top)), ((1, 0), diag(&bottom))],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
            vec![0.05, 0.05],
        )
        .unwrap();
        let p = build_constants(&sc).unwrap();
        // each cluster alone: a·(M/λ)·λ·P/w with M/λ = 8, λ = 2
        let single = |w: f64| five_percent_a() * 16.0 / w;
        let expect = single(1.0).min(single(2.0));
        let r = bca(&p, &BcaOptions::default()).unwrap();
        assert!((r.gamma - expect).abs() <= 1e-3, "{} vs {expect}", r.gamma);
        assert_eq!(r.dims, vec![8, 8]);
    }

    #[test]
    fn infeasible_floor_is_reported() {
        let mut sc = single_user(CMatrix::identity(8, 8), 1.0, 1.0, 0.05);
        sc.config.gamma_floor = 5.0;
        let r = bca(&build_constants(&sc).unwrap(), &BcaOptions::default()).unwrap();
        assert!(!r.feasible);
        assert!(r.control.is_none());
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn unbounded_problem_is_an_error() {
        // ε → 1 drives a → 1 and c → 0; with zero noise term there is no upper limit
        let sc = single_user(CMatrix::identity(4, 4), 1.0, 1.0, 0.05);
        let mut p = build_constants(&sc).unwrap();
        p.users[0].c2 = 0.0;
        let opts = BcaOptions {
            max_doublings: 5,
            ..Default::default()
        };
        p.eta[0] = 0.0;
        assert!(matches!(bca(&p, &opts), Err(Error::Unbounded { doublings: 5, .. })));
    }

    #[test]
    fn projector_is_tight() {
        let mut w = CMatrix::zeros(3, 3);
        w[(0, 0)] = 1.0.into();
        assert_eq!(tightness_residual(&[w.clone()]), 0.0);
        w[(1, 1)] = 0.5.into();
        assert!((tightness_residual(&[w]) - 0.25).abs() < 1e-15);
    }
}
