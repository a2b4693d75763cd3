//! Lagrange dual of the relaxed problem at a fixed `γ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::QoSProblem;
use crate::linalg::{hermitian_part, CMatrix, HermitianEigen};

/// Relative width of the band of eigenvalues treated as zero.
pub const TIE_TOL: f64 = 1e-12;

/// Dual multipliers `μ ∈ R₊^K`, `ν ∈ R₊^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl DualPoint {
    pub fn zeros(users: usize, clusters: usize) -> Self {
        Self {
            mu: vec![0.0; users],
            nu: vec![0.0; clusters],
        }
    }
}

/// `A_n = Σ_{k∈U_n} μ_k a_k Θ̄°_n − γ Σ_{k∈Ū_n} μ_k Θ̄_{k,n} + ν_n Θ̄°_n`.
pub fn assemble_dual_matrix(problem: &QoSProblem, dual: &DualPoint, gamma: f64, n: usize) -> CMatrix {
    let own: f64 = problem.clusters[n]
        .iter()
        .map(|&k| dual.mu[k] * problem.users[k].a)
        .sum::<f64>()
        + dual.nu[n];
    let mut a = problem.theta_bar[n].scale(own);
    for &(k, idx) in &problem.interfered[n] {
        if dual.mu[k] != 0.0 {
            a -= problem.cross[k][idx].matrix.scale(gamma * dual.mu[k]);
        }
    }
    hermitian_part(&a)
}

/// Closed-form maximizer of `Tr(A W)` over `0 ⪯ W ⪯ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerMax {
    /// Projector onto the strictly positive eigenspace.
    pub w: CMatrix,
    /// Orthonormal basis of that eigenspace.
    pub basis: CMatrix,
    /// Sum of the positive eigenvalues.
    pub value: f64,
}

pub fn inner_maximizer(a: &CMatrix) -> InnerMax {
    let eig = HermitianEigen::new(a);
    let scale = eig.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let keep = eig.values.iter().take_while(|&&v| v > TIE_TOL * scale).count();
    let basis = eig.leading(keep);
    InnerMax {
        w: crate::linalg::projector(&basis),
        value: eig.values[..keep].iter().sum(),
        basis,
    }
}

/// Subgradient of `J` at the dual point that produced `w`: `(∂μ, ∂ν)`.
pub fn dual_subgradient(problem: &QoSProblem, gamma: f64, w: &[CMatrix]) -> (Vec<f64>, Vec<f64>) {
    let dmu = (0..problem.num_users())
        .map(|k| problem.user_margin(k, w, gamma))
        .collect();
    let dnu = (0..problem.num_clusters())
        .map(|n| problem.cluster_margin(n, &w[n]))
        .collect();
    (dmu, dnu)
}

/// Maximizers of every `A_n` at a dual point.
pub fn inner_maximizers(problem: &QoSProblem, dual: &DualPoint, gamma: f64) -> Vec<InnerMax> {
    (0..problem.num_clusters())
        .into_par_iter()
        .map(|n| inner_maximizer(&assemble_dual_matrix(problem, dual, gamma, n)))
        .collect()
}

/// `J(μ, ν) − γ = Σ_n λ₊(A_n) − Σ_k μ_k c_k(γ) − Σ_n ν_n η_n`.
pub fn dual_excess(problem: &QoSProblem, dual: &DualPoint, gamma: f64, inner: &[InnerMax]) -> f64 {
    let lagr: f64 = inner.iter().map(|i| i.value).sum();
    let cu: f64 = problem
        .users
        .iter()
        .zip(&dual.mu)
        .map(|(u, m)| m * u.c(gamma))
        .sum();
    let cn: f64 = problem.eta.iter().zip(&dual.nu).map(|(e, v)| e * v).sum();
    lagr - cu - cn
}

/// Dual function `J(μ, ν)` with the `γ` offset of the relaxed problem.
pub fn dual_value(problem: &QoSProblem, dual: &DualPoint, gamma: f64) -> f64 {
    let inner = inner_maximizers(problem, dual, gamma);
    gamma + dual_excess(problem, dual, gamma, &inner)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualOptions {
    pub max_iterations: usize,
    /// Constraint tolerance per user; the total is this times `K`.
    pub feas_tol_per_user: f64,
    /// Certificate margin per unit of `1 + γ`.
    pub cert_margin: f64,
    /// Period (in iterations) of the rounded ergodic-average check.
    pub average_every: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            feas_tol_per_user: 1e-6,
            cert_margin: 1e-9,
            average_every: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedGammaStatus {
    Feasible,
    Infeasible,
    Inconclusive,
}

impl FixedGammaStatus {
    pub fn is_feasible(self) -> bool {
        self == FixedGammaStatus::Feasible
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedGammaOutcome {
    pub status: FixedGammaStatus,
    /// Feasible projectors, when found.
    pub w: Option<Vec<CMatrix>>,
    /// Dual point that certifies infeasibility, when found.
    pub certificate: Option<DualPoint>,
    pub iterations: usize,
    /// Smallest `J − γ` seen over the run.
    pub best_excess: f64,
    /// Largest smallest-margin over the primal candidates tried.
    pub best_margin: f64,
    /// The accepted `W` is the rounded ergodic average rather than an iterate.
    pub from_average: bool,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i as f64 + 1.0);
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Per-constraint normalizers so every subgradient entry is of order one.
fn scales(problem: &QoSProblem, gamma: f64) -> Vec<f64> {
    let users = (0..problem.num_users()).map(|k| {
        let u = &problem.users[k];
        let n = problem.user_cluster[k];
        let signal = u.a * crate::linalg::trace_re(&problem.theta_bar[n]);
        let leak: f64 = problem.cross[k]
            .iter()
            .map(|c| gamma * crate::linalg::trace_re(&c.matrix))
            .sum();
        (signal + leak + u.c(gamma)).max(1e-12)
    });
    let clusters = problem
        .theta_bar
        .iter()
        .map(|t| crate::linalg::trace_re(t).max(1e-12));
    users.chain(clusters).collect()
}

fn split(problem: &QoSProblem, p: &[f64], s: &[f64]) -> DualPoint {
    let k = problem.num_users();
    DualPoint {
        mu: (0..k).map(|i| p[i] / s[i]).collect(),
        nu: (k..p.len()).map(|i| p[i] / s[i]).collect(),
    }
}

/// Projectors onto eigenvectors of `W_n` with eigenvalue above 1/2.
pub fn round_projectors(w: &[CMatrix]) -> Vec<CMatrix> {
    w.iter()
        .map(|wn| {
            let eig = HermitianEigen::new(wn);
            let keep = eig.values.iter().take_while(|&&v| v > 0.5).count();
            crate::linalg::projector(&eig.leading(keep))
        })
        .collect()
}

/// Decides feasibility of the relaxed problem at a fixed `γ`.
///
/// The dual is homogeneous at fixed `γ`, so the multipliers are searched on
/// the simplex of normalized constraint weights. Each iterate's closed-form
/// maximizer is a projector and is tested directly; the rounded ergodic
/// average is tested periodically. A negative dual excess certifies
/// infeasibility.
pub fn solve_fixed_gamma(problem: &QoSProblem, gamma: f64, opts: &DualOptions) -> FixedGammaOutcome {
    let k = problem.num_users();
    let dim = k + problem.num_clusters();
    let feas_tol = opts.feas_tol_per_user * k.max(1) as f64;
    let cert = opts.cert_margin * (1.0 + gamma);
    let s = scales(problem, gamma);
    let mut p = vec![1.0 / dim as f64; dim];
    let mut avg: Vec<CMatrix> = problem
        .theta_bar
        .iter()
        .map(|t| CMatrix::zeros(t.nrows(), t.ncols()))
        .collect();
    let mut weight = 0.0;
    let mut step_scale = None;
    let mut best_excess = f64::INFINITY;
    let mut best_margin = f64::NEG_INFINITY;
    let accept = |w: Vec<CMatrix>, margin: f64, t: usize, best_excess: f64, from_average: bool| FixedGammaOutcome {
        status: FixedGammaStatus::Feasible,
        w: Some(w),
        certificate: None,
        iterations: t,
        best_excess,
        best_margin: margin,
        from_average,
    };

    for t in 1..=opts.max_iterations {
        let dual = split(problem, &p, &s);
        let inner = inner_maximizers(problem, &dual, gamma);
        let excess = dual_excess(problem, &dual, gamma, &inner);
        best_excess = best_excess.min(excess);
        if excess < -cert {
            return FixedGammaOutcome {
                status: FixedGammaStatus::Infeasible,
                w: None,
                certificate: Some(dual),
                iterations: t,
                best_excess,
                best_margin,
                from_average: false,
            };
        }
        let w: Vec<CMatrix> = inner.into_iter().map(|i| i.w).collect();
        let (dmu, dnu) = dual_subgradient(problem, gamma, &w);
        let margin = dmu.iter().chain(&dnu).fold(f64::INFINITY, |m, &v| m.min(v));
        best_margin = best_margin.max(margin);
        if margin >= -feas_tol {
            return accept(w, margin, t, best_excess, false);
        }
        let g: Vec<f64> = dmu.iter().chain(&dnu).zip(&s).map(|(v, s)| v / s).collect();
        let c = *step_scale.get_or_insert_with(|| 1.0 / (1.0 + g.iter().map(|x| x * x).sum::<f64>().sqrt()));
        let alpha = c / (t as f64).sqrt();
        for (a, wn) in avg.iter_mut().zip(&w) {
            *a += wn.scale(alpha);
        }
        weight += alpha;
        if t % opts.average_every == 0 {
            let mean: Vec<CMatrix> = avg.iter().map(|a| a.unscale(weight)).collect();
            let rounded = round_projectors(&mean);
            let m = problem.min_margin(&rounded, gamma);
            best_margin = best_margin.max(m);
            if m >= -feas_tol {
                return accept(rounded, m, t, best_excess, true);
            }
        }
        let stepped: Vec<f64> = p.iter().zip(&g).map(|(p, g)| p - alpha * g).collect();
        p = project_simplex(&stepped);
    }
    log::warn!(
        "dual solver hit {} iterations at gamma {gamma:.6e}: best excess {best_excess:.3e}, best margin {best_margin:.3e}; treating as infeasible",
        opts.max_iterations
    );
    FixedGammaOutcome {
        status: FixedGammaStatus::Inconclusive,
        w: None,
        certificate: None,
        iterations: opts.max_iterations,
        best_excess,
        best_margin,
        from_average: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, trace_product_re, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_inner_step() {
        let a = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]));
        let r = inner_maximizer(&a);
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!((r.w[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(r.w[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn negative_definite_gives_zero() {
        let a = CMatrix::identity(3, 3).scale(-2.0);
        let r = inner_maximizer(&a);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.basis.ncols(), 0);
        assert!(crate::linalg::frobenius(&r.w) == 0.0);
    }

    #[test]
    fn ties_are_excluded() {
        let a = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(2.0, 0.0),
            C64::new(1e-13, 0.0),
            C64::new(0.0, 0.0),
        ]));
        assert_eq!(inner_maximizer(&a).basis.ncols(), 1);
    }

    #[test]
    fn random_inner_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = CMatrix::from_fn(4, 4, |_, _| complex_gaussian(&mut rng, 1)[0]);
        let a = hermitian_part(&g);
        let r = inner_maximizer(&a);
        let pos: f64 = HermitianEigen::new(&a).values.iter().filter(|v| **v > 0.0).sum();
        assert!((trace_product_re(&a, &r.w) - pos).abs() < 1e-10);
    }

    fn hand_problem(a: f64) -> QoSProblem {
        use super::super::problem::{CrossTerm, UserConstants};
        let mut u = UserConstants::new(0.05, 1.0, 1, 1.0, 1.0, 1.0, 1.0);
        u.a = a;
        let d = |x: f64, y: f64| {
            CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(x, 0.0), C64::new(y, 0.0)]))
        };
        let mut cross = CMatrix::zeros(2, 2);
        cross[(0, 0)] = C64::new(0.2, 0.0);
        cross[(0, 1)] = C64::new(0.0, 0.1);
        cross[(1, 0)] = C64::new(0.0, -0.1);
        cross[(1, 1)] = C64::new(0.3, 0.0);
        QoSProblem {
            antennas: 2,
            users: vec![u.clone(), u],
            user_cluster: vec![0, 1],
            clusters: vec![vec![0], vec![1]],
            lambda: vec![1.0, 1.0],
            theta_bar: vec![d(1.0, 0.5), d(0.5, 1.0)],
            eta: vec![1.0, 1.0],
            cross: vec![
                Vec::new(),
                vec![CrossTerm {
                    cluster: 0,
                    matrix: cross,
                }],
            ],
            interfered: vec![vec![(1, 0)], Vec::new()],
            gamma_floor: 0.0,
            shape_spread: 0.0,
        }
    }

    #[test]
    fn dual_matrix_by_hand() {
        let p = hand_problem(0.2);
        let dual = DualPoint {
            mu: vec![2.0, 3.0],
            nu: vec![0.5, 0.0],
        };
        // (2·0.2 + 0.5)·diag(1, 0.5) − 0.4·3·cross
        let a = assemble_dual_matrix(&p, &dual, 0.4, 0);
        let expect = [[C64::new(0.66, 0.0), C64::new(0.0, -0.12)], [C64::new(0.0, 0.12), C64::new(0.09, 0.0)]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((a[(r, c)] - expect[r][c]).norm() < 1e-14, "({r}, {c})");
            }
        }
        // cluster 1 carries no interferers: 3·0.2·diag(0.5, 1)
        let b = assemble_dual_matrix(&p, &dual, 0.4, 1);
        assert!((b[(0, 0)].re - 0.3).abs() < 1e-14 && (b[(1, 1)].re - 0.6).abs() < 1e-14);
    }

    #[test]
    fn subgradient_inequality() {
        let sc = crate::optimizer::fixtures::two_cells(4, 6, 0.2);
        let p = crate::optimizer::build_constants(&sc).unwrap();
        let gamma = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut point = || DualPoint {
            mu: (0..2).map(|_| rng.random_range(0.0..2.0)).collect(),
            nu: (0..2).map(|_| rng.random_range(0.0..2.0)).collect(),
        };
        for _ in 0..50 {
            let d = point();
            let e = point();
            let w: Vec<CMatrix> = inner_maximizers(&p, &d, gamma).into_iter().map(|i| i.w).collect();
            let (gm, gn) = dual_subgradient(&p, gamma, &w);
            let lin: f64 = gm.iter().zip(e.mu.iter().zip(&d.mu)).map(|(g, (x, y))| g * (x - y)).sum::<f64>()
                + gn.iter().zip(e.nu.iter().zip(&d.nu)).map(|(g, (x, y))| g * (x - y)).sum::<f64>();
            let lhs = dual_value(&p, &e, gamma);
            let rhs = dual_value(&p, &d, gamma) + lin;
            assert!(lhs >= rhs - 1e-9 * (1.0 + lhs.abs()), "{lhs} < {rhs}");
        }
    }

    #[test]
    fn certificates_are_valid() {
        let sc = crate::optimizer::fixtures::two_cells(5, 12, 0.2);
        let p = crate::optimizer::build_constants(&sc).unwrap();
        let out = solve_fixed_gamma(&p, 1e3, &DualOptions::default());
        assert_eq!(out.status, FixedGammaStatus::Infeasible);
        let cert = out.certificate.unwrap();
        assert!(dual_value(&p, &cert, 1e3) < 1e3);
        let ok = solve_fixed_gamma(&p, 0.0, &DualOptions::default());
        assert!(ok.status.is_feasible());
        assert!(p.min_margin(ok.w.as_ref().unwrap(), 0.0) >= -2e-6);
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let q = project_simplex(&[2.0, 0.0, -1.0]);
        assert_eq!(q, vec![1.0, 0.0, 0.0]);
        let r = project_simplex(&[0.3, 0.1]);
        assert!((r[0] - 0.6).abs() < 1e-15 && (r[1] - 0.4).abs() < 1e-15);
    }
}
