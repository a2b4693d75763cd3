//! Inner precoders and the block-diagonalization baseline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_part, orthogonal_complement, orthonormal_columns, semi_unitary_defect, trace_re,
    vec_norm, CMatrix, CVector, HermitianEigen, C64,
};
use crate::scenario::Scenario;

/// Smallest-to-largest singular value ratio below which ZF refuses to invert.
pub const ZF_SINGULAR_RATIO: f64 = 1e-8;

pub const CONTAINER_KIND: &str = "subspace-control";

/// Per-cluster semi-unitary outer precoders `F_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceControl {
    pub f: Vec<CMatrix>,
}

#[derive(Serialize, Deserialize)]
struct ControlMeta {
    antennas: usize,
    dims: Vec<usize>,
    #[serde(default)]
    extra: serde_json::Value,
}

impl SubspaceControl {
    pub fn new(f: Vec<CMatrix>) -> Self {
        Self { f }
    }

    /// `F_n = I_M` for every cluster.
    pub fn identity(num_clusters: usize, m: usize) -> Self {
        Self {
            f: vec![CMatrix::identity(m, m); num_clusters],
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.f.iter().map(|f| f.ncols()).collect()
    }

    pub fn num_clusters(&self) -> usize {
        self.f.len()
    }

    /// Largest `‖F_nᴴ F_n − I‖_F`.
    pub fn max_unitarity_defect(&self) -> f64 {
        self.f.iter().map(semi_unitary_defect).fold(0.0, f64::max)
    }

    /// Checks semi-unitarity and `|U_n| ≤ S_n ≤ M`.
    pub fn validate(&self, scenario: &Scenario, tol: f64) -> Result<()> {
        let topo = &scenario.topology;
        if self.f.len() != topo.num_clusters() {
            return Err(Error::Dimension(format!(
                "{} subspaces for {} clusters",
                self.f.len(),
                topo.num_clusters()
            )));
        }
        let m = scenario.antennas();
        for (n, f) in self.f.iter().enumerate() {
            if f.nrows() != m || f.ncols() < topo.cluster_size(n) || f.ncols() > m {
                return Err(Error::Dimension(format!(
                    "F_{n} is {}x{} for a cluster of {} users and M = {m}",
                    f.nrows(),
                    f.ncols(),
                    topo.cluster_size(n)
                )));
            }
            let d = semi_unitary_defect(f);
            if d > tol {
                return Err(Error::Numerical(format!("F_{n} is not semi-unitary (defect {d:e})")));
            }
        }
        Ok(())
    }

    pub fn to_container(&self, extra: serde_json::Value) -> Result<Container> {
        let meta = ControlMeta {
            antennas: self.f.first().map_or(0, |f| f.nrows()),
            dims: self.dims(),
            extra,
        };
        let mut c = Container::new(CONTAINER_KIND, serde_json::to_value(meta)?);
        for (n, f) in self.f.iter().enumerate() {
            c.push(format!("F/{n}"), f.clone());
        }
        Ok(c)
    }

    /// Reads a subspace control from a container of kind `subspace-control`
    /// or any container carrying `F/{n}` matrices and a `dims` list.
    pub fn from_container(c: &Container) -> Result<Self> {
        let meta: ControlMeta = c.meta_as().or_else(|_| {
            let dims = c
                .meta
                .get("dims")
                .cloned()
                .ok_or_else(|| Error::Format(format!("{} container has no subspace dims", c.kind)))?;
            Ok::<_, Error>(ControlMeta {
                antennas: 0,
                dims: serde_json::from_value(dims)?,
                extra: serde_json::Value::Null,
            })
        })?;
        let f = (0..meta.dims.len())
            .map(|n| c.require(&format!("F/{n}")).cloned())
            .collect::<Result<Vec<_>>>()?;
        for (n, (fm, &s)) in f.iter().zip(&meta.dims).enumerate() {
            if fm.ncols() != s {
                return Err(Error::Format(format!("F/{n} has {} columns, header says {s}", fm.ncols())));
            }
        }
        Ok(Self { f })
    }

    pub fn write(&self, path: impl AsRef<Path>, extra: serde_json::Value) -> Result<()> {
        self.to_container(extra)?.write(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}

/// Per-user transmit powers with the derived cluster totals `P̄_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub per_user: Vec<f64>,
    pub per_cluster: Vec<f64>,
}

impl PowerAllocation {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        if scenario.powers.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Config("every user power must be positive".into()));
        }
        let per_cluster = (0..scenario.topology.num_clusters())
            .map(|n| scenario.cluster_power(n))
            .collect();
        Ok(Self {
            per_user: scenario.powers.clone(),
            per_cluster,
        })
    }
}

/// `h̃ = F_nᴴ h`.
pub fn effective_channel(f: &CMatrix, h: &CVector) -> Result<CVector> {
    if f.nrows() != h.len() {
        return Err(Error::Dimension(format!(
            "F has {} rows, channel has {} entries",
            f.nrows(),
            h.len()
        )));
    }
    Ok(f.adjoint() * h)
}

/// Stacks effective channels as the rows `h̃_kᴴ` of a `|U_n| × S_n` matrix.
pub fn stack_effective(rows: &[CVector]) -> CMatrix {
    let s = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(rows.len(), s, |k, j| rows[k][j].conj())
}

fn normalize_columns(mut g: CMatrix) -> CMatrix {
    for mut col in g.column_iter_mut() {
        let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            col.unscale_mut(n);
        }
    }
    g
}

/// Ratio of the smallest to the largest singular value.
pub fn singular_ratio(htilde: &CMatrix) -> f64 {
    let sv = htilde.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

/// Zero-forcing inner precoder for one cluster.
///
/// `htilde` holds the rows `h̃_kᴴ`. Column `k` of the result is the unit-norm
/// projection of `h̃_k` onto the orthogonal complement of the other users'
/// effective channels.
pub fn zf_inner(htilde: &CMatrix, cluster: usize) -> Result<CMatrix> {
    let (u, s) = htilde.shape();
    if u > s {
        return Err(Error::Dimension(format!(
            "cluster {cluster}: {u} users exceed subspace dimension {s}"
        )));
    }
    if u == 0 {
        return Ok(CMatrix::zeros(s, 0));
    }
    let ratio = singular_ratio(htilde);
    if !(ratio >= ZF_SINGULAR_RATIO) {
        return Err(Error::Singular { cluster, ratio });
    }
    // H̃ᴴ = Q R, so H̃ᴴ (H̃ H̃ᴴ)⁻¹ = Q R⁻ᴴ.
    let qr = htilde.adjoint().qr();
    let (q, r) = (qr.q(), qr.r());
    let rinv_h = r
        .adjoint()
        .solve_lower_triangular(&CMatrix::identity(u, u))
        .ok_or_else(|| Error::Singular { cluster, ratio })?;
    Ok(normalize_columns(q * rinv_h))
}

/// Regularized ZF: unit-norm columns of `H̃ᴴ (H̃ H̃ᴴ + α I)⁻¹`.
pub fn rzf_inner(htilde: &CMatrix, alpha: f64) -> Result<CMatrix> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("RZF regularization must be positive, got {alpha}")));
    }
    let u = htilde.nrows();
    let mut gram = htilde * htilde.adjoint();
    for i in 0..u {
        gram[(i, i)] += C64::new(alpha, 0.0);
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("regularized Gram matrix is not positive definite".into()))?;
    Ok(normalize_columns(htilde.adjoint() * chol.inverse()))
}

/// Default RZF regularization `K0 / (S0 P)`.
pub fn default_rzf_alpha(users_per_cell: usize, cell_dims: usize, power: f64) -> f64 {
    users_per_cell as f64 / (cell_dims as f64 * power)
}

/// Inner precoder family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum InnerKind {
    Zf,
    /// `None` selects the default `K0 / (S0 P)` per cell.
    Rzf(Option<f64>),
}

/// Trace-normalized direct covariance `Θ°_n` (`Tr = M`), averaged over the
/// cluster members.
pub fn normalized_direct(scenario: &Scenario, n: usize) -> CMatrix {
    let c = &scenario.topology.clusters[n];
    let m = scenario.antennas() as f64;
    let mut acc = CMatrix::zeros(scenario.antennas(), scenario.antennas());
    for &k in &c.users {
        let theta = scenario.theta(k, c.bs).expect("direct edge exists");
        let tr = trace_re(theta);
        if tr > 0.0 {
            acc += theta.scale(m / tr);
        }
    }
    hermitian_part(&acc.unscale(c.users.len() as f64))
}

/// What to do when the interference null space is too small.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BdShortfall {
    #[default]
    Error,
    /// Protect only the strongest interference directions that fit.
    Truncate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BdOptions {
    /// Eigenvalues within this many dB of the largest count as dominant.
    pub eig_threshold_db: f64,
    /// Explicit `S_n`; `None` uses `min(null dim, |U_n| + extra_dims)`.
    pub dims: Option<Vec<usize>>,
    pub extra_dims: usize,
    pub shortfall: BdShortfall,
}

impl Default for BdOptions {
    fn default() -> Self {
        Self {
            eig_threshold_db: -20.0,
            dims: None,
            extra_dims: 2,
            shortfall: BdShortfall::Error,
        }
    }
}

/// Dominant eigenvectors of `theta` (eigenvalues strictly above `λ_max·10^(db/10)`)
/// and their eigenvalues.
pub fn dominant_eigenvectors(theta: &CMatrix, db: f64) -> (CMatrix, Vec<f64>) {
    let eig = HermitianEigen::new(theta);
    let max = eig.max();
    if max <= 0.0 {
        return (CMatrix::zeros(theta.nrows(), 0), Vec::new());
    }
    let cut = max * 10f64.powf(db / 10.0);
    let r = eig.values.iter().filter(|&&v| v > cut).count();
    (eig.leading(r), eig.values[..r].to_vec())
}

/// BD output with the protected directions kept for residual checks.
#[derive(Debug, Clone)]
pub struct BdResult {
    pub control: SubspaceControl,
    /// Orthonormal basis of the protected interference span per cluster.
    pub protected: Vec<CMatrix>,
    /// Clusters whose protected span was truncated.
    pub truncated: Vec<usize>,
}

/// Approximate block diagonalization (per-group processing).
///
/// `F_n` spans the top eigenvectors of `Θ°_n` restricted to the null space of
/// the dominant eigenvectors of every interfered user's cross covariance.
pub fn bd_prebeamforming(scenario: &Scenario, opts: &BdOptions) -> Result<BdResult> {
    let topo = &scenario.topology;
    let m = scenario.antennas();
    let mut f = Vec::with_capacity(topo.num_clusters());
    let mut protected = Vec::with_capacity(topo.num_clusters());
    let mut truncated = Vec::new();
    for n in 0..topo.num_clusters() {
        let size = topo.cluster_size(n);
        let bs = topo.clusters[n].bs;
        let mut dirs: Vec<CVector> = Vec::new();
        let mut weighted = CMatrix::zeros(m, m);
        for &k in &topo.interfered[n] {
            let theta = scenario.theta(k, bs).expect("interfered users have an edge");
            let (u, vals) = dominant_eigenvectors(theta, opts.eig_threshold_db);
            for (j, v) in vals.iter().enumerate() {
                let col: CVector = u.column(j).into_owned();
                weighted += (&col * col.adjoint()).scale(*v);
                dirs.push(col);
            }
        }
        let stacked = CMatrix::from_fn(m, dirs.len(), |r, c| dirs[c][r]);
        let mut q = orthonormal_columns(&stacked, 1e-8);
        let (wanted, required) = match &opts.dims {
            Some(d) => {
                let s = *d.get(n).ok_or_else(|| {
                    Error::Config(format!("BD dims list has no entry for cluster {n}"))
                })?;
                if s < size || s > m {
                    return Err(Error::Config(format!(
                        "BD dimension {s} for cluster {n} outside [{size}, {m}]"
                    )));
                }
                (s, s)
            }
            None => ((size + opts.extra_dims).min(m), size),
        };
        if m - q.ncols() < required {
            match opts.shortfall {
                BdShortfall::Error => {
                    return Err(Error::BdInfeasible {
                        cluster: n,
                        available: m - q.ncols(),
                        required,
                    })
                }
                BdShortfall::Truncate => {
                    let keep = m - wanted.min(m);
                    q = HermitianEigen::new(&weighted).leading(keep);
                    truncated.push(n);
                }
            }
        }
        let null = orthogonal_complement(&q, m);
        let s = wanted.min(null.ncols());
        let shape = normalized_direct(scenario, n);
        let reduced = null.adjoint() * &shape * &null;
        let eig = HermitianEigen::new(&reduced);
        f.push(&null * eig.leading(s));
        protected.push(q);
    }
    Ok(BdResult {
        control: SubspaceControl { f },
        protected,
        truncated,
    })
}

/// Largest `‖F_nᴴ Q_n‖_F` over clusters.
pub fn bd_residual(result: &BdResult) -> f64 {
    result
        .control
        .f
        .iter()
        .zip(&result.protected)
        .map(|(f, q)| crate::linalg::frobenius(&(f.adjoint() * q)))
        .fold(0.0, f64::max)
}

/// Unit-norm check on composite columns `F_n g_k`.
pub fn composite_column_norms(f: &CMatrix, g: &CMatrix) -> Vec<f64> {
    let fg = f * g;
    fg.column_iter()
        .map(|c| vec_norm(&c.into_owned()))
        .collect()
}
