//! Rank-deficient OAS covariance estimation from a handful of samples.
//!
//! The samples span an `R'`-dimensional subspace with `R' ≤ Tp`. An
//! orthonormal basis `U` of that span is found by Gram–Schmidt, the samples
//! are expressed in it, the small `R' × R'` covariance is shrunk toward a
//! scaled identity with the OAS coefficient, and the result is lifted back as
//! `U Σ̂ Uᴴ`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, trace_re, vec_norm, CMatrix, CVector, C64};
use crate::rng;
use crate::scenario::{ChannelSampler, Scenario};

/// Relative norm below which a Gram–Schmidt residual is treated as zero.
pub const GS_DROP_TOL: f64 = 1e-10;

pub const ESTIMATOR_NAME: &str = "rank-deficient-oas";

/// `Tp` channel samples of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<CVector>,
    /// `(user, bs)` the samples belong to, when known.
    pub link: Option<(usize, usize)>,
}

impl SampleSet {
    pub fn new(samples: Vec<CVector>) -> Result<Self> {
        let dim = samples
            .first()
            .map(|s| s.len())
            .ok_or_else(|| Error::Config("a sample set needs at least one sample".into()))?;
        if samples.iter().any(|s| s.len() != dim) {
            return Err(Error::Dimension("samples have different lengths".into()));
        }
        Ok(Self { samples, link: None })
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }
}

/// Orthonormal basis of the sample span (classical Gram–Schmidt, applied twice).
pub fn orthonormal_basis(set: &SampleSet) -> Result<CMatrix> {
    let m = set.dim();
    let max_norm = set.samples.iter().map(vec_norm).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Err(Error::DegenerateSamples);
    }
    let mut cols: Vec<CVector> = Vec::new();
    for h in &set.samples {
        let mut w = h.clone();
        for _ in 0..2 {
            for q in &cols {
                let c = q.dotc(&w);
                w -= q * c;
            }
        }
        let r = vec_norm(&w);
        if r > GS_DROP_TOL * max_norm {
            cols.push(w.unscale(r));
        }
    }
    Ok(CMatrix::from_fn(m, cols.len(), |i, j| cols[j][i]))
}

/// `(1/n) Σ x xᴴ` (channels are zero mean, so no centering).
pub fn sample_covariance(samples: &[CVector]) -> Result<CMatrix> {
    let first = samples.first().ok_or(Error::DegenerateSamples)?;
    let p = first.len();
    let mut s = CMatrix::zeros(p, p);
    for x in samples {
        if x.len() != p {
            return Err(Error::Dimension(format!("sample of length {} in a set of {p}", x.len())));
        }
        s += x * x.adjoint();
    }
    Ok(s.unscale(samples.len() as f64))
}

/// OAS shrinkage coefficient for sample covariance `s` from `n` samples.
pub fn oas_coefficient(s: &CMatrix, n: usize) -> f64 {
    let p = s.nrows() as f64;
    let n = n as f64;
    let tr = trace_re(s);
    let tr2: f64 = s.iter().map(|z| z.norm_sqr()).sum();
    let num = (1.0 - 2.0 / p) * tr2 + tr * tr;
    let den = (n + 1.0 - 2.0 / p) * (tr2 - tr * tr / p);
    if !(den > 0.0) {
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// `Σ̂ = (1 − ρ) S + ρ (Tr S / p) I`.
pub fn oas_shrinkage(reduced: &[CVector]) -> Result<CMatrix> {
    let s = sample_covariance(reduced)?;
    let p = s.nrows();
    let rho = oas_coefficient(&s, reduced.len());
    let target = trace_re(&s) / p as f64;
    let mut out = s.scale(1.0 - rho);
    for i in 0..p {
        out[(i, i)] += C64::new(rho * target, 0.0);
    }
    Ok(hermitian_part(&out))
}

/// `Θ̂ = U Σ̂ Uᴴ`.
pub fn rank_deficient_oas(set: &SampleSet) -> Result<CMatrix> {
    let u = orthonormal_basis(set)?;
    let reduced: Vec<CVector> = set.samples.iter().map(|h| u.adjoint() * h).collect();
    let sigma = oas_shrinkage(&reduced)?;
    Ok(hermitian_part(&(&u * sigma * u.adjoint())))
}

/// Estimates every link covariance of a scenario from `tp` fresh samples.
///
/// Sample `j` of every link comes from statistics slot `j` of `seed`.
pub fn estimate_scenario(scenario: &Scenario, tp: usize, seed: u64) -> Result<Scenario> {
    if tp == 0 {
        return Err(Error::Config("tp must be at least 1".into()));
    }
    let sampler = ChannelSampler::new(scenario)?;
    let draws: Vec<_> = (0..tp as u64)
        .into_par_iter()
        .map(|j| sampler.draw_with(&mut rng::stream(seed, rng::DOMAIN_STATS, j)))
        .collect();
    let thetas = (0..scenario.links.len())
        .into_par_iter()
        .map(|i| {
            let mut set = SampleSet::new(draws.iter().map(|d| d.h[i].clone()).collect())?;
            let link = &scenario.links[i];
            set.link = Some((link.user, link.bs));
            rank_deficient_oas(&set)
        })
        .collect::<Result<Vec<_>>>()?;
    scenario.with_covariances(thetas, ESTIMATOR_NAME)
}
