//! Dense complex linear-algebra helpers shared by every module.
//!
//! Everything is built on `nalgebra` dynamic matrices over `Complex<f64>`.
//! Hermitian eigendecompositions are always returned with eigenvalues sorted
//! in descending order and eigenvectors in the matching column order.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Hermitian eigendecomposition, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(a: &CMatrix) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "eigendecomposition of a non-square matrix");
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: CMatrix::zeros(0, 0),
            };
        }
        let sym = hermitian_part(a);
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Columns `0..count` of the eigenvector matrix.
    pub fn leading(&self, count: usize) -> CMatrix {
        self.vectors.columns(0, count).into_owned()
    }
}

/// `(A + A†) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn trace_re(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// `Re Tr(A B)` without forming the product.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let x = a[(i, j)] * b[(j, i)];
            acc += x.re;
        }
    }
    acc
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative Hermitian asymmetry `‖A − A†‖_F / max(1, ‖A‖_F)`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    frobenius(&(a - a.adjoint())) / frobenius(a).max(1.0)
}

/// Orthogonal projector `Q Q†` onto the column span of a semi-unitary `Q`.
pub fn projector(q: &CMatrix) -> CMatrix {
    q * q.adjoint()
}

/// Number of eigenvalues at or above `rel · λ_max`.
pub fn effective_rank(values: &[f64], rel: f64) -> usize {
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v >= rel * max).count()
}

/// Principal square root of a Hermitian PSD matrix.
///
/// Eigenvalues down to `-tol · max(1, λ_max)` are accepted; anything more
/// negative is rejected. Eigenvalues at or below `tol · λ_max` are set to zero
/// so that a rank-deficient input has a root of the same rank.
pub fn psd_sqrt(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    let eig = HermitianEigen::new(a);
    let scale = eig.max().abs().max(1.0);
    if eig.min() < -tol * scale {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min(),
        });
    }
    let n = a.nrows();
    let cut = tol * eig.max().max(0.0);
    let mut scaled = eig.vectors.clone();
    for (c, &v) in eig.values.iter().enumerate() {
        let s = if v > cut { v.sqrt() } else { 0.0 };
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    Ok(&scaled * eig.vectors.adjoint())
}

/// Vector of i.i.d. `CN(0, 1)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Random PSD matrix `G Gᴴ` with `G` an `m × rank` Gaussian, scaled to the given trace.
pub fn random_covariance<R: Rng + ?Sized>(rng: &mut R, m: usize, rank: usize, trace: f64) -> CMatrix {
    let cols: Vec<CVector> = (0..rank).map(|_| complex_gaussian(rng, m)).collect();
    let g = CMatrix::from_fn(m, rank, |r, c| cols[c][r]);
    let theta = hermitian_part(&(&g * g.adjoint()));
    let t = trace_re(&theta);
    if t > 0.0 {
        theta.scale(trace / t)
    } else {
        theta
    }
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in `C^m`.
///
/// `basis` must be semi-unitary. Uses the eigenvectors of `I − Q Q†` with
/// eigenvalue above one half.
pub fn orthogonal_complement(basis: &CMatrix, m: usize) -> CMatrix {
    if basis.ncols() == 0 {
        return CMatrix::identity(m, m);
    }
    let p = CMatrix::identity(m, m) - projector(basis);
    let eig = HermitianEigen::new(&p);
    let count = eig.values.iter().filter(|&&v| v > 0.5).count();
    eig.leading(count)
}

/// Orthonormalizes the columns of `a` (thin, rank-revealing via SVD).
///
/// Directions whose singular value falls below `rel · σ_max` are dropped.
pub fn orthonormal_columns(a: &CMatrix, rel: f64) -> CMatrix {
    if a.ncols() == 0 || a.nrows() == 0 {
        return CMatrix::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = &svd.singular_values;
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return CMatrix::zeros(a.nrows(), 0);
    }
    let floor = rel.max(f64::EPSILON * a.nrows().max(a.ncols()) as f64) * max;
    let mut keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] >= floor).collect();
    keep.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    CMatrix::from_fn(a.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// `‖F† F − I‖_F`.
pub fn semi_unitary_defect(f: &CMatrix) -> f64 {
    let s = f.ncols();
    frobenius(&(f.adjoint() * f - CMatrix::identity(s, s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        hermitian_part(&g)
    }

    #[test]
    fn eigen_reconstructs_and_sorts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(&mut rng, 7);
        let eig = HermitianEigen::new(&a);
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        let d = CMatrix::from_diagonal(&DVector::from_iterator(
            7,
            eig.values.iter().map(|&v| C64::new(v, 0.0)),
        ));
        let back = &eig.vectors * d * eig.vectors.adjoint();
        assert!(frobenius(&(back - &a)) < 1e-10);
        assert!(semi_unitary_defect(&eig.vectors) < 1e-10);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_hermitian(&mut rng, 6);
        let a = &g * &g;
        let r = psd_sqrt(&a, 1e-9).unwrap();
        assert!(frobenius(&(&r * &r - &a)) < 1e-9 * frobenius(&a));
    }

    #[test]
    fn sqrt_keeps_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_covariance(&mut rng, 8, 2, 8.0);
        let r = psd_sqrt(&a, 1e-9).unwrap();
        let e = HermitianEigen::new(&r);
        assert_eq!(e.values.iter().filter(|v| v.abs() > 1e-12).count(), 2);
        assert!(frobenius(&(&r * &r - &a)) < 1e-9 * frobenius(&a));
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let a = CMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(-0.5, 0.0),
        ]));
        assert!(matches!(psd_sqrt(&a, 1e-9), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn complement_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = CMatrix::from_fn(8, 3, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let q = orthonormal_columns(&a, 1e-12);
        assert_eq!(q.ncols(), 3);
        let c = orthogonal_complement(&q, 8);
        assert_eq!(c.ncols(), 5);
        assert!(frobenius(&(c.adjoint() * &q)) < 1e-10);
    }

    #[test]
    fn trace_product_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_hermitian(&mut rng, 5);
        let b = random_hermitian(&mut rng, 5);
        let dense = trace_re(&(&a * &b));
        assert!((trace_product_re(&a, &b) - dense).abs() < 1e-12);
    }
}
