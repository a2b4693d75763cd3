//! Instantaneous channel realizations `h = Θ^{1/2} h_w`.

use rand::Rng;

use super::Scenario;
use crate::error::Result;
use crate::linalg::{complex_gaussian, psd_sqrt, CMatrix, CVector};
use crate::rng;

/// Tolerance for negative eigenvalues when taking covariance square roots.
pub const PSD_TOL: f64 = 1e-9;

/// One draw of every linked channel vector, indexed like `Scenario::links`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub h: Vec<CVector>,
}

/// Draws `Θ^{1/2} h_w` for a single covariance.
pub fn sample_channel<R: Rng + ?Sized>(theta: &CMatrix, rng: &mut R) -> Result<CVector> {
    let root = psd_sqrt(theta, PSD_TOL)?;
    Ok(&root * complex_gaussian(rng, theta.nrows()))
}

/// Cached square roots of every link covariance.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    roots: Vec<CMatrix>,
}

impl ChannelSampler {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let roots = scenario
            .thetas
            .iter()
            .map(|t| psd_sqrt(t, PSD_TOL))
            .collect::<Result<_>>()?;
        Ok(Self { roots })
    }

    pub fn draw_with<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelDraw {
        ChannelDraw {
            h: self
                .roots
                .iter()
                .map(|r| r * complex_gaussian(rng, r.nrows()))
                .collect(),
        }
    }

    /// Draw number `slot` of the stream identified by `seed`.
    pub fn draw(&self, seed: u64, slot: u64) -> ChannelDraw {
        self.draw_with(&mut rng::stream(seed, rng::DOMAIN_CHANNEL, slot))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, vec_norm, C64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_covariance_empirical() {
        let m = 4;
        let theta = CMatrix::identity(m, m);
        let root = psd_sqrt(&theta, PSD_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut acc = CMatrix::zeros(m, m);
        for _ in 0..n {
            let h = &root * complex_gaussian(&mut rng, m);
            acc += &h * h.adjoint();
        }
        acc /= C64::new(n as f64, 0.0);
        let err = frobenius(&(acc - &theta)) / frobenius(&theta);
        assert!(err < 0.03, "relative error {err}");
    }

    #[test]
    fn rank_one_draws_are_collinear() {
        let u = CVector::from_vec(vec![
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.5),
            C64::new(-0.5, 0.0),
            C64::new(0.0, -0.5),
        ]);
        let theta = (&u * u.adjoint()).scale(4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let h = sample_channel(&theta, &mut rng).unwrap();
            let coef = u.dotc(&h);
            let resid = &h - &u * coef;
            assert!(vec_norm(&resid) < 1e-9 * vec_norm(&h).max(1.0));
        }
    }

    #[test]
    fn zero_covariance_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = sample_channel(&CMatrix::zeros(3, 3), &mut rng).unwrap();
        assert_eq!(vec_norm(&h), 0.0);
    }
}
