//! Small synthetic instances shared by the optimizer tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{random_covariance, trace_re, CMatrix, C64};
use crate::scenario::{Cluster, Scenario, ScenarioConfig};

pub fn config(m: usize) -> ScenarioConfig {
    ScenarioConfig {
        antennas: m,
        ..Default::default()
    }
}

pub fn diag(vals: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| C64::new(*v, 0.0)),
    ))
}

/// One user, one cluster, no interference.
pub fn single_user(theta: CMatrix, power: f64, weight: f64, epsilon: f64) -> Scenario {
    let m = theta.nrows();
    Scenario::from_links(
        config(m),
        1,
        vec![Cluster { bs: 0, users: vec![0] }],
        vec![((0, 0), theta)],
        vec![power],
        vec![weight],
        vec![epsilon],
    )
    .unwrap()
}

/// `(I + s·R)` rescaled to trace `m`, with `R` a random PSD matrix of trace `m`.
pub fn mildly_correlated(rng: &mut ChaCha8Rng, m: usize, spread: f64) -> CMatrix {
    let r = random_covariance(rng, m, m, m as f64);
    let t = CMatrix::identity(m, m) + r.scale(spread);
    let tr = trace_re(&t);
    t.scale(m as f64 / tr)
}

/// Two cells with one single-user cluster each and weak cross links.
pub fn two_cells(seed: u64, m: usize, cross_gain: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links = Vec::new();
    for k in 0..2 {
        links.push(((k, k), mildly_correlated(&mut rng, m, 0.1)));
        links.push(((k, 1 - k), random_covariance(&mut rng, m, 2, cross_gain * m as f64)));
    }
    Scenario::from_links(
        config(m),
        2,
        vec![Cluster { bs: 0, users: vec![0] }, Cluster { bs: 1, users: vec![1] }],
        links,
        vec![1.0; 2],
        vec![1.0; 2],
        vec![0.05; 2],
    )
    .unwrap()
}
