//! Criterion benchmarks (see `benches/`) and the instances they share.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subspace_core::linalg::{complex_gaussian, random_covariance, trace_re, CMatrix, CVector};
use subspace_core::scenario::Cluster;
use subspace_core::{Scenario, ScenarioConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    let cols: Vec<CVector> = (0..c).map(|_| complex_gaussian(rng, r)).collect();
    CMatrix::from_fn(r, c, |i, j| cols[j][i])
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, m: usize) -> CMatrix {
    let g = random_matrix(rng, m, m);
    (&g + g.adjoint()).scale(0.5)
}

/// Two single-user cells with near-flat direct covariances and rank-2 cross links.
pub fn two_cells(seed: u64, m: usize) -> Scenario {
    let mut r = rng(seed);
    let mut links = Vec::new();
    for k in 0..2 {
        let t = CMatrix::identity(m, m) + random_covariance(&mut r, m, m, m as f64).scale(0.1);
        links.push(((k, k), t.scale(m as f64 / trace_re(&t))));
        links.push(((k, 1 - k), random_covariance(&mut r, m, 2, 0.2 * m as f64)));
    }
    let cfg = ScenarioConfig {
        antennas: m,
        ..Default::default()
    };
    let clusters = vec![Cluster { bs: 0, users: vec![0] }, Cluster { bs: 1, users: vec![1] }];
    Scenario::from_links(cfg, 2, clusters, links, vec![1.0; 2], vec![1.0; 2], vec![0.05; 2]).expect("valid instance")
}

pub fn desk(seed: u64) -> Scenario {
    Scenario::generate(&ScenarioConfig {
        rng_seed: seed,
        ..ScenarioConfig::desk_scale()
    })
    .expect("desk preset is valid")
}
