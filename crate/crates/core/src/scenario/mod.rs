//! Multi-cell scenarios with per-link spatial covariances.

pub mod channel;
pub mod config;
pub mod correlation;
pub mod layout;
pub mod pathloss;
pub mod topology;

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use channel::{sample_channel, ChannelDraw, ChannelSampler};
pub use config::{EpsilonRule, PowerRule, ScenarioConfig, WeightRule};
pub use correlation::{build_correlation, AngularWindow, SpatialCovariance};
pub use layout::build_layout;
pub use pathloss::pathloss_urban_macro;
pub use topology::{Cluster, TopologyGraph};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_defect, trace_re, CMatrix, HermitianEigen};
use crate::rng;

pub const CONTAINER_KIND: &str = "scenario";

/// Metadata of one `(user, BS)` edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub user: usize,
    pub bs: usize,
    pub pathloss: f64,
    pub window: AngularWindow,
    pub rank: usize,
}

/// A layout with its per-edge covariances and QoS inputs.
///
/// `links` and `thetas` follow the order of `topology.edges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub topology: TopologyGraph,
    pub links: Vec<Link>,
    #[serde(skip)]
    pub thetas: Vec<CMatrix>,
    pub powers: Vec<f64>,
    pub weights: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// `"model"` for generated covariances, otherwise the estimator name.
    pub covariance_source: String,
}

impl Scenario {
    pub fn generate(config: &ScenarioConfig) -> Result<Self> {
        let (topology, gains) = layout::layout_with_gains(config)?;
        let windows = draw_windows(config, &topology);
        // One normalized matrix per (cluster, BS) pair that carries an edge.
        let mut pairs: Vec<(usize, usize)> = topology
            .edges
            .iter()
            .map(|&(k, l)| (topology.user_cluster[k], l))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let normalized: Vec<SpatialCovariance> = pairs
            .par_iter()
            .map(|&(n, l)| {
                let w = windows[n][l];
                build_correlation(
                    w.phi_min,
                    w.phi_max,
                    1.0,
                    config.antennas,
                    config.quadrature_nodes,
                    config.rank_threshold,
                )
            })
            .collect::<Result<_>>()?;
        let mut links = Vec::with_capacity(topology.edges.len());
        let mut thetas = Vec::with_capacity(topology.edges.len());
        for &(k, l) in &topology.edges {
            let n = topology.user_cluster[k];
            let idx = pairs.binary_search(&(n, l)).expect("pair collected above");
            let base = &normalized[idx];
            let pathloss = gains[k][l];
            links.push(Link {
                user: k,
                bs: l,
                pathloss,
                window: windows[n][l],
                rank: base.rank,
            });
            thetas.push(base.theta.scale(pathloss));
        }
        let num_users = topology.num_users();
        let powers = match &config.power_rule {
            PowerRule::Uniform => vec![config.bs_power / config.users_per_cell as f64; num_users],
            PowerRule::Explicit(v) => v.clone(),
        };
        let weights = match &config.weight_rule {
            WeightRule::DirectPathloss => (0..num_users).map(|k| gains[k][topology.serving[k]]).collect(),
            WeightRule::Explicit(v) => v.clone(),
        };
        let epsilons = match &config.epsilon {
            EpsilonRule::Uniform(e) => vec![*e; num_users],
            EpsilonRule::Explicit(v) => v.clone(),
            EpsilonRule::Range(lo, hi) => {
                let mut r = rng::stream(config.rng_seed, rng::DOMAIN_EPSILON, 0);
                (0..num_users).map(|_| r.random_range(*lo..=*hi)).collect()
            }
        };
        let s = Self {
            config: config.clone(),
            topology,
            links,
            thetas,
            powers,
            weights,
            epsilons,
            covariance_source: "model".into(),
        };
        s.check_power_budget()?;
        Ok(s)
    }

    /// Assembles a scenario from explicit covariances, one per entry of
    /// `topology.edges`. Path gains are read off as `Tr Θ / M`.
    pub fn from_parts(
        config: ScenarioConfig,
        topology: TopologyGraph,
        thetas: Vec<CMatrix>,
        powers: Vec<f64>,
        weights: Vec<f64>,
        epsilons: Vec<f64>,
    ) -> Result<Self> {
        topology.validate()?;
        let k = topology.num_users();
        if thetas.len() != topology.edges.len() {
            return Err(Error::Dimension(format!(
                "{} covariances for {} edges",
                thetas.len(),
                topology.edges.len()
            )));
        }
        if powers.len() != k || weights.len() != k || epsilons.len() != k {
            return Err(Error::Dimension("powers, weights and epsilons need one entry per user".into()));
        }
        if epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::Config("every epsilon must lie in (0, 1)".into()));
        }
        let m = config.antennas;
        let mut links = Vec::with_capacity(thetas.len());
        for (&(user, bs), theta) in topology.edges.iter().zip(&thetas) {
            if theta.nrows() != m || theta.ncols() != m {
                return Err(Error::Dimension(format!("covariance of ({user}, {bs}) is not {m}x{m}")));
            }
            let c = SpatialCovariance::from_matrix(theta.clone(), config.rank_threshold);
            links.push(Link {
                user,
                bs,
                pathloss: c.pathloss,
                window: AngularWindow {
                    phi_min: 0.0,
                    phi_max: 0.0,
                },
                rank: c.rank,
            });
        }
        Ok(Self {
            config,
            topology,
            links,
            thetas,
            powers,
            weights,
            epsilons,
            covariance_source: "explicit".into(),
        })
    }

    /// Like [`Scenario::from_parts`] but takes `((user, bs), Θ)` pairs in any
    /// order. Every serving link needs an entry.
    pub fn from_links(
        config: ScenarioConfig,
        num_bs: usize,
        clusters: Vec<Cluster>,
        links: Vec<((usize, usize), CMatrix)>,
        powers: Vec<f64>,
        weights: Vec<f64>,
        epsilons: Vec<f64>,
    ) -> Result<Self> {
        let mut links = links;
        links.sort_by_key(|(e, _)| *e);
        if links.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("duplicate link".into()));
        }
        let edges: Vec<(usize, usize)> = links.iter().map(|(e, _)| *e).collect();
        let topology = TopologyGraph::from_parts(num_bs, clusters, edges.clone(), Vec::new(), Vec::new())?;
        if topology.edges != edges {
            let missing = topology.edges.iter().find(|e| edges.binary_search(e).is_err());
            return Err(Error::Config(format!("no covariance for serving link {missing:?}")));
        }
        let thetas = links.into_iter().map(|(_, t)| t).collect();
        Self::from_parts(config, topology, thetas, powers, weights, epsilons)
    }

    pub fn antennas(&self) -> usize {
        self.config.antennas
    }

    pub fn link_index(&self, user: usize, bs: usize) -> Option<usize> {
        self.topology.edges.binary_search(&(user, bs)).ok()
    }

    pub fn theta(&self, user: usize, bs: usize) -> Option<&CMatrix> {
        self.link_index(user, bs).map(|i| &self.thetas[i])
    }

    pub fn direct_pathloss(&self, user: usize) -> f64 {
        let i = self.link_index(user, self.topology.serving[user]).expect("direct edge");
        self.links[i].pathloss
    }

    /// `P̄_n`, the total power of cluster `n`.
    pub fn cluster_power(&self, n: usize) -> f64 {
        self.topology.clusters[n].users.iter().map(|&k| self.powers[k]).sum()
    }

    /// Replaces every covariance and recomputes the effective ranks. Path gains
    /// keep their model values.
    pub fn with_covariances(&self, thetas: Vec<CMatrix>, source: &str) -> Result<Self> {
        if thetas.len() != self.links.len() {
            return Err(Error::Dimension(format!(
                "{} covariances for {} links",
                thetas.len(),
                self.links.len()
            )));
        }
        let mut out = self.clone();
        for (link, theta) in out.links.iter_mut().zip(&thetas) {
            let c = SpatialCovariance::from_matrix(theta.clone(), self.config.rank_threshold);
            link.rank = c.rank;
        }
        out.thetas = thetas;
        out.covariance_source = source.into();
        Ok(out)
    }

    fn check_power_budget(&self) -> Result<()> {
        for l in 0..self.topology.num_bs {
            let total: f64 = self
                .topology
                .clusters_of_bs(l)
                .map(|n| self.cluster_power(n))
                .sum();
            if total > self.config.bs_power * (1.0 + 1e-9) {
                return Err(Error::Config(format!(
                    "BS {l} power {total} exceeds budget {}",
                    self.config.bs_power
                )));
            }
        }
        Ok(())
    }

    /// Checks every covariance against its type invariants and the shared
    /// per-cluster shape. Returns the worst violations found.
    pub fn check_invariants(&self) -> Result<InvariantReport> {
        let m = self.antennas();
        let mut rep = InvariantReport::default();
        for (link, theta) in self.links.iter().zip(&self.thetas) {
            if theta.nrows() != m || theta.ncols() != m {
                return Err(Error::Dimension(format!(
                    "link ({}, {}) covariance is {}x{}",
                    link.user,
                    link.bs,
                    theta.nrows(),
                    theta.ncols()
                )));
            }
            rep.hermitian = rep.hermitian.max(hermitian_defect(theta));
            let eig = HermitianEigen::new(theta);
            rep.min_eigenvalue = rep.min_eigenvalue.min(eig.min() / eig.max().max(f64::MIN_POSITIVE));
            let expected = m as f64 * link.pathloss;
            rep.trace = rep.trace.max((trace_re(theta) - expected).abs() / expected);
        }
        for c in &self.topology.clusters {
            let first = c.users[0];
            let base = self.theta(first, c.bs).expect("direct edge");
            let base = base.scale(1.0 / self.direct_pathloss(first));
            for &k in &c.users[1..] {
                let other = self.theta(k, c.bs).expect("direct edge").scale(1.0 / self.direct_pathloss(k));
                rep.cluster_shape = rep
                    .cluster_shape
                    .max(frobenius(&(&other - &base)) / frobenius(&base));
            }
        }
        Ok(rep)
    }

    pub fn to_container(&self) -> Result<Container> {
        let mut c = Container::new(CONTAINER_KIND, serde_json::to_value(self)?);
        for (link, theta) in self.links.iter().zip(&self.thetas) {
            c.push(format!("theta/{}/{}", link.user, link.bs), theta.clone());
        }
        Ok(c)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != CONTAINER_KIND {
            return Err(Error::Format(format!("expected a scenario, found '{}'", c.kind)));
        }
        let mut s: Self = c.meta_as()?;
        s.thetas = s
            .links
            .iter()
            .map(|l| c.require(&format!("theta/{}/{}", l.user, l.bs)).cloned())
            .collect::<Result<_>>()?;
        s.topology.validate()?;
        Ok(s)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container()?.write(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }

    /// SHA-256 of the serialized scenario, hex encoded.
    pub fn content_hash(&self) -> Result<String> {
        Ok(hex_digest(&self.to_container()?.to_bytes()?))
    }
}

/// Worst-case covariance invariant residuals over a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct InvariantReport {
    pub hermitian: f64,
    /// Smallest eigenvalue relative to the largest, over all links.
    pub min_eigenvalue: f64,
    /// Largest relative deviation of `Tr Θ` from `M L`.
    pub trace: f64,
    /// Largest relative Frobenius deviation between same-cluster shapes.
    pub cluster_shape: f64,
}

pub fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Angular windows per (cluster, BS). Same-cluster users share a window at
/// every BS, so their normalized covariances coincide.
fn draw_windows(config: &ScenarioConfig, topology: &TopologyGraph) -> Vec<Vec<AngularWindow>> {
    let mut r = rng::stream(config.rng_seed, rng::DOMAIN_WINDOWS, 0);
    let c = config.aod_center_range;
    let half = config.angular_spread / 2.0;
    (0..topology.num_clusters())
        .map(|_| {
            (0..topology.num_bs)
                .map(|_| {
                    let center = if c > 0.0 { r.random_range(-c..=c) } else { 0.0 };
                    AngularWindow {
                        phi_min: center - half,
                        phi_max: center + half,
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            num_tiers: 1,
            antennas: 8,
            users_per_cell: 3,
            users_per_hotspot: 2,
            hotspots_per_cell: 1,
            ..Default::default()
        }
    }

    #[test]
    fn generated_covariances_meet_invariants() {
        let s = Scenario::generate(&small()).unwrap();
        let rep = s.check_invariants().unwrap();
        assert!(rep.hermitian < 1e-12);
        assert!(rep.min_eigenvalue > -1e-9);
        assert!(rep.trace < 1e-9);
        assert!(rep.cluster_shape < 1e-9);
        assert_eq!(s.links.len(), s.topology.edges.len());
    }

    #[test]
    fn uniform_power_and_pathloss_weights() {
        let s = Scenario::generate(&small()).unwrap();
        for k in 0..s.topology.num_users() {
            assert!((s.powers[k] - 10.0 / 3.0).abs() < 1e-12);
            assert_eq!(s.weights[k], s.direct_pathloss(k));
        }
    }

    #[test]
    fn container_round_trip_is_bit_exact() {
        let s = Scenario::generate(&small()).unwrap();
        let bytes = s.to_container().unwrap().to_bytes().unwrap();
        let back = Scenario::from_container(&Container::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_container().unwrap().to_bytes().unwrap(), bytes);
    }

    #[test]
    fn epsilon_range_is_seeded() {
        let cfg = ScenarioConfig {
            epsilon: EpsilonRule::Range(0.01, 0.1),
            ..small()
        };
        let a = Scenario::generate(&cfg).unwrap();
        let b = Scenario::generate(&cfg).unwrap();
        assert_eq!(a.epsilons, b.epsilons);
        assert!(a.epsilons.iter().all(|e| (0.01..=0.1).contains(e)));
    }
}
