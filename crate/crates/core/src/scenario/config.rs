use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-user transmit power rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "values")]
pub enum PowerRule {
    /// `P_k = Pb / K0`, with `K0` the number of users in the serving cell.
    Uniform,
    Explicit(Vec<f64>),
}

/// QoS weight rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "values")]
pub enum WeightRule {
    /// `w_k = L_{k,b_k}`.
    DirectPathloss,
    Explicit(Vec<f64>),
}

/// Outage caps `ε_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "values")]
pub enum EpsilonRule {
    Uniform(f64),
    Explicit(Vec<f64>),
    /// Drawn uniformly in `[lo, hi]` per user from the scenario seed.
    Range(f64, f64),
}

/// Scenario description. Every field has a default taken from the basic
/// 19-cell setup (M = 40, K0 = 7, Kc = 3, Pb = 10 dB, ε = 0.05).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Hexagonal rings around the reference cell (0 = single cell, 2 = 19 cells).
    pub num_tiers: u32,
    /// Explicit BS coordinates in meters; overrides the hexagonal grid.
    pub sites: Option<Vec<[f64; 2]>>,
    pub inter_site_distance: f64,
    /// Antennas per BS.
    pub antennas: usize,
    pub users_per_cell: usize,
    pub users_per_hotspot: usize,
    pub hotspots_per_cell: usize,
    /// Hotspot radius in meters.
    pub hotspot_radius: f64,
    /// Minimum user-to-serving-BS distance in meters.
    pub min_distance: f64,
    /// Width `φ_max − φ_min` of every angular window (radians).
    pub angular_spread: f64,
    /// Window centers are drawn uniformly in `[-c, c]` around array broadside.
    pub aod_center_range: f64,
    /// Per-BS transmit power (linear, noise-normalized).
    pub bs_power: f64,
    pub power_rule: PowerRule,
    pub weight_rule: WeightRule,
    pub epsilon: EpsilonRule,
    /// QoS floor `γ°`.
    pub gamma_floor: f64,
    /// Slots per statistics epoch `T`.
    pub slots_per_epoch: usize,
    /// Statistics samples `Tp` per epoch.
    pub stat_samples: usize,
    pub rng_seed: u64,
    /// Cross links weaker than the direct link by more than this (dB) get no
    /// edge. `None` connects every user to every BS.
    pub edge_threshold_db: Option<f64>,
    /// Minimum quadrature node count for the angular integral.
    pub quadrature_nodes: usize,
    /// Log-normal shadowing standard deviation in dB; `None` disables it.
    pub shadowing_db: Option<f64>,
    /// Eigenvalues at or above `rank_threshold · λ_max` count toward the rank.
    pub rank_threshold: f64,
    /// Path gains are divided by the gain at this distance. `None` uses the
    /// cell radius, making the cell-edge gain 1.
    pub pathloss_reference: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_tiers: 2,
            sites: None,
            inter_site_distance: 500.0,
            antennas: 40,
            users_per_cell: 7,
            users_per_hotspot: 3,
            hotspots_per_cell: 2,
            hotspot_radius: 20.0,
            min_distance: 35.0,
            angular_spread: PI / 6.0,
            aod_center_range: PI / 3.0,
            bs_power: 10.0,
            power_rule: PowerRule::Uniform,
            weight_rule: WeightRule::DirectPathloss,
            epsilon: EpsilonRule::Uniform(0.05),
            gamma_floor: 0.0,
            slots_per_epoch: 1000,
            stat_samples: 20,
            rng_seed: 1,
            edge_threshold_db: Some(-30.0),
            quadrature_nodes: 64,
            shadowing_db: None,
            rank_threshold: 1e-6,
            pathloss_reference: None,
        }
    }
}

impl ScenarioConfig {
    /// Small configuration for routine test runs: 7 cells, 16 antennas, two
    /// 2-user hotspots per cell and a wide angular window so that every
    /// cluster can meet the ε = 0.05 chance constraint.
    pub fn desk_scale() -> Self {
        Self {
            num_tiers: 1,
            antennas: 16,
            users_per_cell: 4,
            users_per_hotspot: 2,
            hotspots_per_cell: 2,
            angular_spread: 2.0 * PI / 3.0,
            aod_center_range: 0.1,
            edge_threshold_db: Some(-10.0),
            ..Self::default()
        }
    }

    pub fn num_cells(&self) -> usize {
        match &self.sites {
            Some(s) => s.len(),
            None => {
                let t = self.num_tiers as usize;
                1 + 3 * t * (t + 1)
            }
        }
    }

    pub fn cell_radius(&self) -> f64 {
        self.inter_site_distance / 3f64.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.users_per_cell == 0 {
            return err("users_per_cell must be positive".into());
        }
        if self.users_per_hotspot * self.hotspots_per_cell > self.users_per_cell {
            return err(format!(
                "{} hotspots of {} users exceed {} users per cell",
                self.hotspots_per_cell, self.users_per_hotspot, self.users_per_cell
            ));
        }
        if self.hotspots_per_cell > 0 && self.users_per_hotspot == 0 {
            return err("hotspots need at least one user".into());
        }
        if self.antennas < self.users_per_cell {
            return err(format!(
                "{} antennas cannot serve {} users per cell",
                self.antennas, self.users_per_cell
            ));
        }
        if !(self.angular_spread > 0.0) {
            return err("angular_spread must be positive".into());
        }
        if !(self.inter_site_distance > 0.0) || !(self.bs_power > 0.0) {
            return err("inter_site_distance and bs_power must be positive".into());
        }
        if self.num_cells() == 0 {
            return err("layout has no cells".into());
        }
        if !(self.gamma_floor >= 0.0) {
            return err("gamma_floor must be non-negative".into());
        }
        if self.slots_per_epoch == 0 || self.stat_samples == 0 {
            return err("slots_per_epoch and stat_samples must be positive".into());
        }
        let total = self.num_cells() * self.users_per_cell;
        let check_eps = |e: f64| e > 0.0 && e < 1.0;
        match &self.epsilon {
            EpsilonRule::Uniform(e) if !check_eps(*e) => {
                return err(format!("epsilon {e} outside (0, 1)"))
            }
            EpsilonRule::Explicit(v) => {
                if v.len() != total {
                    return err(format!("{} epsilons for {total} users", v.len()));
                }
                if let Some(e) = v.iter().find(|e| !check_eps(**e)) {
                    return err(format!("epsilon {e} outside (0, 1)"));
                }
            }
            EpsilonRule::Range(lo, hi) if !(check_eps(*lo) && check_eps(*hi) && lo <= hi) => {
                return err(format!("epsilon range [{lo}, {hi}] invalid"))
            }
            _ => {}
        }
        if let PowerRule::Explicit(v) = &self.power_rule {
            if v.len() != total || v.iter().any(|p| !(*p > 0.0)) {
                return err("explicit powers must be positive, one per user".into());
            }
        }
        if let WeightRule::Explicit(v) = &self.weight_rule {
            if v.len() != total || v.iter().any(|w| !(*w > 0.0)) {
                return err("explicit weights must be positive, one per user".into());
            }
        }
        if self.quadrature_nodes == 0 {
            return err("quadrature_nodes must be positive".into());
        }
        Ok(())
    }
}
