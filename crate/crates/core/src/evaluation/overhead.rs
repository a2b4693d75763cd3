//! Signaling overhead per slot.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::TopologyGraph;

pub type Rational = Ratio<u64>;

/// Inputs of the ledger formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadInputs {
    pub antennas: u64,
    /// Users per cell `K0`.
    pub users_per_cell: u64,
    /// Real-time pilot dimension `S = max_n S_n`.
    pub subspace_dim: u64,
    /// Effective covariance rank `R`.
    pub rank: u64,
    /// Statistical pilot slots `Tp`.
    pub stat_samples: u64,
    /// Statistics epoch `T`.
    pub epoch: u64,
    /// Links per user `L0` (serving plus interfering BSs), possibly fractional.
    pub links_per_user: Rational,
    /// Total links `N_L` in the network.
    pub total_links: u64,
}

impl OverheadInputs {
    /// Derives `K0`, `L0`, `N_L` and `S` from a topology and per-cluster dimensions.
    pub fn from_topology(
        topology: &TopologyGraph,
        users_per_cell: usize,
        antennas: usize,
        dims: &[usize],
        rank: usize,
        stat_samples: usize,
        epoch: usize,
    ) -> Result<Self> {
        if dims.len() != topology.num_clusters() {
            return Err(Error::Dimension(format!(
                "{} dims for {} clusters",
                dims.len(),
                topology.num_clusters()
            )));
        }
        if epoch == 0 || topology.num_users() == 0 {
            return Err(Error::Config("epoch and user count must be positive".into()));
        }
        let links = topology.edges.len() as u64;
        Ok(Self {
            antennas: antennas as u64,
            users_per_cell: users_per_cell as u64,
            subspace_dim: dims.iter().copied().max().unwrap_or(0) as u64,
            rank: rank as u64,
            stat_samples: stat_samples as u64,
            epoch: epoch as u64,
            links_per_user: Rational::new(links, topology.num_users() as u64),
            total_links: links,
        })
    }
}

/// A count of vectors of a given dimension (`None` for scalars).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorCount {
    pub count: Rational,
    pub dim: Option<u64>,
    pub complex: bool,
}

impl VectorCount {
    fn label(&self) -> String {
        let field = if self.complex { "C" } else { "R" };
        match self.dim {
            Some(d) => format!("{} {field}^{d}", fmt_ratio(&self.count)),
            None => format!("{} {field}", fmt_ratio(&self.count)),
        }
    }
}

/// One row of signaling per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub pilots: Option<Rational>,
    pub vectors: Vec<VectorCount>,
    pub label: String,
}

impl OverheadRow {
    fn new(pilots: Option<Rational>, vectors: Vec<VectorCount>) -> Self {
        let mut parts: Vec<String> = pilots.iter().map(|p| format!("{} PS", fmt_ratio(p))).collect();
        parts.extend(vectors.iter().map(VectorCount::label));
        Self {
            label: parts.join(", "),
            pilots,
            vectors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadLedger {
    pub inputs: OverheadInputs,
    /// Per slot per cell.
    pub real_time: OverheadRow,
    /// Per slot per cell.
    pub statistical: OverheadRow,
    /// Per slot, network wide.
    pub backhaul: OverheadRow,
    /// Conventional single-cell MU-MIMO, per slot per cell.
    pub conventional: OverheadRow,
}

/// Integers print bare; other values print their shortest decimal form.
pub fn fmt_ratio(r: &Rational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        (*r.numer() as f64 / *r.denom() as f64).to_string()
    }
}

pub fn overhead_ledger(inputs: &OverheadInputs) -> Result<OverheadLedger> {
    if inputs.epoch == 0 {
        return Err(Error::Config("epoch T must be positive".into()));
    }
    let per_epoch = |x: Rational| x / Rational::from_integer(inputs.epoch);
    let int = Rational::from_integer;
    let m = inputs.antennas;
    let k0 = int(inputs.users_per_cell);
    let r = int(inputs.rank);
    let real_time = OverheadRow::new(
        Some(int(inputs.subspace_dim)),
        vec![VectorCount {
            count: k0,
            dim: Some(inputs.subspace_dim),
            complex: true,
        }],
    );
    let statistical = OverheadRow::new(
        Some(per_epoch(int(m * inputs.stat_samples))),
        vec![
            VectorCount {
                count: per_epoch(k0 * inputs.links_per_user * r),
                dim: Some(m),
                complex: true,
            },
            VectorCount {
                count: per_epoch(k0 * inputs.links_per_user),
                dim: Some(inputs.rank),
                complex: false,
            },
        ],
    );
    let nl = per_epoch(int(inputs.total_links) * r);
    let backhaul = OverheadRow::new(
        None,
        vec![
            VectorCount {
                count: nl,
                dim: Some(m),
                complex: true,
            },
            VectorCount {
                count: nl,
                dim: None,
                complex: false,
            },
        ],
    );
    let conventional = OverheadRow::new(
        Some(int(m)),
        vec![VectorCount {
            count: k0,
            dim: Some(m),
            complex: true,
        }],
    );
    Ok(OverheadLedger {
        inputs: inputs.clone(),
        real_time,
        statistical,
        backhaul,
        conventional,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic(epoch: u64) -> OverheadInputs {
        OverheadInputs {
            antennas: 40,
            users_per_cell: 7,
            subspace_dim: 9,
            rank: 6,
            stat_samples: 20,
            epoch,
            links_per_user: Rational::from_integer(3),
            total_links: 399,
        }
    }

    #[test]
    fn real_time_row() {
        let l = overhead_ledger(&basic(1000)).unwrap();
        assert_eq!(l.real_time.label, "9 PS, 7 C^9");
        assert_eq!(l.conventional.label, "40 PS, 7 C^40");
    }

    #[test]
    fn statistical_pilots() {
        let l = overhead_ledger(&basic(1000)).unwrap();
        assert_eq!(l.statistical.pilots, Some(Rational::new(4, 5)));
        assert!(l.statistical.label.starts_with("0.8 PS"));
    }

    #[test]
    fn long_epoch_vanishes() {
        let l = overhead_ledger(&basic(u64::MAX / 1_000_000)).unwrap();
        let small = |r: &Rational| (*r.numer() as f64 / *r.denom() as f64) < 1e-9;
        assert!(small(l.statistical.pilots.as_ref().unwrap()));
        assert!(l.statistical.vectors.iter().all(|v| small(&v.count)));
        assert!(l.backhaul.vectors.iter().all(|v| small(&v.count)));
    }
}
