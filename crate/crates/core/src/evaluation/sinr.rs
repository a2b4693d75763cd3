//! Per-draw SINR with inner precoders built from (possibly perturbed) CSI.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, CMatrix, CVector};
use crate::precoding::{
    default_rzf_alpha, effective_channel, rzf_inner, stack_effective, zf_inner, InnerKind,
    PowerAllocation, SubspaceControl,
};
use crate::scenario::{ChannelDraw, Scenario};

/// Signal and interference powers of one user in one draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrTerms {
    pub signal: f64,
    /// Leakage from the other users of the same cluster.
    pub intra: f64,
    /// Leakage from the clusters in `B_k`.
    pub inter: f64,
    pub sinr: f64,
}

/// `ĥ = h̃ − e` with `e ~ CN(0, σ_e² I)` on every row of the stacked effective channel.
pub fn perturb_csi<R: Rng + ?Sized>(htilde: &CMatrix, sigma_e: f64, rng: &mut R) -> CMatrix {
    if sigma_e == 0.0 {
        return htilde.clone();
    }
    let (rows, cols) = htilde.shape();
    let mut out = htilde.clone();
    for r in 0..rows {
        let e = complex_gaussian(rng, cols);
        for c in 0..cols {
            out[(r, c)] -= e[c].scale(sigma_e);
        }
    }
    out
}

/// Stacked effective channels `H̃_n` (row `i` is `h̃ᴴ` of the `i`-th member).
pub fn cluster_effective(
    scenario: &Scenario,
    control: &SubspaceControl,
    draw: &ChannelDraw,
    n: usize,
) -> Result<CMatrix> {
    let c = &scenario.topology.clusters[n];
    let rows = c
        .users
        .iter()
        .map(|&k| {
            let idx = scenario.link_index(k, c.bs).expect("direct edge");
            effective_channel(&control.f[n], &draw.h[idx])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(stack_effective(&rows))
}

/// RZF regularization for cluster `n` when none is configured.
fn rzf_alpha(scenario: &Scenario, control: &SubspaceControl, n: usize) -> f64 {
    let bs = scenario.topology.clusters[n].bs;
    let cells: Vec<usize> = scenario.topology.clusters_of_bs(bs).collect();
    let dims: usize = cells.iter().map(|&m| control.f[m].ncols()).sum();
    let members = &scenario.topology.clusters[n].users;
    let power = members.iter().map(|&k| scenario.powers[k]).sum::<f64>() / members.len() as f64;
    default_rzf_alpha(scenario.config.users_per_cell, dims, power)
}

/// Inner precoders `G_n` of every cluster from the CSI `ĥ = h̃ − e`.
pub fn inner_precoders<R: Rng + ?Sized>(
    scenario: &Scenario,
    control: &SubspaceControl,
    draw: &ChannelDraw,
    kind: InnerKind,
    sigma_e: f64,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    (0..scenario.topology.num_clusters())
        .map(|n| {
            let h = cluster_effective(scenario, control, draw, n)?;
            let h = perturb_csi(&h, sigma_e, rng);
            match kind {
                InnerKind::Zf => zf_inner(&h, n),
                InnerKind::Rzf(alpha) => {
                    rzf_inner(&h, alpha.unwrap_or_else(|| rzf_alpha(scenario, control, n)))
                }
            }
        })
        .collect()
}

/// `h_{k,l}ᴴ F_n G_n` for user `k` and cluster `n`.
fn composite_gains(
    scenario: &Scenario,
    control: &SubspaceControl,
    inner: &[CMatrix],
    draw: &ChannelDraw,
    k: usize,
    n: usize,
) -> CVector {
    let bs = scenario.topology.clusters[n].bs;
    let h = &draw.h[scenario.link_index(k, bs).expect("linked")];
    let row = h.adjoint() * &control.f[n] * &inner[n];
    row.transpose()
}

/// SINR of user `k` with its intra- and inter-cluster terms.
pub fn sinr_terms(
    scenario: &Scenario,
    control: &SubspaceControl,
    inner: &[CMatrix],
    power: &PowerAllocation,
    draw: &ChannelDraw,
    k: usize,
) -> SinrTerms {
    let topo = &scenario.topology;
    let own = topo.user_cluster[k];
    let gains = composite_gains(scenario, control, inner, draw, k, own);
    let mut signal = 0.0;
    let mut intra = 0.0;
    for (i, &j) in topo.clusters[own].users.iter().enumerate() {
        let p = power.per_user[j] * gains[i].norm_sqr();
        if j == k {
            signal = p;
        } else {
            intra += p;
        }
    }
    let mut inter = 0.0;
    for &n in &topo.interferers[k] {
        let g = composite_gains(scenario, control, inner, draw, k, n);
        for (i, &j) in topo.clusters[n].users.iter().enumerate() {
            inter += power.per_user[j] * g[i].norm_sqr();
        }
    }
    SinrTerms {
        signal,
        intra,
        inter,
        sinr: signal / (intra + inter + 1.0),
    }
}

pub fn sinr(
    scenario: &Scenario,
    control: &SubspaceControl,
    inner: &[CMatrix],
    power: &PowerAllocation,
    draw: &ChannelDraw,
    k: usize,
) -> f64 {
    sinr_terms(scenario, control, inner, power, draw, k).sinr
}

/// Checks that a precoder set matches the scenario's cluster layout.
pub fn check_shapes(scenario: &Scenario, control: &SubspaceControl) -> Result<()> {
    let topo = &scenario.topology;
    if control.num_clusters() != topo.num_clusters() {
        return Err(Error::Dimension(format!(
            "{} subspaces for {} clusters",
            control.num_clusters(),
            topo.num_clusters()
        )));
    }
    for (n, f) in control.f.iter().enumerate() {
        if f.nrows() != scenario.antennas() || f.ncols() < topo.cluster_size(n) {
            return Err(Error::Dimension(format!(
                "cluster {n}: F is {}x{}, need {} rows and at least {} columns",
                f.nrows(),
                f.ncols(),
                scenario.antennas(),
                topo.cluster_size(n)
            )));
        }
    }
    Ok(())
}
