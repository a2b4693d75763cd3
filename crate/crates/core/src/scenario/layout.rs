//! Hexagonal cell layout and user drops.

use std::f64::consts::PI;

use rand::Rng;

use super::config::ScenarioConfig;
use super::pathloss::pathloss_urban_macro;
use super::topology::{Cluster, TopologyGraph};
use crate::error::Result;
use crate::rng;

/// BS coordinates: the reference cell first, then ring by ring,
/// counter-clockwise from the positive x axis.
pub fn hex_sites(num_tiers: u32, isd: f64) -> Vec<[f64; 2]> {
    let t = num_tiers as i64;
    let mut cells: Vec<(i64, f64, [f64; 2])> = Vec::new();
    for q in -t..=t {
        for r in -t..=t {
            let s = -q - r;
            let ring = q.abs().max(r.abs()).max(s.abs());
            if ring > t {
                continue;
            }
            let x = isd * (q as f64 + r as f64 / 2.0);
            let y = isd * 3f64.sqrt() / 2.0 * r as f64;
            let mut angle = y.atan2(x);
            if angle < -1e-9 {
                angle += 2.0 * PI;
            }
            cells.push((ring, angle.max(0.0), [x, y]));
        }
    }
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cells.into_iter().map(|c| c.2).collect()
}

/// Whether `p` (relative to the site) lies in the hexagonal cell of a
/// lattice with inter-site distance `isd`.
pub fn in_hex_cell(p: [f64; 2], isd: f64) -> bool {
    (0..3).all(|j| {
        let a = j as f64 * PI / 3.0;
        (p[0] * a.cos() + p[1] * a.sin()).abs() <= isd / 2.0
    })
}

fn norm(p: [f64; 2]) -> f64 {
    p[0].hypot(p[1])
}

fn uniform_in_disk<R: Rng>(rng: &mut R, radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random::<f64>() * 2.0 * PI;
    [r * a.cos(), r * a.sin()]
}

fn uniform_in_annulus<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> [f64; 2] {
    let u: f64 = rng.random();
    let r = (lo * lo + u * (hi * hi - lo * lo)).sqrt();
    let a = rng.random::<f64>() * 2.0 * PI;
    [r * a.cos(), r * a.sin()]
}

/// Draws users and clusters and connects user/BS pairs whose average gain is
/// within the edge threshold of the direct link.
pub fn build_layout(config: &ScenarioConfig) -> Result<TopologyGraph> {
    Ok(layout_with_gains(config)?.0)
}

/// [`build_layout`] plus the normalized gain of every user/BS pair.
pub fn layout_with_gains(config: &ScenarioConfig) -> Result<(TopologyGraph, Vec<Vec<f64>>)> {
    config.validate()?;
    let isd = config.inter_site_distance;
    let radius = config.cell_radius();
    let sites = match &config.sites {
        Some(s) => s.clone(),
        None => hex_sites(config.num_tiers, isd),
    };
    let mut rng = rng::stream(config.rng_seed, rng::DOMAIN_LAYOUT, 0);
    let dmin = config.min_distance;
    let mut users = Vec::new();
    let mut clusters = Vec::new();
    for (l, site) in sites.iter().enumerate() {
        let offset = |p: [f64; 2]| [site[0] + p[0], site[1] + p[1]];
        for _ in 0..config.hotspots_per_cell {
            let center = loop {
                let c = uniform_in_annulus(&mut rng, 0.2 * radius, 0.9 * radius);
                if in_hex_cell(c, isd) {
                    break c;
                }
            };
            let mut members = Vec::new();
            for _ in 0..config.users_per_hotspot {
                let p = loop {
                    let d = uniform_in_disk(&mut rng, config.hotspot_radius);
                    let p = [center[0] + d[0], center[1] + d[1]];
                    if norm(p) >= dmin {
                        break p;
                    }
                };
                members.push(users.len());
                users.push(offset(p));
            }
            clusters.push(Cluster { bs: l, users: members });
        }
        let singles = config.users_per_cell - config.hotspots_per_cell * config.users_per_hotspot;
        for _ in 0..singles {
            let p = loop {
                let p = uniform_in_disk(&mut rng, radius);
                if norm(p) >= dmin && in_hex_cell(p, isd) {
                    break p;
                }
            };
            clusters.push(Cluster {
                bs: l,
                users: vec![users.len()],
            });
            users.push(offset(p));
        }
    }
    let gains = raw_gains(config, &sites, &users)?;
    let mut serving = vec![0; users.len()];
    for c in &clusters {
        for &k in &c.users {
            serving[k] = c.bs;
        }
    }
    let mut edges = Vec::new();
    for (k, row) in gains.iter().enumerate() {
        let direct = row[serving[k]];
        for (l, &g) in row.iter().enumerate() {
            let keep = match config.edge_threshold_db {
                None => true,
                Some(db) => l == serving[k] || g >= direct * 10f64.powf(db / 10.0),
            };
            if keep {
                edges.push((k, l));
            }
        }
    }
    let topo = TopologyGraph::from_parts(sites.len(), clusters, edges, sites, users)?;
    Ok((topo, gains))
}

/// Normalized average gains `L_{k,l}` for every user/BS pair.
pub fn raw_gains(
    config: &ScenarioConfig,
    sites: &[[f64; 2]],
    users: &[[f64; 2]],
) -> Result<Vec<Vec<f64>>> {
    let reference = config.pathloss_reference.unwrap_or(config.cell_radius());
    let g0 = pathloss_urban_macro(reference)?;
    let mut shadow = rng::stream(config.rng_seed, rng::DOMAIN_SHADOWING, 0);
    users
        .iter()
        .map(|u| {
            sites
                .iter()
                .map(|s| {
                    let d = norm([u[0] - s[0], u[1] - s[1]]).max(config.min_distance);
                    let mut g = pathloss_urban_macro(d)? / g0;
                    if let Some(sd) = config.shadowing_db {
                        let z: f64 = shadow.sample(rand_distr::StandardNormal);
                        g *= 10f64.powf(sd * z / 10.0);
                    }
                    Ok(g)
                })
                .collect()
        })
        .collect()
}
