use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A user cluster served by one BS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub bs: usize,
    pub users: Vec<usize>,
}

/// Cluster layout and the interference graph.
///
/// `interferers[k]` lists the clusters `n ≠ n̄_k` whose serving BS has an edge
/// to user `k`, which includes other clusters of the user's own cell.
/// `interfered[n]` is the reverse relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyGraph {
    pub num_bs: usize,
    pub bs_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    pub serving: Vec<usize>,
    pub clusters: Vec<Cluster>,
    pub user_cluster: Vec<usize>,
    /// Sorted `(user, bs)` pairs.
    pub edges: Vec<(usize, usize)>,
    pub interferers: Vec<Vec<usize>>,
    pub interfered: Vec<Vec<usize>>,
}

impl TopologyGraph {
    /// Builds the derived relations from clusters and edges. Positions may be
    /// empty for synthetic topologies.
    pub fn from_parts(
        num_bs: usize,
        clusters: Vec<Cluster>,
        mut edges: Vec<(usize, usize)>,
        bs_positions: Vec<[f64; 2]>,
        user_positions: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let num_users = clusters.iter().map(|c| c.users.len()).sum::<usize>();
        let mut user_cluster = vec![usize::MAX; num_users];
        let mut serving = vec![usize::MAX; num_users];
        for (n, c) in clusters.iter().enumerate() {
            if c.bs >= num_bs {
                return Err(Error::Config(format!("cluster {n} served by unknown BS {}", c.bs)));
            }
            if c.users.is_empty() {
                return Err(Error::Config(format!("cluster {n} is empty")));
            }
            for &k in &c.users {
                if k >= num_users || user_cluster[k] != usize::MAX {
                    return Err(Error::Config(format!(
                        "user {k} is out of range or in more than one cluster"
                    )));
                }
                user_cluster[k] = n;
                serving[k] = c.bs;
            }
        }
        for (k, &b) in serving.iter().enumerate() {
            edges.push((k, b));
        }
        edges.sort_unstable();
        edges.dedup();
        if let Some(&(k, l)) = edges.iter().find(|&&(k, l)| k >= num_users || l >= num_bs) {
            return Err(Error::Config(format!("edge ({k}, {l}) out of range")));
        }
        let mut interferers = vec![Vec::new(); num_users];
        let mut interfered = vec![Vec::new(); clusters.len()];
        for (k, list) in interferers.iter_mut().enumerate() {
            for (n, c) in clusters.iter().enumerate() {
                if n != user_cluster[k] && edges.binary_search(&(k, c.bs)).is_ok() {
                    list.push(n);
                    interfered[n].push(k);
                }
            }
        }
        Ok(Self {
            num_bs,
            bs_positions,
            user_positions,
            serving,
            clusters,
            user_cluster,
            edges,
            interferers,
            interfered,
        })
    }

    pub fn num_users(&self) -> usize {
        self.serving.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn has_edge(&self, user: usize, bs: usize) -> bool {
        self.edges.binary_search(&(user, bs)).is_ok()
    }

    pub fn cluster_size(&self, n: usize) -> usize {
        self.clusters[n].users.len()
    }

    /// Clusters served by BS `l`.
    pub fn clusters_of_bs(&self, l: usize) -> impl Iterator<Item = usize> + '_ {
        self.clusters
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.bs == l)
            .map(|(n, _)| n)
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        for k in 0..self.num_users() {
            let n = self.user_cluster[k];
            if self.clusters[n].bs != self.serving[k] || !self.has_edge(k, self.serving[k]) {
                return Err(Error::Config(format!("user {k} has an inconsistent serving link")));
            }
            for &m in &self.interferers[k] {
                if !self.interfered[m].contains(&k) {
                    return Err(Error::Config(format!("B_{k} and Ū_{m} disagree")));
                }
            }
        }
        for (n, list) in self.interfered.iter().enumerate() {
            for &k in list {
                if !self.interferers[k].contains(&n) {
                    return Err(Error::Config(format!("Ū_{n} and B_{k} disagree")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_sets_are_consistent() {
        // BS 0 serves clusters {0,1} and {2}; BS 1 serves {3}.
        let clusters = vec![
            Cluster { bs: 0, users: vec![0, 1] },
            Cluster { bs: 0, users: vec![2] },
            Cluster { bs: 1, users: vec![3] },
        ];
        let t = TopologyGraph::from_parts(2, clusters, vec![(0, 1), (3, 0)], vec![], vec![])
            .unwrap();
        t.validate().unwrap();
        assert_eq!(t.interferers[0], vec![1, 2]);
        assert_eq!(t.interferers[1], vec![1]);
        assert_eq!(t.interferers[2], vec![0]);
        assert_eq!(t.interferers[3], vec![0, 1]);
        assert_eq!(t.interfered[0], vec![2, 3]);
        assert_eq!(t.interfered[2], vec![0]);
        assert!(t.has_edge(2, 0) && !t.has_edge(2, 1));
    }

    #[test]
    fn rejects_double_membership() {
        let clusters = vec![
            Cluster { bs: 0, users: vec![0] },
            Cluster { bs: 0, users: vec![0] },
        ];
        assert!(TopologyGraph::from_parts(1, clusters, vec![], vec![], vec![]).is_err());
    }
}
