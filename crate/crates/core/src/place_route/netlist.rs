use serde::{Deserialize, Serialize};

use crate::cluster::Clustering;

/// One spin broadcasting its value from its own block to every block that
/// reads it as an external input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub spin: usize,
    pub source: usize,
    /// Reading blocks, ascending; never contains `source`.
    pub sinks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub num_blocks: usize,
    pub nets: Vec<Net>,
}

impl Netlist {
    /// For each block, the nets touching it (as source or sink), ascending.
    pub fn block_nets(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks];
        for (k, net) in self.nets.iter().enumerate() {
            out[net.source].push(k);
            for &s in &net.sinks {
                out[s].push(k);
            }
        }
        out
    }

    pub fn total_sinks(&self) -> usize {
        self.nets.iter().map(|n| n.sinks.len()).sum()
    }
}

/// Derives block-to-block connectivity from a clustering. Spins whose
/// neighbors are all co-clustered produce no net.
pub fn build_netlist(c: &Clustering) -> Netlist {
    let n = c
        .clusters
        .iter()
        .flat_map(|cl| cl.members.iter().chain(cl.inputs.iter()))
        .max()
        .map_or(0, |m| m + 1);
    let owner = c.owners(n);
    let mut sinks: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, cl) in c.clusters.iter().enumerate() {
        for s in cl.external_inputs() {
            sinks[s].push(k);
        }
    }
    let nets = sinks
        .into_iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(spin, mut s)| {
            s.sort_unstable();
            s.dedup();
            Net {
                spin,
                source: owner[spin],
                sinks: s,
            }
        })
        .collect();
    Netlist {
        num_blocks: c.len(),
        nets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{ffd_pack, Cluster, ClusterParams};
    use crate::qubo::QuboBuilder;

    #[test]
    fn single_cluster_has_no_nets() {
        let mut b = QuboBuilder::<i64>::new(3);
        b.add_coupling(0, 1, 1).unwrap();
        b.add_coupling(1, 2, 1).unwrap();
        let c = ffd_pack(&b.build(), &ClusterParams::new(4, 4)).unwrap();
        let nl = build_netlist(&c);
        assert_eq!(nl.num_blocks, 1);
        assert!(nl.nets.is_empty());
    }

    #[test]
    fn symmetric_coupling_needs_both_directions() {
        // 0-based: A = {0, 1}, B = {2}, coupling (1, 2).
        let c = Clustering {
            clusters: vec![
                Cluster {
                    members: vec![0, 1],
                    inputs: vec![2],
                },
                Cluster {
                    members: vec![2],
                    inputs: vec![1],
                },
            ],
        };
        let nl = build_netlist(&c);
        assert_eq!(
            nl.nets,
            vec![
                Net {
                    spin: 1,
                    source: 0,
                    sinks: vec![1]
                },
                Net {
                    spin: 2,
                    source: 1,
                    sinks: vec![0]
                },
            ]
        );
    }

    #[test]
    fn worked_example_nets() {
        let mut b = QuboBuilder::<i64>::new(4);
        for (i, j) in [(0, 1), (0, 2), (1, 2), (2, 3)] {
            b.add_coupling(i, j, 1).unwrap();
        }
        // Clusters {2}, {0,1}, {3}.
        let c = ffd_pack(&b.build(), &ClusterParams::new(3, 2)).unwrap();
        let nl = build_netlist(&c);
        let summary: Vec<(usize, usize, Vec<usize>)> = nl
            .nets
            .iter()
            .map(|n| (n.spin, n.source, n.sinks.clone()))
            .collect();
        assert_eq!(
            summary,
            vec![
                (0, 1, vec![0]),
                (1, 1, vec![0]),
                (2, 0, vec![1, 2]),
                (3, 2, vec![0])
            ]
        );
        for net in &nl.nets {
            assert!(!net.sinks.is_empty());
            assert!(!net.sinks.contains(&net.source));
        }
        assert_eq!(nl.block_nets()[0], vec![0, 1, 2, 3]);
    }
}
