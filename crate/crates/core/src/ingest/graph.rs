use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::ingest::Fips;

/// Symmetric county adjacency with neighbor lists sorted ascending by FIPS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    neighbors: BTreeMap<Fips, Vec<Fips>>,
}

impl AdjacencyGraph {
    /// Builds the graph over `counties` from undirected edges. An edge listed
    /// in one direction only is symmetrized; self-loops and FIPS outside
    /// `counties` are rejected. Counties without edges are kept, with no
    /// neighbors.
    pub fn from_edges(edges: &[(Fips, Fips)], counties: &[Fips]) -> Result<Self> {
        let mut sets: BTreeMap<Fips, BTreeSet<Fips>> =
            counties.iter().map(|&c| (c, BTreeSet::new())).collect();
        for &(a, b) in edges {
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            for c in [a, b] {
                if !sets.contains_key(&c) {
                    return Err(Error::UnknownCounty(c));
                }
            }
            sets.get_mut(&a).expect("checked").insert(b);
            sets.get_mut(&b).expect("checked").insert(a);
        }
        let neighbors: BTreeMap<Fips, Vec<Fips>> = sets
            .into_iter()
            .map(|(c, s)| (c, s.into_iter().collect()))
            .collect();
        let isolated = neighbors.values().filter(|n| n.is_empty()).count();
        if isolated > 0 {
            log::warn!("{isolated} counties have no neighbors; their neighbor features will be fully missing");
        }
        Ok(AdjacencyGraph { neighbors })
    }

    /// Graph with every county isolated.
    pub fn isolated(counties: &[Fips]) -> Self {
        AdjacencyGraph {
            neighbors: counties.iter().map(|&c| (c, Vec::new())).collect(),
        }
    }

    pub fn counties(&self) -> impl Iterator<Item = Fips> + '_ {
        self.neighbors.keys().copied()
    }

    pub fn contains(&self, county: Fips) -> bool {
        self.neighbors.contains_key(&county)
    }

    pub fn neighbors(&self, county: Fips) -> &[Fips] {
        self.neighbors.get(&county).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn degree(&self, county: Fips) -> usize {
        self.neighbors(county).len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.values().map(Vec::len).sum::<usize>() / 2
    }
}
