//! Contiguity graph over regions, shortest path lengths, and neighborhood
//! balls.
//!
//! Two regions are adjacent when their geometries intersect anywhere,
//! boundaries included — shared edges and single corner points both count
//! (queen contiguity). Path lengths are materialized up to a fixed horizon
//! with per-source breadth-first traversal; the repeated-adjacency-matrix
//! formulation survives as a test oracle.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::exec;
use crate::ingest::{RegionId, RegionSet};

/// Sentinel for pairs farther apart than the horizon (or disconnected).
pub const UNREACHABLE: u16 = u16::MAX;

#[derive(Clone, Debug)]
pub struct RegionGraph {
    ids: Vec<RegionId>,
    index: BTreeMap<RegionId, usize>,
    neighbors: Vec<Vec<usize>>,
    dist: Vec<u16>,
    horizon: usize,
}

impl RegionGraph {
    /// Builds adjacency from polygon intersection and materializes path
    /// lengths up to `horizon`.
    pub fn build(regions: &RegionSet, horizon: usize) -> RegionGraph {
        Self::build_impl(regions, horizon, exec::default_parallel())
    }

    /// Single-threaded [`RegionGraph::build`].
    pub fn build_seq(regions: &RegionSet, horizon: usize) -> RegionGraph {
        Self::build_impl(regions, horizon, false)
    }

    fn build_impl(regions: &RegionSet, horizon: usize, parallel: bool) -> RegionGraph {
        let entries: Vec<(&RegionId, &crate::ingest::Region)> = regions.iter().collect();
        let n = entries.len();
        // Row i holds the neighbors of i among j > i; mirrored below.
        let upper = exec::map_indices(n, parallel, |i| {
            let gi = &entries[i].1.geometry;
            (i + 1..n)
                .filter(|&j| {
                    let gj = &entries[j].1.geometry;
                    gi.bbox().intersects(gj.bbox()) && gi.intersects(gj)
                })
                .collect::<Vec<usize>>()
        });
        let mut neighbors = vec![Vec::new(); n];
        for (i, row) in upper.into_iter().enumerate() {
            for j in row {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let ids: Vec<RegionId> = entries.iter().map(|(id, _)| (*id).clone()).collect();
        Self::from_parts(ids, neighbors, horizon, parallel)
    }

    /// Builds a graph from an explicit edge list (node order = sorted ids).
    /// Self-edges are ignored; edges are symmetrized.
    pub fn from_edges(mut ids: Vec<RegionId>, edges: &[(usize, usize)], horizon: usize) -> RegionGraph {
        ids.sort();
        let n = ids.len();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            assert!(a < n && b < n, "edge endpoint out of range");
            if a == b {
                continue;
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self::from_parts(ids, neighbors, horizon, exec::default_parallel())
    }

    fn from_parts(
        ids: Vec<RegionId>,
        neighbors: Vec<Vec<usize>>,
        horizon: usize,
        parallel: bool,
    ) -> RegionGraph {
        let n = ids.len();
        let rows = exec::map_indices(n, parallel, |src| bfs_row(&neighbors, src, horizon));
        let mut dist = Vec::with_capacity(n * n);
        for row in rows {
            dist.extend_from_slice(&row);
        }
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        RegionGraph {
            ids,
            index,
            neighbors,
            dist,
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Node ids in node-index order (sorted).
    pub fn ids(&self) -> &[RegionId] {
        &self.ids
    }

    pub fn id(&self, idx: usize) -> &RegionId {
        &self.ids[idx]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, idx: usize) -> &[usize] {
        &self.neighbors[idx]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Path length between two nodes, `None` when above the horizon or
    /// disconnected.
    pub fn distance(&self, a: usize, b: usize) -> Option<u16> {
        let d = self.dist[a * self.ids.len() + b];
        (d != UNREACHABLE).then_some(d)
    }

    /// Node indices within path length `m` of `center` (the center itself
    /// included), in node-index order.
    pub fn ball_indices(&self, center: usize, m: usize) -> Result<Vec<usize>> {
        if m > self.horizon {
            return Err(Error::HorizonExceeded {
                m,
                horizon: self.horizon,
            });
        }
        let row = &self.dist[center * self.ids.len()..(center + 1) * self.ids.len()];
        Ok(row
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != UNREACHABLE && d as usize <= m)
            .map(|(j, _)| j)
            .collect())
    }

    /// [`RegionGraph::ball_indices`] addressed by region id.
    pub fn ball(&self, center: &str, m: usize) -> Result<Vec<&RegionId>> {
        let idx = self
            .node_index(center)
            .ok_or_else(|| Error::UnknownRegion(center.to_owned()))?;
        Ok(self
            .ball_indices(idx, m)?
            .into_iter()
            .map(|j| &self.ids[j])
            .collect())
    }

    /// Undirected edges as id pairs, lexicographically ordered within each
    /// pair and across the list.
    pub fn edges(&self) -> Vec<(&RegionId, &RegionId)> {
        let mut out = Vec::new();
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                if i < j {
                    out.push((&self.ids[i], &self.ids[j]));
                }
            }
        }
        out
    }

    /// Edge list as CSV (`id_a,id_b`, sorted).
    pub fn edges_csv(&self) -> String {
        let mut out = String::from("id_a,id_b\n");
        for (a, b) in self.edges() {
            out.push_str(a.as_str());
            out.push(',');
            out.push_str(b.as_str());
            out.push('\n');
        }
        out
    }
}

fn bfs_row(neighbors: &[Vec<usize>], src: usize, horizon: usize) -> Vec<u16> {
    let n = neighbors.len();
    let mut row = vec![UNREACHABLE; n];
    row[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let du = row[u];
        if du as usize >= horizon {
            continue;
        }
        for &v in &neighbors[u] {
            if row[v] == UNREACHABLE {
                row[v] = du + 1;
                queue.push_back(v);
            }
        }
    }
    row
}
