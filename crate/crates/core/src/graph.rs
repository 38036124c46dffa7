//! Union-find and connected components of ε-proximity graphs.

use crate::error::Result;
use crate::manifold::{NeighborIndex, PointCloud};

#[derive(Clone, Debug)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != node {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] = self.rank[a].saturating_add(1);
        }
        a
    }

    /// Components as sorted member lists, ordered by smallest member.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut slot = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = self.find(i);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Vec::new());
            }
            out[slot[r]].push(i);
        }
        out
    }
}

/// Connected components of the graph joining points closer than `eps`
/// (strict inequality). Neighbours come from a grid/k-d index.
pub fn epsilon_components(points: &PointCloud, eps: f64) -> Result<Vec<Vec<usize>>> {
    let mut ds = DisjointSet::new(points.len());
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let index = NeighborIndex::for_radius(points.clone(), eps)?;
    let mut buf = Vec::new();
    for i in 0..points.len() {
        index.within(points.row(i), eps, false, &mut buf);
        for &j in buf.iter().filter(|&&j| j > i) {
            ds.union(i, j);
        }
    }
    Ok(ds.components())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unions_merge() {
        let mut ds = DisjointSet::new(5);
        ds.union(0, 3);
        ds.union(3, 4);
        assert_eq!(ds.components(), vec![vec![0, 3, 4], vec![1], vec![2]]);
    }

    #[test]
    fn chains_split_by_gap() {
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push([i as f64 * 0.5, 0.0]);
        }
        for i in 0..4 {
            rows.push([4.5 + 5.0 + i as f64 * 0.5, 0.0]);
        }
        let comps = epsilon_components(&PointCloud::from_rows(&rows).unwrap(), 1.2).unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].len(), 10);
        assert_eq!(comps[1], vec![10, 11, 12, 13]);
    }
}
