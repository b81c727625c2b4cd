//! Directed graphs on `0..n`: strongly connected components and bottom components.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

/// Directed graph on dense node indices.
#[derive(Clone, Debug, Default)]
pub struct Digraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Digraph {
            n,
            edges: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        debug_assert!(a < self.n && b < self.n);
        self.edges.push((a, b));
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn petgraph(&self) -> DiGraph<(), ()> {
        let mut g = DiGraph::with_capacity(self.n, self.edges.len());
        for _ in 0..self.n {
            g.add_node(());
        }
        for &(a, b) in &self.edges {
            g.add_edge(NodeIndex::new(a), NodeIndex::new(b), ());
        }
        g
    }

    /// Components, each sorted, listed in order of their least node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut comps: Vec<Vec<usize>> = tarjan_scc(&self.petgraph())
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|i| i.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        comps.sort();
        comps
    }

    /// Components with no edge leaving them: the minimal closed invariant sets.
    pub fn bottom_components(&self) -> Vec<Vec<usize>> {
        let comps = self.components();
        let mut owner = vec![0; self.n];
        for (i, c) in comps.iter().enumerate() {
            for &v in c {
                owner[v] = i;
            }
        }
        let mut leaves = vec![false; comps.len()];
        for &(a, b) in &self.edges {
            if owner[a] != owner[b] {
                leaves[owner[a]] = true;
            }
        }
        comps
            .into_iter()
            .zip(leaves)
            .filter(|(_, l)| !l)
            .map(|(c, _)| c)
            .collect()
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.n <= 1 || self.components().len() == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_with_tail() {
        let mut g = Digraph::new(4);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(2, 1);
        g.add_edge(3, 3);
        assert_eq!(g.components(), vec![vec![0], vec![1, 2], vec![3]]);
        assert_eq!(g.bottom_components(), vec![vec![1, 2], vec![3]]);
        assert!(!g.is_strongly_connected());
        g.add_edge(2, 0);
        g.add_edge(1, 3);
        g.add_edge(3, 0);
        assert!(g.is_strongly_connected());
    }
}
