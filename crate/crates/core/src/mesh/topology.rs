use super::TriMesh;
use crate::error::{Error, Result};

/// Node adjacency of a mesh (or any undirected simple graph).
///
/// Directed edges are enumerated in CSR order: all `(i, j)` with
/// `j ∈ 𝒩(i)` for `i = 0, 1, ...`, neighbors ascending. Edge attribute
/// rows and message buffers use the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    norm: Vec<f64>,
    offsets: Vec<usize>,
    sources: Vec<usize>,
    targets: Vec<usize>,
}

/// Extracts the node adjacency of `mesh`: nodes sharing a triangle are
/// connected.
pub fn build_topology(mesh: &TriMesh) -> Result<GraphTopology> {
    mesh.validate()?;
    let mut edges = Vec::with_capacity(3 * mesh.n_triangles());
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            edges.push((a.min(b), a.max(b)));
        }
    }
    GraphTopology::from_edges(mesh.n_nodes(), &edges)
}

impl GraphTopology {
    /// Builds a topology from undirected edges; duplicates and either
    /// orientation are accepted. Nodes without edges get degree 0 and
    /// normalization 0.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n_nodes];
        for &(a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            if a == b {
                return Err(Error::InvalidMesh(format!("self edge at node {a}")));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        let degrees: Vec<usize> = neighbors.iter().map(Vec::len).collect();
        let norm = degrees
            .iter()
            .map(|&d| if d == 0 { 0.0 } else { 1.0 / d as f64 })
            .collect();
        let mut undirected = Vec::new();
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        let mut sources = Vec::new();
        let mut targets = Vec::new();
        offsets.push(0);
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if i < j {
                    undirected.push((i, j));
                }
                sources.push(i);
                targets.push(j);
            }
            offsets.push(targets.len());
        }
        Ok(GraphTopology {
            neighbors,
            edges: undirected,
            degrees,
            norm,
            offsets,
            sources,
            targets,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn neighbor_lists(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// `1 / |𝒩(i)|`, or 0 for isolated nodes.
    pub fn norm(&self) -> &[f64] {
        &self.norm
    }

    pub fn n_directed(&self) -> usize {
        self.targets.len()
    }

    /// Source node of each directed edge.
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// Target node of each directed edge.
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Directed edges leaving `i` occupy `offsets[i]..offsets[i + 1]`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn directed_index(&self, i: usize, j: usize) -> Option<usize> {
        self.neighbors[i]
            .binary_search(&j)
            .ok()
            .map(|k| self.offsets[i] + k)
    }

    /// Same graph with node `i` renamed `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| (perm[a], perm[b]))
            .collect();
        Self::from_edges(self.n_nodes(), &edges).expect("permutation of a valid graph")
    }
}
