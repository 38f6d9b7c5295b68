//! Unstructured triangular meshes, the graph topology they induce, per-edge
//! attributes, and resampling between meshes and regular grids.

mod edges;
mod grid;
mod topology;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use edges::{compute_edge_attributes, EdgeAttributes, EDGE_ATTRIBUTE_NAMES, N_EDGE_ATTRIBUTES};
pub use grid::{grid_to_mesh, mesh_to_grid, GridSpec, MeshGridMap, RegularGrid};
pub use topology::{build_topology, GraphTopology};

/// Nodes closer than this are treated as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryFlag {
    Interior,
    Lateral,
    /// Marine-terminating ice front (open to the ocean).
    Front,
}

/// Planar triangle mesh. Coordinates are in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryFlag>,
}

impl TriMesh {
    /// Builds and validates a mesh.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryFlag>,
    ) -> Result<Self> {
        let mesh = TriMesh {
            nodes,
            triangles,
            boundary,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Mesh with every node flagged interior.
    pub fn from_triangles(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = nodes.len();
        Self::new(nodes, triangles, vec![BoundaryFlag::Interior; n])
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Checks index ranges, orientation, non-degeneracy, orphan nodes and
    /// duplicate coordinates.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 || self.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if n < 3 {
            return Err(Error::InvalidMesh(format!("{n} nodes; at least 3 required")));
        }
        if self.boundary.len() != n {
            return Err(Error::InvalidMesh(format!(
                "{} boundary flags for {n} nodes",
                self.boundary.len()
            )));
        }
        if let Some(i) = self
            .nodes
            .iter()
            .position(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidMesh(format!("node {i} has non-finite coordinates")));
        }
        let mut used = vec![false; n];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(Error::IndexOutOfRange {
                        triangle: t,
                        node: v,
                        n_nodes: n,
                    });
                }
                used[v] = true;
            }
            let area = self.signed_area(t);
            let scale = self.longest_edge_sq(t);
            if !(area > 1e-12 * scale) {
                return Err(Error::DegenerateTriangle { triangle: t, area });
            }
        }
        if let Some(node) = used.iter().position(|u| !u) {
            return Err(Error::OrphanNode { node });
        }
        self.check_duplicates()
    }

    fn check_duplicates(&self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| self.nodes[a][0].total_cmp(&self.nodes[b][0]));
        for (k, &a) in order.iter().enumerate() {
            for &b in &order[k + 1..] {
                if self.nodes[b][0] - self.nodes[a][0] >= DUPLICATE_TOLERANCE {
                    break;
                }
                let d = distance(self.nodes[a], self.nodes[b]);
                if d < DUPLICATE_TOLERANCE {
                    return Err(Error::DuplicateNodes {
                        a: a.min(b),
                        b: a.max(b),
                        distance: d,
                    });
                }
            }
        }
        Ok(())
    }

    /// Signed area; positive for counter-clockwise triangles.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    fn longest_edge_sq(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        [dist_sq(a, b), dist_sq(b, c), dist_sq(c, a)]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Lumped (median-dual) control-volume area of each node: one third of
    /// every incident triangle.
    pub fn nodal_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.nodes.len()];
        for t in 0..self.triangles.len() {
            let third = self.signed_area(t) / 3.0;
            for &v in &self.triangles[t] {
                areas[v] += third;
            }
        }
        areas
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    /// Gradients of the three linear shape functions of triangle `t`.
    pub fn shape_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        let two_area = 2.0 * self.signed_area(t);
        [
            [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
            [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ]
    }

    /// Gradient of the piecewise-linear interpolant of `values` on each
    /// triangle.
    pub fn triangle_gradients(&self, values: &[f64]) -> Vec<[f64; 2]> {
        (0..self.triangles.len())
            .map(|t| {
                let g = self.shape_gradients(t);
                let tri = self.triangles[t];
                let mut out = [0.0; 2];
                for k in 0..3 {
                    out[0] += values[tri[k]] * g[k][0];
                    out[1] += values[tri[k]] * g[k][1];
                }
                out
            })
            .collect()
    }

    /// Area-weighted average of incident triangle gradients at every node.
    pub fn nodal_gradients(&self, values: &[f64]) -> Vec<[f64; 2]> {
        let tri_grads = self.triangle_gradients(values);
        let mut sum = vec![[0.0; 2]; self.nodes.len()];
        let mut weight = vec![0.0; self.nodes.len()];
        for (t, g) in tri_grads.iter().enumerate() {
            let area = self.signed_area(t);
            for &v in &self.triangles[t] {
                sum[v][0] += area * g[0];
                sum[v][1] += area * g[1];
                weight[v] += area;
            }
        }
        sum.iter()
            .zip(&weight)
            .map(|(s, &w)| [s[0] / w, s[1] / w])
            .collect()
    }

    /// Undirected boundary edges `(a, b)` oriented so the mesh lies to
    /// their left.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        use std::collections::HashMap;
        let mut count: HashMap<(usize, usize), (usize, usize, u32)> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                count.entry(key).or_insert((a, b, 0)).2 += 1;
            }
        }
        let mut edges: Vec<(usize, usize)> = count
            .into_values()
            .filter(|&(_, _, c)| c == 1)
            .map(|(a, b, _)| (a, b))
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    /// Reads and validates a mesh in the JSON mesh format.
    pub fn read_json(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mesh: TriMesh = serde_json::from_reader(file)
            .map_err(|e| Error::format(path, e.to_string()))?;
        mesh.validate()?;
        Ok(mesh)
    }
}

pub(crate) fn dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    dist_sq(a, b).sqrt()
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn clockwise_triangle_is_rejected() {
        let err = TriMesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateTriangle { triangle: 0, .. }));
    }

    #[test]
    fn collinear_triangle_is_rejected() {
        let err = TriMesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 3], [0, 1, 2]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateTriangle { triangle: 1, .. }));
    }

    #[test]
    fn out_of_range_index_names_triangle() {
        let err = TriMesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 1, 7]],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::IndexOutOfRange {
                triangle: 1,
                node: 7,
                n_nodes: 3
            }
        ));
    }

    #[test]
    fn orphan_and_duplicate_nodes_are_rejected() {
        let err = TriMesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]],
            vec![[0, 1, 2]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::OrphanNode { node: 3 }));

        let err = TriMesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1e-7]],
            vec![[0, 1, 2], [0, 3, 2]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateNodes { a: 1, b: 3, .. }));
    }

    #[test]
    fn nodal_areas_partition_domain() {
        let mesh = lattice(6, 4, 5.0, 3.0);
        let sum: f64 = mesh.nodal_areas().iter().sum();
        assert!((sum - 15.0).abs() < 1e-12);
        assert!((mesh.total_area() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn nodal_gradient_exact_for_linear_field() {
        let mesh = lattice(5, 5, 4.0, 4.0);
        let f: Vec<f64> = mesh.nodes.iter().map(|p| 2.0 * p[0] - 3.0 * p[1] + 1.0).collect();
        for g in mesh.nodal_gradients(&f) {
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_edges_of_lattice() {
        let mesh = lattice(4, 3, 3.0, 2.0);
        // perimeter has 2 * (3 + 2) unit edges
        assert_eq!(mesh.boundary_edges().len(), 10);
    }

    #[test]
    fn json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.json");
        let mesh = two_triangles();
        mesh.write_json(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"boundary\":[\"interior\""));
        assert_eq!(TriMesh::read_json(&path).unwrap(), mesh);
        let _ = single_triangle();
    }
}
