use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TriMesh;
use crate::error::{Error, Result};

/// Tolerance on barycentric coordinates for point-in-triangle tests.
const INSIDE_EPS: f64 = 1e-10;

/// Regular lattice of sample points `origin + (ix, iy) * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Smallest grid with the given spacing whose extent contains the
    /// mesh bounding box, anchored at its lower-left corner.
    pub fn covering(mesh: &TriMesh, spacing: f64) -> Result<Self> {
        if mesh.nodes.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let (lo, hi) = mesh.bounding_box();
        let count = |extent: f64| ((extent / spacing) - 1e-9).ceil().max(1.0) as usize + 1;
        let spec = GridSpec {
            origin: lo,
            spacing,
            nx: count(hi[0] - lo[0]),
            ny: count(hi[1] - lo[1]),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing {} must be > 0", self.spacing)));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "dims {}x{}; at least 2x2 required",
                self.nx, self.ny
            )));
        }
        if !self.origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite origin".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index with `x` varying fastest.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + ix as f64 * self.spacing,
            self.origin[1] + iy as f64 * self.spacing,
        ]
    }
}

/// One variable sampled on a [`GridSpec`]. Cells outside the mesh are
/// marked invalid and hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl RegularGrid {
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for iy in 0..spec.ny {
            for ix in 0..spec.nx {
                let p = spec.point(ix, iy);
                values.push(f(p[0], p[1]));
            }
        }
        RegularGrid {
            spec,
            values,
            valid: vec![true; spec.len()],
        }
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.spec.index(ix, iy)]
    }

    /// CSV with header `x,y,value,valid`, one row per grid point.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x,y,value,valid")?;
        for iy in 0..self.spec.ny {
            for ix in 0..self.spec.nx {
                let p = self.spec.point(ix, iy);
                let k = self.spec.index(ix, iy);
                writeln!(
                    w,
                    "{},{},{},{}",
                    p[0],
                    p[1],
                    self.values[k],
                    u8::from(self.valid[k])
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Precomputed interpolation weights between a mesh and a grid, reused for
/// every field and every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshGridMap {
    pub spec: GridSpec,
    /// Containing triangle and barycentric weights per grid point.
    cells: Vec<Option<([usize; 3], [f64; 3])>>,
    /// Lower-left cell corner index and bilinear weights per mesh node,
    /// ordered `(ix, iy), (ix+1, iy), (ix, iy+1), (ix+1, iy+1)`.
    nodes: Vec<([usize; 4], [f64; 4])>,
}

impl MeshGridMap {
    pub fn new(mesh: &TriMesh, spec: GridSpec) -> Result<Self> {
        let cells = locate_cells(mesh, &spec)?;
        let nodes = node_weights(mesh, &spec)?;
        Ok(MeshGridMap { spec, cells, nodes })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn valid_mask(&self) -> Vec<bool> {
        self.cells.iter().map(Option::is_some).collect()
    }

    pub fn to_grid(&self, nodal_values: &[f64]) -> Result<RegularGrid> {
        if nodal_values.len() != self.nodes.len() {
            return Err(Error::ShapeMismatch {
                op: "mesh_to_grid",
                left: vec![nodal_values.len()],
                right: vec![self.nodes.len()],
            });
        }
        Ok(apply_cells(&self.cells, self.spec, nodal_values))
    }

    /// Grid-to-mesh into a caller buffer; `values` is indexed like
    /// [`GridSpec::index`].
    pub fn to_mesh_into(&self, values: &[f64], valid: &[bool], out: &mut [f64]) {
        for (o, (idx, w)) in out.iter_mut().zip(&self.nodes) {
            *o = bilinear(values, valid, idx, w);
        }
    }

    pub fn to_mesh(&self, grid: &RegularGrid) -> Result<Vec<f64>> {
        if grid.spec != self.spec {
            return Err(Error::InvalidGrid("grid spec differs from the precomputed map".into()));
        }
        let mut out = vec![0.0; self.nodes.len()];
        self.to_mesh_into(&grid.values, &grid.valid, &mut out);
        Ok(out)
    }
}

/// Samples a nodal field on a regular grid by barycentric-linear
/// interpolation inside the containing triangle.
pub fn mesh_to_grid(mesh: &TriMesh, nodal_values: &[f64], spec: &GridSpec) -> Result<RegularGrid> {
    if mesh.nodes.is_empty() || mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if nodal_values.len() != mesh.n_nodes() {
        return Err(Error::ShapeMismatch {
            op: "mesh_to_grid",
            left: vec![nodal_values.len()],
            right: vec![mesh.n_nodes()],
        });
    }
    if let Some(k) = nodal_values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("nodal value {k} passed to mesh_to_grid")));
    }
    let cells = locate_cells(mesh, spec)?;
    Ok(apply_cells(&cells, *spec, nodal_values))
}

/// Bilinear interpolation of grid values at every mesh node.
///
/// Corners flagged invalid are dropped and the remaining weights
/// renormalized.
pub fn grid_to_mesh(grid: &RegularGrid, mesh: &TriMesh) -> Result<Vec<f64>> {
    let weights = node_weights(mesh, &grid.spec)?;
    Ok(weights
        .iter()
        .map(|(idx, w)| bilinear(&grid.values, &grid.valid, idx, w))
        .collect())
}

fn apply_cells(
    cells: &[Option<([usize; 3], [f64; 3])>],
    spec: GridSpec,
    nodal_values: &[f64],
) -> RegularGrid {
    let mut values = vec![0.0; cells.len()];
    let mut valid = vec![false; cells.len()];
    for (k, cell) in cells.iter().enumerate() {
        if let Some((tri, w)) = cell {
            values[k] =
                w[0] * nodal_values[tri[0]] + w[1] * nodal_values[tri[1]] + w[2] * nodal_values[tri[2]];
            valid[k] = true;
        }
    }
    RegularGrid { spec, values, valid }
}

fn bilinear(values: &[f64], valid: &[bool], idx: &[usize; 4], w: &[f64; 4]) -> f64 {
    let mut sum = 0.0;
    let mut weight = 0.0;
    for k in 0..4 {
        if valid[idx[k]] {
            sum += w[k] * values[idx[k]];
            weight += w[k];
        }
    }
    if weight == 1.0 || weight == 0.0 {
        sum
    } else {
        sum / weight
    }
}

/// Barycentric coordinates of `p` in triangle `t`.
pub(crate) fn barycentric(mesh: &TriMesh, t: usize, p: [f64; 2]) -> [f64; 3] {
    let [a, b, c] = mesh.triangles[t].map(|i| mesh.nodes[i]);
    let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let la = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / two_area;
    let lb = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / two_area;
    [la, lb, 1.0 - la - lb]
}

fn locate_cells(mesh: &TriMesh, spec: &GridSpec) -> Result<Vec<Option<([usize; 3], [f64; 3])>>> {
    if mesh.nodes.is_empty() || mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    spec.validate()?;
    let h = spec.spacing;
    let mut cells = vec![None; spec.len()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles[t];
        let pts = tri.map(|i| mesh.nodes[i]);
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &pts {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let range = |lo: f64, hi: f64, origin: f64, n: usize| {
            let a = ((lo - origin) / h - 1e-9).ceil().max(0.0);
            let b = ((hi - origin) / h + 1e-9).floor().min(n as f64 - 1.0);
            (a as i64, b as i64)
        };
        let (x0, x1) = range(lo[0], hi[0], spec.origin[0], spec.nx);
        let (y0, y1) = range(lo[1], hi[1], spec.origin[1], spec.ny);
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let k = spec.index(ix as usize, iy as usize);
                if cells[k].is_some() {
                    continue;
                }
                let w = barycentric(mesh, t, spec.point(ix as usize, iy as usize));
                if w.iter().all(|&l| l >= -INSIDE_EPS) {
                    cells[k] = Some((tri, w));
                }
            }
        }
    }
    Ok(cells)
}

fn node_weights(mesh: &TriMesh, spec: &GridSpec) -> Result<Vec<([usize; 4], [f64; 4])>> {
    spec.validate()?;
    let h = spec.spacing;
    let mut out = Vec::with_capacity(mesh.n_nodes());
    for (node, p) in mesh.nodes.iter().enumerate() {
        let fx = (p[0] - spec.origin[0]) / h;
        let fy = (p[1] - spec.origin[1]) / h;
        let tol = 1e-9;
        if fx < -tol || fy < -tol || fx > (spec.nx - 1) as f64 + tol || fy > (spec.ny - 1) as f64 + tol
        {
            return Err(Error::NodeOutsideGrid {
                node,
                x: p[0],
                y: p[1],
            });
        }
        let ix = (fx.floor().max(0.0) as usize).min(spec.nx - 2);
        let iy = (fy.floor().max(0.0) as usize).min(spec.ny - 2);
        let tx = (fx - ix as f64).clamp(0.0, 1.0);
        let ty = (fy - iy as f64).clamp(0.0, 1.0);
        out.push((
            [
                spec.index(ix, iy),
                spec.index(ix + 1, iy),
                spec.index(ix, iy + 1),
                spec.index(ix + 1, iy + 1),
            ],
            [
                (1.0 - tx) * (1.0 - ty),
                tx * (1.0 - ty),
                (1.0 - tx) * ty,
                tx * ty,
            ],
        ));
    }
    Ok(out)
}
