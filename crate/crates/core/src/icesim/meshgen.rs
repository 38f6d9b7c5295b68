//! Statically refined strip mesh: columns of nodes normal to the flow
//! direction, spaced finely near the ice front (`x = length`) and coarsely
//! inland, zipped together into a conforming triangulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimConfig;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryFlag, TriMesh};

const MAX_NODES: usize = 2_000_000;
const COLUMN_FACTOR: f64 = 0.85;

/// Target edge length at distance `d` from the front.
pub(crate) fn target_edge(config: &SimConfig, distance_from_front: f64) -> f64 {
    let band = config.refine_band;
    let transition = config.refine_transition;
    if distance_from_front <= band || transition <= 0.0 {
        if distance_from_front <= band {
            config.fine_edge
        } else {
            config.coarse_edge
        }
    } else {
        let t = ((distance_from_front - band) / transition).clamp(0.0, 1.0);
        config.fine_edge + t * (config.coarse_edge - config.fine_edge)
    }
}

/// Generates the scenario mesh. Node jitter is drawn from `seed`, so equal
/// configs and seeds give identical meshes.
pub fn generate_mesh(config: &SimConfig, seed: u64) -> Result<TriMesh> {
    let [length, width] = config.domain;
    let (fine, coarse) = (config.fine_edge, config.coarse_edge);
    if !(fine > 0.0) || !(coarse >= fine) {
        return Err(Error::InvalidConfig(format!(
            "edge lengths must satisfy coarse ({coarse}) >= fine ({fine}) > 0"
        )));
    }
    if !(length > 0.0 && width > 0.0) {
        return Err(Error::InvalidConfig(format!("domain {length} x {width} must be positive")));
    }
    if fine > 0.5 * length.min(width) {
        return Err(Error::InvalidConfig(format!(
            "fine edge {fine} m is too coarse for a {length} x {width} m domain"
        )));
    }
    if !(0.0..0.25).contains(&config.mesh_jitter) {
        return Err(Error::InvalidConfig(format!(
            "mesh jitter {} must lie in [0, 0.25)",
            config.mesh_jitter
        )));
    }
    let estimate = (length / fine + 1.0) * (width / fine + 1.0);
    if estimate > MAX_NODES as f64 {
        return Err(Error::InvalidConfig(format!(
            "sizing would need ~{estimate:.0} nodes (limit {MAX_NODES})"
        )));
    }

    // column offsets measured back from the front
    let mut offsets = vec![0.0];
    while *offsets.last().unwrap() < length {
        let d = *offsets.last().unwrap();
        // columns slightly closer than rows keep the diagonals short
        offsets.push(d + COLUMN_FACTOR * target_edge(config, d));
    }
    let last = *offsets.last().unwrap();
    let prev = offsets[offsets.len() - 2];
    if prev > 0.0 && (length - prev) < (last - length) {
        offsets.pop();
    }
    let scale = length / *offsets.last().unwrap();
    let xs: Vec<f64> = offsets.iter().rev().map(|d| length - d * scale).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    let mut boundary = Vec::new();
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(xs.len());
    let n_cols = xs.len();
    for (c, &x) in xs.iter().enumerate() {
        let x = if c == 0 { 0.0 } else if c == n_cols - 1 { length } else { x };
        let h = target_edge(config, length - x);
        let intervals = ((width / h).round() as usize).max(2);
        let dy = width / intervals as f64;
        let mut column = Vec::with_capacity(intervals + 1);
        for k in 0..=intervals {
            let mut y = k as f64 * dy;
            if k > 0 && k < intervals && config.mesh_jitter > 0.0 {
                y += config.mesh_jitter * dy * rng.gen_range(-1.0..=1.0);
            }
            let flag = if c == n_cols - 1 {
                BoundaryFlag::Front
            } else if c == 0 || k == 0 || k == intervals {
                BoundaryFlag::Lateral
            } else {
                BoundaryFlag::Interior
            };
            column.push(nodes.len());
            nodes.push([x, y]);
            boundary.push(flag);
        }
        columns.push(column);
    }

    let mut triangles = Vec::new();
    for pair in columns.windows(2) {
        zip_columns(&nodes, &pair[0], &pair[1], &mut triangles);
    }
    TriMesh::new(nodes, triangles, boundary)
}

/// Triangulates the strip between two vertical node columns `left` and
/// `right` (each sorted by `y`), always closing the shorter diagonal.
fn zip_columns(nodes: &[[f64; 2]], left: &[usize], right: &[usize], out: &mut Vec<[usize; 3]>) {
    let (mut i, mut j) = (0, 0);
    let d2 = |a: usize, b: usize| crate::mesh::dist_sq(nodes[a], nodes[b]);
    while i + 1 < left.len() || j + 1 < right.len() {
        let advance_left = if i + 1 == left.len() {
            false
        } else if j + 1 == right.len() {
            true
        } else {
            d2(left[i + 1], right[j]) <= d2(left[i], right[j + 1])
        };
        if advance_left {
            out.push([left[i], right[j], left[i + 1]]);
            i += 1;
        } else {
            out.push([left[i], right[j], right[j + 1]]);
            j += 1;
        }
    }
}
