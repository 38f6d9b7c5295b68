//! Upwind finite-volume thickness transport on the median-dual mesh.

use serde::{Deserialize, Serialize};

use super::physics::update_surface;
use super::{SimConfig, SimState};
use crate::error::{Error, Result};
use crate::mesh::{build_topology, BoundaryFlag, TriMesh};

/// Volume bookkeeping of one step, all in m^3.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepBudget {
    pub volume_before: f64,
    pub volume_after: f64,
    pub smb: f64,
    /// Equilibrium source of the oracle (see `SmbSpec`).
    pub balance: f64,
    pub melted: f64,
    pub calved: f64,
    pub outflow: f64,
    /// Ablation that could not be realized because thickness hit zero.
    pub deficit: f64,
}

impl StepBudget {
    pub fn expected_change(&self) -> f64 {
        self.smb + self.balance - self.melted - self.calved - self.outflow + self.deficit
    }

    pub fn residual(&self) -> f64 {
        (self.volume_after - self.volume_before) - self.expected_change()
    }

    pub fn residual_relative(&self) -> f64 {
        self.residual().abs() / self.volume_before.abs().max(f64::MIN_POSITIVE)
    }
}

/// Control-volume geometry: nodal dual areas and dual-face normals per
/// edge.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteVolume {
    areas: Vec<f64>,
    /// `(a, b, n)` with `n` the length-weighted dual-face normal from `a`
    /// to `b`.
    faces: Vec<(usize, usize, [f64; 2])>,
    marine: Vec<bool>,
    min_edge: f64,
}

impl FiniteVolume {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let topology = build_topology(mesh)?;
        let areas = mesh.nodal_areas();
        let mut faces: Vec<(usize, usize, [f64; 2])> =
            topology.edges().iter().map(|&(a, b)| (a, b, [0.0; 2])).collect();
        let index = |a: usize, b: usize| -> usize {
            let (i, j) = (a.min(b), a.max(b));
            topology.edges().binary_search(&(i, j)).expect("triangle edge in topology")
        };
        for tri in &mesh.triangles {
            let p: Vec<[f64; 2]> = tri.iter().map(|&v| mesh.nodes[v]).collect();
            let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let (pa, pb) = (p[k], p[(k + 1) % 3]);
                let m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                // segment midpoint -> centroid, rotated to face a -> b
                let seg = [c[0] - m[0], c[1] - m[1]];
                let mut n = [seg[1], -seg[0]];
                let ab = [pb[0] - pa[0], pb[1] - pa[1]];
                if n[0] * ab[0] + n[1] * ab[1] < 0.0 {
                    n = [-n[0], -n[1]];
                }
                let face = &mut faces[index(a, b)];
                if face.0 == a {
                    face.2[0] += n[0];
                    face.2[1] += n[1];
                } else {
                    face.2[0] -= n[0];
                    face.2[1] -= n[1];
                }
            }
        }
        let min_edge = topology
            .edges()
            .iter()
            .map(|&(a, b)| crate::mesh::distance(mesh.nodes[a], mesh.nodes[b]))
            .fold(f64::INFINITY, f64::min);
        Ok(FiniteVolume {
            areas,
            faces,
            marine: mesh.boundary.iter().map(|&f| f == BoundaryFlag::Front).collect(),
            min_edge,
        })
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn min_edge(&self) -> f64 {
        self.min_edge
    }

    /// Sum of the dual-face normals leaving every node; zero on cells away
    /// from the domain boundary.
    pub fn closure(&self, n_nodes: usize) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; n_nodes];
        for &(a, b, n) in &self.faces {
            out[a][0] += n[0];
            out[a][1] += n[1];
            out[b][0] -= n[0];
            out[b][1] -= n[1];
        }
        out
    }

    /// Ice nodes in contact with the ocean: on the marine domain edge or
    /// next to an ice-free node.
    pub fn ice_front(&self, state: &SimState) -> Vec<bool> {
        let mut front: Vec<bool> = (0..state.n_nodes())
            .map(|k| state.mask[k] && self.marine[k])
            .collect();
        for &(a, b, _) in &self.faces {
            if state.mask[a] != state.mask[b] {
                let k = if state.mask[a] { a } else { b };
                front[k] = true;
            }
        }
        front
    }

    /// Net volume flux leaving every dual cell (m^3/yr) and the rate leaving
    /// the domain, for the velocity stored in `state`.
    ///
    /// Faces between ice and ice-free cells are closed. With
    /// `front_outflow`, ice front cells pass their net inflow on to the
    /// ocean, so their thickness only changes through sources.
    pub fn net_outflow(&self, state: &SimState, config: &SimConfig) -> (Vec<f64>, f64) {
        let h = &state.thickness;
        let ice = &state.mask;
        let mut net = vec![0.0; state.n_nodes()];
        for &(a, b, nrm) in &self.faces {
            if !ice[a] || !ice[b] {
                continue;
            }
            let u = 0.5 * ((state.vx[a] + state.vx[b]) * nrm[0] + (state.vy[a] + state.vy[b]) * nrm[1]);
            let flux = if u >= 0.0 { u * h[a] } else { u * h[b] };
            net[a] += flux;
            net[b] -= flux;
        }
        let mut outflow = 0.0;
        if config.front_outflow {
            for (k, front) in self.ice_front(state).into_iter().enumerate() {
                if front && net[k] < 0.0 {
                    outflow -= net[k];
                    net[k] = 0.0;
                }
            }
        }
        (net, outflow)
    }

    /// Advances thickness by `dt` with the velocity stored in `state`.
    ///
    /// Fails when `dt max|v| / min_edge > 0.5`.
    pub fn advance(&self, state: &SimState, dt: f64, config: &SimConfig) -> Result<(SimState, StepBudget)> {
        self.advance_with_source(state, None, dt, config)
    }

    /// [`advance`](Self::advance) with an extra per-node source (m/yr) on
    /// ice-covered nodes. With `front_outflow` the extra source is skipped
    /// on ice front cells.
    pub fn advance_with_source(
        &self,
        state: &SimState,
        extra: Option<&[f64]>,
        dt: f64,
        config: &SimConfig,
    ) -> Result<(SimState, StepBudget)> {
        let n = state.n_nodes();
        if n != self.areas.len() {
            return Err(Error::ShapeMismatch {
                op: "advance_thickness",
                left: vec![self.areas.len()],
                right: vec![n],
            });
        }
        let max_speed = state
            .vx
            .iter()
            .zip(&state.vy)
            .map(|(x, y)| x.hypot(*y))
            .fold(0.0, f64::max);
        if !max_speed.is_finite() {
            return Err(Error::NonFinite("velocity".into()));
        }
        let courant = dt * max_speed / self.min_edge;
        if courant > 0.5 {
            return Err(Error::Cfl {
                dt,
                max_speed,
                min_edge: self.min_edge,
                courant,
            });
        }

        let (net, outflow_rate) = self.net_outflow(state, config);
        let outflow = outflow_rate * dt;
        let h = &state.thickness;
        let ice = &state.mask;
        let front = match extra {
            Some(_) if config.front_outflow => self.ice_front(state),
            _ => vec![false; n],
        };

        let mut next = state.clone();
        let mut budget = StepBudget {
            outflow,
            ..StepBudget::default()
        };
        for k in 0..n {
            if !ice[k] {
                continue;
            }
            let extra = match extra {
                Some(e) if !front[k] => e[k] * dt,
                _ => 0.0,
            };
            let source = state.smb[k] * dt + extra;
            budget.smb += state.smb[k] * dt * self.areas[k];
            budget.balance += extra * self.areas[k];
            let raw = h[k] + source - dt * net[k] / self.areas[k];
            if raw > 0.0 {
                next.thickness[k] = raw;
            } else {
                budget.deficit += -raw * self.areas[k];
                next.thickness[k] = 0.0;
                next.mask[k] = false;
                next.vx[k] = 0.0;
                next.vy[k] = 0.0;
            }
        }
        update_surface(&mut next, config);
        next.time = state.time + dt;
        budget.volume_before = total_volume(state, self);
        budget.volume_after = total_volume(&next, self);
        Ok((next, budget))
    }
}

/// Advances `state` by `config.dt` using its stored velocity.
pub fn advance_thickness(state: &SimState, mesh: &TriMesh, config: &SimConfig) -> Result<SimState> {
    let fv = FiniteVolume::new(mesh)?;
    Ok(fv.advance(state, config.dt, config)?.0)
}

/// `sum H_i A_i` over the dual cells, m^3.
pub fn total_volume(state: &SimState, fv: &FiniteVolume) -> f64 {
    state.thickness.iter().zip(fv.areas()).map(|(h, a)| h * a).sum()
}
