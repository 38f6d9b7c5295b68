//! Pointwise ice physics of the oracle: flotation, sliding velocity,
//! tensile von Mises stress, calving and basal melt.

use super::{SimConfig, SimState};
use crate::mesh::{BoundaryFlag, GraphTopology, TriMesh};

/// Hydrostatic flotation with sea level at 0.
pub fn is_floating(thickness: f64, bed: f64, config: &SimConfig) -> bool {
    config.rho_ice * thickness < config.rho_water * (-bed)
}

pub fn surface_elevation(thickness: f64, bed: f64, config: &SimConfig) -> f64 {
    if is_floating(thickness, bed, config) {
        thickness * (1.0 - config.rho_ice / config.rho_water)
    } else {
        bed + thickness
    }
}

/// Recomputes surface elevation from thickness and bed.
pub fn update_surface(state: &mut SimState, config: &SimConfig) {
    for k in 0..state.n_nodes() {
        state.surface[k] = surface_elevation(state.thickness[k], state.bed[k], config);
    }
}

/// Triangles whose three nodes carry ice.
pub(crate) fn ice_triangles(mesh: &TriMesh, mask: &[bool]) -> Vec<bool> {
    mesh.triangles
        .iter()
        .map(|t| t.iter().all(|&v| mask[v]))
        .collect()
}

/// Area-weighted nodal gradient restricted to the `include`d triangles;
/// nodes touching none of them get a zero gradient.
pub(crate) fn masked_nodal_gradients(mesh: &TriMesh, values: &[f64], include: &[bool]) -> Vec<[f64; 2]> {
    let mut sum = vec![[0.0; 2]; mesh.n_nodes()];
    let mut weight = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if !include[t] {
            continue;
        }
        let g = mesh.shape_gradients(t);
        let grad = [
            values[tri[0]] * g[0][0] + values[tri[1]] * g[1][0] + values[tri[2]] * g[2][0],
            values[tri[0]] * g[0][1] + values[tri[1]] * g[1][1] + values[tri[2]] * g[2][1],
        ];
        let area = mesh.signed_area(t);
        for &v in tri {
            sum[v][0] += area * grad[0];
            sum[v][1] += area * grad[1];
            weight[v] += area;
        }
    }
    sum.iter()
        .zip(&weight)
        .map(|(s, &w)| if w > 0.0 { [s[0] / w, s[1] / w] } else { [0.0; 2] })
        .collect()
}

/// Sliding-law velocity
/// `v = -C (rho g H |grad s|)^m grad s / |grad s|`, capped at
/// `max_speed`, zero where there is no ice. `C` varies along flow, see
/// [`SimConfig::sliding_at`].
///
/// Surface gradients only use triangles that are fully ice covered.
pub fn compute_velocity(state: &SimState, mesh: &TriMesh, config: &SimConfig) -> (Vec<f64>, Vec<f64>) {
    let include = ice_triangles(mesh, &state.mask);
    let grad = masked_nodal_gradients(mesh, &state.surface, &include);
    let n = state.n_nodes();
    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; n];
    for k in 0..n {
        if !state.mask[k] {
            continue;
        }
        let slope = grad[k][0].hypot(grad[k][1]);
        if slope == 0.0 {
            continue;
        }
        let driving = config.rho_ice * config.gravity * state.thickness[k] * slope;
        let c = config.sliding_at(mesh.nodes[k][0], state.time);
        let speed = (c * driving.powf(config.slide_exponent)).min(config.max_speed);
        vx[k] = -speed * grad[k][0] / slope;
        vy[k] = -speed * grad[k][1] / slope;
    }
    (vx, vy)
}

/// Effective diffusivity `m H |v| / |grad s|` of the sliding law, used to
/// pick stable explicit sub-steps.
pub(crate) fn max_diffusivity(state: &SimState, mesh: &TriMesh, config: &SimConfig) -> f64 {
    let include = ice_triangles(mesh, &state.mask);
    let grad = masked_nodal_gradients(mesh, &state.surface, &include);
    let m = config.slide_exponent.max(1.0);
    (0..state.n_nodes())
        .filter(|&k| state.mask[k])
        .map(|k| {
            let slope = grad[k][0].hypot(grad[k][1]);
            let speed = state.vx[k].hypot(state.vy[k]);
            if slope > 0.0 {
                m * state.thickness[k] * speed / slope
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Effective tensile strain rate
/// `sqrt((max(0, e1)^2 + max(0, e2)^2) / 2)` from the principal strain
/// rates of the nodal velocity gradient.
pub fn effective_tensile_strain_rate(dvx: [f64; 2], dvy: [f64; 2]) -> f64 {
    let exx = dvx[0];
    let eyy = dvy[1];
    let exy = 0.5 * (dvx[1] + dvy[0]);
    let mean = 0.5 * (exx + eyy);
    let radius = (0.25 * (exx - eyy).powi(2) + exy * exy).sqrt();
    let e1 = (mean + radius).max(0.0);
    let e2 = (mean - radius).max(0.0);
    (0.5 * (e1 * e1 + e2 * e2)).sqrt()
}

/// Tensile von Mises stress `sqrt(3) B e^(1/n)` (Pa) at every node.
///
/// Velocity gradients are taken over ice-covered triangles only.
pub fn von_mises_stress(state: &SimState, mesh: &TriMesh, config: &SimConfig) -> Vec<f64> {
    let include = ice_triangles(mesh, &state.mask);
    let gx = masked_nodal_gradients(mesh, &state.vx, &include);
    let gy = masked_nodal_gradients(mesh, &state.vy, &include);
    gx.iter()
        .zip(&gy)
        .map(|(&dvx, &dvy)| {
            let e = effective_tensile_strain_rate(dvx, dvy);
            3f64.sqrt() * config.rate_factor * e.powf(1.0 / config.glen_exponent)
        })
        .collect()
}

/// Ice nodes adjacent to open water: a neighbor without ice, or a node on
/// the marine boundary of the domain.
pub fn front_nodes(state: &SimState, mesh: &TriMesh, topology: &GraphTopology) -> Vec<usize> {
    (0..state.n_nodes())
        .filter(|&k| {
            state.mask[k]
                && (mesh.boundary[k] == BoundaryFlag::Front
                    || topology.neighbors(k).iter().any(|&j| !state.mask[j]))
        })
        .collect()
}

/// Removes front nodes whose stress exceeds `sigma_max`.
///
/// Returns the new state and the removed nodes. Surface elevation is
/// updated for removed nodes only.
pub fn apply_calving(
    state: &SimState,
    mesh: &TriMesh,
    topology: &GraphTopology,
    stress: &[f64],
    sigma_max: f64,
    config: &SimConfig,
) -> (SimState, Vec<usize>) {
    let mut next = state.clone();
    let removed: Vec<usize> = front_nodes(state, mesh, topology)
        .into_iter()
        .filter(|&k| stress[k] > sigma_max)
        .collect();
    for &k in &removed {
        next.thickness[k] = 0.0;
        next.mask[k] = false;
        next.vx[k] = 0.0;
        next.vy[k] = 0.0;
        next.surface[k] = surface_elevation(0.0, next.bed[k], config);
    }
    (next, removed)
}

/// Thins floating ice by `melt_rate * dt`, clamped at zero.
///
/// Returns the new state and the thickness removed at every node.
pub fn apply_basal_melt(
    state: &SimState,
    melt_rate: f64,
    dt: f64,
    config: &SimConfig,
) -> (SimState, Vec<f64>) {
    let mut next = state.clone();
    let mut thinning = vec![0.0; state.n_nodes()];
    if melt_rate == 0.0 {
        return (next, thinning);
    }
    for k in 0..state.n_nodes() {
        if !state.mask[k] || !is_floating(state.thickness[k], state.bed[k], config) {
            continue;
        }
        let h = (state.thickness[k] - melt_rate * dt).max(0.0);
        thinning[k] = state.thickness[k] - h;
        next.thickness[k] = h;
        if h == 0.0 {
            next.mask[k] = false;
            next.vx[k] = 0.0;
            next.vy[k] = 0.0;
        }
        next.surface[k] = surface_elevation(h, state.bed[k], config);
    }
    (next, thinning)
}
