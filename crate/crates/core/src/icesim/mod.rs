//! Desk-scale transient ice-flow oracle used to generate training data.
//!
//! Velocity follows a local sliding law driven by the surface slope,
//! thickness evolves by an upwind finite-volume mass balance, and the two
//! scenarios perturb the state through a von Mises calving threshold
//! (`Helheim`) or basal melt of floating ice (`Pig`).

mod io;
mod meshgen;
mod physics;
mod transport;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{build_topology, GraphTopology, TriMesh};

pub use io::{read_trajectory, write_trajectory, Trajectory, TRAJECTORY_MAGIC, TRAJECTORY_VERSION};
pub use meshgen::generate_mesh;
pub use physics::{
    apply_basal_melt, apply_calving, compute_velocity, effective_tensile_strain_rate, front_nodes,
    is_floating, surface_elevation, update_surface, von_mises_stress,
};
pub use transport::{advance_thickness, total_volume, FiniteVolume, StepBudget};

/// Seconds in a Julian year.
pub const SECONDS_PER_YEAR: f64 = 31_557_600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Grounded outlet glacier, parameterized by the calving threshold.
    Helheim,
    /// Glacier with a floating shelf, parameterized by the basal melt rate.
    Pig,
}

impl ScenarioKind {
    /// Physical range of the scenario parameter (Pa or m/yr).
    pub fn param_range(self) -> (f64, f64) {
        match self {
            ScenarioKind::Helheim => (0.5e6, 1.5e6),
            ScenarioKind::Pig => (0.0, 100.0),
        }
    }

    pub fn params(self, value: f64) -> Result<ScenarioParams> {
        let p = match self {
            ScenarioKind::Helheim => ScenarioParams::Calving { sigma_max: value },
            ScenarioKind::Pig => ScenarioParams::Melt { melt_rate: value },
        };
        p.validate()?;
        Ok(p)
    }

    /// The paper-protocol parameter sweep: seven thresholds from 0.70 to
    /// 1.0 MPa, or melt rates 0, 2, ..., 70 m/yr.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            ScenarioKind::Helheim => vec![0.70e6, 0.75e6, 0.80e6, 0.85e6, 0.90e6, 0.95e6, 1.0e6],
            ScenarioKind::Pig => (0..36).map(|k| 2.0 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioParams {
    /// Calving threshold in Pa.
    Calving { sigma_max: f64 },
    /// Basal melt rate of floating ice in m/yr.
    Melt { melt_rate: f64 },
}

impl ScenarioParams {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            ScenarioParams::Calving { .. } => ScenarioKind::Helheim,
            ScenarioParams::Melt { .. } => ScenarioKind::Pig,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            ScenarioParams::Calving { sigma_max } => sigma_max,
            ScenarioParams::Melt { melt_rate } => melt_rate,
        }
    }

    /// Stable identifier, e.g. `sigma_max=850000` or `melt_rate=12`.
    pub fn id(&self) -> String {
        match *self {
            ScenarioParams::Calving { sigma_max } => format!("sigma_max={sigma_max}"),
            ScenarioParams::Melt { melt_rate } => format!("melt_rate={melt_rate}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.kind().param_range();
        let v = self.value();
        if !(lo..=hi).contains(&v) {
            let variable = match self {
                ScenarioParams::Calving { .. } => "sigma_max",
                ScenarioParams::Melt { .. } => "melt_rate",
            };
            return Err(Error::OutOfBounds {
                variable: variable.into(),
                value: v,
                lo,
                hi,
            });
        }
        Ok(())
    }
}

/// Surface mass balance (m/yr ice equivalent), linear in `x` between the
/// inland edge and the front.
///
/// The oracle also adds a fixed hidden source equal to
/// `balance_fraction` times the flux divergence of the initial state. At 1
/// the unforced glacier only changes through SMB, calving and melt; below 1
/// it also relaxes dynamically. The source is not part of the SMB field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmbSpec {
    pub inland: f64,
    pub front: f64,
    pub balance_fraction: f64,
}

impl SmbSpec {
    pub fn at(&self, x: f64, length: f64) -> f64 {
        self.inland + (self.front - self.inland) * (x / length)
    }
}

/// Synthetic initial geometry.
///
/// Bed: `b = bed_inland + (bed_front - bed_inland) x/L` minus a Gaussian
/// trough centred on the flow line. Target surface:
/// `s = surface_front + (surface_inland - surface_front)(1 - (x/L)^p)` plus
/// smooth seeded noise. Thickness follows from `s` and `b`, with floating
/// ice wherever the target surface cannot be grounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub bed_inland: f64,
    pub bed_front: f64,
    pub trough_depth: f64,
    pub trough_width: f64,
    pub surface_inland: f64,
    pub surface_front: f64,
    pub surface_exponent: f64,
    pub min_thickness: f64,
    pub noise_amplitude: f64,
    pub noise_modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioKind,
    /// Domain length along flow (front at `x = length`) and width, m.
    pub domain: [f64; 2],
    pub fine_edge: f64,
    pub coarse_edge: f64,
    /// Distance from the front meshed at `fine_edge`, m.
    pub refine_band: f64,
    /// Width of the linear grading to `coarse_edge`, m.
    pub refine_transition: f64,
    /// Random node offset as a fraction of the local spacing.
    pub mesh_jitter: f64,
    /// Saved-step interval, yr.
    pub dt: f64,
    pub n_steps: usize,
    /// Keep every `save_every`-th state (the initial state is always kept).
    pub save_every: usize,
    pub rho_ice: f64,
    pub rho_water: f64,
    /// m/s^2.
    pub gravity: f64,
    /// m/yr per Pa^m, at the inland edge.
    pub slide_coefficient: f64,
    pub slide_exponent: f64,
    /// Sliding coefficient grows toward the front as
    /// `C (1 + (f - 1) (x/L)^q)` with `f = slide_front_factor`,
    /// `q = slide_ramp_exponent`.
    pub slide_front_factor: f64,
    pub slide_ramp_exponent: f64,
    /// Relative growth per year of the frontal enhancement `f - 1`; the
    /// interior keeps its initial sliding.
    pub slide_trend: f64,
    /// Pa yr^(1/n).
    pub rate_factor: f64,
    pub glen_exponent: f64,
    /// Speed cap of the sliding law, m/yr.
    pub max_speed: f64,
    pub smb: SmbSpec,
    /// Ice front cells (marine domain edge or calved margin) pass their
    /// inflow on to the ocean; otherwise the front is closed.
    pub front_outflow: bool,
    pub geometry: GeometrySpec,
}

/// Glen rate factor 2.1e8 Pa s^(1/3) expressed in Pa yr^(1/3).
pub fn default_rate_factor() -> f64 {
    2.1e8 / SECONDS_PER_YEAR.powf(1.0 / 3.0)
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::helheim()
    }
}

impl SimConfig {
    /// Grounded marine outlet: 0.05 yr steps, 261 saved states.
    pub fn helheim() -> Self {
        SimConfig {
            scenario: ScenarioKind::Helheim,
            domain: [40_000.0, 20_000.0],
            fine_edge: 500.0,
            coarse_edge: 2000.0,
            refine_band: 8_000.0,
            refine_transition: 12_000.0,
            mesh_jitter: 0.1,
            dt: 0.05,
            n_steps: 260,
            save_every: 1,
            rho_ice: 917.0,
            rho_water: 1023.0,
            gravity: 9.81,
            slide_coefficient: 0.0004,
            slide_exponent: 1.0,
            slide_front_factor: 10.0,
            slide_ramp_exponent: 16.0,
            slide_trend: 0.1,
            rate_factor: default_rate_factor(),
            glen_exponent: 3.0,
            max_speed: 10_000.0,
            smb: SmbSpec {
                inland: 0.5,
                front: -2.0,
                balance_fraction: 1.0,
            },
            front_outflow: true,
            geometry: GeometrySpec {
                bed_inland: 300.0,
                bed_front: -700.0,
                trough_depth: 250.0,
                trough_width: 4_000.0,
                surface_inland: 1_500.0,
                surface_front: 100.0,
                surface_exponent: 3.0,
                min_thickness: 50.0,
                noise_amplitude: 15.0,
                noise_modes: 4,
            },
        }
    }

    /// Outlet with a floating shelf: monthly steps, 240 saved states.
    pub fn pig() -> Self {
        SimConfig {
            scenario: ScenarioKind::Pig,
            dt: 1.0 / 12.0,
            n_steps: 239,
            slide_coefficient: 0.0004,
            slide_front_factor: 1.0,
            slide_trend: 0.0,
            max_speed: 6_000.0,
            smb: SmbSpec {
                inland: 0.4,
                front: 0.1,
                balance_fraction: 1.0,
            },
            geometry: GeometrySpec {
                bed_inland: -200.0,
                bed_front: -1_100.0,
                trough_depth: 200.0,
                trough_width: 5_000.0,
                surface_inland: 1_000.0,
                surface_front: 50.0,
                surface_exponent: 3.0,
                min_thickness: 50.0,
                noise_amplitude: 10.0,
                noise_modes: 4,
            },
            ..Self::helheim()
        }
    }

    pub fn preset(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Helheim => Self::helheim(),
            ScenarioKind::Pig => Self::pig(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.save_every == 0 {
            return bad("save_every must be at least 1".into());
        }
        if !(self.glen_exponent >= 1.0) {
            return bad(format!("Glen exponent must be >= 1, got {}", self.glen_exponent));
        }
        if !(self.coarse_edge >= self.fine_edge && self.fine_edge > 0.0) {
            return bad(format!(
                "edge lengths must satisfy coarse ({}) >= fine ({}) > 0",
                self.coarse_edge, self.fine_edge
            ));
        }
        for (name, v) in [
            ("rho_ice", self.rho_ice),
            ("rho_water", self.rho_water),
            ("gravity", self.gravity),
            ("rate_factor", self.rate_factor),
            ("max_speed", self.max_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.slide_coefficient >= 0.0 && self.slide_exponent > 0.0 && self.slide_front_factor > 0.0) {
            return bad("sliding law needs C >= 0, m > 0 and a positive front factor".into());
        }
        if self.rho_ice >= self.rho_water {
            return bad("ice must be lighter than sea water".into());
        }
        Ok(())
    }

    /// Sliding coefficient at along-flow coordinate `x` and time `t`.
    pub fn sliding_at(&self, x: f64, t: f64) -> f64 {
        let xi = (x / self.domain[0]).clamp(0.0, 1.0);
        let front = (self.slide_front_factor - 1.0) * (1.0 + self.slide_trend * t).max(0.0);
        self.slide_coefficient * (1.0 + front * xi.powf(self.slide_ramp_exponent))
    }

    /// Total simulated time, yr.
    pub fn duration(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    /// Number of states returned by a run, including `t = 0`.
    pub fn n_saved(&self) -> usize {
        self.n_steps / self.save_every + 1
    }
}

/// Oracle state on the mesh nodes. Lengths in m, velocities in m/yr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub time: f64,
    pub thickness: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub surface: Vec<f64>,
    pub bed: Vec<f64>,
    pub mask: Vec<bool>,
    pub smb: Vec<f64>,
}

impl SimState {
    pub fn zeros(n: usize) -> Self {
        SimState {
            time: 0.0,
            thickness: vec![0.0; n],
            vx: vec![0.0; n],
            vy: vec![0.0; n],
            surface: vec![0.0; n],
            bed: vec![0.0; n],
            mask: vec![false; n],
            smb: vec![0.0; n],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.thickness.len()
    }

    /// `H >= 0` and no ice-free node carrying thickness.
    pub fn check_invariants(&self) -> Result<()> {
        for k in 0..self.n_nodes() {
            let h = self.thickness[k];
            if !(h >= 0.0) || !h.is_finite() {
                return Err(Error::NonFinite(format!("thickness {h} at node {k}")));
            }
            if !self.mask[k] && h != 0.0 {
                return Err(Error::NonFinite(format!("ice-free node {k} has thickness {h}")));
            }
        }
        Ok(())
    }

    pub fn mask_f64(&self) -> Vec<f64> {
        self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
    }

    pub fn speed(&self) -> Vec<f64> {
        self.vx.iter().zip(&self.vy).map(|(x, y)| x.hypot(*y)).collect()
    }
}

fn smooth_noise(rng: &mut ChaCha8Rng, modes: usize, amplitude: f64, length: f64, width: f64) -> impl Fn(f64, f64) -> f64 {
    let terms: Vec<[f64; 5]> = (0..modes)
        .map(|_| {
            let kx = rng.gen_range(1..=3) as f64;
            let ky = rng.gen_range(0..=2) as f64;
            let a = rng.gen_range(-1.0..=1.0);
            let px = rng.gen_range(0.0..std::f64::consts::TAU);
            let py = rng.gen_range(0.0..std::f64::consts::TAU);
            [kx, ky, a, px, py]
        })
        .collect();
    let scale = if modes > 0 { amplitude / (modes as f64).sqrt() } else { 0.0 };
    move |x, y| {
        terms
            .iter()
            .map(|t| {
                let u = std::f64::consts::PI * t[0] * x / length + t[3];
                let v = std::f64::consts::PI * t[1] * y / width + t[4];
                t[2] * u.sin() * v.cos()
            })
            .sum::<f64>()
            * scale
    }
}

/// Seeded initial state: all nodes ice covered, velocities solved from the
/// initial surface.
pub fn initial_state(mesh: &TriMesh, config: &SimConfig, seed: u64) -> SimState {
    let g = &config.geometry;
    let [length, width] = config.domain;
    // independent stream from the mesh jitter
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let noise = smooth_noise(&mut rng, g.noise_modes, g.noise_amplitude, length, width);
    let n = mesh.n_nodes();
    let mut state = SimState::zeros(n);
    let float_factor = config.rho_water / (config.rho_water - config.rho_ice);
    for (k, &[x, y]) in mesh.nodes.iter().enumerate() {
        let xi = (x / length).clamp(0.0, 1.0);
        let trough = g.trough_depth * (-((y - 0.5 * width) / g.trough_width).powi(2)).exp();
        let bed = g.bed_inland + (g.bed_front - g.bed_inland) * xi - trough;
        let s = g.surface_front
            + (g.surface_inland - g.surface_front) * (1.0 - xi.powf(g.surface_exponent))
            + noise(x, y);
        let grounded = s - bed;
        let mut h = grounded;
        if is_floating(grounded, bed, config) {
            h = s * float_factor;
        }
        state.thickness[k] = h.max(g.min_thickness);
        state.bed[k] = bed;
        state.mask[k] = true;
        state.smb[k] = config.smb.at(x, length);
    }
    update_surface(&mut state, config);
    let (vx, vy) = compute_velocity(&state, mesh, config);
    state.vx = vx;
    state.vy = vy;
    state
}

/// Hidden source (m/yr): `balance_fraction` times the flux divergence of
/// `state`.
pub fn balance_source(state: &SimState, fv: &FiniteVolume, config: &SimConfig) -> Vec<f64> {
    let f = config.smb.balance_fraction;
    let (net, _) = fv.net_outflow(state, config);
    net.iter().zip(fv.areas()).map(|(q, a)| f * q / a).collect()
}

/// A scenario-independent oracle instance: mesh, topology, finite-volume
/// geometry and initial state are fixed by `(config, seed)`.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: SimConfig,
    pub seed: u64,
    pub mesh: TriMesh,
    pub topology: GraphTopology,
    pub fv: FiniteVolume,
    pub initial: SimState,
    /// Hidden equilibrium source, m/yr (see [`SmbSpec`]).
    pub balance: Vec<f64>,
}

/// Largest number of transport sub-steps allowed within one step.
const MAX_SUBSTEPS: usize = 100_000;
/// Explicit diffusive stability limit for the surface-slope feedback.
const DIFFUSIVE_FACTOR: f64 = 0.2;

impl Simulator {
    pub fn new(config: SimConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mesh = generate_mesh(&config, seed)?;
        Self::with_mesh(config, mesh, seed)
    }

    /// Uses a given mesh instead of generating one.
    pub fn with_mesh(config: SimConfig, mesh: TriMesh, seed: u64) -> Result<Self> {
        config.validate()?;
        let topology = build_topology(&mesh)?;
        let fv = FiniteVolume::new(&mesh)?;
        let initial = initial_state(&mesh, &config, seed);
        let balance = balance_source(&initial, &fv, &config);
        Ok(Simulator {
            balance,
            config,
            seed,
            mesh,
            topology,
            fv,
            initial,
        })
    }

    /// Explicit transport step bounded by advection (Courant 0.4) and by the
    /// effective diffusivity of the sliding law.
    fn stable_dt(&self, state: &SimState) -> f64 {
        let vmax = state.vx.iter().zip(&state.vy).map(|(x, y)| x.hypot(*y)).fold(0.0, f64::max);
        let h = self.fv.min_edge();
        let mut dt = f64::INFINITY;
        if vmax > 0.0 {
            dt = dt.min(0.4 * h / vmax);
        }
        let d = physics::max_diffusivity(state, &self.mesh, &self.config);
        if d > 0.0 {
            dt = dt.min(DIFFUSIVE_FACTOR * h * h / d);
        }
        dt
    }

    fn refresh_velocity(&self, state: &mut SimState) {
        let (vx, vy) = compute_velocity(state, &self.mesh, &self.config);
        state.vx = vx;
        state.vy = vy;
    }

    /// One saved-step interval: velocity, then calving or melt, then
    /// thickness transport in stable sub-steps.
    pub fn step(&self, state: &SimState, params: &ScenarioParams) -> Result<(SimState, StepBudget)> {
        let cfg = &self.config;
        let mut current = state.clone();
        self.refresh_velocity(&mut current);
        let mut budget = StepBudget {
            volume_before: total_volume(&current, &self.fv),
            ..StepBudget::default()
        };
        match *params {
            ScenarioParams::Calving { sigma_max } => {
                let stress = von_mises_stress(&current, &self.mesh, cfg);
                let (next, removed) =
                    apply_calving(&current, &self.mesh, &self.topology, &stress, sigma_max, cfg);
                budget.calved = removed
                    .iter()
                    .map(|&k| current.thickness[k] * self.fv.areas()[k])
                    .sum();
                current = next;
            }
            ScenarioParams::Melt { melt_rate } => {
                let (next, thinning) = apply_basal_melt(&current, melt_rate, cfg.dt, cfg);
                budget.melted = thinning
                    .iter()
                    .zip(self.fv.areas())
                    .map(|(t, a)| t * a)
                    .sum();
                current = next;
            }
        }

        let mut elapsed = 0.0;
        let mut substeps = 0;
        while elapsed < cfg.dt {
            self.refresh_velocity(&mut current);
            let remaining = cfg.dt - elapsed;
            let limit = self.stable_dt(&current);
            let n = (remaining / limit).ceil().max(1.0);
            let dt = if n <= 1.0 { remaining } else { remaining / n };
            let (next, b) = self.fv.advance_with_source(&current, Some(&self.balance), dt, cfg)?;
            budget.smb += b.smb;
            budget.balance += b.balance;
            budget.outflow += b.outflow;
            budget.deficit += b.deficit;
            current = next;
            elapsed += dt;
            substeps += 1;
            if substeps > MAX_SUBSTEPS {
                return Err(Error::NonFinite(format!(
                    "transport needed more than {MAX_SUBSTEPS} sub-steps at t = {}",
                    state.time
                )));
            }
            if remaining - dt <= 1e-12 * cfg.dt {
                break;
            }
        }
        current.time = state.time + cfg.dt;
        self.refresh_velocity(&mut current);
        budget.volume_after = total_volume(&current, &self.fv);
        current.check_invariants()?;
        Ok((current, budget))
    }

    /// Runs the scenario and returns the saved states and per-step budgets.
    pub fn run(&self, params: &ScenarioParams) -> Result<Trajectory> {
        params.validate()?;
        if params.kind() != self.config.scenario {
            return Err(Error::InvalidConfig(format!(
                "{} parameters given to a {:?} simulator",
                params.id(),
                self.config.scenario
            )));
        }
        let mut states = vec![self.initial.clone()];
        let mut budgets = Vec::with_capacity(self.config.n_steps);
        let mut current = self.initial.clone();
        for step in 1..=self.config.n_steps {
            let (next, budget) = self.step(&current, params)?;
            budgets.push(budget);
            if step % self.config.save_every == 0 {
                states.push(next.clone());
            }
            current = next;
        }
        Ok(Trajectory {
            params: *params,
            seed: self.seed,
            states,
            budgets,
        })
    }
}

/// Saved states (including `t = 0`) of one scenario run.
pub fn run_transient(config: &SimConfig, params: &ScenarioParams, seed: u64) -> Result<Vec<SimState>> {
    let sim = Simulator::new(config.clone(), seed)?;
    Ok(sim.run(params)?.states)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small(kind: ScenarioKind) -> SimConfig {
        SimConfig {
            domain: [12_000.0, 6_000.0],
            fine_edge: 600.0,
            coarse_edge: 1_200.0,
            refine_band: 3_000.0,
            refine_transition: 4_000.0,
            n_steps: 6,
            ..SimConfig::preset(kind)
        }
    }

    #[test]
    fn zero_steps_gives_initial_state() {
        let cfg = SimConfig {
            n_steps: 0,
            ..small(ScenarioKind::Helheim)
        };
        let p = ScenarioKind::Helheim.params(0.8e6).unwrap();
        let states = run_transient(&cfg, &p, 3).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0].time, 0.0);
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let cfg = small(ScenarioKind::Helheim);
        let p = ScenarioKind::Helheim.params(0.75e6).unwrap();
        let a = run_transient(&cfg, &p, 11).unwrap();
        let b = run_transient(&cfg, &p, 11).unwrap();
        assert_eq!(a.len(), cfg.n_steps + 1);
        let bits = |s: &[SimState]| -> Vec<u64> {
            s.iter()
                .flat_map(|st| st.thickness.iter().chain(&st.vx).chain(&st.vy).map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn budget_closes_every_step() {
        for kind in [ScenarioKind::Helheim, ScenarioKind::Pig] {
            let cfg = small(kind);
            let value = if kind == ScenarioKind::Helheim { 0.7e6 } else { 60.0 };
            let sim = Simulator::new(cfg, 2).unwrap();
            let traj = sim.run(&kind.params(value).unwrap()).unwrap();
            for b in &traj.budgets {
                assert!(b.residual_relative() <= 1e-6, "{kind:?} {b:?}");
            }
        }
    }

    #[test]
    fn states_keep_invariants() {
        let cfg = small(ScenarioKind::Pig);
        let states = run_transient(&cfg, &ScenarioKind::Pig.params(70.0).unwrap(), 4).unwrap();
        for s in &states {
            s.check_invariants().unwrap();
        }
    }

    #[test]
    fn save_every_thins_output() {
        let cfg = SimConfig {
            save_every: 3,
            ..small(ScenarioKind::Helheim)
        };
        let states = run_transient(&cfg, &ScenarioKind::Helheim.params(0.9e6).unwrap(), 1).unwrap();
        assert_eq!(states.len(), cfg.n_saved());
        assert_eq!(states.len(), 3);
        assert!((states[2].time - 6.0 * cfg.dt).abs() < 1e-12);
    }

    #[test]
    fn param_ranges_enforced() {
        assert!(ScenarioKind::Helheim.params(0.4e6).is_err());
        assert!(ScenarioKind::Pig.params(101.0).is_err());
        assert!(ScenarioKind::Pig.params(0.0).is_ok());
        assert_eq!(ScenarioKind::Pig.default_grid().len(), 36);
    }

    #[test]
    fn preset_cadence() {
        assert_eq!(SimConfig::helheim().n_saved(), 261);
        assert_eq!(SimConfig::pig().n_saved(), 240);
    }

    #[test]
    fn pig_has_floating_ice() {
        let sim = Simulator::new(small(ScenarioKind::Pig), 0).unwrap();
        let s = &sim.initial;
        assert!((0..s.n_nodes()).any(|k| is_floating(s.thickness[k], s.bed[k], &sim.config)));
    }
}
