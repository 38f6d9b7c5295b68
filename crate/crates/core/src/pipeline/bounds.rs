use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gnn::{N_INPUTS, N_OUTPUTS};
use crate::icesim::SimConfig;
use crate::mesh::N_EDGE_ATTRIBUTES;

pub const INPUT_NAMES: [&str; N_INPUTS] = [
    "param", "time", "smb", "vx0", "vy0", "surface0", "bed0", "thickness0", "mask0", "bias",
];
pub const TARGET_NAMES: [&str; N_OUTPUTS] = ["vx", "vy", "thickness", "mask"];

/// Closed physical interval mapped affinely onto [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    #[inline]
    pub fn normalize(&self, v: f64) -> f64 {
        2.0 * (v - self.lo) / (self.hi - self.lo) - 1.0
    }

    #[inline]
    pub fn denormalize(&self, u: f64) -> f64 {
        self.lo + 0.5 * (u + 1.0) * (self.hi - self.lo)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Fixed normalization ranges for every input, target and edge attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalBounds {
    pub inputs: [Range; N_INPUTS],
    pub targets: [Range; N_OUTPUTS],
    pub edges: [Range; N_EDGE_ATTRIBUTES],
}

impl NominalBounds {
    /// Ranges implied by an oracle configuration: the scenario parameter
    /// range, run duration, speed cap and the extremes of the synthetic
    /// geometry with head room for thickening.
    pub fn from_config(config: &SimConfig) -> Self {
        let g = &config.geometry;
        let noise = g.noise_amplitude * (g.noise_modes as f64).sqrt();
        let bed = Range::new(
            g.bed_inland.min(g.bed_front) - g.trough_depth - 10.0,
            g.bed_inland.max(g.bed_front) + 10.0,
        );
        let s_top = g.surface_inland.max(g.surface_front) + noise;
        let column = s_top - bed.lo;
        let thickness = Range::new(0.0, 1.5 * column);
        let surface = Range::new(bed.lo.min(0.0), s_top + 0.5 * column);
        let v = Range::new(-config.max_speed, config.max_speed);
        let smb = Range::new(
            config.smb.inland.min(config.smb.front) - 1.0,
            config.smb.inland.max(config.smb.front) + 1.0,
        );
        let (plo, phi) = config.scenario.param_range();
        let unit = Range::new(-1.0, 1.0);
        let mask = Range::new(0.0, 1.0);
        // a calving cliff can drop the full elevation span over one short edge
        let shortest = (1.0 - 2.0 * config.mesh_jitter).max(0.1) * config.fine_edge;
        let max_slope = (surface.hi - surface.lo) / shortest;
        let slope = Range::new(-max_slope, max_slope);
        let accel = 2.0 * config.max_speed / config.dt;
        NominalBounds {
            inputs: [
                Range::new(plo, phi),
                Range::new(0.0, config.duration().max(config.dt)),
                smb,
                v,
                v,
                surface,
                bed,
                thickness,
                mask,
                unit,
            ],
            targets: [v, v, thickness, mask],
            edges: [
                Range::new(0.0, 2.0 * config.coarse_edge),
                slope,
                slope,
                Range::new(-accel, accel),
                Range::new(-accel, accel),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.inputs.iter().chain(&self.targets).chain(&self.edges);
        for r in all {
            if !(r.lo < r.hi) || !r.lo.is_finite() || !r.hi.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "normalization range [{}, {}] must satisfy lo < hi",
                    r.lo, r.hi
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding; stored in datasets and
    /// checkpoints so evaluation can confirm training used the same bounds.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("bounds serialize");
        hex::encode(Sha256::digest(&json))
    }
}

/// Normalizes `v`, failing if it lies outside the nominal range.
pub(crate) fn checked_normalize(range: &Range, v: f64, name: &str) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("{name} = {v}")));
    }
    // allow rounding noise at the ends
    let slack = 1e-9 * (range.hi - range.lo);
    if v < range.lo - slack || v > range.hi + slack {
        return Err(Error::OutOfBounds {
            variable: name.to_owned(),
            value: v,
            lo: range.lo,
            hi: range.hi,
        });
    }
    Ok(range.normalize(v).clamp(-1.0, 1.0))
}
