//! Trajectory files: one per scenario run.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ScenarioParams, SimState, StepBudget};
use crate::error::{Error, Result};
use crate::io::{read_f64s, read_preamble, write_f64s, write_preamble};

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"ICEGNNTR";
pub const TRAJECTORY_VERSION: u32 = 1;

const FIELDS: [&str; 7] = ["thickness", "vx", "vy", "surface", "bed", "mask", "smb"];

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ScenarioParams,
    pub seed: u64,
    pub states: Vec<SimState>,
    pub budgets: Vec<StepBudget>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    params: ScenarioParams,
    seed: u64,
    n_nodes: usize,
    n_states: usize,
    /// File name of the mesh, relative to the trajectory.
    mesh: Option<String>,
    fields: Vec<String>,
    budgets: Vec<StepBudget>,
}

/// Writes `traj`; `mesh_file` records which mesh the nodal arrays live on.
pub fn write_trajectory(path: &Path, traj: &Trajectory, mesh_file: Option<&str>) -> Result<()> {
    let n = traj.states.first().map_or(0, SimState::n_nodes);
    let header = Header {
        params: traj.params,
        seed: traj.seed,
        n_nodes: n,
        n_states: traj.states.len(),
        mesh: mesh_file.map(str::to_owned),
        fields: FIELDS.iter().map(|s| s.to_string()).collect(),
        budgets: traj.budgets.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    write_preamble(&mut w, TRAJECTORY_MAGIC, TRAJECTORY_VERSION, &header)?;
    for s in &traj.states {
        if s.n_nodes() != n {
            return Err(Error::ShapeMismatch {
                op: "write_trajectory",
                left: vec![n],
                right: vec![s.n_nodes()],
            });
        }
        write_f64s(&mut w, [s.time])?;
        write_f64s(&mut w, s.thickness.iter().copied())?;
        write_f64s(&mut w, s.vx.iter().copied())?;
        write_f64s(&mut w, s.vy.iter().copied())?;
        write_f64s(&mut w, s.surface.iter().copied())?;
        write_f64s(&mut w, s.bed.iter().copied())?;
        write_f64s(&mut w, s.mask_f64())?;
        write_f64s(&mut w, s.smb.iter().copied())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory and the mesh reference stored with it.
pub fn read_trajectory(path: &Path) -> Result<(Trajectory, Option<String>)> {
    let file = File::open(path).map_err(|_| Error::MissingArtifact(path.to_owned()))?;
    let mut r = BufReader::new(file);
    let header: Header = read_preamble(&mut r, TRAJECTORY_MAGIC, TRAJECTORY_VERSION, path)?;
    if header.fields != FIELDS {
        return Err(Error::format(path, format!("unexpected field list {:?}", header.fields)));
    }
    let n = header.n_nodes;
    let truncated = |_| Error::format(path, "truncated trajectory body");
    let mut states = Vec::with_capacity(header.n_states);
    for _ in 0..header.n_states {
        let time = read_f64s(&mut r, 1).map_err(truncated)?[0];
        let mut arrays = Vec::with_capacity(FIELDS.len());
        for _ in 0..FIELDS.len() {
            arrays.push(read_f64s(&mut r, n).map_err(truncated)?);
        }
        let smb = arrays.pop().unwrap();
        let mask = arrays.pop().unwrap().iter().map(|&m| m != 0.0).collect();
        let bed = arrays.pop().unwrap();
        let surface = arrays.pop().unwrap();
        let vy = arrays.pop().unwrap();
        let vx = arrays.pop().unwrap();
        let thickness = arrays.pop().unwrap();
        states.push(SimState {
            time,
            thickness,
            vx,
            vy,
            surface,
            bed,
            mask,
            smb,
        });
    }
    Ok((
        Trajectory {
            params: header.params,
            seed: header.seed,
            states,
            budgets: header.budgets,
        },
        header.mesh,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut s = SimState::zeros(3);
        s.thickness = vec![1.0, 2.5, 0.0];
        s.mask = vec![true, true, false];
        s.vx = vec![-3.0, 1e300, 0.1];
        let mut t = s.clone();
        t.time = 0.05;
        let traj = Trajectory {
            params: ScenarioParams::Calving { sigma_max: 0.8e6 },
            seed: 9,
            states: vec![s, t],
            budgets: vec![StepBudget::default()],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        write_trajectory(&path, &traj, Some("mesh.json")).unwrap();
        let (back, mesh) = read_trajectory(&path).unwrap();
        assert_eq!(back, traj);
        assert_eq!(mesh.as_deref(), Some("mesh.json"));
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let traj = Trajectory {
            params: ScenarioParams::Melt { melt_rate: 4.0 },
            seed: 0,
            states: vec![SimState::zeros(10)],
            budgets: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        write_trajectory(&path, &traj, None).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::Format { .. })));
        assert!(matches!(
            read_trajectory(&dir.path().join("missing.bin")),
            Err(Error::MissingArtifact(_))
        ));
    }
}
