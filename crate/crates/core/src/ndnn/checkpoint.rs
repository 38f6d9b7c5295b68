//! Binary checkpoint file.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "ICEGNNCK"
//! version  u32      CHECKPOINT_VERSION
//! hlen     u64      length of the JSON header
//! header   hlen bytes of UTF-8 JSON (architecture descriptor etc.)
//! count    u64      number of tensors
//! tensor*  u32 name length, name bytes, u32 ndim, ndim x u64 extents,
//!          prod(extents) x f64 values in row-major order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::param::{Param, Parameterized};
use crate::error::{Error, Result};
use crate::io::{read_f64s, read_preamble, read_u32, read_u64, write_f64s, write_preamble, write_u32, write_u64};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ICEGNNCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_model<M: Parameterized>(header: serde_json::Value, model: &M) -> Self {
        let tensors = model
            .params()
            .into_iter()
            .map(|p| NamedTensor {
                name: p.name.clone(),
                shape: p.shape(),
                data: p.value.iter().copied().collect(),
            })
            .collect();
        Checkpoint { header, tensors }
    }

    /// Copies tensor values into `model`, matching by position and checking
    /// names and shapes.
    pub fn load_into<M: Parameterized>(&self, model: &mut M, path: &Path) -> Result<()> {
        let mut params = model.params_mut();
        if params.len() != self.tensors.len() {
            return Err(Error::format(
                path,
                format!(
                    "checkpoint holds {} tensors, model expects {}",
                    self.tensors.len(),
                    params.len()
                ),
            ));
        }
        for (p, t) in params.iter_mut().zip(&self.tensors) {
            if p.name != t.name || p.shape() != t.shape {
                return Err(Error::format(
                    path,
                    format!(
                        "tensor `{}` {:?} does not match model parameter `{}` {:?}",
                        t.name,
                        t.shape,
                        p.name,
                        p.shape()
                    ),
                ));
            }
            let shape = (t.shape[0], t.shape[1]);
            **p = Param::new(
                t.name.clone(),
                Array2::from_shape_vec(shape, t.data.clone()).expect("shape checked"),
            );
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_preamble(&mut w, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &self.header)?;
        write_u64(&mut w, self.tensors.len() as u64)?;
        for t in &self.tensors {
            write_u32(&mut w, t.name.len() as u32)?;
            w.write_all(t.name.as_bytes())?;
            write_u32(&mut w, t.shape.len() as u32)?;
            for &d in &t.shape {
                write_u64(&mut w, d as u64)?;
            }
            write_f64s(&mut w, t.data.iter().copied())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let mut r = BufReader::new(File::open(path)?);
        let header: serde_json::Value =
            read_preamble(&mut r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, path)?;
        let corrupt = |_| Error::format(path, "truncated tensor data");
        let count = read_u64(&mut r).map_err(corrupt)? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name_len = read_u32(&mut r).map_err(corrupt)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)
                .map_err(|_| Error::format(path, "truncated tensor name"))?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::format(path, "tensor name is not UTF-8"))?;
            let ndim = read_u32(&mut r).map_err(corrupt)? as usize;
            if ndim != 2 {
                return Err(Error::format(path, format!("tensor `{name}` has {ndim} dims")));
            }
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(read_u64(&mut r).map_err(corrupt)? as usize);
            }
            let n: usize = shape.iter().product();
            let data = read_f64s(&mut r, n).map_err(corrupt)?;
            tensors.push(NamedTensor { name, shape, data });
        }
        Ok(Checkpoint { header, tensors })
    }
}
