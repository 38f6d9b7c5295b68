//! Framing shared by the binary artifact formats (checkpoints, datasets,
//! trajectories).
//!
//! Every file starts with an 8-byte magic, a little-endian `u32` format
//! version and a length-prefixed UTF-8 JSON header. The body that follows
//! is format specific and consists of little-endian integers and `f64`s.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn write_preamble<W: Write, H: Serialize>(
    w: &mut W,
    magic: &[u8; 8],
    version: u32,
    header: &H,
) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    w.write_all(magic)?;
    write_u32(w, version)?;
    write_u64(w, json.len() as u64)?;
    w.write_all(&json)?;
    Ok(())
}

pub(crate) fn read_preamble<R: Read, H: DeserializeOwned>(
    r: &mut R,
    magic: &[u8; 8],
    supported_version: u32,
    path: &Path,
) -> Result<H> {
    let mut found = [0u8; 8];
    r.read_exact(&mut found)
        .map_err(|_| Error::format(path, "file too short for header"))?;
    if &found != magic {
        return Err(Error::format(
            path,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&found),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let version = read_u32(r).map_err(|_| Error::format(path, "truncated header"))?;
    if version != supported_version {
        return Err(Error::format(
            path,
            format!("unsupported format version {version} (expected {supported_version})"),
        ));
    }
    let len = read_u64(r).map_err(|_| Error::format(path, "truncated header"))? as usize;
    if len > (1 << 30) {
        return Err(Error::format(path, "header length is implausibly large"));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|_| Error::format(path, "truncated header"))?;
    serde_json::from_slice(&json).map_err(|e| Error::format(path, format!("header: {e}")))
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Hex SHA-256 of a file's contents.
pub fn file_sha256(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
