//! Model files: `u32` LE header length, JSON header, then the parameters as
//! little-endian `f32`.

use super::net::ModelParams;
use super::{LearnError, NetSpec};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    net: NetSpec,
    seed: u64,
    param_count: usize,
    crc32: u32,
}

fn payload(params: &ModelParams) -> Vec<u8> {
    let mut buf = Vec::with_capacity(params.params().len() * 4);
    for v in params.params() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn write_model<W: Write>(mut w: W, params: &ModelParams) -> Result<(), LearnError> {
    let body = payload(params);
    let header = Header {
        format_version: MODEL_FORMAT_VERSION,
        net: params.net.clone(),
        seed: params.seed,
        param_count: params.params().len(),
        crc32: crc32fast::hash(&body),
    };
    let head = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
    w.write_all(&(head.len() as u32).to_le_bytes())?;
    w.write_all(&head)?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<ModelParams, LearnError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut head = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut head).map_err(|_| LearnError::ChecksumMismatch("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&head)
        .map_err(|e| LearnError::VersionMismatch(format!("unreadable header: {e}")))?;
    if header.format_version != MODEL_FORMAT_VERSION {
        return Err(LearnError::VersionMismatch(format!(
            "file format {} but this build reads {MODEL_FORMAT_VERSION}",
            header.format_version
        )));
    }
    if header.net.param_count() != header.param_count {
        return Err(LearnError::VersionMismatch(format!(
            "net {} needs {} parameters, header says {}",
            header.net.name,
            header.net.param_count(),
            header.param_count
        )));
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != header.param_count * 4 {
        return Err(LearnError::ChecksumMismatch(format!(
            "payload is {} bytes, expected {}",
            body.len(),
            header.param_count * 4
        )));
    }
    if crc32fast::hash(&body) != header.crc32 {
        return Err(LearnError::ChecksumMismatch("payload CRC32 differs from header".into()));
    }
    let params = body.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    ModelParams::from_parts(header.net, header.seed, params)
}

pub fn save_model(params: &ModelParams, path: &Path) -> Result<(), LearnError> {
    write_model(BufWriter::new(File::create(path)?), params)
}

pub fn load_model(path: &Path) -> Result<ModelParams, LearnError> {
    read_model(BufReader::new(File::open(path)?))
}
