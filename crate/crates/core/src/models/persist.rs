//! Binary model files.
//!
//! ```text
//! "FXCM"                 4 bytes magic
//! version                u32 LE
//! header_len             u32 LE
//! header                 header_len bytes of JSON {format_version, architecture, seed, spec, num_params}
//! scaler x_min, x_max    2 × f64 LE
//! parameters             num_params × f64 LE, canonical array order, row-major
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FxError, Result};
use crate::pipeline::Scaler;

use super::{Architecture, Model, ModelParams, ModelSpec};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"FXCM";

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    architecture: Architecture,
    seed: u64,
    spec: ModelSpec,
    num_params: usize,
}

pub fn write_model<W: Write>(model: &Model, scaler: &Scaler, mut out: W) -> Result<()> {
    let flat = model.params.flatten();
    let header = Header {
        format_version: MODEL_FORMAT_VERSION,
        architecture: model.spec.architecture,
        seed: model.spec.seed,
        spec: model.spec,
        num_params: flat.len(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| FxError::ModelFormat(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&MODEL_FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    let mut buf = Vec::with_capacity(8 * (flat.len() + 2));
    for v in [scaler.x_min(), scaler.x_max()].iter().chain(&flat) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| FxError::ModelFormat("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_model<R: Read>(mut input: R) -> Result<(Model, Scaler)> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| FxError::ModelFormat("file too short".into()))?;
    if &magic != MAGIC {
        return Err(FxError::ModelFormat("not a model file (bad magic)".into()));
    }
    let version = read_u32(&mut input)?;
    if version != MODEL_FORMAT_VERSION {
        return Err(FxError::ModelFormat(format!(
            "unsupported format version {version}"
        )));
    }
    let len = read_u32(&mut input)? as usize;
    let mut json = vec![0u8; len];
    input
        .read_exact(&mut json)
        .map_err(|_| FxError::ModelFormat("truncated header".into()))?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| FxError::ModelFormat(format!("header: {e}")))?;
    if header.architecture != header.spec.architecture || header.seed != header.spec.seed {
        return Err(FxError::ModelFormat(
            "header disagrees with its spec".into(),
        ));
    }
    header
        .spec
        .validate()
        .map_err(|e| FxError::ModelFormat(e.to_string()))?;

    let mut params = ModelParams::zeros(&header.spec);
    if params.num_params() != header.num_params {
        return Err(FxError::ModelFormat(format!(
            "spec implies {} parameters, header says {}",
            params.num_params(),
            header.num_params
        )));
    }
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != 8 * (header.num_params + 2) {
        return Err(FxError::ModelFormat(format!(
            "expected {} payload bytes, found {}",
            8 * (header.num_params + 2),
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let scaler = Scaler::new(values[0], values[1])
        .map_err(|e| FxError::ModelFormat(format!("scaler: {e}")))?;
    params.assign_flat(&values[2..])?;
    Ok((
        Model {
            spec: header.spec,
            params,
        },
        scaler,
    ))
}
