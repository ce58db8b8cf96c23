//! Binary flow dump: magic, four little-endian `i32` dimensions
//! `(pairs, height, width, 3)`, then `f32` values laid out as
//! `[pair][row][col][u, v, m]`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::FlowField;

pub const FLOW_DUMP_MAGIC: &[u8; 8] = b"RSPFLW01";

pub fn write_flow_dump(path: &Path, fields: &[FlowField]) -> Result<()> {
    let (h, w) = fields.first().map_or((0, 0), |f| (f.height, f.width));
    if fields.iter().any(|f| (f.height, f.width) != (h, w)) {
        return Err(Error::format("flow fields in one dump must share dimensions"));
    }
    let mut buf = Vec::with_capacity(24 + fields.len() * h * w * 12);
    buf.extend_from_slice(FLOW_DUMP_MAGIC);
    for d in [fields.len(), h, w, 3] {
        let d = i32::try_from(d).map_err(|_| Error::format("flow dump dimension exceeds i32"))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for f in fields {
        for p in 0..f.len() {
            for x in [f.u[p], f.v[p], f.m[p]] {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_flow_dump(path: &Path) -> Result<Vec<FlowField>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 24 || &bytes[..8] != FLOW_DUMP_MAGIC {
        return Err(Error::format(format!("{}: not a flow dump", path.display())));
    }
    let dim = |i: usize| {
        let v = i32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::format(format!("negative dimension {v}")))
    };
    let (n, h, w, c) = (dim(0)?, dim(1)?, dim(2)?, dim(3)?);
    if c != 3 {
        return Err(Error::format(format!("expected 3 channels, found {c}")));
    }
    let expected = n
        .checked_mul(h * w * 12)
        .and_then(|b| b.checked_add(24))
        .ok_or_else(|| Error::format("flow dump dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "{}: {} bytes, header implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let mut values = bytes[24..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()));
    let fields = (0..n)
        .map(|_| {
            let mut f = FlowField::zeros(w, h);
            for p in 0..w * h {
                f.u[p] = values.next().unwrap();
                f.v[p] = values.next().unwrap();
                f.m[p] = values.next().unwrap();
            }
            f
        })
        .collect();
    Ok(fields)
}
