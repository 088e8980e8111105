//! Model checkpoint files.
//!
//! Layout (little-endian): magic "JAMWATCH-CKPT", u16 version, u8
//! architecture tag, u32 input height, width and channels, u32 number of MLP
//! hidden widths followed by the widths, u32 number of parameter blobs, then
//! per blob a u64 length and that many f32 values in layer declaration order,
//! then a CRC-32 of everything before it.

use std::path::Path;

use super::model::{Arch, Network};
use crate::error::{Error, Result};
use crate::manifest::write_atomic;

const MAGIC: &[u8; 13] = b"JAMWATCH-CKPT";
const VERSION: u16 = 1;

pub fn encode(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(net.arch.tag());
    for d in [net.input.h, net.input.w, net.input.c] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let hidden = if net.arch == Arch::Mlp { net.mlp_hidden() } else { Vec::new() };
    out.extend_from_slice(&(hidden.len() as u32).to_le_bytes());
    for h in hidden {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    let blobs: Vec<&Vec<f64>> = net.layers.iter().map(|l| &l.params).filter(|p| !p.is_empty()).collect();
    out.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
    for blob in blobs {
        out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        for &v in blob {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Network, String> {
    if bytes.len() < MAGIC.len() + 6 || &bytes[..MAGIC.len()] != MAGIC {
        return Err("bad magic".into());
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err("checksum mismatch".into());
    }
    let mut pos = MAGIC.len();
    let mut take = |n: usize| -> std::result::Result<&[u8], String> {
        let s = body.get(pos..pos + n).ok_or("truncated")?;
        pos += n;
        Ok(s)
    };
    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let arch = Arch::from_tag(take(1)?[0]).ok_or("unknown architecture tag")?;
    let mut u32_ = || -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize)
    };
    let (h, w, c) = (u32_()?, u32_()?, u32_()?);
    let n_hidden = u32_()?;
    let hidden = (0..n_hidden).map(|_| u32_()).collect::<std::result::Result<Vec<_>, _>>()?;
    let mut net = match arch {
        Arch::Cnn if h == w && c == 1 => Network::cnn(h),
        Arch::Cae if h == w && c == 1 => Network::cae(h),
        Arch::Mlp if h == 1 && w == 1 => Network::mlp(c, &hidden),
        _ => return Err(format!("input shape {h}x{w}x{c} invalid for {}", arch.name())),
    }
    .map_err(|e| e.to_string())?;
    let n_blobs = u32_()?;
    let slots: Vec<usize> = (0..net.layers.len()).filter(|&k| !net.layers[k].params.is_empty()).collect();
    if n_blobs != slots.len() {
        return Err(format!("{n_blobs} parameter blobs, architecture needs {}", slots.len()));
    }
    for k in slots {
        let len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let layer = &mut net.layers[k];
        if len != layer.params.len() {
            return Err(format!("{}: {len} parameters, expected {}", layer.name, layer.params.len()));
        }
        let raw = take(len.checked_mul(4).ok_or("overflow")?)?;
        for (p, c) in layer.params.iter_mut().zip(raw.chunks_exact(4)) {
            *p = f32::from_le_bytes(c.try_into().unwrap()) as f64;
        }
    }
    if pos != body.len() {
        return Err("trailing bytes".into());
    }
    Ok(net)
}

pub fn save(net: &Network, path: &Path) -> Result<()> {
    write_atomic(path, &encode(net))
}

pub fn load(path: &Path) -> Result<Network> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    })
}
