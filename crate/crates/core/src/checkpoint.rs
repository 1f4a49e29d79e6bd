//! `ZSRM` parameter checkpoints.
//!
//! ```text
//! "ZSRM" | u16 version | u32 count |
//!   count × ( u16 name_len | name utf-8 | u8 rank | rank × u32 dim | f64 payload )
//! ```
//!
//! Little-endian throughout. Parameters are written in module visit order.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::param::{Module, Parameter};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"ZSRM";
pub const VERSION: u16 = 1;

pub fn encode<M: Module + ?Sized>(model: &M) -> Vec<u8> {
    let mut params: Vec<(String, Tensor)> = Vec::new();
    model.visit(&mut |p: &Parameter| params.push((p.name.clone(), p.value.clone())));
    encode_tensors(&params)
}

pub fn encode_tensors(params: &[(String, Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params {
        let bytes = name.as_bytes();
        out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(bytes);
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|_| Error::format("checkpoint", "unexpected end of file"))?;
    Ok(b)
}

pub fn decode_tensors(r: &mut impl Read) -> Result<Vec<(String, Tensor)>> {
    if &take::<4>(r)? != MAGIC {
        return Err(Error::format("checkpoint", "bad magic"));
    }
    let version = u16::from_le_bytes(take(r)?);
    if version != VERSION {
        return Err(Error::format("checkpoint", format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(take(r)?) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u16::from_le_bytes(take(r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|_| Error::format("checkpoint", "truncated name"))?;
        let name = String::from_utf8(name).map_err(|_| Error::format("checkpoint", "name is not UTF-8"))?;
        let rank = take::<1>(r)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(take(r)?) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(take(r)?));
        }
        let t = Tensor::new(shape, data).map_err(|e| Error::format("checkpoint", format!("{name}: {e}")))?;
        out.push((name, t));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::format("checkpoint", "trailing bytes"));
    }
    Ok(out)
}

/// Loads values into `model`, matching by name. Every model parameter must
/// be present with the same shape, and the file may not contain extras.
pub fn restore<M: Module + ?Sized>(model: &mut M, tensors: Vec<(String, Tensor)>) -> Result<()> {
    let total = tensors.len();
    let mut by_name: HashMap<String, Tensor> = HashMap::with_capacity(total);
    for (name, t) in tensors {
        if by_name.insert(name.clone(), t).is_some() {
            return Err(Error::format("checkpoint", format!("duplicate parameter {name}")));
        }
    }
    let mut err = None;
    let mut used = 0;
    model.visit_mut(&mut |p: &mut Parameter| {
        if err.is_some() {
            return;
        }
        match by_name.get(&p.name) {
            Some(t) if t.shape() == p.shape() => {
                p.value = t.clone();
                used += 1;
            }
            Some(t) => {
                err = Some(Error::format(
                    "checkpoint",
                    format!("{}: shape {:?} does not match model {:?}", p.name, t.shape(), p.shape()),
                ))
            }
            None => err = Some(Error::format("checkpoint", format!("missing parameter {}", p.name))),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if used != total {
        return Err(Error::format(
            "checkpoint",
            format!("{} parameters in file do not belong to this model", total - used),
        ));
    }
    Ok(())
}

pub fn save<M: Module + ?Sized>(model: &M, path: &Path) -> Result<()> {
    std::fs::write(path, encode(model))?;
    Ok(())
}

pub fn load<M: Module + ?Sized>(model: &mut M, path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => e.into(),
    })?;
    restore(model, decode_tensors(&mut bytes.as_slice())?)
}
