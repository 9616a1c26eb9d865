//! Binary checkpoint format.
//!
//! ```text
//! "QGNN" version:u8 mode:u8 heads:u8 aggregation:u8
//! n_conv:u16 width:u32 * n_conv   n_dense:u16 width:u32 * n_dense
//! tensor*   (ndim:u8 dim:u32 * ndim  value:f32 * product)
//! has_adam:u8 [lr beta1 beta2 eps:f64 step:u64 (m tensor, v tensor)*]
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::gnn::{AdamState, Aggregation, Model, ModelConfig};
use crate::graph::FeatureMode;

const MAGIC: &[u8; 4] = b"QGNN";
const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub adam: Option<AdamState>,
}

fn write_tensor<W: Write>(w: &mut W, shape: &[usize], values: &[f32]) -> Result<()> {
    w.write_u8(shape.len() as u8)?;
    for &d in shape {
        w.write_u32::<LE>(d as u32)?;
    }
    for &v in values {
        w.write_f32::<LE>(v)?;
    }
    Ok(())
}

fn read_tensor<R: Read>(r: &mut R, expected: &[usize]) -> Result<Vec<f32>> {
    let ndim = r.read_u8()? as usize;
    let shape = (0..ndim).map(|_| r.read_u32::<LE>().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    if shape != expected {
        return Err(Error::Format(format!("tensor shape {shape:?}, expected {expected:?}")));
    }
    let mut values = vec![0.0f32; shape.iter().product()];
    r.read_f32_into::<LE>(&mut values)?;
    Ok(values)
}

pub fn write_checkpoint<W: Write>(w: &mut W, model: &Model<f32>, adam: Option<&AdamState>) -> Result<()> {
    let cfg = &model.config;
    w.write_all(MAGIC)?;
    w.write_u8(VERSION)?;
    w.write_u8(cfg.mode.to_u8())?;
    w.write_u8(cfg.heads as u8)?;
    w.write_u8(cfg.aggregation.to_u8())?;
    for widths in [&cfg.conv_widths, &cfg.head_widths] {
        w.write_u16::<LE>(widths.len() as u16)?;
        for &x in widths {
            w.write_u32::<LE>(x as u32)?;
        }
    }
    let tensors = model.tensors();
    for (shape, values) in &tensors {
        write_tensor(w, shape, values)?;
    }
    match adam {
        None => w.write_u8(0)?,
        Some(a) => {
            w.write_u8(1)?;
            for x in [a.lr, a.beta1, a.beta2, a.eps] {
                w.write_f64::<LE>(x)?;
            }
            w.write_u64::<LE>(a.step)?;
            if a.m.len() != tensors.len() {
                return Err(Error::Shape("optimizer state does not match model".into()));
            }
            for (i, (shape, _)) in tensors.iter().enumerate() {
                write_tensor(w, shape, &a.m[i])?;
                write_tensor(w, shape, &a.v[i])?;
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model checkpoint".into()));
    }
    let version = r.read_u8()?;
    if version != VERSION {
        return Err(Error::Version { found: version, expected: VERSION });
    }
    let mode = FeatureMode::from_u8(r.read_u8()?).ok_or_else(|| Error::Format("bad feature mode".into()))?;
    let heads = r.read_u8()? as usize;
    let aggregation =
        Aggregation::from_u8(r.read_u8()?).ok_or_else(|| Error::Format("bad aggregation".into()))?;
    let mut widths = Vec::new();
    for _ in 0..2 {
        let n = r.read_u16::<LE>()? as usize;
        widths.push((0..n).map(|_| r.read_u32::<LE>().map(|x| x as usize)).collect::<Result<Vec<_>, _>>()?);
    }
    let head_widths = widths.pop().unwrap();
    let conv_widths = widths.pop().unwrap();
    let config = ModelConfig { mode, conv_widths, head_widths, heads, aggregation };
    config.validate().map_err(|e| Error::Format(e.to_string()))?;

    let mut model = Model::<f32>::init(config, 0)?;
    let shapes: Vec<Vec<usize>> = model.tensors().into_iter().map(|(s, _)| s).collect();
    for (dst, shape) in model.tensors_mut().into_iter().zip(&shapes) {
        dst.copy_from_slice(&read_tensor(r, shape)?);
    }
    let adam = match r.read_u8()? {
        0 => None,
        1 => {
            let mut f = [0.0; 4];
            for x in &mut f {
                *x = r.read_f64::<LE>()?;
            }
            let step = r.read_u64::<LE>()?;
            let (mut m, mut v) = (Vec::new(), Vec::new());
            for shape in &shapes {
                m.push(read_tensor(r, shape)?);
                v.push(read_tensor(r, shape)?);
            }
            Some(AdamState { lr: f[0], beta1: f[1], beta2: f[2], eps: f[3], step, m, v })
        }
        x => return Err(Error::Format(format!("bad optimizer flag {x}"))),
    };
    Ok(Checkpoint { model, adam })
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &Model<f32>, adam: Option<&AdamState>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, model, adam)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
