//! Binary parameter files, little-endian throughout.
//!
//! RBM file:
//! ```text
//! "RTRBM\0\0\0"  u32 version
//! RBM block
//! ```
//! Model file:
//! ```text
//! "RTDBN\0\0\0"  u32 version
//! u64 window  u64 angle_bins  f64 graph_stroke
//! u32 layer count, then one RBM block per layer (bottom first)
//! u8 has_head; if 1: "HEAD" u64 inputs u64 bins, bias (2+bins f64), weights (row-major)
//! u64 byte length, then the structure log as UTF-8 text
//! ```
//! RBM block: `"RBM\0" u64 I u64 J`, then `b` (I f64), `c` (J f64), `W`
//! (I×J f64, row-major). Floats are stored as raw IEEE-754 bits, so a
//! round trip is exact.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::dbn::{DbnStack, OutputHead, StructureLog};
use crate::decision::DecisionConfig;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rbm::RbmParams;

pub const FORMAT_VERSION: u32 = 1;
const RBM_MAGIC: &[u8; 8] = b"RTRBM\0\0\0";
const DBN_MAGIC: &[u8; 8] = b"RTDBN\0\0\0";
/// Guards against absurd sizes in corrupt headers.
const MAX_ELEMENTS: u64 = 1 << 32;

fn bad(message: impl Into<String>) -> Error {
    Error::Structure(format!("checkpoint: {}", message.into()))
}

fn write_floats(w: &mut impl Write, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_bytes<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_bytes(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_bytes(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_bytes(r)?))
}

fn read_size(r: &mut impl Read) -> Result<usize> {
    let v = read_u64(r)?;
    if v == 0 || v > MAX_ELEMENTS {
        return Err(bad(format!("implausible size {v}")));
    }
    Ok(v as usize)
}

fn read_floats(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

fn expect_tag<const N: usize>(r: &mut impl Read, tag: &[u8; N], what: &str) -> Result<()> {
    if &read_bytes::<N>(r)? != tag {
        return Err(bad(format!("missing {what} tag")));
    }
    Ok(())
}

fn read_version(r: &mut impl Read) -> Result<()> {
    let v = read_u32(r)?;
    if v != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {v}")));
    }
    Ok(())
}

fn write_rbm_block(w: &mut impl Write, p: &RbmParams) -> Result<()> {
    w.write_all(b"RBM\0")?;
    w.write_all(&(p.n_visible() as u64).to_le_bytes())?;
    w.write_all(&(p.n_hidden() as u64).to_le_bytes())?;
    write_floats(w, p.visible_bias.iter().copied())?;
    write_floats(w, p.hidden_bias.iter().copied())?;
    write_floats(w, p.weights.iter().copied())
}

fn read_rbm_block(r: &mut impl Read) -> Result<RbmParams> {
    expect_tag(r, b"RBM\0", "RBM")?;
    let i = read_size(r)?;
    let j = read_size(r)?;
    let b = read_floats(r, i)?;
    let c = read_floats(r, j)?;
    let w = read_floats(r, i * j)?;
    let weights = Array2::from_shape_vec((i, j), w).map_err(|e| bad(e.to_string()))?;
    RbmParams::new(Array1::from(b), Array1::from(c), weights)
}

pub fn write_rbm(w: &mut impl Write, params: &RbmParams) -> Result<()> {
    w.write_all(RBM_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    write_rbm_block(w, params)
}

pub fn read_rbm(r: &mut impl Read) -> Result<RbmParams> {
    expect_tag(r, RBM_MAGIC, "RBM file")?;
    read_version(r)?;
    read_rbm_block(r)
}

pub fn write_model(w: &mut impl Write, model: &Model) -> Result<()> {
    model.decision.validate()?;
    let stack = &model.stack;
    w.write_all(DBN_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(model.decision.window as u64).to_le_bytes())?;
    w.write_all(&(model.decision.angle_bins as u64).to_le_bytes())?;
    w.write_all(&model.decision.graph_stroke.to_le_bytes())?;
    w.write_all(&(stack.n_layers() as u32).to_le_bytes())?;
    for rbm in stack.rbms() {
        write_rbm_block(w, rbm)?;
    }
    match stack.head() {
        None => w.write_all(&[0])?,
        Some(head) => {
            w.write_all(&[1])?;
            w.write_all(b"HEAD")?;
            w.write_all(&(head.n_inputs() as u64).to_le_bytes())?;
            w.write_all(&(head.angle_bins() as u64).to_le_bytes())?;
            write_floats(w, head.bias.iter().copied())?;
            write_floats(w, head.weights.iter().copied())?;
        }
    }
    let log = stack.log().to_text();
    w.write_all(&(log.len() as u64).to_le_bytes())?;
    w.write_all(log.as_bytes())?;
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<Model> {
    expect_tag(r, DBN_MAGIC, "model file")?;
    read_version(r)?;
    let decision = DecisionConfig {
        window: read_size(r)?,
        angle_bins: read_size(r)?,
        graph_stroke: read_f64(r)?,
    };
    decision.validate()?;
    let layers = read_u32(r)? as usize;
    if layers == 0 {
        return Err(bad("no layers"));
    }
    let rbms = (0..layers)
        .map(|_| read_rbm_block(r))
        .collect::<Result<Vec<_>>>()?;
    let [has_head] = read_bytes::<1>(r)?;
    let head = match has_head {
        0 => None,
        1 => {
            expect_tag(r, b"HEAD", "head")?;
            let n_in = read_size(r)?;
            let bins = read_size(r)?;
            let bias = read_floats(r, 2 + bins)?;
            let weights = read_floats(r, n_in * (2 + bins))?;
            Some(OutputHead {
                weights: Array2::from_shape_vec((n_in, 2 + bins), weights).map_err(|e| bad(e.to_string()))?,
                bias: Array1::from(bias),
            })
        }
        other => return Err(bad(format!("bad head flag {other}"))),
    };
    let len = read_u64(r)?;
    if len > MAX_ELEMENTS {
        return Err(bad("structure log too long"));
    }
    let mut text = vec![0u8; len as usize];
    r.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|_| bad("structure log is not UTF-8"))?;
    let log = StructureLog::parse(&text)?;
    Model::new(DbnStack::from_parts(rbms, head, log)?, decision)
}

pub fn save_rbm(path: impl AsRef<Path>, params: &RbmParams) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_rbm(&mut w, params)?;
    w.flush()?;
    Ok(())
}

pub fn load_rbm(path: impl AsRef<Path>) -> Result<RbmParams> {
    read_rbm(&mut BufReader::new(std::fs::File::open(path)?))
}

pub fn save_model(path: impl AsRef<Path>, model: &Model) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    read_model(&mut BufReader::new(std::fs::File::open(path)?))
}
