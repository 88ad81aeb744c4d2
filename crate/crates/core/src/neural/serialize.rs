//! Binary model format (`.fdcn`).
//!
//! ```text
//! magic     4 bytes  "FDCN"
//! version   u16      1
//! input_dim u32
//! layers    u32
//! per layer:
//!   tag u8: 1 dense, 2 relu, 3 energy-normalize, 4 softmax
//!   dense:  outputs u32, inputs u32, weights (row-major, outputs*inputs f64), bias (outputs f64)
//!   energy: f64
//! ```
//!
//! Integers and floats are little-endian; parameters are always stored as
//! 64-bit floats, whatever the in-memory scalar type.

use std::io::{Read, Write};

use super::layers::Dense;
use super::matrix::Matrix;
use super::network::{Layer, Network};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: [u8; 4] = *b"FDCN";
pub const VERSION: u16 = 1;
pub const EXTENSION: &str = "fdcn";

const TAG_DENSE: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_ENERGY: u8 = 3;
const TAG_SOFTMAX: u8 = 4;

// Guards allocation on corrupt headers.
const MAX_DIM: u32 = 1 << 20;

impl<T: Real> Network<T> {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&dim(self.input_dim())?.to_le_bytes())?;
        w.write_all(&dim(self.layers().len())?.to_le_bytes())?;
        for layer in self.layers() {
            match layer {
                Layer::Dense(d) => {
                    w.write_all(&[TAG_DENSE])?;
                    w.write_all(&dim(d.outputs())?.to_le_bytes())?;
                    w.write_all(&dim(d.inputs())?.to_le_bytes())?;
                    for &v in d.weight.as_slice().iter().chain(&d.bias) {
                        w.write_all(&v.as_f64().to_le_bytes())?;
                    }
                }
                Layer::Relu => w.write_all(&[TAG_RELU])?,
                Layer::EnergyNormalize { energy } => {
                    w.write_all(&[TAG_ENERGY])?;
                    w.write_all(&energy.as_f64().to_le_bytes())?;
                }
                Layer::Softmax => w.write_all(&[TAG_SOFTMAX])?,
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}, expected {MAGIC:?}")));
        }
        let version = u16::from_le_bytes(read_array(r)?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let input_dim = read_dim(r)?;
        let count = read_dim(r)?;
        let mut layers = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let [tag] = read_array::<1, _>(r)?;
            layers.push(match tag {
                TAG_DENSE => {
                    let outputs = read_dim(r)?;
                    let inputs = read_dim(r)?;
                    let weights = read_floats(r, outputs * inputs)?;
                    let bias = read_floats(r, outputs)?;
                    Layer::Dense(Dense::new(Matrix::from_vec(outputs, inputs, weights)?, bias)?)
                }
                TAG_RELU => Layer::Relu,
                TAG_ENERGY => Layer::EnergyNormalize { energy: read_floats(r, 1)?[0] },
                TAG_SOFTMAX => Layer::Softmax,
                other => return Err(Error::Format(format!("unknown layer tag {other}"))),
            });
        }
        Network::new(input_dim, layers).map_err(|e| Error::Format(e.to_string()))
    }

    /// Decodes a complete buffer; trailing bytes are an error.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let net = Self::read_from(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", cursor.len())));
        }
        Ok(net)
    }
}

fn dim(n: usize) -> Result<u32> {
    u32::try_from(n)
        .ok()
        .filter(|&d| d <= MAX_DIM)
        .ok_or_else(|| Error::Format(format!("dimension {n} too large")))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated model data".into()),
        _ => Error::Io(e),
    })
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

fn read_dim<R: Read>(r: &mut R) -> Result<usize> {
    let d = u32::from_le_bytes(read_array(r)?);
    if d > MAX_DIM {
        return Err(Error::Format(format!("dimension {d} exceeds limit")));
    }
    Ok(d as usize)
}

fn read_floats<T: Real, R: Read>(r: &mut R, n: usize) -> Result<Vec<T>> {
    (0..n)
        .map(|_| {
            let v = f64::from_le_bytes(read_array(r)?);
            if !v.is_finite() {
                return Err(Error::Format("non-finite parameter".into()));
            }
            Ok(T::of(v))
        })
        .collect()
}
