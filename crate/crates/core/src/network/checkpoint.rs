//! Binary model checkpoints. Layout (all integers and floats little-endian):
//!
//! ```text
//! magic          8 bytes  "MDNCKPT\0"
//! version        u32      = 1
//! sizes          3 x u32  input, hidden, output
//! horizon        u32
//! dt             f64
//! seed           u64
//! learn_dynamics u8       0 or 1
//! W1             input*hidden f64, row-major
//! W2             hidden*output f64, row-major
//! hidden layer   u32 table length, then per entry: u8 kind + 5 x f64,
//!                then one u32 type index per neuron
//! output layer   same as hidden
//! ```
//!
//! Kind codes and their five parameters:
//! `0` first order `(g, v_th, v_reset, 0, 0)`,
//! `1` second order `(theta_a, theta_b, theta_c, theta_d, v_th)`,
//! `2` Izhikevich `(a, b, c, d, 0)`.

use std::fs;
use std::path::Path;

use super::{LayerSizes, Matrix, NetworkModel, NeuronLayer};
use crate::dynamics::{DynamicParams, IzhikevichParams, LifParams, SecondOrderParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MDNCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_params(buf: &mut Vec<u8>, p: &DynamicParams) {
    let (code, vals) = match p {
        DynamicParams::FirstOrder(p) => (0u8, [p.g, p.v_th, p.v_reset, 0.0, 0.0]),
        DynamicParams::SecondOrder(p) => (1u8, [p.theta_a, p.theta_b, p.theta_c, p.theta_d, p.v_th]),
        DynamicParams::Izhikevich(p) => (2u8, [p.a, p.b, p.c, p.d, 0.0]),
    };
    buf.push(code);
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_layer(buf: &mut Vec<u8>, layer: &NeuronLayer) {
    buf.extend_from_slice(&(layer.table.len() as u32).to_le_bytes());
    for p in &layer.table {
        put_params(buf, p);
    }
    for &a in &layer.assignment {
        buf.extend_from_slice(&(a as u32).to_le_bytes());
    }
}

pub fn encode_checkpoint(model: &NetworkModel) -> Vec<u8> {
    let s = model.sizes;
    let mut buf = Vec::with_capacity(64 + 8 * (model.w1.data.len() + model.w2.data.len()));
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for n in [s.input, s.hidden, s.output, model.horizon] {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    buf.extend_from_slice(&model.dt.to_le_bytes());
    buf.extend_from_slice(&model.seed.to_le_bytes());
    buf.push(model.learn_dynamics as u8);
    for w in model.w1.data.iter().chain(&model.w2.data) {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    put_layer(&mut buf, &model.hidden);
    put_layer(&mut buf, &model.output);
    buf
}

pub fn save_checkpoint(model: &NetworkModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                expected: self.pos + n,
                found: self.buf.len(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn params(&mut self) -> Result<DynamicParams> {
        let code = self.u8()?;
        let v = self.f64s(5)?;
        Ok(match code {
            0 => DynamicParams::FirstOrder(LifParams {
                g: v[0],
                v_th: v[1],
                v_reset: v[2],
            }),
            1 => DynamicParams::SecondOrder(SecondOrderParams {
                theta_a: v[0],
                theta_b: v[1],
                theta_c: v[2],
                theta_d: v[3],
                v_th: v[4],
            }),
            2 => DynamicParams::Izhikevich(IzhikevichParams {
                a: v[0],
                b: v[1],
                c: v[2],
                d: v[3],
            }),
            other => return Err(Error::format(self.path, format!("unknown neuron kind code {other}"))),
        })
    }

    fn layer(&mut self, n: usize) -> Result<NeuronLayer> {
        let len = self.u32()? as usize;
        let table = (0..len).map(|_| self.params()).collect::<Result<Vec<_>>>()?;
        let assignment = (0..n)
            .map(|_| self.u32().map(|a| a as usize))
            .collect::<Result<Vec<_>>>()?;
        NeuronLayer::mixed(table, assignment)
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<NetworkModel> {
    let mut r = Reader { buf: bytes, pos: 0, path };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a checkpoint file"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let sizes = LayerSizes::new(r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let horizon = r.u32()? as usize;
    let dt = r.f64()?;
    let seed = r.u64()?;
    let learn_dynamics = r.u8()? != 0;
    let w1 = Matrix {
        rows: sizes.input,
        cols: sizes.hidden,
        data: r.f64s(sizes.input * sizes.hidden)?,
    };
    let w2 = Matrix {
        rows: sizes.hidden,
        cols: sizes.output,
        data: r.f64s(sizes.hidden * sizes.output)?,
    };
    let hidden = r.layer(sizes.hidden)?;
    let output = r.layer(sizes.output)?;
    if r.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after checkpoint"));
    }
    let model = NetworkModel {
        sizes,
        w1,
        w2,
        hidden,
        output,
        horizon,
        dt,
        learn_dynamics,
        seed,
    };
    model.validate()?;
    Ok(model)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode_checkpoint(&fs::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_network, NetworkConfig};

    #[test]
    fn round_trip_and_truncation() {
        let cfg = NetworkConfig::meta(LayerSizes::new(5, 4, 3), 7);
        let mut m = init_network(&cfg, 99).unwrap();
        if let DynamicParams::SecondOrder(p) = &mut m.hidden.table[2] {
            p.theta_c = -0.123;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&m, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), m);

        let bytes = encode_checkpoint(&m);
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(decode_checkpoint(cut, &path), Err(Error::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad, &path).is_err());
    }
}
