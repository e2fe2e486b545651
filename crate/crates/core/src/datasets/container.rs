//! Binary container for pre-encoded spike datasets.
//!
//! ```text
//! magic    6 bytes  "MDNSPK"
//! version  u8       = 1
//! method   u8       0 rate, 1 synthetic temporal, 2 external
//! seed     u64 LE
//! samples  u32 LE
//! neurons  u32 LE
//! horizon  u32 LE
//! classes  u32 LE
//! spikes   ceil(samples * neurons * horizon / 8) bytes, LSB-first bits
//!          in (sample, neuron, t) order; unused trailing bits are zero
//! labels   samples x u16 LE
//! ```

use std::fs;
use std::path::Path;

use super::{EncodedDataset, EncodingDescriptor, EncodingMethod};
use crate::error::{Error, Result};

pub const ENCODED_MAGIC: &[u8; 6] = b"MDNSPK";
pub const ENCODED_VERSION: u8 = 1;
const HEADER_LEN: usize = 6 + 1 + 1 + 8 + 4 * 4;

pub fn encode_container(data: &EncodedDataset) -> Result<Vec<u8>> {
    if data.classes > u16::MAX as usize + 1 {
        return Err(Error::Config(format!("{} classes do not fit the label field", data.classes)));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + data.bits.len() + 2 * data.samples);
    buf.extend_from_slice(ENCODED_MAGIC);
    buf.push(ENCODED_VERSION);
    buf.push(data.descriptor.method.code());
    buf.extend_from_slice(&data.descriptor.seed.to_le_bytes());
    for n in [data.samples, data.neurons, data.horizon, data.classes] {
        let n = u32::try_from(n).map_err(|_| Error::Config(format!("dimension {n} exceeds u32")))?;
        buf.extend_from_slice(&n.to_le_bytes());
    }
    buf.extend_from_slice(&data.bits);
    for &l in &data.labels {
        buf.extend_from_slice(&(l as u16).to_le_bytes());
    }
    Ok(buf)
}

pub fn save_encoded(data: &EncodedDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_container(data)?)?;
    Ok(())
}

pub fn decode_container(buf: &[u8], path: &Path) -> Result<EncodedDataset> {
    if buf.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN,
            found: buf.len(),
        });
    }
    if &buf[..6] != ENCODED_MAGIC {
        return Err(Error::format(path, "not an encoded spike dataset"));
    }
    if buf[6] != ENCODED_VERSION {
        return Err(Error::format(path, format!("unsupported version {}", buf[6])));
    }
    let method =
        EncodingMethod::from_code(buf[7]).ok_or_else(|| Error::format(path, format!("unknown encoding {}", buf[7])))?;
    let seed = u64::from_le_bytes(buf[8..16].try_into().unwrap());
    let word = |k: usize| u32::from_le_bytes(buf[16 + 4 * k..20 + 4 * k].try_into().unwrap()) as usize;
    let (samples, neurons, horizon, classes) = (word(0), word(1), word(2), word(3));
    let n_bits = samples
        .checked_mul(neurons)
        .and_then(|x| x.checked_mul(horizon))
        .ok_or_else(|| Error::format(path, "header dimensions overflow"))?;
    let n_bytes = n_bits.div_ceil(8);
    let expected = HEADER_LEN + n_bytes + 2 * samples;
    if buf.len() != expected {
        if buf.len() < expected {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected,
                found: buf.len(),
            });
        }
        return Err(Error::format(path, format!("{} trailing bytes", buf.len() - expected)));
    }
    let bits = buf[HEADER_LEN..HEADER_LEN + n_bytes].to_vec();
    if n_bits % 8 != 0 && bits.last().is_some_and(|&b| b >> (n_bits % 8) != 0) {
        return Err(Error::format(path, "padding bits are not zero"));
    }
    let labels: Vec<usize> = buf[HEADER_LEN + n_bytes..]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]) as usize)
        .collect();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::format(path, format!("label {bad} out of range for {classes} classes")));
    }
    Ok(EncodedDataset {
        samples,
        neurons,
        horizon,
        classes,
        bits,
        labels,
        descriptor: EncodingDescriptor { method, horizon, seed },
    })
}

pub fn load_encoded(path: impl AsRef<Path>) -> Result<EncodedDataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode_container(&fs::read(path)?, path)
}
