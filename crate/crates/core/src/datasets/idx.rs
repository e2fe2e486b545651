//! IDX container (big-endian magic, dimension sizes, raw unsigned bytes).

use std::fs;
use std::path::Path;

use super::LabeledDense;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(fs::read(path)?)
}

fn be_u32(buf: &[u8], at: usize, path: &Path) -> Result<u32> {
    buf.get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            expected: at + 4,
            found: buf.len(),
        })
}

/// Parses an IDX file, checking its magic, and returns the dimension sizes
/// and the payload.
fn parse<'a>(buf: &'a [u8], path: &Path, magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    let found = be_u32(buf, 0, path)?;
    if found != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (0..ndim)
        .map(|d| be_u32(buf, 4 + 4 * d, path).map(|x| x as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * ndim;
    let expected = header + dims.iter().product::<usize>();
    if buf.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: buf.len(),
        });
    }
    Ok((dims, &buf[header..expected]))
}

/// Loads an image file and its label file. Pixels are scaled to `[0, 1]`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDense> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = read(ip)?;
    let labels = read(lp)?;
    let (idims, pixels) = parse(&images, ip, IDX_IMAGES_MAGIC)?;
    let (ldims, label_bytes) = parse(&labels, lp, IDX_LABELS_MAGIC)?;
    if idims[0] != ldims[0] {
        return Err(Error::CountMismatch {
            images: idims[0],
            labels: ldims[0],
        });
    }
    let dims = idims[1] * idims[2];
    let features: Vec<f32> = pixels.iter().map(|&p| p as f32 / 255.0).collect();
    let labels: Vec<usize> = label_bytes.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    LabeledDense::new(dims, classes, features, labels)
}

#[cfg(test)]
pub(crate) mod tests {
    use std::io::Write;

    use super::*;

    pub(crate) fn write_idx(dir: &Path, name: &str, magic: u32, dims: &[u32], payload: &[u8]) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(&magic.to_be_bytes()).unwrap();
        for d in dims {
            f.write_all(&d.to_be_bytes()).unwrap();
        }
        f.write_all(payload).unwrap();
        path
    }

    #[test]
    fn parses_a_small_pair() {
        let dir = tempfile::tempdir().unwrap();
        let img = write_idx(dir.path(), "i", IDX_IMAGES_MAGIC, &[2, 2, 2], &[0, 255, 51, 102, 1, 2, 3, 4]);
        let lab = write_idx(dir.path(), "l", IDX_LABELS_MAGIC, &[2], &[3, 1]);
        let d = load_idx(&img, &lab).unwrap();
        assert_eq!((d.samples, d.dims, d.classes), (2, 4, 4));
        assert_eq!(d.row(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(d.labels, vec![3, 1]);
    }

    #[test]
    fn distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let img = write_idx(dir.path(), "i", IDX_IMAGES_MAGIC, &[2, 2, 2], &[0; 8]);
        let lab = write_idx(dir.path(), "l", IDX_LABELS_MAGIC, &[3], &[0, 0, 0]);
        assert!(matches!(load_idx(&img, &lab), Err(Error::CountMismatch { images: 2, labels: 3 })));

        let short = write_idx(dir.path(), "s", IDX_IMAGES_MAGIC, &[2, 2, 2], &[0; 5]);
        let lab2 = write_idx(dir.path(), "l2", IDX_LABELS_MAGIC, &[2], &[0, 0]);
        assert!(matches!(load_idx(&short, &lab2), Err(Error::Truncated { expected: 24, found: 21, .. })));

        // swapped files: labels magic where images are expected
        assert!(matches!(load_idx(&lab2, &img), Err(Error::BadMagic { .. })));
        assert!(matches!(
            load_idx(dir.path().join("nope"), &lab2),
            Err(Error::MissingFile(_))
        ));
    }
}
