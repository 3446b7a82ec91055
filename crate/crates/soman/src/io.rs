//! Persistence helpers: serde adapters for dense complex matrices and the
//! raw `.cf64` sample format.
//!
//! A `.cf64` file is the 16-byte ASCII header `SOMANDBD-CF64v1 ` followed by
//! interleaved little-endian `f64` pairs (I then Q).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};

pub const CF64_HEADER: &[u8; 16] = b"SOMANDBD-CF64v1 ";

pub fn write_cf64(path: &Path, data: &[C64]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 16 * data.len());
    buf.extend_from_slice(CF64_HEADER);
    for v in data {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_cf64(path: &Path) -> Result<Vec<C64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..16] != CF64_HEADER {
        return Err(Error::Format(format!("{}: missing cf64 header", path.display())));
    }
    let body = &bytes[16..];
    if body.len() % 16 != 0 {
        return Err(Error::Format(format!("{}: truncated sample ({} trailing bytes)", path.display(), body.len() % 16)));
    }
    Ok(body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&s)?)
}

/// Writes a real grid as raw little-endian `f64` values.
pub fn write_f64_grid(path: &Path, data: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 * data.len());
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

/// `Mat<C64>` as `{rows, cols, data}` with column-major `[re, im]` pairs.
pub mod mat {
    use faer::Mat;
    use num_complex::Complex64 as C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    pub(crate) struct Dense {
        rows: usize,
        cols: usize,
        data: Vec<C64>,
    }

    impl Dense {
        pub(crate) fn from_mat(m: &Mat<C64>) -> Self {
            let mut data = Vec::with_capacity(m.nrows() * m.ncols());
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    data.push(m[(i, j)]);
                }
            }
            Self { rows: m.nrows(), cols: m.ncols(), data }
        }

        pub(crate) fn into_mat<E: serde::de::Error>(self) -> Result<Mat<C64>, E> {
            if self.data.len() != self.rows * self.cols {
                return Err(E::custom(format!("{} entries for a {}x{} matrix", self.data.len(), self.rows, self.cols)));
            }
            Ok(Mat::from_fn(self.rows, self.cols, |i, j| self.data[j * self.rows + i]))
        }
    }

    pub fn serialize<S: Serializer>(m: &Mat<C64>, s: S) -> Result<S::Ok, S::Error> {
        Dense::from_mat(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat<C64>, D::Error> {
        Dense::deserialize(d)?.into_mat()
    }
}

pub mod mat_vec {
    use faer::Mat;
    use num_complex::Complex64 as C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::mat::Dense;

    pub fn serialize<S: Serializer>(m: &[Mat<C64>], s: S) -> Result<S::Ok, S::Error> {
        m.iter().map(Dense::from_mat).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mat<C64>>, D::Error> {
        Vec::<Dense>::deserialize(d)?.into_iter().map(|x| x.into_mat()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cf64_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.cf64");
        let data = vec![C64::new(1.5, -2.0), C64::new(0.0, 1e-300), C64::new(f64::MAX, -0.0)];
        write_cf64(&path, &data).unwrap();
        let raw = fs::read(&path).unwrap();
        assert_eq!(raw.len(), 16 + 16 * data.len());
        assert_eq!(&raw[..16], CF64_HEADER);
        assert_eq!(read_cf64(&path).unwrap(), data);
    }

    #[test]
    fn cf64_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cf64");
        fs::write(&path, b"NOT-A-CF64-FILE!0123456789abcdef").unwrap();
        assert!(read_cf64(&path).is_err());
    }
}
