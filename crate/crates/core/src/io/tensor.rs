//! Binary tensor container: magic "TCDA", format version, rank, dims, then
//! a row-major f64 payload, all little-endian. Round-trips are bit-exact;
//! non-finite payloads are rejected on both ends.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2, ArrayView3};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"TCDA";
pub const FORMAT_VERSION: u32 = 1;

/// Rank guard against corrupt headers; real tensors here are rank 2 or 3.
const MAX_RANK: u32 = 8;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

pub fn write_tensor(path: &Path, dims: &[usize], data: &[f64]) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!(
            "tensor dims must be nonempty and positive, got {dims:?}"
        )));
    }
    if dims.len() > MAX_RANK as usize {
        return Err(Error::InvalidArgument(format!("rank {} exceeds {MAX_RANK}", dims.len())));
    }
    let n: usize = dims.iter().product();
    if n != data.len() {
        return Err(Error::ShapeMismatch(format!(
            "dims {dims:?} imply {n} values, payload has {}",
            data.len()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("tensor payload for {}", path.display())));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        let d32 = u32::try_from(d)
            .map_err(|_| Error::InvalidArgument(format!("dim {d} exceeds u32")))?;
        w.write_all(&d32.to_le_bytes())?;
    }
    for &v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, path, "magic")?;
    if magic != MAGIC {
        return Err(format_err(path, format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r, path, "version")?;
    if version != FORMAT_VERSION {
        return Err(format_err(path, format!("unsupported format version {version}")));
    }
    let rank = read_u32(&mut r, path, "rank")?;
    if rank == 0 || rank > MAX_RANK {
        return Err(format_err(path, format!("rank {rank} out of range 1..={MAX_RANK}")));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    let mut n: usize = 1;
    for k in 0..rank {
        let d = read_u32(&mut r, path, "dims")? as usize;
        if d == 0 {
            return Err(format_err(path, format!("dim {k} is zero")));
        }
        n = n
            .checked_mul(d)
            .ok_or_else(|| format_err(path, "dimension product overflows"))?;
        dims.push(d);
    }
    let mut data = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        read_exact(&mut r, &mut buf, path, "payload")?;
        let v = f64::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("tensor payload in {}", path.display())));
        }
        data.push(v);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(format_err(path, "trailing bytes after payload"));
    }
    Ok((dims, data))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| format_err(path, format!("truncated while reading {what}")))
}

fn read_u32<R: Read>(r: &mut R, path: &Path, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, path, what)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn write_array2(path: &Path, a: ArrayView2<f64>) -> Result<()> {
    let data: Vec<f64> = a.iter().copied().collect();
    write_tensor(path, &[a.nrows(), a.ncols()], &data)
}

pub fn write_array3(path: &Path, a: ArrayView3<f64>) -> Result<()> {
    let data: Vec<f64> = a.iter().copied().collect();
    let d = a.dim();
    write_tensor(path, &[d.0, d.1, d.2], &data)
}

pub fn read_array2(path: &Path) -> Result<Array2<f64>> {
    let (dims, data) = read_tensor(path)?;
    let [r, c] = dims[..] else {
        return Err(Error::ShapeMismatch(format!(
            "expected rank 2 in {}, got dims {dims:?}",
            path.display()
        )));
    };
    Array2::from_shape_vec((r, c), data)
        .map_err(|e| Error::ShapeMismatch(format!("{}: {e}", path.display())))
}

pub fn read_array3(path: &Path) -> Result<Array3<f64>> {
    let (dims, data) = read_tensor(path)?;
    let [a, b, c] = dims[..] else {
        return Err(Error::ShapeMismatch(format!(
            "expected rank 3 in {}, got dims {dims:?}",
            path.display()
        )));
    };
    Array3::from_shape_vec((a, b, c), data)
        .map_err(|e| Error::ShapeMismatch(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::fs;

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tcda");
        // subnormals, negative zero, and extremes must survive exactly
        let data = vec![0.0, -0.0, 1e-308, f64::MIN_POSITIVE, f64::MAX, -3.25, 7.0 / 3.0, 1e300];
        write_tensor(&path, &[2, 2, 2], &data).unwrap();
        let (dims, back) = read_tensor(&path).unwrap();
        assert_eq!(dims, vec![2, 2, 2]);
        assert_eq!(back.len(), data.len());
        for (a, b) in back.iter().zip(&data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let bytes1 = fs::read(&path).unwrap();
        write_tensor(&path, &[2, 2, 2], &back).unwrap();
        assert_eq!(bytes1, fs::read(&path).unwrap());
    }

    #[test]
    fn array_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p2 = dir.path().join("m.tcda");
        let m = array![[1.0, 0.0], [0.0, 1.0]];
        write_array2(&p2, m.view()).unwrap();
        assert_eq!(read_array2(&p2).unwrap(), m);

        let p3 = dir.path().join("t.tcda");
        let t = Array3::from_shape_fn((3, 2, 4), |(i, j, k)| (i * 100 + j * 10 + k) as f64);
        write_array3(&p3, t.view()).unwrap();
        assert_eq!(read_array3(&p3).unwrap(), t);
        assert!(matches!(read_array2(&p3), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn header_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tcda");
        write_tensor(&path, &[2], &[1.0, 2.0]).unwrap();

        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::Format { .. })));

        bytes[0] = b'T';
        bytes[4] = 9; // version
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn truncation_and_trailing_bytes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tcda");
        write_tensor(&path, &[3], &[1.0, 2.0, 3.0]).unwrap();
        let bytes = fs::read(&path).unwrap();

        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::Format { .. })));

        let mut extended = bytes.clone();
        extended.push(0);
        fs::write(&path, &extended).unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn payload_policy() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tcda");
        assert!(write_tensor(&path, &[], &[]).is_err());
        assert!(write_tensor(&path, &[0, 2], &[]).is_err());
        assert!(write_tensor(&path, &[2], &[1.0]).is_err());
        assert!(matches!(
            write_tensor(&path, &[1], &[f64::NAN]),
            Err(Error::NonFinite(_))
        ));

        // a handcrafted non-finite payload must be rejected on read too
        write_tensor(&path, &[1], &[1.0]).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let tail = bytes.len() - 8;
        bytes[tail..].copy_from_slice(&f64::INFINITY.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::NonFinite(_))));
    }
}
