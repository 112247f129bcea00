//! Raw tensor files: little-endian `f32` payload plus a JSON sidecar named
//! `<payload>.json` that records the shape.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DTYPE_F32_LE: &str = "float32-le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub shape: Vec<usize>,
    pub dtype: String,
    /// The payload holds unnormalized logits that still need a softmax.
    #[serde(default)]
    pub raw_logits: bool,
}

/// Sidecar path for a payload file.
pub fn sidecar_path(payload: &Path) -> PathBuf {
    let mut s = payload.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

pub fn write_tensor<T: Scalar>(payload: &Path, values: &ArrayD<T>, raw_logits: bool) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    // Logical (row-major) order regardless of memory layout.
    for v in values.iter() {
        bytes.extend_from_slice(&(v.to_f32().unwrap_or(f32::NAN)).to_le_bytes());
    }
    let header = TensorHeader { shape: values.shape().to_vec(), dtype: DTYPE_F32_LE.to_string(), raw_logits };
    let side = sidecar_path(payload);
    let doc = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(payload, bytes).map_err(io_err(payload))?;
    fs::write(&side, doc + "\n").map_err(io_err(&side))?;
    Ok(())
}

pub fn write_tensor2<T: Scalar>(payload: &Path, values: &Array2<T>, raw_logits: bool) -> Result<()> {
    write_tensor(payload, &values.clone().into_dyn(), raw_logits)
}

pub fn read_tensor<T: Scalar>(payload: &Path) -> Result<(ArrayD<T>, TensorHeader)> {
    let side = sidecar_path(payload);
    let doc = fs::read_to_string(&side).map_err(io_err(&side))?;
    let header: TensorHeader =
        serde_json::from_str(&doc).map_err(|source| Error::Json { path: side.display().to_string(), source })?;
    if header.dtype != DTYPE_F32_LE {
        return Err(Error::InvalidArgument(format!("{}: unsupported dtype {:?}", side.display(), header.dtype)));
    }
    let bytes = fs::read(payload).map_err(io_err(payload))?;
    let count: usize = header.shape.iter().product();
    if bytes.len() != count * 4 {
        return Err(Error::ShapeMismatch { expected: vec![count * 4], actual: vec![bytes.len()] });
    }
    let data: Vec<T> =
        bytes.chunks_exact(4).map(|c| T::lit(f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))).collect();
    let arr = ArrayD::from_shape_vec(IxDyn(&header.shape), data)
        .map_err(|_| Error::ShapeMismatch { expected: header.shape.clone(), actual: vec![count] })?;
    Ok((arr, header))
}

/// Reads a tensor as a 2D grid; a 1D tensor of length `n` becomes `n x 1`.
pub fn read_tensor2<T: Scalar>(payload: &Path) -> Result<(Array2<T>, TensorHeader)> {
    let (arr, header) = read_tensor(payload)?;
    let shape = arr.shape().to_vec();
    let grid = match shape.as_slice() {
        [n] => arr.into_shape_with_order((*n, 1)),
        [h, w] => arr.into_shape_with_order((*h, *w)),
        _ => return Err(Error::ShapeMismatch { expected: vec![0, 0], actual: shape }),
    }
    .map_err(|_| Error::InvalidArgument("tensor reshape failed".into()))?;
    Ok((grid, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.f32");
        let a = array![[1.0f64, 2.0, 3.0], [4.0, 5.0, 6.5]];
        write_tensor2(&path, &a.t().to_owned(), true).unwrap();
        let (b, header) = read_tensor2::<f64>(&path).unwrap();
        assert_eq!(b, a.t());
        assert!(header.raw_logits);
        assert_eq!(header.shape, vec![3, 2]);
        // Payload is row-major little-endian f32.
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[4..8], &4.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_bad_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.f32");
        write_tensor(&path, &ArrayD::<f64>::zeros(IxDyn(&[2, 2, 2])), false).unwrap();
        assert!(read_tensor2::<f64>(&path).is_err());
        fs::write(&path, [0u8; 5]).unwrap();
        assert!(read_tensor::<f64>(&path).is_err());
        assert!(read_tensor::<f64>(&dir.path().join("missing.f32")).is_err());

        let vec_path = dir.path().join("v.f32");
        write_tensor(&vec_path, &ArrayD::<f64>::ones(IxDyn(&[5])), false).unwrap();
        assert_eq!(read_tensor2::<f64>(&vec_path).unwrap().0.dim(), (5, 1));
    }
}
