use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MDET";
pub const VERSION: u32 = 1;

/// Element kind tag stored in the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[repr(u8)]
pub enum DType {
    #[default]
    F32 = 1,
}

impl DType {
    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(DType::F32),
            other => Err(Error::UnsupportedDtype(other)),
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
        }
    }
}

/// Dense row-major tensor of finite `f32` values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tensor {
    dtype: DType,
    shape: Vec<usize>,
    data: Vec<f32>,
}

fn element_count(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::param(format!("shape {shape:?} overflows")))
}

fn check_finite(data: &[f32]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.len() > u8::MAX as usize {
            return Err(Error::param(format!("rank {} exceeds 255", shape.len())));
        }
        let expected = element_count(&shape)?;
        if expected != data.len() {
            return Err(Error::LengthMismatch {
                shape,
                expected,
                found: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self {
            dtype: DType::F32,
            shape,
            data,
        })
    }

    /// Stacks equal-length embeddings into a `rows x dim` matrix.
    pub fn from_rows(rows: &[Embedding], dim: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.dim(),
                });
            }
            data.extend_from_slice(r.values());
        }
        Tensor::new(vec![rows.len(), dim], data)
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Number of rows when viewed as a matrix (first axis).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Row width when viewed as a matrix (product of trailing axes).
    pub fn cols(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    /// Row `i` as a validated embedding.
    pub fn embedding(&self, i: usize) -> Result<Embedding> {
        if i >= self.rows() {
            return Err(Error::DanglingRow {
                what: "tensor".into(),
                row: i,
                rows: self.rows(),
            });
        }
        Embedding::new(self.row(i).to_vec())
    }

    /// Size in bytes of the encoded form.
    pub fn encoded_len(&self) -> usize {
        4 + 4 + 1 + 1 + 8 * self.shape.len() + self.dtype.size() * self.data.len()
    }
}

/// Encodes `t` in the `MDET` format. Returns the number of bytes written.
pub fn write_tensor<W: Write>(t: &Tensor, sink: &mut W) -> Result<usize> {
    check_finite(&t.data)?;
    let mut buf = Vec::with_capacity(t.encoded_len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(t.dtype as u8);
    buf.push(t.shape.len() as u8);
    for &d in &t.shape {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in &t.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(buf.len())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }
}

/// Decodes an `MDET` tensor, validating every invariant. The source must
/// contain exactly one tensor.
pub fn read_tensor<R: Read>(source: &mut R) -> Result<Tensor> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    let truncated = |shape: Vec<usize>, found: usize| Error::LengthMismatch {
        expected: element_count(&shape).unwrap_or(usize::MAX),
        shape,
        found,
    };

    let magic = cur.take(4).ok_or_else(|| truncated(vec![], 0))?;
    if magic != MAGIC {
        return Err(Error::BadMagic(magic.try_into().expect("4 bytes")));
    }
    let version = cur.take(4).ok_or_else(|| truncated(vec![], 0))?;
    let version = u32::from_le_bytes(version.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dtype = DType::from_tag(cur.take(1).ok_or_else(|| truncated(vec![], 0))?[0])?;
    let rank = cur.take(1).ok_or_else(|| truncated(vec![], 0))?[0] as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        let d = cur.take(8).ok_or_else(|| truncated(shape.clone(), 0))?;
        let d = u64::from_le_bytes(d.try_into().expect("8 bytes"));
        shape.push(usize::try_from(d).map_err(|_| Error::param("dimension exceeds usize"))?);
    }
    let expected = element_count(&shape)?;
    let payload = &bytes[cur.pos..];
    let size = dtype.size();
    if payload.len() % size != 0 || payload.len() / size != expected {
        return Err(Error::LengthMismatch {
            shape,
            expected,
            found: payload.len() / size,
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(size)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Tensor::new(shape, data)
}

pub fn save_tensor(t: &Tensor, path: &Path) -> Result<usize> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let n = write_tensor(t, &mut file).map_err(|e| match e {
        Error::Stream(io) => Error::io(path, io),
        other => other,
    })?;
    Ok(n)
}

pub fn load_tensor(path: &Path) -> Result<Tensor> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensor(&mut file).map_err(|e| match e {
        Error::Stream(io) => Error::io(path, io),
        other => other,
    })
}

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("embedding must have dimension > 0"));
        }
        check_finite(&values)?;
        Ok(Self(values))
    }

    /// Rounds an `f64` vector to `f32`.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        crate::math::widen(&self.0)
    }

    pub fn norm(&self) -> f64 {
        crate::math::norm(&self.to_f64())
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(t: &Tensor) -> Vec<u8> {
        let mut out = Vec::new();
        write_tensor(t, &mut out).unwrap();
        out
    }

    #[test]
    fn smallest_tensor_is_22_bytes() {
        let t = Tensor::new(vec![1], vec![0.0]).unwrap();
        let mut out = Vec::new();
        assert_eq!(write_tensor(&t, &mut out).unwrap(), 22);
        assert_eq!(out.len(), 22);
        assert_eq!(&out[..4], b"MDET");
        assert_eq!(&out[4..8], &[1, 0, 0, 0]);
        assert_eq!(out[8], 1);
        assert_eq!(out[9], 1);
        assert_eq!(&out[10..18], &1u64.to_le_bytes());
        // a rank-2 1x1 tensor carries one more shape word
        let t2 = Tensor::new(vec![1, 1], vec![0.0]).unwrap();
        assert_eq!(encode(&t2).len(), 30);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let t = Tensor::new(
            vec![2, 3],
            vec![-0.0, 1.5, f32::MIN_POSITIVE, 3.0, -7.25, f32::MAX],
        )
        .unwrap();
        let back = read_tensor(&mut encode(&t).as_slice()).unwrap();
        assert_eq!(back.shape(), t.shape());
        let a: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_nan_on_write_and_read() {
        assert!(matches!(
            Tensor::new(vec![1], vec![f32::NAN]),
            Err(Error::NonFinite(0))
        ));
        let mut bytes = encode(&Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(
            read_tensor(&mut bytes.as_slice()),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn write_rejects_non_finite_smuggled_in() {
        let t = Tensor {
            dtype: DType::F32,
            shape: vec![1],
            data: vec![f32::NAN],
        };
        let err = write_tensor(&t, &mut Vec::new()).unwrap_err();
        assert!(err.to_string().contains("non-finite element"));
    }

    #[test]
    fn truncated_payload_is_length_mismatch() {
        let bytes = encode(&Tensor::new(vec![4], vec![1.0; 4]).unwrap());
        let err = read_tensor(&mut &bytes[..bytes.len() - 3]).unwrap_err();
        assert!(
            err.to_string().contains("shape/data length mismatch"),
            "{err}"
        );
        let err = read_tensor(&mut &bytes[..12]).unwrap_err();
        assert!(
            err.to_string().contains("shape/data length mismatch"),
            "{err}"
        );
    }

    #[test]
    fn bad_magic_version_dtype() {
        let mut bytes = encode(&Tensor::new(vec![1], vec![0.0]).unwrap());
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        let err = read_tensor(&mut bad.as_slice()).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            read_tensor(&mut bad.as_slice()),
            Err(Error::UnsupportedVersion(2))
        ));
        bytes[8] = 9;
        assert!(matches!(
            read_tensor(&mut bytes.as_slice()),
            Err(Error::UnsupportedDtype(9))
        ));
    }

    #[test]
    fn shape_mismatch_on_construction() {
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![0.0; 3]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn embedding_unit_flag() {
        let e = Embedding::new(vec![0.6, 0.8]).unwrap();
        assert!(e.is_unit());
        assert!(!Embedding::new(vec![1.0, 1.0]).unwrap().is_unit());
        assert!(Embedding::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn read_inverts_write(shape in proptest::collection::vec(0usize..5, 0..4), seed in any::<u32>()) {
            let n: usize = shape.iter().product();
            let data: Vec<f32> = (0..n).map(|i| ((i as u32).wrapping_mul(2654435761) ^ seed) as f32 / 1e3 - 2e6).collect();
            let t = Tensor::new(shape, data).unwrap();
            let bytes = encode(&t);
            prop_assert_eq!(bytes.len(), t.encoded_len());
            prop_assert_eq!(read_tensor(&mut bytes.as_slice()).unwrap(), t);
        }
    }
}
