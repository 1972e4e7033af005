//! Binary matrix dump.
//!
//! Little-endian layout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `BEMTRMAT` |
//! | 4     | format version (1) |
//! | 4     | operator kind: 0 = V, 1 = K, 2 = T, 3 = D |
//! | 8     | rows (u64) |
//! | 8     | cols (u64) |
//! | 16    | wavenumber re, im (f64) |
//! | 16 * rows * cols | entries row-major, re then im (f64) |

use std::io::{Read, Write};

use super::{DenseOperator, OperatorKind};
use crate::linalg::DenseMatrix;
use crate::{Error, Result, C64};

const MAGIC: &[u8; 8] = b"BEMTRMAT";
const VERSION: u32 = 1;

pub fn write_matrix_dump<W: Write>(op: &DenseOperator, mut w: W) -> Result<()> {
    let m = &op.matrix;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(op.kind.code() as u32).to_le_bytes())?;
    w.write_all(&(m.rows as u64).to_le_bytes())?;
    w.write_all(&(m.cols as u64).to_le_bytes())?;
    w.write_all(&op.k.re.to_le_bytes())?;
    w.write_all(&op.k.im.to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * m.data.len());
    for z in &m.data {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Header and matrix read back from a dump.
#[derive(Debug, Clone)]
pub struct MatrixDump {
    pub kind: OperatorKind,
    pub k: C64,
    pub matrix: DenseMatrix,
}

pub fn read_matrix_dump<R: Read>(mut r: R) -> Result<MatrixDump> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidInput("not a matrix dump".into()));
    }
    let mut u4 = [0u8; 4];
    let mut u8b = [0u8; 8];
    r.read_exact(&mut u4)?;
    if u32::from_le_bytes(u4) != VERSION {
        return Err(Error::InvalidInput("unsupported matrix dump version".into()));
    }
    r.read_exact(&mut u4)?;
    let kind = OperatorKind::from_code(u32::from_le_bytes(u4) as u8)
        .ok_or_else(|| Error::InvalidInput("unknown operator kind in dump".into()))?;
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut u8b)?;
        Ok(u64::from_le_bytes(u8b))
    };
    let rows = next_u64(&mut r)? as usize;
    let cols = next_u64(&mut r)? as usize;
    let f = |r: &mut R| -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let k = C64::new(f(&mut r)?, f(&mut r)?);
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re = f(&mut r)?;
        let im = f(&mut r)?;
        data.push(C64::new(re, im));
    }
    Ok(MatrixDump { kind, k, matrix: DenseMatrix { rows, cols, data } })
}
