//! Versioned little-endian container for a [`Factorization`].
//!
//! Layout: magic `SPND`, `u32` version, `u64 n`, `f64 eps`, `u8` scheme tag,
//! `u64` op count, then per op a `u8` kind tag followed by its index lists
//! (`u64` length + `u64` entries) and dense payloads (`u64 rows`, `u64 cols`,
//! row-major `f64`s). Diagnostics are not stored.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::Factorization;
use crate::dense::{DenseMatrix, Reflectors};
use crate::error::FactorError;
use crate::schemes::{BlockOperator, SchemeKind};

const MAGIC: &[u8; 4] = b"SPND";
const VERSION: u32 = 1;

const TAG_ELIM: u8 = 1;
const TAG_SCALE: u8 = 2;
const TAG_ORTHO: u8 = 3;
const TAG_CORR: u8 = 4;

pub fn write_factorization<W: Write>(mut w: W, f: &Factorization) -> Result<(), FactorError> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(f.n as u64)?;
    w.write_f64::<LittleEndian>(f.eps)?;
    w.write_u8(f.scheme.tag())?;
    w.write_u64::<LittleEndian>(f.ops.len() as u64)?;
    for op in &f.ops {
        match op {
            BlockOperator::Elimination { pivot, neighbors, factor, coupling } => {
                w.write_u8(TAG_ELIM)?;
                write_index(&mut w, pivot)?;
                write_index(&mut w, neighbors)?;
                write_matrix(&mut w, factor)?;
                write_matrix(&mut w, coupling)?;
            }
            BlockOperator::Scaling { slots, factor } => {
                w.write_u8(TAG_SCALE)?;
                write_index(&mut w, slots)?;
                write_matrix(&mut w, factor)?;
            }
            BlockOperator::Orthogonal { slots, reflectors } => {
                w.write_u8(TAG_ORTHO)?;
                write_index(&mut w, slots)?;
                write_matrix(&mut w, reflectors.vectors())?;
                let taus = reflectors.taus();
                w.write_u64::<LittleEndian>(taus.len() as u64)?;
                for &t in taus {
                    w.write_f64::<LittleEndian>(t)?;
                }
            }
            BlockOperator::ErrorCorrection { fine, neighbors, columns, block, trapezoidal } => {
                w.write_u8(TAG_CORR)?;
                write_index(&mut w, fine)?;
                write_index(&mut w, neighbors)?;
                write_index(&mut w, columns)?;
                w.write_u8(*trapezoidal as u8)?;
                write_matrix(&mut w, block)?;
            }
        }
    }
    Ok(())
}

pub fn read_factorization<R: Read>(mut r: R) -> Result<Factorization, FactorError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FactorError::Format("not a factor file (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(FactorError::Format(format!("unsupported version {version}")));
    }
    let n = r.read_u64::<LittleEndian>()? as usize;
    let eps = r.read_f64::<LittleEndian>()?;
    let tag = r.read_u8()?;
    let scheme = SchemeKind::from_tag(tag)
        .ok_or_else(|| FactorError::Format(format!("unknown scheme tag {tag}")))?;
    let count = r.read_u64::<LittleEndian>()? as usize;
    let mut ops = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let op = match r.read_u8()? {
            TAG_ELIM => BlockOperator::Elimination {
                pivot: read_index(&mut r, n)?,
                neighbors: read_index(&mut r, n)?,
                factor: read_matrix(&mut r)?,
                coupling: read_matrix(&mut r)?,
            },
            TAG_SCALE => BlockOperator::Scaling {
                slots: read_index(&mut r, n)?,
                factor: read_matrix(&mut r)?,
            },
            TAG_ORTHO => {
                let slots = read_index(&mut r, n)?;
                let v = read_matrix(&mut r)?;
                let len = r.read_u64::<LittleEndian>()? as usize;
                if len != v.cols() || v.rows() != slots.len() {
                    return Err(FactorError::Format("inconsistent reflector block".into()));
                }
                let tau = (0..len).map(|_| r.read_f64::<LittleEndian>()).collect::<Result<_, _>>()?;
                BlockOperator::Orthogonal { slots, reflectors: Reflectors::from_parts(v, tau) }
            }
            TAG_CORR => {
                let fine = read_index(&mut r, n)?;
                let neighbors = read_index(&mut r, n)?;
                let columns = read_index(&mut r, neighbors.len())?;
                let trapezoidal = r.read_u8()? != 0;
                let block = read_matrix(&mut r)?;
                BlockOperator::ErrorCorrection { fine, neighbors, columns, block, trapezoidal }
            }
            other => return Err(FactorError::Format(format!("unknown operator tag {other}"))),
        };
        check_shapes(&op)?;
        ops.push(op);
    }
    Ok(Factorization { n, eps, scheme, ops, diagnostics: Vec::new() })
}

fn check_shapes(op: &BlockOperator) -> Result<(), FactorError> {
    let ok = match op {
        BlockOperator::Elimination { pivot, neighbors, factor, coupling } => {
            factor.shape() == (pivot.len(), pivot.len())
                && coupling.shape() == (pivot.len(), neighbors.len())
        }
        BlockOperator::Scaling { slots, factor } => factor.shape() == (slots.len(), slots.len()),
        BlockOperator::Orthogonal { .. } => true,
        BlockOperator::ErrorCorrection { fine, columns, block, .. } => {
            block.shape() == (fine.len(), columns.len())
        }
    };
    if ok {
        Ok(())
    } else {
        Err(FactorError::Format(format!("payload shape mismatch in {:?} operator", op.kind())))
    }
}

fn write_index<W: Write>(w: &mut W, idx: &[usize]) -> std::io::Result<()> {
    w.write_u64::<LittleEndian>(idx.len() as u64)?;
    for &i in idx {
        w.write_u64::<LittleEndian>(i as u64)?;
    }
    Ok(())
}

fn read_index<R: Read>(r: &mut R, bound: usize) -> Result<Vec<usize>, FactorError> {
    let len = r.read_u64::<LittleEndian>()? as usize;
    if len > bound {
        return Err(FactorError::Format(format!("index list of length {len} exceeds {bound}")));
    }
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let i = r.read_u64::<LittleEndian>()? as usize;
        if i >= bound {
            return Err(FactorError::Format(format!("index {i} out of range {bound}")));
        }
        out.push(i);
    }
    Ok(out)
}

fn write_matrix<W: Write>(w: &mut W, m: &DenseMatrix) -> std::io::Result<()> {
    w.write_u64::<LittleEndian>(m.rows() as u64)?;
    w.write_u64::<LittleEndian>(m.cols() as u64)?;
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            w.write_f64::<LittleEndian>(m[(i, j)])?;
        }
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R) -> Result<DenseMatrix, FactorError> {
    let rows = r.read_u64::<LittleEndian>()? as usize;
    let cols = r.read_u64::<LittleEndian>()? as usize;
    if rows.checked_mul(cols).is_none_or(|s| s > 1 << 32) {
        return Err(FactorError::Format(format!("implausible block size {rows}×{cols}")));
    }
    let mut m = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = r.read_f64::<LittleEndian>()?;
        }
    }
    Ok(m)
}
