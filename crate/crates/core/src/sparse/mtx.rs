//! Matrix Market coordinate I/O, restricted to `real symmetric`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::SparseSymMatrix;
use crate::error::SparseError;

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseSymMatrix, SparseError> {
    read_matrix_market_from(BufReader::new(File::open(path)?))
}

/// Reads a `matrix coordinate real symmetric` stream. Either triangle (or
/// both, if consistent) may be stored.
pub fn read_matrix_market_from<R: BufRead>(reader: R) -> Result<SparseSymMatrix, SparseError> {
    let mut lines = reader.lines().enumerate();
    let parse_err = |line: usize, message: String| SparseError::Parse { line: line + 1, message };

    let (hline, header) = lines.next().ok_or_else(|| parse_err(0, "empty file".into()))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") || tokens.len() != 5 {
        return Err(parse_err(hline, format!("bad banner `{header}`")));
    }
    let kind = tokens[1..].join(" ");
    if kind != "matrix coordinate real symmetric" {
        return Err(SparseError::NotSymmetricReal(kind));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries: HashMap<(usize, usize), f64> = HashMap::new();
    let mut read = 0usize;
    for (ln, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(ln, format!("bad size line `{t}`")));
                }
                let nums: Result<Vec<usize>, _> = fields.iter().map(|f| f.parse::<usize>()).collect();
                let nums = nums.map_err(|e| parse_err(ln, e.to_string()))?;
                if nums[0] != nums[1] {
                    return Err(parse_err(ln, "symmetric matrix must be square".into()));
                }
                size = Some((nums[0], nums[1], nums[2]));
            }
            Some((n, _, nnz)) => {
                if fields.len() != 3 {
                    return Err(parse_err(ln, format!("bad entry line `{t}`")));
                }
                let i: usize = fields[0].parse().map_err(|_| parse_err(ln, format!("bad row `{}`", fields[0])))?;
                let j: usize = fields[1].parse().map_err(|_| parse_err(ln, format!("bad column `{}`", fields[1])))?;
                let v: f64 = fields[2].parse().map_err(|_| parse_err(ln, format!("bad value `{}`", fields[2])))?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(parse_err(ln, format!("index ({i}, {j}) out of range")));
                }
                if read == nnz {
                    return Err(parse_err(ln, "more entries than declared".into()));
                }
                read += 1;
                let (i, j) = (i - 1, j - 1);
                if entries.insert((i, j), v).is_some() {
                    return Err(parse_err(ln, format!("duplicate entry ({}, {})", i + 1, j + 1)));
                }
            }
        }
    }
    let (n, _, nnz) = size.ok_or_else(|| parse_err(hline, "missing size line".into()))?;
    if read != nnz {
        return Err(SparseError::Parse {
            line: 0,
            message: format!("declared {nnz} entries, found {read}"),
        });
    }

    let mut triplets = Vec::with_capacity(2 * entries.len());
    for (&(i, j), &v) in &entries {
        if i == j {
            triplets.push((i, j, v));
            continue;
        }
        match entries.get(&(j, i)) {
            Some(&w) if w != v => {
                return Err(SparseError::AsymmetricValues { row: i.max(j) + 1, col: i.min(j) + 1 })
            }
            // both triangles present: emit each once from its own side
            Some(_) => triplets.push((i, j, v)),
            None => {
                triplets.push((i, j, v));
                triplets.push((j, i, v));
            }
        }
    }
    SparseSymMatrix::from_triplets(n, &triplets)
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseSymMatrix) -> Result<(), SparseError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_market_to(&mut w, a)?;
    w.flush()?;
    Ok(())
}

/// Writes the lower triangle with round-trip-exact values.
pub fn write_matrix_market_to<W: Write>(mut w: W, a: &SparseSymMatrix) -> Result<(), SparseError> {
    let lower = (0..a.n()).map(|i| a.row(i).0.iter().filter(|&&j| j <= i).count()).sum::<usize>();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), lower)?;
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j <= i {
                writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
            }
        }
    }
    Ok(())
}
