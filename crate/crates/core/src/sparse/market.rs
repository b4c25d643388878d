//! Matrix Market coordinate files (`real`/`integer` field, `general` or
//! `symmetric` storage).

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::SparseMatrix;
use crate::error::{Error, Result};

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_matrix_market(BufReader::new(file), path)
}

/// Parses a coordinate file from any reader; `origin` only labels errors.
pub fn read_matrix_market<R: BufRead>(reader: R, origin: impl Into<PathBuf>) -> Result<SparseMatrix> {
    let origin = origin.into();
    let err = |line: usize, message: String| Error::Parse { path: origin.clone(), line, message };

    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let banner = banner?;
    let tokens: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(1, format!("expected `%%MatrixMarket matrix ...` banner, found `{banner}`")));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::Unsupported(format!("`{}` format (only coordinate is read)", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(Error::Unsupported(format!("`{other}` field (only real matrices are supported)"))),
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::Unsupported(format!("`{other}` symmetry (general or symmetric only)"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut last_line = 1;
    for (lineno, line) in lines {
        let line = line?;
        last_line = lineno;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let Some((rows, cols, nnz)) = size else {
            if fields.len() != 3 {
                return Err(err(lineno, format!("size line needs 3 integers, found `{trimmed}`")));
            }
            let parse = |s: &str| s.parse::<usize>().map_err(|e| err(lineno, format!("bad size `{s}`: {e}")));
            let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
            triplets.reserve(if symmetric { 2 * dims.2 } else { dims.2 });
            size = Some(dims);
            continue;
        };
        if fields.len() != 3 {
            return Err(err(lineno, format!("entry needs `row col value`, found `{trimmed}`")));
        }
        let index = |s: &str, bound: usize| -> Result<usize> {
            let k = s.parse::<usize>().map_err(|e| err(lineno, format!("bad index `{s}`: {e}")))?;
            if k == 0 || k > bound {
                return Err(err(lineno, format!("index {k} outside 1..={bound}")));
            }
            Ok(k - 1)
        };
        let i = index(fields[0], rows)?;
        let j = index(fields[1], cols)?;
        let v: f64 = fields[2].parse().map_err(|e| err(lineno, format!("bad value `{}`: {e}", fields[2])))?;
        if !v.is_finite() {
            return Err(err(lineno, format!("non-finite value `{}`", fields[2])));
        }
        triplets.push((i, j, v));
        if symmetric && i != j {
            triplets.push((j, i, v));
        }
        let stored = triplets.len();
        if stored > 2 * nnz {
            return Err(err(lineno, format!("more entries than the declared {nnz}")));
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| err(last_line, "missing size line".into()))?;
    let read = if symmetric {
        triplets.iter().filter(|(i, j, _)| i >= j).count()
    } else {
        triplets.len()
    };
    if read != nnz {
        return Err(err(last_line, format!("declared {nnz} entries but read {read}")));
    }
    SparseMatrix::from_triplets(rows, cols, triplets)
}

/// Writes `m` as a `general` coordinate file.
pub fn write_matrix_market<W: Write>(m: &SparseMatrix, mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz())?;
    for i in 0..m.n_rows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}
