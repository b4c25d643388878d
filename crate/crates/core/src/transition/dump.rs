//! Binary dump of a built hypermatrix.
//!
//! Layout, all integers `u64` and all reals `f64`, little-endian:
//!
//! ```text
//! magic   8 bytes  "MWMCHYP\0"
//! version u32
//! n, m, nnz
//! m × { row_ptr[n+1], col_idx[nnz], values[nnz] }   slices P^(1) … P^(m)
//! m × eta[n]                                         η^(1) … η^(m)
//! ```

use std::io::{Read, Write};

use super::TransitionHypermatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub const DUMP_MAGIC: &[u8; 8] = b"MWMCHYP\0";
pub const DUMP_VERSION: u32 = 1;

// Guards allocation when a corrupt header claims absurd sizes.
const MAX_ELEMENTS: u64 = 1 << 34;

pub fn write_hypermatrix<W: Write>(p: &TransitionHypermatrix, mut out: W) -> Result<()> {
    let n = p.dim();
    let nnz = p.slice(1).nnz();
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    for v in [n, p.m(), nnz] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    for slice in p.slices() {
        for &v in slice.row_ptr().iter().chain(slice.col_indices()) {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        for &v in slice.values() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    for l in 1..=p.m() {
        for &v in p.eta(l) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_hypermatrix<R: Read>(mut input: R) -> Result<TransitionHypermatrix> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != DUMP_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = read_u64(&mut input)?;
    let m = read_u64(&mut input)?;
    let nnz = read_u64(&mut input)?;
    if m == 0 || n.saturating_mul(m) > MAX_ELEMENTS || nnz.saturating_mul(m) > MAX_ELEMENTS {
        return Err(Error::Format(format!("implausible header n={n} m={m} nnz={nnz}")));
    }
    let (n, m, nnz) = (n as usize, m as usize, nnz as usize);

    let mut slices = Vec::with_capacity(m);
    for _ in 0..m {
        let row_ptr = read_indices(&mut input, n + 1)?;
        let col_idx = read_indices(&mut input, nnz)?;
        let values = read_reals(&mut input, nnz)?;
        slices.push(SparseMatrix::from_csr(n, n, row_ptr, col_idx, values)?);
    }
    let etas = (0..m).map(|_| read_reals(&mut input, n)).collect::<Result<Vec<_>>>()?;
    TransitionHypermatrix::from_walk_order(slices, etas)
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_indices<R: Read>(input: &mut R, len: usize) -> Result<Vec<usize>> {
    (0..len)
        .map(|_| {
            let v = read_u64(input)?;
            usize::try_from(v).map_err(|_| Error::Format(format!("index {v} does not fit in usize")))
        })
        .collect()
}

fn read_reals<R: Read>(input: &mut R, len: usize) -> Result<Vec<f64>> {
    (0..len).map(|_| read_u64(input).map(f64::from_bits)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transition::build_hypermatrix;

    #[test]
    fn dump_round_trips_bitwise() {
        let h = crate::sparse::sprand_without_empty_lines(15, 0.3, 4).unwrap().matrix.scaled(0.1);
        let p = build_hypermatrix(&h, 3).unwrap();
        let mut buf = Vec::new();
        write_hypermatrix(&p, &mut buf).unwrap();
        assert_eq!(&buf[..8], DUMP_MAGIC);
        assert_eq!(read_hypermatrix(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let h = SparseMatrix::from_dense(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap();
        let mut buf = Vec::new();
        write_hypermatrix(&build_hypermatrix(&h, 2).unwrap(), &mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_hypermatrix(bad.as_slice()), Err(Error::Format(_))));

        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(read_hypermatrix(bad.as_slice()), Err(Error::Format(_))));

        assert!(matches!(read_hypermatrix(&buf[..buf.len() - 3]), Err(Error::Io(_))));
    }
}
