//! Hermitian matrices with sparse row storage.
//!
//! `HermitianMatrix` is the shared input type for the model generators, the
//! walk expansions, and the resolvent solvers. Entries are stored as sorted
//! per-row nonzero lists covering both triangles, so row iteration (the hot
//! path for sparse matvecs and lazy graph expansion) is cheap, while the
//! logical matrix is always exactly Hermitian by construction.
//!
//! The on-disk format is binary, little-endian throughout:
//!
//! ```text
//! magic   4 bytes  "AMHM"
//! version u8       1
//! storage u8       0 = dense, 1 = sparse
//! n       u64
//! dense   n*n entries, row-major, each (re: f64, im: f64)
//! sparse  count: u64, then count records (i: u64, j: u64, re: f64, im: f64)
//!         listing the upper triangle (i <= j) in strictly increasing (i, j)
//!         order; the lower triangle is implied by conjugate symmetry
//! ```
//!
//! Reads validate the header, index bounds, ordering, finiteness, and (for
//! dense payloads) conjugate symmetry, and reject anything malformed.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::rng;

/// Storage layout used when the matrix is written to disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    Dense,
    Sparse,
}

/// An N x N complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    /// Row i holds every stored nonzero (col, value), sorted by column.
    rows: Vec<Vec<(u32, Complex64)>>,
    storage: Storage,
}

const MAGIC: &[u8; 4] = b"AMHM";
const FORMAT_VERSION: u8 = 1;

fn check_finite(v: Complex64, what: &str) -> Result<()> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(())
    } else {
        Err(CoreError::Format(format!("non-finite entry in {what}")))
    }
}

impl HermitianMatrix {
    /// The zero matrix.
    pub fn zero(n: usize) -> Self {
        Self { n, rows: vec![Vec::new(); n], storage: Storage::Sparse }
    }

    /// Build from upper-triangle entries (i <= j). The lower triangle is
    /// filled in by conjugation; diagonal entries must be real. Duplicate
    /// positions and out-of-range indices are rejected.
    pub fn from_upper_triangle(
        n: usize,
        entries: &[(usize, usize, Complex64)],
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(u32, Complex64)>> = vec![Vec::new(); n];
        for &(i, j, v) in entries {
            if i > j {
                return Err(CoreError::Param(format!(
                    "upper-triangle entry has i > j: ({i}, {j})"
                )));
            }
            if j >= n {
                return Err(CoreError::Param(format!(
                    "entry ({i}, {j}) out of range for n = {n}"
                )));
            }
            check_finite(v, "matrix entry").map_err(|_| {
                CoreError::Param(format!("non-finite entry at ({i}, {j})"))
            })?;
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            if i == j {
                if v.im != 0.0 {
                    return Err(CoreError::Param(format!(
                        "diagonal entry at {i} must be real, got {v}"
                    )));
                }
                rows[i].push((j as u32, v));
            } else {
                rows[i].push((j as u32, v));
                rows[j].push((i as u32, v.conj()));
            }
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(c, _)| c);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(CoreError::Param(format!(
                        "duplicate entry in row {i} at column {}",
                        w[0].0
                    )));
                }
            }
        }
        Ok(Self { n, rows, storage: Storage::Sparse })
    }

    /// Build from a dense matrix, checking exact conjugate symmetry.
    pub fn from_dense(m: &DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CoreError::Dimension(format!(
                "expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = m[(i, j)];
                check_finite(v, "dense input")?;
                if m[(j, i)] != v.conj() {
                    return Err(CoreError::Param(format!(
                        "matrix is not Hermitian at ({i}, {j})"
                    )));
                }
                if v != Complex64::new(0.0, 0.0) {
                    entries.push((i, j, v));
                }
            }
        }
        let mut out = Self::from_upper_triangle(n, &entries)?;
        out.storage = Storage::Dense;
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn storage(&self) -> Storage {
        self.storage
    }

    pub fn set_storage(&mut self, storage: Storage) {
        self.storage = storage;
    }

    /// Entry (i, j); zero if not stored.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self.rows[i].binary_search_by_key(&(j as u32), |&(c, _)| c) {
            Ok(k) => self.rows[i][k].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Sorted nonzeros of row i as (column, value).
    pub fn row(&self, i: usize) -> &[(u32, Complex64)] {
        &self.rows[i]
    }

    /// Total stored nonzeros (both triangles).
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Maximum number of nonzeros in any row: the sparsity degree of the
    /// associated graph (diagonal loops count).
    pub fn sparsity_degree(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of nonzeros in row i.
    pub fn row_nnz(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    /// y = A x.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(j, v) in row {
                acc += v * x[j as usize];
            }
            y[i] = acc;
        }
    }

    /// A + B.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(CoreError::Dimension(format!(
                "cannot add {}x{0} and {1}x{1}",
                self.n, other.n
            )));
        }
        let mut entries = Vec::new();
        for i in 0..self.n {
            // Merge the two sorted upper-triangle slices of row i.
            for &(j, v) in &self.rows[i] {
                if j as usize >= i {
                    entries.push((i, j as usize, v));
                }
            }
            for &(j, v) in &other.rows[i] {
                if j as usize >= i {
                    entries.push((i, j as usize, v));
                }
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::new();
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        Self::from_upper_triangle(self.n, &merged)
    }

    /// w * A for a real weight.
    pub fn scale(&self, w: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.rows {
            for e in row.iter_mut() {
                e.1 *= w;
            }
            row.retain(|&(_, v)| v != Complex64::new(0.0, 0.0));
        }
        out
    }

    /// Dense copy.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j as usize)] = v;
            }
        }
        m
    }

    /// Gershgorin bound max_i sum_j |a_ij|: a certified upper bound on the
    /// operator norm of a Hermitian matrix.
    pub fn gershgorin_bound(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Power-iteration estimate of the operator norm. Always a lower bound on
    /// the true norm (each Rayleigh ratio is at most ||A||), converging to it
    /// for generic starts.
    pub fn power_iteration_norm(&self, iters: usize, seed: u64) -> f64 {
        if self.n == 0 || self.nnz() == 0 {
            return 0.0;
        }
        let mut rng = rng::rng_from(seed);
        let mut v: Vec<Complex64> = (0..self.n)
            .map(|_| {
                Complex64::new(
                    rng::uniform_f64(&mut rng) - 0.5,
                    rng::uniform_f64(&mut rng) - 0.5,
                )
            })
            .collect();
        let norm = |x: &[Complex64]| x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let mut scale = norm(&v);
        if scale == 0.0 {
            v[0] = Complex64::new(1.0, 0.0);
            scale = 1.0;
        }
        for e in v.iter_mut() {
            *e /= scale;
        }
        let mut w = vec![Complex64::new(0.0, 0.0); self.n];
        let mut estimate = 0.0;
        for _ in 0..iters {
            self.matvec(&v, &mut w);
            let wn = norm(&w);
            if wn == 0.0 {
                return 0.0;
            }
            estimate = wn;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / wn;
            }
        }
        estimate
    }

    /// Eigenvalues sorted ascending (dense Hermitian eigensolve).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.to_dense());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    /// (1/N) tr A^k by repeated matvec on basis vectors; exact up to rounding.
    pub fn normalized_trace_power(&self, k: u32) -> Complex64 {
        if k == 0 {
            return Complex64::new(1.0, 0.0);
        }
        let mut total = Complex64::new(0.0, 0.0);
        let mut x = vec![Complex64::new(0.0, 0.0); self.n];
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for i in 0..self.n {
            x.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
            x[i] = Complex64::new(1.0, 0.0);
            for _ in 0..k {
                self.matvec(&x, &mut y);
                std::mem::swap(&mut x, &mut y);
            }
            total += x[i];
        }
        total / self.n as f64
    }

    /// Conjugate by the permutation matrix V mapping e_i to e_{perm[i]}:
    /// returns V A V^{-1}, whose (perm[i], perm[j]) entry is A(i, j).
    pub fn permute_conjugate(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(CoreError::Dimension(format!(
                "permutation length {} does not match n = {}",
                perm.len(),
                self.n
            )));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || seen[p] {
                return Err(CoreError::Param(
                    "permutation is not a bijection on 0..n".into(),
                ));
            }
            seen[p] = true;
        }
        // Both orientations of every off-diagonal pair are stored, and exactly
        // one of them lands in the upper triangle after relabeling.
        let mut entries = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for &(j, v) in &self.rows[i] {
                let (pi, pj) = (perm[i], perm[j as usize]);
                if pi <= pj {
                    entries.push((pi, pj, v));
                }
            }
        }
        let mut out = Self::from_upper_triangle(self.n, &entries)?;
        out.storage = self.storage;
        Ok(out)
    }

    /// Write in the documented binary format.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&[FORMAT_VERSION])?;
        match self.storage {
            Storage::Dense => {
                f.write_all(&[0u8])?;
                f.write_all(&(self.n as u64).to_le_bytes())?;
                for i in 0..self.n {
                    let mut dense_row = vec![Complex64::new(0.0, 0.0); self.n];
                    for &(j, v) in &self.rows[i] {
                        dense_row[j as usize] = v;
                    }
                    for v in dense_row {
                        f.write_all(&v.re.to_le_bytes())?;
                        f.write_all(&v.im.to_le_bytes())?;
                    }
                }
            }
            Storage::Sparse => {
                f.write_all(&[1u8])?;
                f.write_all(&(self.n as u64).to_le_bytes())?;
                let mut upper = Vec::new();
                for i in 0..self.n {
                    for &(j, v) in &self.rows[i] {
                        if j as usize >= i {
                            upper.push((i as u64, j as u64, v));
                        }
                    }
                }
                f.write_all(&(upper.len() as u64).to_le_bytes())?;
                for (i, j, v) in upper {
                    f.write_all(&i.to_le_bytes())?;
                    f.write_all(&j.to_le_bytes())?;
                    f.write_all(&v.re.to_le_bytes())?;
                    f.write_all(&v.im.to_le_bytes())?;
                }
            }
        }
        f.flush()?;
        Ok(())
    }

    /// Read and validate the documented binary format.
    pub fn read_from(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        f.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CoreError::Format("bad magic; not a matrix file".into()));
        }
        let mut byte = [0u8; 1];
        f.read_exact(&mut byte)?;
        if byte[0] != FORMAT_VERSION {
            return Err(CoreError::Format(format!(
                "unsupported format version {}",
                byte[0]
            )));
        }
        f.read_exact(&mut byte)?;
        let storage = match byte[0] {
            0 => Storage::Dense,
            1 => Storage::Sparse,
            k => return Err(CoreError::Format(format!("unknown storage kind {k}"))),
        };
        let mut u64buf = [0u8; 8];
        f.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        if n > (1 << 24) {
            return Err(CoreError::Format(format!("implausible dimension {n}")));
        }
        let read_f64 = |f: &mut dyn Read| -> Result<f64> {
            let mut b = [0u8; 8];
            f.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let out = match storage {
            Storage::Dense => {
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let re = read_f64(&mut f)?;
                        let im = read_f64(&mut f)?;
                        m[(i, j)] = Complex64::new(re, im);
                    }
                }
                let mut h = Self::from_dense(&m)
                    .map_err(|e| CoreError::Format(format!("dense payload: {e}")))?;
                h.storage = Storage::Dense;
                h
            }
            Storage::Sparse => {
                f.read_exact(&mut u64buf)?;
                let count = u64::from_le_bytes(u64buf) as usize;
                let mut entries = Vec::with_capacity(count);
                let mut prev: Option<(u64, u64)> = None;
                for _ in 0..count {
                    f.read_exact(&mut u64buf)?;
                    let i = u64::from_le_bytes(u64buf);
                    f.read_exact(&mut u64buf)?;
                    let j = u64::from_le_bytes(u64buf);
                    let re = read_f64(&mut f)?;
                    let im = read_f64(&mut f)?;
                    if i > j || j >= n as u64 {
                        return Err(CoreError::Format(format!(
                            "sparse record ({i}, {j}) outside upper triangle of n = {n}"
                        )));
                    }
                    if let Some(p) = prev {
                        if (i, j) <= p {
                            return Err(CoreError::Format(
                                "sparse records not strictly increasing".into(),
                            ));
                        }
                    }
                    prev = Some((i, j));
                    entries.push((i as usize, j as usize, Complex64::new(re, im)));
                }
                Self::from_upper_triangle(n, &entries)
                    .map_err(|e| CoreError::Format(format!("sparse payload: {e}")))?
            }
        };
        // Reject trailing garbage.
        let mut rest = [0u8; 1];
        if f.read(&mut rest)? != 0 {
            return Err(CoreError::Format("trailing bytes after payload".into()));
        }
        Ok(out)
    }
}

/// General (not necessarily Hermitian) sparse complex matrix, stored by rows.
/// Used for polynomial word factors and as a scratch representation.
#[derive(Debug, Clone)]
pub struct SparseComplex {
    n: usize,
    rows: Vec<Vec<(u32, Complex64)>>,
}

impl SparseComplex {
    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "SparseComplex expects a square matrix");
        let mut rows: Vec<Vec<(u32, Complex64)>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != Complex64::new(0.0, 0.0) {
                    rows[i].push((j as u32, v));
                }
            }
        }
        Self { n, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(u32, Complex64)] {
        &self.rows[i]
    }

    /// Transpose (no conjugation); turns row access into column access.
    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(u32, Complex64)>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for &(j, v) in &self.rows[i] {
                rows[j as usize].push((i as u32, v));
            }
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
        }
        Self { n: self.n, rows }
    }

    /// Zero out the diagonal (in place); returns self for chaining.
    pub fn without_diagonal(mut self) -> Self {
        for (i, row) in self.rows.iter_mut().enumerate() {
            row.retain(|&(j, _)| j as usize != i);
        }
        self
    }
}
