use faer::Mat;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::C64;

/// Entries below this magnitude are dropped at construction.
pub const ZERO_DROP: f64 = 1e-15;
/// Allowed max |A - A†| entry for operators flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Rows above this count are processed in parallel.
const PAR_ROWS: usize = 8192;

/// Sector-restricted operator in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    /// Builds from unordered triplets; duplicates are summed.
    ///
    /// With `hermitian = true` the result is checked against [`HERMITIAN_TOL`].
    pub fn from_triplets(
        dim: usize,
        mut triplets: Vec<(usize, usize, C64)>,
        hermitian: bool,
    ) -> Result<Self> {
        if dim > u32::MAX as usize {
            return Err(Error::Resource(format!("dimension {dim} too large")));
        }
        for &(r, c, _) in &triplets {
            if r >= dim || c >= dim {
                return invalid(format!("entry ({r},{c}) outside dimension {dim}"));
            }
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c as u32 {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c as u32);
            vals.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut k_cols = Vec::with_capacity(cols.len());
        let mut k_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v.norm() >= ZERO_DROP {
                keep_rows.push(r);
                k_cols.push(c);
                k_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let op = SparseOperator {
            dim,
            row_ptr,
            cols: k_cols,
            vals: k_vals,
            hermitian: false,
        };
        if hermitian {
            op.into_hermitian()
        } else {
            Ok(op)
        }
    }

    /// Rows given in order, each a list of (column, value) with distinct columns.
    pub(crate) fn from_rows(dim: usize, rows: Vec<Vec<(u32, C64)>>, hermitian: bool) -> Result<Self> {
        debug_assert_eq!(rows.len(), dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if v.norm() >= ZERO_DROP {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let op = SparseOperator {
            dim,
            row_ptr,
            cols,
            vals,
            hermitian: false,
        };
        if hermitian {
            op.into_hermitian()
        } else {
            Ok(op)
        }
    }

    pub fn zero(dim: usize) -> Self {
        SparseOperator {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let t = d
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, C64::new(v, 0.0)))
            .collect();
        Self::from_triplets(d.len(), t, false)
            .expect("diagonal entries are in range")
            .mark_hermitian_unchecked()
    }

    fn mark_hermitian_unchecked(mut self) -> Self {
        self.hermitian = true;
        self
    }

    /// Checks Hermiticity and sets the flag.
    pub fn into_hermitian(mut self) -> Result<Self> {
        let dev = self.hermiticity_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: HERMITIAN_TOL,
            });
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b]
            .iter()
            .zip(&self.vals[a..b])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.cols[a..b].binary_search(&(c as u32)) {
            Ok(k) => self.vals[a + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn adjoint(&self) -> SparseOperator {
        if self.hermitian {
            return self.clone();
        }
        let t = self.entries().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, t, false).expect("transpose keeps indices in range")
    }

    /// max |A - A†| over entries.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for (r, c, v) in self.entries() {
            dev = dev.max((v - self.get(c, r).conj()).norm());
        }
        dev
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Upper bound on the spectral norm (max absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> SparseOperator {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= s;
        }
        out.hermitian = self.hermitian && s.im == 0.0;
        out
    }

    /// a·A + b·B.
    pub fn lin_comb(a: C64, x: &SparseOperator, b: C64, y: &SparseOperator) -> Result<SparseOperator> {
        if x.dim != y.dim {
            return invalid("operator dimensions differ");
        }
        let t = x
            .entries()
            .map(|(r, c, v)| (r, c, a * v))
            .chain(y.entries().map(|(r, c, v)| (r, c, b * v)))
            .collect();
        let herm = x.hermitian && y.hermitian && a.im == 0.0 && b.im == 0.0;
        let mut out = Self::from_triplets(x.dim, t, false)?;
        out.hermitian = herm;
        Ok(out)
    }

    pub fn add(&self, other: &SparseOperator) -> Result<SparseOperator> {
        Self::lin_comb(C64::new(1.0, 0.0), self, C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &SparseOperator) -> Result<SparseOperator> {
        Self::lin_comb(C64::new(1.0, 0.0), self, C64::new(-1.0, 0.0), other)
    }

    /// Entrywise map A_ab -> f(a, b) A_ab, keeping the sparsity pattern.
    pub fn map_entries(&self, f: impl Fn(usize, usize, C64) -> C64) -> SparseOperator {
        let mut out = self.clone();
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.vals[k] = f(r, self.cols[k] as usize, self.vals[k]);
            }
        }
        out.hermitian = false;
        out
    }

    /// i[A, D] for diagonal D = diag(d). Hermitian when A is.
    pub fn i_commutator_with_diagonal(&self, d: &[f64]) -> SparseOperator {
        let mut out = self.map_entries(|r, c, v| C64::new(0.0, 1.0) * v * (d[c] - d[r]));
        out.hermitian = self.hermitian;
        out.prune()
    }

    /// e^{-iF} A e^{iF} with F = diag(f).
    pub fn conjugate_by_phases(&self, f: &[f64]) -> SparseOperator {
        let mut out = self.map_entries(|r, c, v| v * C64::from_polar(1.0, -(f[r] - f[c])));
        out.hermitian = self.hermitian;
        out
    }

    fn prune(self) -> SparseOperator {
        let herm = self.hermitian;
        let t: Vec<_> = self.entries().collect();
        let mut out = Self::from_triplets(self.dim, t, false).expect("indices in range");
        out.hermitian = herm;
        out
    }

    /// y = A x.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        let row = |r: usize| {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            acc
        };
        if self.dim >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, yr)| *yr = row(r));
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = row(r);
            }
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.matvec(x, &mut y);
        y
    }

    /// A X for a dense block of columns.
    pub fn mul_dense(&self, x: faer::MatRef<'_, C64>) -> Mat<C64> {
        assert_eq!(x.nrows(), self.dim);
        let mut out = Mat::<C64>::zeros(self.dim, x.ncols());
        let mut buf_in = vec![C64::new(0.0, 0.0); self.dim];
        let mut buf_out = vec![C64::new(0.0, 0.0); self.dim];
        for j in 0..x.ncols() {
            for i in 0..self.dim {
                buf_in[i] = x[(i, j)];
            }
            self.matvec(&buf_in, &mut buf_out);
            for i in 0..self.dim {
                out[(i, j)] = buf_out[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn diagonal_entries(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> C64 {
        self.diagonal_entries().into_iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let op = SparseOperator::from_triplets(
            2,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(-1.0, 0.0)), (1, 0, c(2.0, 0.0))],
            false,
        )
        .unwrap();
        assert_eq!(op.nnz(), 1);
        assert_eq!(op.get(1, 0), c(2.0, 0.0));
    }

    #[test]
    fn hermitian_check_rejects() {
        let bad = SparseOperator::from_triplets(2, vec![(0, 1, c(1.0, 0.0))], true);
        assert!(matches!(bad, Err(Error::NotHermitian { .. })));
        let good = SparseOperator::from_triplets(
            2,
            vec![(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0))],
            true,
        );
        assert!(good.is_ok());
    }

    #[test]
    fn commutator_with_diagonal_matches_dense() {
        let a = SparseOperator::from_triplets(
            3,
            vec![(0, 1, c(1.0, 0.5)), (1, 0, c(1.0, -0.5)), (2, 2, c(3.0, 0.0))],
            true,
        )
        .unwrap();
        let d = [0.0, 1.0, 2.0];
        let com = a.i_commutator_with_diagonal(&d).to_dense();
        let ad = a.to_dense();
        let dd = SparseOperator::diagonal(&d).to_dense();
        let direct = (&ad * &dd - &dd * &ad) * faer::Scale(c(0.0, 1.0));
        assert!((&com - &direct).norm_max() < 1e-15);
    }
}
