use faer::{Mat, MatRef};

use crate::manybody::SparseOperator;
use crate::C64;

/// Anything that can act on a block of column vectors.
pub trait LinearOp: Sync {
    fn dim(&self) -> usize;
    fn apply_block(&self, x: MatRef<'_, C64>) -> Mat<C64>;
    fn apply_adjoint_block(&self, x: MatRef<'_, C64>) -> Mat<C64>;
}

impl LinearOp for SparseOperator {
    fn dim(&self) -> usize {
        SparseOperator::dim(self)
    }

    fn apply_block(&self, x: MatRef<'_, C64>) -> Mat<C64> {
        self.mul_dense(x)
    }

    fn apply_adjoint_block(&self, x: MatRef<'_, C64>) -> Mat<C64> {
        if self.is_hermitian() {
            self.mul_dense(x)
        } else {
            self.adjoint().mul_dense(x)
        }
    }
}

impl LinearOp for Mat<C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_block(&self, x: MatRef<'_, C64>) -> Mat<C64> {
        self * x
    }

    fn apply_adjoint_block(&self, x: MatRef<'_, C64>) -> Mat<C64> {
        self.adjoint() * x
    }
}

/// Column j as an owned vector.
pub fn column(m: MatRef<'_, C64>, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn column_matrix(v: &[C64]) -> Mat<C64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// Frobenius-style max entry of A - B.
pub fn max_abs_diff(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            d = d.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    d
}

/// Dense matrix representation of any operator (for small dimensions only).
pub fn to_dense(op: &dyn LinearOp) -> Mat<C64> {
    let n = op.dim();
    op.apply_block(Mat::<C64>::identity(n, n).as_ref())
}
