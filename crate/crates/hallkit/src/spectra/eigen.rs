use faer::{Mat, MatRef, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::manybody::SparseOperator;
use crate::C64;

/// Start-vector seed of the Krylov solver.
pub const KRYLOV_SEED: u64 = 0x48A1_1C0D_E5EE_D001;

/// Largest dimension for which a full dense solve is attempted.
pub const DEFAULT_DENSE_THRESHOLD: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenMode {
    Full,
    Lowest(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    pub dense_threshold: usize,
    /// Krylov convergence: residual <= tol * (row-sum bound of H).
    pub tol: f64,
    pub max_restarts: usize,
    /// Block size beyond the requested count, so degenerate clusters are caught.
    pub extra_block: usize,
    /// Krylov basis size is `basis_blocks` blocks, at least `min_basis` vectors.
    pub basis_blocks: usize,
    /// Ritz blocks kept at a thick restart.
    pub keep_blocks: usize,
    pub min_basis: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            tol: 1e-10,
            max_restarts: 400,
            extra_block: 1,
            basis_blocks: 20,
            keep_blocks: 4,
            min_basis: 40,
            seed: KRYLOV_SEED,
        }
    }
}

/// Ascending eigenvalues with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Mat<C64>,
    pub full: bool,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// max_i ||H v_i - λ_i v_i||.
    pub fn max_residual(&self, h: &SparseOperator) -> f64 {
        let hv = h.mul_dense(self.vectors.as_ref());
        let mut worst: f64 = 0.0;
        for j in 0..self.count() {
            let mut r = 0.0;
            for i in 0..self.dim() {
                r += (hv[(i, j)] - self.vectors[(i, j)] * self.values[j]).norm_sqr();
            }
            worst = worst.max(r.sqrt());
        }
        worst
    }

    /// max |V†V - I|.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.adjoint() * &self.vectors;
        let mut e: f64 = 0.0;
        for j in 0..g.ncols() {
            for i in 0..g.nrows() {
                let id = if i == j { 1.0 } else { 0.0 };
                e = e.max((g[(i, j)] - C64::new(id, 0.0)).norm());
            }
        }
        e
    }

    pub fn truncate(&self, m: usize) -> EigenDecomposition {
        let m = m.min(self.count());
        EigenDecomposition {
            values: self.values[..m].to_vec(),
            vectors: self.vectors.subcols(0, m).to_owned(),
            full: self.full && m == self.count(),
        }
    }
}

/// All eigenpairs of a dense Hermitian matrix, ascending.
pub fn dense_eigh(a: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NonConvergence {
            iterations: 0,
            residual: f64::NAN,
        })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].re.total_cmp(&s[j].re));
    let values = order.iter().map(|&i| s[i].re).collect();
    let vectors = Mat::from_fn(n, n, |r, c| u[(r, order[c])]);
    Ok((values, vectors))
}

pub fn eigensolve(h: &SparseOperator, mode: EigenMode, opts: &SolverOptions) -> Result<EigenDecomposition> {
    eigensolve_from(h, mode, opts, None)
}

/// Like [`eigensolve`], optionally seeding the Krylov block with given vectors.
pub fn eigensolve_from(
    h: &SparseOperator,
    mode: EigenMode,
    opts: &SolverOptions,
    start: Option<MatRef<'_, C64>>,
) -> Result<EigenDecomposition> {
    if !h.is_hermitian() {
        return invalid("eigensolve needs an operator flagged Hermitian");
    }
    let n = h.dim();
    match mode {
        EigenMode::Full => {
            if n > opts.dense_threshold {
                return Err(Error::Resource(format!(
                    "full spectrum of dimension {n} exceeds dense_threshold {}",
                    opts.dense_threshold
                )));
            }
            let (values, vectors) = dense_eigh(h.to_dense().as_ref())?;
            Ok(EigenDecomposition {
                values,
                vectors,
                full: true,
            })
        }
        EigenMode::Lowest(m) => {
            if m == 0 || m > n {
                return invalid(format!("cannot request {m} eigenpairs of a dimension-{n} operator"));
            }
            krylov_lowest(h, m, opts, start)
        }
    }
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, b: usize) -> Mat<C64> {
    Mat::from_fn(n, b, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

/// Orthonormalizes the columns of `w` against `q` and among themselves.
/// Columns that collapse are replaced with fresh random directions.
fn orthonormalize_block(q: MatRef<'_, C64>, w: &mut Mat<C64>, rng: &mut ChaCha8Rng) -> Result<()> {
    let n = w.nrows();
    let mut before: Vec<f64> = (0..w.ncols()).map(|j| col_norm(w.as_ref(), j)).collect();
    project_out(q, w);
    for j in 0..w.ncols() {
        let mut attempts = 0;
        loop {
            for _ in 0..2 {
                for p in 0..j {
                    let mut d = C64::new(0.0, 0.0);
                    for i in 0..n {
                        d += w[(i, p)].conj() * w[(i, j)];
                    }
                    for i in 0..n {
                        let wp = w[(i, p)];
                        w[(i, j)] -= d * wp;
                    }
                }
            }
            let after = col_norm(w.as_ref(), j);
            if after > 1e-8 * before[j] && after > 0.0 {
                for i in 0..n {
                    w[(i, j)] /= C64::new(after, 0.0);
                }
                break;
            }
            attempts += 1;
            if attempts > 8 || q.ncols() + j + 1 > n {
                return Err(Error::NonConvergence {
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
            let mut fresh = random_block(rng, n, 1);
            before[j] = col_norm(fresh.as_ref(), 0);
            project_out(q, &mut fresh);
            for i in 0..n {
                w[(i, j)] = fresh[(i, 0)];
            }
        }
    }
    Ok(())
}

/// Two rounds of block Gram-Schmidt against the columns of `q`.
fn project_out(q: MatRef<'_, C64>, w: &mut Mat<C64>) {
    if q.ncols() == 0 {
        return;
    }
    for _ in 0..2 {
        let c = q.adjoint() * w.as_ref();
        *w -= q * &c;
    }
}

fn col_norm(m: MatRef<'_, C64>, j: usize) -> f64 {
    (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt()
}

/// Block Lanczos with full reorthogonalization, explicit Rayleigh-Ritz and
/// restart from the current Ritz block.
fn krylov_lowest(
    h: &SparseOperator,
    m: usize,
    opts: &SolverOptions,
    start: Option<MatRef<'_, C64>>,
) -> Result<EigenDecomposition> {
    let n = h.dim();
    let b = (m + opts.extra_block).min(n);
    let max_basis = (opts.basis_blocks * b).max(opts.min_basis).min(n);
    if max_basis >= n || n <= 2 * b {
        // The Krylov space would be the whole space: Rayleigh-Ritz on it is the
        // dense solve.
        let (values, vectors) = dense_eigh(h.to_dense().as_ref())?;
        return Ok(EigenDecomposition {
            values: values[..m].to_vec(),
            vectors: vectors.subcols(0, m).to_owned(),
            full: m == n,
        });
    }
    let scale = h.norm_bound().max(f64::MIN_POSITIVE);
    let target = opts.tol * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = random_block(&mut rng, n, b);
    if let Some(s) = start {
        let c = s.ncols().min(b);
        for j in 0..c {
            for i in 0..n {
                // small random admixture keeps the block full rank
                x[(i, j)] = s[(i, j)] + x[(i, j)] * 1e-3;
            }
        }
    }
    let empty = Mat::<C64>::zeros(n, 0);
    orthonormalize_block(empty.as_ref(), &mut x, &mut rng)?;

    let kmax = (max_basis / b) * b;
    // thick restart: the lowest `keep` Ritz vectors seed the next cycle
    let keep = (opts.keep_blocks * b).clamp(b, kmax - b);
    let mut q = Mat::<C64>::zeros(n, kmax);
    let mut hq = Mat::<C64>::zeros(n, kmax);
    // projected matrix Q†HQ, grown one block at a time
    let mut t = Mat::<C64>::zeros(kmax, kmax);
    q.subcols_mut(0, b).copy_from(&x);
    let hx = h.mul_dense(x.as_ref());
    hq.subcols_mut(0, b).copy_from(&hx);
    let t0 = x.adjoint() * &hx;
    t.submatrix_mut(0, 0, b, b).copy_from(&t0);
    let mut k = b;
    // next expansion block: H x on the first cycle, Ritz residuals afterwards
    let mut w = hx;
    let mut last_res = f64::INFINITY;
    for _ in 0..opts.max_restarts {
        while k + b <= kmax {
            orthonormalize_block(q.subcols(0, k), &mut w, &mut rng)?;
            let hw = h.mul_dense(w.as_ref());
            q.subcols_mut(k, b).copy_from(&w);
            hq.subcols_mut(k, b).copy_from(&hw);
            let col = q.subcols(0, k + b).adjoint() * &hw;
            for j in 0..b {
                for i in 0..k + b {
                    t[(i, k + j)] = col[(i, j)];
                    t[(k + j, i)] = col[(i, j)].conj();
                }
            }
            w = hw;
            k += b;
        }
        let tk = Mat::from_fn(k, k, |i, j| (t[(i, j)] + t[(j, i)].conj()) * 0.5);
        let (theta, y) = dense_eigh(tk.as_ref())?;
        let yk = y.subcols(0, keep);
        let ritz = q.subcols(0, k) * yk;
        let hritz = hq.subcols(0, k) * yk;
        let resid = Mat::from_fn(n, b, |i, j| hritz[(i, j)] - ritz[(i, j)] * theta[j]);
        let mut worst: f64 = 0.0;
        for j in 0..m {
            worst = worst.max(col_norm(resid.as_ref(), j));
        }
        last_res = worst;
        if worst <= target {
            return Ok(EigenDecomposition {
                values: theta[..m].to_vec(),
                vectors: ritz.subcols(0, m).to_owned(),
                full: false,
            });
        }
        q.subcols_mut(0, keep).copy_from(&ritz);
        hq.subcols_mut(0, keep).copy_from(&hritz);
        for j in 0..keep {
            for i in 0..keep {
                t[(i, j)] = if i == j { C64::new(theta[i], 0.0) } else { C64::new(0.0, 0.0) };
            }
        }
        k = keep;
        w = resid;
    }
    Err(Error::NonConvergence {
        iterations: opts.max_restarts,
        residual: last_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_x() {
        let h = SparseOperator::from_triplets(
            2,
            vec![(0, 1, C64::new(1.0, 0.0)), (1, 0, C64::new(1.0, 0.0))],
            true,
        )
        .unwrap();
        let e = eigensolve(&h, EigenMode::Full, &SolverOptions::default()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_sorted() {
        let d = [3.0, -1.0, 2.0, 0.5];
        let h = SparseOperator::diagonal(&d);
        let e = eigensolve(&h, EigenMode::Full, &SolverOptions::default()).unwrap();
        assert_eq!(e.values, vec![-1.0, 0.5, 2.0, 3.0]);
    }

    #[test]
    fn refuses_large_full() {
        let h = SparseOperator::identity(10);
        let opts = SolverOptions {
            dense_threshold: 5,
            ..Default::default()
        };
        assert!(matches!(
            eigensolve(&h, EigenMode::Full, &opts),
            Err(Error::Resource(_))
        ));
    }
}
