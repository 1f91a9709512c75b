use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectra::LinearOp;
use crate::C64;

/// Relative change at which the power iteration stops.
pub const NORM_TOL: f64 = 1e-8;
const NORM_MAX_ITER: usize = 20_000;
const NORM_SEED: u64 = 0x0A0B_0C0D;

/// Largest singular value by power iteration on A†A.
pub fn spectral_norm(a: &dyn LinearOp) -> f64 {
    let n = a.dim();
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
    let mut v = Mat::<C64>::from_fn(n, 1, |_, _| C64::new(1.0 + 0.1 * rng.gen::<f64>(), 0.1 * rng.gen::<f64>()));
    normalize(&mut v);
    let mut est = 0.0;
    for _ in 0..NORM_MAX_ITER {
        let av = a.apply_block(v.as_ref());
        let s = col_norm(&av);
        if s == 0.0 {
            // v may be in the kernel by accident; try a fresh direction once
            let mut w = Mat::<C64>::from_fn(n, 1, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            normalize(&mut w);
            if col_norm(&a.apply_block(w.as_ref())) == 0.0 {
                return 0.0;
            }
            v = w;
            continue;
        }
        let mut w = a.apply_adjoint_block(av.as_ref());
        let prev = est;
        est = s;
        normalize(&mut w);
        v = w;
        if (est - prev).abs() <= NORM_TOL * est {
            break;
        }
    }
    est
}

fn col_norm(m: &Mat<C64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, 0)].norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(m: &mut Mat<C64>) {
    let s = col_norm(m);
    if s > 0.0 {
        for i in 0..m.nrows() {
            m[(i, 0)] /= C64::new(s, 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manybody::SparseOperator;

    #[test]
    fn diagonal_norm() {
        let d = SparseOperator::diagonal(&[0.5, -3.0, 2.0]);
        assert!((spectral_norm(&d) - 3.0).abs() < 1e-7);
    }

    #[test]
    fn zero_norm() {
        assert_eq!(spectral_norm(&SparseOperator::zero(4)), 0.0);
    }
}
