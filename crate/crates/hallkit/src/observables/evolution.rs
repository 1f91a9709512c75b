use faer::Mat;

use crate::error::{invalid, Error, Result};
use crate::spectra::{EigenDecomposition, GroundMultiplet, LinearOp};
use crate::C64;

/// Largest |exponent| allowed in imaginary-time evolution.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Time {
    Real(f64),
    /// t = i s
    Imaginary(f64),
}

fn require_full(eig: &EigenDecomposition) -> Result<()> {
    if !eig.full {
        return invalid("a full eigendecomposition is required");
    }
    Ok(())
}

/// V† A V.
pub fn to_eigenbasis(a: &dyn LinearOp, eig: &EigenDecomposition) -> Result<Mat<C64>> {
    if a.dim() != eig.dim() {
        return invalid("operator and eigenbasis dimensions differ");
    }
    let av = a.apply_block(eig.vectors.as_ref());
    Ok(eig.vectors.adjoint() * av)
}

/// V M V†.
pub fn from_eigenbasis(m: &Mat<C64>, eig: &EigenDecomposition) -> Mat<C64> {
    &eig.vectors * m * eig.vectors.adjoint()
}

/// A(t) = e^{itH} A e^{-itH}, matrix elements A_mn e^{i(E_m - E_n)t} in the eigenbasis.
pub fn heisenberg(a: &dyn LinearOp, eig: &EigenDecomposition, t: Time) -> Result<Mat<C64>> {
    require_full(eig)?;
    let ae = to_eigenbasis(a, eig)?;
    let e = &eig.values;
    let n = e.len();
    let evolved = match t {
        Time::Real(t) => Mat::from_fn(n, n, |m, k| ae[(m, k)] * C64::from_polar(1.0, (e[m] - e[k]) * t)),
        Time::Imaginary(s) => {
            let mut worst: f64 = 0.0;
            for m in 0..n {
                for k in 0..n {
                    if ae[(m, k)].norm() > 0.0 {
                        worst = worst.max(-(e[m] - e[k]) * s);
                    }
                }
            }
            if worst > MAX_EXPONENT {
                return Err(Error::Resource(format!(
                    "imaginary-time evolution overflows: exponent {worst:.1} exceeds {MAX_EXPONENT}"
                )));
            }
            Mat::from_fn(n, n, |m, k| ae[(m, k)] * (-(e[m] - e[k]) * s).exp())
        }
    };
    Ok(from_eigenbasis(&evolved, eig))
}

/// Matrix elements <n|A|0m> for all n (rows) and multiplet members m (columns).
pub(crate) fn excitation_elements(a: &dyn LinearOp, eig: &EigenDecomposition, q: usize) -> Mat<C64> {
    let v0 = eig.vectors.subcols(0, q);
    let av0 = a.apply_block(v0);
    eig.vectors.adjoint() * av0
}

/// Matrix elements <0m|A|n>, stored with n as row.
pub(crate) fn deexcitation_elements(a: &dyn LinearOp, eig: &EigenDecomposition, q: usize) -> Mat<C64> {
    let v0 = eig.vectors.subcols(0, q);
    let adag_v0 = a.apply_adjoint_block(v0);
    let m = eig.vectors.adjoint() * adag_v0;
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

/// <<A;B>> = (1/q) Σ_m Σ_{n outside the multiplet} <0m|A|n><n|B|0m> / (E_0m - E_n)^2.
pub fn corr(a: &dyn LinearOp, b: &dyn LinearOp, m: &GroundMultiplet, eig: &EigenDecomposition) -> Result<C64> {
    require_full(eig)?;
    if m.gap <= 0.0 {
        return invalid("correlation needs a positive gap");
    }
    let q = m.q;
    let a0n = deexcitation_elements(a, eig, q);
    let bn0 = excitation_elements(b, eig, q);
    let e = &eig.values;
    let mut s = C64::new(0.0, 0.0);
    for mm in 0..q {
        for n in q..e.len() {
            let d = e[mm] - e[n];
            s += a0n[(n, mm)] * bn0[(n, mm)] / (d * d);
        }
    }
    Ok(s / q as f64)
}
