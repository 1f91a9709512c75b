use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::evolution::{from_eigenbasis, to_eigenbasis};
use super::norm::spectral_norm;
use crate::error::{invalid, Error, Result};
use crate::manybody::SparseOperator;
use crate::spectra::{EigenDecomposition, GroundMultiplet, LinearOp};
use crate::C64;

pub const DEFAULT_QUADRATURE_POINTS: usize = 400;
/// Allowed Richardson error of the time quadrature, relative to max |a0_nm|.
pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-6;
/// Denominators of the excitation ratio below this are treated as zero.
pub const EXCITATION_FLOOR: f64 = 1e-14;

/// Gaussian energy filter of a local observable a0.
#[derive(Clone, Debug)]
pub struct FilterSpec {
    pub a0: Mat<C64>,
    /// Sites a0 acts on; must be a strict subset of the lattice.
    pub support: Vec<usize>,
    pub n_sites: usize,
    pub k: f64,
    /// ΔẼ + κ̃
    pub center: f64,
    pub t1: Option<f64>,
    pub quadrature_points: usize,
    pub quadrature_tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub t1: f64,
    /// ||ã0 - a(T1)||
    pub deviation: f64,
    /// ||a0|| e^{-T1²/2K}
    pub bound: f64,
    pub quadrature_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct FilterResult {
    /// ã0 in the original basis.
    pub filtered: Mat<C64>,
    /// a(T1) in the original basis, when T1 was given.
    pub truncated: Option<Mat<C64>>,
    pub check: Option<TruncationCheck>,
    /// max over (n,m) of |ã0_nm| - |a0_nm| (never positive).
    pub max_suppression_excess: f64,
}

impl FilterSpec {
    fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return invalid("filter width K must be positive");
        }
        if self.support.len() >= self.n_sites {
            return invalid("filter observable support must be a strict subset of the lattice");
        }
        if let Some(t1) = self.t1 {
            if !(t1 > 0.0) {
                return invalid("time cutoff T1 must be positive");
            }
        }
        if self.quadrature_points < 4 {
            return invalid("quadrature needs at least 4 points");
        }
        Ok(())
    }
}

/// ã0 in spectral form, (a0)_nm exp[-K(E_n - E_m - c)²/2].
///
/// With T1 the truncated time integral over [-T1, T1] is evaluated by Simpson
/// quadrature in the eigenbasis of `h_omega` (the restricted Hamiltonian, or the
/// full one when `None`) and compared with ã0.
pub fn energy_filter(
    fs: &FilterSpec,
    eig: &EigenDecomposition,
    h_omega: Option<&EigenDecomposition>,
) -> Result<FilterResult> {
    fs.validate()?;
    if !eig.full {
        return invalid("energy filter needs a full eigendecomposition");
    }
    let a0e = to_eigenbasis(&fs.a0, eig)?;
    let e = &eig.values;
    let n = e.len();
    let mut excess = f64::NEG_INFINITY;
    let fe = Mat::from_fn(n, n, |i, j| {
        let nu = e[i] - e[j] - fs.center;
        a0e[(i, j)] * (-fs.k * nu * nu / 2.0).exp()
    });
    for j in 0..n {
        for i in 0..n {
            excess = excess.max(fe[(i, j)].norm() - a0e[(i, j)].norm());
        }
    }
    let filtered = from_eigenbasis(&fe, eig);
    let (truncated, check) = match fs.t1 {
        None => (None, None),
        Some(t1) => {
            let ev = h_omega.unwrap_or(eig);
            if !ev.full || ev.dim() != eig.dim() {
                return invalid("restricted Hamiltonian needs a full decomposition on the same sector");
            }
            let ao = to_eigenbasis(&fs.a0, ev)?;
            let w = &ev.values;
            let scale = ao.norm_max().max(f64::MIN_POSITIVE);
            let mut qerr: f64 = 0.0;
            let mut te = Mat::<C64>::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    if ao[(i, j)].norm() == 0.0 {
                        continue;
                    }
                    let nu = w[i] - w[j] - fs.center;
                    let (fine, coarse) = gaussian_window_integral(nu, fs.k, t1, fs.quadrature_points);
                    qerr = qerr.max((fine - coarse).norm() / 15.0 * ao[(i, j)].norm() / scale);
                    te[(i, j)] = ao[(i, j)] * fine;
                }
            }
            if qerr > fs.quadrature_tol {
                return Err(Error::Tolerance {
                    check: format!(
                        "filter quadrature with {} points is too coarse",
                        fs.quadrature_points
                    ),
                    value: qerr,
                    tolerance: fs.quadrature_tol,
                });
            }
            let truncated = from_eigenbasis(&te, ev);
            let diff = &filtered - &truncated;
            let deviation = spectral_norm(&diff);
            let bound = spectral_norm(&fs.a0) * (-t1 * t1 / (2.0 * fs.k)).exp();
            let check = TruncationCheck {
                t1,
                deviation,
                bound,
                quadrature_error: qerr,
                pass: deviation <= bound,
            };
            (Some(truncated), Some(check))
        }
    };
    Ok(FilterResult {
        filtered,
        truncated,
        check,
        max_suppression_excess: excess,
    })
}

/// (1/√(2πK)) ∫_{-T1}^{T1} e^{iνt} e^{-t²/2K} dt by composite Simpson with
/// `points` intervals (rounded up to even), plus the half-resolution value.
fn gaussian_window_integral(nu: f64, k: f64, t1: f64, points: usize) -> (C64, C64) {
    let simpson = |m: usize| {
        let h = 2.0 * t1 / m as f64;
        let mut s = C64::new(0.0, 0.0);
        for i in 0..=m {
            let t = -t1 + h * i as f64;
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += C64::from_polar(w * (-t * t / (2.0 * k)).exp(), nu * t);
        }
        s * (h / 3.0) / (2.0 * PI * k).sqrt()
    };
    let m = points.div_ceil(4) * 4;
    (simpson(m), simpson(m / 2))
}

/// ω0(a†(1-P)[H,a]) / ω0(a†(1-P)a).
pub fn excitation_ratio(a: &dyn LinearOp, h: &SparseOperator, m: &GroundMultiplet) -> Result<f64> {
    if a.dim() != m.dim() || h.dim() != m.dim() {
        return invalid("dimensions differ");
    }
    let v0 = m.frame.as_ref();
    let av = a.apply_block(v0);
    let hv0 = h.mul_dense(v0);
    let a_hv0 = a.apply_block(hv0.as_ref());
    let h_av = h.mul_dense(av.as_ref());
    let comm = &h_av - &a_hv0;
    // (1-P) a|0m>
    let proj = v0.adjoint() * &av;
    let w = &av - v0 * &proj;
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for j in 0..m.q {
        for i in 0..m.dim() {
            num += w[(i, j)].conj() * comm[(i, j)];
            den += w[(i, j)].norm_sqr();
        }
    }
    let den = den / m.q as f64;
    let num = num / m.q as f64;
    if den < EXCITATION_FLOOR {
        return invalid("perturbation creates no excitation (vanishing denominator)");
    }
    Ok(num.re / den)
}
