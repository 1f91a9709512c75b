use faer::Mat;
use serde::{Deserialize, Serialize};

use super::evolution::{heisenberg, Time};
use super::norm::spectral_norm;
use crate::error::{invalid, Error, Result};
use crate::spectra::EigenDecomposition;
use crate::C64;

/// Default trapezoid subintervals per unit time for the right-hand side.
pub const DEFAULT_STEPS_PER_UNIT: usize = 64;
/// Floor on the relative quadrature tolerance in the pointwise check.
pub const MIN_QUADRATURE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestrictedSample {
    pub t: f64,
    /// ||A_Λ(t) - A_Ω(t)||
    pub lhs: f64,
    /// ∫_0^t ||[H_Λ - H_Ω, A_Ω(t-s)]|| ds
    pub rhs: f64,
    /// relative error estimate of the trapezoid rule (step vs half step)
    pub quadrature_tol: f64,
    pub pass: bool,
}

fn commutator(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    a * b - b * a
}

/// Checks ||A_Λ(t) - A_Ω(t)|| <= ∫_0^t ||[H_Λ - H_Ω, A_Ω(t-s)]|| ds on a grid of t.
///
/// `a_support` and `omega` are site sets; the support must lie inside Ω.
/// Both Hamiltonians act on the same particle sector; `h_diff = H_Λ - H_Ω`.
#[allow(clippy::too_many_arguments)]
pub fn restricted_evolution_gap(
    a: &Mat<C64>,
    a_support: &[usize],
    omega: &[usize],
    eig_full: &EigenDecomposition,
    eig_omega: &EigenDecomposition,
    h_diff: &Mat<C64>,
    t_grid: &[f64],
    steps_per_unit: usize,
) -> Result<Vec<RestrictedSample>> {
    if let Some(s) = a_support.iter().find(|s| !omega.contains(s)) {
        return invalid(format!("observable support site {s} lies outside the restriction region"));
    }
    let integrand = |s: f64| -> Result<f64> {
        let aw = heisenberg(a, eig_omega, Time::Real(s))?;
        Ok(spectral_norm(&commutator(h_diff, &aw)))
    };
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if t < 0.0 {
            return invalid("time grid must be nonnegative");
        }
        let al = heisenberg(a, eig_full, Time::Real(t))?;
        let ao = heisenberg(a, eig_omega, Time::Real(t))?;
        let lhs = spectral_norm(&(&al - &ao));
        let m = ((t * steps_per_unit as f64).ceil() as usize).max(2).div_ceil(2) * 2;
        let (rhs, tol) = if t == 0.0 {
            (0.0, MIN_QUADRATURE_TOL)
        } else {
            let h = t / m as f64;
            let vals: Vec<f64> = (0..=m).map(|i| integrand(t - h * i as f64)).collect::<Result<_>>()?;
            let trap = |stride: usize| {
                let hh = h * stride as f64;
                let idx: Vec<usize> = (0..=m).step_by(stride).collect();
                let mut s = 0.0;
                for w in idx.windows(2) {
                    s += 0.5 * hh * (vals[w[0]] + vals[w[1]]);
                }
                s
            };
            let fine = trap(1);
            let coarse = trap(2);
            let est = if fine > 0.0 { (fine - coarse).abs() / (3.0 * fine) } else { 0.0 };
            (fine, est.max(MIN_QUADRATURE_TOL))
        };
        out.push(RestrictedSample {
            t,
            lhs,
            rhs,
            quadrature_tol: tol,
            pass: lhs <= rhs * (1.0 + tol) + 1e-12,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthSample {
    pub distance: f64,
    pub t: f64,
    pub norm: f64,
    /// 2||A|| ||B||
    pub bound: f64,
}

/// Lieb-Robinson envelope C e^{-μ d}(e^{vt} - 1) fitted to commutator norms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LrEnvelope {
    pub c: f64,
    pub mu: f64,
    pub v: f64,
    pub r_squared: f64,
    pub samples: Vec<GrowthSample>,
    pub fit_samples: usize,
}

/// Samples ||[A_Y(t), B_Z]|| for every pair (distance, A, B) and time, then fits
/// the envelope on the pre-saturation samples.
pub fn commutator_growth(
    pairs: &[(f64, Mat<C64>, Mat<C64>)],
    eig: &EigenDecomposition,
    t_grid: &[f64],
) -> Result<LrEnvelope> {
    let mut samples = Vec::new();
    for (d, a, b) in pairs {
        let bound = 2.0 * spectral_norm(a) * spectral_norm(b);
        for &t in t_grid {
            let at = heisenberg(a, eig, Time::Real(t))?;
            samples.push(GrowthSample {
                distance: *d,
                t,
                norm: spectral_norm(&commutator(&at, b)),
                bound,
            });
        }
    }
    fit_envelope(samples)
}

/// Pre-saturation: t > 0, norm above numerical noise and below half the trivial bound.
fn usable(s: &GrowthSample) -> bool {
    s.t > 0.0 && s.norm > 1e-12 && s.norm < 0.5 * s.bound
}

pub fn fit_envelope(samples: Vec<GrowthSample>) -> Result<LrEnvelope> {
    let fit: Vec<&GrowthSample> = samples.iter().filter(|s| usable(s)).collect();
    if fit.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "only {} usable commutator samples; at least 3 are needed",
            fit.len()
        )));
    }
    // For fixed v the model is linear in (log C, μ).
    let solve = |v: f64| -> (f64, f64, f64, f64) {
        let ys: Vec<f64> = fit.iter().map(|s| s.norm.ln() - (v * s.t).exp_m1().ln()).collect();
        let xs: Vec<f64> = fit.iter().map(|s| s.distance).collect();
        let n = ys.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let icpt = my - slope * mx;
        let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
        let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
        (icpt, -slope, sse, r2)
    };
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0, 0.0);
    for i in 0..=400 {
        let v = 10f64.powf(-2.0 + 4.0 * i as f64 / 400.0);
        let (logc, mu, sse, r2) = solve(v);
        if sse < best.0 {
            best = (sse, v, logc, mu, r2);
        }
    }
    let (_, v, mut logc, mu, r2) = best;
    // lift C so the envelope dominates every sample used in the fit
    let worst = fit
        .iter()
        .map(|s| s.norm.ln() - (logc + (v * s.t).exp_m1().ln() - mu * s.distance))
        .fold(f64::NEG_INFINITY, f64::max);
    if worst > 0.0 {
        logc += worst;
    }
    if !(mu > 0.0) {
        return Err(Error::Tolerance {
            check: "Lieb-Robinson fit gave a nonpositive decay rate".into(),
            value: mu,
            tolerance: 0.0,
        });
    }
    Ok(LrEnvelope {
        c: logc.exp(),
        mu,
        v,
        r_squared: r2,
        fit_samples: fit.len(),
        samples,
    })
}
