use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hall::kubo::GAP_FLOOR;
use crate::manybody::SparseOperator;
use crate::observables::currents::charge_current;
use crate::observables::evolution::excitation_elements;
use crate::observables::norm::spectral_norm;
use crate::spectra::{EigenDecomposition, GroundMultiplet};
use crate::C64;

/// ηT below this leaves the switch-on poorly separated from the adiabatic limit.
pub const ETA_T_WARNING: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeDomainParams {
    /// Adiabatic rate; 0 together with `t = ∞` gives the limiting value.
    pub eta: f64,
    /// Switch-on duration, possibly infinite.
    pub t: f64,
    /// Window half-width 𝒩 of the direction-1 current.
    pub window: usize,
    /// Half-width ℳ of the charged region.
    pub region: usize,
    /// Cut anchor (k, ℓ).
    pub anchor: [usize; 2],
}

impl TimeDomainParams {
    pub fn limit(window: usize, region: usize, anchor: [usize; 2]) -> Self {
        TimeDomainParams {
            eta: 0.0,
            t: f64::INFINITY,
            window,
            region,
            anchor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !(self.t > 0.0) {
            return invalid("need eta >= 0 and T > 0");
        }
        if self.eta == 0.0 && self.t.is_finite() {
            return invalid("eta = 0 is only meaningful with T = infinity");
        }
        Ok(())
    }

    pub fn warning(&self) -> Option<String> {
        (self.eta * self.t < ETA_T_WARNING).then(|| {
            format!(
                "eta*T = {:.3} < {ETA_T_WARNING}: the limit ordering is poorly approximated",
                self.eta * self.t
            )
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeDomainResult {
    pub params: TimeDomainParams,
    pub sigma: f64,
    /// Correction term at the given T.
    pub i_cor: [f64; 2],
    /// Correction term in the T → ∞ limit at the given η.
    pub i_cor_limit: [f64; 2],
    /// 2η/ΔE² ‖χ‖ ‖J_𝒩‖
    pub i_cor_bound: f64,
    pub delta_e: f64,
    pub norm_j_window: f64,
    pub norm_j_gamma: f64,
    pub norm_chi: f64,
    pub warning: Option<String>,
}

/// ∫_{-T}^0 s e^{as} ds, with the T → ∞ limit -1/a².
pub fn s_exp_integral(a: C64, t: f64) -> C64 {
    let inv = C64::new(1.0, 0.0) / a;
    if t.is_infinite() {
        return -inv * inv;
    }
    let decay = (-a * t).exp();
    -inv * inv + decay * (inv * t + inv * inv)
}

/// 2[((2ΔE+η)/ΔE⁴)η + ((1+TΔE)/ΔE²)e^{-ηT}] ‖J_𝒩‖ ‖J(Γ)‖
pub fn adiabatic_bound(delta_e: f64, eta: f64, t: f64, norm_jn: f64, norm_jg: f64) -> f64 {
    let d2 = delta_e * delta_e;
    let tail = if t.is_infinite() { 0.0 } else { (1.0 + t * delta_e) / d2 * (-eta * t).exp() };
    2.0 * ((2.0 * delta_e + eta) / (d2 * d2) * eta + tail) * norm_jn * norm_jg
}

/// σ̃₁₂(η,T,𝒩,ℳ) from the closed-form time integral, with J(Γ) = i[H, χ(Γ)]
/// and the Appendix-style correction I_cor.
pub fn time_domain(
    j_window: &SparseOperator,
    chi: &SparseOperator,
    h: &SparseOperator,
    params: &TimeDomainParams,
    m: &GroundMultiplet,
    eig: &EigenDecomposition,
) -> Result<TimeDomainResult> {
    params.validate()?;
    if !eig.full {
        return invalid("time-domain response needs the full spectrum");
    }
    if m.gap < GAP_FLOOR {
        return invalid(format!("gap {:.3e} below floor {GAP_FLOOR:.0e}", m.gap));
    }
    let j_gamma = charge_current(h, chi);
    let q = m.q;
    let e = &eig.values;
    let a1 = excitation_elements(j_window, eig, q);
    let a2 = excitation_elements(&j_gamma, eig, q);
    let c = excitation_elements(chi, eig, q);
    let (eta, t) = (params.eta, params.t);
    let mut sigma = C64::new(0.0, 0.0);
    let mut cor = C64::new(0.0, 0.0);
    let mut cor_lim = C64::new(0.0, 0.0);
    for mm in 0..q {
        for n in q..e.len() {
            let w = e[n] - e[mm];
            let fp = s_exp_integral(C64::new(eta, w), t);
            let fm = s_exp_integral(C64::new(eta, -w), t);
            sigma += a1[(n, mm)].conj() * a2[(n, mm)] * fp - a2[(n, mm)].conj() * a1[(n, mm)] * fm;
            let x = c[(n, mm)].conj() * a1[(n, mm)];
            cor += x * fm - (x * fm).conj();
            if eta > 0.0 {
                let fl = s_exp_integral(C64::new(eta, -w), f64::INFINITY);
                cor_lim += x * fl - (x * fl).conj();
            }
        }
    }
    let sigma = C64::new(0.0, 1.0) * sigma / q as f64;
    let cor = cor * eta / q as f64;
    let cor_lim = cor_lim * eta / q as f64;
    let norm_jn = spectral_norm(j_window);
    let norm_jg = spectral_norm(&j_gamma);
    let norm_chi = spectral_norm(chi);
    Ok(TimeDomainResult {
        params: *params,
        sigma: sigma.re,
        i_cor: [cor.re, cor.im],
        i_cor_limit: [cor_lim.re, cor_lim.im],
        i_cor_bound: 2.0 * eta / (m.gap * m.gap) * norm_chi * norm_jn,
        delta_e: m.gap,
        norm_j_window: norm_jn,
        norm_j_gamma: norm_jg,
        norm_chi,
        warning: if eta == 0.0 { None } else { params.warning() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(a: C64, t: f64, n: usize) -> C64 {
        let h = t / n as f64;
        let f = |s: f64| (a * s).exp() * s;
        let mut acc = f(-t) + f(0.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += f(-t + h * i as f64) * w;
        }
        acc * h / 3.0
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for &(re, im, t) in &[(0.1, 1.3, 50.0), (0.05, -0.7, 20.0), (1.0, 0.0, 5.0)] {
            let a = C64::new(re, im);
            let exact = s_exp_integral(a, t);
            let num = simpson(a, t, 200_000);
            assert!((exact - num).norm() < 1e-8, "{exact} vs {num}");
        }
    }

    #[test]
    fn infinite_limit_is_inverse_square() {
        let a = C64::new(0.0, 2.0);
        assert!((s_exp_integral(a, f64::INFINITY) - C64::new(0.25, 0.0)).norm() < 1e-15);
        let b = C64::new(0.3, 1.0);
        assert!((s_exp_integral(b, 400.0) - s_exp_integral(b, f64::INFINITY)).norm() < 1e-12);
    }
}
