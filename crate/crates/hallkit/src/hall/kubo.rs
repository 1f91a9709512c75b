use crate::error::{invalid, Error, Result};
use crate::observables::evolution::{deexcitation_elements, excitation_elements};
use crate::spectra::{EigenDecomposition, GroundMultiplet, LinearOp};
use crate::C64;

/// Largest imaginary part tolerated in a sum that must be real.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-10;
/// Gaps below this make every inverse-gap-squared sum meaningless.
pub const GAP_FLOOR: f64 = 1e-10;

/// (i/q) Σ_m Σ_{n outside the multiplet}
///   [<0m|J1|n><n|J2|0m> - <0m|J2|n><n|J1|0m>] / (E_0m - E_n)².
pub fn kubo_sum(
    j1: &dyn LinearOp,
    j2: &dyn LinearOp,
    m: &GroundMultiplet,
    eig: &EigenDecomposition,
) -> Result<f64> {
    let z = kubo_sum_complex(j1, j2, m, eig)?;
    let scale = z.norm().max(1.0);
    if z.im.abs() > IMAGINARY_RESIDUE_TOL * scale {
        return Err(Error::Tolerance {
            check: "imaginary residue of the Kubo sum".into(),
            value: z.im.abs(),
            tolerance: IMAGINARY_RESIDUE_TOL * scale,
        });
    }
    Ok(z.re)
}

/// The same sum without the reality check; real only for Hermitian currents.
pub fn kubo_sum_complex(
    j1: &dyn LinearOp,
    j2: &dyn LinearOp,
    m: &GroundMultiplet,
    eig: &EigenDecomposition,
) -> Result<C64> {
    if !eig.full {
        return invalid("the Kubo sum needs the full spectrum");
    }
    if m.gap < GAP_FLOOR {
        return invalid(format!("gap {:.3e} below floor {GAP_FLOOR:.0e}", m.gap));
    }
    if j1.dim() != eig.dim() || j2.dim() != eig.dim() {
        return invalid("current and spectrum dimensions differ");
    }
    let q = m.q;
    let e = &eig.values;
    let a1 = excitation_elements(j1, eig, q);
    let a2 = excitation_elements(j2, eig, q);
    let b1 = deexcitation_elements(j1, eig, q);
    let b2 = deexcitation_elements(j2, eig, q);
    let mut s = C64::new(0.0, 0.0);
    for mm in 0..q {
        for n in q..e.len() {
            let d = e[mm] - e[n];
            s += (b1[(n, mm)] * a2[(n, mm)] - b2[(n, mm)] * a1[(n, mm)]) / (d * d);
        }
    }
    Ok(C64::new(0.0, 1.0) * s / q as f64)
}
