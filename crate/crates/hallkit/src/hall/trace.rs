use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectra::GroundMultiplet;
use crate::C64;

/// Default central-difference step for projector derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceResult {
    pub sigma: f64,
    pub q: usize,
    pub h: f64,
    /// Tr P at the centre and the four stencil points.
    pub stencil_traces: Vec<f64>,
}

fn overlap(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    a.adjoint() * b
}

fn trace(m: &Mat<C64>) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

fn frame_trace(f: &Mat<C64>) -> f64 {
    let mut t = 0.0;
    for j in 0..f.ncols() {
        for i in 0..f.nrows() {
            t += f[(i, j)].norm_sqr();
        }
    }
    t
}

/// (i/q) Tr P0 [∂1 P0, ∂2 P0] with central differences of step `h`.
///
/// Only the low-rank frames are used: Tr(P_0 P_a P_b) = Tr(G_0a G_ab G_b0) with
/// G_xy = V_x† V_y.
pub fn projector_trace(
    family: &(dyn Fn([f64; 2]) -> Result<GroundMultiplet> + Sync),
    phi: [f64; 2],
    h: f64,
) -> Result<TraceResult> {
    if !(h > 0.0) {
        return invalid("finite-difference step must be positive");
    }
    let pts = [
        phi,
        [phi[0] + h, phi[1]],
        [phi[0] - h, phi[1]],
        [phi[0], phi[1] + h],
        [phi[0], phi[1] - h],
    ];
    let ms: Vec<GroundMultiplet> = pts.iter().map(|&p| family(p)).collect::<Result<_>>()?;
    let q = ms[0].q;
    if let Some(bad) = ms.iter().find(|m| m.q != q) {
        return Err(Error::NoGappedMultiplet(format!(
            "multiplet count changes across the stencil at phi = ({:.6}, {:.6}): {} vs {}",
            phi[0], phi[1], q, bad.q
        )));
    }
    let v: Vec<MatRef<'_, C64>> = ms.iter().map(|m| m.frame.as_ref()).collect();
    let t = |a: usize, b: usize| -> C64 {
        let g0a = overlap(v[0], v[a]);
        let gab = overlap(v[a], v[b]);
        let gb0 = overlap(v[b], v[0]);
        trace(&(&g0a * &gab * &gb0))
    };
    // P_1 ≈ (P(1+) - P(1-))/2h and likewise for P_2
    let x = (t(1, 3) - t(1, 4) - t(2, 3) + t(2, 4)) / (4.0 * h * h);
    // Tr P P2 P1 is the conjugate of Tr P P1 P2
    let sigma = -2.0 * x.im / q as f64;
    Ok(TraceResult {
        sigma,
        q,
        h,
        stencil_traces: ms.iter().map(|m| frame_trace(&m.frame)).collect(),
    })
}
