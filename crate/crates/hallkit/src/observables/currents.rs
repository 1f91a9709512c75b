use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{Dir, LatticeSpec};
use crate::manybody::hamiltonian::assemble;
use crate::manybody::{number_operator, Bond, FockBasis, HoppingSet, SparseOperator};
use crate::C64;

/// Which current to build: plain, windowed (direction 1 only) or deformed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentSpec {
    pub dir: Dir,
    pub k: usize,
    /// (row ℓ, half-width 𝒩)
    pub window: Option<(usize, usize)>,
    /// (α, site index)
    pub deformation: Option<(f64, usize)>,
}

impl CurrentSpec {
    pub fn plain(dir: Dir, k: usize) -> Self {
        CurrentSpec {
            dir,
            k,
            window: None,
            deformation: None,
        }
    }
}

/// Bonds crossing line `k` along `dir`, each weighted by i·(signed crossings).
fn crossing_terms(h: &HoppingSet, dir: Dir, k: usize, keep: impl Fn(&Bond) -> bool) -> Vec<Bond> {
    h.bonds()
        .iter()
        .filter_map(|b| {
            let s = h.crossings(b, dir, k);
            (s != 0 && keep(b)).then(|| Bond {
                amp: C64::new(0.0, s as f64) * b.amp,
                ..*b
            })
        })
        .collect()
}

/// J^(j)(k) = i Σ (t_xy c†_x c_y - t_yx c†_y c_x) over bonds crossing the cut,
/// with x on the low side. With the twist placed at the same line this is ∂H/∂φ.
pub fn local_current(h: &HoppingSet, dir: Dir, k: usize, basis: &FockBasis) -> Result<SparseOperator> {
    check_line(h.lattice(), dir, k)?;
    let terms = crossing_terms(h, dir, k, |_| true);
    assemble(&terms, &|_| 0.0, basis, true)
}

/// Rows ℓ-𝒩..ℓ+𝒩 (mod L2), or all rows once the window covers the lattice.
pub fn window_rows(lat: &LatticeSpec, row: usize, half: usize) -> Vec<bool> {
    let mut keep = vec![false; lat.l2];
    if 2 * half + 1 >= lat.l2 {
        keep.iter_mut().for_each(|k| *k = true);
    } else {
        for d in -(half as i64)..=half as i64 {
            keep[lat.wrap_coord(Dir::D2, row as i64 + d)] = true;
        }
    }
    keep
}

/// J^(1)_𝒩(k, ℓ): the direction-1 current restricted to bonds with both ends in
/// the row window.
pub fn windowed_current(
    h: &HoppingSet,
    k: usize,
    row: usize,
    half: usize,
    basis: &FockBasis,
) -> Result<SparseOperator> {
    let lat = *h.lattice();
    check_line(&lat, Dir::D1, k)?;
    if row >= lat.l2 {
        return invalid(format!("window row {row} outside lattice"));
    }
    let rows = window_rows(&lat, row, half);
    let terms = crossing_terms(h, Dir::D1, k, |b| {
        rows[lat.site(b.to)[1]] && rows[lat.site(b.from)[1]]
    });
    assemble(&terms, &|_| 0.0, basis, true)
}

/// J^(1)(k) + iα[H, n_x].
pub fn deformed_current(
    h_hop: &HoppingSet,
    k: usize,
    alpha: f64,
    site: usize,
    h: &SparseOperator,
    basis: &FockBasis,
) -> Result<SparseOperator> {
    let j = local_current(h_hop, Dir::D1, k, basis)?;
    if alpha == 0.0 {
        return Ok(j);
    }
    let extra = i_commutator_with_number(h, site, basis).scale(C64::new(alpha, 0.0));
    j.add(&extra)?.into_hermitian()
}

/// i[H, n_x].
pub fn i_commutator_with_number(h: &SparseOperator, site: usize, basis: &FockBasis) -> SparseOperator {
    let n = number_operator(site, basis);
    let d: Vec<f64> = n.diagonal_entries().iter().map(|z| z.re).collect();
    h.i_commutator_with_diagonal(&d)
}

/// i[H, χ] for a diagonal charge operator χ.
pub fn charge_current(h: &SparseOperator, chi: &SparseOperator) -> SparseOperator {
    let d: Vec<f64> = chi.diagonal_entries().iter().map(|z| z.re).collect();
    h.i_commutator_with_diagonal(&d)
}

/// Dispatches on the spec.
pub fn current(
    spec: &CurrentSpec,
    h_hop: &HoppingSet,
    h: &SparseOperator,
    basis: &FockBasis,
) -> Result<SparseOperator> {
    match (spec.window, spec.deformation) {
        (Some(_), _) | (_, Some(_)) if spec.dir != Dir::D1 => {
            invalid("windowed and deformed currents exist only along direction 1")
        }
        (Some(_), Some(_)) => invalid("a current is either windowed or deformed, not both"),
        (Some((row, half)), None) => windowed_current(h_hop, spec.k, row, half, basis),
        (None, Some((alpha, site))) => deformed_current(h_hop, spec.k, alpha, site, h, basis),
        (None, None) => local_current(h_hop, spec.dir, spec.k, basis),
    }
}

fn check_line(lat: &LatticeSpec, dir: Dir, k: usize) -> Result<()> {
    if k >= lat.extent(dir) {
        return invalid(format!("cut position {k} outside lattice along direction {}", u8::from(dir)));
    }
    Ok(())
}
