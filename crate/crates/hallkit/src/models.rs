//! Built-in models: Hofstadter, Hofstadter-Hubbard, atomic insulator, chains.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{LatticeSpec, Site};
use crate::manybody::{HamiltonianSpec, HoppingBuilder, HoppingSet, Interaction, InteractionSet};
use crate::C64;

/// Flux per plaquette n/m in units of the flux quantum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flux {
    pub n: i64,
    pub m: i64,
}

impl Flux {
    pub fn new(n: i64, m: i64) -> Result<Flux> {
        if m <= 0 {
            return invalid("flux denominator must be positive");
        }
        Ok(Flux { n, m })
    }

    pub fn zero() -> Flux {
        Flux { n: 0, m: 1 }
    }

    pub fn value(&self) -> f64 {
        self.n as f64 / self.m as f64
    }

    /// The magnetic unit cell must fit the torus along direction 1.
    pub fn check_commensurate(&self, lat: &LatticeSpec) -> Result<()> {
        if lat.l1 as i64 % self.m != 0 {
            return invalid(format!(
                "flux {}/{} needs the denominator to divide L1 = {}",
                self.n, self.m, lat.l1
            ));
        }
        if (lat.n_sites() as i64 * self.n) % self.m != 0 {
            return invalid("total flux through the torus is not an integer");
        }
        Ok(())
    }
}

/// Nearest-neighbour hoppings with amplitude -t; bonds along direction 2
/// carry the Landau-gauge phase e^{2πi(n/m)x1} for hops toward smaller x2,
/// i.e. on c†_x c_{x+e2}. With this orientation a filled lowest band at flux
/// 1/m has Chern number +1.
///
/// Directions of extent 1 have no bonds.
pub fn hofstadter_hoppings(lat: &LatticeSpec, flux: Flux, t: f64) -> Result<HoppingSet> {
    flux.check_commensurate(lat)?;
    let mut b = HoppingBuilder::new(*lat);
    let amp = C64::new(-t, 0.0);
    for s in lat.sites() {
        if lat.l1 > 1 {
            b.hop(s, [1, 0], amp);
        }
        if lat.l2 > 1 {
            let phase = C64::from_polar(1.0, 2.0 * PI * flux.value() * s[0] as f64);
            b.hop(s, [0, 1], amp * phase.conj());
        }
    }
    b.build()
}

pub fn hofstadter(l1: usize, l2: usize, flux: Flux, t: f64, n_particles: usize) -> Result<HamiltonianSpec> {
    let lat = LatticeSpec::new(l1, l2)?;
    HamiltonianSpec::new(hofstadter_hoppings(&lat, flux, t)?, InteractionSet::default(), n_particles)
}

/// Nearest-neighbour pairs, one per bond of the torus.
pub fn nearest_neighbour_pairs(lat: &LatticeSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for s in lat.sites() {
        let i = lat.index(s);
        if lat.l1 > 1 {
            out.push((i, lat.index(lat.wrap([s[0] as i64 + 1, s[1] as i64]))));
        }
        if lat.l2 > 1 {
            out.push((i, lat.index(lat.wrap([s[0] as i64, s[1] as i64 + 1]))));
        }
    }
    out
}

fn nn_interactions(lat: &LatticeSpec, v: f64) -> Result<InteractionSet> {
    if v == 0.0 {
        return Ok(InteractionSet::default());
    }
    let terms = nearest_neighbour_pairs(lat)
        .into_iter()
        .map(|(a, b)| Interaction {
            sites: vec![a, b],
            u: v,
        })
        .collect();
    InteractionSet::new(lat, 1, terms)
}

/// Hofstadter model plus V Σ_<xy> n_x n_y.
pub fn hofstadter_hubbard(
    l1: usize,
    l2: usize,
    flux: Flux,
    t: f64,
    v_nn: f64,
    n_particles: usize,
) -> Result<HamiltonianSpec> {
    if !(v_nn >= 0.0) {
        return invalid("nearest-neighbour repulsion must be nonnegative");
    }
    let lat = LatticeSpec::new(l1, l2)?;
    HamiltonianSpec::new(
        hofstadter_hoppings(&lat, flux, t)?,
        nn_interactions(&lat, v_nn)?,
        n_particles,
    )
}

/// Zero hoppings and onsite energies only. The N lowest potentials must be
/// strictly below the rest so the ground state is unique.
pub fn atomic_insulator(l1: usize, l2: usize, potentials: &[f64], n_particles: usize) -> Result<HamiltonianSpec> {
    let lat = LatticeSpec::new(l1, l2)?;
    if potentials.len() != lat.n_sites() {
        return invalid(format!(
            "expected {} potentials, got {}",
            lat.n_sites(),
            potentials.len()
        ));
    }
    if n_particles > lat.n_sites() {
        return invalid("particle number exceeds site count");
    }
    let mut sorted = potentials.to_vec();
    sorted.sort_by(f64::total_cmp);
    if n_particles > 0 && n_particles < sorted.len() && sorted[n_particles - 1] >= sorted[n_particles] {
        return invalid("degenerate potential minima: ground state is not unique");
    }
    let spec = HamiltonianSpec::new(HoppingSet::empty(lat), InteractionSet::default(), n_particles)?;
    let pot: Vec<(usize, f64)> = potentials.iter().copied().enumerate().collect();
    spec.with_potential(&pot)
}

/// A ring (or open chain) of `l` sites along direction 1.
pub fn chain(l: usize, t: f64, v_nn: f64, n_particles: usize, periodic: bool) -> Result<HamiltonianSpec> {
    let lat = LatticeSpec::new(l, 1)?;
    let mut b = HoppingBuilder::new(lat);
    let mut pairs = Vec::new();
    let bonds = if periodic { l } else { l.saturating_sub(1) };
    if l > 1 {
        for x in 0..bonds {
            b.hop([x, 0], [1, 0], C64::new(-t, 0.0));
            pairs.push((x, (x + 1) % l));
        }
    }
    let terms = if v_nn != 0.0 {
        pairs
            .into_iter()
            .map(|(a, c)| Interaction {
                sites: vec![a, c],
                u: v_nn,
            })
            .collect()
    } else {
        Vec::new()
    };
    HamiltonianSpec::new(b.build()?, InteractionSet::new(&lat, 1, terms)?, n_particles)
}

/// Wilson loop H_ab H_bc H_cd H_da (normalized) of the hopping matrix around
/// the plaquette a, b, c, d counterclockwise from its lower-left corner `s`.
pub fn plaquette_phase(h: &HoppingSet, s: Site) -> Option<C64> {
    let lat = h.lattice();
    let hop = |from: Site, d: [i32; 2]| -> Option<C64> {
        h.bonds()
            .iter()
            .find(|b| b.from == lat.index(from) && b.disp == d)
            .map(|b| b.amp / b.amp.norm())
    };
    let step = |x: Site, d: [i32; 2]| lat.wrap([x[0] as i64 + d[0] as i64, x[1] as i64 + d[1] as i64]);
    let a = s;
    let b = step(a, [1, 0]);
    let c = step(b, [0, 1]);
    let d = step(c, [-1, 0]);
    // H_{p, p+d} is the amplitude of c†_p c_{p+d}, the bond from p+d back to p
    Some(hop(b, [-1, 0])? * hop(c, [0, -1])? * hop(d, [1, 0])? * hop(a, [0, 1])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commensurability() {
        assert!(hofstadter(6, 3, Flux::new(1, 3).unwrap(), 1.0, 6).is_ok());
        assert!(hofstadter(4, 3, Flux::new(1, 3).unwrap(), 1.0, 2).is_err());
    }

    #[test]
    fn plaquette_flux_uniform() {
        let lat = LatticeSpec::new(6, 3).unwrap();
        let h = hofstadter_hoppings(&lat, Flux::new(1, 3).unwrap(), 1.0).unwrap();
        let want = C64::from_polar(1.0, 2.0 * PI / 3.0);
        for s in lat.sites() {
            let p = plaquette_phase(&h, s).unwrap();
            assert!((p - want).norm() < 1e-12, "site {s:?}: {p}");
        }
    }

    #[test]
    fn atomic_uniqueness() {
        assert!(atomic_insulator(2, 2, &[0.0, 1.0, 1.0, 2.0], 2).is_err());
        assert!(atomic_insulator(2, 2, &[0.0, 1.0, 1.5, 2.0], 2).is_ok());
    }
}
