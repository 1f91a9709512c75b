use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::{matrix_element_hop, FockBasis};
use super::hopping::{Bond, HoppingSet, TwistConfig};
use super::operator::SparseOperator;
use crate::error::{invalid, Result};
use crate::lattice::{CutFunction, LatticeSpec, Region};
use crate::C64;

/// Largest number of sites in one interaction term.
pub const MAX_INTERACTION_ORDER: usize = 4;

/// `u · n_{x1} ... n_{xI}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub sites: Vec<usize>,
    pub u: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionSet {
    terms: Vec<Interaction>,
}

impl InteractionSet {
    pub fn new(lat: &LatticeSpec, range: usize, terms: Vec<Interaction>) -> Result<Self> {
        for t in &terms {
            if t.sites.is_empty() || t.sites.len() > MAX_INTERACTION_ORDER {
                return invalid(format!(
                    "interaction order {} not in 1..={MAX_INTERACTION_ORDER}",
                    t.sites.len()
                ));
            }
            if !t.u.is_finite() {
                return invalid("interaction couplings must be finite reals");
            }
            for (i, &a) in t.sites.iter().enumerate() {
                if a >= lat.n_sites() {
                    return invalid(format!("interaction site {a} outside lattice"));
                }
                for &b in &t.sites[i + 1..] {
                    if a == b {
                        return invalid("interaction sites must be distinct");
                    }
                    if lat.periodic_distance(lat.site(a), lat.site(b)) > range {
                        return invalid(format!(
                            "interaction between {a} and {b} exceeds range {range}"
                        ));
                    }
                }
            }
        }
        Ok(InteractionSet { terms })
    }

    pub fn terms(&self) -> &[Interaction] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Diagonal energy of one occupation mask.
    pub fn energy(&self, mask: u64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.sites.iter().all(|&s| mask >> s & 1 == 1))
            .map(|t| t.u)
            .sum()
    }

    pub fn extend(&mut self, other: &InteractionSet) {
        self.terms.extend(other.terms.iter().cloned());
    }
}

/// Complete problem statement: lattice, hoppings, interactions, particle number, twist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub lattice: LatticeSpec,
    pub hoppings: HoppingSet,
    pub interactions: InteractionSet,
    pub n_particles: usize,
    pub twist: TwistConfig,
}

impl HamiltonianSpec {
    pub fn new(
        hoppings: HoppingSet,
        interactions: InteractionSet,
        n_particles: usize,
    ) -> Result<Self> {
        let lattice = *hoppings.lattice();
        if n_particles > lattice.n_sites() {
            return invalid(format!(
                "particle number {n_particles} exceeds {} sites",
                lattice.n_sites()
            ));
        }
        Ok(HamiltonianSpec {
            lattice,
            hoppings,
            interactions,
            n_particles,
            twist: TwistConfig::none(),
        })
    }

    pub fn with_twist(mut self, twist: TwistConfig) -> Result<Self> {
        twist.validate(&self.lattice)?;
        self.twist = twist;
        Ok(self)
    }

    /// Adds onsite potentials `v[x] n_x`.
    pub fn with_potential(mut self, v: &[(usize, f64)]) -> Result<Self> {
        let terms = v
            .iter()
            .map(|&(s, u)| Interaction { sites: vec![s], u })
            .collect();
        let extra = InteractionSet::new(&self.lattice, 0, terms)?;
        self.interactions.extend(&extra);
        Ok(self)
    }

    pub fn basis(&self) -> Result<FockBasis> {
        FockBasis::new(&self.lattice, self.n_particles)
    }

    pub fn twisted_hoppings(&self) -> Result<HoppingSet> {
        self.hoppings.apply_twist(&self.twist)
    }

    pub fn build(&self, basis: &FockBasis) -> Result<SparseOperator> {
        build_hamiltonian(&self.twisted_hoppings()?, &self.interactions, basis)
    }
}

/// H = Σ t_xy c†_x c_y + Σ U n_{x1}...n_{xI} on the basis sector.
pub fn build_hamiltonian(
    hoppings: &HoppingSet,
    interactions: &InteractionSet,
    basis: &FockBasis,
) -> Result<SparseOperator> {
    if hoppings.lattice().n_sites() != basis.n_sites() {
        return invalid("basis and lattice site counts differ");
    }
    assemble(hoppings.bonds(), &|m| interactions.energy(m), basis, true)
}

/// Σ_b amp_b c†_to c_from plus a diagonal function of the occupation mask.
pub fn assemble(
    bonds: &[Bond],
    diag: &(dyn Fn(u64) -> f64 + Sync),
    basis: &FockBasis,
    hermitian: bool,
) -> Result<SparseOperator> {
    // Each row collects the terms landing on that target state; building row
    // by row keeps the merge deterministic under parallel execution.
    let rows: Vec<Vec<(u32, C64)>> = (0..basis.dim())
        .into_par_iter()
        .map(|r| {
            let target = basis.mask(r);
            let mut row: Vec<(u32, C64)> = Vec::new();
            let d = diag(target);
            if d != 0.0 {
                row.push((r as u32, C64::new(d, 0.0)));
            }
            // <target| c†_x c_y |source> is nonzero only for source = c†_y c_x target.
            for b in bonds {
                if let Some((src, sign)) = matrix_element_hop(target, b.from, b.to) {
                    let c = basis.index(src).expect("hop preserves particle number");
                    row.push((c as u32, b.amp * sign));
                }
            }
            merge_row(row)
        })
        .collect();
    SparseOperator::from_rows(basis.dim(), rows, hermitian)
}

fn merge_row(mut row: Vec<(u32, C64)>) -> Vec<(u32, C64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(u32, C64)> = Vec::with_capacity(row.len());
    for (c, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out
}

/// Diagonal operator Σ_x w[x] n_x.
pub fn diagonal_from_weights(w: &[f64], basis: &FockBasis) -> SparseOperator {
    let d: Vec<f64> = basis.masks().iter().map(|&m| mask_weight(m, w)).collect();
    SparseOperator::diagonal(&d)
}

pub(crate) fn mask_weight(mask: u64, w: &[f64]) -> f64 {
    let mut rest = mask;
    let mut s = 0.0;
    while rest != 0 {
        s += w[rest.trailing_zeros() as usize];
        rest &= rest - 1;
    }
    s
}

/// Σ_x f(x) n_x for a cut function.
pub fn diagonal_from_cut(f: &CutFunction, lat: &LatticeSpec, basis: &FockBasis) -> SparseOperator {
    let w: Vec<f64> = lat.sites().map(|x| f.eval(lat, x)).collect();
    diagonal_from_weights(&w, basis)
}

/// Number of particles inside a region.
pub fn region_charge(region: &Region, lat: &LatticeSpec, basis: &FockBasis) -> SparseOperator {
    let mut w = vec![0.0; lat.n_sites()];
    for s in region.members() {
        w[lat.index(*s)] = 1.0;
    }
    diagonal_from_weights(&w, basis)
}

pub fn number_operator(site: usize, basis: &FockBasis) -> SparseOperator {
    let mut w = vec![0.0; basis.n_sites()];
    w[site] = 1.0;
    diagonal_from_weights(&w, basis)
}

/// The single term c†_x c_y (not Hermitian unless x = y).
pub fn hop_operator(x: usize, y: usize, basis: &FockBasis) -> SparseOperator {
    let mut t = Vec::new();
    for (c, &m) in basis.masks().iter().enumerate() {
        if let Some((tm, sign)) = matrix_element_hop(m, x, y) {
            t.push((basis.index(tm).unwrap(), c, C64::new(sign, 0.0)));
        }
    }
    SparseOperator::from_triplets(basis.dim(), t, x == y).expect("indices in range")
}

/// Gauge move of a state: multiplies each amplitude by e^{-iφ n_C(mask)}.
pub fn gauge_move_state(state: &mut [C64], basis: &FockBasis, angles: &[f64]) {
    for (amp, &m) in state.iter_mut().zip(basis.masks()) {
        *amp *= C64::from_polar(1.0, -mask_weight(m, angles));
    }
}

/// Gauge move of an operator: e^{-iF} A e^{iF} with F = Σ_x angles[x] n_x.
pub fn gauge_move_operator(op: &SparseOperator, basis: &FockBasis, angles: &[f64]) -> SparseOperator {
    let f: Vec<f64> = basis.masks().iter().map(|&m| mask_weight(m, angles)).collect();
    op.conjugate_by_phases(&f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manybody::hopping::HoppingBuilder;

    #[test]
    fn onsite_only_is_diagonal() {
        let lat = LatticeSpec::new(2, 2).unwrap();
        let u = [0.5, -1.0, 2.0, 0.25];
        let spec = HamiltonianSpec::new(HoppingSet::empty(lat), InteractionSet::default(), 2)
            .unwrap()
            .with_potential(&u.iter().copied().enumerate().collect::<Vec<_>>())
            .unwrap();
        let basis = spec.basis().unwrap();
        let h = spec.build(&basis).unwrap();
        for (i, &m) in basis.masks().iter().enumerate() {
            let expect: f64 = (0..4).filter(|s| m >> s & 1 == 1).map(|s| u[s]).sum();
            assert_eq!(h.get(i, i).re, expect);
            assert_eq!(h.row(i).count(), 1);
        }
    }

    #[test]
    fn single_bond_two_sites() {
        let lat = LatticeSpec::new(2, 1).unwrap();
        let t = C64::new(0.3, 0.4);
        let mut b = HoppingBuilder::new(lat);
        b.hop([0, 0], [1, 0], t);
        let spec = HamiltonianSpec::new(b.build().unwrap(), InteractionSet::default(), 1).unwrap();
        let basis = spec.basis().unwrap();
        let h = spec.build(&basis).unwrap();
        // basis: site 0 occupied, then site 1
        assert_eq!(h.get(1, 0), t);
        assert_eq!(h.get(0, 1), t.conj());
    }
}
