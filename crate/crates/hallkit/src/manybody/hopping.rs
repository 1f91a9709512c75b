use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{CutFunction, Dir, LatticeSpec, Site};
use crate::C64;

/// Tolerance on t_yx = conj(t_xy).
pub const HOPPING_HERMITIAN_TOL: f64 = 1e-12;

/// One directed term `amp · c†_to c_from`.
///
/// `disp` is the lifted displacement from `from` to `to` on the covering plane,
/// so that wrapped bonds know which cut lines they cross.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub to: usize,
    pub from: usize,
    pub disp: [i32; 2],
    pub amp: C64,
}

/// Signed number of times a hop from coordinate `c` by `d` crosses line `k`
/// on a ring of length `l`. Positive when the creation end is on the low side.
pub fn signed_crossings(c: usize, d: i32, k: usize, l: usize) -> i32 {
    let (c, d, k, l) = (c as i64, d as i64, k as i64, l as i64);
    -((c + d - k).div_euclid(l) - (c - k).div_euclid(l)) as i32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoppingSet {
    lattice: LatticeSpec,
    range: usize,
    bonds: Vec<Bond>,
}

impl HoppingSet {
    /// Validates ranges, displacement consistency and Hermiticity.
    pub fn new(lattice: LatticeSpec, range: usize, bonds: Vec<Bond>) -> Result<Self> {
        let n = lattice.n_sites();
        let mut table: BTreeMap<(usize, usize, [i32; 2]), C64> = BTreeMap::new();
        for b in &bonds {
            if b.to >= n || b.from >= n {
                return invalid(format!("bond {}->{} outside lattice", b.from, b.to));
            }
            if !(b.amp.re.is_finite() && b.amp.im.is_finite()) {
                return invalid("hopping amplitudes must be finite");
            }
            let l1 = (b.disp[0].unsigned_abs() + b.disp[1].unsigned_abs()) as usize;
            if l1 > range {
                return invalid(format!(
                    "bond {}->{} has length {l1} beyond declared range {range}",
                    b.from, b.to
                ));
            }
            let s = lattice.site(b.from);
            let lifted = lattice.wrap([s[0] as i64 + b.disp[0] as i64, s[1] as i64 + b.disp[1] as i64]);
            if lattice.index(lifted) != b.to {
                return invalid(format!(
                    "bond {}->{} inconsistent with displacement {:?}",
                    b.from, b.to, b.disp
                ));
            }
            *table.entry((b.to, b.from, b.disp)).or_insert(C64::new(0.0, 0.0)) += b.amp;
        }
        let mut dev: f64 = 0.0;
        for (&(to, from, d), &amp) in &table {
            let partner = table
                .get(&(from, to, [-d[0], -d[1]]))
                .copied()
                .unwrap_or(C64::new(0.0, 0.0));
            dev = dev.max((partner - amp.conj()).norm());
        }
        if dev > HOPPING_HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: HOPPING_HERMITIAN_TOL,
            });
        }
        Ok(HoppingSet {
            lattice,
            range,
            bonds,
        })
    }

    pub fn empty(lattice: LatticeSpec) -> Self {
        HoppingSet {
            lattice,
            range: 1,
            bonds: Vec::new(),
        }
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Crossing count of a bond through line `k` along `dir`.
    pub fn crossings(&self, b: &Bond, dir: Dir, k: usize) -> i32 {
        let s = self.lattice.site(b.from);
        let a = dir.axis();
        signed_crossings(s[a], b.disp[a], k, self.lattice.extent(dir))
    }

    /// Bonds crossing line `k` along `dir` get e^{iφ} when the creation end is on
    /// the low side and e^{-iφ} in reverse.
    pub fn apply_twist(&self, twist: &TwistConfig) -> Result<HoppingSet> {
        twist.validate(&self.lattice)?;
        let mut out = self.clone();
        for t in &twist.twists {
            for b in &mut out.bonds {
                let s = self.crossings(b, t.dir, t.k);
                if s != 0 {
                    b.amp *= C64::from_polar(1.0, t.phi * s as f64);
                }
            }
        }
        Ok(out)
    }

    /// Hoppings of e^{-iF} H e^{iF} with F = Σ_x f(x) n_x.
    pub fn conjugate_by_potential(&self, f: &[f64]) -> HoppingSet {
        let mut out = self.clone();
        for b in &mut out.bonds {
            b.amp *= C64::from_polar(1.0, -(f[b.to] - f[b.from]));
        }
        out
    }

    /// Relocates a twist of angle `phi` from line `k` to `k - 1` along `dir`.
    pub fn gauge_move(&self, dir: Dir, k: usize, phi: f64) -> HoppingSet {
        let f = gauge_generator(&self.lattice, dir, k, phi);
        self.conjugate_by_potential(&f)
    }

    /// Hopping set of the deformed twist: a step twist at each cut followed by
    /// conjugation with the local deviation of each cut function from its step.
    pub fn apply_deformed_twist(&self, cuts: &[(CutFunction, f64)]) -> Result<HoppingSet> {
        let twist = TwistConfig::new(
            cuts.iter()
                .map(|(c, phi)| Twist {
                    dir: c.dir,
                    k: c.k,
                    phi: *phi,
                })
                .collect(),
        )?;
        let stepped = self.apply_twist(&twist)?;
        let mut f = vec![0.0; self.lattice.n_sites()];
        for (c, phi) in cuts {
            for (fi, dev) in f.iter_mut().zip(c.deviation_from_step(&self.lattice)) {
                *fi += phi * dev;
            }
        }
        Ok(stepped.conjugate_by_potential(&f))
    }

    /// max |t - t'| over matching bonds, for comparing twisted sets.
    pub fn max_difference(&self, other: &HoppingSet) -> Option<f64> {
        if self.bonds.len() != other.bonds.len() {
            return None;
        }
        let mut d: f64 = 0.0;
        for (a, b) in self.bonds.iter().zip(&other.bonds) {
            if a.to != b.to || a.from != b.from || a.disp != b.disp {
                return None;
            }
            d = d.max((a.amp - b.amp).norm());
        }
        Some(d)
    }
}

/// Angle field φ·[x_j = k-1] generating a gauge move.
pub fn gauge_generator(lat: &LatticeSpec, dir: Dir, k: usize, phi: f64) -> Vec<f64> {
    let col = lat.wrap_coord(dir, k as i64 - 1);
    lat.sites()
        .map(|s| if s[dir.axis()] == col { phi } else { 0.0 })
        .collect()
}

/// Accumulates Hermitian pairs of bonds.
#[derive(Clone, Debug)]
pub struct HoppingBuilder {
    lattice: LatticeSpec,
    bonds: Vec<Bond>,
    range: usize,
}

impl HoppingBuilder {
    pub fn new(lattice: LatticeSpec) -> Self {
        HoppingBuilder {
            lattice,
            bonds: Vec::new(),
            range: 1,
        }
    }

    /// Adds `amp · c†_{from+disp} c_from` and its conjugate partner.
    pub fn hop(&mut self, from: Site, disp: [i32; 2], amp: C64) -> &mut Self {
        let l = &self.lattice;
        let to = l.wrap([from[0] as i64 + disp[0] as i64, from[1] as i64 + disp[1] as i64]);
        let (fi, ti) = (l.index(from), l.index(to));
        self.range = self
            .range
            .max((disp[0].unsigned_abs() + disp[1].unsigned_abs()) as usize);
        self.bonds.push(Bond {
            to: ti,
            from: fi,
            disp,
            amp,
        });
        if disp != [0, 0] {
            self.bonds.push(Bond {
                to: fi,
                from: ti,
                disp: [-disp[0], -disp[1]],
                amp: amp.conj(),
            });
        }
        self
    }

    pub fn build(self) -> Result<HoppingSet> {
        HoppingSet::new(self.lattice, self.range, self.bonds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub dir: Dir,
    pub k: usize,
    pub phi: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwistConfig {
    pub twists: Vec<Twist>,
}

impl TwistConfig {
    pub fn new(twists: Vec<Twist>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for t in &twists {
            if !seen.insert(t.dir) {
                return invalid(format!("duplicate twist in direction {}", u8::from(t.dir)));
            }
        }
        Ok(TwistConfig { twists })
    }

    pub fn none() -> Self {
        TwistConfig::default()
    }

    /// Twists φ1 at line k1 along direction 1 and φ2 at line k2 along direction 2.
    pub fn pair(phi: [f64; 2], k: [usize; 2]) -> Self {
        TwistConfig {
            twists: vec![
                Twist {
                    dir: Dir::D1,
                    k: k[0],
                    phi: phi[0],
                },
                Twist {
                    dir: Dir::D2,
                    k: k[1],
                    phi: phi[1],
                },
            ],
        }
    }

    pub fn validate(&self, lat: &LatticeSpec) -> Result<()> {
        let mut seen = BTreeSet::new();
        for t in &self.twists {
            if !seen.insert(t.dir) {
                return invalid(format!("duplicate twist in direction {}", u8::from(t.dir)));
            }
            if t.k >= lat.extent(t.dir) {
                return invalid(format!("cut position {} outside lattice", t.k));
            }
            if !t.phi.is_finite() {
                return invalid("twist angle must be finite");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_counts() {
        // ring of 4, line 2 sits between coordinates 1 and 2
        assert_eq!(signed_crossings(2, -1, 2, 4), 1);
        assert_eq!(signed_crossings(1, 1, 2, 4), -1);
        assert_eq!(signed_crossings(0, 1, 2, 4), 0);
        // wrapped hop from 3 to 0 crosses line 0
        assert_eq!(signed_crossings(3, 1, 0, 4), -1);
        assert_eq!(signed_crossings(0, -1, 0, 4), 1);
        // ring of 1: every hop crosses the only line
        assert_eq!(signed_crossings(0, 1, 0, 1), -1);
    }

    #[test]
    fn twist_examples() {
        let lat = LatticeSpec::new(2, 1).unwrap();
        let mut b = HoppingBuilder::new(lat);
        b.hop([1, 0], [-1, 0], C64::new(1.0, 0.0));
        let h = b.build().unwrap();
        let tw = |phi| TwistConfig::new(vec![Twist { dir: Dir::D1, k: 1, phi }]).unwrap();
        let t0 = h.apply_twist(&tw(0.0)).unwrap();
        assert_eq!(t0, h);
        let t2pi = h.apply_twist(&tw(2.0 * std::f64::consts::PI)).unwrap();
        assert!(t2pi.max_difference(&h).unwrap() < 1e-12);
        let tq = h.apply_twist(&tw(std::f64::consts::FRAC_PI_2)).unwrap();
        // c†_0 c_1 with site 0 below line 1
        assert!((tq.bonds()[0].amp - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((tq.bonds()[1].amp - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let lat = LatticeSpec::new(2, 2).unwrap();
        let bonds = vec![Bond {
            to: 1,
            from: 0,
            disp: [1, 0],
            amp: C64::new(1.0, 0.0),
        }];
        assert!(matches!(HoppingSet::new(lat, 1, bonds), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn duplicate_direction_rejected() {
        let t = Twist {
            dir: Dir::D2,
            k: 0,
            phi: 0.1,
        };
        assert!(TwistConfig::new(vec![t, t]).is_err());
    }
}
