//! Periodic rectangular lattices, cut functions and square regions.
//!
//! Sites are stored as `[x1, x2]` in `[0, L1) x [0, L2)`. The linear index is
//! row-major, `x2 * L1 + x1`, and it also fixes the Jordan-Wigner order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Site = [usize; 2];

/// Lattice direction. Serialized as 1 or 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dir {
    D1,
    D2,
}

impl Dir {
    pub fn axis(self) -> usize {
        match self {
            Dir::D1 => 0,
            Dir::D2 => 1,
        }
    }

    pub fn from_number(j: u8) -> Result<Dir> {
        match j {
            1 => Ok(Dir::D1),
            2 => Ok(Dir::D2),
            _ => invalid(format!("direction must be 1 or 2, got {j}")),
        }
    }

    pub fn other(self) -> Dir {
        match self {
            Dir::D1 => Dir::D2,
            Dir::D2 => Dir::D1,
        }
    }
}

impl TryFrom<u8> for Dir {
    type Error = String;
    fn try_from(j: u8) -> std::result::Result<Self, String> {
        Dir::from_number(j).map_err(|e| e.to_string())
    }
}

impl From<Dir> for u8 {
    fn from(d: Dir) -> u8 {
        d.axis() as u8 + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub l1: usize,
    pub l2: usize,
}

impl LatticeSpec {
    /// Any positive extents are accepted here; the even-size rule of the
    /// physical setup is enforced by config validation, where it can be waived.
    pub fn new(l1: usize, l2: usize) -> Result<Self> {
        if l1 == 0 || l2 == 0 {
            return invalid(format!("lattice extents must be positive, got {l1}x{l2}"));
        }
        if l1 * l2 > 64 {
            return invalid(format!(
                "lattice {l1}x{l2} has more than 64 sites (occupation masks are 64-bit)"
            ));
        }
        Ok(LatticeSpec { l1, l2 })
    }

    pub fn is_even(&self) -> bool {
        self.l1 % 2 == 0 && self.l2 % 2 == 0
    }

    pub fn n_sites(&self) -> usize {
        self.l1 * self.l2
    }

    pub fn extent(&self, dir: Dir) -> usize {
        match dir {
            Dir::D1 => self.l1,
            Dir::D2 => self.l2,
        }
    }

    pub fn index(&self, s: Site) -> usize {
        s[1] * self.l1 + s[0]
    }

    pub fn site(&self, idx: usize) -> Site {
        [idx % self.l1, idx / self.l1]
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.n_sites()).map(|i| self.site(i))
    }

    pub fn wrap(&self, x: [i64; 2]) -> Site {
        [
            x[0].rem_euclid(self.l1 as i64) as usize,
            x[1].rem_euclid(self.l2 as i64) as usize,
        ]
    }

    /// Coordinate along `dir` reduced modulo the extent.
    pub fn wrap_coord(&self, dir: Dir, c: i64) -> usize {
        c.rem_euclid(self.extent(dir) as i64) as usize
    }

    /// Shortest separation along one axis on the ring of length `l`.
    fn ring_distance(a: usize, b: usize, l: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(l - d)
    }

    /// Graph distance on the torus (l1 norm with wraparound).
    pub fn periodic_distance(&self, x: Site, y: Site) -> usize {
        Self::ring_distance(x[0], y[0], self.l1) + Self::ring_distance(x[1], y[1], self.l2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CutKind {
    Step,
    /// Arbitrary values near `anchor`; the step value everywhere at distance >= `r0`.
    Deformed {
        anchor: Site,
        r0: f64,
        values: BTreeMap<usize, f64>,
    },
}

pub const DEFAULT_AGREEMENT_RADIUS: f64 = 3.0;

/// Step function theta(x; k) along `dir`, or a local deformation of it.
///
/// On the torus a step needs a second edge. The cut at `k` is paired with a
/// seam at `k - L/2`: the function is 1 on the `L - L/2` lines starting at `k`
/// and 0 on the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutFunction {
    pub dir: Dir,
    pub k: usize,
    pub kind: CutKind,
}

impl CutFunction {
    pub fn step(lat: &LatticeSpec, dir: Dir, k: i64) -> Self {
        CutFunction {
            dir,
            k: lat.wrap_coord(dir, k),
            kind: CutKind::Step,
        }
    }

    /// A deformed cut. Values at sites closer than `r0` to the anchor replace the step.
    pub fn deformed(
        lat: &LatticeSpec,
        dir: Dir,
        k: i64,
        anchor: Site,
        r0: f64,
        values: BTreeMap<usize, f64>,
    ) -> Result<Self> {
        if !(r0 > 0.0) {
            return invalid("agreement radius must be positive");
        }
        let anchor = lat.wrap([anchor[0] as i64, anchor[1] as i64]);
        for (&idx, v) in &values {
            if idx >= lat.n_sites() {
                return invalid(format!("deformation site index {idx} out of range"));
            }
            if !v.is_finite() {
                return invalid("deformation values must be finite");
            }
        }
        Ok(CutFunction {
            dir,
            k: lat.wrap_coord(dir, k),
            kind: CutKind::Deformed { anchor, r0, values },
        })
    }

    /// Line where the step drops back from 1 to 0.
    pub fn seam(&self, lat: &LatticeSpec) -> usize {
        let l = lat.extent(self.dir);
        (self.k + (l - l / 2)) % l
    }

    pub fn step_value(&self, lat: &LatticeSpec, x: Site) -> f64 {
        let l = lat.extent(self.dir);
        let c = x[self.dir.axis()];
        let d = (c + l - self.k) % l;
        if d < l - l / 2 {
            1.0
        } else {
            0.0
        }
    }

    pub fn eval(&self, lat: &LatticeSpec, x: Site) -> f64 {
        match &self.kind {
            CutKind::Step => self.step_value(lat, x),
            CutKind::Deformed { anchor, r0, values } => {
                if (lat.periodic_distance(x, *anchor) as f64) < *r0 {
                    if let Some(v) = values.get(&lat.index(x)) {
                        return *v;
                    }
                }
                self.step_value(lat, x)
            }
        }
    }

    /// Per-site difference between this function and its step, indexed linearly.
    pub fn deviation_from_step(&self, lat: &LatticeSpec) -> Vec<f64> {
        lat.sites()
            .map(|x| self.eval(lat, x) - self.step_value(lat, x))
            .collect()
    }
}

pub fn eval_cut(f: &CutFunction, lat: &LatticeSpec, x: Site) -> f64 {
    f.eval(lat, x)
}

/// Square box Gamma_M(k, l): columns k-M..k+M and rows l..l+2M, wrapped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub anchor: Site,
    pub half_width: usize,
    members: Vec<Site>,
}

impl Region {
    pub fn new(lat: &LatticeSpec, anchor: Site, half_width: usize) -> Result<Self> {
        let side = 2 * half_width + 1;
        if side > lat.l1.min(lat.l2) {
            return invalid(format!(
                "region half-width {half_width} does not fit a {}x{} lattice",
                lat.l1, lat.l2
            ));
        }
        let m = half_width as i64;
        let (k, l) = (anchor[0] as i64, anchor[1] as i64);
        let mut members: Vec<Site> = Vec::with_capacity(side * side);
        for x2 in l..=l + 2 * m {
            for x1 in k - m..=k + m {
                members.push(lat.wrap([x1, x2]));
            }
        }
        members.sort_by_key(|s| lat.index(*s));
        Ok(Region {
            anchor: lat.wrap([k, l]),
            half_width,
            members,
        })
    }

    pub fn members(&self) -> &[Site] {
        &self.members
    }

    pub fn contains(&self, s: Site) -> bool {
        self.members.contains(&s)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_examples() {
        let l = LatticeSpec::new(4, 4).unwrap();
        assert_eq!(l.wrap([4, 0]), [0, 0]);
        assert_eq!(l.wrap([-1, 3]), [3, 3]);
        assert_eq!(l.wrap([2, 2]), [2, 2]);
    }

    #[test]
    fn distance_examples() {
        let l4 = LatticeSpec::new(4, 4).unwrap();
        let l6 = LatticeSpec::new(6, 6).unwrap();
        assert_eq!(l4.periodic_distance([0, 0], [0, 0]), 0);
        assert_eq!(l4.periodic_distance([0, 0], [3, 0]), 1);
        assert_eq!(l6.periodic_distance([0, 0], [2, 2]), 4);
    }

    #[test]
    fn step_examples() {
        let l = LatticeSpec::new(6, 6).unwrap();
        let f = CutFunction::step(&l, Dir::D1, 2);
        assert_eq!(f.eval(&l, [2, 0]), 1.0);
        assert_eq!(f.eval(&l, [1, 5]), 0.0);
        assert_eq!(f.seam(&l), 5);
    }

    #[test]
    fn deformed_agrees_far_away() {
        let l = LatticeSpec::new(8, 8).unwrap();
        let anchor = [4, 4];
        let mut values = BTreeMap::new();
        values.insert(l.index(anchor), 0.5);
        values.insert(l.index([0, 0]), 0.25);
        let f = CutFunction::deformed(&l, Dir::D1, 4, anchor, 3.0, values).unwrap();
        assert_eq!(f.eval(&l, anchor), 0.5);
        // stored, but beyond the agreement radius
        assert_eq!(f.eval(&l, [0, 0]), f.step_value(&l, [0, 0]));
    }

    #[test]
    fn region_too_large() {
        let l = LatticeSpec::new(4, 3).unwrap();
        assert!(Region::new(&l, [0, 0], 1).is_ok());
        assert!(Region::new(&l, [0, 0], 2).is_err());
        assert_eq!(Region::new(&l, [0, 0], 0).unwrap().members(), &[[0, 0]]);
    }
}
