use crate::error::{invalid, Error, Result};
use crate::lattice::LatticeSpec;

/// Largest sector the engine will enumerate.
pub const MAX_BASIS_DIM: usize = 1 << 26;

/// Occupation-bitmask basis of the N-particle sector, in increasing mask order.
///
/// Bit `i` of a mask is the occupation of the site with linear index `i`.
#[derive(Clone, Debug)]
pub struct FockBasis {
    n_sites: usize,
    n: usize,
    masks: Vec<u64>,
    // binom[a][b] = C(a, b) for a <= n_sites, b <= n
    binom: Vec<Vec<u64>>,
}

fn binomial_table(n_sites: usize, n: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; n + 1]; n_sites + 1];
    for a in 0..=n_sites {
        t[a][0] = 1;
        for b in 1..=n.min(a) {
            t[a][b] = t[a - 1][b - 1] + if b < a { t[a - 1][b] } else { 0 };
        }
    }
    t
}

impl FockBasis {
    pub fn new(lat: &LatticeSpec, n: usize) -> Result<Self> {
        Self::with_sites(lat.n_sites(), n)
    }

    pub fn with_sites(n_sites: usize, n: usize) -> Result<Self> {
        if n_sites > 64 {
            return invalid("at most 64 sites are supported");
        }
        if n > n_sites {
            return invalid(format!("particle number {n} exceeds site count {n_sites}"));
        }
        let binom = binomial_table(n_sites, n);
        let dim = binom[n_sites][n];
        if dim > MAX_BASIS_DIM as u64 {
            return Err(Error::Resource(format!(
                "sector dimension C({n_sites},{n}) = {dim} exceeds {MAX_BASIS_DIM}"
            )));
        }
        let mut masks = Vec::with_capacity(dim as usize);
        if n == 0 {
            masks.push(0);
        } else {
            // Gosper's hack walks same-popcount masks in increasing order.
            let mut m: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            let limit_bits = n_sites as u32;
            loop {
                masks.push(m);
                if masks.len() as u64 == dim {
                    break;
                }
                let c = m & m.wrapping_neg();
                let r = m + c;
                m = (((r ^ m) >> 2) / c) | r;
                debug_assert!(limit_bits == 64 || m >> limit_bits == 0);
            }
        }
        Ok(FockBasis {
            n_sites,
            n,
            masks,
            binom,
        })
    }

    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    pub fn n_particles(&self) -> usize {
        self.n
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn mask(&self, i: usize) -> u64 {
        self.masks[i]
    }

    /// Ordinal of `mask` via the combinatorial number system, which for a fixed
    /// popcount reproduces the increasing integer order.
    pub fn index(&self, mask: u64) -> Option<usize> {
        if mask.count_ones() as usize != self.n {
            return None;
        }
        if self.n_sites < 64 && mask >> self.n_sites != 0 {
            return None;
        }
        let mut rank = 0u64;
        let mut rest = mask;
        let mut j = 0;
        while rest != 0 {
            let p = rest.trailing_zeros() as usize;
            j += 1;
            if p >= j {
                rank += self.binom[p][j];
            }
            rest &= rest - 1;
        }
        Some(rank as usize)
    }
}

/// Applies `c†_x c_y` to a basis mask.
///
/// Returns the target mask and the fermionic sign, or `None` when the result
/// vanishes. The sign is the parity of occupied sites strictly between `x` and `y`.
pub fn matrix_element_hop(mask: u64, x: usize, y: usize) -> Option<(u64, f64)> {
    let by = 1u64 << y;
    if mask & by == 0 {
        return None;
    }
    if x == y {
        return Some((mask, 1.0));
    }
    let bx = 1u64 << x;
    if mask & bx != 0 {
        return None;
    }
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    let between = if hi - lo > 1 {
        let span = ((1u64 << (hi - lo - 1)) - 1) << (lo + 1);
        (mask & span).count_ones()
    } else {
        0
    };
    let sign = if between % 2 == 0 { 1.0 } else { -1.0 };
    Some((mask ^ by ^ bx, sign))
}
