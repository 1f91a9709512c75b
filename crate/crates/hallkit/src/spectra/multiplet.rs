use faer::Mat;
use serde::{Deserialize, Serialize};

use super::eigen::EigenDecomposition;
use super::linop::LinearOp;
use crate::error::{invalid, Error, Result};
use crate::C64;

pub const DEFAULT_RATIO_THRESHOLD: f64 = 10.0;
pub const DEFAULT_Q_MAX: usize = 8;
/// Gaps below this, relative to max(1, |E|), count as degeneracies.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub q_hint: Option<usize>,
    pub ratio_threshold: f64,
    pub q_max: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            q_hint: None,
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
            q_max: DEFAULT_Q_MAX,
        }
    }
}

impl DetectOptions {
    pub fn with_hint(q: usize) -> Self {
        DetectOptions {
            q_hint: Some(q),
            ..Default::default()
        }
    }

    /// Eigenpairs a solver must deliver for detection to be possible.
    pub fn levels_needed(&self) -> usize {
        match self.q_hint {
            Some(q) => q + 1,
            None => self.q_max + 2,
        }
    }
}

/// The q lowest states, their spread and the gap above them.
#[derive(Clone, Debug)]
pub struct GroundMultiplet {
    pub q: usize,
    pub energies: Vec<f64>,
    /// dim × q orthonormal frame.
    pub frame: Mat<C64>,
    /// max |E_0m - E_0m'|.
    pub delta_e: f64,
    /// E_q - max E_0m.
    pub gap: f64,
}

impl GroundMultiplet {
    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn mean_energy(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.q as f64
    }

    pub fn ratio(&self) -> f64 {
        ratio(self.gap, self.delta_e)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Finds the ground multiplet.
///
/// With a hint, the first `q` levels are checked for gap/spread >= threshold.
/// Without one, each q up to `q_max` is scored by gap/spread and the best score
/// wins, ties going to the smaller q. A single level has no spread, so q = 1 is
/// scored against the next spacing, (E_1 - E_0)/(E_2 - E_1).
pub fn detect_multiplet(eig: &EigenDecomposition, opts: &DetectOptions) -> Result<GroundMultiplet> {
    let e = &eig.values;
    let (q, score) = match opts.q_hint {
        Some(q) => {
            if q == 0 {
                return invalid("multiplet size hint must be positive");
            }
            if e.len() < q + 1 {
                return invalid(format!(
                    "multiplet of size {q} needs {} eigenvalues, got {}",
                    q + 1,
                    e.len()
                ));
            }
            (q, ratio(e[q] - e[q - 1], e[q - 1] - e[0]))
        }
        None => {
            let mut best = (0usize, f64::NEG_INFINITY);
            for q in 1..=opts.q_max {
                if e.len() < q + 1 {
                    break;
                }
                let gap = e[q] - e[q - 1];
                let s = if q == 1 {
                    if e.len() >= 3 {
                        ratio(gap, e[2] - e[1])
                    } else {
                        ratio(gap, 0.0)
                    }
                } else {
                    ratio(gap, e[q - 1] - e[0])
                };
                if s > best.1 {
                    best = (q, s);
                }
            }
            if best.0 == 0 {
                return invalid("multiplet detection needs at least two eigenvalues");
            }
            best
        }
    };
    let gap = e[q] - e[q - 1];
    let floor = DEGENERACY_TOL * e[q].abs().max(e[0].abs()).max(1.0);
    if !(score >= opts.ratio_threshold) || gap <= floor {
        return Err(Error::NoGappedMultiplet(format!(
            "best candidate q={q} has gap {gap:.3e} and ratio {score:.3e} below threshold {}; lowest levels {:?}",
            opts.ratio_threshold,
            &e[..e.len().min(q + 3)]
        )));
    }
    Ok(GroundMultiplet {
        q,
        energies: e[..q].to_vec(),
        frame: eig.vectors.subcols(0, q).to_owned(),
        delta_e: e[q - 1] - e[0],
        gap,
    })
}

/// Rank-q spectral projector kept as its frame.
#[derive(Clone, Debug)]
pub struct Projector {
    pub frame: Mat<C64>,
}

impl Projector {
    pub fn to_dense(&self) -> Mat<C64> {
        &self.frame * self.frame.adjoint()
    }

    pub fn trace(&self) -> f64 {
        let mut t = 0.0;
        for j in 0..self.frame.ncols() {
            for i in 0..self.frame.nrows() {
                t += self.frame[(i, j)].norm_sqr();
            }
        }
        t
    }
}

pub fn projector(m: &GroundMultiplet) -> Projector {
    Projector {
        frame: m.frame.clone(),
    }
}

/// ω0(A) = (1/q) Σ_m <Φ_0m|A|Φ_0m>.
pub fn multiplet_expectation(a: &dyn LinearOp, m: &GroundMultiplet) -> Result<C64> {
    if a.dim() != m.dim() {
        return invalid("operator and multiplet dimensions differ");
    }
    let av = a.apply_block(m.frame.as_ref());
    let mut s = C64::new(0.0, 0.0);
    for j in 0..m.q {
        for i in 0..m.dim() {
            s += m.frame[(i, j)].conj() * av[(i, j)];
        }
    }
    Ok(s / m.q as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(values: &[f64]) -> EigenDecomposition {
        let n = values.len();
        EigenDecomposition {
            values: values.to_vec(),
            vectors: Mat::identity(n, n),
            full: true,
        }
    }

    #[test]
    fn hinted_triplet() {
        let e = fake(&[0.0, 1e-9, 1e-9, 0.8, 0.9, 1.0]);
        let m = detect_multiplet(&e, &DetectOptions::with_hint(3)).unwrap();
        assert_eq!(m.q, 3);
        assert!((m.gap - 0.8).abs() < 1e-8);
    }

    #[test]
    fn unique_ground_state() {
        let e = fake(&[0.0, 1.0, 1.01, 1.02, 1.05]);
        let m = detect_multiplet(&e, &DetectOptions::default()).unwrap();
        assert_eq!(m.q, 1);
        assert_eq!(m.gap, 1.0);
    }

    #[test]
    fn auto_finds_quasi_degenerate_triplet() {
        let e = fake(&[0.0, 2e-5, 1e-4, 0.6, 0.62, 0.7, 0.71, 0.75, 0.8, 0.85, 0.9]);
        let m = detect_multiplet(&e, &DetectOptions::default()).unwrap();
        assert_eq!(m.q, 3);
    }

    #[test]
    fn round_off_gap_is_a_degeneracy() {
        let e = fake(&[-6.0, -6.0 + 3e-15, -6.0 + 4e-15, -5.0]);
        assert!(matches!(
            detect_multiplet(&e, &DetectOptions::with_hint(1)),
            Err(Error::NoGappedMultiplet(_))
        ));
        assert_eq!(detect_multiplet(&e, &DetectOptions::with_hint(3)).unwrap().q, 3);
    }

    #[test]
    fn evenly_spaced_fails() {
        let e = fake(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]);
        assert!(matches!(
            detect_multiplet(&e, &DetectOptions::default()),
            Err(Error::NoGappedMultiplet(_))
        ));
    }
}
