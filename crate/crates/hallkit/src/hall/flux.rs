use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kubo::kubo_sum;
use crate::error::{invalid, Error, Result};
use crate::lattice::{CutFunction, Dir, LatticeSpec};
use crate::manybody::hamiltonian::{assemble, build_hamiltonian, mask_weight};
use crate::manybody::{
    Bond, FockBasis, HamiltonianSpec, HoppingSet, InteractionSet, SparseOperator, TwistConfig,
};
use crate::spectra::cache::content_hash;
use crate::spectra::{
    detect_multiplet, eigensolve_from, DetectOptions, EigenCache, EigenDecomposition, EigenMode,
    GroundMultiplet, SolverOptions,
};
use crate::C64;

pub const DEFAULT_GRID: usize = 12;
pub const DEFAULT_REFINED_GRID: usize = 24;
pub const SINGULAR_LINK_FLOOR: f64 = 1e-8;
pub const INTEGRALITY_TOL: f64 = 1e-9;
/// Cached and fresh decompositions must agree to this on spot checks.
pub const CACHE_SPOT_TOL: f64 = 1e-12;
/// One grid node in this many is re-solved when served from the cache.
pub const CACHE_SPOT_STRIDE: usize = 16;

const DIRS: [Dir; 2] = [Dir::D1, Dir::D2];

/// H(φ1, φ2): step twists at lines k_j, optionally relocated by gauge moves and
/// conjugated by φ-linear potentials Σ_j φ_j D_j (the deformations).
#[derive(Clone, Debug)]
pub struct TwistFamily {
    hoppings: HoppingSet,
    interactions: InteractionSet,
    n_particles: usize,
    k: [usize; 2],
    gauge_moves: [usize; 2],
    deform: [Vec<f64>; 2],
}

impl TwistFamily {
    pub fn new(spec: &HamiltonianSpec, k: [usize; 2]) -> Result<Self> {
        let lat = spec.lattice;
        TwistConfig::pair([0.0, 0.0], k).validate(&lat)?;
        Ok(TwistFamily {
            hoppings: spec.hoppings.clone(),
            interactions: spec.interactions.clone(),
            n_particles: spec.n_particles,
            k,
            gauge_moves: [0, 0],
            deform: [vec![0.0; lat.n_sites()], vec![0.0; lat.n_sites()]],
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        self.hoppings.lattice()
    }

    pub fn interactions(&self) -> &InteractionSet {
        &self.interactions
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn basis(&self) -> Result<FockBasis> {
        FockBasis::new(self.lattice(), self.n_particles)
    }

    /// Adds the α n_x deformation of the direction-1 twist:
    /// P(φ, α) = e^{-iαφ1 n_x} P(φ) e^{iαφ1 n_x}.
    pub fn with_alpha(mut self, alpha: f64, site: usize) -> Result<Self> {
        if site >= self.lattice().n_sites() {
            return invalid(format!("deformation site {site} outside lattice"));
        }
        if !alpha.is_finite() {
            return invalid("deformation strength must be finite");
        }
        self.deform[0][site] += alpha;
        Ok(self)
    }

    /// Replaces the step twist along the cut's direction by the deformed cut.
    pub fn with_cut(mut self, cut: &CutFunction) -> Result<Self> {
        let lat = *self.lattice();
        let j = cut.dir.axis();
        if cut.k >= lat.extent(cut.dir) {
            return invalid(format!("cut position {} outside lattice", cut.k));
        }
        self.k[j] = cut.k;
        for (d, dev) in self.deform[j].iter_mut().zip(cut.deviation_from_step(&lat)) {
            *d += dev;
        }
        Ok(self)
    }

    /// Moves each twist line back by `moves[j]` columns through successive gauge moves.
    pub fn with_gauge_moves(mut self, moves: [usize; 2]) -> Self {
        self.gauge_moves = moves;
        self
    }

    /// Line positions after the gauge moves.
    pub fn effective_k(&self) -> [usize; 2] {
        let lat = self.lattice();
        [0, 1].map(|j| lat.wrap_coord(DIRS[j], self.k[j] as i64 - self.gauge_moves[j] as i64))
    }

    pub fn is_deformed(&self) -> bool {
        self.deform.iter().any(|d| d.iter().any(|&x| x != 0.0))
    }

    pub fn hoppings_at(&self, phi: [f64; 2]) -> Result<HoppingSet> {
        let lat = *self.lattice();
        let mut hs = self.hoppings.apply_twist(&TwistConfig::pair(phi, self.k))?;
        for j in 0..2 {
            for step in 0..self.gauge_moves[j] {
                let line = lat.wrap_coord(DIRS[j], self.k[j] as i64 - step as i64);
                hs = hs.gauge_move(DIRS[j], line, phi[j]);
            }
        }
        if self.is_deformed() {
            let f: Vec<f64> = (0..lat.n_sites())
                .map(|x| phi[0] * self.deform[0][x] + phi[1] * self.deform[1][x])
                .collect();
            hs = hs.conjugate_by_potential(&f);
        }
        Ok(hs)
    }

    pub fn hamiltonian(&self, phi: [f64; 2], basis: &FockBasis) -> Result<SparseOperator> {
        build_hamiltonian(&self.hoppings_at(phi)?, &self.interactions, basis)
    }

    /// The φ_j coefficient of every bond phase: amp(φ) = amp(0) e^{i Σ_j φ_j c_j}.
    fn phase_coefficients(&self, b: &Bond) -> [f64; 2] {
        let lat = *self.lattice();
        [0, 1].map(|j| {
            let s = self.hoppings.crossings(b, DIRS[j], self.k[j]) as f64;
            let moved = |x: usize| {
                let c = lat.site(x)[j] as i64;
                (1..=self.gauge_moves[j] as i64)
                    .filter(|m| lat.wrap_coord(DIRS[j], self.k[j] as i64 - m) as i64 == c)
                    .count() as f64
            };
            let d = &self.deform[j];
            s - (moved(b.to) - moved(b.from)) - (d[b.to] - d[b.from])
        })
    }

    /// ∂H/∂φ_j at φ, the current conjugate to each twist.
    pub fn currents(&self, phi: [f64; 2], basis: &FockBasis) -> Result<[SparseOperator; 2]> {
        let hs = self.hoppings_at(phi)?;
        let coeffs: Vec<[f64; 2]> = self.hoppings.bonds().iter().map(|b| self.phase_coefficients(b)).collect();
        let build = |j: usize| -> Result<SparseOperator> {
            let bonds: Vec<Bond> = hs
                .bonds()
                .iter()
                .zip(&coeffs)
                .filter(|(_, c)| c[j] != 0.0)
                .map(|(b, c)| Bond {
                    amp: b.amp * C64::new(0.0, c[j]),
                    ..*b
                })
                .collect();
            assemble(&bonds, &|_| 0.0, basis, true)
        };
        Ok([build(0)?, build(1)?])
    }

    /// Per-basis-state phases of e^{-i2π D_j}, mapping frames at φ_j = 0 to φ_j = 2π.
    /// `None` when the map is the identity.
    pub fn boundary_phases(&self, j: usize, basis: &FockBasis) -> Option<Vec<C64>> {
        let d = &self.deform[j];
        if d.iter().all(|&x| x == 0.0) {
            return None;
        }
        Some(
            basis
                .masks()
                .iter()
                .map(|&m| C64::from_polar(1.0, -2.0 * PI * mask_weight(m, d)))
                .collect(),
        )
    }
}

/// How each grid node is solved.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct NodeSettings {
    pub solver: SolverOptions,
    pub detect: DetectOptions,
    /// Full spectrum (needed for Kubo averages) instead of the lowest levels.
    pub full: bool,
}

/// Solves the family at single flux points, with optional caching.
pub struct NodeSolver<'a> {
    pub family: &'a TwistFamily,
    pub basis: FockBasis,
    pub settings: NodeSettings,
    pub cache: Option<&'a EigenCache>,
    spot_checks: AtomicUsize,
}

impl<'a> NodeSolver<'a> {
    pub fn new(family: &'a TwistFamily, settings: NodeSettings, cache: Option<&'a EigenCache>) -> Result<Self> {
        let basis = family.basis()?;
        if settings.full && basis.dim() > settings.solver.dense_threshold {
            return Err(Error::Resource(format!(
                "full spectra of dimension {} exceed dense_threshold {}",
                basis.dim(),
                settings.solver.dense_threshold
            )));
        }
        Ok(NodeSolver {
            family,
            basis,
            settings,
            cache,
            spot_checks: AtomicUsize::new(0),
        })
    }

    pub fn spot_checks(&self) -> usize {
        self.spot_checks.load(Ordering::Relaxed)
    }

    pub fn mode(&self) -> EigenMode {
        if self.settings.full {
            EigenMode::Full
        } else {
            EigenMode::Lowest(self.settings.detect.levels_needed().min(self.basis.dim()))
        }
    }

    fn fresh(&self, h: &SparseOperator, start: Option<MatRef<'_, C64>>) -> Result<EigenDecomposition> {
        eigensolve_from(h, self.mode(), &self.settings.solver, start)
    }

    /// Eigendecomposition at φ. `spot_check` forces a re-solve on a cache hit.
    /// With a cache attached the warm start is ignored, so that a re-solve
    /// reproduces the stored decomposition instead of another converged one.
    pub fn eigen(
        &self,
        phi: [f64; 2],
        start: Option<MatRef<'_, C64>>,
        spot_check: bool,
    ) -> Result<EigenDecomposition> {
        let hs = self.family.hoppings_at(phi)?;
        let h = build_hamiltonian(&hs, &self.family.interactions, &self.basis)?;
        let Some(cache) = self.cache else {
            return self.fresh(&h, start);
        };
        let tag = serde_json::to_string(&self.settings.solver)?;
        let key = content_hash(
            self.family.lattice(),
            &hs,
            &self.family.interactions,
            self.family.n_particles,
            self.mode(),
            &tag,
        );
        match cache.get(&key)? {
            Some(eig) => {
                if spot_check {
                    self.spot_checks.fetch_add(1, Ordering::Relaxed);
                    let fresh = self.fresh(&h, None)?;
                    let dev = decomposition_distance(&eig, &fresh);
                    if dev > CACHE_SPOT_TOL {
                        return Err(Error::Tolerance {
                            check: format!("cached spectrum at phi = ({:.6}, {:.6}) disagrees with re-solve", phi[0], phi[1]),
                            value: dev,
                            tolerance: CACHE_SPOT_TOL,
                        });
                    }
                }
                Ok(eig)
            }
            None => {
                let eig = self.fresh(&h, None)?;
                cache.put(&key, &eig)?;
                Ok(eig)
            }
        }
    }

    pub fn multiplet(&self, phi: [f64; 2]) -> Result<GroundMultiplet> {
        let eig = self.eigen(phi, None, false)?;
        detect_multiplet(&eig, &self.settings.detect)
    }

    /// Solves every node of an n×n grid. Rows of constant φ2 run in parallel;
    /// along a row each uncached solve starts from the previous node's vectors.
    fn sweep(&self, n: usize) -> Result<Vec<EigenDecomposition>> {
        let rows: Vec<Vec<EigenDecomposition>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut row: Vec<EigenDecomposition> = Vec::with_capacity(n);
                for i in 0..n {
                    let phi = grid_point(n, i, j);
                    let start = if self.settings.full { None } else { row.last().map(|e| e.vectors.as_ref()) };
                    let eig = self.eigen(phi, start, (i + n * j) % CACHE_SPOT_STRIDE == 0)?;
                    row.push(eig);
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        // node (i, j) at index i + n j
        Ok(rows.into_iter().flatten().collect())
    }
}

/// max(|ΔE|, subspace distance of matching eigenvectors).
fn decomposition_distance(a: &EigenDecomposition, b: &EigenDecomposition) -> f64 {
    if a.values.len() != b.values.len() || a.dim() != b.dim() {
        return f64::INFINITY;
    }
    let de = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let ov = a.vectors.adjoint() * &b.vectors;
    let resid = &b.vectors - &a.vectors * &ov;
    de.max(resid.norm_max())
}

pub fn grid_point(n: usize, i: usize, j: usize) -> [f64; 2] {
    [2.0 * PI * i as f64 / n as f64, 2.0 * PI * j as f64 / n as f64]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxGridOptions {
    pub n: usize,
    /// One-level refinement used when the coarse grid fails integrality or
    /// hits a singular link.
    pub refine_to: Option<usize>,
    pub singular_floor: f64,
    pub integrality_tol: f64,
    /// Also average the Kubo sum over the nodes (needs full spectra).
    pub kubo_average: bool,
    /// Right-multiplies every node frame by a seeded random q×q unitary.
    pub mixing_seed: Option<u64>,
}

impl Default for FluxGridOptions {
    fn default() -> Self {
        FluxGridOptions {
            n: DEFAULT_GRID,
            refine_to: Some(DEFAULT_REFINED_GRID),
            singular_floor: SINGULAR_LINK_FLOOR,
            integrality_tol: INTEGRALITY_TOL,
            kubo_average: false,
            mixing_seed: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxAverage {
    pub n: usize,
    pub refined: bool,
    pub p: i64,
    pub q: usize,
    /// (1/2π) Σ F before rounding.
    pub raw_chern: f64,
    pub residual: f64,
    /// p / (2π q)
    pub sigma_averaged: f64,
    /// Plaquette field F(i, j) ∈ (-π, π] at index i + n j, lower-left corner (i, j).
    pub field: Vec<f64>,
    pub min_link: f64,
    pub min_gap: f64,
    pub max_delta_e: f64,
    pub kubo_average: Option<f64>,
    /// kubo_average - p/(2πq)
    pub kubo_deviation: Option<f64>,
    /// Why the coarse grid was refined, if it was.
    pub refinement_reason: Option<String>,
    /// Run bookkeeping, kept out of serialized results.
    #[serde(skip)]
    pub cache_spot_checks: usize,
}

impl FluxAverage {
    /// (φ1, φ2, F) rows for plotting.
    pub fn curvature_rows(&self) -> Vec<[f64; 3]> {
        let n = self.n;
        (0..n * n)
            .map(|idx| {
                let (i, j) = (idx % n, idx / n);
                let p = grid_point(n, i, j);
                [p[0], p[1], self.field[idx]]
            })
            .collect()
    }
}

fn det(m: &Mat<C64>) -> C64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut d = C64::new(1.0, 0.0);
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[(x, c)].norm().total_cmp(&a[(y, c)].norm())).unwrap();
        if a[(piv, c)].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != c {
            for k in 0..n {
                let t = a[(c, k)];
                a[(c, k)] = a[(piv, k)];
                a[(piv, k)] = t;
            }
            d = -d;
        }
        d *= a[(c, c)];
        for r in c + 1..n {
            let f = a[(r, c)] / a[(c, c)];
            for k in c..n {
                let v = a[(c, k)];
                a[(r, k)] -= f * v;
            }
        }
    }
    d
}

/// Haar-like random unitary from Gram-Schmidt on a complex Gaussian-ish matrix.
fn random_unitary(q: usize, rng: &mut ChaCha8Rng) -> Mat<C64> {
    let mut u = Mat::<C64>::from_fn(q, q, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    for j in 0..q {
        for p in 0..j {
            let mut d = C64::new(0.0, 0.0);
            for i in 0..q {
                d += u[(i, p)].conj() * u[(i, j)];
            }
            for i in 0..q {
                let up = u[(i, p)];
                u[(i, j)] -= d * up;
            }
        }
        let nrm = (0..q).map(|i| u[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..q {
            u[(i, j)] /= C64::new(nrm, 0.0);
        }
    }
    u
}

fn apply_phases(frame: &Mat<C64>, phases: &[C64]) -> Mat<C64> {
    Mat::from_fn(frame.nrows(), frame.ncols(), |r, c| phases[r] * frame[(r, c)])
}

/// Averaged Hall conductance p/(2πq) from the overlap-determinant plaquette sum.
pub fn average_over_flux(solver: &NodeSolver<'_>, opts: &FluxGridOptions) -> Result<FluxAverage> {
    if opts.n < 2 {
        return invalid("flux grid needs at least 2x2 nodes");
    }
    match flux_grid(solver, opts, opts.n) {
        Err(Error::Tolerance { check, value, tolerance }) => match opts.refine_to {
            Some(r) if r > opts.n => {
                let mut out = flux_grid(solver, opts, r)?;
                out.refined = true;
                out.refinement_reason = Some(format!(
                    "{}x{} grid: {check} ({value:.3e} vs {tolerance:.1e})",
                    opts.n, opts.n
                ));
                Ok(out)
            }
            _ => Err(Error::Tolerance { check, value, tolerance }),
        },
        other => other,
    }
}

fn flux_grid(solver: &NodeSolver<'_>, opts: &FluxGridOptions, n: usize) -> Result<FluxAverage> {
    let eigs = solver.sweep(n)?;
    let multiplets: Vec<GroundMultiplet> = eigs
        .iter()
        .enumerate()
        .map(|(idx, e)| {
            detect_multiplet(e, &solver.settings.detect).map_err(|err| match err {
                Error::NoGappedMultiplet(msg) => {
                    let p = grid_point(n, idx % n, idx / n);
                    Error::NoGappedMultiplet(format!("at phi = ({:.6}, {:.6}): {msg}", p[0], p[1]))
                }
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let q = multiplets[0].q;
    if let Some((idx, m)) = multiplets.iter().enumerate().find(|(_, m)| m.q != q) {
        let p = grid_point(n, idx % n, idx / n);
        return Err(Error::NoGappedMultiplet(format!(
            "multiplet size changes across the flux grid: q = {q} at the origin, {} at ({:.6}, {:.6})",
            m.q, p[0], p[1]
        )));
    }
    let min_gap = multiplets.iter().map(|m| m.gap).fold(f64::INFINITY, f64::min);
    let max_delta_e = multiplets.iter().map(|m| m.delta_e).fold(0.0, f64::max);

    let mut frames: Vec<Mat<C64>> = multiplets.iter().map(|m| m.frame.clone()).collect();
    if let Some(seed) = opts.mixing_seed {
        for (idx, f) in frames.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            *f = &*f * random_unitary(q, &mut rng);
        }
    }
    let b1 = solver.family.boundary_phases(0, &solver.basis);
    let b2 = solver.family.boundary_phases(1, &solver.basis);
    // frame at node (i, j) for i, j in 0..=n; the far edges are transported copies
    let frame = |i: usize, j: usize| -> Mat<C64> {
        let mut f = frames[(i % n) + n * (j % n)].clone();
        if i == n {
            if let Some(b) = &b1 {
                f = apply_phases(&f, b);
            }
        }
        if j == n {
            if let Some(b) = &b2 {
                f = apply_phases(&f, b);
            }
        }
        f
    };
    let all: Vec<Mat<C64>> = (0..=n).flat_map(|j| (0..=n).map(move |i| (i, j))).map(|(i, j)| frame(i, j)).collect();
    let at = |i: usize, j: usize| &all[i + (n + 1) * j];
    let mut min_link = f64::INFINITY;
    let mut link = |a: &Mat<C64>, b: &Mat<C64>| -> C64 {
        let d = det(&(a.adjoint() * b));
        min_link = min_link.min(d.norm());
        if d.norm() == 0.0 {
            d
        } else {
            d / d.norm()
        }
    };
    // u1[i + n j] for j in 0..=n, u2[i + (n+1) j] for i in 0..=n
    let mut u1 = Vec::with_capacity(n * (n + 1));
    for j in 0..=n {
        for i in 0..n {
            u1.push(link(at(i, j), at(i + 1, j)));
        }
    }
    let mut u2 = Vec::with_capacity((n + 1) * n);
    for j in 0..n {
        for i in 0..=n {
            u2.push(link(at(i, j), at(i, j + 1)));
        }
    }
    if min_link < opts.singular_floor {
        return Err(Error::Tolerance {
            check: "link determinant below the singularity floor".into(),
            value: min_link,
            tolerance: opts.singular_floor,
        });
    }
    let mut field = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let ccw = u1[i + n * j] * u2[(i + 1) + (n + 1) * j] * u1[i + n * (j + 1)].conj() * u2[i + (n + 1) * j].conj();
            field[i + n * j] = ccw.conj().arg();
        }
    }
    let raw: f64 = field.iter().sum::<f64>() / (2.0 * PI);
    let p = raw.round();
    let residual = (raw - p).abs();
    if residual > opts.integrality_tol {
        return Err(Error::Tolerance {
            check: "plaquette sum is not an integer multiple of 2pi".into(),
            value: residual,
            tolerance: opts.integrality_tol,
        });
    }
    let p = p as i64;
    let sigma_averaged = p as f64 / (2.0 * PI * q as f64);
    let kubo_average = if opts.kubo_average {
        if !solver.settings.full {
            return invalid("Kubo averaging needs full spectra at every node");
        }
        let vals: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let phi = grid_point(n, idx % n, idx / n);
                let [j1, j2] = solver.family.currents(phi, &solver.basis)?;
                kubo_sum(&j1, &j2, &multiplets[idx], &eigs[idx])
            })
            .collect::<Result<_>>()?;
        Some(vals.iter().sum::<f64>() / (n * n) as f64)
    } else {
        None
    };
    Ok(FluxAverage {
        n,
        refined: false,
        p,
        q,
        raw_chern: raw,
        residual,
        sigma_averaged,
        field,
        min_link,
        min_gap,
        max_delta_e,
        kubo_deviation: kubo_average.map(|k| k - sigma_averaged),
        kubo_average,
        refinement_reason: None,
        cache_spot_checks: solver.spot_checks(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapNode {
    pub phi: [f64; 2],
    /// Detected multiplet size, `None` where detection failed.
    pub q: Option<usize>,
    /// E_q - E_{q-1} for the detected q.
    pub gap: Option<f64>,
    pub delta_e: Option<f64>,
    pub lowest: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapScan {
    pub n: usize,
    pub nodes: Vec<GapNode>,
    pub min_gap: Option<f64>,
    pub max_delta_e: Option<f64>,
    pub q_constant: bool,
}

/// Multiplet diagnostics on an n×n flux grid; failures are recorded, not raised.
pub fn gap_scan(solver: &NodeSolver<'_>, n: usize) -> Result<GapScan> {
    if n == 0 {
        return invalid("gap scan needs a positive grid size");
    }
    let eigs = solver.sweep(n)?;
    let nodes: Vec<GapNode> = eigs
        .iter()
        .enumerate()
        .map(|(idx, e)| {
            let m = detect_multiplet(e, &solver.settings.detect).ok();
            GapNode {
                phi: grid_point(n, idx % n, idx / n),
                q: m.as_ref().map(|m| m.q),
                gap: m.as_ref().map(|m| m.gap),
                delta_e: m.as_ref().map(|m| m.delta_e),
                lowest: e.values.iter().take(solver.settings.detect.levels_needed()).copied().collect(),
            }
        })
        .collect();
    let all_found = nodes.iter().all(|g| g.q.is_some());
    let q_constant = all_found && nodes.iter().all(|g| g.q == nodes[0].q);
    let min_gap = all_found.then(|| nodes.iter().filter_map(|g| g.gap).fold(f64::INFINITY, f64::min));
    let max_delta_e = all_found.then(|| nodes.iter().filter_map(|g| g.delta_e).fold(0.0, f64::max));
    Ok(GapScan {
        n,
        nodes,
        min_gap,
        max_delta_e,
        q_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{atomic_insulator, hofstadter, Flux};

    #[test]
    fn currents_are_phase_derivatives() {
        let spec = hofstadter(4, 3, Flux::new(1, 4).unwrap(), 1.0, 2).unwrap();
        let lat = spec.lattice;
        let cut = CutFunction::deformed(&lat, Dir::D1, 2, [2, 1], 3.0, [(lat.index([1, 1]), 0.4)].into_iter().collect())
            .unwrap();
        let fam = TwistFamily::new(&spec, [2, 1])
            .unwrap()
            .with_cut(&cut)
            .unwrap()
            .with_alpha(0.3, 5)
            .unwrap()
            .with_gauge_moves([1, 2]);
        let basis = fam.basis().unwrap();
        let phi = [0.7, -1.1];
        let [j1, j2] = fam.currents(phi, &basis).unwrap();
        let eps = 1e-6;
        for (j, cur) in [(0, &j1), (1, &j2)] {
            let mut p = phi;
            let mut m = phi;
            p[j] += eps;
            m[j] -= eps;
            let hp = fam.hamiltonian(p, &basis).unwrap();
            let hm = fam.hamiltonian(m, &basis).unwrap();
            let fd = hp.sub(&hm).unwrap().scale(C64::new(0.5 / eps, 0.0));
            let diff = fd.sub(cur).unwrap().max_abs();
            assert!(diff < 1e-8, "direction {j}: {diff}");
        }
    }

    #[test]
    fn gauge_moves_relocate_the_twist() {
        let spec = hofstadter(6, 3, Flux::new(1, 3).unwrap(), 1.0, 1).unwrap();
        let moved = TwistFamily::new(&spec, [4, 2]).unwrap().with_gauge_moves([3, 1]);
        let direct = TwistFamily::new(&spec, [1, 1]).unwrap();
        assert_eq!(moved.effective_k(), [1, 1]);
        let a = moved.hoppings_at([0.4, 2.2]).unwrap();
        let b = direct.hoppings_at([0.4, 2.2]).unwrap();
        assert!(a.max_difference(&b).unwrap() < 1e-12);
    }

    #[test]
    fn atomic_insulator_has_zero_chern() {
        let spec = atomic_insulator(2, 2, &[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        let fam = TwistFamily::new(&spec, [0, 0]).unwrap();
        let settings = NodeSettings {
            detect: DetectOptions::with_hint(1),
            full: true,
            ..Default::default()
        };
        let solver = NodeSolver::new(&fam, settings, None).unwrap();
        let opts = FluxGridOptions {
            n: 4,
            kubo_average: true,
            ..Default::default()
        };
        let r = average_over_flux(&solver, &opts).unwrap();
        assert_eq!(r.p, 0);
        assert!(r.kubo_average.unwrap().abs() < 1e-12);
    }

    #[test]
    fn determinant_small() {
        let m = Mat::from_fn(2, 2, |i, j| C64::new((i * 2 + j + 1) as f64, 0.0));
        assert!((det(&m) - C64::new(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(3, &mut rng);
        let e = u.adjoint() * &u - Mat::<C64>::identity(3, 3);
        assert!(e.norm_max() < 1e-14);
    }
}
