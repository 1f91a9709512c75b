use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::*;
use super::validate::validate;
use crate::error::{Error, Result};
use crate::hall::flux::{CACHE_SPOT_TOL, INTEGRALITY_TOL, SINGULAR_LINK_FLOOR};
use crate::hall::kubo::{GAP_FLOOR, IMAGINARY_RESIDUE_TOL};
use crate::hall::time_domain::ETA_T_WARNING;
use crate::hall::*;
use crate::lattice::{CutFunction, Dir, LatticeSpec, Region};
use crate::manybody::hopping::HOPPING_HERMITIAN_TOL;
use crate::manybody::operator::HERMITIAN_TOL;
use crate::manybody::{
    build_hamiltonian, number_operator, region_charge, HamiltonianSpec, HoppingSet, InteractionSet,
};
use crate::observables::locality::{DEFAULT_STEPS_PER_UNIT, MIN_QUADRATURE_TOL};
use crate::observables::norm::NORM_TOL;
use crate::observables::{
    charge_current, commutator_growth, corr, restricted_evolution_gap, windowed_current,
};
use crate::spectra::multiplet::DEGENERACY_TOL;
use crate::spectra::{
    detect_multiplet, eigensolve, multiplet_expectation, EigenCache, EigenMode, GroundMultiplet,
};

/// Agreement required between the Kubo sum and the other two routes.
pub const ROUTE_TOL: f64 = 1e-6;

pub struct RunOutcome {
    pub report: Report,
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

impl RunOutcome {
    /// Err with the first failed bound check, if any.
    pub fn check(&self) -> Result<()> {
        match self.report.failed_checks().into_iter().next() {
            None => Ok(()),
            Some((name, lhs, rhs)) => Err(Error::Tolerance {
                check: name,
                value: lhs,
                tolerance: rhs,
            }),
        }
    }
}

struct Stages(Vec<Stage>);

impl Stages {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let r = f();
        self.0.push(Stage {
            name: name.into(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        r
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Validates, executes and persists one experiment: manifest.json first, then
/// report.json and the CSV tables.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let diags = validate(cfg);
    if diags.has_errors() {
        return Err(Error::Config(diags.summary()));
    }
    let spec = cfg.build_model()?;
    let workers = cfg
        .output
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    faer::set_global_parallelism(faer::Par::Seq);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Resource(format!("worker pool: {e}")))?;
    let cache = cfg.output.cache.then(|| {
        EigenCache::new(cfg.output.cache_dir.as_ref().map(PathBuf::from).unwrap_or_else(EigenCache::default_root))
    });

    let mut stages = Stages(Vec::new());
    let (report, spot_checks) = pool.install(|| execute(cfg, &spec, cache.as_ref(), &mut stages))?;

    let manifest = RunManifest {
        config_sha256: hex_digest(cfg.canonical()?.as_bytes()),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        kind: cfg.experiment.kind,
        workers,
        stages: stages.0,
        cache: CacheLedger {
            enabled: cache.is_some(),
            root: cache.as_ref().map(|c| c.root().display().to_string()),
            hits: cache.as_ref().map_or(0, |c| c.hits()),
            misses: cache.as_ref().map_or(0, |c| c.misses()),
            spot_checks,
        },
        tolerances: tolerances(cfg),
    };
    let out_dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&out_dir)?;
    let stale = out_dir.join("error.json");
    if stale.exists() {
        std::fs::remove_file(stale)?;
    }
    std::fs::write(out_dir.join("manifest.json"), to_json(&manifest)?)?;
    std::fs::write(out_dir.join("report.json"), to_json(&report)?)?;
    let mut files = vec!["manifest.json".to_string(), "report.json".to_string()];
    files.extend(emit_plotdata(&report, &out_dir)?);
    Ok(RunOutcome {
        report,
        manifest,
        out_dir,
        files,
    })
}

#[derive(Serialize)]
struct ErrorPayload<'a> {
    schema_version: u32,
    kind: &'a str,
    exit_code: i32,
    message: String,
}

/// Machine-readable error document.
pub fn error_json(err: &Error) -> String {
    to_json(&ErrorPayload {
        schema_version: SCHEMA_VERSION,
        kind: err.kind(),
        exit_code: err.exit_code(),
        message: err.to_string(),
    })
    .unwrap_or_else(|_| format!("{{\"kind\":\"{}\"}}\n", err.kind()))
}

/// Writes error.json into `dir`, ignoring failures to do so.
pub fn write_error(dir: &Path, err: &Error) {
    let _ = std::fs::create_dir_all(dir);
    let _ = std::fs::write(dir.join("error.json"), error_json(err));
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn tolerances(cfg: &ExperimentConfig) -> BTreeMap<String, f64> {
    let s = cfg.solver_options();
    let e = &cfg.experiment;
    [
        ("route_agreement", ROUTE_TOL),
        ("integrality", INTEGRALITY_TOL),
        ("singular_link_floor", SINGULAR_LINK_FLOOR),
        ("cache_spot_check", CACHE_SPOT_TOL),
        ("kubo_imaginary_residue", IMAGINARY_RESIDUE_TOL),
        ("gap_floor", GAP_FLOOR),
        ("operator_hermiticity", HERMITIAN_TOL),
        ("hopping_hermiticity", HOPPING_HERMITIAN_TOL),
        ("spectral_norm_power_iteration", NORM_TOL),
        ("krylov_residual_relative", s.tol),
        ("multiplet_ratio_threshold", e.ratio_threshold),
        ("multiplet_degeneracy", DEGENERACY_TOL),
        ("finite_difference_step", e.fd_step),
        ("eta_t_warning", ETA_T_WARNING),
        ("locality_quadrature_floor", MIN_QUADRATURE_TOL),
        ("locality_absolute_slack", LOCALITY_SLACK),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Absolute slack on the pointwise locality comparisons.
const LOCALITY_SLACK: f64 = 1e-12;

fn summary(m: &GroundMultiplet) -> MultipletSummary {
    MultipletSummary {
        q: m.q,
        energies: m.energies.clone(),
        delta_e: m.delta_e,
        gap: m.gap,
    }
}

fn execute(
    cfg: &ExperimentConfig,
    spec: &HamiltonianSpec,
    cache: Option<&EigenCache>,
    stages: &mut Stages,
) -> Result<(Report, usize)> {
    let e = &cfg.experiment;
    let family = TwistFamily::new(spec, cfg.cut())?.with_gauge_moves(e.gauge_moves);
    let basis = spec.basis()?;
    let model = ModelSummary {
        preset: cfg.model.preset.clone(),
        l1: spec.lattice.l1,
        l2: spec.lattice.l2,
        n_particles: spec.n_particles,
        dim: basis.dim(),
    };
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        kind: e.kind,
        model,
        spectrum: None,
        chern: None,
        routes: None,
        gap_scan: None,
        locality: None,
        corr_decay: None,
        warnings: Vec::new(),
    };
    let settings = |full: bool| NodeSettings {
        solver: cfg.solver_options(),
        detect: cfg.detect_options(),
        full,
    };
    let mut spot = 0;
    match e.kind {
        ExperimentKind::Spectrum => {
            let full = basis.dim() <= cfg.solver.dense_threshold;
            let solver = NodeSolver::new(&family, settings(full), cache)?;
            let points = stages.time("spectrum", || {
                e.phi
                    .iter()
                    .map(|&phi| {
                        let eig = solver.eigen(phi, None, false)?;
                        let (multiplet, failure) = match detect_multiplet(&eig, &solver.settings.detect) {
                            Ok(m) => (Some(summary(&m)), None),
                            Err(Error::NoGappedMultiplet(msg)) => (None, Some(msg)),
                            Err(err) => return Err(err),
                        };
                        let keep = e.levels.unwrap_or(eig.values.len()).min(eig.values.len());
                        Ok(SpectrumPoint {
                            phi,
                            values: eig.values[..keep].to_vec(),
                            multiplet,
                            detection_failure: failure,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            report.spectrum = Some(points);
        }
        ExperimentKind::Chern => {
            let st = settings(e.kubo_average);
            let solver = NodeSolver::new(&family, st.clone(), cache)?;
            let opts = FluxGridOptions {
                n: e.grid,
                refine_to: (e.refine_to > 0).then_some(e.refine_to),
                kubo_average: e.kubo_average,
                mixing_seed: e.mixing_seed,
                ..Default::default()
            };
            let fa = stages.time("flux_average", || average_over_flux(&solver, &opts))?;
            spot += solver.spot_checks();
            let deformation = if e.alphas.is_empty() && e.deformed_cuts.is_empty() {
                None
            } else {
                let cuts = e
                    .deformed_cuts
                    .iter()
                    .map(|c| {
                        CutFunction::deformed(
                            &spec.lattice,
                            Dir::from_number(c.dir)?,
                            c.k as i64,
                            c.anchor,
                            c.r0,
                            c.values.iter().copied().collect(),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let site = e.deform_site.unwrap_or(0);
                Some(stages.time("deformation", || {
                    deformation_invariance(&family, &e.alphas, site, &cuts, &st, &opts, cache)
                })?)
            };
            let mut checks = vec![BoundCheck::new("integrality_residual", fa.residual, INTEGRALITY_TOL)];
            if let Some(d) = &deformation {
                let mismatched = d.entries.iter().filter(|x| !x.pass).count();
                checks.push(BoundCheck::new("deformation_invariance_mismatches", mismatched as f64, 0.0));
            }
            let conductance = ConductanceReport {
                sigma_kubo: fa.kubo_average,
                sigma_trace: None,
                sigma_time: None,
                p: Some(fa.p),
                q: Some(fa.q),
                sigma_averaged: Some(fa.sigma_averaged),
                bound_checks: checks,
                grid: Some(GridInfo {
                    size: fa.n,
                    refined: fa.refined,
                }),
                persistent_current: None,
                warnings: fa.refinement_reason.iter().cloned().collect(),
            };
            report.chern = Some(ChernSection {
                conductance,
                flux: fa,
                deformation,
            });
        }
        ExperimentKind::KuboVsTime => {
            let solver = NodeSolver::new(&family, settings(true), cache)?;
            let points = stages.time("routes", || {
                e.phi.iter().map(|&phi| route_point(cfg, spec, &family, &solver, phi)).collect::<Result<Vec<_>>>()
            })?;
            spot += solver.spot_checks();
            for w in points.iter().flat_map(|p| &p.conductance.warnings) {
                if !report.warnings.contains(w) {
                    report.warnings.push(w.clone());
                }
            }
            report.routes = Some(points);
        }
        ExperimentKind::GapScan => {
            let solver = NodeSolver::new(&family, settings(false), cache)?;
            let scan = stages.time("gap_scan", || gap_scan(&solver, e.grid))?;
            spot += solver.spot_checks();
            if !scan.q_constant {
                report.warnings.push("multiplet size q changes across the flux grid".into());
            }
            if scan.min_gap.map_or(true, |g| g <= 0.0) {
                report.warnings.push("no positive gap at some flux node".into());
            }
            report.gap_scan = Some(scan);
        }
        ExperimentKind::Locality => {
            let solver = NodeSolver::new(&family, settings(true), cache)?;
            let section = stages.time("locality", || locality(cfg, spec, &solver))?;
            spot += solver.spot_checks();
            report.locality = Some(section);
        }
        ExperimentKind::CorrDecay => {
            let solver = NodeSolver::new(&family, settings(true), cache)?;
            let section = stages.time("corr_decay", || corr_decay(cfg, &solver))?;
            spot += solver.spot_checks();
            if !section.monotone {
                report.warnings.push("correlations are not monotone in distance".into());
            }
            report.corr_decay = Some(section);
        }
    }
    Ok((report, spot))
}

fn route_point(
    cfg: &ExperimentConfig,
    spec: &HamiltonianSpec,
    family: &TwistFamily,
    solver: &NodeSolver<'_>,
    phi: [f64; 2],
) -> Result<RoutePoint> {
    let e = &cfg.experiment;
    let basis = &solver.basis;
    let eig = solver.eigen(phi, None, false)?;
    let m = detect_multiplet(&eig, &solver.settings.detect)?;
    let [j1, j2] = family.currents(phi, basis)?;
    let sigma_kubo = kubo_sum(&j1, &j2, &m, &eig)?;
    let swapped = kubo_sum(&j2, &j1, &m, &eig)?;
    let trace = projector_trace(&|p| solver.multiplet(p), phi, e.fd_step)?;

    let h = family.hamiltonian(phi, basis)?;
    let hs = family.hoppings_at(phi)?;
    let anchor = e.anchor.unwrap_or_else(|| family.effective_k());
    let j_window = windowed_current(&hs, anchor[0], anchor[1], e.window, basis)?;
    let region = Region::new(&spec.lattice, anchor, e.region)?;
    let chi = region_charge(&region, &spec.lattice, basis);
    let sigma_kubo_window = kubo_sum(&j_window, &charge_current(&h, &chi), &m, &eig)?;
    let limit = time_domain(&j_window, &chi, &h, &TimeDomainParams::limit(e.window, e.region, anchor), &m, &eig)?;

    let mut checks = vec![
        BoundCheck::new("kubo_antisymmetry", (sigma_kubo + swapped).abs(), 0.0),
        BoundCheck::new("kubo_vs_projector_trace", (sigma_kubo - trace.sigma).abs(), ROUTE_TOL),
        BoundCheck::new("time_limit_vs_kubo_window", (limit.sigma - sigma_kubo_window).abs(), ROUTE_TOL),
    ];
    let mut table = Vec::new();
    let mut warnings = Vec::new();
    for &eta in &e.eta {
        for &t in &e.t_switch {
            let params = TimeDomainParams {
                eta,
                t,
                window: e.window,
                region: e.region,
                anchor,
            };
            let r = time_domain(&j_window, &chi, &h, &params, &m, &eig)?;
            let deviation = (r.sigma - limit.sigma).abs();
            let bound = adiabatic_bound(r.delta_e, eta, t, r.norm_j_window, r.norm_j_gamma);
            let i_cor = r.i_cor[0].hypot(r.i_cor[1]);
            checks.push(BoundCheck::new(format!("adiabatic eta={eta} T={t}"), deviation, bound));
            checks.push(BoundCheck::new(format!("i_cor eta={eta} T={t}"), i_cor, r.i_cor_bound));
            if let Some(w) = &r.warning {
                warnings.push(w.clone());
            }
            table.push(TimeRow {
                eta,
                t,
                sigma: r.sigma,
                deviation,
                bound,
                i_cor,
                i_cor_bound: r.i_cor_bound,
                warning: r.warning,
            });
        }
    }
    let persistent = multiplet_expectation(&j1, &m)?.re;
    Ok(RoutePoint {
        phi,
        multiplet: summary(&m),
        conductance: ConductanceReport {
            sigma_kubo: Some(sigma_kubo),
            sigma_trace: Some(trace.sigma),
            sigma_time: Some(limit.sigma),
            p: None,
            q: Some(m.q),
            sigma_averaged: None,
            bound_checks: checks,
            grid: None,
            persistent_current: Some(persistent),
            warnings,
        },
        sigma_kubo_window,
        time_limit: limit,
        time_table: table,
    })
}

/// Hop-graph distance between sites; the periodic lattice distance for
/// sites the bonds never connect.
pub fn bond_distances(h: &HoppingSet, source: usize) -> Vec<f64> {
    let lat = h.lattice();
    let n = lat.n_sites();
    let mut adj = vec![Vec::new(); n];
    for b in h.bonds() {
        if b.amp.norm() > 0.0 && b.to != b.from {
            adj[b.from].push(b.to);
            adj[b.to].push(b.from);
        }
    }
    let mut dist = vec![usize::MAX; n];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    (0..n)
        .map(|y| {
            if dist[y] == usize::MAX {
                lat.periodic_distance(lat.site(source), lat.site(y)) as f64
            } else {
                dist[y] as f64
            }
        })
        .collect()
}

/// Keeps only the bonds and interaction terms entirely inside `omega`.
pub fn restrict(spec: &HamiltonianSpec, omega: &[usize]) -> Result<(HoppingSet, InteractionSet)> {
    let inside = |s: usize| omega.contains(&s);
    let bonds = spec.hoppings.bonds().iter().filter(|b| inside(b.to) && inside(b.from)).copied().collect();
    let hs = HoppingSet::new(spec.lattice, spec.hoppings.range(), bonds)?;
    let terms = spec.interactions.terms().iter().filter(|t| t.sites.iter().all(|&s| inside(s))).cloned().collect();
    let lat: &LatticeSpec = &spec.lattice;
    Ok((hs, InteractionSet::new(lat, lat.l1.max(lat.l2), terms)?))
}

fn locality(cfg: &ExperimentConfig, spec: &HamiltonianSpec, solver: &NodeSolver<'_>) -> Result<LocalitySection> {
    let e = &cfg.experiment;
    let basis = &solver.basis;
    let x = e.observable_site.unwrap_or(0);
    let phi = e.phi.first().copied().unwrap_or([0.0, 0.0]);
    let eig = solver.eigen(phi, None, false)?;
    let hs = solver.family.hoppings_at(phi)?;
    let h = build_hamiltonian(&hs, &spec.interactions, basis)?;
    let restricted_spec = HamiltonianSpec { hoppings: hs.clone(), ..spec.clone() };
    let (hs_o, int_o) = restrict(&restricted_spec, &e.omega)?;
    let h_omega = build_hamiltonian(&hs_o, &int_o, basis)?;
    let eig_omega = eigensolve(&h_omega, EigenMode::Full, &cfg.solver_options())?;
    let h_diff = h.sub(&h_omega)?.to_dense();
    let a = number_operator(x, basis).to_dense();
    let steps = (e.samples - 1) as f64;
    let t_grid: Vec<f64> = (0..e.samples).map(|i| e.t_max * i as f64 / steps).collect();
    let restricted = restricted_evolution_gap(&a, &[x], &e.omega, &eig, &eig_omega, &h_diff, &t_grid, DEFAULT_STEPS_PER_UNIT)?;

    let source = e.source.unwrap_or(x);
    let dist = bond_distances(&hs, source);
    let a_src = number_operator(source, basis).to_dense();
    let pairs: Vec<_> = e
        .probes
        .iter()
        .map(|&y| (dist[y], a_src.clone(), number_operator(y, basis).to_dense()))
        .collect();
    let growth = commutator_growth(&pairs, &eig, &t_grid)?;
    let zero = growth.samples.iter().filter(|s| s.t == 0.0).all(|s| s.norm <= LOCALITY_SLACK);
    let bounded = growth.samples.iter().all(|s| s.norm <= s.bound + LOCALITY_SLACK);
    Ok(LocalitySection {
        observable_site: x,
        omega: e.omega.clone(),
        restricted_pass: restricted.iter().all(|s| s.pass),
        restricted,
        growth,
        growth_zero_at_origin: zero,
        growth_bounded: bounded,
    })
}

/// Least-squares line y = a + b x with its R².
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (a, b, if sst > 0.0 { 1.0 - sse / sst } else { 1.0 })
}

fn corr_decay(cfg: &ExperimentConfig, solver: &NodeSolver<'_>) -> Result<CorrDecay> {
    let e = &cfg.experiment;
    let basis = &solver.basis;
    let phi = e.phi.first().copied().unwrap_or([0.0, 0.0]);
    let eig = solver.eigen(phi, None, false)?;
    let m = detect_multiplet(&eig, &solver.settings.detect)?;
    let source = e.source.unwrap_or(0);
    let dist = bond_distances(&solver.family.hoppings_at(phi)?, source);
    let a = number_operator(source, basis);
    let mut rows = e
        .probes
        .iter()
        .map(|&y| {
            let z = corr(&a, &number_operator(y, basis), &m, &eig)?;
            Ok(CorrRow {
                site: y,
                distance: dist[y],
                re: z.re,
                im: z.im,
                abs: z.norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|p, q| p.distance.total_cmp(&q.distance));
    let monotone = rows.windows(2).all(|w| w[1].abs < w[0].abs);
    let xs: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.abs.ln()).collect();
    let (intercept, slope, r_squared) = linear_fit(&xs, &ys);
    Ok(CorrDecay {
        source,
        multiplet: summary(&m),
        rows,
        monotone,
        kappa: -slope,
        intercept,
        r_squared,
    })
}
