//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hallkit::hall::{NodeSettings, NodeSolver, TwistFamily};
use hallkit::harness::{self, ExperimentConfig, Report, RunOutcome};
use hallkit::manybody::number_operator;
use hallkit::models::{hofstadter_hubbard, Flux};
use hallkit::observables::{energy_filter, excitation_ratio, to_eigenbasis, FilterSpec};
use hallkit::spectra::{dense_eigh, detect_multiplet, DetectOptions};
use hallkit::{Result, C64};

struct Ctx {
    root: PathBuf,
}

impl Ctx {
    /// Parses a config and points its output and cache into the scratch root.
    fn config(&self, name: &str, text: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::parse(text, &[]).expect("acceptance config");
        cfg.output.dir = self.root.join(name).display().to_string();
        cfg.output.cache_dir = Some(self.root.join("cache").display().to_string());
        cfg
    }

    fn run(&self, name: &str, text: &str) -> Result<RunOutcome> {
        harness::run(&self.config(name, text))
    }
}

type Verdict = (bool, String);
type Criterion = (usize, &'static str, fn(&Ctx) -> Result<Verdict>);

fn chern_of(r: &Report) -> (i64, usize, f64, f64) {
    let c = r.chern.as_ref().expect("chern section");
    (c.flux.p, c.flux.q, c.flux.sigma_averaged, c.flux.residual)
}

const C1_CONFIG: &str = r#"
[model]
preset = "hofstadter"
l1 = 6
l2 = 3
flux = [1, 3]
n = 6

[experiment]
kind = "chern"
q_hint = 1
grid = 8
cut = [3, 1]

[output]
allow_odd = true
"#;

/// Lowest-band Chern number of the flux-1/3 Hofstadter model from the 3×3
/// Bloch Hamiltonian on an n×n mesh, by overlap phases around each cell.
fn band_chern_oracle(n: usize) -> f64 {
    let m = 3;
    let t = 1.0;
    let bloch = |k1: f64, k2: f64| {
        let mut h = Mat::<C64>::zeros(m, m);
        for b in 0..m {
            // direction 2: amplitude of c†_{x+e2} c_x is -t e^{-2πi x1/3}
            let theta = 2.0 * PI * b as f64 / m as f64;
            h[(b, b)] += C64::from_polar(-t, -theta + k2) + C64::from_polar(-t, theta - k2);
            // direction 1: c†_{x+e1} c_x, crossing into the next cell from b = m-1
            let a = (b + 1) % m;
            let cell = if b == m - 1 { 1.0 } else { 0.0 };
            let z = C64::from_polar(-t, k1 * cell);
            h[(a, b)] += z;
            h[(b, a)] += z.conj();
        }
        h
    };
    let u: Vec<Vec<C64>> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            let h = bloch(2.0 * PI * i as f64 / n as f64, 2.0 * PI * j as f64 / n as f64);
            let (_, v) = dense_eigh(h.as_ref()).unwrap();
            (0..m).map(|r| v[(r, 0)]).collect()
        })
        .collect();
    let at = |i: usize, j: usize| &u[(i % n) + n * (j % n)];
    let link = |a: &[C64], b: &[C64]| {
        let z: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        z / z.norm()
    };
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            let ccw = link(at(i, j), at(i + 1, j))
                * link(at(i + 1, j), at(i + 1, j + 1))
                * link(at(i + 1, j + 1), at(i, j + 1))
                * link(at(i, j + 1), at(i, j));
            total += ccw.conj().arg();
        }
    }
    total / (2.0 * PI)
}

fn c1(ctx: &Ctx) -> Result<Verdict> {
    let t0 = Instant::now();
    let out = ctx.run("c1", C1_CONFIG)?;
    let secs = t0.elapsed().as_secs_f64();
    let (p, q, sigma, residual) = chern_of(&out.report);
    let oracle = band_chern_oracle(64);
    let pass = p == 1 && q == 1 && residual <= 1e-9 && (oracle - 1.0).abs() < 1e-9;
    Ok((
        pass,
        format!(
            "p = {p}, q = {q}, residual {residual:.1e} (<= 1e-9), 2πσ̄ = {:.12}, 64x64 band oracle = {oracle:.12}, runtime {secs:.1}s (target < 120s)",
            2.0 * PI * sigma
        ),
    ))
}

fn c2(ctx: &Ctx) -> Result<Verdict> {
    let model = r#"
[model]
preset = "atomic_insulator"
l1 = 4
l2 = 4
n = 3
potentials = [0.3, -1.0, 0.8, 1.7, 2.2, -0.6, 1.1, 0.0, 2.9, 0.5, -1.4, 1.9, 0.7, 2.4, 1.3, 3.1]
"#;
    let chern = ctx.run("c2-chern", &format!("{model}\n[experiment]\nkind = \"chern\"\nq_hint = 1\ngrid = 6\n"))?;
    let routes = ctx.run(
        "c2-routes",
        &format!(
            "{model}\n[experiment]\nkind = \"kubo_vs_time\"\nq_hint = 1\ncut = [1, 1]\nphi = [[0.0, 0.0], [1.3, 4.1], [5.2, 2.7]]\n"
        ),
    )?;
    let (p, _, sigma, _) = chern_of(&chern.report);
    let mut worst: f64 = sigma.abs();
    for r in routes.report.routes.as_ref().unwrap() {
        let c = &r.conductance;
        for s in [c.sigma_kubo, c.sigma_trace, c.sigma_time].into_iter().flatten() {
            worst = worst.max(s.abs());
        }
    }
    Ok((p == 0 && worst <= 1e-10, format!("p = {p}, max |σ| over Kubo/trace/time/average = {worst:.1e} (<= 1e-10)")))
}

fn c3(ctx: &Ctx) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phis: Vec<String> = (0..5)
        .map(|_| format!("[{:.15}, {:.15}]", rng.gen::<f64>() * 2.0 * PI, rng.gen::<f64>() * 2.0 * PI))
        .collect();
    let text = format!(
        r#"
[model]
preset = "hofstadter_hubbard"
l1 = 4
l2 = 3
flux = [1, 4]
v_nn = 1.0
n = 2

[experiment]
kind = "kubo_vs_time"
cut = [2, 1]
window = 1
region = 1
phi = [{}]

[output]
allow_odd = true
"#,
        phis.join(", ")
    );
    let out = ctx.run("c3", &text)?;
    let (mut d_trace, mut d_time, mut d_plain): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut qs = Vec::new();
    for r in out.report.routes.as_ref().unwrap() {
        let c = &r.conductance;
        let k = c.sigma_kubo.unwrap();
        d_trace = d_trace.max((k - c.sigma_trace.unwrap()).abs());
        d_time = d_time.max((c.sigma_time.unwrap() - r.sigma_kubo_window).abs());
        d_plain = d_plain.max((c.sigma_time.unwrap() - k).abs());
        qs.push(r.multiplet.q);
    }
    Ok((
        d_trace <= 1e-6 && d_time <= 1e-6,
        format!(
            "q = {qs:?}; max |kubo - trace| = {d_trace:.1e}, max |time(0,∞) - kubo(J_N, J_Γ)| = {d_time:.1e} (both <= 1e-6); info: max |time(0,∞) - kubo(J1, J2)| = {d_plain:.2e}"
        ),
    ))
}

const CI_MODEL: &str = r#"
[model]
preset = "hofstadter"
l1 = 4
l2 = 4
flux = [1, 4]
n = 4
"#;

fn c4(ctx: &Ctx) -> Result<Verdict> {
    let text = format!(
        "{CI_MODEL}\n[experiment]\nkind = \"kubo_vs_time\"\nq_hint = 1\ncut = [1, 1]\nphi = [[0.7, 1.9]]\neta = [0.1, 0.05]\nt_switch = [50.0, 100.0]\n"
    );
    let out = ctx.run("c4", &text)?;
    let r = &out.report.routes.as_ref().unwrap()[0];
    let checks: Vec<_> = r
        .conductance
        .bound_checks
        .iter()
        .filter(|b| b.name.starts_with("adiabatic") || b.name.starts_with("i_cor"))
        .collect();
    let pass = checks.len() == 8 && checks.iter().all(|b| b.pass);
    let worst = checks.iter().map(|b| b.lhs / b.rhs).fold(0.0, f64::max);
    Ok((
        pass,
        format!(
            "{} of {} adiabatic/I_cor bounds hold over (η,T) ∈ {{0.1,0.05}}×{{50,100}}, worst lhs/rhs = {worst:.3}, ΔE = {:.4}",
            checks.iter().filter(|b| b.pass).count(),
            checks.len(),
            r.multiplet.gap
        ),
    ))
}

fn c5(ctx: &Ctx) -> Result<Verdict> {
    let out = ctx.run("c5", &format!("{CI_MODEL}\n[experiment]\nkind = \"gap_scan\"\ngrid = 12\n"))?;
    let g = out.report.gap_scan.as_ref().unwrap();
    let q = g.nodes.first().and_then(|n| n.q);
    let pass = g.nodes.len() == 144 && g.q_constant && q.is_some() && g.min_gap.is_some_and(|x| x > 0.0);
    Ok((
        pass,
        format!(
            "144 nodes, q = {q:?} constant: {}, min ΔE = {:.4e}, max δE = {:.2e}",
            g.q_constant,
            g.min_gap.unwrap_or(f64::NAN),
            g.max_delta_e.unwrap_or(f64::NAN)
        ),
    ))
}

fn c6(ctx: &Ctx) -> Result<Verdict> {
    let text = r#"
[model]
preset = "hofstadter"
l1 = 6
l2 = 2
flux = [1, 3]
n = 4

[experiment]
kind = "chern"
q_hint = 1
cut = [0, 0]
alphas = [0.3, 1.0]
deform_site = 7

[[experiment.deformed_cuts]]
dir = 1
k = 0
anchor = [0, 0]
r0 = 3.0
values = [[0, 0.35], [1, 0.8], [5, 0.2], [6, 0.6], [7, 1.3], [11, -0.4]]
"#;
    let out = ctx.run("c6", text)?;
    let c = out.report.chern.as_ref().unwrap();
    let d = c.deformation.as_ref().unwrap();
    let ps: Vec<String> = std::iter::once(&d.baseline)
        .chain(&d.entries)
        .map(|e| format!("{}: p={}", e.label, e.p))
        .collect();
    let pass = d.pass && d.entries.iter().all(|e| e.p == d.baseline.p && e.q == d.baseline.q) && d.entries.len() == 3;
    Ok((pass, ps.join(", ")))
}

fn c7(ctx: &Ctx) -> Result<Verdict> {
    let mut pots = vec!["0.0"; 24];
    pots[0] = "-6.0";
    let text = format!(
        r#"
[model]
preset = "hofstadter"
l1 = 6
l2 = 4
flux = [0, 1]
n = 1
potentials = [{}]

[experiment]
kind = "corr_decay"
q_hint = 1
source = 0
probes = [1, 2, 3, 9, 15]
"#,
        pots.join(", ")
    );
    let out = ctx.run("c7", &text)?;
    let c = out.report.corr_decay.as_ref().unwrap();
    let dists: Vec<f64> = c.rows.iter().map(|r| r.distance).collect();
    let pass = dists == [1.0, 2.0, 3.0, 4.0, 5.0] && c.monotone && c.r_squared >= 0.9 && c.kappa > 0.0;
    let vals: Vec<String> = c.rows.iter().map(|r| format!("{:.2e}", r.abs)).collect();
    Ok((
        pass,
        format!(
            "|<<A;B>>| at d=1..5: [{}], monotone {}, R² = {:.4} (>= 0.9), fitted κ = {:.4} (> 0)",
            vals.join(", "),
            c.monotone,
            c.r_squared,
            c.kappa
        ),
    ))
}

fn c8(ctx: &Ctx) -> Result<Verdict> {
    let text = r#"
[model]
preset = "chain"
l1 = 6
n = 3
periodic = false

[experiment]
kind = "locality"
q_hint = 1
observable_site = 2
omega = [0, 1, 2, 3]
t_max = 2.0
samples = 21
source = 0
probes = [1, 2, 3, 4, 5]
"#;
    let out = ctx.run("c8", text)?;
    let l = out.report.locality.as_ref().unwrap();
    let worst = l.restricted.iter().map(|s| s.lhs - s.rhs).fold(f64::NEG_INFINITY, f64::max);
    let pass = l.restricted.len() == 21 && l.restricted_pass && l.growth_zero_at_origin && l.growth_bounded;
    Ok((
        pass,
        format!(
            "restricted evolution holds at {}/21 times (max lhs - rhs = {worst:.2e}); commutators 0 at t=0: {}, <= 2||A|| ||B||: {}; LR fit C={:.3} μ={:.3} v={:.3}",
            l.restricted.iter().filter(|s| s.pass).count(),
            l.growth_zero_at_origin,
            l.growth_bounded,
            l.growth.c,
            l.growth.mu,
            l.growth.v
        ),
    ))
}

fn c9(_ctx: &Ctx) -> Result<Verdict> {
    let spec = hofstadter_hubbard(4, 3, Flux::new(1, 4)?, 1.0, 1.0, 2)?;
    let family = TwistFamily::new(&spec, [0, 0])?;
    let settings = NodeSettings {
        detect: DetectOptions::default(),
        full: true,
        ..Default::default()
    };
    let solver = NodeSolver::new(&family, settings, None)?;
    let basis = &solver.basis;
    let eig = solver.eigen([0.0, 0.0], None, false)?;
    let m = detect_multiplet(&eig, &solver.settings.detect)?;
    let h = family.hamiltonian([0.0, 0.0], basis)?;
    let a0 = number_operator(5, basis).to_dense();
    let e = &eig.values;
    let (q, gap, de) = (m.q, m.gap, m.delta_e);

    let truncation = energy_filter(
        &FilterSpec {
            a0: a0.clone(),
            support: vec![5],
            n_sites: 12,
            k: 4.0,
            center: e[q] - e[0],
            t1: Some(6.0),
            quadrature_points: 400,
            quadrature_tol: 1e-6,
        },
        &eig,
        None,
    )?;
    let tc = truncation.check.as_ref().unwrap();

    // window [E_1, E_1 + ε/2] with one subinterval: center E_1 - E_0 + ε/4
    let eps = gap / 4.0;
    let k = 16.0 / (eps * eps);
    let filt = energy_filter(
        &FilterSpec {
            a0: a0.clone(),
            support: vec![5],
            n_sites: 12,
            k,
            center: e[q] - e[0] + eps / 4.0,
            t1: None,
            quadrature_points: 400,
            quadrature_tol: 1e-6,
        },
        &eig,
        None,
    )?;
    let ratio = excitation_ratio(&filt.filtered, &h, &m)?;
    // weight of a0|0> in the window, the hypothesis of the bound
    let a0e = to_eigenbasis(&a0, &eig)?;
    let c0 = (0..q)
        .map(|i| (q..e.len()).filter(|&n| e[n] <= e[q] + eps / 2.0).map(|n| a0e[(n, i)].norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max);
    let upper = gap + 2.0 * de + 2.0 * eps;
    let in_window = ratio >= gap && ratio <= upper;
    let pass = truncation.max_suppression_excess <= 0.0 && filt.max_suppression_excess <= 0.0 && tc.pass && in_window && c0 > 0.0;
    Ok((
        pass,
        format!(
            "max(|ã0|-|a0|) = {:.1e}; ||ã0 - a(6)|| = {:.3e} <= {:.3e}; ratio {ratio:.6} in [ΔE, ΔE+2δE+2ε] = [{gap:.6}, {upper:.6}] (q = {q}, ε = ΔE/4, K = {k:.1}, window weight {c0:.2e})",
            truncation.max_suppression_excess.max(filt.max_suppression_excess),
            tc.deviation,
            tc.bound
        ),
    ))
}

fn c10(ctx: &Ctx) -> Result<Verdict> {
    let text = r#"
[model]
preset = "hofstadter_hubbard"
l1 = 4
l2 = 6
flux = [1, 4]
v_nn = 2.0
n = 3

[experiment]
kind = "chern"
"#;
    match ctx.run("c10", text) {
        Ok(out) => {
            let (p, q, sigma, residual) = chern_of(&out.report);
            if q != 3 {
                return Ok((true, format!("detector found a gapped multiplet with q = {q} (not 3); p = {p}; condition not met")));
            }
            let consistent = (2.0 * PI * sigma - p as f64 / 3.0).abs() <= 1e-12;
            let note = if p == 1 { "; p/q = 1/3 reproduced" } else { "" };
            Ok((
                residual <= 1e-9 && consistent,
                format!("q = 3 gapped multiplet found; p = {p}, residual {residual:.1e} (<= 1e-9), 2πσ̄ = {:.12} = p/3{note}", 2.0 * PI * sigma),
            ))
        }
        Err(hallkit::Error::NoGappedMultiplet(msg)) => {
            Ok((true, format!("no gapped multiplet found, condition not met: {msg}")))
        }
        Err(e) => Err(e),
    }
}

fn c11(ctx: &Ctx) -> Result<Verdict> {
    let reference = ctx.run("c1", C1_CONFIG)?;
    let mixed = {
        let mut cfg = ctx.config("c11-mixed", C1_CONFIG);
        cfg.experiment.mixing_seed = Some(11);
        harness::run(&cfg)?
    };
    let moved = {
        let mut cfg = ctx.config("c11-moved", C1_CONFIG);
        cfg.experiment.gauge_moves = [3, 0];
        harness::run(&cfg)?
    };
    let (p0, _, s0, _) = chern_of(&reference.report);
    let (p1, _, s1, _) = chern_of(&mixed.report);
    let (p2, _, s2, _) = chern_of(&moved.report);
    let field = |r: &Report| r.chern.as_ref().unwrap().flux.field.clone();
    let f0 = field(&reference.report);
    let df = |f: &[f64]| f.iter().zip(&f0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (df1, df2) = (df(&field(&mixed.report)), df(&field(&moved.report)));
    let hits = &mixed.manifest.cache;
    let pass = p0 == p1 && p0 == p2 && (s0 - s1).abs() <= 1e-10 && (s0 - s2).abs() <= 1e-10;
    Ok((
        pass,
        format!(
            "p = {p0} / {p1} (mixed frames) / {p2} (cut moved 3 steps); |Δσ̄| = {:.1e}, {:.1e} (<= 1e-10); info: max |ΔF| per plaquette {df1:.1e}, {df2:.1e}; mixed rerun cache hits {}/{}",
            (s0 - s1).abs(),
            (s0 - s2).abs(),
            hits.hits,
            hits.hits + hits.misses
        ),
    ))
}

fn scratch_root() -> PathBuf {
    std::env::temp_dir().join(format!("hallkit-acceptance-{}", std::process::id()))
}

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let root = scratch_root();
    std::fs::create_dir_all(&root).expect("scratch dir");
    let ctx = Ctx { root: root.clone() };
    let criteria: [Criterion; 11] = [
        (1, "integer quantization", c1),
        (2, "trivial reference", c2),
        (3, "route equivalence", c3),
        (4, "adiabatic bound", c4),
        (5, "gap stability scan", c5),
        (6, "deformation invariance", c6),
        (7, "correlation decay", c7),
        (8, "locality inequalities", c8),
        (9, "energy filter", c9),
        (10, "fractional candidate", c10),
        (11, "gauge/frame robustness", c11),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let t0 = Instant::now();
        let (pass, detail) = match f(&ctx) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {}: {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    cleanup(&root);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 11 acceptance criteria passed");
}

fn cleanup(root: &Path) {
    let _ = std::fs::remove_dir_all(root);
}
