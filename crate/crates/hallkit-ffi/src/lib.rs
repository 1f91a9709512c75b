//! C interface to the hallkit engine.
//!
//! Models are opaque handles created by `hk_model_*` and released with
//! `hk_model_free`. Every call returns an [`HkStatus`]; on failure the message
//! is available from `hk_last_error` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hallkit::hall::{average_over_flux, kubo_sum, FluxGridOptions, NodeSettings, NodeSolver, TwistFamily};
use hallkit::harness::{self, ExperimentConfig};
use hallkit::manybody::HamiltonianSpec;
use hallkit::models::{self, Flux};
use hallkit::spectra::{detect_multiplet, DetectOptions};
use hallkit::Error;

/// Status codes. Values 2-5 match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NoGappedMultiplet = 3,
    Tolerance = 4,
    Resource = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A Hamiltonian on a torus together with its twist lines.
pub struct HkModel {
    spec: HamiltonianSpec,
    cut: [usize; 2],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> HkStatus {
    match err.exit_code() {
        3 => HkStatus::NoGappedMultiplet,
        4 => HkStatus::Tolerance,
        5 => HkStatus::Resource,
        _ => HkStatus::InvalidInput,
    }
}

/// Runs `f`, recording errors and turning panics into `HkStatus::Panic`.
fn guard(f: impl FnOnce() -> Result<(), (HkStatus, String)>) -> HkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HkStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            HkStatus::Panic
        }
    }
}

fn lift<T>(r: hallkit::Result<T>) -> Result<T, (HkStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (HkStatus, String) {
    (HkStatus::NullPointer, format!("{what} is null"))
}

fn detect(q_hint: usize) -> DetectOptions {
    if q_hint == 0 {
        DetectOptions::default()
    } else {
        DetectOptions::with_hint(q_hint)
    }
}

unsafe fn model<'a>(m: *const HkModel) -> Result<&'a HkModel, (HkStatus, String)> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), (HkStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Hofstadter model with nearest-neighbour repulsion `v_nn` (0 for none),
/// flux `flux_n/flux_m` per plaquette and `n` particles. Twist lines sit at
/// column and row 0.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn hk_model_hofstadter(
    l1: usize,
    l2: usize,
    flux_n: i64,
    flux_m: i64,
    t: f64,
    v_nn: f64,
    n: usize,
    out: *mut *mut HkModel,
) -> HkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let flux = lift(Flux::new(flux_n, flux_m))?;
        let spec = lift(models::hofstadter_hubbard(l1, l2, flux, t, v_nn, n))?;
        out.write(Box::into_raw(Box::new(HkModel { spec, cut: [0, 0] })));
        Ok(())
    })
}

/// Hopping-free model with onsite energies `potentials[0..len]`.
///
/// # Safety
/// `potentials` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_model_atomic(
    l1: usize,
    l2: usize,
    potentials: *const f64,
    len: usize,
    n: usize,
    out: *mut *mut HkModel,
) -> HkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if potentials.is_null() {
            return Err(null("potentials"));
        }
        let p = std::slice::from_raw_parts(potentials, len);
        let spec = lift(models::atomic_insulator(l1, l2, p, n))?;
        out.write(Box::into_raw(Box::new(HkModel { spec, cut: [0, 0] })));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `m` must come from a `hk_model_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hk_model_free(m: *mut HkModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Moves the twist lines to column `k1` and row `k2`.
///
/// # Safety
/// `m` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hk_model_set_cut(m: *mut HkModel, k1: usize, k2: usize) -> HkStatus {
    guard(|| {
        let m = m.as_mut().ok_or_else(|| null("model"))?;
        let lat = m.spec.lattice;
        if k1 >= lat.l1 || k2 >= lat.l2 {
            return Err((HkStatus::InvalidInput, format!("cut ({k1}, {k2}) outside the lattice")));
        }
        m.cut = [k1, k2];
        Ok(())
    })
}

/// Dimension of the fixed-particle-number sector.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hk_model_dimension(m: *const HkModel, out: *mut usize) -> HkStatus {
    guard(|| {
        let b = lift(model(m)?.spec.basis())?;
        write(out, b.dim(), "out")
    })
}

/// Energies of the ground multiplet at twist (phi1, phi2). `q_hint = 0` lets
/// the detector choose q. Writes q energies into `energies` (capacity `cap`)
/// and q into `len`; fails with `BufferTooSmall` (len still set) if cap < q.
///
/// # Safety
/// `m` must be a live handle, `energies` must hold `cap` doubles, `len` writable.
#[no_mangle]
pub unsafe extern "C" fn hk_ground_energies(
    m: *const HkModel,
    phi1: f64,
    phi2: f64,
    q_hint: usize,
    energies: *mut f64,
    cap: usize,
    len: *mut usize,
) -> HkStatus {
    guard(|| {
        let m = model(m)?;
        let family = lift(TwistFamily::new(&m.spec, m.cut))?;
        let settings = NodeSettings {
            detect: detect(q_hint),
            ..Default::default()
        };
        let solver = lift(NodeSolver::new(&family, settings, None))?;
        let g = lift(solver.multiplet([phi1, phi2]))?;
        write(len, g.q, "len")?;
        if cap < g.q {
            return Err((HkStatus::BufferTooSmall, format!("need room for {} energies, got {cap}", g.q)));
        }
        if energies.is_null() {
            return Err(null("energies"));
        }
        std::slice::from_raw_parts_mut(energies, g.q).copy_from_slice(&g.energies);
        Ok(())
    })
}

/// Chern number p, multiplet size q and averaged conductance p/(2πq) on an
/// n×n flux grid (refined once to 2n if integrality fails).
///
/// # Safety
/// `m` must be a live handle and the three outputs writable.
#[no_mangle]
pub unsafe extern "C" fn hk_chern(
    m: *const HkModel,
    grid: usize,
    q_hint: usize,
    p: *mut i64,
    q: *mut usize,
    sigma: *mut f64,
) -> HkStatus {
    guard(|| {
        let m = model(m)?;
        if grid < 2 {
            return Err((HkStatus::InvalidInput, "grid needs at least 2 points per side".into()));
        }
        let family = lift(TwistFamily::new(&m.spec, m.cut))?;
        let settings = NodeSettings {
            detect: detect(q_hint),
            ..Default::default()
        };
        let solver = lift(NodeSolver::new(&family, settings, None))?;
        let opts = FluxGridOptions {
            n: grid,
            refine_to: Some(2 * grid),
            ..Default::default()
        };
        let fa = lift(average_over_flux(&solver, &opts))?;
        write(p, fa.p, "p")?;
        write(q, fa.q, "q")?;
        write(sigma, fa.sigma_averaged, "sigma")
    })
}

/// Kubo-sum Hall conductance at twist (phi1, phi2). Needs the full spectrum.
///
/// # Safety
/// `m` must be a live handle and `sigma` writable.
#[no_mangle]
pub unsafe extern "C" fn hk_kubo(m: *const HkModel, phi1: f64, phi2: f64, q_hint: usize, sigma: *mut f64) -> HkStatus {
    guard(|| {
        let m = model(m)?;
        let family = lift(TwistFamily::new(&m.spec, m.cut))?;
        let settings = NodeSettings {
            detect: detect(q_hint),
            full: true,
            ..Default::default()
        };
        let solver = lift(NodeSolver::new(&family, settings, None))?;
        let phi = [phi1, phi2];
        let eig = lift(solver.eigen(phi, None, false))?;
        let g = lift(detect_multiplet(&eig, &solver.settings.detect))?;
        let [j1, j2] = lift(family.currents(phi, &solver.basis))?;
        let s = lift(kubo_sum(&j1, &j2, &g, &eig))?;
        write(sigma, s, "sigma")
    })
}

/// Runs a config file through the harness, as `hallkit run` would, writing
/// its artifacts to the configured output directory.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hk_run_config(path: *const c_char) -> HkStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (HkStatus::InvalidInput, "path is not UTF-8".to_string()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| (HkStatus::InvalidInput, format!("cannot read {path}: {e}")))?;
        let cfg = lift(ExperimentConfig::parse(&text, &[]))?;
        let outcome = match harness::run(&cfg) {
            Ok(o) => o,
            Err(e) => {
                harness::write_error(std::path::Path::new(&cfg.output.dir), &e);
                return lift(Err(e));
            }
        };
        lift(outcome.check())
    })
}
