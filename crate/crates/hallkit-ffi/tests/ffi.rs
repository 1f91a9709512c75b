use std::ffi::{CStr, CString};
use std::ptr;

use hallkit_ffi::*;

fn last_error() -> String {
    let p = hk_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn atomic() -> *mut HkModel {
    let pots = [0.0, 1.0, 2.5, 4.0];
    let mut m = ptr::null_mut();
    let s = unsafe { hk_model_atomic(2, 2, pots.as_ptr(), pots.len(), 2, &mut m) };
    assert_eq!(s, HkStatus::Ok);
    m
}

#[test]
fn atomic_insulator_round_trip() {
    let m = atomic();
    let mut dim = 0;
    assert_eq!(unsafe { hk_model_dimension(m, &mut dim) }, HkStatus::Ok);
    assert_eq!(dim, 6);

    let mut e = [0.0; 4];
    let mut len = 0;
    assert_eq!(unsafe { hk_ground_energies(m, 0.0, 0.0, 1, e.as_mut_ptr(), e.len(), &mut len) }, HkStatus::Ok);
    assert_eq!(len, 1);
    assert_eq!(e[0], 1.0);

    let (mut p, mut q, mut sigma) = (7, 0, 1.0);
    assert_eq!(unsafe { hk_chern(m, 4, 1, &mut p, &mut q, &mut sigma) }, HkStatus::Ok);
    assert_eq!((p, q, sigma), (0, 1, 0.0));

    let mut k = 1.0;
    assert_eq!(unsafe { hk_kubo(m, 0.4, 1.3, 1, &mut k) }, HkStatus::Ok);
    assert_eq!(k, 0.0);
    unsafe { hk_model_free(m) };
}

#[test]
fn filled_hofstadter_band_has_unit_chern_number() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hk_model_hofstadter(3, 2, 1, 3, 1.0, 0.0, 2, &mut m) }, HkStatus::Ok);
    let (mut p, mut q, mut sigma) = (0, 0, 0.0);
    assert_eq!(unsafe { hk_chern(m, 6, 1, &mut p, &mut q, &mut sigma) }, HkStatus::Ok);
    assert_eq!((p, q), (1, 1));
    assert!((sigma - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
    unsafe { hk_model_free(m) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut m = ptr::null_mut();
    let s = unsafe { hk_model_hofstadter(4, 4, 1, 3, 1.0, 0.0, 2, &mut m) };
    assert_eq!(s, HkStatus::InvalidInput);
    assert!(m.is_null());
    assert!(last_error().contains("L1"), "{}", last_error());

    assert_eq!(unsafe { hk_model_dimension(ptr::null(), &mut 0) }, HkStatus::NullPointer);
    assert_eq!(unsafe { hk_model_hofstadter(4, 4, 1, 4, 1.0, 0.0, 2, ptr::null_mut()) }, HkStatus::NullPointer);

    let pots = [0.0, 0.0, 2.0, 3.0];
    assert_eq!(unsafe { hk_model_atomic(2, 2, pots.as_ptr(), 4, 1, &mut m) }, HkStatus::InvalidInput);

    // free fermions on 4x4 with N = 2: the ground level is 4-fold degenerate
    assert_eq!(unsafe { hk_model_hofstadter(4, 4, 0, 1, 1.0, 0.0, 2, &mut m) }, HkStatus::Ok);
    let mut e = [0.0; 4];
    let mut len = 0;
    let s = unsafe { hk_ground_energies(m, 0.0, 0.0, 1, e.as_mut_ptr(), 4, &mut len) };
    assert_eq!(s, HkStatus::NoGappedMultiplet, "{}", last_error());
    let s = unsafe { hk_ground_energies(m, 0.0, 0.0, 4, e.as_mut_ptr(), 2, &mut len) };
    assert_eq!(s, HkStatus::BufferTooSmall);
    assert_eq!(len, 4);
    assert_eq!(unsafe { hk_ground_energies(m, 0.0, 0.0, 4, e.as_mut_ptr(), 4, &mut len) }, HkStatus::Ok);
    assert!(e.iter().all(|x| (x + 6.0).abs() < 1e-10), "{e:?}");
    assert_eq!(unsafe { hk_model_set_cut(m, 5, 0) }, HkStatus::InvalidInput);
    unsafe { hk_model_free(m) };
    unsafe { hk_model_free(ptr::null_mut()) };
}

#[test]
fn run_config_writes_artifacts() {
    let dir = std::env::temp_dir().join(format!("hallkit-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("out");
    let cfg = format!(
        r#"
[model]
preset = "atomic_insulator"
l1 = 2
l2 = 2
n = 1
potentials = [0.0, 1.0, 2.0, 3.0]

[experiment]
kind = "chern"
q_hint = 1
grid = 4

[output]
dir = "{}"
cache = false
"#,
        out.display()
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { hk_run_config(c.as_ptr()) }, HkStatus::Ok);
    assert!(out.join("manifest.json").exists());
    assert!(out.join("report.json").exists());
    let missing = CString::new(dir.join("absent.toml").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { hk_run_config(missing.as_ptr()) }, HkStatus::InvalidInput);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn header_declares_the_interface() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hallkit.h")).unwrap();
    for f in [
        "hk_last_error",
        "hk_version",
        "hk_model_hofstadter",
        "hk_model_atomic",
        "hk_model_free",
        "hk_model_set_cut",
        "hk_model_dimension",
        "hk_ground_energies",
        "hk_chern",
        "hk_kubo",
        "hk_run_config",
        "typedef struct HkModel HkModel",
        "HK_STATUS_NO_GAPPED_MULTIPLET = 3",
    ] {
        assert!(h.contains(f), "header lacks {f}");
    }
    let v = unsafe { CStr::from_ptr(hk_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
