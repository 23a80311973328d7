use std::ffi::CString;
use std::path::Path;
use std::process::Command;
use std::ptr;

use membrane_ffi::*;

const IDENTITY: [f64; 6] = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { membrane_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take(n.min(255)).map(|&c| c as u8).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

fn energy() -> *mut MembraneEnergy {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { membrane_energy_new_inverse_square(1.0, 2.0, &mut h) }, MembraneStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn stored_energy_and_fiber_relaxation() {
    let h = energy();
    let mut v = 0.0;
    let id3 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    unsafe {
        assert_eq!(membrane_energy_eval(h, id3.as_ptr(), &mut v), MembraneStatus::Ok);
        assert_eq!(v, 3.0);
        let diag = [2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        membrane_energy_eval(h, diag.as_ptr(), &mut v);
        assert!((v - 6.25).abs() < 1e-12);

        assert_eq!(membrane_fiber_relax(h, IDENTITY.as_ptr(), &mut v), MembraneStatus::Ok);
        // s⁴ + s − 1 = 0 gives the optimal stretch
        let s = 0.724_491_959_000_516_f64;
        let expected = (1.0 / s - 1.0).powi(2) + 2.0 + s * s;
        assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");

        let degenerate = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        membrane_fiber_relax(h, degenerate.as_ptr(), &mut v);
        assert!(v.is_infinite() && v > 0.0);

        assert_eq!(membrane_fiber_relax_constrained(h, IDENTITY.as_ptr(), 1, &mut v), MembraneStatus::Ok);
        assert!((v - 3.0).abs() < 1e-6);
        assert_eq!(
            membrane_fiber_relax_constrained(h, degenerate.as_ptr(), 1, &mut v),
            MembraneStatus::Degenerate
        );
        assert!(last_error().contains("degenerate"));
        membrane_energy_free(h);
    }
}

#[test]
fn invalid_arguments_report_status_and_message() {
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(membrane_energy_new_inverse_square(1.0, 0.5, &mut h), MembraneStatus::InvalidArgument);
        assert!(h.is_null());
        assert!(!last_error().is_empty());
        let mut v = 0.0;
        assert_eq!(membrane_fiber_relax(ptr::null(), IDENTITY.as_ptr(), &mut v), MembraneStatus::NullPointer);
        let nan = [f64::NAN, 0.0, 0.0, 1.0, 0.0, 0.0];
        let e = energy();
        assert_eq!(membrane_fiber_relax(e, nan.as_ptr(), &mut v), MembraneStatus::InvalidArgument);
        membrane_energy_free(e);
        // the error slot is cleared by the next successful call
        assert_eq!(membrane_sigma(4, 0.5, 0.5, 0.5, &mut v, ptr::null_mut()), MembraneStatus::Ok);
        assert_eq!(membrane_last_error(ptr::null_mut(), 0), 0);
        assert_eq!(membrane_sigma(2, 0.5, 0.5, 0.5, &mut v, ptr::null_mut()), MembraneStatus::InvalidArgument);
        assert_eq!(membrane_sigma(4, 0.5, 1.5, 0.5, &mut v, ptr::null_mut()), MembraneStatus::InvalidArgument);
    }
}

#[test]
fn normal_field_has_unit_determinant() {
    let mut phi = [0.0; 3];
    let xi = [2.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    unsafe {
        assert_eq!(membrane_normal_field(xi.as_ptr(), phi.as_mut_ptr()), MembraneStatus::Ok);
    }
    assert_eq!(phi, [0.0, 0.0, 0.5]);
}

#[test]
fn double_well_lamination_and_laminate_energy() {
    let mid = [1.0, 0.0, 0.0, 1.0, 0.5, 0.0];
    let b_well = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(membrane_density_new_double_well(IDENTITY.as_ptr(), b_well.as_ptr(), &mut d), MembraneStatus::Ok);
        let mut v = 0.0;
        membrane_density_eval(d, mid.as_ptr(), &mut v);
        assert!((v - 0.25).abs() < 1e-15);

        let mut params = [0.0; 6];
        assert_eq!(membrane_laminate_step(d, mid.as_ptr(), &mut v, params.as_mut_ptr()), MembraneStatus::Ok);
        assert!(v <= 1e-3, "{v}");
        assert!((params[0].hypot(params[1]) - 1.0).abs() < 1e-12);

        let mut values = [0.0; 2];
        assert_eq!(membrane_laminate_envelope(d, mid.as_ptr(), 2, values.as_mut_ptr()), MembraneStatus::Ok);
        assert!(values[1] <= values[0] + 1e-9);

        // closed form: (1/n)[t f(ξ+(1−t)a⊗b) + (1−t)/2 (f_B⁻ + f_C⁻) + f(ξ)] with the wells hit exactly
        let e3 = [0.0, 0.0, 1.0];
        assert_eq!(membrane_laminate_energy(d, mid.as_ptr(), 8, 0.5, 0.0, e3.as_ptr(), &mut v), MembraneStatus::Ok);
        assert!((v - 0.375 / 8.0).abs() < 1e-15, "{v}");
        membrane_density_free(d);

        let mut s = ptr::null_mut();
        membrane_density_new_squared_norm(&mut s);
        membrane_density_eval(s, mid.as_ptr(), &mut v);
        assert_eq!(v, 2.25);
        membrane_density_free(s);

        let e = energy();
        let mut f = ptr::null_mut();
        membrane_density_new_fiber(e, &mut f);
        membrane_density_eval(f, IDENTITY.as_ptr(), &mut v);
        assert!((v - 2.6695).abs() < 1e-4);
        membrane_density_free(f);
        membrane_energy_free(e);
    }
}

#[test]
fn sigma_value_and_gradient() {
    let (mut v, mut g) = (0.0, [0.0; 2]);
    let (n, t) = (4usize, 0.25);
    // interface between the two flat families of the first strip
    let x1 = (1.0 - t) / n as f64;
    unsafe {
        assert_eq!(membrane_sigma(n, t, x1, 0.5, &mut v, g.as_mut_ptr()), MembraneStatus::Ok);
    }
    assert!((v + t * (1.0 - t) / n as f64).abs() < 1e-15);
}

#[test]
fn run_config_maps_outcomes_to_status() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let good = CString::new(configs.join("ac05_micro_identity.json").to_str().unwrap()).unwrap();
    let out = CString::new(tmp.path().join("ok").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(membrane_run_config(good.as_ptr(), out.as_ptr(), 1, 7, 1), MembraneStatus::Ok);
    }
    assert!(tmp.path().join("ok/manifest.json").is_file());

    let bad_path = tmp.path().join("bad.json");
    std::fs::write(&bad_path, r#"{"kind": "film", "film": {"j": 0}}"#).unwrap();
    let bad = CString::new(bad_path.to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(membrane_run_config(bad.as_ptr(), out.as_ptr(), 0, 0, 0), MembraneStatus::Config);
    }
    assert!(last_error().contains("film.j"));

    let failing_path = tmp.path().join("failing.json");
    std::fs::write(
        &failing_path,
        r#"{"kind": "envelope", "envelope": {"density": {"kind": "squared_norm"},
            "points": {"explicit": [[[1, 0], [0, 1], [0, 0]]], "samples": 0}, "depth": 1, "max_final": 0.5}}"#,
    )
    .unwrap();
    let failing = CString::new(failing_path.to_str().unwrap()).unwrap();
    let out2 = CString::new(tmp.path().join("failing").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(membrane_run_config(failing.as_ptr(), out2.as_ptr(), 0, 0, 1), MembraneStatus::AssertionFailed);
    }
    assert!(last_error().contains("lamination_final_bound"));
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/membrane.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["membrane_fiber_relax", "membrane_run_config", "MEMBRANE_STATUS_ASSERTION_FAILED", "MembraneDensity"] {
        assert!(text.contains(name), "{name} missing from the header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler on PATH; header syntax not checked");
        return;
    };
    assert!(status.success());
}
