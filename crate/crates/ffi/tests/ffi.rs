use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use mcpad::models::{build_autoencoder, build_mlp};
use mcpad::pipeline::save_autoencoders;
use mcpad::preproc::{stack_channels, Image8, McFaceImage, Regions};
use mcpad::trainer::PadSystem;
use mcpad_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mcpad_last_error_message()) }.to_string_lossy().into_owned()
}

fn plane(seed: usize) -> Vec<u8> {
    (0..128 * 128).map(|i| ((i * 31 + seed * 7) % 251) as u8).collect()
}

#[test]
fn system_round_trip_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let regions = Regions::SIXTEEN;
    let aes: Vec<_> = (0..16).map(|k| build_autoencoder(32, k).unwrap()).collect();
    save_autoencoders(dir.path(), &aes).unwrap();
    let mlp = build_mlp(2304, 3).unwrap();
    let mlp_path = dir.path().join("mlp.mcae");
    mlp.save(&mlp_path).unwrap();

    let (bw, nir, depth) = (plane(1), plane(2), plane(3));
    let expected = {
        let p = |v: &Vec<u8>| Image8::new(128, 128, 1, v.clone()).unwrap();
        let face = McFaceImage::new(stack_channels(&p(&bw), &p(&nir), &p(&depth)).unwrap(), "x", 0).unwrap();
        PadSystem::new(regions, aes, mlp).unwrap().predict(&face).unwrap()
    };

    let models = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mlp_c = CString::new(mlp_path.to_str().unwrap()).unwrap();
    let mut sys = ptr::null_mut();
    let status = unsafe { mcpad_system_load(models.as_ptr(), mlp_c.as_ptr(), 16, &mut sys) };
    assert_eq!(status, McpadStatus::Ok, "{}", last_error());
    let mut score = f64::NAN;
    let status = unsafe { mcpad_system_score(sys, bw.as_ptr(), nir.as_ptr(), depth.as_ptr(), &mut score) };
    assert_eq!(status, McpadStatus::Ok);
    assert_eq!(score.to_bits(), expected.to_bits());

    // Wrong region count for the stored models.
    let mut other = ptr::null_mut();
    let status = unsafe { mcpad_system_load(models.as_ptr(), mlp_c.as_ptr(), 9, &mut other) };
    assert_ne!(status, McpadStatus::Ok);
    assert!(other.is_null());
    assert!(!last_error().is_empty());

    let status = unsafe { mcpad_system_score(sys, ptr::null(), nir.as_ptr(), depth.as_ptr(), &mut score) };
    assert_eq!(status, McpadStatus::NullPointer);
    unsafe { mcpad_system_free(sys) };
    unsafe { mcpad_system_free(ptr::null_mut()) };
}

#[test]
fn missing_models_report_io() {
    let dir = tempfile::tempdir().unwrap();
    let models = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mlp = CString::new(dir.path().join("none.mcae").to_str().unwrap()).unwrap();
    let mut sys = ptr::null_mut();
    let status = unsafe { mcpad_system_load(models.as_ptr(), mlp.as_ptr(), 1, &mut sys) };
    assert_eq!(status, McpadStatus::Io);
    assert!(last_error().contains("region_00.mcae"));
    let status = unsafe { mcpad_system_load(models.as_ptr(), mlp.as_ptr(), 4, &mut sys) };
    assert_eq!(status, McpadStatus::InvalidArgument);
    let status = unsafe { mcpad_system_load(ptr::null(), mlp.as_ptr(), 1, &mut sys) };
    assert_eq!(status, McpadStatus::NullPointer);
}

#[test]
fn mad_normalize_hand_example() {
    // Non-zero values 1..9, 5 and 20: median 5, MAD 2.
    let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 5.0, 20.0, 0.0];
    let mut out = [0u8; 12];
    let status = unsafe { mcpad_mad_normalize(v.as_ptr(), 4, 3, 3.0, out.as_mut_ptr()) };
    assert_eq!(status, McpadStatus::Ok);
    assert_eq!((out[0], out[4], out[10]), (43, 128, 255));
    let status = unsafe { mcpad_mad_normalize(v.as_ptr(), 4, 3, 0.0, out.as_mut_ptr()) };
    assert_eq!(status, McpadStatus::InvalidArgument);
    let zeros = [0.0; 4];
    let status = unsafe { mcpad_mad_normalize(zeros.as_ptr(), 2, 2, 3.0, out.as_mut_ptr()) };
    assert_eq!(status, McpadStatus::InvalidArgument);
    assert!(last_error().contains("empty non-zero support"));
}

#[test]
fn error_rates_and_threshold() {
    let attacks = [0.9, 0.8, 0.3, 0.6];
    let bona = [0.1, 0.2, 0.7];
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        assert_eq!(mcpad_apcer(attacks.as_ptr(), 4, 0.5, &mut a), McpadStatus::Ok);
        assert_eq!(mcpad_bpcer(bona.as_ptr(), 3, 0.5, &mut b), McpadStatus::Ok);
    }
    assert_eq!((a, b), (0.25, 1.0 / 3.0));
    unsafe {
        assert_eq!(mcpad_apcer(ptr::null(), 0, 0.5, &mut a), McpadStatus::ValidationFailed);
    }

    let scores = [0.9, 0.8, 0.3, 0.6, 0.1, 0.2, 0.7];
    let is_attack = [1u8, 1, 1, 1, 0, 0, 0];
    let (mut tau, mut attainable) = (0.0, 9u8);
    let status = unsafe {
        mcpad_threshold_at_apcer(scores.as_ptr(), is_attack.as_ptr(), 7, 0.25, &mut tau, &mut attainable)
    };
    assert_eq!(status, McpadStatus::Ok);
    // 0.6 misses only the 0.3 attack: APCER 0.25.
    assert_eq!((tau, attainable), (0.6, 1));
    let status = unsafe {
        mcpad_threshold_at_apcer(scores.as_ptr(), is_attack.as_ptr(), 7, 0.0, &mut tau, ptr::null_mut())
    };
    assert_eq!(status, McpadStatus::Ok);
    assert_eq!(tau, 0.3);
    let bad = [1.5];
    let status = unsafe { mcpad_threshold_at_apcer(bad.as_ptr(), is_attack.as_ptr(), 1, 0.05, &mut tau, ptr::null_mut()) };
    assert_eq!(status, McpadStatus::InvalidArgument);
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(mcpad_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/mcpad.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["mcpad_system_load", "mcpad_system_score", "mcpad_system_free", "mcpad_threshold_at_apcer", "MCPAD_STATUS_IO"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header])
            .output()
        else {
            eprintln!("{compiler} not available; skipping");
            continue;
        };
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
