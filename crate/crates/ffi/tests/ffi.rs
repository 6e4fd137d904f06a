use std::ffi::{CStr, CString};
use std::ptr;

use rfiqkd_ffi::*;

fn last_error() -> String {
    let p = rfi_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const REFERENCE_SOURCE: RfiSource = RfiSource { pr_z: 0.90, p_mu: 0.60, p_nu: 0.31, mu: 0.58, nu: 0.25, n_pulses: 1e10 };

#[test]
fn c_lower_bound_from_rates() {
    let rates = RfiErrorRates { e_zz: 0.0072, e_xx: 0.0262, e_xy: 0.5, e_yx: f64::NAN, e_yy: f64::NAN };
    let mut c = 0.0;
    assert_eq!(unsafe { rfi_c_lower_bound(RfiVariant::Three, &rates, &mut c) }, RfiStatus::Ok);
    assert!((c - 1.7688).abs() < 1e-3, "{c}");

    assert_eq!(unsafe { rfi_c_lower_bound(RfiVariant::Three, ptr::null(), &mut c) }, RfiStatus::NullPointer);
    assert!(last_error().contains("rates"));

    let bad = RfiErrorRates { e_zz: 1.5, ..rates };
    assert_eq!(unsafe { rfi_c_lower_bound(RfiVariant::Three, &bad, &mut c) }, RfiStatus::SolverFailed);
    assert!(!last_error().is_empty());
}

#[test]
fn channel_counts_and_analysis() {
    unsafe {
        let ch = rfi_channel_new();
        assert_eq!(rfi_channel_set_attenuation(ch, 7.95), RfiStatus::Ok);
        assert_eq!(rfi_channel_configure(ch, 0.0, 0.007, 3.0), RfiStatus::Ok);
        assert_eq!(rfi_channel_set_attenuation(ch, -1.0), RfiStatus::InvalidArgument);

        let mut counts = ptr::null_mut();
        assert_eq!(rfi_counts_expected(RfiVariant::Three, ch, &REFERENCE_SOURCE, &mut counts), RfiStatus::Ok);
        let mut report = std::mem::zeroed::<RfiReport>();
        assert_eq!(rfi_analyze_counts(RfiVariant::Three, counts, &REFERENCE_SOURCE, RfiKeyMode::Finite, &mut report), RfiStatus::Ok);
        assert_eq!(report.bound_status, 0);
        assert!((report.c_l - 1.77).abs() < 0.01, "{report:?}");
        assert!(report.rate > 7.1e-4 && report.rate < 2.84e-3);

        assert_eq!(
            rfi_analyze_counts(RfiVariant::Bb84, counts, &REFERENCE_SOURCE, RfiKeyMode::Finite, &mut report),
            RfiStatus::InvalidArgument
        );
        rfi_counts_free(counts);
        rfi_channel_free(ch);
        rfi_channel_free(ptr::null_mut());
        rfi_counts_free(ptr::null_mut());
    }
}

#[test]
fn counts_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "basis_prepared,basis_measured,intensity_label,n,m\nZ,Z,mu,1,2\n").unwrap();
    let path = CString::new(bad.to_str().unwrap()).unwrap();
    let mut counts = ptr::null_mut();
    assert_eq!(unsafe { rfi_counts_read(path.as_ptr(), &mut counts) }, RfiStatus::DataError);
    assert!(last_error().contains("line 2"));
    assert!(counts.is_null());

    let missing = CString::new("/no/such/counts.csv").unwrap();
    assert_eq!(unsafe { rfi_counts_read(missing.as_ptr(), &mut counts) }, RfiStatus::Io);

    let good = dir.path().join("good.csv");
    std::fs::write(&good, "basis_prepared,basis_measured,intensity_label,n,m\nZ,Z,mu,0,0\n").unwrap();
    let path = CString::new(good.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { rfi_counts_read(path.as_ptr(), &mut counts) }, RfiStatus::Ok);
    let mut report = unsafe { std::mem::zeroed::<RfiReport>() };
    let status = unsafe { rfi_analyze_counts(RfiVariant::Three, counts, &REFERENCE_SOURCE, RfiKeyMode::Finite, &mut report) };
    assert_eq!(status, RfiStatus::Ok);
    assert_eq!((report.key_length, report.bound_status), (0.0, 1));
    assert!(report.c_l.is_nan());
    unsafe { rfi_counts_free(counts) };
}

#[test]
fn optimize_bb84_asymptotic() {
    let ch = rfi_channel_new();
    let mut best = RfiOptimum { pr_z: 0.0, p_mu: 0.0, p_nu: 0.0, mu: 0.0, nu: 0.0, rate: 0.0 };
    unsafe {
        assert_eq!(rfi_channel_set_distance(ch, 20.0), RfiStatus::Ok);
        assert_eq!(rfi_optimize_rate(RfiVariant::Bb84, ch, RfiKeyMode::Asymptotic, 1e10, &mut best), RfiStatus::Ok);
        assert!(best.rate > 0.0 && best.mu > best.nu);
        assert_eq!(rfi_optimize_rate(RfiVariant::Bb84, ch, RfiKeyMode::Finite, 1e10, &mut best), RfiStatus::InvalidArgument);
        assert_eq!(rfi_optimize_rate(RfiVariant::Three, ch, RfiKeyMode::Finite, 0.0, &mut best), RfiStatus::InvalidArgument);
        rfi_channel_free(ch);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(rfi_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let src = include_str!("../src/lib.rs");
    let header = include_str!("../include/rfiqkd.h");
    let mut exports = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
            exports += 1;
        }
    }
    assert!(exports >= 12);
    for ty in ["typedef struct RfiChannel RfiChannel;", "typedef struct RfiCounts RfiCounts;", "RFI_STATUS_PANIC = 6"] {
        assert!(header.contains(ty), "{ty}");
    }
}
