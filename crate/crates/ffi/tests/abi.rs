use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use ncbasis_ffi::*;

fn last_error() -> String {
    let p = nc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_system(num: u64, den: u64, level: usize) -> *mut NcHaarSystem {
    let mut h = ptr::null_mut();
    let st = unsafe { nc_haar_new(num, den, level, NcSide::Left, &mut h) };
    assert_eq!(st, NcStatus::Ok);
    h
}

#[test]
fn construction_and_round_trip() {
    let h = new_system(1, 3, 2);
    unsafe {
        assert_eq!(nc_haar_len(h), 16);
        assert_eq!(nc_haar_dim(h), 4);
        let mut g = f64::NAN;
        assert_eq!(nc_haar_gram_residual(h, &mut g), NcStatus::Ok);
        assert!(g < 1e-12);

        let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut c = vec![0.0; 32];
        assert_eq!(nc_haar_analyze(h, x.as_ptr(), c.as_mut_ptr(), c.len()), NcStatus::Ok);
        let mut back = vec![0.0; 32];
        assert_eq!(
            nc_haar_synthesize(h, c.as_ptr(), back.as_mut_ptr(), back.len()),
            NcStatus::Ok
        );
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut small = vec![0.0; 4];
        assert_eq!(
            nc_haar_analyze(h, x.as_ptr(), small.as_mut_ptr(), small.len()),
            NcStatus::BufferSize
        );
        nc_haar_free(h);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut h = ptr::null_mut();
    let st = unsafe { nc_haar_new(7, 10, 1, NcSide::Left, &mut h) };
    assert_eq!(st, NcStatus::Domain);
    assert!(h.is_null());
    assert!(last_error().contains("alpha"));

    let st = unsafe { nc_haar_new(1, 2, 1, NcSide::Left, ptr::null_mut()) };
    assert_eq!(st, NcStatus::NullPointer);

    unsafe {
        assert_eq!(nc_haar_len(ptr::null()), 0);
        nc_haar_free(ptr::null_mut());
        nc_report_free(ptr::null_mut());
        nc_string_free(ptr::null_mut());
    }
}

#[test]
fn norms_and_bounds() {
    let eye = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(nc_schatten_norm(2, eye.as_ptr(), 1.0, &mut out), NcStatus::Ok);
        assert!((out - 2.0).abs() < 1e-15);
        assert_eq!(nc_schatten_norm(2, eye.as_ptr(), f64::INFINITY, &mut out), NcStatus::Ok);
        assert!((out - 1.0).abs() < 1e-15);
        // ‖I A‖₁ = Tr A = 1
        assert_eq!(
            nc_weighted_norm(2, eye.as_ptr(), 1, 3, 1.0, NcNormSide::Left, &mut out),
            NcStatus::Ok
        );
        assert!((out - 1.0).abs() < 1e-15);
        assert_eq!(
            nc_schatten_norm(2, eye.as_ptr(), 0.5, &mut out),
            NcStatus::Domain
        );

        let h = new_system(1, 2, 2);
        assert_eq!(nc_haar_theoretical_bound(h, 1.0, &mut out), NcStatus::Ok);
        assert!((out - 7.0).abs() < 1e-12);
        nc_haar_free(h);
    }
}

#[test]
fn certify_report_handle() {
    let h = new_system(1, 2, 1);
    let strategy = NcStrategy {
        samples: 200,
        restarts: 4,
        iterations: 50,
        seed: 1,
    };
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(nc_certify(h, 1.0, NcNormSide::Left, strategy, &mut r), NcStatus::Ok);
        assert_eq!(nc_report_passed(r), 1);
        assert_eq!(nc_report_rows(r), 5);
        assert!(nc_report_max_estimate(r) <= 4.0 + 1e-6);
        let mut s = ptr::null_mut();
        assert_eq!(nc_report_csv(r, &mut s), NcStatus::Ok);
        let csv = CStr::from_ptr(s).to_str().unwrap().to_owned();
        assert!(csv.starts_with("alpha,level,p,side,m,estimate,bound,method,samples,seed,pass\n"));
        nc_string_free(s);
        nc_report_free(r);

        let mut r2 = ptr::null_mut();
        let st = nc_certify(h, 1.0, NcNormSide::Right, strategy, &mut r2);
        assert_eq!(st, NcStatus::Domain);
        assert!(r2.is_null());
        nc_haar_free(h);
    }
    assert_eq!(nc_strategy_default(3).samples, 10_000);
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ncbasis.h");
    let text = std::fs::read_to_string(&header).expect("generated header");
    for name in [
        "nc_haar_new",
        "nc_haar_analyze",
        "nc_certify",
        "nc_report_csv",
        "nc_last_error_message",
        "NC_STATUS_NUMERIC_FAILURE",
        "typedef struct NcHaarSystem NcHaarSystem",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
    let src = CString::new("#include \"ncbasis.h\"\nint main(void) { return NC_STATUS_OK; }\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("probe.c");
    std::fs::write(&file, src.as_bytes()).unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&file)
        .status()
    {
        Ok(status) => assert!(status.success()),
        Err(_) => eprintln!("no C compiler found, skipping syntax check"),
    }
}
