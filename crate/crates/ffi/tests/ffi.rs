use std::ffi::{c_char, CStr, CString};
use std::ptr;

use deep_random_ffi::*;

fn read(f: impl Fn(*mut c_char, usize, *mut usize) -> i32) -> String {
    let mut needed = 0usize;
    assert_eq!(f(ptr::null_mut(), 0, &mut needed), DR_OK);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(f(buf.as_mut_ptr(), buf.len(), &mut needed), DR_OK);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

fn last_error() -> String {
    read(|b, l, n| unsafe { dr_last_error(b, l, n) })
}

#[test]
fn dist_text_round_trip_and_sampling() {
    let src = CString::new("n 4\nsupport 2\n1100 0.25\n0011 0.75\n").unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { dr_dist_from_text(src.as_ptr(), &mut d) }, DR_OK);
    let (mut n, mut s) = (0, 0);
    assert_eq!(unsafe { dr_dist_shape(d, &mut n, &mut s) }, DR_OK);
    assert_eq!((n, s), (4, 2));

    let text = read(|b, l, nd| unsafe { dr_dist_to_text(d, b, l, nd) });
    assert!(text.starts_with("n 4\nsupport 2\n"), "{text}");

    let mut bits = [9u8; 4];
    assert_eq!(unsafe { dr_dist_sample(d, 3, bits.as_mut_ptr(), 4) }, DR_OK);
    assert!(bits == [1, 1, 0, 0] || bits == [0, 0, 1, 1], "{bits:?}");
    assert_eq!(unsafe { dr_dist_sample(d, 3, bits.as_mut_ptr(), 3) }, DR_ERR_BUFFER);

    let mut small = [0 as c_char; 4];
    assert_eq!(unsafe { dr_dist_to_text(d, small.as_mut_ptr(), 4, ptr::null_mut()) }, DR_ERR_BUFFER);
    unsafe { dr_dist_free(d) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new("n 4\n11 1.0\n").unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { dr_dist_from_text(bad.as_ptr(), &mut d) }, DR_ERR_PARSE);
    assert!(d.is_null());
    assert!(last_error().contains("line 2"));

    assert_eq!(unsafe { dr_dist_from_text(ptr::null(), &mut d) }, DR_ERR_NULL);
    assert_eq!(unsafe { dr_dist_shape(ptr::null(), ptr::null_mut(), ptr::null_mut()) }, DR_ERR_NULL);

    let cfg = CString::new("gauge = -1.0\n").unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { dr_campaign_run(cfg.as_ptr(), &mut r) }, DR_ERR_CONFIG);
    assert!(last_error().contains("gauge"));

    let mut u = ptr::null_mut();
    assert_eq!(unsafe { dr_dist_uniform(4, &mut u) }, DR_OK);
    assert_eq!(last_error(), "");
    unsafe { dr_dist_free(u) };
    unsafe { dr_dist_free(ptr::null_mut()) };
}

#[test]
fn generator_checkpoint_and_election() {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { dr_drg_new(8, 2.0, 0.001, 1, 2, 10, &mut g) }, DR_OK);
    assert_eq!(unsafe { dr_drg_run(g, 4) }, DR_OK);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { dr_drg_elect(g, &mut d) }, DR_ERR_NOT_MATURE);

    let cp = CString::new(read(|b, l, n| unsafe { dr_drg_checkpoint(g, b, l, n) })).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { dr_drg_restore(cp.as_ptr(), &mut h) }, DR_OK);
    for x in [g, h] {
        assert_eq!(unsafe { dr_drg_run(x, 6) }, DR_OK);
        let mut mature = false;
        assert_eq!(unsafe { dr_drg_is_mature(x, &mut mature) }, DR_OK);
        assert!(mature);
    }
    let mut e1 = ptr::null_mut();
    let mut e2 = ptr::null_mut();
    assert_eq!(unsafe { dr_drg_elect(g, &mut e1) }, DR_OK, "{}", last_error());
    assert_eq!(unsafe { dr_drg_elect(h, &mut e2) }, DR_OK);
    let t1 = read(|b, l, n| unsafe { dr_dist_to_text(e1, b, l, n) });
    let t2 = read(|b, l, n| unsafe { dr_dist_to_text(e2, b, l, n) });
    assert_eq!(t1, t2);
    let mut member = false;
    assert_eq!(unsafe { dr_dist_in_zeta(e1, 0.001, 0, &mut member) }, DR_OK);
    assert!(member);
    unsafe {
        dr_dist_free(e1);
        dr_dist_free(e2);
        dr_drg_free(g);
        dr_drg_free(h);
    }
}

#[test]
fn campaign_report() {
    let cfg = CString::new("n = 8\ntrials = 20\npool = 2\ndrg_steps = 20\n").unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { dr_campaign_run(cfg.as_ptr(), &mut r) }, DR_OK, "{}", last_error());
    let (mut blocks, mut kept, mut aborted) = (0, 0, 0);
    assert_eq!(unsafe { dr_report_counts(r, &mut blocks, &mut kept, &mut aborted) }, DR_OK);
    assert_eq!(blocks, 20);
    assert!(kept + aborted <= blocks);
    let json = read(|b, l, n| unsafe { dr_report_json(r, b, l, n) });
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["kept"], kept);
    unsafe { dr_report_free(r) };
}

#[test]
fn header_declares_the_api() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let h = std::fs::read_to_string(format!("{dir}/include/deep_random.h")).unwrap();
    for sym in ["dr_dist_from_text", "dr_drg_elect", "dr_campaign_run", "dr_last_error", "typedef struct DrDist DrDist", "DR_ERR_PANIC"] {
        assert!(h.contains(sym), "{sym}");
    }
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", &format!("{dir}/include/deep_random.h")])
        .output()
    else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
