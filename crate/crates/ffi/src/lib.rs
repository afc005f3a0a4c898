//! C ABI over `deep_random`.
//!
//! Every function returns an `int32_t` status (`DR_OK` on success) and writes
//! results through out-pointers. Handles are opaque and must be released with
//! their `_free` function. On failure, `dr_last_error` returns a message for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use deep_random::campaign::{monte_carlo, CampaignConfig, CampaignReport};
use deep_random::dist::{Dist, Sampler};
use deep_random::drg::{Checkpoint, DrgConfig, DrgGenerator};
use deep_random::lab::zeta_member;
use deep_random::quad::SearchMode;
use deep_random::rng::Stream;
use deep_random::Error;

pub const DR_OK: i32 = 0;
pub const DR_ERR_NULL: i32 = 1;
pub const DR_ERR_INVALID: i32 = 2;
pub const DR_ERR_CONFIG: i32 = 3;
pub const DR_ERR_PARSE: i32 = 4;
pub const DR_ERR_NOT_MATURE: i32 = 5;
pub const DR_ERR_NOT_IN_ZETA: i32 = 6;
pub const DR_ERR_BUFFER: i32 = 7;
pub const DR_ERR_CHECKPOINT: i32 = 8;
pub const DR_ERR_OTHER: i32 = 9;
pub const DR_ERR_PANIC: i32 = 10;

/// Opaque probability distribution over {0,1}^n.
pub struct DrDist(Dist);

/// Opaque deep random generator.
pub struct DrDrg(DrgGenerator);

/// Opaque campaign report.
pub struct DrReport(CampaignReport);

thread_local! {
    static LAST: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last(msg: String) {
    LAST.with(|l| *l.borrow_mut() = msg);
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::DimensionMismatch { .. } | Error::Capability(_) => DR_ERR_INVALID,
        Error::Config(_) => DR_ERR_CONFIG,
        Error::Parse { .. } | Error::Json(_) => DR_ERR_PARSE,
        Error::NotMature { .. } => DR_ERR_NOT_MATURE,
        Error::NotInZeta { .. } => DR_ERR_NOT_IN_ZETA,
        Error::Checkpoint(_) => DR_ERR_CHECKPOINT,
        _ => DR_ERR_OTHER,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last(String::new());
            DR_OK
        }
        Ok(Err(Fail(code, msg))) => {
            set_last(msg);
            code
        }
        Err(_) => {
            set_last("panic inside deep_random".into());
            DR_ERR_PANIC
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(DR_ERR_NULL, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(DR_ERR_INVALID, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// Copies `s` plus a NUL into `buf`. `needed` always receives the full size.
unsafe fn write_str(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Fail> {
    if !needed.is_null() {
        *needed = s.len() + 1;
    }
    if buf.is_null() && len == 0 {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < s.len() + 1 {
        return Err(Fail(DR_ERR_BUFFER, format!("buffer of {len} bytes, need {}", s.len() + 1)));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Message of the last failed call on this thread. Empty after a success.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn dr_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> i32 {
    let msg = LAST.with(|l| l.borrow().clone());
    match write_str(&msg, buf, len, needed) {
        Ok(()) => DR_OK,
        Err(Fail(code, _)) => code,
    }
}

/// Parses the text distribution format.
///
/// # Safety
/// `src` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_dist_from_text(src: *const c_char, out: *mut *mut DrDist) -> i32 {
    guard(|| {
        let d = Dist::from_text(text(src, "src")?)?;
        put(out, DrDist(d))
    })
}

/// Uniform distribution over {0,1}^n.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_dist_uniform(n: usize, out: *mut *mut DrDist) -> i32 {
    guard(|| put(out, DrDist(Dist::uniform(n)?)))
}

/// # Safety
/// `d` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dr_dist_free(d: *mut DrDist) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be a live handle; `n` and `support` must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn dr_dist_shape(d: *const DrDist, n: *mut usize, support: *mut usize) -> i32 {
    guard(|| {
        let d = &borrow(d, "dist")?.0;
        if !n.is_null() {
            *n = d.n();
        }
        if !support.is_null() {
            *support = d.support_size();
        }
        Ok(())
    })
}

/// Serializes to the text format. Call with a null buffer to learn the size.
///
/// # Safety
/// `d` must be a live handle; `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dr_dist_to_text(d: *const DrDist, buf: *mut c_char, len: usize, needed: *mut usize) -> i32 {
    guard(|| write_str(&borrow(d, "dist")?.0.to_text(), buf, len, needed))
}

/// Draws one point into `bits` (one byte per coordinate, 0 or 1).
///
/// # Safety
/// `d` must be a live handle; `bits` must hold `len >= n` bytes.
#[no_mangle]
pub unsafe extern "C" fn dr_dist_sample(d: *const DrDist, seed: u64, bits: *mut u8, len: usize) -> i32 {
    guard(|| {
        let d = &borrow(d, "dist")?.0;
        if bits.is_null() {
            return Err(null("bits"));
        }
        if len < d.n() {
            return Err(Fail(DR_ERR_BUFFER, format!("buffer of {len} bytes, need {}", d.n())));
        }
        let x = Sampler::new(d).sample(&mut Stream::new(seed));
        for (s, b) in x.to_bools().into_iter().enumerate() {
            *bits.add(s) = b as u8;
        }
        Ok(())
    })
}

/// Membership in zeta(alpha).
///
/// # Safety
/// `d` must be a live handle; `member` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_dist_in_zeta(d: *const DrDist, alpha: f64, seed: u64, member: *mut bool) -> i32 {
    guard(|| {
        let d = &borrow(d, "dist")?.0;
        let m = zeta_member(d, alpha, SearchMode::Auto, &mut Stream::new(seed))?;
        *borrow_mut(member, "member")? = m;
        Ok(())
    })
}

/// New generator. `maturity == 0` keeps the computed maturity.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_drg_new(
    n: usize,
    k: f64,
    alpha: f64,
    seed: u64,
    sequences: usize,
    maturity: u64,
    out: *mut *mut DrDrg,
) -> i32 {
    guard(|| {
        let mut c = DrgConfig::new(n, k, alpha, seed);
        c.sequences = sequences;
        if maturity > 0 {
            c.maturity_steps = Some(maturity);
        }
        put(out, DrDrg(DrgGenerator::new(c)?))
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dr_drg_free(g: *mut DrDrg) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Advances every sequence by `steps`.
///
/// # Safety
/// `g` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dr_drg_run(g: *mut DrDrg, steps: u64) -> i32 {
    guard(|| {
        borrow_mut(g, "drg")?.0.run(steps)?;
        Ok(())
    })
}

/// # Safety
/// `g` must be a live handle; `mature` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_drg_is_mature(g: *const DrDrg, mature: *mut bool) -> i32 {
    guard(|| {
        *borrow_mut(mature, "mature")? = borrow(g, "drg")?.0.is_mature();
        Ok(())
    })
}

/// Elects a distribution; fails with `DR_ERR_NOT_MATURE` before maturity.
///
/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_drg_elect(g: *mut DrDrg, out: *mut *mut DrDist) -> i32 {
    guard(|| {
        let d = borrow_mut(g, "drg")?.0.elect()?;
        put(out, DrDist(d))
    })
}

/// Checkpoint as JSON.
///
/// # Safety
/// `g` must be a live handle; `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dr_drg_checkpoint(g: *const DrDrg, buf: *mut c_char, len: usize, needed: *mut usize) -> i32 {
    guard(|| {
        let json = serde_json::to_string(&borrow(g, "drg")?.0.checkpoint()).map_err(Error::from)?;
        write_str(&json, buf, len, needed)
    })
}

/// Rebuilds a generator from a checkpoint.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_drg_restore(json: *const c_char, out: *mut *mut DrDrg) -> i32 {
    guard(|| {
        let cp: Checkpoint = serde_json::from_str(text(json, "json")?).map_err(Error::from)?;
        put(out, DrDrg(DrgGenerator::restore(cp)?))
    })
}

/// Runs a Monte Carlo campaign from a TOML config (empty string for defaults).
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dr_campaign_run(toml: *const c_char, out: *mut *mut DrReport) -> i32 {
    guard(|| {
        let cfg = CampaignConfig::from_toml(text(toml, "toml")?)?;
        let run = monte_carlo(&cfg, false)?;
        put(out, DrReport(run.report))
    })
}

/// # Safety
/// `r` must be a live handle; `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dr_report_json(r: *const DrReport, buf: *mut c_char, len: usize, needed: *mut usize) -> i32 {
    guard(|| {
        let json = serde_json::to_string(&borrow(r, "report")?.0).map_err(Error::from)?;
        write_str(&json, buf, len, needed)
    })
}

/// Counts of blocks, kept blocks and aborted blocks.
///
/// # Safety
/// `r` must be a live handle; out-pointers must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn dr_report_counts(r: *const DrReport, blocks: *mut u64, kept: *mut u64, aborted: *mut u64) -> i32 {
    guard(|| {
        let r = &borrow(r, "report")?.0;
        for (p, v) in [(blocks, r.blocks), (kept, r.kept), (aborted, r.aborted)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `r` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dr_report_free(r: *mut DrReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
