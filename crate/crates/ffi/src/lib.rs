//! C ABI for the panoptic-forge toolkit.
//!
//! Conventions: functions return [`PfStatus`]; results come back through out
//! parameters. Handles (`PfPanopticMap`, `PfLabelSpace`, `PfPqStats`) are
//! opaque and must be released with their `_free` function. Strings returned
//! by the library are freed with `pf_string_free`. On any non-OK status the
//! failing thread's message is available via `pf_last_error_message`. The
//! header is generated into `include/panoptic_forge.h` at build time.
//!
//! Safety contract shared by all entry points: pointer arguments must be
//! valid for the stated length or NUL-terminated, handles must come from
//! this library and not have been freed, and out parameters must be
//! writable. Null handles and null out pointers are rejected with
//! `PfErrInvalidArgument` rather than dereferenced.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use libc::{c_char, size_t};

use panoptic_forge::label_space::Category;
use panoptic_forge::metrics::{finalize, match_segments, PqStats};
use panoptic_forge::raster::{encode_id_rgb, read_panoptic, write_panoptic, PanopticMap};
use panoptic_forge::{fuse_logits, JointLabelSpace};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    PfOk = 0,
    PfErrInvalidArgument = 1,
    PfErrIo = 2,
    PfErrFormat = 3,
    PfErrMismatch = 4,
    PfErrInternal = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl std::fmt::Display) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
}

fn fail(status: PfStatus, message: impl std::fmt::Display) -> PfStatus {
    set_error(message);
    status
}

/// Copy the current thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length in
/// bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn pf_last_error_message(buf: *mut c_char, len: size_t) -> size_t {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

fn guard<F: FnOnce() -> PfStatus>(f: F) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(PfStatus::PfErrInternal, "internal invariant violation"),
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a Path, PfStatus> {
    if ptr.is_null() {
        return Err(fail(
            PfStatus::PfErrInvalidArgument,
            format!("{name} is null"),
        ));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(text) => Ok(Path::new(text)),
        Err(_) => Err(fail(
            PfStatus::PfErrInvalidArgument,
            format!("{name} is not valid UTF-8"),
        )),
    }
}

// ---------------------------------------------------------------------------
// Fused logits
// ---------------------------------------------------------------------------

/// Elementwise fused score `(sigmoid(a) + sigmoid(b)) * (a + b)` over two
/// equally sized planes of `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pf_fuse_logits(
    a: *const f64,
    b: *const f64,
    len: size_t,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return fail(PfStatus::PfErrInvalidArgument, "null plane pointer");
        }
        let a = std::slice::from_raw_parts(a, len);
        let b = std::slice::from_raw_parts(b, len);
        match fuse_logits(a, b) {
            Ok(fused) => {
                std::ptr::copy_nonoverlapping(fused.as_ptr(), out, len);
                PfStatus::PfOk
            }
            Err(err) => fail(PfStatus::PfErrMismatch, err),
        }
    })
}

// ---------------------------------------------------------------------------
// Segment id encoding
// ---------------------------------------------------------------------------

/// Pack a segment id (< 2^24) into RGB channels, lowest byte in R.
#[no_mangle]
pub unsafe extern "C" fn pf_encode_id_rgb(id: u32, r: *mut u8, g: *mut u8, b: *mut u8) -> PfStatus {
    guard(|| {
        if r.is_null() || g.is_null() || b.is_null() {
            return fail(PfStatus::PfErrInvalidArgument, "null channel pointer");
        }
        match encode_id_rgb(id) {
            Ok((rv, gv, bv)) => {
                *r = rv;
                *g = gv;
                *b = bv;
                PfStatus::PfOk
            }
            Err(err) => fail(PfStatus::PfErrInvalidArgument, err),
        }
    })
}

/// Inverse of `pf_encode_id_rgb`; total on all byte triples.
#[no_mangle]
pub extern "C" fn pf_decode_id_rgb(r: u8, g: u8, b: u8) -> u32 {
    panoptic_forge::raster::decode_id_rgb(r, g, b)
}

// ---------------------------------------------------------------------------
// Panoptic maps
// ---------------------------------------------------------------------------

/// Opaque panoptic map handle.
pub struct PfPanopticMap {
    inner: PanopticMap,
}

/// Read an id-encoded PNG and its JSON record into a new map handle.
#[no_mangle]
pub unsafe extern "C" fn pf_panoptic_read(
    png_path: *const c_char,
    json_path: *const c_char,
    out: *mut *mut PfPanopticMap,
) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return fail(PfStatus::PfErrInvalidArgument, "out is null");
        }
        let png = match path_arg(png_path, "png_path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let json = match path_arg(json_path, "json_path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match read_panoptic(png, json) {
            Ok(map) => {
                *out = Box::into_raw(Box::new(PfPanopticMap { inner: map }));
                PfStatus::PfOk
            }
            Err(err @ panoptic_forge::raster::RasterError::Io { .. }) => {
                fail(PfStatus::PfErrIo, err)
            }
            Err(err) => fail(PfStatus::PfErrFormat, err),
        }
    })
}

/// Write a map as PNG + JSON record (atomic, areas recomputed).
#[no_mangle]
pub unsafe extern "C" fn pf_panoptic_write(
    map: *const PfPanopticMap,
    png_path: *const c_char,
    json_path: *const c_char,
) -> PfStatus {
    guard(|| {
        if map.is_null() {
            return fail(PfStatus::PfErrInvalidArgument, "map is null");
        }
        let png = match path_arg(png_path, "png_path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let json = match path_arg(json_path, "json_path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match write_panoptic(&(*map).inner, png, json) {
            Ok(()) => PfStatus::PfOk,
            Err(err) => fail(PfStatus::PfErrIo, err),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_panoptic_free(map: *mut PfPanopticMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pf_panoptic_width(map: *const PfPanopticMap) -> u32 {
    if map.is_null() {
        return 0;
    }
    (*map).inner.width()
}

#[no_mangle]
pub unsafe extern "C" fn pf_panoptic_height(map: *const PfPanopticMap) -> u32 {
    if map.is_null() {
        return 0;
    }
    (*map).inner.height()
}

#[no_mangle]
pub unsafe extern "C" fn pf_panoptic_segment_count(map: *const PfPanopticMap) -> size_t {
    if map.is_null() {
        return 0;
    }
    (*map).inner.segments().len()
}

// ---------------------------------------------------------------------------
// Label spaces
// ---------------------------------------------------------------------------

/// Opaque joint label space handle.
pub struct PfLabelSpace {
    inner: JointLabelSpace,
}

/// Load a serialized joint label space from a JSON file.
#[no_mangle]
pub unsafe extern "C" fn pf_label_space_read(
    path: *const c_char,
    out: *mut *mut PfLabelSpace,
) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return fail(PfStatus::PfErrInvalidArgument, "out is null");
        }
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let text = match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(err) => return fail(PfStatus::PfErrIo, err),
        };
        match JointLabelSpace::from_json(&text) {
            Ok(space) => {
                *out = Box::into_raw(Box::new(PfLabelSpace { inner: space }));
                PfStatus::PfOk
            }
            Err(err) => fail(PfStatus::PfErrFormat, err),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_label_space_free(space: *mut PfLabelSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pf_label_space_num_classes(space: *const PfLabelSpace) -> u32 {
    if space.is_null() {
        return 0;
    }
    (*space).inner.num_classes()
}

/// Category of a joint id: 0 void, 1 stuff, 2 thing.
#[no_mangle]
pub unsafe extern "C" fn pf_label_space_category_of(
    space: *const PfLabelSpace,
    joint_id: u32,
    category: *mut i32,
) -> PfStatus {
    guard(|| {
        if space.is_null() || category.is_null() {
            return fail(PfStatus::PfErrInvalidArgument, "null argument");
        }
        match (*space).inner.category_of(joint_id) {
            Ok(None) => {
                *category = 0;
                PfStatus::PfOk
            }
            Ok(Some(Category::Stuff)) => {
                *category = 1;
                PfStatus::PfOk
            }
            Ok(Some(Category::Thing)) => {
                *category = 2;
                PfStatus::PfOk
            }
            Err(err) => fail(PfStatus::PfErrInvalidArgument, err),
        }
    })
}

/// Joint id for a `(dataset, local class)` pair; 0 when unmapped.
#[no_mangle]
pub unsafe extern "C" fn pf_label_space_remap(
    space: *const PfLabelSpace,
    dataset_id: *const c_char,
    local_id: u32,
) -> u32 {
    if space.is_null() || dataset_id.is_null() {
        return 0;
    }
    let dataset = match CStr::from_ptr(dataset_id).to_str() {
        Ok(text) => text,
        Err(_) => return 0,
    };
    (*space).inner.remap(dataset, local_id).unwrap_or(0)
}

// ---------------------------------------------------------------------------
// PQ evaluation
// ---------------------------------------------------------------------------

/// Opaque PQ accumulator handle.
pub struct PfPqStats {
    inner: PqStats,
}

#[no_mangle]
pub extern "C" fn pf_pq_stats_new() -> *mut PfPqStats {
    Box::into_raw(Box::new(PfPqStats {
        inner: PqStats::new(),
    }))
}

#[no_mangle]
pub unsafe extern "C" fn pf_pq_stats_free(stats: *mut PfPqStats) {
    if !stats.is_null() {
        drop(Box::from_raw(stats));
    }
}

/// Match one prediction/ground-truth pair and accumulate into `stats`.
#[no_mangle]
pub unsafe extern "C" fn pf_pq_match_segments(
    pred: *const PfPanopticMap,
    gt: *const PfPanopticMap,
    stats: *mut PfPqStats,
) -> PfStatus {
    guard(|| {
        if pred.is_null() || gt.is_null() || stats.is_null() {
            return fail(PfStatus::PfErrInvalidArgument, "null argument");
        }
        match match_segments(&(*pred).inner, &(*gt).inner) {
            Ok(image_stats) => {
                (*stats).inner.merge(&image_stats);
                PfStatus::PfOk
            }
            Err(err) => fail(PfStatus::PfErrMismatch, err),
        }
    })
}

/// Componentwise accumulate `other` into `into`.
#[no_mangle]
pub unsafe extern "C" fn pf_pq_merge(into: *mut PfPqStats, other: *const PfPqStats) -> PfStatus {
    guard(|| {
        if into.is_null() || other.is_null() {
            return fail(PfStatus::PfErrInvalidArgument, "null argument");
        }
        (*into).inner.merge(&(*other).inner);
        PfStatus::PfOk
    })
}

/// Finalize the accumulator into a PQ/SQ/RQ report rendered as a JSON
/// string (values in [0, 1]). Free the string with `pf_string_free`.
#[no_mangle]
pub unsafe extern "C" fn pf_pq_report_json(
    stats: *const PfPqStats,
    space: *const PfLabelSpace,
    out: *mut *mut c_char,
) -> PfStatus {
    guard(|| {
        if stats.is_null() || space.is_null() || out.is_null() {
            return fail(PfStatus::PfErrInvalidArgument, "null argument");
        }
        let report = match finalize(&(*stats).inner, &(*space).inner) {
            Ok(report) => report,
            Err(err) => return fail(PfStatus::PfErrMismatch, err),
        };
        let text = match serde_json::to_string(&report) {
            Ok(text) => text,
            Err(err) => return fail(PfStatus::PfErrInternal, err),
        };
        match CString::new(text) {
            Ok(cstring) => {
                *out = cstring.into_raw();
                PfStatus::PfOk
            }
            Err(err) => fail(PfStatus::PfErrInternal, err),
        }
    })
}

/// Free a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn pf_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

/// Learning rate of the published training schedule at an iteration
/// (base 0.01, 200-iteration warm-up from 1/3, decade drops at 400k/520k).
#[no_mangle]
pub extern "C" fn pf_default_lr_at(iter: u64) -> f64 {
    panoptic_forge::data_plan::LrSchedule::default().lr_at(iter)
}
