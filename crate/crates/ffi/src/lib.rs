//! C interface to `rsc-core`.
//!
//! Objects cross the boundary as opaque handles created by `rsc_*_new` /
//! `rsc_*_load` style functions and released with the matching `_free`.
//! Every fallible call returns an [`RscStatus`]; the message for the most
//! recent failure on the calling thread is available from
//! [`rsc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rsc_core::agent::{infer_qpmap, load_model, ModelMeta, QNetwork};
use rsc_core::baselines::{handcrafted_qpmap, CurveKind, MappingCurve};
use rsc_core::codec::{encode_frame_with_qpmap, qp_to_lambda, Frame, FrameEncodeResult, Qp};
use rsc_core::env::StateBuilder;
use rsc_core::eval::{bd_rate, RdCurve};
use rsc_core::semantics::ProxyOracle;
use rsc_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NotFound = 3,
    Parse = 4,
    Io = 5,
    Fit = 6,
    Eval = 7,
    Model = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Curve shapes for [`rsc_handcrafted_qpmap`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RscCurve {
    Linear = 0,
    Nonlinear = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RscBdResult {
    /// Percent.
    pub bd_br: f64,
    pub bd_metric: f64,
}

pub struct RscFrame(Frame);

pub struct RscEncoding(FrameEncodeResult);

pub struct RscModel {
    net: QNetwork<f32>,
    meta: ModelMeta,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(RscStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn status_of(e: &Error) -> RscStatus {
    match e {
        Error::InvalidInput(_) => RscStatus::InvalidInput,
        Error::NotFound(_) => RscStatus::NotFound,
        Error::Parse { .. } => RscStatus::Parse,
        Error::Io { .. } => RscStatus::Io,
        Error::Fit(_) => RscStatus::Fit,
        Error::Eval(_) => RscStatus::Eval,
        Error::Model(_) => RscStatus::Model,
        Error::Frame { source, .. } => status_of(source),
    }
}

fn null(what: &str) -> Failure {
    Failure(RscStatus::NullPointer, format!("`{what}` is null"))
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> RscStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(Failure(RscStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            RscStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(RscStatus::InvalidInput, format!("`{what}` is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn give_qps(qps: &[Qp], out: *mut u8, capacity: usize, out_len: *mut usize) -> Result<(), Failure> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = qps.len();
    if capacity < qps.len() {
        return Err(Failure(
            RscStatus::BufferTooSmall,
            format!("need room for {} QPs, got {capacity}", qps.len()),
        ));
    }
    if out.is_null() {
        return Err(null("out"));
    }
    for (i, q) in qps.iter().enumerate() {
        *out.add(i) = q.value();
    }
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `capacity`). Returns the full message length
/// excluding the terminator; 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn rsc_last_error(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

#[no_mangle]
pub extern "C" fn rsc_qp_to_lambda(qp: f64) -> f64 {
    qp_to_lambda(qp)
}

/// Builds a frame from 8-bit luma in raster order.
///
/// # Safety
/// `luma` must be valid for `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_frame_new(
    width: usize,
    height: usize,
    luma: *const u8,
    len: usize,
    out: *mut *mut RscFrame,
) -> RscStatus {
    run(|| {
        let data = slice_arg(luma, len, "luma")?;
        put(out, RscFrame(Frame::new(width, height, data.to_vec())?))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_frame_read_pgm(path: *const c_char, out: *mut *mut RscFrame) -> RscStatus {
    run(|| {
        let path = path_arg(path, "path")?;
        put(out, RscFrame(Frame::read_pgm(&path)?))
    })
}

/// # Safety
/// `frame` must come from this library; `path` must be NUL terminated.
#[no_mangle]
pub unsafe extern "C" fn rsc_frame_write_pgm(frame: *const RscFrame, path: *const c_char) -> RscStatus {
    run(|| {
        let frame = frame.as_ref().ok_or_else(|| null("frame"))?;
        let path = path_arg(path, "path")?;
        Ok(frame.0.write_pgm(&path, None)?)
    })
}

/// # Safety
/// `frame` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rsc_frame_free(frame: *mut RscFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// # Safety
/// `frame` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rsc_frame_width(frame: *const RscFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.0.width())
}

/// # Safety
/// `frame` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rsc_frame_height(frame: *const RscFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.0.height())
}

/// Number of 64×64 coding units, i.e. the length of a QP map.
///
/// # Safety
/// `frame` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rsc_frame_cu_count(frame: *const RscFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.0.cu_count())
}

/// Copies the luma plane into `out`.
///
/// # Safety
/// `frame` must be a live handle; `out` valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn rsc_frame_luma(frame: *const RscFrame, out: *mut u8, capacity: usize) -> RscStatus {
    run(|| {
        let frame = frame.as_ref().ok_or_else(|| null("frame"))?;
        let luma = frame.0.luma();
        if capacity < luma.len() {
            return Err(Failure(
                RscStatus::BufferTooSmall,
                format!("need {} bytes, got {capacity}", luma.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(luma.as_ptr(), out, luma.len());
        Ok(())
    })
}

/// Encodes with one QP per coding unit, raster order.
///
/// # Safety
/// `frame` must be a live handle; `qps` valid for `len` bytes; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_encode(
    frame: *const RscFrame,
    qps: *const u8,
    len: usize,
    out: *mut *mut RscEncoding,
) -> RscStatus {
    run(|| {
        let frame = frame.as_ref().ok_or_else(|| null("frame"))?;
        let qps = slice_arg(qps, len, "qps")?
            .iter()
            .map(|&q| Qp::new(q))
            .collect::<rsc_core::Result<Vec<_>>>()?;
        put(out, RscEncoding(encode_frame_with_qpmap(&frame.0, &qps)?))
    })
}

/// # Safety
/// `encoding` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rsc_encoding_bpp(encoding: *const RscEncoding) -> f64 {
    encoding.as_ref().map_or(f64::NAN, |e| e.0.bpp())
}

/// # Safety
/// `encoding` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rsc_encoding_total_bits(encoding: *const RscEncoding) -> f64 {
    encoding.as_ref().map_or(f64::NAN, |e| e.0.total_bits)
}

/// New frame handle holding a copy of the reconstruction.
///
/// # Safety
/// `encoding` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_encoding_reconstruction(encoding: *const RscEncoding, out: *mut *mut RscFrame) -> RscStatus {
    run(|| {
        let enc = encoding.as_ref().ok_or_else(|| null("encoding"))?;
        put(out, RscFrame(enc.0.reconstruction.clone()))
    })
}

/// # Safety
/// `encoding` must be null or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rsc_encoding_free(encoding: *mut RscEncoding) {
    if !encoding.is_null() {
        drop(Box::from_raw(encoding));
    }
}

/// # Safety
/// `path` must be NUL terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_model_load(path: *const c_char, out: *mut *mut RscModel) -> RscStatus {
    run(|| {
        let path = path_arg(path, "path")?;
        let (net, meta) = load_model(&path)?;
        put(out, RscModel { net, meta })
    })
}

/// # Safety
/// `model` must be null or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rsc_model_free(model: *mut RscModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// The α the model was trained with; NaN for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rsc_model_alpha(model: *const RscModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.meta.alpha_s)
}

/// Greedy QP map for `frame` under the proxy oracle. `*out_len` is set to
/// the CU count even when `capacity` is too small.
///
/// # Safety
/// Handles must be live; `out` valid for `capacity` bytes; `out_len`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_model_qpmap(
    model: *const RscModel,
    frame: *const RscFrame,
    out: *mut u8,
    capacity: usize,
    out_len: *mut usize,
) -> RscStatus {
    run(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let frame = frame.as_ref().ok_or_else(|| null("frame"))?;
        let sem = ProxyOracle::default().semantics(&frame.0);
        let qps = infer_qpmap(&model.net, &StateBuilder::new(&frame.0, &sem)?)?;
        give_qps(&qps, out, capacity, out_len)
    })
}

/// QP map from the importance-to-QP mapping curve under the proxy oracle.
///
/// # Safety
/// `frame` must be live; `out` valid for `capacity` bytes; `out_len`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_handcrafted_qpmap(
    frame: *const RscFrame,
    curve: RscCurve,
    out: *mut u8,
    capacity: usize,
    out_len: *mut usize,
) -> RscStatus {
    run(|| {
        let frame = frame.as_ref().ok_or_else(|| null("frame"))?;
        let kind = match curve {
            RscCurve::Linear => CurveKind::Linear,
            RscCurve::Nonlinear => CurveKind::Nonlinear,
        };
        let map = ProxyOracle::default().map(&frame.0);
        let qps = handcrafted_qpmap(&frame.0, &map, &MappingCurve::new(kind))?;
        give_qps(&qps, out, capacity, out_len)
    })
}

/// Bjontegaard deltas of a test curve against an anchor; each curve is
/// given as parallel rate and metric arrays.
///
/// # Safety
/// Arrays must be valid for their lengths; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_bd_rate(
    test_rates: *const f64,
    test_metrics: *const f64,
    test_len: usize,
    anchor_rates: *const f64,
    anchor_metrics: *const f64,
    anchor_len: usize,
    out: *mut RscBdResult,
) -> RscStatus {
    run(|| {
        let curve = |label: &str, r: *const f64, m: *const f64, n: usize| -> Result<RdCurve, Failure> {
            let r = slice_arg(r, n, "rates")?;
            let m = slice_arg(m, n, "metrics")?;
            Ok(RdCurve::new(label, r.iter().copied().zip(m.iter().copied()).collect())?)
        };
        let test = curve("test", test_rates, test_metrics, test_len)?;
        let anchor = curve("anchor", anchor_rates, anchor_metrics, anchor_len)?;
        let r = bd_rate(&test, &anchor)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = RscBdResult {
            bd_br: r.bd_br,
            bd_metric: r.bd_metric,
        };
        Ok(())
    })
}
