//! C ABI over the `cmvc` crate.
//!
//! Conventions:
//! - every fallible call returns a [`CmvcStatus`]; on failure
//!   [`cmvc_last_error`] describes it (per thread, valid until the next call
//!   on that thread);
//! - results come back through out-pointers as opaque handles
//!   ([`CmvcVideo`], [`CmvcBuffer`]) that the caller releases with the
//!   matching `*_free` function;
//! - strings are NUL-terminated UTF-8; byte arrays are pointer + length.
//!
//! The header `include/cmvc.h` is generated from this file at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use cmvc::backend::BackendSpec;
use cmvc::bitstream::Mode;
use cmvc::codec::QualityFactor;
use cmvc::eval::{bd_rate, psnr, RdCurve};
use cmvc::keyframe::{select_keyframes, Strategy};
use cmvc::model::{load_raw_video, Geometry};
use cmvc::optimize::OptimizerConfig;
use cmvc::pipeline::{decode_with_jobs, encode, EncodeConfig, TextSidecar};
use cmvc::{Error, FrameRate, RawVideo};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmvcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    MalformedInput = 3,
    TooShort = 4,
    Contract = 5,
    MalformedPayload = 6,
    UnsupportedStream = 7,
    CorruptStream = 8,
    MalformedStream = 9,
    NoOverlap = 10,
    BackendUnavailable = 11,
    ProtocolViolation = 12,
    NumericalFailure = 13,
    Io = 14,
    BufferTooSmall = 15,
    Panic = 16,
}

impl From<&Error> for CmvcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::MalformedInput(_) => CmvcStatus::MalformedInput,
            Error::TooShort { .. } => CmvcStatus::TooShort,
            Error::Contract(_) => CmvcStatus::Contract,
            Error::MalformedPayload(_) => CmvcStatus::MalformedPayload,
            Error::UnsupportedStream(_) => CmvcStatus::UnsupportedStream,
            Error::CorruptStream { .. } => CmvcStatus::CorruptStream,
            Error::MalformedStream(_) => CmvcStatus::MalformedStream,
            Error::NoOverlap => CmvcStatus::NoOverlap,
            Error::BackendUnavailable(_) => CmvcStatus::BackendUnavailable,
            Error::ProtocolViolation(_) => CmvcStatus::ProtocolViolation,
            Error::NumericalFailure(_) => CmvcStatus::NumericalFailure,
            Error::Config(_) => CmvcStatus::InvalidArgument,
            Error::Io(_) => CmvcStatus::Io,
        }
    }
}

/// A decoded or loaded video. Opaque.
pub struct CmvcVideo(RawVideo);

/// An owned byte array, e.g. an encoded stream. Opaque.
pub struct CmvcBuffer(Vec<u8>);

/// Encoder settings. Start from [`cmvc_encode_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CmvcEncodeOptions {
    /// 0 = text only (TT2V), 1 = image + text (IT2V).
    pub mode: u8,
    pub n_keyframes: u32,
    /// 0 = cosine, 1 = mse, 2 = uniform, 3 = random.
    pub strategy: u8,
    /// 64, 128 or 256.
    pub quality: u32,
    /// Nonzero fits and transmits per-frame generation weights.
    pub optimize: u8,
    pub training_steps: u32,
    pub learning_rate: f64,
    pub seed: u64,
    /// Worker threads; 0 = all cores.
    pub jobs: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let mut message = message.into();
    message.retain(|c| c != '\0');
    let c = CString::new(message).expect("NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: CmvcStatus, message: impl Into<String>) -> CmvcStatus {
    set_error(message);
    status
}

struct Failure(CmvcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CmvcStatus::NullArgument, format!("{what} is NULL"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(CmvcStatus::InvalidArgument, message.into())
}

/// Runs `f`, turning errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CmvcStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmvcStatus::Ok,
        Ok(Err(Failure(status, message))) => fail(status, message),
        Err(_) => fail(CmvcStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn bytes_arg<'a>(p: *const u8, len: usize, what: &str) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn video_arg<'a>(p: *const CmvcVideo, what: &str) -> Result<&'a RawVideo, Failure> {
    p.as_ref().map(|v| &v.0).ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn backend_spec(s: Option<&str>) -> Result<BackendSpec, Failure> {
    Ok(s.map(str::parse).transpose()?.unwrap_or(BackendSpec::Linear))
}

fn geometry(
    width: u32,
    height: u32,
    planes: u32,
    fps_num: u32,
    fps_den: u32,
) -> Result<(Geometry, FrameRate), Failure> {
    Ok((Geometry::new(width as usize, height as usize, planes as usize)?, FrameRate::new(fps_num, fps_den)?))
}

fn strategy(code: u8) -> Result<Strategy, Failure> {
    match code {
        0 => Ok(Strategy::Cosine),
        1 => Ok(Strategy::Mse),
        2 => Ok(Strategy::Uniform),
        3 => Ok(Strategy::Random),
        _ => Err(invalid(format!("unknown strategy code {code}"))),
    }
}

/// Message for the last failed call on this thread, or NULL after a
/// success. Owned by the library.
#[no_mangle]
pub extern "C" fn cmvc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cmvc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn cmvc_encode_options_default() -> CmvcEncodeOptions {
    let cfg = EncodeConfig::default();
    let opt = OptimizerConfig::default();
    CmvcEncodeOptions {
        mode: 1,
        n_keyframes: cfg.n_keyframes as u32,
        strategy: 0,
        quality: cfg.quality.value(),
        optimize: 0,
        training_steps: opt.training_steps as u32,
        learning_rate: opt.learning_rate,
        seed: cfg.seed,
        jobs: 0,
    }
}

/// Wraps raw planar 8-bit samples (frame, then plane, then row order).
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmvc_video_from_bytes(
    data: *const u8,
    len: usize,
    width: u32,
    height: u32,
    planes: u32,
    fps_num: u32,
    fps_den: u32,
    out: *mut *mut CmvcVideo,
) -> CmvcStatus {
    guard(|| {
        let bytes = bytes_arg(data, len, "data")?;
        let (g, fps) = geometry(width, height, planes, fps_num, fps_den)?;
        put(out, CmvcVideo(RawVideo::from_bytes(bytes, g, fps)?))
    })
}

/// Reads a headerless raw video file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmvc_video_load(
    path: *const c_char,
    width: u32,
    height: u32,
    planes: u32,
    fps_num: u32,
    fps_den: u32,
    out: *mut *mut CmvcVideo,
) -> CmvcStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let (_, fps) = geometry(width, height, planes, fps_num, fps_den)?;
        let v = load_raw_video(path, width as usize, height as usize, planes as usize, fps)?;
        put(out, CmvcVideo(v))
    })
}

/// # Safety
/// `video` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cmvc_video_free(video: *mut CmvcVideo) {
    if !video.is_null() {
        drop(Box::from_raw(video));
    }
}

/// Frame count, or 0 for NULL.
///
/// # Safety
/// `video` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cmvc_video_frame_count(video: *const CmvcVideo) -> usize {
    video.as_ref().map_or(0, |v| v.0.len())
}

/// Writes width, height and planes; any out-pointer may be NULL.
///
/// # Safety
/// `video` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmvc_video_geometry(
    video: *const CmvcVideo,
    width: *mut u32,
    height: *mut u32,
    planes: *mut u32,
) -> CmvcStatus {
    guard(|| {
        let v = video_arg(video, "video")?;
        for (p, value) in [(width, v.width()), (height, v.height()), (planes, v.planes())] {
            if !p.is_null() {
                *p = value as u32;
            }
        }
        Ok(())
    })
}

/// Copies the samples out in raw file order.
///
/// # Safety
/// `video` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmvc_video_to_bytes(video: *const CmvcVideo, out: *mut *mut CmvcBuffer) -> CmvcStatus {
    guard(|| put(out, CmvcBuffer(video_arg(video, "video")?.to_bytes())))
}

/// # Safety
/// `buffer` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cmvc_buffer_data(buffer: *const CmvcBuffer) -> *const u8 {
    buffer.as_ref().map_or(ptr::null(), |b| b.0.as_ptr())
}

/// # Safety
/// `buffer` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cmvc_buffer_len(buffer: *const CmvcBuffer) -> usize {
    buffer.as_ref().map_or(0, |b| b.0.len())
}

/// # Safety
/// `buffer` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cmvc_buffer_free(buffer: *mut CmvcBuffer) {
    if !buffer.is_null() {
        drop(Box::from_raw(buffer));
    }
}

/// Selects `n` keyframes into `indices[0..n]`; `capacity` must be at least `n`.
///
/// # Safety
/// `video` must be a live handle; `indices` must hold `capacity` writable entries.
#[no_mangle]
pub unsafe extern "C" fn cmvc_select_keyframes(
    video: *const CmvcVideo,
    n: u32,
    strategy_code: u8,
    seed: u64,
    indices: *mut usize,
    capacity: usize,
) -> CmvcStatus {
    guard(|| {
        let v = video_arg(video, "video")?;
        if indices.is_null() {
            return Err(null("indices"));
        }
        if capacity < n as usize {
            return Err(Failure(CmvcStatus::BufferTooSmall, format!("capacity {capacity} < {n} keyframes")));
        }
        let set = select_keyframes(v, n as usize, strategy(strategy_code)?, seed)?;
        slice::from_raw_parts_mut(indices, set.len()).copy_from_slice(set.indices());
        Ok(())
    })
}

/// Encodes `video` into a `.cmvc` stream.
///
/// `backend` (`"linear"`, `"latent[:m]"`, `"external:<cmd>"`) and
/// `text_sidecar` (sidecar file contents) may be NULL.
///
/// # Safety
/// Pointers must be valid as described; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmvc_encode(
    video: *const CmvcVideo,
    options: *const CmvcEncodeOptions,
    backend: *const c_char,
    text_sidecar: *const c_char,
    out: *mut *mut CmvcBuffer,
) -> CmvcStatus {
    guard(|| {
        let v = video_arg(video, "video")?;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        let mode = match o.mode {
            0 => Mode::TextToVideo,
            1 => Mode::ImageTextToVideo,
            m => return Err(invalid(format!("unknown mode code {m}"))),
        };
        let text = opt_str_arg(text_sidecar, "text_sidecar")?.map(TextSidecar::parse).transpose()?;
        let cfg = EncodeConfig {
            mode,
            n_keyframes: o.n_keyframes as usize,
            strategy: strategy(o.strategy)?,
            quality: QualityFactor::from_value(o.quality)?,
            optimizer: (o.optimize != 0).then(|| OptimizerConfig {
                learning_rate: o.learning_rate,
                training_steps: o.training_steps as usize,
                ..OptimizerConfig::default()
            }),
            backend: backend_spec(opt_str_arg(backend, "backend")?)?,
            text,
            features: None,
            seed: o.seed,
            jobs: o.jobs as usize,
        };
        put(out, CmvcBuffer(encode(v, &cfg)?))
    })
}

/// Decodes a `.cmvc` stream. `backend` may be NULL (linear).
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmvc_decode(
    data: *const u8,
    len: usize,
    backend: *const c_char,
    jobs: u32,
    out: *mut *mut CmvcVideo,
) -> CmvcStatus {
    guard(|| {
        let stream = bytes_arg(data, len, "data")?;
        let spec = backend_spec(opt_str_arg(backend, "backend")?)?;
        put(out, CmvcVideo(decode_with_jobs(stream, &spec, jobs as usize)?))
    })
}

/// PSNR in dB; identical videos give +infinity.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmvc_psnr(a: *const CmvcVideo, b: *const CmvcVideo, out: *mut f64) -> CmvcStatus {
    guard(|| {
        let value = psnr(video_arg(a, "a")?, video_arg(b, "b")?)?;
        *out.as_mut().ok_or_else(|| null("out"))? = value;
        Ok(())
    })
}

/// BD-rate (percent) of the test curve against the anchor curve. Each curve
/// is given as parallel rate (bits per pixel) and distortion arrays.
///
/// # Safety
/// Each array must hold its stated number of readable entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmvc_bd_rate(
    anchor_rates: *const f64,
    anchor_distortions: *const f64,
    anchor_len: usize,
    test_rates: *const f64,
    test_distortions: *const f64,
    test_len: usize,
    higher_better: u8,
    out: *mut f64,
) -> CmvcStatus {
    guard(|| {
        let curve = |rates: *const f64, dists: *const f64, len: usize, what: &str| -> Result<RdCurve, Failure> {
            if len > 0 && (rates.is_null() || dists.is_null()) {
                return Err(null(what));
            }
            let (r, d) = if len == 0 {
                (&[][..], &[][..])
            } else {
                (slice::from_raw_parts(rates, len), slice::from_raw_parts(dists, len))
            };
            let pairs: Vec<(f64, f64)> = r.iter().copied().zip(d.iter().copied()).collect();
            Ok(RdCurve::from_pairs(&pairs, "distortion", higher_better != 0)?)
        };
        let anchor = curve(anchor_rates, anchor_distortions, anchor_len, "anchor")?;
        let test = curve(test_rates, test_distortions, test_len, "test")?;
        let value = bd_rate(&anchor, &test)?;
        *out.as_mut().ok_or_else(|| null("out"))? = value;
        Ok(())
    })
}
