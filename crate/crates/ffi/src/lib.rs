//! C ABI over the deeprad core.
//!
//! Every fallible function returns a [`DrStatus`]; on failure the message is
//! available from [`dr_last_error`] on the same thread. Handles are opaque and
//! must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::OnceLock;

use deeprad::conv3d::{init_seeded_weights, load_weights, NetworkSpec, NetworkWeights};
use deeprad::pipeline::patient_features;
use deeprad::survival::{holm_bonferroni, logrank_test, SurvivalRecord};
use deeprad::texture::{feature_vector, FEATURE_COUNT, FEATURE_NAMES};
use deeprad::volume_io::{read_mask, read_volume, RoiMask, Volume, VolumeFormat};
use deeprad::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Format = 3,
    Io = 4,
    Shape = 5,
    Region = 6,
    Weight = 7,
    DegenerateSplit = 8,
    Join = 9,
    Training = 10,
    Panic = 11,
}

impl From<&Error> for DrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Format { .. } | Error::Size { .. } => DrStatus::Format,
            Error::Io { .. } => DrStatus::Io,
            Error::Shape(_) => DrStatus::Shape,
            Error::Region(_) => DrStatus::Region,
            Error::Weight(_) => DrStatus::Weight,
            Error::DegenerateSplit(_) => DrStatus::DegenerateSplit,
            Error::Join(_) => DrStatus::Join,
            Error::Training(_) => DrStatus::Training,
            Error::Argument(_) => DrStatus::InvalidArgument,
        }
    }
}

/// Opaque intensity volume.
pub struct DrVolume(Volume);
/// Opaque region-of-interest mask.
pub struct DrMask(RoiMask);
/// Opaque convolutional weights.
pub struct DrWeights(NetworkWeights);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DrLogRank {
    pub chi2: f64,
    pub p_value: f64,
    /// 0 when the hazard ratio is undefined; the three fields below are then NaN.
    pub has_hazard: u8,
    pub hazard_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (DrStatus, String)>) -> DrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DrStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DrStatus::Panic
        }
    }
}

type FfiResult<T> = Result<T, (DrStatus, String)>;

fn core<T>(r: deeprad::Result<T>) -> FfiResult<T> {
    r.map_err(|e| (DrStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (DrStatus, String) {
    (DrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> FfiResult<&'a [T]> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn path_arg(p: *const c_char) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| (DrStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn dr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Number of descriptor entries per feature vector.
#[no_mangle]
pub extern "C" fn dr_feature_count() -> usize {
    FEATURE_COUNT
}

/// Static, NUL-terminated name of feature `index`, or NULL when out of range.
#[no_mangle]
pub extern "C" fn dr_feature_name(index: usize) -> *const c_char {
    static NAMES: OnceLock<Vec<CString>> = OnceLock::new();
    let names = NAMES.get_or_init(|| FEATURE_NAMES.iter().map(|n| CString::new(*n).expect("ascii")).collect());
    names.get(index).map_or(ptr::null(), |c| c.as_ptr())
}

/// Copies `nx*ny*nz` floats (x fastest) into a new volume.
///
/// # Safety
/// `spacing` points to 3 doubles, `data` to `nx*ny*nz` floats, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dr_volume_new(
    nx: usize,
    ny: usize,
    nz: usize,
    spacing: *const f64,
    data: *const f32,
    out: *mut *mut DrVolume,
) -> DrStatus {
    guard(|| {
        let sp = slice(spacing, 3, "spacing")?;
        let n = nx.checked_mul(ny).and_then(|v| v.checked_mul(nz)).unwrap_or(0);
        let d = slice(data, n, "data")?;
        let vol = core(Volume::new([nx, ny, nz], [sp[0], sp[1], sp[2]], d.to_vec()))?;
        write_out(out, DrVolume(vol))
    })
}

/// Reads a NIfTI-1 file, or a raw volume when the name ends in `.rawvol`.
///
/// # Safety
/// `path` is a NUL-terminated string and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dr_volume_read(path: *const c_char, out: *mut *mut DrVolume) -> DrStatus {
    guard(|| {
        let p = path_arg(path)?;
        let vol = core(read_volume(&p, VolumeFormat::from_path(&p)))?;
        write_out(out, DrVolume(vol))
    })
}

/// Writes the volume dims into `dims[0..3]`.
///
/// # Safety
/// `vol` is a live handle and `dims` points to 3 writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn dr_volume_dims(vol: *const DrVolume, dims: *mut usize) -> DrStatus {
    guard(|| {
        let v = handle(vol, "volume")?;
        if dims.is_null() {
            return Err(null("dims"));
        }
        std::slice::from_raw_parts_mut(dims, 3).copy_from_slice(&v.0.dims());
        Ok(())
    })
}

/// # Safety
/// `vol` is NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dr_volume_free(vol: *mut DrVolume) {
    if !vol.is_null() {
        drop(Box::from_raw(vol));
    }
}

/// Nonzero bytes mark ROI voxels.
///
/// # Safety
/// `bits` points to `nx*ny*nz` bytes and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dr_mask_new(
    nx: usize,
    ny: usize,
    nz: usize,
    bits: *const u8,
    out: *mut *mut DrMask,
) -> DrStatus {
    guard(|| {
        let n = nx.checked_mul(ny).and_then(|v| v.checked_mul(nz)).unwrap_or(0);
        let b = slice(bits, n, "bits")?;
        let mask = core(RoiMask::new([nx, ny, nz], b.iter().map(|&v| v != 0).collect()))?;
        write_out(out, DrMask(mask))
    })
}

/// # Safety
/// `path` is a NUL-terminated string and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dr_mask_read(path: *const c_char, out: *mut *mut DrMask) -> DrStatus {
    guard(|| {
        let p = path_arg(path)?;
        let mask = core(read_mask(&p, VolumeFormat::from_path(&p)))?;
        write_out(out, DrMask(mask))
    })
}

/// # Safety
/// `mask` is NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dr_mask_free(mask: *mut DrMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Deterministic Glorot-uniform weights for the default network.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dr_weights_seeded(seed: u64, out: *mut *mut DrWeights) -> DrStatus {
    guard(|| write_out(out, DrWeights(init_seeded_weights(seed, &NetworkSpec::default()))))
}

/// # Safety
/// `path` is a NUL-terminated string and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dr_weights_load(path: *const c_char, out: *mut *mut DrWeights) -> DrStatus {
    guard(|| {
        let p = path_arg(path)?;
        let w = core(load_weights(&p, &NetworkSpec::default()))?;
        write_out(out, DrWeights(w))
    })
}

/// # Safety
/// `weights` is NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dr_weights_free(weights: *mut DrWeights) {
    if !weights.is_null() {
        drop(Box::from_raw(weights));
    }
}

/// 41-entry descriptor of the masked region of `vol`.
///
/// # Safety
/// Handles are live and `out` points to 41 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dr_feature_vector(
    vol: *const DrVolume,
    mask: *const DrMask,
    levels: usize,
    out: *mut f64,
) -> DrStatus {
    guard(|| {
        let (v, m) = (handle(vol, "volume")?, handle(mask, "mask")?);
        if out.is_null() {
            return Err(null("out"));
        }
        if v.0.dims() != m.0.dims() {
            return Err((DrStatus::Shape, "volume and mask dims differ".into()));
        }
        let fv = core(feature_vector(v.0.data(), &m.0, levels))?;
        std::slice::from_raw_parts_mut(out, FEATURE_COUNT).copy_from_slice(fv.values());
        Ok(())
    })
}

/// SRF and DRF of an already preprocessed, masked volume whose dims suit
/// the default network. Either output may be NULL.
///
/// # Safety
/// Handles are live; non-NULL outputs point to 41 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dr_patient_features(
    vol: *const DrVolume,
    mask: *const DrMask,
    weights: *const DrWeights,
    levels: usize,
    srf_out: *mut f64,
    drf_out: *mut f64,
) -> DrStatus {
    guard(|| {
        let (v, m, w) = (handle(vol, "volume")?, handle(mask, "mask")?, handle(weights, "weights")?);
        let row = core(patient_features("", &v.0, &m.0, &w.0, &NetworkSpec::default(), levels))?;
        for (out, fv) in [(srf_out, &row.srf), (drf_out, &row.drf)] {
            if !out.is_null() {
                std::slice::from_raw_parts_mut(out, FEATURE_COUNT).copy_from_slice(fv.values());
            }
        }
        Ok(())
    })
}

unsafe fn records(times: *const f64, events: *const u8, n: usize) -> FfiResult<Vec<SurvivalRecord>> {
    let t = slice(times, n, "times")?;
    let e = slice(events, n, "events")?;
    t.iter()
        .zip(e)
        .enumerate()
        .map(|(i, (&t, &e))| core(SurvivalRecord::new(i.to_string(), t, e != 0)))
        .collect()
}

/// Two-group log-rank test; `events` bytes are 1 for death, 0 for censored.
///
/// # Safety
/// Arrays hold `n_a` / `n_b` entries and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dr_logrank(
    times_a: *const f64,
    events_a: *const u8,
    n_a: usize,
    times_b: *const f64,
    events_b: *const u8,
    n_b: usize,
    out: *mut DrLogRank,
) -> DrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = core(logrank_test(&records(times_a, events_a, n_a)?, &records(times_b, events_b, n_b)?))?;
        let h = r.hazard;
        *out = DrLogRank {
            chi2: r.chi2,
            p_value: r.p_value,
            has_hazard: h.is_some() as u8,
            hazard_ratio: h.map_or(f64::NAN, |h| h.ratio),
            ci_low: h.map_or(f64::NAN, |h| h.ci_low),
            ci_high: h.map_or(f64::NAN, |h| h.ci_high),
        };
        Ok(())
    })
}

/// Holm-adjusted p-values, in input order.
///
/// # Safety
/// `p` and `out` hold `n` doubles; they may alias.
#[no_mangle]
pub unsafe extern "C" fn dr_holm(p: *const f64, n: usize, out: *mut f64) -> DrStatus {
    guard(|| {
        let adj = core(holm_bonferroni(slice(p, n, "p")?))?;
        if n > 0 {
            if out.is_null() {
                return Err(null("out"));
            }
            std::slice::from_raw_parts_mut(out, n).copy_from_slice(&adj);
        }
        Ok(())
    })
}

/// ROC AUC of `scores` against 0/1 `labels`.
///
/// # Safety
/// `scores` and `labels` hold `n` entries and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dr_roc_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> DrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let l: Vec<bool> = slice(labels, n, "labels")?.iter().map(|&v| v != 0).collect();
        *out = core(deeprad::learn::roc_auc(slice(scores, n, "scores")?, &l))?;
        Ok(())
    })
}
