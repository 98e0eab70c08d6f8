//! C ABI over the `spatialsim` library.
//!
//! Models and datasets cross the boundary as opaque handles that the caller
//! frees with the matching `*_free` function. Every fallible call returns an
//! [`SsStatus`]; on failure the message is available from
//! [`ss_last_error_message`] on the same thread until the next failing call.
//! Panics are caught and reported as `SS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use spatialsim::analysis;
use spatialsim::datagen::{gen_comparison_set, gen_identification, Dataset, GenConfig, Task};
use spatialsim::geometry::{Configuration, FEATURE_DIM};
use spatialsim::io;
use spatialsim::models::{Checkpoint, LayerKind, Model, ModelConfig};
use spatialsim::rng::purpose;
use spatialsim::trainer::{evaluate, train, TrainSpec};
use spatialsim::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    TaskMismatch = 5,
    IndexOutOfRange = 6,
    BufferTooSmall = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsLayer {
    Mpgnn = 0,
    Rds = 1,
    Deepset = 2,
    Mlp = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsTask {
    Identification = 0,
    Comparison = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsSplit {
    Train = 0,
    Valid = 1,
    Test = 2,
}

/// Opaque model handle.
pub struct SsModel {
    inner: Model,
}

/// Opaque dataset handle.
pub struct SsDataset {
    inner: Dataset,
}

impl From<SsLayer> for LayerKind {
    fn from(l: SsLayer) -> LayerKind {
        match l {
            SsLayer::Mpgnn => LayerKind::Mpgnn,
            SsLayer::Rds => LayerKind::Rds,
            SsLayer::Deepset => LayerKind::Deepset,
            SsLayer::Mlp => LayerKind::Mlp,
        }
    }
}

impl From<Task> for SsTask {
    fn from(t: Task) -> SsTask {
        match t {
            Task::Identification => SsTask::Identification,
            Task::Comparison => SsTask::Comparison,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Status(SsStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        Fail::Lib(e)
    }
}

fn status_of(e: &Error) -> SsStatus {
    match e {
        Error::Io { .. } => SsStatus::Io,
        Error::Parse { .. } | Error::Format(_) | Error::Json(_) => SsStatus::Parse,
        Error::TaskMismatch { .. } => SsStatus::TaskMismatch,
        Error::IndexOutOfRange { .. } => SsStatus::IndexOutOfRange,
        e if e.is_user_error() => SsStatus::InvalidArgument,
        _ => SsStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            SsStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(SsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Fail::Status(SsStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null("output buffer"));
    }
    if len < need {
        return Err(Fail::Status(
            SsStatus::BufferTooSmall,
            format!("output buffer holds {len} values, need {need}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Generate one split of the Identification dataset for `n_obj` objects.
/// `count` is the size of the requested split.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_gen_identification(
    n_obj: usize,
    count: usize,
    seed: u64,
    split: SsSplit,
    out: *mut *mut SsDataset,
) -> SsStatus {
    guard(|| {
        let gen = GenConfig::identification_defaults(seed).with_counts(count, count);
        let sets = gen_identification(n_obj, &gen)?;
        let d = match split {
            SsSplit::Train => sets.train,
            SsSplit::Valid => sets.valid,
            SsSplit::Test => sets.test,
        };
        write_out(out, Box::into_raw(Box::new(SsDataset { inner: d })))
    })
}

/// Generate one Comparison split with rotations up to `theta_max`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_gen_comparison(
    n_min: usize,
    n_max: usize,
    theta_max: f64,
    count: usize,
    seed: u64,
    split: SsSplit,
    out: *mut *mut SsDataset,
) -> SsStatus {
    guard(|| {
        let gen = GenConfig::comparison_defaults(seed).with_counts(count, count);
        let p = match split {
            SsSplit::Train => purpose::TRAIN,
            SsSplit::Valid => purpose::VALID,
            SsSplit::Test => purpose::TEST,
        };
        let name = format!("CDS_{n_min}_{n_max}");
        let d = gen_comparison_set(&name, (n_min, n_max), theta_max, count, p, &gen)?;
        write_out(out, Box::into_raw(Box::new(SsDataset { inner: d })))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_read(path: *const c_char, out: *mut *mut SsDataset) -> SsStatus {
    guard(|| {
        let d = io::read_dataset(&path_arg(path)?)?;
        write_out(out, Box::into_raw(Box::new(SsDataset { inner: d })))
    })
}

/// # Safety
/// `dataset` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_write(dataset: *const SsDataset, path: *const c_char) -> SsStatus {
    guard(|| {
        let d = as_ref(dataset, "dataset")?;
        io::write_dataset(&path_arg(path)?, &d.inner)?;
        Ok(())
    })
}

/// Number of samples, or 0 for a NULL handle.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_len(dataset: *const SsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_task(dataset: *const SsDataset, out: *mut SsTask) -> SsStatus {
    guard(|| write_out(out, as_ref(dataset, "dataset")?.inner.task().into()))
}

/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_label(
    dataset: *const SsDataset,
    index: usize,
    out: *mut u8,
) -> SsStatus {
    guard(|| {
        let d = &as_ref(dataset, "dataset")?.inner;
        let s = d.samples.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: d.len(),
        })?;
        write_out(out, s.label())
    })
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_free(dataset: *mut SsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fresh model sized for `shape_of` (its task and, for the MLP baseline,
/// its object counts).
///
/// # Safety
/// `shape_of` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_model_new(
    layer: SsLayer,
    shape_of: *const SsDataset,
    seed: u64,
    out: *mut *mut SsModel,
) -> SsStatus {
    guard(|| {
        let d = &as_ref(shape_of, "dataset")?.inner;
        let m = Model::new(ModelConfig::for_dataset(layer.into(), d), seed)?;
        write_out(out, Box::into_raw(Box::new(SsModel { inner: m })))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_model_load(path: *const c_char, out: *mut *mut SsModel) -> SsStatus {
    guard(|| {
        let m = io::read_checkpoint(&path_arg(path)?)?.to_model()?;
        write_out(out, Box::into_raw(Box::new(SsModel { inner: m })))
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ss_model_save(model: *const SsModel, path: *const c_char) -> SsStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        io::write_checkpoint(&path_arg(path)?, &Checkpoint::from_model(&m.inner))?;
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_model_free(model: *mut SsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trainable scalars, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_model_num_params(model: *const SsModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.count_params())
}

/// Train in place on `train`, keeping the epoch with the best accuracy on
/// `valid`, which is written to `out_valid_accuracy` when non-NULL.
///
/// # Safety
/// All handles must be live; `out_valid_accuracy` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ss_model_train(
    model: *mut SsModel,
    train_set: *const SsDataset,
    valid_set: *const SsDataset,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
    out_valid_accuracy: *mut f64,
) -> SsStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let t = &as_ref(train_set, "train set")?.inner;
        let v = &as_ref(valid_set, "valid set")?.inner;
        let spec = TrainSpec {
            epochs,
            lr,
            batch_size,
            ..TrainSpec::new(seed)
        };
        let (trained, report) = train(&m.inner, t, v, &spec)?;
        m.inner = trained;
        if !out_valid_accuracy.is_null() {
            out_valid_accuracy.write(report.valid_accuracy.unwrap_or(f64::NAN));
        }
        Ok(())
    })
}

/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_model_evaluate(
    model: *const SsModel,
    dataset: *const SsDataset,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let d = &as_ref(dataset, "dataset")?.inner;
        write_out(out, evaluate(m, d)?)
    })
}

/// Logits `[C+, C-]` for every sample, written row-major into `out`
/// (capacity `out_len`, at least `2 * len`).
///
/// # Safety
/// Both handles must be live; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ss_model_predict(
    model: *const SsModel,
    dataset: *const SsDataset,
    out: *mut f64,
    out_len: usize,
) -> SsStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let d = &as_ref(dataset, "dataset")?.inner;
        let dst = out_slice(out, out_len, 2 * d.len())?;
        if d.is_empty() {
            return Ok(());
        }
        let refs: Vec<_> = d.samples.iter().collect();
        for (chunk, o) in m.logits(&refs)?.iter().zip(dst.chunks_mut(2)) {
            o.copy_from_slice(chunk);
        }
        Ok(())
    })
}

unsafe fn config_arg(features: *const f64, n_obj: usize) -> Result<Configuration, Fail> {
    if features.is_null() {
        return Err(null("features"));
    }
    let f = std::slice::from_raw_parts(features, n_obj * FEATURE_DIM);
    Ok(Configuration::from_features(f)?)
}

/// Logits for raw configurations given as `n × 10` row-major features.
/// Identification models read only the first configuration; pass NULL and
/// 0 for the second.
///
/// # Safety
/// `features1` must hold `n1 * 10` doubles, `features2` `n2 * 10` when
/// used, and `out` two doubles.
#[no_mangle]
pub unsafe extern "C" fn ss_model_score(
    model: *const SsModel,
    features1: *const f64,
    n1: usize,
    features2: *const f64,
    n2: usize,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let c1 = config_arg(features1, n1)?;
        let configs = match m.task() {
            Task::Identification => vec![c1],
            Task::Comparison => vec![c1, config_arg(features2, n2)?],
        };
        let row: Vec<&Configuration> = configs.iter().collect();
        let logits = m.logits_for(&m.prepare_configs(&[row])?)?;
        out_slice(out, 2, 2)?.copy_from_slice(&logits[0]);
        Ok(())
    })
}

/// Decision heatmap `C+ − C-` over a `res × res` grid (row = y, column = x),
/// written row-major into `out`. The covered rectangle is written to
/// `out_extent` as `[x_min, x_max, y_min, y_max]` when non-NULL.
///
/// # Safety
/// Both handles must be live; `out` must hold `out_len` doubles and
/// `out_extent` NULL or four doubles.
#[no_mangle]
pub unsafe extern "C" fn ss_model_heatmap(
    model: *const SsModel,
    dataset: *const SsDataset,
    sample: usize,
    object: usize,
    res: usize,
    out: *mut f64,
    out_len: usize,
    out_extent: *mut f64,
) -> SsStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let d = &as_ref(dataset, "dataset")?.inner;
        let s = d.samples.get(sample).ok_or(Error::IndexOutOfRange {
            index: sample,
            len: d.len(),
        })?;
        let dst = out_slice(out, out_len, res * res)?;
        let h = analysis::heatmap(m, s, object, res)?;
        for (o, v) in dst.iter_mut().zip(h.grid.iter().flatten()) {
            *o = *v;
        }
        if !out_extent.is_null() {
            let e = h.extent;
            std::slice::from_raw_parts_mut(out_extent, 4)
                .copy_from_slice(&[e.x_min, e.x_max, e.y_min, e.y_max]);
        }
        Ok(())
    })
}
