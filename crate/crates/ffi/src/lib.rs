//! C ABI for the coparse engine.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`CoparseStatus`]; on failure the message is available from
//! [`coparse_last_error`] on the same thread until the next failing call.
//! Panics are caught at the boundary and reported as `COPARSE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use coparse::corpus::Corpus;
use coparse::error::ErrorKind;
use coparse::io::manifest;
use coparse::pipeline::{self, Config, RunOutput};
use coparse::synthgen::{self, SceneSpec};
use coparse::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoparseStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Invalid configuration, scene description or label vocabulary.
    Config = 3,
    /// Unreadable or malformed input data.
    Data = 4,
    /// A solver could not produce a result.
    Solver = 5,
    /// An index argument was out of range.
    OutOfRange = 6,
    /// The library panicked; the handle arguments should be considered lost.
    Panic = 7,
}

/// Pipeline parameters.
pub struct CoparseConfig {
    inner: Config,
}

/// A loaded or generated image collection with ground truth.
pub struct CoparseCorpus {
    inner: Corpus,
}

/// Cross-validated predictions and metrics for one corpus.
pub struct CoparseRun {
    inner: RunOutput,
}

/// Headline metrics of a run: fold means and sample standard deviations.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoparseMetrics {
    pub apa_mean: f64,
    pub apa_std: f64,
    pub magr_mean: f64,
    pub magr_std: f64,
}

/// A borrowed view of one label map, row-major, `width * height` entries.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CoparseLabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: *const u16,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CoparseStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Config => CoparseStatus::Config,
            ErrorKind::Data => CoparseStatus::Data,
            ErrorKind::Solver => CoparseStatus::Solver,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CoparseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CoparseStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CoparseStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(CoparseStatus::NullArgument, format!("`{name}` is null"))
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn string(p: *const c_char, name: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map(str::to_owned).map_err(|_| {
        Failure(
            CoparseStatus::InvalidUtf8,
            format!("`{name}` is not valid UTF-8"),
        )
    })
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn coparse_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn coparse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn coparse_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn coparse_config_default(out: *mut *mut CoparseConfig) -> CoparseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        store(
            out,
            CoparseConfig {
                inner: Config::default(),
            },
        );
        Ok(())
    })
}

/// Parses a JSON configuration; absent fields take their defaults and
/// unknown fields are rejected.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coparse_config_from_json(
    json: *const c_char,
    out: *mut *mut CoparseConfig,
) -> CoparseStatus {
    guard(|| {
        let text = string(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Config::from_json(&text)?;
        store(out, CoparseConfig { inner });
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn coparse_config_set_seed(
    config: *mut CoparseConfig,
    seed: u64,
) -> CoparseStatus {
    guard(|| {
        config.as_mut().ok_or_else(|| null("config"))?.inner.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn coparse_config_set_fold_count(
    config: *mut CoparseConfig,
    folds: usize,
) -> CoparseStatus {
    guard(|| {
        config
            .as_mut()
            .ok_or_else(|| null("config"))?
            .inner
            .fold_count = folds;
        Ok(())
    })
}

/// The configuration as a JSON string, to be freed with
/// [`coparse_string_free`].
///
/// # Safety
/// `config` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coparse_config_to_json(
    config: *const CoparseConfig,
    out: *mut *mut c_char,
) -> CoparseStatus {
    guard(|| {
        let config = borrow(config, "config")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(&config.inner).map_err(Error::from)?;
        *out = CString::new(json).expect("JSON has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coparse_config_free(config: *mut CoparseConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Loads a corpus from a manifest file.
///
/// # Safety
/// `manifest_path` must be a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coparse_corpus_load(
    manifest_path: *const c_char,
    out: *mut *mut CoparseCorpus,
) -> CoparseStatus {
    guard(|| {
        let path = string(manifest_path, "manifest_path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = manifest::load_corpus(&PathBuf::from(path))?;
        store(out, CoparseCorpus { inner });
        Ok(())
    })
}

/// Generates a synthetic corpus of `images` images. `scene_json` may be null
/// for the default scene; its seed is replaced by `seed`.
///
/// # Safety
/// `scene_json` must be null or a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coparse_corpus_generate(
    scene_json: *const c_char,
    images: usize,
    seed: u64,
    out: *mut *mut CoparseCorpus,
) -> CoparseStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut scene = if scene_json.is_null() {
            SceneSpec::default()
        } else {
            let text = string(scene_json, "scene_json")?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("scene: {e}")))?
        };
        scene.seed = seed;
        let inner = synthgen::generate(&scene, images)?;
        store(out, CoparseCorpus { inner });
        Ok(())
    })
}

/// Writes the corpus rasters and `manifest.json` into `dir`.
///
/// # Safety
/// `corpus` must be a live handle; `dir` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn coparse_corpus_write(
    corpus: *const CoparseCorpus,
    dir: *const c_char,
) -> CoparseStatus {
    guard(|| {
        let corpus = borrow(corpus, "corpus")?;
        let dir = string(dir, "dir")?;
        manifest::write_corpus(&corpus.inner, &PathBuf::from(dir))?;
        Ok(())
    })
}

/// Number of images, or 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn coparse_corpus_image_count(corpus: *const CoparseCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.images.len())
}

/// # Safety
/// `corpus` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coparse_corpus_free(corpus: *mut CoparseCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Cross-validated run: every image is labeled by a model fitted on the
/// other folds. Uses the default configuration when `config` is null.
///
/// # Safety
/// `corpus` must be a live handle, `config` null or a live handle, `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coparse_run(
    corpus: *const CoparseCorpus,
    config: *const CoparseConfig,
    out: *mut *mut CoparseRun,
) -> CoparseStatus {
    guard(|| {
        let corpus = borrow(corpus, "corpus")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let default = Config::default();
        let config = config.as_ref().map_or(&default, |c| &c.inner);
        let inner = pipeline::run(&corpus.inner, config)?;
        store(out, CoparseRun { inner });
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coparse_run_metrics(
    run: *const CoparseRun,
    out: *mut CoparseMetrics,
) -> CoparseStatus {
    guard(|| {
        let run = borrow(run, "run")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = &run.inner.report;
        *out = CoparseMetrics {
            apa_mean: r.apa.mean,
            apa_std: r.apa.std,
            magr_mean: r.magr.mean,
            magr_std: r.magr.std,
        };
        Ok(())
    })
}

/// The full cross-validation report as JSON, to be freed with
/// [`coparse_string_free`].
///
/// # Safety
/// `run` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coparse_run_report_json(
    run: *const CoparseRun,
    out: *mut *mut c_char,
) -> CoparseStatus {
    guard(|| {
        let run = borrow(run, "run")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(&run.inner.report).map_err(Error::from)?;
        *out = CString::new(json).expect("JSON has no nul").into_raw();
        Ok(())
    })
}

/// Predicted label map of image `index` (corpus order). The view borrows
/// from `run` and is valid until the run is freed.
///
/// # Safety
/// `run` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coparse_run_label_map(
    run: *const CoparseRun,
    index: usize,
    out: *mut CoparseLabelMap,
) -> CoparseStatus {
    guard(|| {
        let run = borrow(run, "run")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let maps = &run.inner.label_maps;
        let map = maps.get(index).ok_or_else(|| {
            Failure(
                CoparseStatus::OutOfRange,
                format!("image index {index} out of range for {} images", maps.len()),
            )
        })?;
        *out = CoparseLabelMap {
            width: map.width(),
            height: map.height(),
            labels: map.as_slice().as_ptr(),
        };
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coparse_run_free(run: *mut CoparseRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
