//! C ABI over the feature-selection engine. Handles are opaque pointers,
//! every call returns an [`IceStatus`], and the failure message of the most
//! recent call on the current thread is available through
//! [`ice_last_error_message`]. Strings returned through out-parameters are
//! owned by the library and must be released with [`ice_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::sync::Arc;

use ice_search::cli::{cmd_rank, cmd_run, RunConfig};
use ice_search::models::{cross_validate, ModelKind, ModelSpec};
use ice_search::tabular::{
    impute_median, load_csv, smote_balance, stratified_folds, Dataset,
};
use ice_search::{Error, FeatureSet};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IceStatus {
    IceOk = 0,
    IceNullPointer = 1,
    IceInvalidUtf8 = 2,
    IceInvalidArgument = 3,
    IceIoError = 4,
    IceDataError = 5,
    IceModelError = 6,
    IceConfigError = 7,
    IceOperatorError = 8,
    IceOracleError = 9,
    IceInternalError = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(error: &Error) -> IceStatus {
    match error {
        Error::Io(_) => IceStatus::IceIoError,
        Error::Csv(_) | Error::Data(_) => IceStatus::IceDataError,
        Error::Model(_) => IceStatus::IceModelError,
        Error::Config(_) | Error::Json(_) => IceStatus::IceConfigError,
        Error::Unparseable(_) | Error::OperatorUnavailable(_) | Error::Protocol(_) => {
            IceStatus::IceOperatorError
        }
        Error::Oracle(_) => IceStatus::IceOracleError,
    }
}

fn fail(error: Error) -> IceStatus {
    let status = status_of(&error);
    set_error(&error.to_string());
    status
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, IceStatus> {
    if ptr.is_null() {
        set_error("null pointer argument");
        return Err(IceStatus::IceNullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        IceStatus::IceInvalidUtf8
    })
}

fn string_out(value: String, out: *mut *mut c_char) -> IceStatus {
    match CString::new(value) {
        Ok(cstring) => {
            unsafe { *out = cstring.into_raw() };
            IceStatus::IceOk
        }
        Err(_) => {
            set_error("result contained an interior NUL byte");
            IceStatus::IceInternalError
        }
    }
}

/// A loaded tabular dataset. Opaque.
pub struct IceDataset {
    inner: Dataset,
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ice_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn ice_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Releases a string returned through an out-parameter.
///
/// # Safety
/// `s` must be a pointer previously returned by this library and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn ice_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a CSV file into a dataset handle. The target column must hold two
/// distinct values.
///
/// # Safety
/// `path` and `target` must be NUL-terminated strings; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ice_dataset_load_csv(
    path: *const c_char,
    target: *const c_char,
    out: *mut *mut IceDataset,
) -> IceStatus {
    if out.is_null() {
        set_error("null out pointer");
        return IceStatus::IceNullPointer;
    }
    let path = match cstr_arg(path) {
        Ok(v) => v,
        Err(status) => return status,
    };
    let target = match cstr_arg(target) {
        Ok(v) => v,
        Err(status) => return status,
    };
    match load_csv(path, target) {
        Ok(dataset) => {
            *out = Box::into_raw(Box::new(IceDataset { inner: dataset }));
            IceStatus::IceOk
        }
        Err(e) => fail(e),
    }
}

/// Replaces missing cells with per-column medians, in place.
///
/// # Safety
/// `dataset` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ice_dataset_impute_median(dataset: *mut IceDataset) -> IceStatus {
    let Some(handle) = dataset.as_mut() else {
        set_error("null dataset handle");
        return IceStatus::IceNullPointer;
    };
    handle.inner = impute_median(&handle.inner);
    IceStatus::IceOk
}

/// Oversamples the minority class by SMOTE until class counts are equal, in
/// place.
///
/// # Safety
/// `dataset` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ice_dataset_smote_balance(
    dataset: *mut IceDataset,
    k_neighbors: usize,
    seed: u64,
) -> IceStatus {
    let Some(handle) = dataset.as_mut() else {
        set_error("null dataset handle");
        return IceStatus::IceNullPointer;
    };
    match smote_balance(&handle.inner, k_neighbors, seed) {
        Ok(balanced) => {
            handle.inner = balanced;
            IceStatus::IceOk
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `dataset` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ice_dataset_n_rows(
    dataset: *const IceDataset,
    out: *mut usize,
) -> IceStatus {
    let Some(handle) = dataset.as_ref() else {
        set_error("null dataset handle");
        return IceStatus::IceNullPointer;
    };
    *out = handle.inner.n_rows();
    IceStatus::IceOk
}

/// # Safety
/// `dataset` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ice_dataset_n_features(
    dataset: *const IceDataset,
    out: *mut usize,
) -> IceStatus {
    let Some(handle) = dataset.as_ref() else {
        set_error("null dataset handle");
        return IceStatus::IceNullPointer;
    };
    *out = handle.inner.n_features();
    IceStatus::IceOk
}

/// Returns the name of one feature column; release with `ice_string_free`.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ice_dataset_feature_name(
    dataset: *const IceDataset,
    index: usize,
    out: *mut *mut c_char,
) -> IceStatus {
    let Some(handle) = dataset.as_ref() else {
        set_error("null dataset handle");
        return IceStatus::IceNullPointer;
    };
    let Some(name) = handle.inner.feature_names().get(index) else {
        set_error("feature index out of range");
        return IceStatus::IceInvalidArgument;
    };
    string_out(name.clone(), out)
}

/// Frees a dataset handle.
///
/// # Safety
/// `dataset` must be a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ice_dataset_free(dataset: *mut IceDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

fn parse_model_kind(name: &str) -> Option<ModelKind> {
    match name {
        "logistic_regression" => Some(ModelKind::LogisticRegression),
        "cart_tree" => Some(ModelKind::CartTree),
        "random_forest" => Some(ModelKind::RandomForest),
        "gradient_boosted_trees" => Some(ModelKind::GradientBoostedTrees),
        "linear_svm" => Some(ModelKind::LinearSvm),
        _ => None,
    }
}

/// Cross-validates one feature subset with the named downstream model
/// (`logistic_regression`, `cart_tree`, `random_forest`,
/// `gradient_boosted_trees` or `linear_svm`) over seeded stratified folds,
/// writing the mean train/validation accuracies.
///
/// # Safety
/// `dataset` must be a live handle; `indices` must point to `n_indices`
/// readable values; `model_kind` must be NUL-terminated; the out pointers
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn ice_evaluate_subset(
    dataset: *const IceDataset,
    indices: *const usize,
    n_indices: usize,
    model_kind: *const c_char,
    n_folds: usize,
    seed: u64,
    out_train_accuracy: *mut f64,
    out_val_accuracy: *mut f64,
) -> IceStatus {
    let Some(handle) = dataset.as_ref() else {
        set_error("null dataset handle");
        return IceStatus::IceNullPointer;
    };
    if indices.is_null() || n_indices == 0 {
        set_error("subset must contain at least one feature index");
        return IceStatus::IceInvalidArgument;
    }
    let kind_name = match cstr_arg(model_kind) {
        Ok(v) => v,
        Err(status) => return status,
    };
    let Some(kind) = parse_model_kind(kind_name) else {
        set_error("unknown model kind");
        return IceStatus::IceInvalidArgument;
    };
    let subset = FeatureSet::from_indices(
        std::slice::from_raw_parts(indices, n_indices).iter().copied(),
    );
    if !subset.within_universe(handle.inner.n_features()) {
        set_error("subset indexes outside the feature universe");
        return IceStatus::IceInvalidArgument;
    }
    let spec = ModelSpec::new(kind, seed);
    let folds = match stratified_folds(&handle.inner, n_folds, seed) {
        Ok(folds) => folds,
        Err(e) => return fail(e),
    };
    match cross_validate(&handle.inner, &subset, &spec, &folds) {
        Ok(evaluation) => {
            *out_train_accuracy = evaluation.train_accuracy;
            *out_val_accuracy = evaluation.val_accuracy;
            IceStatus::IceOk
        }
        Err(e) => fail(e),
    }
}

/// Runs the full search described by a JSON run configuration (the same
/// document the CLI consumes) and returns the report as JSON; release it
/// with `ice_string_free`. Report files are also written to the configured
/// output directory.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out_report_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ice_run_json(
    config_json: *const c_char,
    out_report_json: *mut *mut c_char,
) -> IceStatus {
    let json = match cstr_arg(config_json) {
        Ok(v) => v,
        Err(status) => return status,
    };
    let config = match RunConfig::from_json(json) {
        Ok(config) => config,
        Err(e) => return fail(e),
    };
    match cmd_run(&config) {
        Ok(report) => match serde_json::to_string_pretty(&report) {
            Ok(serialized) => string_out(serialized, out_report_json),
            Err(e) => fail(Error::Json(e)),
        },
        Err(e) => fail(e),
    }
}

/// Builds the exhaustive rank table per configured seed, writes the CSVs,
/// and returns the written paths as a JSON array; release with
/// `ice_string_free`.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out_paths_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ice_rank_json(
    config_json: *const c_char,
    out_paths_json: *mut *mut c_char,
) -> IceStatus {
    let json = match cstr_arg(config_json) {
        Ok(v) => v,
        Err(status) => return status,
    };
    let config = match RunConfig::from_json(json) {
        Ok(config) => config,
        Err(e) => return fail(e),
    };
    match cmd_rank(&config) {
        Ok(paths) => {
            let rendered: Vec<String> =
                paths.iter().map(|p| p.display().to_string()).collect();
            match serde_json::to_string(&rendered) {
                Ok(serialized) => string_out(serialized, out_paths_json),
                Err(e) => fail(Error::Json(e)),
            }
        }
        Err(e) => fail(e),
    }
}

// dataset_arc is currently only exercised through tests; keep it out of the
// public header.
#[doc(hidden)]
pub fn _internal_touch(dataset: &IceDataset) -> usize {
    dataset_arc(dataset).n_rows()
}
