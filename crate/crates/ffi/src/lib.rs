//! C ABI over the percept engine.
//!
//! Every fallible call returns a [`PerceptStatus`]; on failure the message is
//! available from [`percept_last_error`] on the same thread. Handles are
//! opaque and released with their `_free` function. Strings returned through
//! `out` parameters are released with [`percept_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use percept::engine::{load_network, Network};
use percept::gradient::{
    grad_cam, grad_cam_pp, guided_bp, integrated_gradients, score_cam, smooth_grad, vanilla_bp, CamMethod, CamRequest,
    IgConfig, Saliency, SmoothGradConfig,
};
use percept::models::{
    build_reference_cnn, build_reference_cnn_planted, parse_csv, BowTextClassifier, LinearTabular, Predictor,
    SchemaHints,
};
use percept::perturbation::{
    anchors_explain, cle_explain, kernel_shap_explain, lime_explain, AnchorConfig, Instance, LimeConfig, ShapConfig,
    TabularInstance, TextInstance,
};
use percept::{Error, Tensor};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerceptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ShapeMismatch = 4,
    UnknownLayer = 5,
    Io = 6,
    Format = 7,
    Numerical = 8,
    Explainer = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

pub struct PerceptNetwork {
    net: Network,
}

pub struct PerceptSaliency {
    inner: Saliency,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PerceptStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ShapeMismatch { .. }
            | Error::ImageShapeMismatch { .. }
            | Error::SizeMismatch { .. }
            | Error::InconsistentArity { .. } => PerceptStatus::ShapeMismatch,
            Error::UnknownLayerName { .. } | Error::NonSpatialLayer(_) => PerceptStatus::UnknownLayer,
            Error::Io { .. } => PerceptStatus::Io,
            Error::Format { .. }
            | Error::UnsupportedVersion(_)
            | Error::UnsupportedMaxVal(_)
            | Error::Parse { .. }
            | Error::Json(_)
            | Error::InvalidNetwork(_) => PerceptStatus::Format,
            Error::NonFinite { .. } | Error::SingularSystem | Error::DegenerateDesign(_) => PerceptStatus::Numerical,
            Error::PredictorFailure(_)
            | Error::TooManyFeaturesForExact { .. }
            | Error::DesignTooLarge { .. }
            | Error::ZeroTargetActivation(_) => PerceptStatus::Explainer,
            _ => PerceptStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(PerceptStatus::Format, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PerceptStatus::InvalidArgument, msg.into())
}

fn set_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PerceptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            PerceptStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(_) => {
            set_error(Some("internal panic".into()));
            PerceptStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(PerceptStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PerceptStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(PerceptStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice_arg<'a>(p: *const f32, len: usize, what: &str) -> Result<&'a [f32], Failure> {
    if p.is_null() {
        return Err(Failure(PerceptStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(PerceptStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_out(src: &[f32], out: *mut f32, out_len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(PerceptStatus::NullPointer, "output buffer is null".into()));
    }
    if out_len < src.len() {
        return Err(Failure(
            PerceptStatus::BufferTooSmall,
            format!("output buffer holds {out_len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

fn input_tensor(net: &Network, data: &[f32]) -> Result<Tensor, Failure> {
    Ok(Tensor::new(net.input_shape().to_vec(), data.to_vec())?)
}

/// Message of the last failed call on this thread, or null after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn percept_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn percept_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a network weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn percept_network_load(path: *const c_char, out: *mut *mut PerceptNetwork) -> PerceptStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let net = load_network(path)?;
        write_out(out, Box::into_raw(Box::new(PerceptNetwork { net })), "out")
    })
}

/// Builds the seeded reference CNN, or its quadrant-planted variant.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn percept_network_reference(seed: u64, planted: bool, out: *mut *mut PerceptNetwork) -> PerceptStatus {
    guard(|| {
        let net = if planted {
            build_reference_cnn_planted(seed)
        } else {
            build_reference_cnn(seed)
        };
        write_out(out, Box::into_raw(Box::new(PerceptNetwork { net })), "out")
    })
}

/// # Safety
/// `net` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn percept_network_free(net: *mut PerceptNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Writes the `[channels, height, width]` input shape to `out_shape[0..3]`.
///
/// # Safety
/// `net` must be a live handle and `out_shape` must hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn percept_network_input_shape(net: *const PerceptNetwork, out_shape: *mut usize) -> PerceptStatus {
    guard(|| {
        let net = ref_arg(net, "network")?;
        if out_shape.is_null() {
            return Err(Failure(PerceptStatus::NullPointer, "out_shape is null".into()));
        }
        for (i, d) in net.net.input_shape().iter().enumerate() {
            out_shape.add(i).write(*d);
        }
        Ok(())
    })
}

/// # Safety
/// `net` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn percept_network_class_count(net: *const PerceptNetwork, out: *mut usize) -> PerceptStatus {
    guard(|| {
        let net = ref_arg(net, "network")?;
        write_out(out, net.net.class_count(), "out")
    })
}

/// Forward pass. `input` holds `input_len` values in `[C,H,W]` order;
/// `out` receives the class logits.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn percept_network_logits(
    net: *const PerceptNetwork,
    input: *const f32,
    input_len: usize,
    out: *mut f32,
    out_len: usize,
) -> PerceptStatus {
    guard(|| {
        let net = ref_arg(net, "network")?;
        let x = input_tensor(&net.net, slice_arg(input, input_len, "input")?)?;
        let logits = net.net.logits(&x)?;
        copy_out(logits.data(), out, out_len)
    })
}

/// Computes a saliency map with default settings for `method`, one of
/// gradcam, gradcampp, scorecam, vanilla, guided, smoothgrad or ig.
/// `target` < 0 selects the predicted class. `layer` is used by the CAM
/// methods and defaults to "conv2" when null. `seed` drives SmoothGrad.
///
/// # Safety
/// Pointers must be valid; `input` must hold `input_len` values.
#[no_mangle]
pub unsafe extern "C" fn percept_saliency_compute(
    net: *const PerceptNetwork,
    method: *const c_char,
    input: *const f32,
    input_len: usize,
    target: i64,
    layer: *const c_char,
    seed: u64,
    out: *mut *mut PerceptSaliency,
) -> PerceptStatus {
    guard(|| {
        let net = &ref_arg(net, "network")?.net;
        let method = str_arg(method, "method")?;
        let layer = opt_str_arg(layer, "layer")?.unwrap_or("conv2");
        let x = input_tensor(net, slice_arg(input, input_len, "input")?)?;
        let class = if target < 0 {
            net.logits(&x)?.argmax()
        } else {
            target as usize
        };
        let cam = |m: CamMethod| CamRequest::new(m, layer).with_class(class);
        let s = match method {
            "gradcam" => grad_cam(net, &x, &cam(CamMethod::GradCam))?,
            "gradcampp" => grad_cam_pp(net, &x, &cam(CamMethod::GradCamPp))?,
            "scorecam" => score_cam(net, &x, &cam(CamMethod::ScoreCam))?,
            "vanilla" => vanilla_bp(net, &x, class)?,
            "guided" => guided_bp(net, &x, class)?,
            "smoothgrad" => smooth_grad(
                net,
                &x,
                class,
                &SmoothGradConfig {
                    seed,
                    ..Default::default()
                },
            )?,
            "ig" => integrated_gradients(net, &x, class, &IgConfig::default())?,
            other => return Err(invalid(format!("unknown saliency method '{other}'"))),
        };
        write_out(out, Box::into_raw(Box::new(PerceptSaliency { inner: s })), "out")
    })
}

/// # Safety
/// `s` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn percept_saliency_free(s: *mut PerceptSaliency) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle; `height` and `width` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn percept_saliency_dims(s: *const PerceptSaliency, height: *mut usize, width: *mut usize) -> PerceptStatus {
    guard(|| {
        let s = ref_arg(s, "saliency")?;
        write_out(height, s.inner.map.height, "height")?;
        write_out(width, s.inner.map.width, "width")
    })
}

/// Class the map explains.
///
/// # Safety
/// `s` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn percept_saliency_target(s: *const PerceptSaliency, out: *mut usize) -> PerceptStatus {
    guard(|| write_out(out, ref_arg(s, "saliency")?.inner.target, "out"))
}

/// Copies the row-major map into `out`, which must hold height * width values.
///
/// # Safety
/// `s` must be a live handle; `out` must be valid for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn percept_saliency_values(s: *const PerceptSaliency, out: *mut f32, out_len: usize) -> PerceptStatus {
    guard(|| copy_out(&ref_arg(s, "saliency")?.inner.map.values, out, out_len))
}

fn explain_json<I: Instance, P: Predictor<I::Input>>(
    predictor: &P,
    instance: &I,
    method: &str,
    label: i64,
    seed: u64,
) -> Result<String, Failure> {
    let label = if label < 0 {
        let p = predictor.predict_proba(&[instance.original()])?;
        (0..p[0].len()).fold(0, |b, i| if p[0][i] > p[0][b] { i } else { b })
    } else {
        label as usize
    };
    let lime = LimeConfig {
        seed,
        ..Default::default()
    };
    let value = match method {
        "lime" => serde_json::to_string(&lime_explain(predictor, instance, label, &lime)?)?,
        "cle" => serde_json::to_string(&cle_explain(predictor, instance, label, &lime)?)?,
        "shap" => {
            let cfg = ShapConfig {
                seed,
                ..Default::default()
            };
            serde_json::to_string(&kernel_shap_explain(predictor, instance, label, &cfg)?)?
        }
        "anchor" => {
            let cfg = AnchorConfig {
                seed,
                ..Default::default()
            };
            serde_json::to_string(&anchors_explain(predictor, instance, label, &cfg)?)?
        }
        other => return Err(invalid(format!("unknown explanation method '{other}'"))),
    };
    Ok(value)
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| invalid("result contains a NUL byte"))?;
    write_out(out, c.into_raw(), "out")
}

/// Explains a bag-of-words text classifier (given as model JSON) on `text`
/// with `method` one of lime, shap, anchor or cle, using default settings.
/// `label` < 0 selects the predicted class. The explanation JSON is written
/// to `out`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn percept_explain_text_json(
    model_json: *const c_char,
    text: *const c_char,
    method: *const c_char,
    label: i64,
    seed: u64,
    out: *mut *mut c_char,
) -> PerceptStatus {
    guard(|| {
        let model: BowTextClassifier = serde_json::from_str(str_arg(model_json, "model_json")?)?;
        model.validate()?;
        let instance = TextInstance::new(str_arg(text, "text")?)?;
        let json = explain_json(&model, &instance, str_arg(method, "method")?, label, seed)?;
        write_string(out, json)
    })
}

/// Explains row `row` of a CSV table under a linear tabular model (given as
/// model JSON). `categorical` is a comma-separated column list or null.
///
/// # Safety
/// String arguments must be NUL-terminated or null where noted; `out` must
/// be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn percept_explain_tabular_json(
    model_json: *const c_char,
    csv: *const c_char,
    categorical: *const c_char,
    row: usize,
    discretize: bool,
    method: *const c_char,
    label: i64,
    seed: u64,
    out: *mut *mut c_char,
) -> PerceptStatus {
    guard(|| {
        let model: LinearTabular = serde_json::from_str(str_arg(model_json, "model_json")?)?;
        model.validate()?;
        let hints = SchemaHints {
            categorical: opt_str_arg(categorical, "categorical")?
                .map(|c| c.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
                .unwrap_or_default(),
            class_names: model.class_names.clone(),
        };
        let data = parse_csv(str_arg(csv, "csv")?, &hints)?;
        if data.num_features() != model.num_features() {
            return Err(Error::ShapeMismatch {
                expected: vec![model.num_features()],
                actual: vec![data.num_features()],
            }
            .into());
        }
        let values = data
            .rows()
            .get(row)
            .cloned()
            .ok_or_else(|| invalid(format!("row {row} is out of range for {} rows", data.rows().len())))?;
        let instance = TabularInstance::new(values, &data, discretize)?;
        let json = explain_json(&model, &instance, str_arg(method, "method")?, label, seed)?;
        write_string(out, json)
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn percept_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
