//! Command-line front end. [`run`] parses arguments, executes one
//! explanation and writes a report plus rendered artifacts into an output
//! directory.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::engine::{load_network, save_network, Network, ScoreKind};
use crate::error::Error;
use crate::global::{deep_dream, invert_features, maximize_activation, OptimizationConfig, OptimizationTrace};
use crate::gradient::{
    grad_cam, grad_cam_pp, guided_bp, integrated_gradients, score_cam, smooth_grad, vanilla_bp, CamMethod,
    CamRequest, IgConfig, Saliency, SmoothGradConfig,
};
use crate::io::{colorize, read_image, render_bars, render_saliency, write_raster, Colormap, Raster, RenderSpec, Report};
use crate::models::{
    build_reference_cnn, build_reference_cnn_planted, ingest_csv, BowTextClassifier, LinearTabular, NetworkPredictor,
    Predictor, SchemaHints,
};
use crate::perturbation::{
    anchors_explain, cle_explain, grid_segment, kernel_shap_explain, lime_explain_labels, AnchorConfig, Explanation,
    ImageInstance, Instance, LabelSelection, LimeConfig, ShapConfig, ShapMode, TabularInstance, TextInstance,
};
use crate::tensor::Tensor;

pub const SEED_ENV: &str = "PERCEPT_SEED";
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "percept", version, about = "Post-hoc explanations for image, text and tabular classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain a CNN prediction on a PGM/PPM image.
    ExplainImage(ImageArgs),
    /// Explain a bag-of-words text classifier.
    ExplainText(TextArgs),
    /// Explain a linear classifier on one row of a CSV dataset.
    ExplainTabular(TabularArgs),
    /// Visualize what a network responds to.
    Global(GlobalArgs),
    /// Write one of the built-in reference networks to a weight file.
    ExportModel(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageMethod {
    Gradcam,
    Gradcampp,
    Scorecam,
    Vanilla,
    Guided,
    Smoothgrad,
    Ig,
    Lime,
    Shap,
    Anchor,
    Cle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LocalMethod {
    Lime,
    Shap,
    Anchor,
    Cle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GlobalMethod {
    Filter,
    Layer,
    Logit,
    Deepdream,
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Reference,
    Planted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    Logit,
    Prob,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Falls back to $PERCEPT_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: out/<timestamp>-<method>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Class to explain (default: the predicted class).
    #[arg(long = "class")]
    pub class: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SurrogateArgs {
    /// Perturbation samples (LIME/CLE/SHAP) or samples per candidate rule
    /// (anchors).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub kernel_width: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Enumerate every coalition for SHAP.
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value_t = 0.95)]
    pub precision: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 2)]
    pub beam_width: usize,
    #[arg(long, default_value_t = 4)]
    pub max_predicates: usize,
}

#[derive(Debug, Args)]
pub struct ImageArgs {
    #[arg(long, value_enum)]
    pub method: ImageMethod,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "conv2")]
    pub target_layer: String,
    /// Explain the N most probable classes (LIME only).
    #[arg(long)]
    pub top_labels: Option<usize>,
    #[arg(long, value_enum, default_value = "logit")]
    pub score: ScoreArg,
    /// SmoothGrad noise samples.
    #[arg(long, default_value_t = 50)]
    pub noise_samples: usize,
    #[arg(long, default_value_t = 0.15)]
    pub sigma: f32,
    /// Integrated-gradients path steps.
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    /// Segment grid is N x N for perturbation methods.
    #[arg(long, default_value_t = 4)]
    pub grid: usize,
    #[arg(long, value_enum, default_value = "jet")]
    pub colormap: ColormapArg,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f32,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub surrogate: SurrogateArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColormapArg {
    Jet,
    Gray,
}

#[derive(Debug, Args)]
pub struct TextArgs {
    #[arg(long, value_enum)]
    pub method: LocalMethod,
    /// Bag-of-words model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// File holding the text to explain.
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long)]
    pub top_labels: Option<usize>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub surrogate: SurrogateArgs,
}

#[derive(Debug, Args)]
pub struct TabularArgs {
    #[arg(long, value_enum)]
    pub method: LocalMethod,
    /// Linear model JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Zero-based data row to explain.
    #[arg(long, default_value_t = 0)]
    pub row: usize,
    /// Comma-separated categorical column names.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Route continuous columns through quartile bins.
    #[arg(long)]
    pub discretize: bool,
    #[arg(long)]
    pub top_labels: Option<usize>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub surrogate: SurrogateArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    #[arg(long, value_enum)]
    pub method: GlobalMethod,
    /// Weight file (default: the built-in reference network, seed 7).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Starting image (deepdream) or image to invert (inverted).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "conv2")]
    pub target_layer: String,
    #[arg(long, default_value_t = 0)]
    pub target_filter: usize,
    #[arg(long, default_value_t = 10)]
    pub num_iter: usize,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub jitter: Option<usize>,
    #[arg(long)]
    pub tv_weight: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_enum, default_value = "reference")]
    pub kind: ModelKind,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

/// The methods reachable from each subcommand.
pub fn method_registry() -> Vec<(&'static str, String)> {
    fn names<V: ValueEnum>() -> Vec<String> {
        V::value_variants().iter().map(|v| value_name(v.clone())).collect()
    }
    let mut out: Vec<(&'static str, String)> = names::<ImageMethod>().into_iter().map(|n| ("explain-image", n)).collect();
    for sub in ["explain-text", "explain-tabular"] {
        out.extend(names::<LocalMethod>().into_iter().map(|n| (sub, n)));
    }
    out.extend(names::<GlobalMethod>().into_iter().map(|n| ("global", n)));
    out
}

enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            EXIT_OK
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(out: &Option<PathBuf>, method: &str) -> CliResult<Self> {
        let dir = match out {
            Some(d) => d.clone(),
            None => {
                let ts = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                PathBuf::from("out").join(format!("{ts}-{method}"))
            }
        };
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Outputs { dir, files: Vec::new() })
    }

    fn raster(&mut self, stem: &str, r: &Raster) -> CliResult<()> {
        let name = format!("{stem}.{}", if r.channels == 1 { "pgm" } else { "ppm" });
        write_raster(r, &self.dir.join(&name))?;
        self.files.push(name);
        Ok(())
    }

    fn finish(self, mut report: Report) -> CliResult<PathBuf> {
        report.outputs = self.files;
        report.outputs.push("report.json".into());
        report.write(&self.dir.join("report.json"))?;
        Ok(self.dir)
    }
}

fn execute(cli: Cli) -> CliResult<PathBuf> {
    match cli.command {
        Command::ExplainImage(a) => explain_image(a),
        Command::ExplainText(a) => explain_text(a),
        Command::ExplainTabular(a) => explain_tabular(a),
        Command::Global(a) => global(a),
        Command::ExportModel(a) => {
            let net = match a.kind {
                ModelKind::Reference => build_reference_cnn(a.seed),
                ModelKind::Planted => build_reference_cnn_planted(a.seed),
            };
            save_network(&net, &a.output)?;
            Ok(a.output)
        }
    }
}

fn value_name<V: ValueEnum>(v: V) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn predicted<I, P: Predictor<I> + ?Sized>(predictor: &P, original: I) -> CliResult<usize> {
    let probs = predictor.predict_proba(&[original])?;
    let row = &probs[0];
    let mut best = 0;
    for (i, p) in row.iter().enumerate() {
        if *p > row[best] {
            best = i;
        }
    }
    Ok(best)
}

fn explain_image(a: ImageArgs) -> CliResult<PathBuf> {
    let seed = resolve_seed(a.common.seed)?;
    let method = value_name(a.method);
    if a.top_labels.is_some() && a.method != ImageMethod::Lime {
        return Err(CliError::Usage("--top-labels is only supported with --method lime".into()));
    }
    let net = Arc::new(load_network(&a.model)?);
    let image = read_image(&a.input)?;
    if image.shape() != net.input_shape() {
        return Err(Error::ImageShapeMismatch {
            expected: net.input_shape().to_vec(),
            actual: image.shape().to_vec(),
        }
        .into());
    }
    let mut out = Outputs::create(&a.common.out, &method)?;
    let mut report = Report::new(&method, seed);
    report.inputs.insert("model".into(), a.model.display().to_string());
    report.inputs.insert("input".into(), a.input.display().to_string());
    let spec = RenderSpec {
        colormap: match a.colormap {
            ColormapArg::Jet => Colormap::Jet,
            ColormapArg::Gray => Colormap::Gray,
        },
        alpha: a.alpha,
    };
    let predictor = NetworkPredictor::new(net.clone());
    let target = match a.common.class {
        Some(c) => c,
        None => predicted(&predictor, image.clone())?,
    };
    let score = match a.score {
        ScoreArg::Logit => ScoreKind::Logit,
        ScoreArg::Prob => ScoreKind::Prob,
    };

    let saliency: Option<(Saliency, Value)> = match a.method {
        ImageMethod::Gradcam | ImageMethod::Gradcampp | ImageMethod::Scorecam => {
            let cam = match a.method {
                ImageMethod::Gradcam => CamMethod::GradCam,
                ImageMethod::Gradcampp => CamMethod::GradCamPp,
                _ => CamMethod::ScoreCam,
            };
            let mut req = CamRequest::new(cam, a.target_layer.clone()).with_class(target);
            req.score = score;
            let s = match cam {
                CamMethod::GradCam => grad_cam(&net, &image, &req)?,
                CamMethod::GradCamPp => grad_cam_pp(&net, &image, &req)?,
                CamMethod::ScoreCam => score_cam(&net, &image, &req)?,
            };
            Some((s, serde_json::to_value(&req).map_err(Error::from)?))
        }
        ImageMethod::Vanilla => Some((vanilla_bp(&net, &image, target)?, json!({ "target_class": target }))),
        ImageMethod::Guided => Some((guided_bp(&net, &image, target)?, json!({ "target_class": target }))),
        ImageMethod::Smoothgrad => {
            let cfg = SmoothGradConfig {
                samples: a.noise_samples,
                sigma: a.sigma,
                seed,
            };
            Some((
                smooth_grad(&net, &image, target, &cfg)?,
                json!({ "target_class": target, "smoothgrad": cfg }),
            ))
        }
        ImageMethod::Ig => {
            let cfg = IgConfig {
                steps: a.steps,
                baseline: None,
            };
            Some((
                integrated_gradients(&net, &image, target, &cfg)?,
                json!({ "target_class": target, "steps": cfg.steps, "baseline": "zeros" }),
            ))
        }
        _ => None,
    };

    if let Some((s, params)) = saliency {
        let (_, overlay) = render_saliency(&s.map, &image, &spec)?;
        out.raster("map", &colorize(&s.map, Colormap::Gray))?;
        out.raster("overlay", &overlay)?;
        report.parameters = json!({ "method": params, "render": spec });
        report.explanation = json!({
            "target": s.target,
            "class_name": predictor.class_names().get(s.target),
            "height": s.map.height,
            "width": s.map.width,
            "values": s.map.values,
            "trace": {
                "channel_weights": s.trace.channel_weights,
                "ig_partial_sums": s.trace.ig_partial_sums,
            },
        });
        return out.finish(report);
    }

    let [_, h, w] = net.input_shape();
    let segments = grid_segment(h, w, a.grid, a.grid)?;
    let instance = ImageInstance::new(image, segments)?;
    let labels = match a.top_labels {
        Some(k) => LabelSelection::Top(k),
        None => LabelSelection::Labels(vec![target]),
    };
    let local = match a.method {
        ImageMethod::Lime => LocalMethod::Lime,
        ImageMethod::Shap => LocalMethod::Shap,
        ImageMethod::Anchor => LocalMethod::Anchor,
        _ => LocalMethod::Cle,
    };
    let mut params = local_explanation(&predictor, &instance, local, labels, &a.surrogate, seed, &mut out, &mut report)?;
    params["grid"] = json!(a.grid);
    report.parameters = params;
    out.finish(report)
}

/// Runs one perturbation method, fills the report's explanation and emits
/// bar charts. Returns the method parameters.
#[allow(clippy::too_many_arguments)]
fn local_explanation<I: Instance, P: Predictor<I::Input>>(
    predictor: &P,
    instance: &I,
    method: LocalMethod,
    labels: LabelSelection,
    s: &SurrogateArgs,
    seed: u64,
    out: &mut Outputs,
    report: &mut Report,
) -> CliResult<Value> {
    let single = |labels: &LabelSelection| -> CliResult<usize> {
        match labels {
            LabelSelection::Labels(l) if l.len() == 1 => Ok(l[0]),
            _ => Err(CliError::Usage("--top-labels is only supported with --method lime".into())),
        }
    };
    let lime_cfg = LimeConfig {
        samples: s.samples.unwrap_or(1000),
        kernel_width: s.kernel_width,
        lambda: s.lambda,
        top_k: s.top_k,
        seed,
    };
    let explanations: Vec<Explanation> = match method {
        LocalMethod::Lime => lime_explain_labels(predictor, instance, &labels, &lime_cfg)?,
        LocalMethod::Cle => vec![cle_explain(predictor, instance, single(&labels)?, &lime_cfg)?],
        LocalMethod::Shap => {
            let cfg = ShapConfig {
                mode: if s.exact {
                    ShapMode::Exact
                } else {
                    ShapMode::Sampled {
                        samples: s.samples.unwrap_or(2048),
                    }
                },
                top_k: s.top_k,
                seed,
            };
            let e = kernel_shap_explain(predictor, instance, single(&labels)?, &cfg)?;
            report.explanation = serde_json::to_value(&e).map_err(Error::from)?;
            out.raster("bars", &render_bars(&e))?;
            return Ok(json!({ "shap": cfg }));
        }
        LocalMethod::Anchor => {
            let cfg = AnchorConfig {
                precision_target: s.precision,
                delta: s.delta,
                beam_width: s.beam_width,
                max_predicates: s.max_predicates,
                samples_per_candidate: s.samples.unwrap_or(1000),
                coverage_samples: 1000,
                seed,
            };
            let a = anchors_explain(predictor, instance, single(&labels)?, &cfg)?;
            report.explanation = serde_json::to_value(&a).map_err(Error::from)?;
            return Ok(json!({ "anchor": cfg }));
        }
    };
    if explanations.len() == 1 {
        out.raster("bars", &render_bars(&explanations[0]))?;
        report.explanation = serde_json::to_value(&explanations[0]).map_err(Error::from)?;
    } else {
        for e in &explanations {
            out.raster(&format!("bars_{}", e.label), &render_bars(e))?;
        }
        report.explanation = serde_json::to_value(&explanations).map_err(Error::from)?;
    }
    Ok(json!({ "lime": lime_cfg }))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn label_selection(class: Option<usize>, top: Option<usize>, predicted: usize) -> LabelSelection {
    match (top, class) {
        (Some(k), _) => LabelSelection::Top(k),
        (None, Some(c)) => LabelSelection::Labels(vec![c]),
        (None, None) => LabelSelection::Labels(vec![predicted]),
    }
}

fn explain_text(a: TextArgs) -> CliResult<PathBuf> {
    let seed = resolve_seed(a.common.seed)?;
    let method = value_name(a.method);
    let model: BowTextClassifier = read_json(&a.model)?;
    model.validate()?;
    let text = match (&a.input, &a.text) {
        (Some(p), _) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        (None, Some(t)) => t.clone(),
        (None, None) => return Err(CliError::Usage("one of --input or --text is required".into())),
    };
    let instance = TextInstance::new(text.trim_end_matches(['\n', '\r']))?;
    let mut out = Outputs::create(&a.common.out, &method)?;
    let mut report = Report::new(&method, seed);
    report.inputs.insert("model".into(), a.model.display().to_string());
    match &a.input {
        Some(p) => report.inputs.insert("input".into(), p.display().to_string()),
        None => report.inputs.insert("text".into(), text.clone()),
    };
    let predicted = predicted(&model, instance.original())?;
    let labels = label_selection(a.common.class, a.top_labels, predicted);
    report.parameters = local_explanation(&model, &instance, a.method, labels, &a.surrogate, seed, &mut out, &mut report)?;
    out.finish(report)
}

fn explain_tabular(a: TabularArgs) -> CliResult<PathBuf> {
    let seed = resolve_seed(a.common.seed)?;
    let method = value_name(a.method);
    let model: LinearTabular = read_json(&a.model)?;
    model.validate()?;
    let hints = SchemaHints {
        categorical: a.categorical.clone(),
        class_names: model.class_names.clone(),
    };
    let data = ingest_csv(&a.data, &hints)?;
    if model.num_features() != data.num_features() {
        return Err(Error::ShapeMismatch {
            expected: vec![model.num_features()],
            actual: vec![data.num_features()],
        }
        .into());
    }
    let row = data
        .rows()
        .get(a.row)
        .cloned()
        .ok_or_else(|| Error::param(format!("row {} is out of range for {} data rows", a.row, data.rows().len())))?;
    let instance = TabularInstance::new(row, &data, a.discretize)?;
    let mut out = Outputs::create(&a.common.out, &method)?;
    let mut report = Report::new(&method, seed);
    report.inputs.insert("model".into(), a.model.display().to_string());
    report.inputs.insert("data".into(), a.data.display().to_string());
    let predicted = predicted(&model, instance.original())?;
    let labels = label_selection(a.common.class, a.top_labels, predicted);
    let mut params = local_explanation(&model, &instance, a.method, labels, &a.surrogate, seed, &mut out, &mut report)?;
    params["row"] = json!(a.row);
    params["discretize"] = json!(a.discretize);
    params["categorical"] = json!(a.categorical);
    report.parameters = params;
    out.finish(report)
}

fn global(a: GlobalArgs) -> CliResult<PathBuf> {
    let seed = resolve_seed(a.common.seed)?;
    let method = value_name(a.method);
    let net: Network = match &a.model {
        Some(p) => load_network(p)?,
        None => build_reference_cnn(7),
    };
    let image: Option<Tensor> = a.input.as_deref().map(read_image).transpose()?;
    let needs_image = matches!(a.method, GlobalMethod::Deepdream | GlobalMethod::Inverted);
    if needs_image && image.is_none() {
        return Err(CliError::Usage(format!("--method {method} requires --input")));
    }
    let mut cfg = match a.method {
        GlobalMethod::Filter | GlobalMethod::Deepdream => OptimizationConfig::filter(&a.target_layer, a.target_filter),
        GlobalMethod::Layer => OptimizationConfig::layer(&a.target_layer),
        GlobalMethod::Logit => OptimizationConfig::logit(a.common.class.unwrap_or(0)),
        GlobalMethod::Inverted => OptimizationConfig::inverted(&a.target_layer),
    }
    .with_seed(seed)
    .with_iterations(a.num_iter);
    if let Some(lr) = a.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(j) = a.jitter {
        cfg.jitter = j;
    }
    if let Some(tv) = a.tv_weight {
        cfg.tv_weight = tv;
    }
    let trace: OptimizationTrace = match (a.method, &image) {
        (GlobalMethod::Deepdream, Some(img)) => deep_dream(&net, img, &a.target_layer, a.target_filter, &cfg)?,
        (GlobalMethod::Inverted, Some(img)) => invert_features(&net, img, &a.target_layer, &cfg)?,
        _ => maximize_activation(&net, &cfg)?,
    };
    let mut out = Outputs::create(&a.common.out, &method)?;
    let mut report = Report::new(&method, seed);
    if let Some(p) = &a.model {
        report.inputs.insert("model".into(), p.display().to_string());
    }
    if let Some(p) = &a.input {
        report.inputs.insert("input".into(), p.display().to_string());
    }
    if let Some(img) = &image {
        out.raster("input", &Raster::from_tensor(img)?)?;
    }
    out.raster("result", &Raster::from_tensor(&trace.image)?)?;
    report.parameters = serde_json::to_value(&cfg).map_err(Error::from)?;
    report.explanation = json!({
        "target": trace.target,
        "config": cfg,
        "initial_objective": trace.initial_objective,
        "objectives": trace.objectives,
    });
    out.finish(report)
}
