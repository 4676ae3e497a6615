//! `pdstl` command-line tool.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdstl::eval::{evaluate, EvalReport};
use pdstl::features::{extract_many, read_features_csv, write_features_csv, FeatureError, FeatureVector};
use pdstl::pipeline::{
    format_predictions, join_on_id, parse_predictions, predict_features, predict_waveforms, read_labels,
    synth_corpus, train_pipeline, PipelineConfig, PipelineError, Prediction,
};
use pdstl::stl::{stl_decompose, StlError};
use pdstl::svm::{load_model, KernelKind, SvmError};
use pdstl::waveform::{read_corpus, write_corpus, CorpusFormat, Waveform, WaveformError, CANONICAL_SAMPLES};

#[derive(Parser)]
#[command(name = "pdstl", version, about = "Partial-discharge detection from STL residual features")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated STL window lengths.
    #[arg(long, global = true, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    /// Multiply every window length by this factor (rounded, at least 2).
    #[arg(long, global = true)]
    scale_factor: Option<f64>,
    /// SVM kernel.
    #[arg(long, global = true)]
    kernel: Option<KernelArg>,
    /// Polynomial kernel degree.
    #[arg(long, global = true)]
    degree: Option<u32>,
    /// RBF / sigmoid gamma (default 1 / feature count).
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// SVM box constraint.
    #[arg(long, global = true)]
    c: Option<f64>,
    /// KKT tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// SMO sweep limit (default 10 x training size).
    #[arg(long, global = true)]
    max_passes: Option<usize>,
    /// Fraction of each class used for training.
    #[arg(long, global = true)]
    split: Option<f64>,
    /// Seed for the stratified split.
    #[arg(long, global = true)]
    seed_split: Option<u64>,
    /// Seed for the oversampler.
    #[arg(long, global = true)]
    seed_oversample: Option<u64>,
    /// Balance the held-out side too before evaluating.
    #[arg(long, global = true)]
    oversample_test: bool,
    /// Worker threads for feature extraction (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Waveform output format (default: from the output path).
    #[arg(long, global = true)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Poly,
    Rbf,
    Sigmoid,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Pdwf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus.
    Synth(SynthArgs),
    /// Write the STL components of one waveform as CSV.
    Decompose(DecomposeArgs),
    /// Compute residual features for a corpus.
    Extract(ExtractArgs),
    /// Split, scale, oversample, train and evaluate.
    Train(TrainArgs),
    /// Score waveforms or feature vectors with a trained model.
    Predict(PredictArgs),
    /// Compare predictions with labels.
    Evaluate(EvaluateArgs),
    /// Run synth, train, predict and evaluate in one go.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of PD waveforms.
    #[arg(long)]
    pd: Option<usize>,
    /// Number of non-PD waveforms.
    #[arg(long)]
    nonpd: Option<usize>,
    /// Output CSV file, or directory for PDWF.
    #[arg(long, short)]
    out: PathBuf,
    /// Corpus seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Samples per waveform.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Carrier amplitude.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Gaussian noise standard deviation.
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Bursts per PD waveform.
    #[arg(long)]
    bursts: Option<usize>,
    /// Peak burst amplitude.
    #[arg(long)]
    burst_amplitude: Option<f64>,
    /// Burst decay constant in samples.
    #[arg(long)]
    burst_decay: Option<f64>,
    /// Carrier cycles per burst.
    #[arg(long)]
    burst_cycles: Option<f64>,
}

#[derive(Args)]
struct StlArgs {
    /// Seasonal Loess span (odd).
    #[arg(long)]
    seasonal_span: Option<usize>,
    /// Trend Loess span (odd).
    #[arg(long)]
    trend_span: Option<usize>,
    /// Low-pass Loess span (odd).
    #[arg(long)]
    lowpass_span: Option<usize>,
    /// Inner loop iterations.
    #[arg(long)]
    inner: Option<usize>,
    /// Outer robustness iterations.
    #[arg(long)]
    outer: Option<usize>,
    /// Seasonal Loess jump.
    #[arg(long)]
    seasonal_jump: Option<usize>,
    /// Trend Loess jump.
    #[arg(long)]
    trend_jump: Option<usize>,
    /// Low-pass Loess jump.
    #[arg(long)]
    lowpass_jump: Option<usize>,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Waveform corpus (CSV file or PDWF directory).
    #[arg(long, short)]
    input: PathBuf,
    /// Seasonal period.
    #[arg(long)]
    window: usize,
    /// Waveform to decompose (default: the first).
    #[arg(long)]
    id: Option<String>,
    /// Component CSV.
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    stl: StlArgs,
}

#[derive(Args)]
struct ExtractArgs {
    /// Waveform corpus (CSV file or PDWF directory).
    #[arg(long, short)]
    input: PathBuf,
    /// Features CSV.
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    stl: StlArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Features CSV or waveform corpus.
    #[arg(long, short)]
    input: PathBuf,
    /// Model JSON destination.
    #[arg(long)]
    model_out: PathBuf,
    /// Evaluation report JSON (held-out side when present).
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    stl: StlArgs,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON from `train`.
    #[arg(long)]
    model: PathBuf,
    /// Waveform corpus or features CSV.
    #[arg(long, short)]
    input: PathBuf,
    /// Predictions CSV.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predictions CSV from `predict`.
    #[arg(long)]
    predictions: PathBuf,
    /// Waveform corpus, features CSV, or `id,label` CSV.
    #[arg(long)]
    labels: PathBuf,
    /// Evaluation report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Directory receiving the corpus, model, predictions and report.
    #[arg(long, short)]
    out_dir: PathBuf,
    /// Number of PD waveforms.
    #[arg(long)]
    pd: Option<usize>,
    /// Number of non-PD waveforms.
    #[arg(long)]
    nonpd: Option<usize>,
    /// Corpus seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Samples per waveform.
    #[arg(long)]
    n_samples: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Io(String),
    Invalid(String),
    NonConvergence(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Invalid(m) | CliError::NonConvergence(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<WaveformError> for CliError {
    fn from(e: WaveformError) -> Self {
        match e {
            WaveformError::Invalid(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Io(_) | FeatureError::Json(_) | FeatureError::Parse { .. } | FeatureError::UnsupportedVersion(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<SvmError> for CliError {
    fn from(e: SvmError) -> Self {
        match e {
            SvmError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            SvmError::Io(_) | SvmError::Json(_) | SvmError::UnsupportedVersion(_) | SvmError::Malformed(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<StlError> for CliError {
    fn from(e: StlError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Waveform(e) => e.into(),
            PipelineError::Feature(e) => e.into(),
            PipelineError::Svm(e) => e.into(),
            PipelineError::Io(_) | PipelineError::Json(_) | PipelineError::Parse { .. } => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    let mut config = load_config(&cli.common)?;
    match cli.command {
        Command::Synth(a) => cmd_synth(&mut config, &cli.common, a),
        Command::Decompose(a) => {
            apply_stl(&mut config, &a.stl);
            cmd_decompose(&config, a)
        }
        Command::Extract(a) => {
            apply_stl(&mut config, &a.stl);
            cmd_extract(&config, a)
        }
        Command::Train(a) => {
            apply_stl(&mut config, &a.stl);
            cmd_train(&config, a)
        }
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Pipeline(a) => cmd_pipeline(&mut config, &cli.common, a),
    }
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut config = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(w) = &c.windows {
        config.window_lengths = w.clone();
    }
    if c.scale_factor.is_some() {
        config.scale_factor = c.scale_factor;
    }
    if let Some(k) = c.kernel {
        config.kernel = match k {
            KernelArg::Linear => KernelKind::Linear,
            KernelArg::Poly => KernelKind::Polynomial,
            KernelArg::Rbf => KernelKind::Rbf,
            KernelArg::Sigmoid => KernelKind::Sigmoid,
        };
    }
    if let Some(d) = c.degree {
        config.degree = d;
    }
    if c.gamma.is_some() {
        config.gamma = c.gamma;
    }
    if let Some(v) = c.c {
        config.train.c = v;
    }
    if let Some(v) = c.tol {
        config.train.tol = v;
    }
    if c.max_passes.is_some() {
        config.train.max_passes = c.max_passes;
    }
    if let Some(v) = c.split {
        config.split_fraction = v;
    }
    if let Some(v) = c.seed_split {
        config.split_seed = v;
    }
    if let Some(v) = c.seed_oversample {
        config.oversample_seed = v;
    }
    if c.oversample_test {
        config.oversample_test = true;
    }
    Ok(config)
}

fn apply_stl(config: &mut PipelineConfig, a: &StlArgs) {
    let t = &mut config.stl;
    let set = |slot: &mut Option<usize>, v: Option<usize>| {
        if v.is_some() {
            *slot = v;
        }
    };
    set(&mut t.seasonal_span, a.seasonal_span);
    set(&mut t.trend_span, a.trend_span);
    set(&mut t.lowpass_span, a.lowpass_span);
    set(&mut t.inner_iterations, a.inner);
    set(&mut t.outer_iterations, a.outer);
    set(&mut t.seasonal_jump, a.seasonal_jump);
    set(&mut t.trend_jump, a.trend_jump);
    set(&mut t.lowpass_jump, a.lowpass_jump);
}

fn output_format(common: &Common, path: &Path) -> CorpusFormat {
    match common.format {
        Some(FormatArg::Csv) => CorpusFormat::Csv,
        Some(FormatArg::Pdwf) => CorpusFormat::Pdwf,
        None => CorpusFormat::detect(path),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn json(value: &serde_json::Value) -> Result<String> {
    pdstl::json::to_string(value).map_err(|e| CliError::Io(e.to_string()))
}

fn is_features_csv(path: &Path) -> Result<bool> {
    if path.is_dir() || CorpusFormat::detect(path) == CorpusFormat::Pdwf {
        return Ok(false);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(text.lines().next().is_some_and(|h| h.starts_with("id,label")))
}

fn cmd_synth(config: &mut PipelineConfig, common: &Common, a: SynthArgs) -> Result<()> {
    let spec = &mut config.corpus;
    if let Some(v) = a.pd {
        spec.n_pd = v;
    }
    if let Some(v) = a.nonpd {
        spec.n_nonpd = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.bursts {
        spec.pd_bursts = v;
    }
    let p = &mut spec.params;
    if let Some(v) = a.n_samples {
        p.n_samples = v;
    }
    if let Some(v) = a.amplitude {
        p.amplitude = v;
    }
    if let Some(v) = a.noise_sigma {
        p.noise_sigma = v;
    }
    if let Some(v) = a.burst_amplitude {
        p.burst_amplitude = v;
    }
    if let Some(v) = a.burst_decay {
        p.burst_decay_samples = v;
    }
    if let Some(v) = a.burst_cycles {
        p.burst_carrier_cycles_per_burst = v;
    }
    let corpus = synth_corpus(spec)?;
    let format = output_format(common, &a.out);
    write_corpus(&corpus, &a.out, format)?;
    let manifest = serde_json::json!({
        "path": a.out.display().to_string(),
        "format": match format { CorpusFormat::Csv => "csv", CorpusFormat::Pdwf => "pdwf" },
        "n_waveforms": corpus.len(),
        "n_pd": corpus.iter().filter(|w| w.label == Some(true)).count(),
        "n_nonpd": corpus.iter().filter(|w| w.label == Some(false)).count(),
        "corpus": spec,
    });
    print!("{}", json(&manifest)?);
    Ok(())
}

fn cmd_decompose(config: &PipelineConfig, a: DecomposeArgs) -> Result<()> {
    let corpus = read_corpus(&a.input)?;
    let w: &Waveform = match &a.id {
        Some(id) => corpus
            .iter()
            .find(|w| &w.id == id)
            .ok_or_else(|| CliError::Invalid(format!("no waveform with id {id}")))?,
        None => corpus.first().ok_or_else(|| CliError::Invalid("no waveforms".to_string()))?,
    };
    let d = stl_decompose(&w.samples, &config.stl.config_for(a.window))?;
    let mut out = String::with_capacity(120 * w.len() + 40);
    out.push_str("t,y,trend,seasonal,residual\n");
    for (k, y) in w.samples.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{y:.16e},{:.16e},{:.16e},{:.16e}",
            d.trend[k], d.seasonal[k], d.residual[k]
        );
    }
    write_text(&a.out, &out)
}

fn cmd_extract(config: &PipelineConfig, a: ExtractArgs) -> Result<()> {
    let spec = config.feature_spec()?;
    let corpus = read_corpus(&a.input)?;
    let features = extract_many(&corpus, &spec.window_lengths, &spec.stl)?;
    write_features_csv(&features, &a.out)?;
    eprintln!("extracted {} vectors with windows {:?}", features.len(), spec.window_lengths);
    Ok(())
}

/// Features from a features CSV or, for a corpus, freshly extracted.
fn load_features(config: &PipelineConfig, input: &Path) -> Result<(Vec<FeatureVector>, bool)> {
    if is_features_csv(input)? {
        return Ok((read_features_csv(input)?, false));
    }
    let spec = config.feature_spec()?;
    let corpus = read_corpus(input)?;
    Ok((extract_many(&corpus, &spec.window_lengths, &spec.stl)?, true))
}

fn cmd_train(config: &PipelineConfig, a: TrainArgs) -> Result<()> {
    config.validate()?;
    let (features, extracted) = load_features(config, &a.input)?;
    let spec = if extracted { Some(config.feature_spec()?) } else { None };
    let run = train_pipeline(&features, config, spec)?;
    write_text(&a.model_out, &run.model.to_json()?)?;
    if let Some(path) = &a.report {
        let report = run.heldout.as_ref().unwrap_or(&run.training);
        write_text(path, &report.to_json().map_err(|e| CliError::Io(e.to_string()))?)?;
    }
    print!("{}", run.summary());
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let predictions: Vec<Prediction> = if std::fs::metadata(&a.input)?.len() == 0 && a.input.is_file() {
        Vec::new()
    } else if is_features_csv(&a.input)? {
        predict_features(&model, &read_features_csv(&a.input)?)?
    } else {
        predict_waveforms(&model, &read_corpus(&a.input)?)?
    };
    write_text(&a.out, &format_predictions(&predictions))?;
    eprintln!("{} predictions, {} PD", predictions.len(), predictions.iter().filter(|p| p.label).count());
    Ok(())
}

fn evaluate_files(predictions: &Path, labels: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(predictions).map_err(|e| CliError::Io(format!("{}: {e}", predictions.display())))?;
    let preds = parse_predictions(&text)?;
    let labels = read_labels(labels)?;
    let (p, l) = join_on_id(&preds, &labels)?;
    evaluate(&p, &l).map_err(|e| CliError::Invalid(e.to_string()))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let report = evaluate_files(&a.predictions, &a.labels)?;
    print!("{}", report.to_table());
    if let Some(path) = &a.report {
        write_text(path, &report.to_json().map_err(|e| CliError::Io(e.to_string()))?)?;
    }
    Ok(())
}

fn cmd_pipeline(config: &mut PipelineConfig, common: &Common, a: PipelineArgs) -> Result<()> {
    let spec = &mut config.corpus;
    if let Some(v) = a.pd {
        spec.n_pd = v;
    }
    if let Some(v) = a.nonpd {
        spec.n_nonpd = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.n_samples {
        spec.params.n_samples = v;
    }
    if config.scale_factor.is_none() {
        config.scale_factor = Some(spec.params.n_samples as f64 / CANONICAL_SAMPLES as f64);
    }
    config.validate()?;

    std::fs::create_dir_all(&a.out_dir)?;
    let corpus = synth_corpus(&config.corpus)?;
    let format = output_format(common, Path::new("corpus.csv"));
    let corpus_path = match format {
        CorpusFormat::Csv => a.out_dir.join("corpus.csv"),
        CorpusFormat::Pdwf => a.out_dir.join("corpus"),
    };
    write_corpus(&corpus, &corpus_path, format)?;

    let fspec = config.feature_spec()?;
    let features = extract_many(&corpus, &fspec.window_lengths, &fspec.stl)?;
    write_features_csv(&features, &a.out_dir.join("features.csv"))?;
    write_text(&a.out_dir.join("config.json"), &config.to_json()?)?;

    let run = train_pipeline(&features, config, Some(fspec))?;
    let model_path = a.out_dir.join("model.json");
    write_text(&model_path, &run.model.to_json()?)?;

    let model = load_model(&model_path)?;
    let heldout_ids: std::collections::HashSet<&str> = run.heldout_ids.iter().map(String::as_str).collect();
    let heldout: Vec<Waveform> = corpus.iter().filter(|w| heldout_ids.contains(w.id.as_str())).cloned().collect();
    let predictions = predict_waveforms(&model, &heldout)?;
    let predictions_path = a.out_dir.join("predictions.csv");
    write_text(&predictions_path, &format_predictions(&predictions))?;
    let mut labels = String::from("id,label\n");
    for w in &heldout {
        let _ = writeln!(labels, "{},{}", w.id, if w.label == Some(true) { 1 } else { 0 });
    }
    let labels_path = a.out_dir.join("heldout_labels.csv");
    write_text(&labels_path, &labels)?;

    let report = evaluate_files(&predictions_path, &labels_path)?;
    write_text(&a.out_dir.join("report.json"), &report.to_json().map_err(|e| CliError::Io(e.to_string()))?)?;
    print!("{}", run.summary());
    println!("pipeline outputs written to {}", a.out_dir.display());
    Ok(())
}
