use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;
use wasabi_core::compare::Dataset;
use wasabi_core::stats::bootstrap::{DEFAULT_REPEATS, DEFAULT_SAMPLE_SIZE};
use wasabi_core::synthgen::generate_scenario_suite_scaled;
use wasabi_core::{
    filter_by_qc, generate_cohort, henze_zirkler, run_bootstrap, run_comparison, within_cohort_null, Bandwidth,
    CohortSpec, ComparisonProtocol, DistanceResult, KernelSpec, MetricSpec, MmdEstimator,
};

use crate::output::{emit, to_json, use_color, warn, write_atomic};
use crate::pipeline::{apply_qc, decide_qc, InputArgs, InputInfo, QcDecision};
use crate::{Format, OutputArgs};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricName {
    Wasabi,
    Frechet,
    Mmd,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelName {
    Rbf,
    Linear,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorName {
    Biased,
    Unbiased,
}

#[derive(Args, Debug, Clone)]
pub struct KernelArgs {
    /// MMD kernel
    #[arg(long, value_enum, default_value = "rbf")]
    kernel: KernelName,
    /// RBF bandwidth: a positive number or `median`
    #[arg(long, default_value = "median")]
    bandwidth: String,
    /// MMD estimator
    #[arg(long, value_enum, default_value = "unbiased")]
    estimator: EstimatorName,
}

impl KernelArgs {
    fn metric(&self, name: MetricName) -> Result<MetricSpec> {
        Ok(match name {
            MetricName::Wasabi => MetricSpec::Wasabi,
            MetricName::Frechet => MetricSpec::Frechet,
            MetricName::Mmd => {
                let kernel = match self.kernel {
                    KernelName::Linear => KernelSpec::linear(),
                    KernelName::Rbf => KernelSpec::rbf(match self.bandwidth.as_str() {
                        "median" => Bandwidth::MedianHeuristic,
                        s => Bandwidth::Fixed(s.parse().with_context(|| format!("bad --bandwidth `{s}`"))?),
                    }),
                };
                MetricSpec::Mmd {
                    kernel,
                    estimator: match self.estimator {
                        EstimatorName::Biased => MmdEstimator::Biased,
                        EstimatorName::Unbiased => MmdEstimator::Unbiased,
                    },
                }
            }
        })
    }
}

#[derive(Args, Debug)]
pub struct ComputeArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, value_enum, default_value = "wasabi")]
    metric: MetricName,
    /// QC cutoff; derived from the first table by the IQR rule when omitted
    #[arg(long)]
    qc_threshold: Option<f64>,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
struct ComputeReport {
    #[serde(flatten)]
    result: DistanceResult,
    protocol: ComputeProtocol,
}

#[derive(Serialize)]
struct ComputeProtocol {
    metric: MetricSpec,
    #[serde(flatten)]
    qc: QcDecision,
    inputs: Vec<InputInfo>,
    retained: [usize; 2],
}

pub fn compute(args: ComputeArgs) -> Result<()> {
    let metric = args.kernel.metric(args.metric)?;
    let (a, ia) = args.input.prepare(&args.a)?;
    let (b, ib) = args.input.prepare(&args.b)?;
    let qc = decide_qc(&a, args.qc_threshold)?;
    let (a, b) = (apply_qc(&a, &qc)?, apply_qc(&b, &qc)?);
    let result = metric.compute(&a, &b)?;
    let text = match args.output.format {
        Format::Json => to_json(&ComputeReport {
            protocol: ComputeProtocol {
                metric,
                qc,
                inputs: vec![ia, ib],
                retained: [a.n_subjects(), b.n_subjects()],
            },
            result,
        })?,
        Format::Text => format!("{} {}\n", result.metric.as_str(), result.value),
        Format::Csv => format!("metric,value\n{},{}\n", result.metric.as_str(), result.value),
    };
    emit(args.output.out.as_deref(), &text)
}

#[derive(Args, Debug)]
pub struct BootstrapArgs {
    /// Reference table
    a: PathBuf,
    /// Second table; without it the within-cohort null of the first is run
    b: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "wasabi")]
    metric: MetricName,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    sample_size: usize,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    qc_threshold: Option<f64>,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn bootstrap(args: BootstrapArgs) -> Result<()> {
    let metric = args.kernel.metric(args.metric)?;
    let (a, ia) = args.input.prepare(&args.a)?;
    let qc = decide_qc(&a, args.qc_threshold)?;
    let a = apply_qc(&a, &qc)?;
    let mut inputs = vec![ia];
    let report = match &args.b {
        Some(path) => {
            let (b, ib) = args.input.prepare(path)?;
            inputs.push(ib);
            let b = apply_qc(&b, &qc)?;
            run_bootstrap(&a, &b, &metric, args.sample_size, args.repeats, args.seed)?
        }
        None => within_cohort_null(&a, &metric, args.sample_size, args.repeats, args.seed)?,
    };
    let text = match args.output.format {
        Format::Csv => report.to_csv(),
        Format::Json => to_json(&json!({
            "protocol": {
                "sample_size": args.sample_size,
                "repeats": args.repeats,
                "seed": args.seed,
                "metric": metric,
                "design": report.design,
                "qc_threshold": qc.qc_threshold,
                "qc_threshold_source": qc.qc_threshold_source,
                "inputs": inputs,
            },
            "report": report,
        }))?,
        Format::Text => {
            let s = &report.summary;
            format!(
                "{} over {} repeats (sample size {}, seed {})\nmean {}  sd {}  median {}  2.5% {}  97.5% {}\n",
                metric.name(),
                report.repeats,
                report.sample_size,
                report.seed,
                s.mean,
                s.sd,
                s.median,
                s.q2_5,
                s.q97_5
            )
        }
    };
    emit(args.output.out.as_deref(), &text)
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Reference table (the null row compares it with itself)
    reference: PathBuf,
    /// Candidate tables
    candidates: Vec<PathBuf>,
    /// Comma-separated metrics
    #[arg(long, value_enum, value_delimiter = ',', default_value = "wasabi")]
    metric: Vec<MetricName>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    sample_size: usize,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    qc_threshold: Option<f64>,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// JSON goes to `--out` (or standard output); with `--out` the text table
/// is also printed. `--format text` prints only the table.
pub fn compare(args: CompareArgs) -> Result<()> {
    let metrics = args
        .metric
        .iter()
        .map(|m| args.kernel.metric(*m))
        .collect::<Result<Vec<_>>>()?;
    let load = |p: &PathBuf| -> Result<Dataset> {
        Ok(Dataset {
            name: dataset_name(p),
            table: args.input.prepare(p)?.0,
        })
    };
    let reference = load(&args.reference)?;
    let candidates = args.candidates.iter().map(load).collect::<Result<Vec<_>>>()?;
    let protocol = ComparisonProtocol {
        sample_size: args.sample_size,
        repeats: args.repeats,
        seed: args.seed,
        qc_threshold: args.qc_threshold,
        metrics,
    };
    let report = run_comparison(&reference, &candidates, &protocol)?;
    for w in &report.warnings {
        warn(w);
    }
    let out = args.output.out.as_deref();
    match args.output.format {
        Format::Text => emit(out, &report.to_text(use_color(out))),
        Format::Csv => bail!("compare supports --format json or text"),
        Format::Json => {
            emit(out, &to_json(&report)?)?;
            if out.is_some() {
                emit(None, &report.to_text(use_color(None)))?;
            }
            Ok(())
        }
    }
}

#[derive(Args, Debug)]
pub struct QcFilterArgs {
    table: PathBuf,
    /// Explicit cutoff; otherwise the IQR rule on this table
    #[arg(long)]
    qc_threshold: Option<f64>,
    /// Also write the retained rows as CSV
    #[arg(long)]
    filtered: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn qc_filter(args: QcFilterArgs) -> Result<()> {
    let (t, info) = args.input.prepare_raw(&args.table)?;
    let qc = decide_qc(&t, args.qc_threshold)?;
    let Some(threshold) = qc.qc_threshold else {
        bail!("no QC threshold: {}", qc.qc_threshold_source);
    };
    let (kept, removed) = filter_by_qc(&t, threshold)?;
    let mut csv = Vec::new();
    kept.write_csv(&mut csv)?;
    if let Some(p) = &args.filtered {
        write_atomic(p, &csv)?;
    }
    let text = match args.output.format {
        Format::Csv => String::from_utf8(csv)?,
        _ => to_json(&json!({
            "qc_threshold": threshold,
            "qc_threshold_source": qc.qc_threshold_source,
            "input": info,
            "n_retained": kept.n_subjects(),
            "n_removed": removed.len(),
            "removed": removed,
        }))?,
    };
    emit(args.output.out.as_deref(), &text)
}

#[derive(Args, Debug)]
pub struct NormalityArgs {
    table: PathBuf,
    #[arg(long)]
    qc_threshold: Option<f64>,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn normality(args: NormalityArgs) -> Result<()> {
    let (t, info) = args.input.prepare(&args.table)?;
    let qc = decide_qc(&t, args.qc_threshold)?;
    let t = apply_qc(&t, &qc)?;
    let r = henze_zirkler(t.values())?;
    let text = match args.output.format {
        Format::Text => format!("HZ {}  beta {}  p {}  (n={}, d={})\n", r.statistic, r.beta, r.pvalue, r.n, r.d),
        _ => to_json(&json!({ "result": r, "protocol": { "qc": qc, "input": info } }))?,
    };
    emit(args.output.out.as_deref(), &text)
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Cohort spec JSON
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated effect sizes starting at 0; writes a scenario suite
    #[arg(long, value_delimiter = ',')]
    suite: Option<Vec<f64>>,
    /// Candidate standard-deviation scale for suites
    #[arg(long, default_value_t = 1.0)]
    cov_scale: f64,
    /// Directory for suite files
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Single-cohort CSV destination (default: standard output)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn csv_bytes(t: &wasabi_core::FeatureTable) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf)?;
    Ok(buf)
}

pub fn gen(args: GenArgs) -> Result<()> {
    let spec = CohortSpec::from_json_file(&args.spec).with_context(|| format!("spec {}", args.spec.display()))?;
    let Some(effects) = &args.suite else {
        let t = generate_cohort(&spec, args.seed)?;
        return emit(args.out.as_deref(), &String::from_utf8(csv_bytes(&t)?)?);
    };
    let Some(dir) = &args.out_dir else {
        bail!("--suite needs --out-dir");
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let pairs = generate_scenario_suite_scaled(&spec, effects, args.cov_scale, args.seed)?;
    let reference_file = format!("{}.csv", spec.name);
    write_atomic(&dir.join(&reference_file), &csv_bytes(&pairs[0].reference)?)?;
    let mut entries = Vec::new();
    for (k, p) in pairs.iter().enumerate() {
        let file = format!("{}_effect{k}.csv", spec.name);
        write_atomic(&dir.join(&file), &csv_bytes(&p.candidate)?)?;
        entries.push(json!({
            "effect_size": p.effect_size,
            "file": file,
            "ground_truth_w2": p.ground_truth_w2,
        }));
    }
    let manifest = to_json(&json!({
        "reference": reference_file,
        "seed": args.seed,
        "cov_scale": args.cov_scale,
        "candidates": entries,
    }))?;
    write_atomic(&dir.join("suite.json"), manifest.as_bytes())?;
    emit(None, &manifest)
}
