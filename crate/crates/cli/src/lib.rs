//! Commands behind the `bkcbr` binary.
//!
//! Every command prints a human-readable result on standard output. With
//! `--out` it also writes a machine-readable file in `--format`.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use bkcbr::bktree::{BuildParams, TreeError};
use bkcbr::dataset::{describe, load_dataset, DatasetError, DatasetSummary, ProjectSet};
use bkcbr::distance::{DistanceConfig, DistanceError};
use bkcbr::estimator::{k_histogram, Method};
use bkcbr::evaluation::{
    compare_methods, loocv, reports_to_csv, Comparison, EvalError, EvaluationReport, LoocvParams,
};
use bkcbr::BkTree;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] DatasetError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("cannot write output: {0}")]
    Output(#[from] io::Error),
    #[error("{failed} of {total} methods failed")]
    MethodsFailed { failed: usize, total: usize },
}

impl CliError {
    /// 2 for unusable input (files, schema, flags), 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Load(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bkcbr",
    version,
    about = "Case-based effort estimation with bisecting k-medoids"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print case count and effort min, max, mean.
    Validate(RunArgs),
    /// Leave-one-out MMRE and PRED for each method.
    Benchmark(RunArgs),
    /// Histogram of the K chosen per project by `bestk` or `bk`.
    Bestk(RunArgs),
    /// Pairwise Wilcoxon rank-sum tests on absolute residuals.
    Compare(RunArgs),
    /// Dump the tree built over the whole dataset.
    Tree(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Comma-separated tags: bk, k<N>, bestk.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub literal_eq2: bool,
    #[arg(long, default_value_t = 0.25)]
    pub pred_level: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved settings of one run, embedded in benchmark reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub restarts: usize,
    pub literal_eq2: bool,
    pub pred_level: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs, default_methods: &[Method]) -> Result<Self, CliError> {
        let cfg = Self {
            dataset: args.dataset.clone(),
            schema: args.schema.clone(),
            methods: args
                .methods
                .clone()
                .unwrap_or_else(|| default_methods.to_vec()),
            seed: args.seed,
            restarts: args.restarts,
            literal_eq2: args.literal_eq2,
            pred_level: args.pred_level,
            format: args.format,
            out: args.out.clone(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        if self.methods.is_empty() {
            return Err(CliError::Config("no methods given".into()));
        }
        if !(self.pred_level > 0.0 && self.pred_level < 1.0) {
            return Err(CliError::Config(format!(
                "pred-level {} is outside (0, 1)",
                self.pred_level
            )));
        }
        if self.restarts == 0 {
            return Err(CliError::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn loocv_params(&self) -> LoocvParams {
        LoocvParams {
            literal_eq2: self.literal_eq2,
            build: BuildParams {
                restarts: self.restarts,
                ..BuildParams::default()
            },
            pred_level: self.pred_level,
        }
    }

    fn load(&self) -> Result<ProjectSet, CliError> {
        Ok(load_dataset(&self.dataset, &self.schema)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFailure {
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: RunConfig,
    pub reports: Vec<EvaluationReport>,
    pub failures: Vec<MethodFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: RunConfig,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub method: Method,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub k: usize,
    pub frequency: usize,
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate(a) => cmd_validate(&RunConfig::resolve(a, &Method::STANDARD)?, out),
        Command::Benchmark(a) => {
            cmd_benchmark(&RunConfig::resolve(a, &Method::STANDARD)?, out, err)
        }
        Command::Bestk(a) => cmd_bestk(&RunConfig::resolve(a, &[Method::BestK])?, out),
        Command::Compare(a) => cmd_compare(&RunConfig::resolve(a, &Method::STANDARD)?, out),
        Command::Tree(a) => cmd_tree(&RunConfig::resolve(a, &Method::STANDARD)?, out),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// First line `cases, min, max, mean`, then one `name,kind,role` line per
/// column.
pub fn summary_text(s: &DatasetSummary) -> String {
    let mut t = format!(
        "{}, {}, {}, {}\n",
        s.cases, s.effort_min, s.effort_max, s.effort_mean
    );
    for f in &s.features {
        writeln!(t, "{},{},{}", f.name, f.kind, f.role).unwrap();
    }
    t
}

pub fn summary_csv(s: &DatasetSummary) -> String {
    format!(
        "cases,effort_min,effort_max,effort_mean\n{},{},{},{}\n",
        s.cases, s.effort_min, s.effort_max, s.effort_mean
    )
}

pub fn cmd_validate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let summary = describe(&cfg.load()?);
    out.write_all(summary_text(&summary).as_bytes())?;
    if let Some(path) = &cfg.out {
        let body = match cfg.format {
            Format::Json => to_json(&summary),
            Format::Csv => summary_csv(&summary),
        };
        write_file(path, &body)?;
    }
    Ok(())
}

/// Runs every configured method; failures are collected rather than
/// aborting the remaining methods.
pub fn evaluate_all(
    cfg: &RunConfig,
    ps: &ProjectSet,
) -> (Vec<EvaluationReport>, Vec<MethodFailure>) {
    let params = cfg.loocv_params();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for &m in &cfg.methods {
        match loocv(ps, m, &params, cfg.seed) {
            Ok(r) => reports.push(r),
            Err(e) => failures.push(MethodFailure {
                method: m,
                message: e.to_string(),
            }),
        }
    }
    (reports, failures)
}

fn percent(v: Option<f64>, scale: f64) -> String {
    v.map(|x| format!("{:.2}", x * scale))
        .unwrap_or_else(|| "N/A".into())
}

/// Methods as rows, MMRE and PRED (both in percent) as columns.
pub fn summary_table(reports: &[EvaluationReport], pred_level: f64) -> String {
    let mut t = format!(
        "{:<8} {:>10} {:>10}\n",
        "method",
        "MMRE",
        format!("PRED({pred_level})")
    );
    for r in reports {
        writeln!(
            t,
            "{:<8} {:>10} {:>10}",
            r.method.to_string(),
            percent(r.mmre, 100.0),
            percent(r.pred, 1.0)
        )
        .unwrap();
    }
    t
}

pub fn cmd_benchmark(
    cfg: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let ps = cfg.load()?;
    let (reports, failures) = evaluate_all(cfg, &ps);
    out.write_all(summary_table(&reports, cfg.pred_level).as_bytes())?;
    for f in &failures {
        writeln!(err, "{}: {}", f.method, f.message)?;
    }
    if let Some(path) = &cfg.out {
        let body = match cfg.format {
            Format::Json => to_json(&BenchmarkReport {
                config: cfg.clone(),
                reports,
                failures: failures.clone(),
            }),
            Format::Csv => reports_to_csv(&reports),
        };
        write_file(path, &body)?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::MethodsFailed {
            failed: failures.len(),
            total: cfg.methods.len(),
        })
    }
}

pub fn histogram(report: &EvaluationReport) -> Histogram {
    Histogram {
        method: report.method,
        bins: k_histogram(&report.k_values())
            .into_iter()
            .map(|(k, frequency)| HistogramBin { k, frequency })
            .collect(),
    }
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut t = String::from("k,frequency\n");
    for b in &h.bins {
        writeln!(t, "{},{}", b.k, b.frequency).unwrap();
    }
    t
}

pub fn cmd_bestk(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let method = match cfg.methods.as_slice() {
        [m @ (Method::BestK | Method::Bk)] => *m,
        _ => {
            return Err(CliError::Config(
                "bestk takes exactly one method, bestk or bk".into(),
            ))
        }
    };
    let ps = cfg.load()?;
    let report = loocv(&ps, method, &cfg.loocv_params(), cfg.seed)?;
    let h = histogram(&report);
    let csv = histogram_csv(&h);
    out.write_all(csv.as_bytes())?;
    if let Some(path) = &cfg.out {
        let body = match cfg.format {
            Format::Json => to_json(&h),
            Format::Csv => csv,
        };
        write_file(path, &body)?;
    }
    Ok(())
}

fn cell_text(c: &Comparison, i: usize, j: usize, p: impl Fn(f64) -> String) -> String {
    match c.cell(i, j) {
        Some(cell) => format!(
            "{}{}",
            p(cell.p_value),
            if cell.significant { "*" } else { "" }
        ),
        None => "N/A".into(),
    }
}

/// Square matrix of two-sided p-values, `*` marking p below alpha.
pub fn comparison_table(c: &Comparison) -> String {
    let mut t = format!("{:<8}", "");
    for m in &c.methods {
        write!(t, " {m:>10}").unwrap();
    }
    t.push('\n');
    for (i, m) in c.methods.iter().enumerate() {
        write!(t, "{m:<8}").unwrap();
        for j in 0..c.methods.len() {
            write!(t, " {:>10}", cell_text(c, i, j, |p| format!("{p:.4}"))).unwrap();
        }
        t.push('\n');
    }
    t
}

/// Same layout as [`comparison_table`] with full-precision p-values.
pub fn comparison_csv(c: &Comparison) -> String {
    let mut w = String::from("method");
    for m in &c.methods {
        write!(w, ",{m}").unwrap();
    }
    w.push('\n');
    for (i, m) in c.methods.iter().enumerate() {
        w.push_str(m);
        for j in 0..c.methods.len() {
            write!(w, ",{}", cell_text(c, i, j, |p| p.to_string())).unwrap();
        }
        w.push('\n');
    }
    w
}

pub fn cmd_compare(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if cfg.methods.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two methods".into(),
        ));
    }
    let ps = cfg.load()?;
    let params = cfg.loocv_params();
    let reports = cfg
        .methods
        .iter()
        .map(|&m| loocv(&ps, m, &params, cfg.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let comparison = compare_methods(&reports, SIGNIFICANCE)?;
    out.write_all(comparison_table(&comparison).as_bytes())?;
    if let Some(path) = &cfg.out {
        let body = match cfg.format {
            Format::Json => to_json(&ComparisonReport {
                config: cfg.clone(),
                comparison,
            }),
            Format::Csv => comparison_csv(&comparison),
        };
        write_file(path, &body)?;
    }
    Ok(())
}

/// The dump format is fixed, so `--format` is ignored.
pub fn cmd_tree(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let ps = cfg.load()?;
    let dist = DistanceConfig::from_training(&ps, cfg.literal_eq2)?;
    let params = cfg.loocv_params().build;
    let dump = BkTree::build(&ps, &dist, params, cfg.seed)?.dump();
    out.write_all(dump.as_bytes())?;
    if let Some(path) = &cfg.out {
        write_file(path, &dump)?;
    }
    Ok(())
}
