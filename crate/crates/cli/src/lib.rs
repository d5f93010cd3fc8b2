//! `simscan` command line: argument parsing, subcommand dispatch and the
//! JSON result document.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use simscan::io::{read_matrix, write_matrix, write_table, Delimiter};
use simscan::preprocess::{self, DEFAULT_SCALE_FLOOR};
use simscan::scan::{consistency_report, detect, per_sample_calls, ConsistencyCounts, OverlapRule, Pedigree};
use simscan::significance::{scan_pvalue, threshold, ScanGeometry, TailForm};
use simscan::simulate::{
    marginal_power, marginal_power_sum_chi_sq, simulate_null_maxima, simulate_ou_maxima, single_sample_marginal_power,
    upper_quantile, OuConfig, ParameterMode, PowerSetting,
};
use simscan::{Error, EstimationMode, IntensityMatrix, ScanConfig, StatisticKind, StatisticSpec};

pub const TOOL: &str = "simscan";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default Bonferroni count when `--bonferroni` is given without a value:
/// 22 autosomes plus X.
pub const DEFAULT_BONFERRONI: usize = 23;

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const IO: i32 = 2;
    pub const CONFIG: i32 = 3;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: exit::CONFIG,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: exit::IO,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Parse { .. } | Error::InvalidMatrix(_) | Error::DegenerateRow { .. } | Error::UnknownSample(_) => {
                exit::IO
            }
            Error::ConvergenceFailure { .. } => exit::FAILURE,
            _ => exit::CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "simscan", version, about = "Multi-sample scan statistics for shared variant intervals")]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a raw intensity matrix.
    Preprocess(PreprocessArgs),
    /// Detect shared variant intervals and write a JSON result document.
    Scan(ScanArgs),
    /// Analytic significance threshold for a scan geometry.
    Threshold(ThresholdArgs),
    /// Analytic p-value of an observed scan maximum.
    Pvalue(PvalueArgs),
    /// Marginal power over a grid of variant lengths.
    Power(PowerArgs),
    /// Monte Carlo null thresholds of the scan maximum.
    SimulateNull(SimulateNullArgs),
    /// Monte Carlo thresholds of the OU linkage statistic.
    SimulateLinkage(SimulateLinkageArgs),
    /// Replicate and trio consistency of the calls in result documents.
    Consistency(ConsistencyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticArg {
    Sumchisq,
    Mixture,
    Weighted,
}

impl StatisticArg {
    fn kind(self) -> StatisticKind {
        match self {
            StatisticArg::Sumchisq => StatisticKind::SumChiSq,
            StatisticArg::Mixture => StatisticKind::Mixture,
            StatisticArg::Weighted => StatisticKind::Weighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimationArg {
    Mle,
    Robust,
}

impl From<EstimationArg> for EstimationMode {
    fn from(e: EstimationArg) -> Self {
        match e {
            EstimationArg::Mle => EstimationMode::Mle,
            EstimationArg::Robust => EstimationMode::Robust,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailArg {
    Sum,
    Integral,
}

impl From<TailArg> for TailForm {
    fn from(t: TailArg) -> Self {
        match t {
            TailArg::Sum => TailForm::Sum,
            TailArg::Integral => TailForm::Integral,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StatisticArgs {
    #[arg(long, value_enum, default_value = "mixture")]
    pub statistic: StatisticArg,
    /// Prior carrier fraction for mixture and weighted statistics.
    #[arg(long, default_value_t = 0.1)]
    pub p0: f64,
}

impl StatisticArgs {
    fn spec(&self) -> CliResult<StatisticSpec> {
        if self.statistic == StatisticArg::Sumchisq {
            return Ok(StatisticSpec::sum_chi_sq());
        }
        if !(self.p0 > 0.0 && self.p0 <= 1.0) {
            return Err(CliError::config(format!("--p0 must lie in (0, 1], got {}", self.p0)));
        }
        Ok(StatisticSpec::new(self.statistic.kind(), self.p0)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct WindowArgs {
    /// Shortest window length.
    #[arg(long, default_value_t = 1)]
    pub t0: usize,
    /// Longest window length.
    #[arg(long)]
    pub t1: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GeometryArgs {
    /// Number of sequences N.
    #[arg(long)]
    pub samples: usize,
    /// Number of probes T.
    #[arg(long)]
    pub probes: usize,
    #[command(flatten)]
    pub window: WindowArgs,
}

impl GeometryArgs {
    fn geometry(&self) -> CliResult<ScanGeometry> {
        check_window(&self.window, self.probes)?;
        if self.samples == 0 {
            return Err(CliError::config("--samples must be at least 1"));
        }
        Ok(ScanGeometry::new(self.samples, self.probes, self.window.t0, self.window.t1)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct LevelArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Divide alpha by COUNT separate scans (23 when given without a value).
    #[arg(long, value_name = "COUNT", num_args = 0..=1, default_missing_value = "23")]
    pub bonferroni: Option<usize>,
}

impl LevelArgs {
    fn effective_alpha(&self) -> CliResult<f64> {
        check_alpha(self.alpha)?;
        match self.bonferroni {
            Some(0) => Err(CliError::config("--bonferroni count must be at least 1")),
            Some(k) => Ok(self.alpha / k as f64),
            None => Ok(self.alpha),
        }
    }
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::config(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_window(w: &WindowArgs, probes: usize) -> CliResult<()> {
    if w.t0 == 0 {
        return Err(CliError::config("--t0 must be at least 1"));
    }
    if w.t1 < w.t0 {
        return Err(CliError::config(format!("--t1 ({}) must be at least --t0 ({})", w.t1, w.t0)));
    }
    if w.t1 >= probes {
        return Err(CliError::config(format!(
            "--t1 ({}) must be smaller than the number of probes ({probes})",
            w.t1
        )));
    }
    Ok(())
}

fn check_reps(reps: usize, min: usize) -> CliResult<()> {
    if reps < min {
        return Err(CliError::config(format!("--reps must be at least {min}, got {reps}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    /// Raw matrix (tab or comma separated, one row per sample).
    pub matrix: PathBuf,
    /// Normalized matrix output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary of the pipeline.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Probes with spread below this are flagged and left unscaled.
    #[arg(long, default_value_t = DEFAULT_SCALE_FLOOR)]
    pub scale_floor: f64,
    /// Write diagnostic tables with this path prefix.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    /// Sample index for diagnostics.
    #[arg(long, default_value_t = 0)]
    pub diagnostics_sample: usize,
    /// Probe range START:END (0-based, end exclusive) for the regional QQ table.
    #[arg(long, value_parser = parse_range)]
    pub region: Option<(usize, usize)>,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    let a = a.trim().parse().map_err(|_| format!("bad start '{a}'"))?;
    let b = b.trim().parse().map_err(|_| format!("bad end '{b}'"))?;
    Ok((a, b))
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// Input matrix. Optional with --from-config.
    pub matrix: Option<PathBuf>,
    /// Re-run the configuration echoed in an earlier result document.
    #[arg(long, conflicts_with_all = ["t1"])]
    pub from_config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub t0: usize,
    #[arg(long)]
    pub t1: Option<usize>,
    #[command(flatten)]
    pub statistic: StatisticArgs,
    #[command(flatten)]
    pub level: LevelArgs,
    /// Minimum inside-vs-outside median gap for carriers.
    #[arg(long, default_value_t = 0.3)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 10)]
    pub max_intervals: usize,
    #[arg(long, value_enum, default_value = "mle")]
    pub estimation: EstimationArg,
    #[arg(long, value_enum, default_value = "sum")]
    pub tail_form: TailArg,
    /// Scan the matrix as given, skipping normalization.
    #[arg(long)]
    pub no_preprocess: bool,
    /// Recorded in the document; the scan itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Result document path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub statistic: StatisticArgs,
    #[command(flatten)]
    pub level: LevelArgs,
    #[arg(long, value_enum, default_value = "sum")]
    pub tail_form: TailArg,
}

#[derive(Debug, Clone, Args)]
pub struct PvalueArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub statistic: StatisticArgs,
    /// Observed scan maximum, in the scale of the chosen statistic.
    #[arg(long, allow_negative_numbers = true)]
    pub score: f64,
    #[arg(long, value_enum, default_value = "sum")]
    pub tail_form: TailArg,
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub samples: usize,
    /// Variant lengths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub lengths: Vec<usize>,
    /// Signal-to-noise ratios, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub snr: Vec<f64>,
    /// Fraction of carriers.
    #[arg(long, default_value_t = 0.1)]
    pub carrier_fraction: f64,
    #[command(flatten)]
    pub statistic: StatisticArgs,
    /// Threshold on the pooled score. Otherwise derived from --alpha and the
    /// scan geometry given by --probes, --t0, --t1.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub level: LevelArgs,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub t0: usize,
    #[arg(long)]
    pub t1: Option<usize>,
    /// Add a column for Bonferroni-combined single-sequence scans.
    #[arg(long)]
    pub compare_single: bool,
    /// Use the exact noncentral chi-square marginal (sumchisq only).
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateNullArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub statistic: StatisticArgs,
    /// Levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.01")]
    pub alpha: Vec<f64>,
    /// Re-estimate each sequence's mean and sd instead of treating them as known.
    #[arg(long)]
    pub estimated: bool,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateLinkageArgs {
    #[arg(long, default_value_t = 1000)]
    pub sequences: usize,
    /// Map length in cM.
    #[arg(long, default_value_t = 1600.0)]
    pub genome_length: f64,
    /// Marker spacing in cM.
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    /// OU decay rate per cM.
    #[arg(long, default_value_t = 0.02)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.02)]
    pub p0: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.01")]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ConsistencyArgs {
    /// Result documents from `simscan scan`, one per chromosome.
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
    /// Lines of `replicate A B` or `trio CHILD PARENT PARENT`.
    #[arg(long)]
    pub pedigree: PathBuf,
    /// Require this reciprocal overlap fraction instead of any overlap.
    #[arg(long)]
    pub reciprocal: Option<f64>,
}

/// Everything needed to reproduce a scan. Thread count is deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSettings {
    pub input: String,
    pub t0: usize,
    pub t1: usize,
    pub statistic: StatisticArg,
    pub p0: f64,
    pub alpha: f64,
    pub bonferroni: Option<usize>,
    pub effective_alpha: f64,
    pub delta_min: f64,
    pub max_intervals: usize,
    pub estimation: EstimationArg,
    pub tail_form: TailArg,
    pub preprocess: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    /// Interval `(tau1, tau2]` in 0-based probe offsets.
    pub tau1: usize,
    pub tau2: usize,
    /// Positions of the first and last probe inside the interval.
    pub start_position: i64,
    pub end_position: i64,
    pub score: f64,
    pub p_value: f64,
    pub carriers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDocument {
    pub tool: String,
    pub version: String,
    pub statistic: String,
    pub config: ScanSettings,
    pub seed: u64,
    pub n_samples: usize,
    pub n_probes: usize,
    pub sample_ids: Vec<String>,
    pub detections: Vec<DetectionRecord>,
}

impl ResultDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                ErrorKind::InvalidValue | ErrorKind::ValueValidation => exit::CONFIG,
                _ => exit::IO,
            };
            let rendered = e.render().to_string();
            let _ = if code == exit::OK {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let threads = cli.threads.unwrap_or(0);
    if cli.threads == Some(0) {
        return Err(CliError::config("--threads must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(format!("--threads: {e}")))?;
    // commands write into a buffer inside the pool; one writer flushes it
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| {
        let w: &mut dyn Write = &mut buf;
        match &cli.command {
            Command::Preprocess(a) => cmd_preprocess(a, w),
            Command::Scan(a) => cmd_scan(a, w),
            Command::Threshold(a) => cmd_threshold(a, w),
            Command::Pvalue(a) => cmd_pvalue(a, w),
            Command::Power(a) => cmd_power(a, w),
            Command::SimulateNull(a) => cmd_simulate_null(a, w),
            Command::SimulateLinkage(a) => cmd_simulate_linkage(a, w),
            Command::Consistency(a) => cmd_consistency(a, w),
        }
    });
    out.write_all(&buf)?;
    result
}

fn write_output(path: Option<&Path>, text: &[u8], out: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
        None => Ok(out.write_all(text)?),
    }
}

fn create(path: &Path) -> CliResult<fs::File> {
    fs::File::create(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct PreprocessSummary<'a> {
    n_samples: usize,
    n_probes: usize,
    per_sample_medians: &'a [f64],
    leading_singular_value: f64,
    singular_value_ratio: Option<f64>,
    flagged_probes: &'a [usize],
}

fn cmd_preprocess(a: &PreprocessArgs, out: &mut dyn Write) -> CliResult<()> {
    if !(a.scale_floor >= 0.0) {
        return Err(CliError::config("--scale-floor must be non-negative"));
    }
    let raw = read_matrix(&a.matrix)?;
    let (y, report) = preprocess::preprocess(&raw, a.scale_floor)?;

    if let Some(prefix) = &a.diagnostics {
        let region = a.region.map(|(s, e)| s..e);
        let diag = preprocess::diagnostics(&y, a.diagnostics_sample, region)?;
        preprocess::write_qq_table(create(&with_suffix(prefix, ".qq.tsv"))?, &diag.qq)?;
        if let Some(q) = &diag.qq_region {
            preprocess::write_qq_table(create(&with_suffix(prefix, ".qq_region.tsv"))?, q)?;
        }
        preprocess::write_acf_table(create(&with_suffix(prefix, ".acf.tsv"))?, &diag.acf)?;
        preprocess::write_scale_table(create(&with_suffix(prefix, ".scale.tsv"))?, &report)?;
    } else if a.region.is_some() {
        return Err(CliError::config("--region requires --diagnostics"));
    }
    if let Some(path) = &a.report {
        let summary = PreprocessSummary {
            n_samples: y.n_samples(),
            n_probes: y.n_probes(),
            per_sample_medians: &report.per_sample_medians,
            leading_singular_value: report.leading_singular_value,
            singular_value_ratio: report.singular_value_ratio.is_finite().then_some(report.singular_value_ratio),
            flagged_probes: &report.flagged_probes,
        };
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        write_output(Some(path), text.as_bytes(), out)?;
    }
    let mut buf = Vec::new();
    write_matrix(&mut buf, &y, Delimiter::Tab)?;
    write_output(a.out.as_deref(), &buf, out)
}

fn scan_settings(a: &ScanArgs) -> CliResult<ScanSettings> {
    if let Some(path) = &a.from_config {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let doc: ResultDocument = serde_json::from_str(&text)
            .map_err(|e| CliError::io(format!("{}: not a result document: {e}", path.display())))?;
        let mut settings = doc.config;
        if let Some(m) = &a.matrix {
            settings.input = m.display().to_string();
        }
        return Ok(settings);
    }
    let matrix = a
        .matrix
        .as_ref()
        .ok_or_else(|| CliError::config("a matrix path is required unless --from-config is given"))?;
    let t1 = a.t1.ok_or_else(|| CliError::config("--t1 is required"))?;
    Ok(ScanSettings {
        input: matrix.display().to_string(),
        t0: a.t0,
        t1,
        statistic: a.statistic.statistic,
        p0: a.statistic.p0,
        alpha: a.level.alpha,
        bonferroni: a.level.bonferroni,
        effective_alpha: a.level.effective_alpha()?,
        delta_min: a.delta_min,
        max_intervals: a.max_intervals,
        estimation: a.estimation,
        tail_form: a.tail_form,
        preprocess: !a.no_preprocess,
        seed: a.seed,
    })
}

/// Runs a scan from settings; shared by the CLI and its tests.
pub fn run_scan(settings: &ScanSettings) -> CliResult<ResultDocument> {
    let level = LevelArgs {
        alpha: settings.alpha,
        bonferroni: settings.bonferroni,
    };
    let effective_alpha = level.effective_alpha()?;
    let spec = StatisticArgs {
        statistic: settings.statistic,
        p0: settings.p0,
    }
    .spec()?;
    if !(settings.delta_min > 0.0) {
        return Err(CliError::config(format!("--delta-min must be positive, got {}", settings.delta_min)));
    }
    if settings.max_intervals == 0 {
        return Err(CliError::config("--max-intervals must be at least 1"));
    }
    let raw = read_matrix(Path::new(&settings.input))?;
    check_window(
        &WindowArgs {
            t0: settings.t0,
            t1: settings.t1,
        },
        raw.n_probes(),
    )?;
    let data: IntensityMatrix = if settings.preprocess {
        preprocess::preprocess(&raw, DEFAULT_SCALE_FLOOR)?.0
    } else {
        raw
    };
    let mut config = ScanConfig::new(settings.t0, settings.t1, spec);
    config.alpha = effective_alpha;
    config.max_intervals = settings.max_intervals;
    config.carrier_delta_min = settings.delta_min;
    config.estimation_mode = settings.estimation.into();
    config.tail_form = settings.tail_form.into();
    let found = detect(&data, &config)?;

    let ids = data.sample_ids();
    let positions = data.probe_positions();
    let detections = found
        .iter()
        .map(|d| DetectionRecord {
            tau1: d.tau1,
            tau2: d.tau2,
            start_position: positions[d.tau1],
            end_position: positions[d.tau2 - 1],
            score: d.score,
            p_value: d.p_value,
            carriers: d.carriers.iter().map(|&i| ids[i].clone()).collect(),
        })
        .collect();
    Ok(ResultDocument {
        tool: TOOL.into(),
        version: VERSION.into(),
        statistic: spec.to_string(),
        config: settings.clone(),
        seed: settings.seed,
        n_samples: data.n_samples(),
        n_probes: data.n_probes(),
        sample_ids: ids.to_vec(),
        detections,
    })
}

fn cmd_scan(a: &ScanArgs, out: &mut dyn Write) -> CliResult<()> {
    let settings = scan_settings(a)?;
    let doc = run_scan(&settings)?;
    write_output(a.out.as_deref(), doc.to_json().as_bytes(), out)
}

fn cmd_threshold(a: &ThresholdArgs, out: &mut dyn Write) -> CliResult<()> {
    let spec = a.statistic.spec()?;
    let geom = a.geometry.geometry()?;
    let alpha = a.level.effective_alpha()?;
    let b = threshold(&spec, &geom, alpha, a.tail_form.into())?;
    writeln!(out, "{b}")?;
    Ok(())
}

fn cmd_pvalue(a: &PvalueArgs, out: &mut dyn Write) -> CliResult<()> {
    let spec = a.statistic.spec()?;
    let geom = a.geometry.geometry()?;
    if !a.score.is_finite() {
        return Err(CliError::config("--score must be finite"));
    }
    let p = scan_pvalue(&spec, &geom, a.score, a.tail_form.into())?;
    writeln!(out, "{}", p.value)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn cmd_power(a: &PowerArgs, out: &mut dyn Write) -> CliResult<()> {
    let spec = a.statistic.spec()?;
    if a.samples == 0 {
        return Err(CliError::config("--samples must be at least 1"));
    }
    if a.lengths.is_empty() || a.lengths.contains(&0) {
        return Err(CliError::config("--lengths must be a non-empty list of positive integers"));
    }
    if a.snr.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(CliError::config("--snr values must be finite and non-negative"));
    }
    if !(a.carrier_fraction > 0.0 && a.carrier_fraction <= 1.0) {
        return Err(CliError::config(format!(
            "--carrier-fraction must lie in (0, 1], got {}",
            a.carrier_fraction
        )));
    }
    if a.exact && spec.kind() != StatisticKind::SumChiSq {
        return Err(CliError::config("--exact is only available with --statistic sumchisq"));
    }
    if !a.exact {
        check_reps(a.reps, 1000)?;
    }
    let alpha = a.level.effective_alpha()?;
    let scan_geometry = |n: usize| -> CliResult<ScanGeometry> {
        let (Some(probes), Some(t1)) = (a.probes, a.t1) else {
            return Err(CliError::config(
                "give --threshold, or --probes and --t1 to derive it from --alpha",
            ));
        };
        check_window(&WindowArgs { t0: a.t0, t1 }, probes)?;
        Ok(ScanGeometry::new(n, probes, a.t0, t1)?)
    };
    let b = match a.threshold {
        Some(b) if b.is_nan() => return Err(CliError::config("--threshold is NaN")),
        Some(b) => b,
        None => threshold(&spec, &scan_geometry(a.samples)?, alpha, TailForm::Sum)?,
    };
    let b_single = if a.compare_single {
        let geom = scan_geometry(1)?;
        Some(threshold(
            &StatisticSpec::sum_chi_sq(),
            &geom,
            alpha / a.samples as f64,
            TailForm::Sum,
        )?)
    } else {
        None
    };

    let mut header = vec!["length", "snr", "carriers", "power"];
    if b_single.is_some() {
        header.push("single_power");
    }
    let mut rows = Vec::new();
    for &snr in &a.snr {
        for &tau_len in &a.lengths {
            let setting = PowerSetting {
                n_samples: a.samples,
                tau_len,
                snr,
                carrier_fraction: a.carrier_fraction,
            };
            let power = if a.exact {
                marginal_power_sum_chi_sq(&setting, b)?
            } else {
                marginal_power(&spec, &setting, b, a.reps, a.seed)?
            };
            let mut row = vec![tau_len.to_string(), fmt(snr), setting.carriers().to_string(), fmt(power)];
            if let Some(bs) = b_single {
                row.push(fmt(single_sample_marginal_power(&setting, bs, a.reps.max(1000), a.seed)?));
            }
            rows.push(row);
        }
    }
    writeln!(out, "# statistic {spec}, threshold {b}")?;
    write_table(&mut *out, &header, &rows, Delimiter::Tab)?;
    Ok(())
}

fn check_alphas(alphas: &[f64]) -> CliResult<()> {
    if alphas.is_empty() {
        return Err(CliError::config("--alpha needs at least one level"));
    }
    alphas.iter().try_for_each(|&a| check_alpha(a))
}

fn cmd_simulate_null(a: &SimulateNullArgs, out: &mut dyn Write) -> CliResult<()> {
    let spec = a.statistic.spec()?;
    let geom = a.geometry.geometry()?;
    check_alphas(&a.alpha)?;
    check_reps(a.reps, 100)?;
    let mode = if a.estimated {
        ParameterMode::Estimated
    } else {
        ParameterMode::Known
    };
    let maxima = simulate_null_maxima(&[spec], &geom, a.reps, a.seed, mode)?;
    let rows: Vec<Vec<String>> = a
        .alpha
        .iter()
        .map(|&alpha| vec![fmt(alpha), fmt(upper_quantile(&maxima[0], alpha))])
        .collect();
    writeln!(out, "# statistic {spec}, {} reps, seed {}", a.reps, a.seed)?;
    write_table(&mut *out, &["alpha", "threshold"], &rows, Delimiter::Tab)?;
    Ok(())
}

fn cmd_simulate_linkage(a: &SimulateLinkageArgs, out: &mut dyn Write) -> CliResult<()> {
    check_alphas(&a.alpha)?;
    check_reps(a.reps, 100)?;
    if !(a.beta > 0.0) {
        return Err(CliError::config(format!("--beta must be positive, got {}", a.beta)));
    }
    let spec = StatisticArgs {
        statistic: StatisticArg::Mixture,
        p0: a.p0,
    }
    .spec()?;
    let config = OuConfig {
        n_sequences: a.sequences,
        genome_length: a.genome_length,
        spacing: a.spacing,
        beta: a.beta,
        p0: a.p0,
    };
    let maxima = simulate_ou_maxima(&config, &[spec], a.reps, a.seed)?;
    let rows: Vec<Vec<String>> = a
        .alpha
        .iter()
        .map(|&alpha| vec![fmt(alpha), fmt(upper_quantile(&maxima[0], alpha))])
        .collect();
    writeln!(
        out,
        "# OU linkage, N {}, grid {} x {} cM, beta {}, p0 {}, {} reps, seed {}",
        a.sequences,
        config.grid_size(),
        a.spacing,
        a.beta,
        a.p0,
        a.reps,
        a.seed
    )?;
    write_table(&mut *out, &["alpha", "threshold"], &rows, Delimiter::Tab)?;
    Ok(())
}

#[derive(Serialize)]
struct ConsistencyOutput {
    total: usize,
    inconsistent: usize,
}

fn cmd_consistency(a: &ConsistencyArgs, out: &mut dyn Write) -> CliResult<()> {
    let rule = match a.reciprocal {
        None => OverlapRule::Any,
        Some(f) if f > 0.0 && f <= 1.0 => OverlapRule::Reciprocal(f),
        Some(f) => return Err(CliError::config(format!("--reciprocal must lie in (0, 1], got {f}"))),
    };
    let text = fs::read_to_string(&a.pedigree).map_err(|e| CliError::io(format!("{}: {e}", a.pedigree.display())))?;
    let pedigree = Pedigree::parse(&text)?;
    let mut totals = ConsistencyCounts::default();
    // each document is scored on its own so intervals on different
    // chromosomes never match each other
    for path in &a.results {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let doc: ResultDocument = serde_json::from_str(&text)
            .map_err(|e| CliError::io(format!("{}: not a result document: {e}", path.display())))?;
        let index: std::collections::HashMap<&str, usize> =
            doc.sample_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let detections = doc
            .detections
            .iter()
            .map(|d| {
                let carriers = d
                    .carriers
                    .iter()
                    .map(|c| index.get(c.as_str()).copied().ok_or_else(|| Error::UnknownSample(c.clone())))
                    .collect::<simscan::Result<Vec<_>>>()?;
                Ok(simscan::Detection {
                    tau1: d.tau1,
                    tau2: d.tau2,
                    score: d.score,
                    p_value: d.p_value,
                    carriers,
                    per_sample_u: Vec::new(),
                })
            })
            .collect::<simscan::Result<Vec<_>>>()?;
        let calls = per_sample_calls(&detections, &doc.sample_ids);
        let c = consistency_report(&calls, &pedigree, rule)?;
        totals.total += c.total;
        totals.inconsistent += c.inconsistent;
    }
    let text = serde_json::to_string_pretty(&ConsistencyOutput {
        total: totals.total,
        inconsistent: totals.inconsistent,
    })
    .expect("counts serialize");
    writeln!(out, "{text}")?;
    Ok(())
}
