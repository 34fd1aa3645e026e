//! Command-line interface.
//!
//! Exit status: 0 on success, 2 for invalid arguments or input, 1 for
//! anything else. Output files of a failed command are removed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::comparison::{compare, gap_distribution, orientations, GapMode, Rope, DEFAULT_ROPE_EPS};
use crate::error::{Error, Result};
use crate::experiment::{coverage_experiment, estimate_rho, CoverageSettings, CoverageStrategy, DEFAULT_HALF_SPLITS};
use crate::harness::{make_synthetic, ClassifierSpec, SyntheticSpec, TabularDataset};
use crate::hdr::{default_resolution, fit_hdr, DEFAULT_COVERAGE};
use crate::io::{self, Config, Format, ReferenceRho, Report, RhoConfig};
use crate::metrics::{column_names, metric_by_name, metrics_for_columns, parse_metric_list};
use crate::pipeline::{resolve_rho, PosteriorModel};
use crate::posterior::marginal_summary;
use crate::types::EvaluationSource;

#[derive(Debug, Parser)]
#[command(name = "fairbayes", version, about = "Bayesian uncertainty of classifier performance and fairness metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the posterior of a metric vector from confusion matrices or predictions.
    Posterior(PosteriorArgs),
    /// Compare two methods' posterior samples against a RoPE.
    Compare(CompareArgs),
    /// Estimate a classifier's fold correlation relative to a reference classifier.
    EstimateRho(EstimateRhoArgs),
    /// Highest density region of 1-D or 2-D samples.
    Hdr(HdrArgs),
    /// Harness experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Args)]
pub struct PosteriorArgs {
    /// Confusion-matrix CSV (`[fold,]group,tp,tn,fp,fn`) or prediction CSV (`y_true,y_pred,group[,fold]`).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated metrics, e.g. `accuracy,eop`.
    #[arg(long)]
    pub metrics: Option<String>,
    /// Number of posterior samples.
    #[arg(short = 'T', long = "samples")]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fold correlation for K-fold input: `fixed`, `interval`, a number, or
    /// `relative:<r_over>[:fixed|interval]`.
    #[arg(long)]
    pub rho: Option<String>,
    /// Output directory for `samples.csv` and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Sample CSV of method A.
    #[arg(long)]
    pub a: PathBuf,
    /// Sample CSV of method B.
    #[arg(long)]
    pub b: PathBuf,
    /// RoPE half-widths, one per column (or a single value for one column).
    #[arg(long)]
    pub rope: Option<String>,
    #[arg(long, default_value = "oriented")]
    pub mode: String,
    /// Output directory for `report.json` and `gaps.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset CSV (`group,label,features...`) or synthetic spec JSON.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Reference group for fairness differences; defaults to the smallest label.
    #[arg(long)]
    pub reference_group: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EstimateRhoArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value = "logistic")]
    pub classifier: String,
    #[arg(long, default_value = "logistic")]
    pub reference_classifier: String,
    #[arg(short = 'K', long = "folds", default_value_t = 10)]
    pub k: usize,
    #[arg(short = 'M', long = "half-splits", default_value_t = DEFAULT_HALF_SPLITS)]
    pub m: usize,
    #[arg(long, default_value = "fixed")]
    pub reference_rho: String,
    #[arg(long, default_value = "accuracy")]
    pub metric: String,
    /// Also write the JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HdrArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Columns to use (comma-separated); defaults to all.
    #[arg(long)]
    pub columns: Option<String>,
    #[arg(long, default_value_t = DEFAULT_COVERAGE)]
    pub coverage: f64,
    /// Grid nodes per axis.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// HDR JSON output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional grid-mask (2-D) or interval (1-D) CSV.
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Posterior HDR area and coverage of repeated CVs per rho strategy.
    Coverage(CoverageArgs),
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value = "logistic")]
    pub classifier: String,
    #[arg(long, default_value = "logistic")]
    pub reference_classifier: String,
    #[arg(short = 'K', long = "folds", default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    #[arg(short = 'M', long = "half-splits", default_value_t = DEFAULT_HALF_SPLITS)]
    pub m: usize,
    /// Comma-separated subset of fixed,interval,relative,relative_interval.
    #[arg(long, default_value = "fixed,interval,relative,relative_interval")]
    pub rho_strategy: String,
    #[arg(long, default_value = "accuracy,eop")]
    pub metrics: String,
    #[arg(short = 'T', long = "samples", default_value_t = crate::posterior::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_COVERAGE)]
    pub coverage: f64,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Output directory for `coverage.json` and `coverage.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Files written by the running command, removed again if it fails.
#[derive(Default)]
struct Outputs {
    written: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        io::write_atomic(path, bytes)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn discard(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

/// Parses the `--rho` flag.
pub fn parse_rho(text: &str) -> Result<RhoConfig> {
    let text = text.trim();
    match text {
        "fixed" => return Ok(RhoConfig::Fixed),
        "interval" => return Ok(RhoConfig::Interval),
        _ => {}
    }
    if let Some(rest) = text.strip_prefix("relative:") {
        let mut parts = rest.split(':');
        let r_over = parts
            .next()
            .and_then(|r| r.parse::<f64>().ok())
            .ok_or_else(|| Error::config(format!("bad r_over in `{text}`")))?;
        let reference = match parts.next() {
            Some(r) => r.parse::<ReferenceRho>()?,
            None => ReferenceRho::Fixed,
        };
        if parts.next().is_some() {
            return Err(Error::config(format!("bad rho `{text}`")));
        }
        return Ok(RhoConfig::Relative { r_over, reference });
    }
    let value = text.strip_prefix("value:").unwrap_or(text);
    value
        .parse::<f64>()
        .map(|value| RhoConfig::Value { value })
        .map_err(|_| Error::config(format!("bad rho `{text}` (fixed|interval|<value>|relative:<r>[:fixed|interval])")))
}

fn load_dataset(path: &Path) -> Result<TabularDataset> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        make_synthetic(&SyntheticSpec::load(path)?)
    } else {
        TabularDataset::load_csv(path)
    }
}

fn reference_group(data: &TabularDataset, chosen: Option<&String>) -> Result<String> {
    let labels = data.group_labels();
    match chosen {
        Some(g) if labels.contains(g) => Ok(g.clone()),
        Some(g) => Err(Error::config(format!("reference group `{g}` not present in dataset"))),
        None => labels.first().cloned().ok_or_else(|| Error::input("dataset has no groups")),
    }
}

fn has_column(path: &Path, name: &str) -> Result<bool> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    let headers = rdr.headers().map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    Ok(headers.iter().any(|h| h == name))
}

fn run_posterior(args: &PosteriorArgs, out: &mut Outputs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(t) = args.samples {
        config.samples = t;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(r) = &args.rho {
        config.rho = parse_rho(r)?;
    }
    let metrics = match (&args.metrics, &config.metrics) {
        (Some(list), _) => parse_metric_list(list)?,
        (None, Some(list)) => parse_metric_list(&list.join(","))?,
        (None, None) => parse_metric_list("accuracy")?,
    };
    let input = if has_column(&args.input, "tp")? {
        io::load_confusion_matrices(&args.input)?
    } else {
        io::load_predictions(&args.input, &config.labels, config.groups.as_deref())?
    };
    let reference = config.reference_for(&input.group_labels())?;
    let rho = match input.source() {
        EvaluationSource::Kfold if input.k() > 1 => Some(resolve_rho(&config.rho, input.k())?),
        _ => None,
    };
    let model = PosteriorModel::fit(&input, &config.prior, &reference, rho)?;
    if let Some(rho) = &model.rho {
        eprintln!(
            "effective confusion matrices: K = {}, rho = {}, scale = 1/{}",
            model.k,
            io::format_real(rho.value),
            io::format_real(1.0 / model.effective_scale)
        );
        for cm in &model.observed {
            let cells: Vec<String> = cm.cells().iter().map(|v| io::format_real(*v)).collect();
            eprintln!("  {}: tp={} tn={} fp={} fn={}", cm.group, cells[0], cells[1], cells[2], cells[3]);
        }
    }
    let samples = model.sample(&metrics, config.samples, config.seed)?;
    let level = config.coverage;
    let summaries =
        samples.columns().iter().map(|c| marginal_summary(&samples, c, level)).collect::<Result<Vec<_>>>()?;

    ensure_dir(&args.out)?;
    out.write(&args.out.join("samples.csv"), &io::render(&Report::Samples(&samples), Format::Csv))?;
    let summary = serde_json::json!({
        "seed": config.seed,
        "samples": config.samples,
        "reference_group": reference,
        "metrics": metrics,
        "model": model,
        "summaries": summaries,
    });
    out.write(&args.out.join("summary.json"), &io::to_json(&summary))
}

fn run_compare(args: &CompareArgs, out: &mut Outputs) -> Result<()> {
    let mode: GapMode = args.mode.parse()?;
    let a = io::load_samples(&args.a)?;
    let b = io::load_samples(&args.b)?;
    if a.columns() != b.columns() {
        return Err(Error::input(format!("metric sets differ: {:?} vs {:?}", a.columns(), b.columns())));
    }
    let orient = match mode {
        GapMode::Raw => vec![crate::comparison::Orientation::Difference; a.width()],
        GapMode::Oriented => orientations(&metrics_for_columns(a.columns())?, mode),
    };
    let rope = match &args.rope {
        Some(text) => Rope::parse(text, a.width())?,
        None => Rope::uniform(a.width(), DEFAULT_ROPE_EPS)?,
    };
    let gaps = gap_distribution(&a, &b, &orient)?;
    let report = compare(&gaps, &rope)?;
    ensure_dir(&args.out)?;
    out.write(&args.out.join("report.json"), &io::render(&Report::Comparison(&report), Format::Json))?;
    out.write(&args.out.join("gaps.csv"), &io::render(&Report::Samples(&gaps), Format::Csv))
}

fn run_estimate_rho(args: &EstimateRhoArgs, out: &mut Outputs) -> Result<()> {
    let data = load_dataset(&args.data.dataset)?;
    let target: ClassifierSpec = args.classifier.parse()?;
    let reference: ClassifierSpec = args.reference_classifier.parse()?;
    let metric = metric_by_name(&args.metric)?;
    let group = reference_group(&data, args.data.reference_group.as_ref())?;
    let strategy: ReferenceRho = args.reference_rho.parse()?;
    let report = estimate_rho(&data, &target, &reference, args.k, args.m, &metric, &group, strategy, args.data.seed)?;
    let bytes = io::to_json(&report);
    if let Some(path) = &args.out {
        out.write(path, &bytes)?;
    }
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

fn run_hdr(args: &HdrArgs, out: &mut Outputs) -> Result<()> {
    if !(args.coverage > 0.0 && args.coverage < 1.0) {
        return Err(Error::config(format!("coverage {} must lie in (0, 1)", args.coverage)));
    }
    let mut samples = io::load_samples(&args.samples)?;
    if let Some(cols) = &args.columns {
        let names: Vec<&str> = cols.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        samples = samples.select(&names)?;
    }
    let resolution = args.resolution.unwrap_or_else(|| default_resolution(samples.width()));
    let region = fit_hdr(&samples, args.coverage, resolution)?;
    if region.degenerate {
        eprintln!("warning: degenerate samples on at least one axis; area reported as 0");
    }
    out.write(&args.out, &io::render(&Report::Hdr(&region), Format::Json))?;
    if let Some(mask) = &args.mask {
        out.write(mask, &io::render(&Report::Hdr(&region), Format::Csv))?;
    }
    Ok(())
}

fn run_coverage(args: &CoverageArgs, out: &mut Outputs) -> Result<()> {
    let data = load_dataset(&args.data.dataset)?;
    let target: ClassifierSpec = args.classifier.parse()?;
    let reference: ClassifierSpec = args.reference_classifier.parse()?;
    let metrics = parse_metric_list(&args.metrics)?;
    let group = reference_group(&data, args.data.reference_group.as_ref())?;
    let strategies = args
        .rho_strategy
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<CoverageStrategy>>>()?;
    let width = column_names(&metrics).len();
    let settings = CoverageSettings {
        k: args.k,
        repeats: args.repeats,
        half_splits: args.m,
        samples: args.samples,
        coverage: args.coverage,
        resolution: args.resolution.unwrap_or_else(|| default_resolution(width)),
        strategies,
        seed: args.data.seed,
    };
    let report = coverage_experiment(&data, &target, &reference, &metrics, &group, &settings)?;
    ensure_dir(&args.out)?;
    out.write(&args.out.join("coverage.json"), &io::to_json(&report))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_csv = |e: csv::Error| Error::input(format!("formatting coverage table: {e}"));
    w.write_record(["strategy", "rho", "area", "pct_res"]).map_err(to_csv)?;
    for row in &report.rows {
        w.write_record([
            row.strategy.clone(),
            io::format_real(row.rho),
            io::format_real(row.area),
            io::format_real(row.pct_res),
        ])
        .map_err(to_csv)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(format!("formatting coverage table: {e}")))?;
    out.write(&args.out.join("coverage.csv"), &bytes)
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let mut out = Outputs::default();
    let result = match &cli.command {
        Command::Posterior(a) => run_posterior(a, &mut out),
        Command::Compare(a) => run_compare(a, &mut out),
        Command::EstimateRho(a) => run_estimate_rho(a, &mut out),
        Command::Hdr(a) => run_hdr(a, &mut out),
        Command::Experiment(ExperimentCommand::Coverage(a)) => run_coverage(a, &mut out),
    };
    if result.is_err() {
        out.discard();
    }
    result
}

/// Process entry point; returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}
