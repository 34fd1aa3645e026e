//! File formats: prediction and confusion-matrix CSVs, the JSON run
//! configuration, and report export.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::comparison::ComparisonReport;
use crate::error::{Error, Result};
use crate::hdr::HdrRegion;
use crate::posterior::MarginalSummary;
use crate::types::{DirichletPrior, EvaluationInput, EvaluationSource, GroupConfusionMatrix, JointSampleMatrix};

/// Formats a real with at most 12 significant digits, without exponent.
pub fn format_real(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// Class labels as they appear in prediction files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMapping {
    pub positive: String,
    pub negative: String,
}

impl Default for LabelMapping {
    fn default() -> Self {
        LabelMapping { positive: "1".into(), negative: "0".into() }
    }
}

impl LabelMapping {
    fn parse(&self, raw: &str) -> Option<bool> {
        let raw = raw.trim();
        if raw == self.positive {
            Some(true)
        } else if raw == self.negative {
            Some(false)
        } else {
            None
        }
    }
}

/// Prior concentrations: one vector for every group, or one per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorConfig {
    Shared([f64; 4]),
    PerGroup(BTreeMap<String, [f64; 4]>),
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig::Shared([1.0; 4])
    }
}

impl PriorConfig {
    pub fn for_group(&self, group: &str) -> Result<DirichletPrior<f64>> {
        match self {
            PriorConfig::Shared(a) => DirichletPrior::new(*a),
            PriorConfig::PerGroup(map) => map
                .get(group)
                .ok_or_else(|| Error::config(format!("no prior configured for group `{group}`")))
                .and_then(|a| DirichletPrior::new(*a)),
        }
    }
}

/// Which correlation to use when the input is K-fold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoConfig {
    #[default]
    Fixed,
    Interval,
    /// A given correlation.
    Value {
        value: f64,
    },
    /// Transfer from a reference strategy with a known variance ratio.
    Relative {
        r_over: f64,
        reference: ReferenceRho,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceRho {
    Fixed,
    Interval,
}

impl std::str::FromStr for ReferenceRho {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(ReferenceRho::Fixed),
            "interval" => Ok(ReferenceRho::Interval),
            other => Err(Error::config(format!("unknown reference rho `{other}` (fixed|interval)"))),
        }
    }
}

fn default_samples() -> usize {
    crate::posterior::DEFAULT_SAMPLES
}

fn default_coverage() -> f64 {
    crate::hdr::DEFAULT_COVERAGE
}

/// Run configuration, read from JSON. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub labels: LabelMapping,
    /// Declared sensitive groups; rows with other groups are rejected.
    pub groups: Option<Vec<String>>,
    /// Reference group (group 0 in fairness differences). Defaults to the
    /// first declared group, else the lexicographically smallest label.
    pub reference_group: Option<String>,
    pub prior: PriorConfig,
    pub samples: usize,
    pub seed: u64,
    pub rope: Option<Vec<f64>>,
    pub rho: RhoConfig,
    pub metrics: Option<Vec<String>>,
    pub coverage: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            labels: LabelMapping::default(),
            groups: None,
            reference_group: None,
            prior: PriorConfig::default(),
            samples: default_samples(),
            seed: 0,
            rope: None,
            rho: RhoConfig::default(),
            metrics: None,
            coverage: default_coverage(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
    }

    /// Reference group for `input`, validated against its labels.
    pub fn reference_for(&self, labels: &[String]) -> Result<String> {
        let chosen = self
            .reference_group
            .clone()
            .or_else(|| self.groups.as_ref().and_then(|g| g.first().cloned()))
            .or_else(|| labels.iter().min().cloned())
            .ok_or_else(|| Error::input("input has no groups"))?;
        if !labels.contains(&chosen) {
            return Err(Error::config(format!("reference group `{chosen}` not present in input")));
        }
        Ok(chosen)
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

fn header_index(headers: &csv::StringRecord, path: &Path, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn { path: path.to_path_buf(), column: name.to_string() })
}

fn optional_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_fold(raw: &str, path: &Path, line: u64) -> Result<usize> {
    raw.parse::<usize>()
        .map_err(|_| Error::input(format!("{}:{line}: fold `{raw}` is not a nonnegative integer", path.display())))
}

fn check_contiguous(folds: &BTreeSet<usize>, path: &Path) -> Result<usize> {
    let k = folds.len();
    if folds.iter().copied().ne(0..k) {
        return Err(Error::NonContiguousFolds { path: path.to_path_buf(), found: folds.iter().copied().collect() });
    }
    Ok(k)
}

/// Counts per-(fold, group) confusion matrices from a prediction CSV with
/// columns `y_true, y_pred, group` and optional `fold`.
pub fn load_predictions(path: &Path, labels: &LabelMapping, groups: Option<&[String]>) -> Result<EvaluationInput<f64>> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|source| Error::Csv { path: path.to_path_buf(), source })?.clone();
    let i_true = header_index(&headers, path, "y_true")?;
    let i_pred = header_index(&headers, path, "y_pred")?;
    let i_group = header_index(&headers, path, "group")?;
    let i_fold = optional_index(&headers, "fold");

    let mut counts: BTreeMap<(usize, String), [f64; 4]> = BTreeMap::new();
    let mut seen_groups: BTreeSet<String> = BTreeSet::new();
    let mut folds: BTreeSet<usize> = BTreeSet::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
        let line = line_of(&record);
        let label = |i: usize| -> Result<bool> {
            let raw = &record[i];
            labels.parse(raw).ok_or_else(|| Error::UnknownLabel {
                path: path.to_path_buf(),
                line,
                label: raw.to_string(),
            })
        };
        let (y, yhat) = (label(i_true)?, label(i_pred)?);
        let group = record[i_group].to_string();
        if let Some(declared) = groups {
            if !declared.contains(&group) {
                return Err(Error::UnknownGroup { path: path.to_path_buf(), line, group });
            }
        }
        let fold = match i_fold {
            Some(i) => parse_fold(&record[i], path, line)?,
            None => 0,
        };
        let cell = match (y, yhat) {
            (true, true) => 0,
            (false, false) => 1,
            (false, true) => 2,
            (true, false) => 3,
        };
        counts.entry((fold, group.clone())).or_insert([0.0; 4])[cell] += 1.0;
        seen_groups.insert(group);
        folds.insert(fold);
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyFile { path: path.to_path_buf() });
    }
    let k = check_contiguous(&folds, path)?;
    let group_order: Vec<String> = match groups {
        Some(declared) => declared.iter().filter(|g| seen_groups.contains(*g)).cloned().collect(),
        None => seen_groups.into_iter().collect(),
    };
    let matrices = (0..k)
        .map(|fold| {
            group_order
                .iter()
                .map(|g| {
                    let c = counts.get(&(fold, g.clone())).copied().unwrap_or([0.0; 4]);
                    GroupConfusionMatrix::from_cells(g.clone(), c)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let source = if i_fold.is_some() { EvaluationSource::Kfold } else { EvaluationSource::HoldOut };
    EvaluationInput::new(matrices, source)
}

/// Reads a CSV with columns `group, tp, tn, fp, fn` and optional `fold`.
pub fn load_confusion_matrices(path: &Path) -> Result<EvaluationInput<f64>> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|source| Error::Csv { path: path.to_path_buf(), source })?.clone();
    let i_group = header_index(&headers, path, "group")?;
    let cell_idx =
        crate::types::CELL_NAMES.iter().map(|c| header_index(&headers, path, c)).collect::<Result<Vec<_>>>()?;
    let i_fold = optional_index(&headers, "fold");

    let mut by_fold: BTreeMap<usize, Vec<GroupConfusionMatrix<f64>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
        let line = line_of(&record);
        let group = record[i_group].to_string();
        let fold = match i_fold {
            Some(i) => parse_fold(&record[i], path, line)?,
            None => 0,
        };
        let mut cells = [0.0; 4];
        for (c, (&i, name)) in cells.iter_mut().zip(cell_idx.iter().zip(crate::types::CELL_NAMES)) {
            let raw = &record[i];
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::input(format!("{}:{line}: cell {name} `{raw}` is not a number", path.display())))?;
            if !v.is_finite() {
                return Err(Error::input(format!("{}:{line}: cell {name} is not finite", path.display())));
            }
            if v < 0.0 {
                return Err(Error::NegativeCell { path: path.to_path_buf(), line, cell: name.to_string(), value: v });
            }
            *c = v;
        }
        let fold_groups = by_fold.entry(fold).or_default();
        if fold_groups.iter().any(|g| g.group == group) {
            return Err(Error::DuplicateEntry { path: path.to_path_buf(), fold, group });
        }
        fold_groups.push(GroupConfusionMatrix::from_cells(group, cells)?);
    }
    if by_fold.is_empty() {
        return Err(Error::EmptyFile { path: path.to_path_buf() });
    }
    let folds: BTreeSet<usize> = by_fold.keys().copied().collect();
    check_contiguous(&folds, path)?;
    let source = if i_fold.is_some() { EvaluationSource::Kfold } else { EvaluationSource::HoldOut };
    EvaluationInput::new(by_fold.into_values().collect(), source)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

/// Reads a sample matrix written by [`samples_csv`]. `NaN` marks a flagged row.
pub fn load_samples(path: &Path) -> Result<JointSampleMatrix> {
    let mut rdr = open_csv(path)?;
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|source| Error::Csv { path: path.to_path_buf(), source })?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.is_empty() || columns.iter().any(|c| c.is_empty()) {
        return Err(Error::input(format!("{}: missing sample column names", path.display())));
    }
    let mut data = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
        for raw in record.iter() {
            let v: f64 = raw.parse().map_err(|_| {
                Error::input(format!("{}:{}: `{raw}` is not a number", path.display(), line_of(&record)))
            })?;
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(Error::EmptyFile { path: path.to_path_buf() });
    }
    JointSampleMatrix::from_flat(columns, data, None)
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so a
/// reader never sees a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp: PathBuf = {
        let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".partial");
        path.with_file_name(name)
    };
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(format!("writing {}", path.display()), e)
    })
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn samples_csv(samples: &JointSampleMatrix) -> Vec<u8> {
    csv_bytes(samples.columns(), samples.rows().map(|r| r.iter().map(|v| format_real(*v)).collect()))
}

/// CSV in the `load_confusion_matrices` schema.
pub fn evaluation_input_csv(input: &EvaluationInput<f64>) -> Vec<u8> {
    let kfold = input.source() == EvaluationSource::Kfold;
    let mut header: Vec<String> = Vec::new();
    if kfold {
        header.push("fold".into());
    }
    header.push("group".into());
    header.extend(crate::types::CELL_NAMES.iter().map(|s| s.to_string()));
    let rows = input.folds().iter().enumerate().flat_map(|(k, fold)| {
        fold.iter().map(move |cm| {
            let mut r = Vec::new();
            if kfold {
                r.push(k.to_string());
            }
            r.push(cm.group.clone());
            r.extend(cm.cells().iter().map(|v| format_real(*v)));
            r
        })
    });
    csv_bytes(&header, rows)
}

fn probability_table_csv(report: &ComparisonReport) -> Vec<u8> {
    let mut rows = vec![
        vec!["equivalent".to_string(), format_real(report.p_equivalent)],
        vec!["a_outperforms".to_string(), format_real(report.p_a_outperforms)],
        vec!["b_outperforms".to_string(), format_real(report.p_b_outperforms)],
    ];
    rows.extend(report.orthant_probs.iter().map(|(k, p)| vec![format!("cell:{k}"), format_real(*p)]));
    csv_bytes(&["event".to_string(), "probability".to_string()], rows.into_iter())
}

fn summaries_csv(summaries: &[MarginalSummary]) -> Vec<u8> {
    let header = ["metric", "mean", "sd", "level", "lower", "upper", "n_used", "n_flagged"].map(String::from);
    csv_bytes(
        &header,
        summaries.iter().map(|s| {
            vec![
                s.metric.clone(),
                format_real(s.mean),
                format_real(s.sd),
                format_real(s.level),
                format_real(s.lower),
                format_real(s.upper),
                s.n_used.to_string(),
                s.n_flagged.to_string(),
            ]
        }),
    )
}

/// Grid mask (2-D, one CSV row per node of the first column) or the
/// interval list (1-D).
pub fn hdr_csv(region: &HdrRegion) -> Vec<u8> {
    if region.dimension() == 1 {
        let rows = region.intervals().into_iter().map(|(a, b)| vec![format_real(a), format_real(b)]);
        return csv_bytes(&["lower".to_string(), "upper".to_string()], rows);
    }
    let res = region.resolution();
    let mask = region.mask();
    let header: Vec<String> = (0..res[1]).map(|j| format!("c{j}")).collect();
    let rows = mask.chunks(res[1].max(1)).map(|r| r.iter().map(|b| if *b { "1" } else { "0" }.to_string()).collect());
    csv_bytes(&header, rows)
}

/// Anything [`export_report`] can write.
pub enum Report<'a> {
    Comparison(&'a ComparisonReport),
    Summaries(&'a [MarginalSummary]),
    Hdr(&'a HdrRegion),
    Samples(&'a JointSampleMatrix),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
    bytes.push(b'\n');
    bytes
}

/// Serialized bytes of a report.
pub fn render(report: &Report<'_>, format: Format) -> Vec<u8> {
    match (report, format) {
        (Report::Comparison(r), Format::Json) => to_json(r),
        (Report::Comparison(r), Format::Csv) => probability_table_csv(r),
        (Report::Summaries(s), Format::Json) => to_json(s),
        (Report::Summaries(s), Format::Csv) => summaries_csv(s),
        (Report::Hdr(h), Format::Json) => to_json(&h.export()),
        (Report::Hdr(h), Format::Csv) => hdr_csv(h),
        (Report::Samples(m), Format::Csv) => samples_csv(m),
        (Report::Samples(m), Format::Json) => {
            let rows: Vec<&[f64]> = m.rows().collect();
            to_json(&serde_json::json!({ "columns": m.columns(), "seed": m.seed(), "rows": rows }))
        }
    }
}

pub fn export_report(report: &Report<'_>, path: &Path, format: Format) -> Result<()> {
    write_atomic(path, &render(report, format))
}
