//! CSV ingest, train/test splits and report serialization.
//!
//! File formats:
//!
//! * wide curves: header `id,t1,...,tT`, one row per sample (the `id` column
//!   may be omitted, in which case the header is the grid alone);
//! * long curves: header `id,t,value`, pivoted onto the sorted set of `t`;
//! * response: header `id,y`, or a single `y` column matched by row order.
//!
//! Numbers are written with 17 significant digits, so values survive a
//! save/load cycle bit for bit. Missing cells are rejected.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::FunctionalDataset;
use crate::error::{Error, Result};
use crate::estimators::{Method, PenaltyParams};
use crate::risk::RiskRow;
use crate::selection::{DegeneracyReport, PlugIn, Stage, TraceRecord};

/// Full-precision decimal representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Wide,
    Long,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wide" => Ok(Layout::Wide),
            "long" => Ok(Layout::Long),
            other => Err(Error::InvalidParam(format!("unknown layout {other:?}"))),
        }
    }
}

/// Curves of one predictor before they are joined with a response.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub grid: Vec<f64>,
    pub values: DMatrix<f64>,
    pub labels: Option<Vec<String>>,
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = reader(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "file is empty".into(),
        });
    }
    Ok(out)
}

/// `row` and `col` are 1-based positions in the file, header included.
fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    if cell.is_empty() {
        return Err(Error::Parse {
            row,
            col,
            msg: "missing value".into(),
        });
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(Error::Parse {
            row,
            col,
            msg: format!("non-finite value {v}"),
        }),
        Err(_) => Err(Error::Parse {
            row,
            col,
            msg: format!("not a number: {cell:?}"),
        }),
    }
}

pub fn read_wide(path: &Path) -> Result<CurveTable> {
    let recs = records(path)?;
    let header = &recs[0];
    let has_id = header.get(0).is_some_and(|c| c.parse::<f64>().is_err());
    let skip = usize::from(has_id);
    let grid = header
        .iter()
        .enumerate()
        .skip(skip)
        .map(|(j, c)| parse_cell(c, 1, j + 1))
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        return Err(Error::GridMismatch(format!("{}: header has no grid points", path.display())));
    }
    let n = recs.len() - 1;
    let mut values = DMatrix::zeros(n, grid.len());
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in recs[1..].iter().enumerate() {
        if rec.len() != grid.len() + skip {
            return Err(Error::GridMismatch(format!(
                "{}: row {} has {} cells, expected {}",
                path.display(),
                i + 2,
                rec.len(),
                grid.len() + skip
            )));
        }
        if has_id {
            labels.push(rec[0].to_string());
        }
        for j in 0..grid.len() {
            values[(i, j)] = parse_cell(&rec[j + skip], i + 2, j + skip + 1)?;
        }
    }
    Ok(CurveTable {
        grid,
        values,
        labels: has_id.then_some(labels),
    })
}

pub fn read_long(path: &Path) -> Result<CurveTable> {
    let recs = records(path)?;
    let mut ids: Vec<String> = Vec::new();
    let mut id_pos: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<(usize, f64, f64)> = Vec::new();
    for (i, rec) in recs[1..].iter().enumerate() {
        let row = i + 2;
        if rec.len() != 3 {
            return Err(Error::GridMismatch(format!(
                "{}: row {row} has {} cells, expected 3",
                path.display(),
                rec.len()
            )));
        }
        let id = rec[0].to_string();
        let pos = *id_pos.entry(id.clone()).or_insert_with(|| {
            ids.push(id);
            ids.len() - 1
        });
        cells.push((pos, parse_cell(&rec[1], row, 2)?, parse_cell(&rec[2], row, 3)?));
    }
    let mut grid: Vec<f64> = cells.iter().map(|c| c.1).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut values = DMatrix::from_element(ids.len(), grid.len(), f64::NAN);
    for (pos, t, v) in cells {
        let j = grid.binary_search_by(|g| g.total_cmp(&t)).expect("grid built from cells");
        if !values[(pos, j)].is_nan() {
            return Err(Error::GridMismatch(format!(
                "{}: sample {:?} has more than one value at t = {t}",
                path.display(),
                ids[pos]
            )));
        }
        values[(pos, j)] = v;
    }
    if let Some(i) = (0..ids.len()).find(|&i| values.row(i).iter().any(|v| v.is_nan())) {
        return Err(Error::GridMismatch(format!(
            "{}: sample {:?} is not observed on the full grid",
            path.display(),
            ids[i]
        )));
    }
    Ok(CurveTable {
        grid,
        values,
        labels: Some(ids),
    })
}

pub fn read_curves(path: &Path, layout: Layout) -> Result<CurveTable> {
    match layout {
        Layout::Wide => read_wide(path),
        Layout::Long => read_long(path),
    }
}

/// Response values with optional sample ids.
pub fn read_response(path: &Path) -> Result<(Option<Vec<String>>, DVector<f64>)> {
    let recs = records(path)?;
    let width = recs[0].len();
    if !(width == 1 || width == 2) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("response file needs 1 or 2 columns, found {width}"),
        });
    }
    let mut ids = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in recs[1..].iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("row {} has {} cells, expected {width}", i + 2, rec.len()),
            });
        }
        if width == 2 {
            ids.push(rec[0].to_string());
        }
        y.push(parse_cell(&rec[width - 1], i + 2, width)?);
    }
    Ok(((width == 2).then_some(ids), DVector::from_vec(y)))
}

fn join_response(labels: Option<&[String]>, ids: Option<Vec<String>>, y: DVector<f64>) -> Result<DVector<f64>> {
    match (labels, ids) {
        (Some(labels), Some(ids)) => {
            let mut by_id: HashMap<&str, f64> = HashMap::new();
            for (id, v) in ids.iter().zip(y.iter()) {
                if by_id.insert(id.as_str(), *v).is_some() {
                    return Err(Error::Join(format!("duplicate response id {id:?}")));
                }
            }
            let out = labels
                .iter()
                .map(|l| {
                    by_id
                        .get(l.as_str())
                        .copied()
                        .ok_or_else(|| Error::Join(format!("no response for sample {l:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if ids.len() != labels.len() {
                return Err(Error::Join(format!(
                    "{} responses for {} samples",
                    ids.len(),
                    labels.len()
                )));
            }
            Ok(DVector::from_vec(out))
        }
        (labels, _) => {
            let n = labels.map_or(usize::MAX, <[String]>::len);
            if labels.is_some() && y.len() != n {
                return Err(Error::Join(format!("{} responses for {n} samples", y.len())));
            }
            Ok(y)
        }
    }
}

/// Dataset with one predictor per curve file, all on the same grid and with
/// the same samples in the same order.
pub fn load_predictors(curves: &[PathBuf], response: &Path, layout: Layout) -> Result<FunctionalDataset> {
    let Some((first, rest)) = curves.split_first() else {
        return Err(Error::InvalidParam("no curve file given".into()));
    };
    let head = read_curves(first, layout)?;
    let mut mats = vec![head.values];
    for path in rest {
        let t = read_curves(path, layout)?;
        if t.grid != head.grid {
            return Err(Error::GridMismatch(format!("{} uses a different grid", path.display())));
        }
        if t.labels != head.labels || t.values.nrows() != mats[0].nrows() {
            return Err(Error::Join(format!("{} lists different samples", path.display())));
        }
        mats.push(t.values);
    }
    let (ids, y) = read_response(response)?;
    if head.labels.is_none() && y.len() != mats[0].nrows() {
        return Err(Error::Join(format!(
            "{} responses for {} samples",
            y.len(),
            mats[0].nrows()
        )));
    }
    let y = join_response(head.labels.as_deref(), ids, y)?;
    FunctionalDataset::new(head.grid, mats, y, head.labels)
}

pub fn load_dataset(curves: &Path, response: &Path, layout: Layout) -> Result<FunctionalDataset> {
    load_predictors(&[curves.to_path_buf()], response, layout)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(header).map_err(&e)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(&e)?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

pub fn write_wide(path: &Path, grid: &[f64], values: &DMatrix<f64>, labels: Option<&[String]>) -> Result<()> {
    let mut header: Vec<String> = Vec::new();
    if labels.is_some() {
        header.push("id".into());
    }
    header.extend(grid.iter().map(|&t| fmt_f64(t)));
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..values.nrows()).map(|i| {
        let mut row: Vec<String> = Vec::new();
        if let Some(l) = labels {
            row.push(l[i].clone());
        }
        row.extend(values.row(i).iter().map(|&v| fmt_f64(v)));
        row
    });
    write_rows(path, &header_ref, rows)
}

pub fn write_long(path: &Path, grid: &[f64], values: &DMatrix<f64>, labels: &[String]) -> Result<()> {
    let rows = (0..values.nrows()).flat_map(|i| {
        grid.iter()
            .enumerate()
            .map(move |(j, &t)| vec![labels[i].clone(), fmt_f64(t), fmt_f64(values[(i, j)])])
    });
    write_rows(path, &["id", "t", "value"], rows)
}

pub fn write_response(path: &Path, y: &DVector<f64>, labels: Option<&[String]>) -> Result<()> {
    match labels {
        Some(l) => write_rows(
            path,
            &["id", "y"],
            l.iter().zip(y.iter()).map(|(id, v)| vec![id.clone(), fmt_f64(*v)]),
        ),
        None => write_rows(path, &["y"], y.iter().map(|v| vec![fmt_f64(*v)])),
    }
}

/// Write predictor `j` to `curves[j]` (wide layout) and the response.
pub fn save_dataset(data: &FunctionalDataset, curves: &[PathBuf], response: &Path) -> Result<()> {
    if curves.len() != data.n_predictors() {
        return Err(Error::Dimension {
            expected: data.n_predictors(),
            found: curves.len(),
        });
    }
    for (path, values) in curves.iter().zip(data.curves()) {
        write_wide(path, data.grid(), values, data.labels())?;
    }
    write_response(response, data.response(), data.labels())
}

/// Training fraction or explicit row lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    Fraction(f64),
    Indices { train: Vec<usize>, test: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub rule: SplitRule,
    pub seed: u64,
    pub shuffle: bool,
}

impl SplitSpec {
    pub fn fraction(train: f64, seed: u64) -> Self {
        Self {
            rule: SplitRule::Fraction(train),
            seed,
            shuffle: true,
        }
    }
}

/// Row indices of a split, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    let (mut train, mut test) = match &spec.rule {
        SplitRule::Fraction(f) => {
            if !(*f > 0.0 && *f < 1.0) {
                return Err(Error::InvalidSplit(format!("train fraction must lie in (0, 1), got {f}")));
            }
            let n_train = (f * n as f64).round() as usize;
            let mut order: Vec<usize> = (0..n).collect();
            if spec.shuffle {
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
            }
            let test = order.split_off(n_train.min(n));
            (order, test)
        }
        SplitRule::Indices { train, test } => {
            let mut seen = vec![false; n];
            for &i in train.iter().chain(test) {
                if i >= n {
                    return Err(Error::InvalidSplit(format!("index {i} out of range for n = {n}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidSplit(format!("index {i} listed twice")));
                }
            }
            (train.clone(), test.clone())
        }
    };
    if train.len() < 2 {
        return Err(Error::InvalidSplit(format!("training set has {} rows, need 2", train.len())));
    }
    if test.is_empty() {
        return Err(Error::InvalidSplit("test set is empty".into()));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn split(data: &FunctionalDataset, spec: &SplitSpec) -> Result<(FunctionalDataset, FunctionalDataset)> {
    let idx = split_indices(data.n(), spec)?;
    Ok((data.subset(&idx.train), data.subset(&idx.test)))
}

/// Coefficient function of one predictor sampled on an output grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// Everything reported about one fitted estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub params: PenaltyParams,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub criterion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gcv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub press: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    /// Mean squared residual on the training rows.
    pub train_loss: f64,
    /// Mean squared prediction error on the test rows.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_loss: Option<f64>,
    pub trace_h: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cond_full: Option<f64>,
    pub cond_train: f64,
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub plug_in: Option<PlugIn>,
    /// Intercept first.
    #[serde(skip)]
    pub coef: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub beta: Vec<BetaCurve>,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
    #[serde(skip)]
    pub risk: Vec<RiskRow>,
}

fn companion(dir: &Path, stem: &str, what: &str) -> PathBuf {
    dir.join(format!("{stem}_{what}.csv"))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `stem.toml` plus companion CSVs `stem_coef.csv`, `stem_beta.csv`,
/// `stem_residuals.csv` and, when present, `stem_trace.csv` and
/// `stem_risk.csv`. Returns the written paths.
pub fn export_report(report: &FitReport, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let main = dir.join(format!("{stem}.toml"));
    write_toml(&main, report)?;
    written.push(main);

    let path = companion(dir, stem, "coef");
    write_rows(
        &path,
        &["index", "coef"],
        report.coef.iter().enumerate().map(|(i, v)| vec![i.to_string(), fmt_f64(*v)]),
    )?;
    written.push(path);

    let path = companion(dir, stem, "beta");
    let rows = report.beta.iter().enumerate().flat_map(|(j, b)| {
        b.grid
            .iter()
            .zip(&b.values)
            .map(move |(t, v)| vec![j.to_string(), fmt_f64(*t), fmt_f64(*v)])
    });
    write_rows(&path, &["predictor", "t", "beta"], rows)?;
    written.push(path);

    let path = companion(dir, stem, "residuals");
    write_rows(
        &path,
        &["index", "residual"],
        report.residuals.iter().enumerate().map(|(i, v)| vec![i.to_string(), fmt_f64(*v)]),
    )?;
    written.push(path);

    if !report.trace.is_empty() {
        let path = companion(dir, stem, "trace");
        write_trace(&path, &report.trace)?;
        written.push(path);
    }
    if !report.risk.is_empty() {
        let path = companion(dir, stem, "risk");
        write_risk(&path, &report.risk)?;
        written.push(path);
    }
    Ok(written)
}

fn stage_name(s: Stage) -> &'static str {
    match s {
        Stage::Grid => "grid",
        Stage::Refine => "refine",
        Stage::Probe => "probe",
    }
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    write_rows(
        path,
        &["iteration", "stage", "lambda", "d", "alpha", "score"],
        trace.iter().map(|t| {
            vec![
                t.iteration.to_string(),
                stage_name(t.stage).to_string(),
                opt(t.lambda),
                opt(t.d),
                opt(t.alpha),
                fmt_f64(t.score),
            ]
        }),
    )
}

pub fn write_risk(path: &Path, rows: &[RiskRow]) -> Result<()> {
    write_rows(
        path,
        &["d", "g_closed_form", "g_mc", "mc_stderr"],
        rows.iter()
            .map(|r| vec![fmt_f64(r.d), fmt_f64(r.g), fmt_f64(r.mc), fmt_f64(r.mc_stderr)]),
    )
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `d, gcv, press`; undefined criteria are left empty.
pub fn write_degeneracy(path: &Path, report: &DegeneracyReport) -> Result<()> {
    let cell = |v: f64| if v.is_finite() { fmt_f64(v) } else { String::new() };
    write_rows(
        path,
        &["d", "gcv", "press"],
        (0..report.d_grid.len()).map(|i| vec![fmt_f64(report.d_grid[i]), cell(report.gcv[i]), cell(report.press[i])]),
    )
}

/// One row per report: parameters, criteria and losses.
pub fn write_summary(path: &Path, reports: &[FitReport]) -> Result<()> {
    write_rows(
        path,
        &[
            "method", "lambda", "d", "alpha", "gcv", "press", "train_loss", "test_loss", "trace_h", "degenerate",
        ],
        reports.iter().map(|r| {
            vec![
                r.method.to_string(),
                opt(r.params.lambda),
                opt(r.params.d),
                opt(r.params.alpha),
                opt(r.gcv),
                opt(r.press),
                fmt_f64(r.train_loss),
                opt(r.test_loss),
                fmt_f64(r.trace_h),
                r.degenerate.to_string(),
            ]
        }),
    )
}

/// Rows of a headed numeric CSV as column name -> values. Empty cells
/// become `None`.
type Columns = BTreeMap<String, Vec<Option<String>>>;

fn read_columns(path: &Path) -> Result<Columns> {
    let recs = records(path)?;
    let header: Vec<String> = recs[0].iter().map(str::to_string).collect();
    let mut cols: Columns = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for (i, rec) in recs[1..].iter().enumerate() {
        if rec.len() != header.len() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("row {} has {} cells, expected {}", i + 2, rec.len(), header.len()),
            });
        }
        for (h, cell) in header.iter().zip(rec.iter()) {
            let v = (!cell.is_empty()).then(|| cell.to_string());
            cols.get_mut(h).expect("header key").push(v);
        }
    }
    Ok(cols)
}

fn numeric(path: &Path, cols: &Columns, name: &str) -> Result<Vec<f64>> {
    let col = cols.get(name).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        msg: format!("missing column {name:?}"),
    })?;
    let j = cols.keys().position(|k| k == name).unwrap_or(0) + 1;
    col.iter()
        .enumerate()
        .map(|(i, c)| parse_cell(c.as_deref().unwrap_or(""), i + 2, j))
        .collect()
}

fn optional(path: &Path, cols: &Columns, name: &str) -> Result<Vec<Option<f64>>> {
    let col = cols.get(name).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        msg: format!("missing column {name:?}"),
    })?;
    col.iter()
        .enumerate()
        .map(|(i, c)| c.as_deref().map(|s| parse_cell(s, i + 2, 0)).transpose())
        .collect()
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let cols = read_columns(path)?;
    let iteration = numeric(path, &cols, "iteration")?;
    let stage = cols.get("stage").cloned().unwrap_or_default();
    let (lambda, d, alpha) = (
        optional(path, &cols, "lambda")?,
        optional(path, &cols, "d")?,
        optional(path, &cols, "alpha")?,
    );
    let score = numeric(path, &cols, "score")?;
    (0..score.len())
        .map(|i| {
            let stage = match stage.get(i).cloned().flatten().as_deref() {
                Some("grid") => Stage::Grid,
                Some("refine") => Stage::Refine,
                Some("probe") => Stage::Probe,
                other => {
                    return Err(Error::Format {
                        path: path.to_path_buf(),
                        msg: format!("unknown stage {other:?}"),
                    })
                }
            };
            Ok(TraceRecord {
                iteration: iteration[i] as usize,
                stage,
                lambda: lambda[i],
                d: d[i],
                alpha: alpha[i],
                score: score[i],
            })
        })
        .collect()
}

pub fn read_risk(path: &Path) -> Result<Vec<RiskRow>> {
    let cols = read_columns(path)?;
    let d = numeric(path, &cols, "d")?;
    let g = numeric(path, &cols, "g_closed_form")?;
    let mc = numeric(path, &cols, "g_mc")?;
    let se = numeric(path, &cols, "mc_stderr")?;
    Ok((0..d.len())
        .map(|i| RiskRow {
            d: d[i],
            g: g[i],
            mc: mc[i],
            mc_stderr: se[i],
        })
        .collect())
}

pub fn load_report(dir: &Path, stem: &str) -> Result<FitReport> {
    let main = dir.join(format!("{stem}.toml"));
    let text = fs::read_to_string(&main).map_err(|e| Error::io(&main, e))?;
    let mut report: FitReport = toml::from_str(&text).map_err(|e| Error::Format {
        path: main.clone(),
        msg: e.to_string(),
    })?;

    let path = companion(dir, stem, "coef");
    report.coef = numeric(&path, &read_columns(&path)?, "coef")?;

    let path = companion(dir, stem, "residuals");
    report.residuals = numeric(&path, &read_columns(&path)?, "residual")?;

    let path = companion(dir, stem, "beta");
    let cols = read_columns(&path)?;
    let pred = numeric(&path, &cols, "predictor")?;
    let t = numeric(&path, &cols, "t")?;
    let v = numeric(&path, &cols, "beta")?;
    let mut beta: Vec<BetaCurve> = Vec::new();
    for i in 0..pred.len() {
        let j = pred[i] as usize;
        while beta.len() <= j {
            beta.push(BetaCurve {
                grid: Vec::new(),
                values: Vec::new(),
            });
        }
        beta[j].grid.push(t[i]);
        beta[j].values.push(v[i]);
    }
    report.beta = beta;

    let path = companion(dir, stem, "trace");
    if path.exists() {
        report.trace = read_trace(&path)?;
    }
    let path = companion(dir, stem, "risk");
    if path.exists() {
        report.risk = read_risk(&path)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FunctionalDataset {
        let curves = DMatrix::from_row_slice(2, 3, &[0.1, -2.5, 1.0 / 3.0, 4.0e-12, 7.25, -0.0]);
        FunctionalDataset::new(
            vec![0.0, 0.5, 1.0],
            vec![curves],
            DVector::from_vec(vec![std::f64::consts::PI, -1e300]),
            Some(vec!["a b".into(), "c,\"d\"".into()]),
        )
        .unwrap()
    }

    #[test]
    fn wide_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy();
        let c = dir.path().join("c.csv");
        let r = dir.path().join("r.csv");
        save_dataset(&data, &[c.clone()], &r).unwrap();
        let back = load_dataset(&c, &r, Layout::Wide).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn long_matches_wide() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy();
        let w = dir.path().join("w.csv");
        let l = dir.path().join("l.csv");
        let r = dir.path().join("r.csv");
        save_dataset(&data, &[w.clone()], &r).unwrap();
        write_long(&l, data.grid(), &data.curves()[0], data.labels().unwrap()).unwrap();
        assert_eq!(load_dataset(&l, &r, Layout::Long).unwrap(), load_dataset(&w, &r, Layout::Wide).unwrap());
    }

    #[test]
    fn responses_joined_by_label() {
        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("c.csv");
        let r = dir.path().join("r.csv");
        fs::write(&c, "id,1,2\nx,1,2\ny,3,4\n").unwrap();
        fs::write(&r, "id,y\ny,20\nx,10\n").unwrap();
        let d = load_dataset(&c, &r, Layout::Wide).unwrap();
        assert_eq!(d.response().as_slice(), &[10.0, 20.0]);

        fs::write(&r, "id,y\nx,10\nz,20\n").unwrap();
        assert!(matches!(load_dataset(&c, &r, Layout::Wide), Err(Error::Join(_))));

        fs::write(&r, "y\n10\n20\n").unwrap();
        assert_eq!(load_dataset(&c, &r, Layout::Wide).unwrap().response().as_slice(), &[10.0, 20.0]);
        fs::write(&r, "y\n10\n").unwrap();
        assert!(matches!(load_dataset(&c, &r, Layout::Wide), Err(Error::Join(_))));
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("c.csv");
        let r = dir.path().join("r.csv");
        fs::write(&r, "y\n1\n2\n").unwrap();

        fs::write(&c, "id,1,2\nx,1,2\ny,3\n").unwrap();
        assert!(matches!(load_dataset(&c, &r, Layout::Wide), Err(Error::GridMismatch(_))));

        fs::write(&c, "id,1,2\nx,1,2\ny,3,abc\n").unwrap();
        assert!(matches!(
            load_dataset(&c, &r, Layout::Wide),
            Err(Error::Parse { row: 3, col: 3, .. })
        ));

        fs::write(&c, "id,1,2\nx,1,\ny,3,4\n").unwrap();
        assert!(matches!(load_dataset(&c, &r, Layout::Wide), Err(Error::Parse { row: 2, col: 3, .. })));

        fs::write(&c, "id,t,value\nx,1,1\nx,2,2\ny,1,3\n").unwrap();
        assert!(matches!(load_dataset(&c, &r, Layout::Long), Err(Error::GridMismatch(_))));

        assert!(matches!(
            load_dataset(&dir.path().join("missing.csv"), &r, Layout::Wide),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn split_contract() {
        let spec = SplitSpec::fraction(24.0 / 35.0, 7);
        let a = split_indices(35, &spec).unwrap();
        let b = split_indices(35, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.test.len()), (24, 11));
        let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..35).collect::<Vec<_>>());
        assert!(a.train.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, split_indices(35, &SplitSpec::fraction(24.0 / 35.0, 8)).unwrap());

        let explicit = SplitSpec {
            rule: SplitRule::Indices { train: vec![3, 0, 1], test: vec![2] },
            seed: 0,
            shuffle: false,
        };
        let s = split_indices(5, &explicit).unwrap();
        assert_eq!(s.train, vec![0, 1, 3]);
        let bad = SplitSpec {
            rule: SplitRule::Indices { train: vec![0, 1], test: vec![1] },
            seed: 0,
            shuffle: false,
        };
        assert!(matches!(split_indices(5, &bad), Err(Error::InvalidSplit(_))));
        assert!(matches!(split_indices(5, &SplitSpec::fraction(1.0, 0)), Err(Error::InvalidSplit(_))));
        assert!(matches!(split_indices(2, &SplitSpec::fraction(0.5, 0)), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let report = FitReport {
            method: Method::Ols,
            params: PenaltyParams::default(),
            criterion: None,
            gcv: Some(0.1 + 0.2),
            press: None,
            n_train: 24,
            n_test: 11,
            train_loss: 1.0 / 3.0,
            test_loss: Some(2.0f64.sqrt()),
            trace_h: 12.0,
            cond_full: Some(3090.5),
            cond_train: 3387.25,
            degenerate: false,
            plug_in: None,
            coef: vec![1.0, -1.0 / 7.0],
            residuals: vec![1e-300, -5.5],
            beta: vec![BetaCurve { grid: vec![0.0, 0.1], values: vec![std::f64::consts::E, 1.0 / 9.0] }],
            trace: vec![TraceRecord { iteration: 0, stage: Stage::Grid, lambda: Some(1e-6), d: None, alpha: Some(0.25), score: 0.013 }],
            risk: vec![RiskRow { d: 0.5, g: 1.0 / 3.0, mc: 0.33, mc_stderr: 1e-3 }],
        };
        export_report(&report, dir.path(), "ols").unwrap();
        let text = fs::read_to_string(dir.path().join("ols.toml")).unwrap();
        assert!(!text.contains("lambda") && !text.contains("alpha"));
        assert_eq!(load_report(dir.path(), "ols").unwrap(), report);
    }
}
