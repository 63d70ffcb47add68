//! File formats: delimited-text time series, JSON model and report
//! documents, and two-column frequency-response dumps.
//!
//! A model document looks like
//!
//! ```json
//! {
//!   "kind": "innovations_model",
//!   "n_x": 2,
//!   "n_y": 2,
//!   "A": { "rows": 2, "cols": 2, "data": [[0.58, 0.23], [-0.39, 0.82]] },
//!   "K": { ... }, "Q": { ... }, "C": { ... }
//! }
//! ```
//!
//! Matrices are stored row by row. Numbers are written in the shortest form
//! that parses back to the same `f64`, so a write/read cycle is lossless.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::InnovationsModel;
use crate::sysid::TimeSeries;

pub const MODEL_KIND: &str = "innovations_model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl MatrixDoc {
    pub fn from_mat(m: &Mat) -> Self {
        MatrixDoc {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect(),
        }
    }

    pub fn to_mat(&self, name: &str) -> Result<Mat> {
        if self.data.len() != self.rows || self.data.iter().any(|r| r.len() != self.cols) {
            return Err(Error::DimensionMismatch(format!(
                "matrix {name} declares {}x{} but stores a different shape",
                self.rows, self.cols
            )));
        }
        Ok(Mat::from_fn(self.rows, self.cols, |i, j| self.data[i][j]))
    }
}

/// Identification diagnostics stored next to an identified model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationInfo {
    pub samples: usize,
    pub hankel_depth: usize,
    pub singular_values: Vec<f64>,
    pub stabilized: bool,
    pub stabilization_shift: f64,
    pub repaired: bool,
    /// `(‖D̂ − D̃‖_F, ‖R̂0 − R̃0‖_F)` when repair fired.
    pub repair_adjustment: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub kind: String,
    pub n_x: usize,
    pub n_y: usize,
    #[serde(rename = "A")]
    pub a: MatrixDoc,
    #[serde(rename = "K")]
    pub k: MatrixDoc,
    #[serde(rename = "Q")]
    pub q: MatrixDoc,
    #[serde(rename = "C")]
    pub c: MatrixDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identification: Option<IdentificationInfo>,
}

impl ModelDoc {
    pub fn new(model: &InnovationsModel, identification: Option<IdentificationInfo>) -> Self {
        ModelDoc {
            kind: MODEL_KIND.into(),
            n_x: model.n_x(),
            n_y: model.n_y(),
            a: MatrixDoc::from_mat(&model.a),
            k: MatrixDoc::from_mat(&model.k),
            q: MatrixDoc::from_mat(&model.q),
            c: MatrixDoc::from_mat(&model.c),
            identification,
        }
    }

    pub fn model(&self) -> Result<InnovationsModel> {
        if self.kind != MODEL_KIND {
            return Err(Error::InvalidArgument(format!(
                "expected a document of kind {MODEL_KIND}, found {}",
                self.kind
            )));
        }
        let a = self.a.to_mat("A")?;
        let k = self.k.to_mat("K")?;
        let q = self.q.to_mat("Q")?;
        let c = self.c.to_mat("C")?;
        if a.nrows() != self.n_x || c.nrows() != self.n_y {
            return Err(Error::DimensionMismatch(format!(
                "declared n_x = {}, n_y = {} but A is {}x{} and C is {}x{}",
                self.n_x,
                self.n_y,
                a.nrows(),
                a.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        InnovationsModel::new(a, k, q, c)
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Maps a serde_json error to a parse error at its line and column.
fn json_err(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(json_err)
}

pub fn model_to_json(model: &InnovationsModel) -> String {
    serde_json::to_string_pretty(&ModelDoc::new(model, None)).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<InnovationsModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(json_err)?;
    doc.model()
}

pub fn write_model(
    path: impl AsRef<Path>,
    model: &InnovationsModel,
    identification: Option<IdentificationInfo>,
) -> Result<()> {
    write_json(path, &ModelDoc::new(model, identification))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<InnovationsModel> {
    read_json::<ModelDoc>(path)?.model()
}

/// Parses comma-separated samples, one row per time step. A first row that
/// is entirely non-numeric is taken as a header; `#` starts a comment line.
pub fn parse_timeseries(text: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Parse {
                line,
                column: 1,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
        if idx == 0 && rec.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(rec.len());
        for (j, field) in rec.iter().enumerate() {
            let v = field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                column: j + 1,
                message: format!("'{field}' is not a number"),
            })?;
            row.push(v);
        }
        let w = *width.get_or_insert(row.len());
        if row.len() != w {
            return Err(Error::Parse {
                line,
                column: w.min(row.len()) + 1,
                message: format!("expected {w} fields, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    let w = width.unwrap_or(0);
    if rows.is_empty() || w == 0 {
        return Err(Error::InsufficientData("time series file has no samples".into()));
    }
    TimeSeries::new(Mat::from_fn(rows.len(), w, |i, j| rows[i][j]))
}

pub fn read_timeseries(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_timeseries(&text)
}

/// Writes one row per sample with a `y1,y2,…` header.
pub fn write_timeseries(path: impl AsRef<Path>, ts: &TimeSeries) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let header: Vec<String> = (1..=ts.n_y()).map(|j| format!("y{j}")).collect();
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for i in 0..ts.len() {
        let row: Vec<String> = ts.data.row(i).iter().map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Two whitespace-separated columns `ω value`, one line per point.
pub fn write_frequency_response(path: impl AsRef<Path>, points: &[(f64, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    for (w, v) in points {
        writeln!(f, "{w} {v}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
