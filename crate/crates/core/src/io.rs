//! Text file formats for prediction logs, models and datasets.
//!
//! All three share one layout: a magic line with a format version, `key=value`
//! header lines, a `---` separator, then one record per line. Lines starting
//! with `#` are comments. Floats are written in Rust's shortest round-trip
//! notation, so write-then-read is bit-exact.
//!
//! ```text
//! lvr-prediction-log 1
//! num_samples=2
//! num_passes=3
//! num_classes=3
//! source=dropout
//! master_seed=7
//! has_truth=true
//! ---
//! 1 1 2 ; 1
//! 0 0 0 ; 0
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::EstimationResult;
use crate::lvr::LabelMatrix;
use crate::nn::MlpModel;

pub const PREDICTION_LOG_MAGIC: &str = "lvr-prediction-log";
pub const MODEL_MAGIC: &str = "lvr-mlp-model";
pub const DATASET_MAGIC: &str = "lvr-dataset";
pub const FORMAT_VERSION: u32 = 1;

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

struct Parsed<'a> {
    header: BTreeMap<&'a str, (usize, &'a str)>,
    /// `(1-based line number, content)`
    body: Vec<(usize, &'a str)>,
}

fn split_document<'a>(text: &'a str, magic: &str) -> Result<Parsed<'a>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.starts_with('#'));
    let (n, first) = lines
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| Error::parse(1, "magic", "empty file"))?;
    let mut parts = first.split_whitespace();
    if parts.next() != Some(magic) {
        return Err(Error::parse(n, "magic", format!("expected `{magic}`")));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(n, "version", "missing or malformed format version"))?;
    if version != FORMAT_VERSION {
        return Err(Error::parse(n, "version", format!("unsupported version {version}")));
    }
    let mut header = BTreeMap::new();
    let mut separated = false;
    for (n, line) in lines.by_ref() {
        if line == "---" {
            separated = true;
            break;
        }
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(n, "header", "expected key=value"))?;
        if header.insert(k.trim(), (n, v.trim())).is_some() {
            return Err(Error::parse(n, k.trim(), "duplicate header key"));
        }
    }
    if !separated {
        return Err(Error::parse(text.lines().count(), "---", "missing header separator"));
    }
    let body = lines.filter(|(_, l)| !l.is_empty()).collect();
    Ok(Parsed { header, body })
}

impl Parsed<'_> {
    fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let (n, v) = self
            .header
            .get(key)
            .ok_or_else(|| Error::parse(1, key, "missing header field"))?;
        v.parse()
            .map_err(|_| Error::parse(*n, key, format!("cannot parse `{v}`")))
    }

    fn expect_rows(&self, expected: usize, what: &str) -> Result<()> {
        if self.body.len() != expected {
            let line = self.body.last().map_or(1, |(n, _)| *n);
            return Err(Error::parse(
                line,
                what,
                format!("header declares {expected} rows, found {}", self.body.len()),
            ));
        }
        Ok(())
    }
}

fn parse_values<T: FromStr>(line: usize, field: &str, text: &str, expected: usize) -> Result<Vec<T>> {
    let vals: Vec<T> = text
        .split_whitespace()
        .enumerate()
        .map(|(i, t)| {
            t.parse()
                .map_err(|_| Error::parse(line, format!("{field}[{i}]"), format!("cannot parse `{t}`")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(Error::parse(
            line,
            field,
            format!("expected {expected} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

fn join_floats(out: &mut String, vals: &[f64]) {
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:?}").unwrap();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionSource {
    Dropout,
    Mutants,
}

impl std::fmt::Display for PredictionSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dropout => "dropout",
            Self::Mutants => "mutants",
        })
    }
}

impl FromStr for PredictionSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dropout" => Ok(Self::Dropout),
            "mutants" => Ok(Self::Mutants),
            other => Err(Error::input(format!("unknown prediction source `{other}`"))),
        }
    }
}

/// `T` predicted labels per sample, optionally with the true label.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionLog {
    pub matrix: LabelMatrix,
    pub truth: Option<Vec<usize>>,
    pub source: PredictionSource,
    pub master_seed: u64,
}

impl PredictionLog {
    pub fn to_text(&self) -> String {
        let m = &self.matrix;
        let mut s = String::new();
        writeln!(s, "{PREDICTION_LOG_MAGIC} {FORMAT_VERSION}").unwrap();
        writeln!(s, "num_samples={}", m.num_samples()).unwrap();
        writeln!(s, "num_passes={}", m.num_passes()).unwrap();
        writeln!(s, "num_classes={}", m.num_classes()).unwrap();
        writeln!(s, "source={}", self.source).unwrap();
        writeln!(s, "master_seed={}", self.master_seed).unwrap();
        writeln!(s, "has_truth={}", self.truth.is_some()).unwrap();
        s.push_str("---\n");
        for (i, row) in m.rows().enumerate() {
            for (k, l) in row.iter().enumerate() {
                if k > 0 {
                    s.push(' ');
                }
                write!(s, "{l}").unwrap();
            }
            if let Some(t) = &self.truth {
                write!(s, " ; {}", t[i]).unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc = split_document(text, PREDICTION_LOG_MAGIC)?;
        let n: usize = doc.get("num_samples")?;
        let t: usize = doc.get("num_passes")?;
        let c: usize = doc.get("num_classes")?;
        let source: PredictionSource = doc.get("source")?;
        let master_seed: u64 = doc.get("master_seed")?;
        let has_truth: bool = doc.get("has_truth")?;
        if t == 0 {
            return Err(Error::parse(1, "num_passes", "must be at least 1"));
        }
        if c < 2 {
            return Err(Error::parse(1, "num_classes", "must be at least 2"));
        }
        doc.expect_rows(n, "rows")?;
        let mut labels = Vec::with_capacity(n * t);
        let mut truth = Vec::new();
        for (i, &(line, row)) in doc.body.iter().enumerate() {
            let field = format!("row {i}");
            let (preds, y) = match (has_truth, row.split_once(';')) {
                (true, Some((p, y))) => (p, Some(y)),
                (true, None) => return Err(Error::parse(line, field, "missing `; truth` column")),
                (false, Some(_)) => return Err(Error::parse(line, field, "unexpected truth column")),
                (false, None) => (row, None),
            };
            let vals: Vec<usize> = parse_values(line, &field, preds, t)?;
            if let Some(k) = vals.iter().position(|&l| l >= c) {
                return Err(Error::parse(
                    line,
                    format!("{field}[{k}]"),
                    format!("label {} outside [0, {c})", vals[k]),
                ));
            }
            labels.extend(vals);
            if let Some(y) = y {
                let y: usize = y
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line, format!("{field} truth"), format!("cannot parse `{}`", y.trim())))?;
                if y >= c {
                    return Err(Error::parse(line, format!("{field} truth"), format!("label {y} outside [0, {c})")));
                }
                truth.push(y);
            }
        }
        Ok(Self {
            matrix: LabelMatrix::new(n, t, c, labels)?,
            truth: has_truth.then_some(truth),
            source,
            master_seed,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

pub fn model_to_text(model: &MlpModel) -> String {
    let mut s = String::new();
    writeln!(s, "{MODEL_MAGIC} {FORMAT_VERSION}").unwrap();
    let sizes: Vec<String> = model.layer_sizes().iter().map(ToString::to_string).collect();
    writeln!(s, "layer_sizes={}", sizes.join(" ")).unwrap();
    writeln!(s, "dropout_rate={:?}", model.dropout_rate()).unwrap();
    s.push_str("---\n");
    for l in 0..model.num_layers() {
        let fan_in = model.layer_sizes()[l];
        for row in model.weights(l).chunks(fan_in) {
            write!(s, "w{l} ").unwrap();
            join_floats(&mut s, row);
            s.push('\n');
        }
        write!(s, "b{l} ").unwrap();
        join_floats(&mut s, model.biases(l));
        s.push('\n');
    }
    s
}

pub fn model_from_text(text: &str) -> Result<MlpModel> {
    let doc = split_document(text, MODEL_MAGIC)?;
    let (sizes_line, sizes_text) = *doc
        .header
        .get("layer_sizes")
        .ok_or_else(|| Error::parse(1, "layer_sizes", "missing header field"))?;
    let sizes: Vec<usize> = sizes_text
        .split_whitespace()
        .map(|v| v.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(sizes_line, "layer_sizes", "expected integers"))?;
    if sizes.len() < 2 {
        return Err(Error::parse(sizes_line, "layer_sizes", "need at least two layers"));
    }
    let rate: f64 = doc.get("dropout_rate")?;
    let expected_rows: usize = sizes[1..].iter().map(|n| n + 1).sum();
    doc.expect_rows(expected_rows, "rows")?;
    let mut body = doc.body.iter();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        let mut w = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_out {
            let &(line, text) = body.next().expect("row count checked");
            w.extend(tagged_floats(line, text, &format!("w{l}"), fan_in)?);
        }
        let &(line, text) = body.next().expect("row count checked");
        biases.push(tagged_floats(line, text, &format!("b{l}"), fan_out)?);
        weights.push(w);
    }
    MlpModel::from_parts(sizes, weights, biases, rate)
}

fn tagged_floats(line: usize, text: &str, tag: &str, expected: usize) -> Result<Vec<f64>> {
    let rest = text
        .strip_prefix(tag)
        .filter(|r| r.starts_with(' ') || r.is_empty())
        .ok_or_else(|| Error::parse(line, tag, format!("expected a `{tag}` row")))?;
    let vals: Vec<f64> = parse_values(line, tag, rest, expected)?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(line, tag, "non-finite parameter"));
    }
    Ok(vals)
}

pub fn write_model(model: &MlpModel, path: &Path) -> Result<()> {
    write_atomic(path, model_to_text(model).as_bytes())
}

pub fn read_model(path: &Path) -> Result<MlpModel> {
    model_from_text(&std::fs::read_to_string(path)?)
}

pub fn dataset_to_text(data: &Dataset) -> String {
    let mut s = String::new();
    writeln!(s, "{DATASET_MAGIC} {FORMAT_VERSION}").unwrap();
    writeln!(s, "num_samples={}", data.len()).unwrap();
    writeln!(s, "dim={}", data.dim()).unwrap();
    writeln!(s, "num_classes={}", data.num_classes()).unwrap();
    s.push_str("---\n");
    for i in 0..data.len() {
        write!(s, "{} ; ", data.labels()[i]).unwrap();
        join_floats(&mut s, data.row(i));
        s.push('\n');
    }
    s
}

pub fn dataset_from_text(text: &str) -> Result<Dataset> {
    let doc = split_document(text, DATASET_MAGIC)?;
    let n: usize = doc.get("num_samples")?;
    let dim: usize = doc.get("dim")?;
    let c: usize = doc.get("num_classes")?;
    doc.expect_rows(n, "rows")?;
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (i, &(line, row)) in doc.body.iter().enumerate() {
        let field = format!("row {i}");
        let (y, rest) = row
            .split_once(';')
            .ok_or_else(|| Error::parse(line, &field, "expected `label ; features`"))?;
        let y: usize = y
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("{field} label"), "cannot parse label"))?;
        if y >= c {
            return Err(Error::parse(line, format!("{field} label"), format!("label {y} outside [0, {c})")));
        }
        let vals: Vec<f64> = parse_values(line, &field, rest, dim)?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(line, field, "non-finite feature"));
        }
        labels.push(y);
        features.extend(vals);
    }
    Dataset::new(dim, c, features, labels)
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, dataset_to_text(data).as_bytes())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_text(&std::fs::read_to_string(path)?)
}

/// Aligned human-readable summary with 4-decimal fractions.
pub fn estimation_to_text(r: &EstimationResult) -> String {
    let mut s = String::new();
    writeln!(s, "acc1     {:.4}", r.acc1).unwrap();
    writeln!(s, "acc2     {:.4}", r.acc2).unwrap();
    writeln!(s, "acc_new  {:.4}", r.acc_new).unwrap();
    writeln!(s, "acc_ori  {:.4}", r.acc_ori).unwrap();
    if let Some(d) = r.acc_ori_deterministic {
        writeln!(s, "acc_ori (deterministic)  {d:.4}").unwrap();
    }
    writeln!(s, "{:>5}  {:>8}  {:>8}  {:>8}", "area", "ori", "new", "acc").unwrap();
    for a in r.per_area.iter().filter(|a| a.ori_size + a.new_size > 0) {
        let acc = a.accuracy.map_or_else(|| "empty".to_string(), |v| format!("{v:.4}"));
        writeln!(s, "{:>5}  {:>8}  {:>8}  {:>8}", a.area, a.ori_size, a.new_size, acc).unwrap();
    }
    for w in &r.warnings {
        writeln!(s, "warning: {w}").unwrap();
    }
    s
}

/// One JSON record per line, full precision.
pub fn estimation_to_json_line(r: &EstimationResult) -> Result<String> {
    Ok(serde_json::to_string(r)? + "\n")
}

pub fn estimation_from_json_line(line: &str) -> Result<EstimationResult> {
    Ok(serde_json::from_str(line.trim())?)
}
