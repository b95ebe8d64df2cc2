use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Label, LabeledExample, Stream};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub init: usize,
    pub train: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.init + self.train + self.test
    }
}

/// Which points the normalization statistics are computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScope {
    /// One set of statistics from every loaded point.
    #[default]
    AllPoints,
    /// Each split normalized by its own statistics.
    PerSplit,
}

/// `x -> (x - mean) / scale` per coordinate, clamped to `[-1, 1]`; coordinates
/// with zero scale map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    /// Largest absolute deviation from the mean.
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn fit(points: &[LabeledExample]) -> Result<Self> {
        let d = points
            .first()
            .map(|p| p.dim())
            .ok_or_else(|| Error::invalid("no points to normalize"))?;
        let mut mean = vec![0.0; d];
        for p in points {
            crate::error::check_dim(d, p.dim())?;
            for (m, v) in mean.iter_mut().zip(&p.x) {
                *m += v;
            }
        }
        let n = points.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut scale = vec![0.0f64; d];
        for p in points {
            for ((s, v), m) in scale.iter_mut().zip(&p.x).zip(&mean) {
                *s = s.max((v - m).abs());
            }
        }
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| {
                if *s > 0.0 {
                    ((v - m) / s).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub scope: NormScope,
    /// One entry for `AllPoints`; init, train, test for `PerSplit`.
    pub params: Vec<Normalization>,
}

/// Normalizes `points` in place with statistics fitted on them.
pub fn normalize(points: &mut [LabeledExample]) -> Result<Normalization> {
    let norm = Normalization::fit(points)?;
    for p in points.iter_mut() {
        p.x = norm.apply(&p.x);
    }
    Ok(norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub init: Stream,
    pub train: Stream,
    pub test: Stream,
    pub normalization: NormalizationRecord,
    pub seed: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    init: usize,
    train: usize,
    test: usize,
    dim: Option<usize>,
    seed: u64,
    normalization: &'a NormalizationRecord,
}

impl DatasetBundle {
    pub fn dim(&self) -> Option<usize> {
        self.init.dim().or(self.train.dim()).or(self.test.dim())
    }

    /// Sizes, seed and normalization parameters as JSON.
    pub fn manifest_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Manifest {
            init: self.init.len(),
            train: self.train.len(),
            test: self.test.len(),
            dim: self.dim(),
            seed: self.seed,
            normalization: &self.normalization,
        })?)
    }
}

/// Splits already shuffled points in order into init, train and test, then
/// normalizes according to `scope`.
pub fn split_and_normalize(
    mut points: Vec<LabeledExample>,
    sizes: SplitSizes,
    scope: NormScope,
    seed: u64,
) -> Result<DatasetBundle> {
    if sizes.total() > points.len() {
        return Err(Error::invalid(format!(
            "requested {} examples but only {} are available",
            sizes.total(),
            points.len()
        )));
    }
    points.truncate(sizes.total());
    let params = match scope {
        NormScope::AllPoints => vec![normalize(&mut points)?],
        NormScope::PerSplit => Vec::new(),
    };
    let test = points.split_off(sizes.init + sizes.train);
    let train = points.split_off(sizes.init);
    let mut parts = [points, train, test];
    let mut params = params;
    if scope == NormScope::PerSplit {
        for part in parts.iter_mut().filter(|p| !p.is_empty()) {
            params.push(normalize(part)?);
        }
    }
    let [init, train, test] = parts;
    Ok(DatasetBundle {
        init: Stream::clean(init),
        train: Stream::clean(train),
        test: Stream::clean(test),
        normalization: NormalizationRecord { scope, params },
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub has_header: bool,
    pub label: LabelColumn,
    #[serde(default)]
    pub scope: NormScope,
}

/// Writes `x1..xd,label` rows with `±1` labels, readable by [`load_csv_dataset`]
/// with a header and the last column as label.
pub fn write_csv_dataset(path: &Path, examples: &[LabeledExample]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let d = examples
        .first()
        .map(|e| e.dim())
        .ok_or_else(|| Error::invalid("nothing to write"))?;
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    for e in examples {
        crate::error::check_dim(d, e.dim())?;
        let mut row: Vec<String> = e.x.iter().map(|v| v.to_string()).collect();
        row.push(format!("{}", e.y.sign()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads numeric features and a `±1` or `{0, 1}` label column, shuffles with
/// `seed`, splits without replacement and normalizes. Rows and columns in
/// errors are 1-based as a spreadsheet would show them.
pub fn load_csv_dataset(
    path: &Path,
    opts: &CsvOptions,
    sizes: SplitSizes,
    seed: u64,
) -> Result<DatasetBundle> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let label_idx = match &opts.label {
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => {
            if !opts.has_header {
                return Err(Error::invalid("a label column name needs a header row"));
            }
            let headers = reader.headers().map_err(csv_err)?;
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::invalid(format!("no column named '{name}'")))?
        }
    };
    let ingest = |row: usize, column: usize, message: String| Error::Ingestion {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let first_row = if opts.has_header { 2 } else { 1 };
    let mut raw: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut width = None;
    for (k, rec) in reader.records().enumerate() {
        let row = first_row + k;
        let rec = rec.map_err(csv_err)?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(ingest(
                    row,
                    rec.len().min(w) + 1,
                    format!("expected {w} fields, found {}", rec.len()),
                ));
            }
            _ => {}
        }
        if label_idx >= rec.len() {
            return Err(ingest(row, label_idx + 1, "missing label".into()));
        }
        let mut x = Vec::with_capacity(rec.len() - 1);
        let mut label = f64::NAN;
        for (col, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if col == label_idx && cell.is_empty() {
                return Err(ingest(row, col + 1, "missing label".into()));
            }
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| ingest(row, col + 1, format!("not a finite number: '{cell}'")))?;
            if col == label_idx {
                label = v;
            } else {
                x.push(v);
            }
        }
        raw.push((x, label));
    }
    let labels: Vec<f64> = raw.iter().map(|(_, y)| *y).collect();
    let zero_one = labels.iter().all(|y| *y == 0.0 || *y == 1.0);
    let mut points = Vec::with_capacity(raw.len());
    for (k, (x, y)) in raw.into_iter().enumerate() {
        let y = if zero_one { 2.0 * y - 1.0 } else { y };
        let label = Label::of(y)
            .filter(|_| y == 1.0 || y == -1.0)
            .ok_or_else(|| {
                ingest(
                    first_row + k,
                    label_idx + 1,
                    format!("label must be in {{-1, +1}} or {{0, 1}}, got {y}"),
                )
            })?;
        points.push(LabeledExample { x, y: label });
    }
    if sizes.total() > points.len() {
        return Err(ingest(
            first_row + points.len(),
            0,
            format!(
                "split sizes need {} rows, file has {}",
                sizes.total(),
                points.len()
            ),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points.shuffle(&mut rng);
    split_and_normalize(points, sizes, opts.scope, seed)
}
