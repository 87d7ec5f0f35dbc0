//! Tabular datasets: loading, stratified splitting, scaling, one-hot encoding,
//! and seeded synthetic generators.
//!
//! File layout under a data directory:
//!
//! | dataset      | files                                                          |
//! |--------------|----------------------------------------------------------------|
//! | `churn`      | `churn/Churn_Modelling.csv`                                    |
//! | `otto`       | `otto/train.csv`                                               |
//! | `adult`      | `adult/adult.csv`                                              |
//! | `california` | `california/california_housing.csv` or `california/housing.csv` |
//! | `mnist`      | `mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte`, or `mnist/mnist.csv` |
//!
//! CSV files are comma-separated UTF-8 with a header row.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{Targets, Task};
use crate::matrix::DenseMatrix;
use crate::rng::{Purpose, RngStream, SeedKey};

pub const MISSING_CATEGORY: &str = "MissingValue";
const MISSING_TOKENS: [&str; 5] = ["", "?", "NA", "NaN", "nan"];

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalColumn {
    pub name: String,
    /// `None` marks a missing entry.
    pub values: Vec<Option<String>>,
}

/// Raw dataset before splitting: real-valued features, categorical
/// columns kept as strings, and encoded targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub name: String,
    pub features: DenseMatrix,
    pub feature_names: Vec<String>,
    pub categorical: Vec<CategoricalColumn>,
    pub targets: Targets,
}

impl TabularDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        self.targets.task()
    }

    pub fn class_count(&self) -> Option<usize> {
        match &self.targets {
            Targets::Labels { classes, .. } => Some(*classes),
            Targets::Values(_) => None,
        }
    }

    /// Width of the model input after one-hot expansion, as fitted on `rows`.
    pub fn encoded_width(&self, rows: &[usize]) -> usize {
        self.features.cols() + OneHotEncoder::fit(&self.categorical, rows).width()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split sizes `(round(0.64n), round(0.16n), rest)`, rounding halves up.
pub fn split_sizes(n: usize) -> [usize; 3] {
    let train = (64 * n + 50) / 100;
    let val = (16 * n + 50) / 100;
    [train, val, n - train - val]
}

/// Seeded 64/16/20 split, stratified by class for classification targets.
pub fn split(targets: &Targets, seed: u64) -> Result<SplitIndices> {
    let n = targets.len();
    if n < 10 {
        return Err(Error::Data(format!("need at least 10 rows to split, got {n}")));
    }
    let sizes = split_sizes(n);
    let mut rng = SeedKey::new(Purpose::DataSplit).with_cell(seed, 0).stream();
    let mut parts: [Vec<usize>; 3] = Default::default();
    match targets {
        Targets::Values(_) => {
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            parts[0] = order[..sizes[0]].to_vec();
            parts[1] = order[sizes[0]..sizes[0] + sizes[1]].to_vec();
            parts[2] = order[sizes[0] + sizes[1]..].to_vec();
        }
        Targets::Labels { labels, classes } => {
            let mut members = vec![Vec::new(); *classes];
            for (i, &l) in labels.iter().enumerate() {
                members
                    .get_mut(l)
                    .ok_or(Error::LabelOutOfRange {
                        label: l,
                        classes: *classes,
                    })?
                    .push(i);
            }
            for (class, m) in members.iter().enumerate() {
                if !m.is_empty() && m.len() < 3 {
                    return Err(Error::Stratification {
                        class,
                        count: m.len(),
                    });
                }
            }
            let counts: Vec<usize> = members.iter().map(Vec::len).collect();
            let alloc = stratified_counts(&counts, sizes)?;
            for (m, take) in members.iter_mut().zip(&alloc) {
                rng.shuffle(m);
                let mut rest = &m[..];
                for (part, &t) in parts.iter_mut().zip(take) {
                    part.extend_from_slice(&rest[..t]);
                    rest = &rest[t..];
                }
            }
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    let [train, val, test] = parts;
    Ok(SplitIndices { train, val, test })
}

/// Integer class-by-split counts with row sums `counts`, column sums `sizes`,
/// and every cell equal to the floor or ceiling of its proportional quota.
/// Floors are fixed first; the leftover units are routed by max-flow over
/// cells whose quota is fractional.
fn stratified_counts(counts: &[usize], sizes: [usize; 3]) -> Result<Vec<[usize; 3]>> {
    let n: usize = counts.iter().sum();
    let c = counts.len();
    let mut alloc: Vec<[usize; 3]> = counts
        .iter()
        .map(|&k| [0, 1, 2].map(|j| k * sizes[j] / n))
        .collect();
    // nodes: 0 source, 1..=c classes, c+1..=c+3 splits, c+4 sink
    let nodes = c + 5;
    let sink = c + 4;
    let mut cap = vec![vec![0i64; nodes]; nodes];
    for (i, &k) in counts.iter().enumerate() {
        cap[0][1 + i] = (k - alloc[i].iter().sum::<usize>()) as i64;
        for j in 0..3 {
            if !(k * sizes[j]).is_multiple_of(n) {
                cap[1 + i][c + 1 + j] = 1;
            }
        }
    }
    for j in 0..3 {
        let used: usize = alloc.iter().map(|a| a[j]).sum();
        cap[c + 1 + j][sink] = (sizes[j] - used) as i64;
    }
    let need: i64 = cap[0].iter().sum();
    let original = cap.clone();
    let mut flow = 0;
    while let Some(path) = augmenting_path(&cap, 0, sink) {
        for w in path.windows(2) {
            cap[w[0]][w[1]] -= 1;
            cap[w[1]][w[0]] += 1;
        }
        flow += 1;
    }
    if flow != need {
        return Err(Error::Data("stratified allocation failed".into()));
    }
    for (i, a) in alloc.iter_mut().enumerate() {
        for (j, cell) in a.iter_mut().enumerate() {
            if original[1 + i][c + 1 + j] == 1 && cap[1 + i][c + 1 + j] == 0 {
                *cell += 1;
            }
        }
    }
    Ok(alloc)
}

fn augmenting_path(cap: &[Vec<i64>], source: usize, sink: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; cap.len()];
    prev[source] = source;
    let mut queue = std::collections::VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for v in 0..cap.len() {
            if cap[u][v] > 0 && prev[v] == usize::MAX {
                prev[v] = u;
                if v == sink {
                    let mut path = vec![sink];
                    let mut at = sink;
                    while at != source {
                        at = prev[at];
                        path.push(at);
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(v);
            }
        }
    }
    None
}

/// Per-column z-scaling with population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(x: &DenseMatrix) -> Self {
        let (n, d) = x.shape();
        let inv = 1.0 / n.max(1) as f64;
        let mean: Vec<f64> = x.column_sums().iter().map(|s| s * inv).collect();
        let mut var = vec![0.0; d];
        for r in 0..n {
            for ((v, x), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.iter().map(|v| (v * inv).sqrt()).collect();
        FeatureScaler { mean, std }
    }

    /// Constant columns are only centred.
    fn divisor(&self, j: usize) -> f64 {
        let s = self.std[j];
        if s <= 1e-12 * self.mean[j].abs().max(1.0) {
            1.0
        } else {
            s
        }
    }

    pub fn transform(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::dim("scaler input", self.mean.len(), x.cols()));
        }
        let div: Vec<f64> = (0..x.cols()).map(|j| self.divisor(j)).collect();
        Ok(DenseMatrix::from_fn(x.rows(), x.cols(), |r, c| {
            (x.get(r, c) - self.mean[c]) / div[c]
        }))
    }

    pub fn fit_transform(x: &DenseMatrix) -> (Self, DenseMatrix) {
        let s = Self::fit(x);
        let t = s.transform(x).expect("fitted on the same width");
        (s, t)
    }
}

/// One indicator column per (feature, category) seen in the fitting rows.
/// Missing entries are the category [`MISSING_CATEGORY`]; categories never
/// seen during fitting encode as all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    pub columns: Vec<(String, Vec<String>)>,
}

fn category(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or(MISSING_CATEGORY)
}

impl OneHotEncoder {
    pub fn fit(columns: &[CategoricalColumn], rows: &[usize]) -> Self {
        let columns = columns
            .iter()
            .map(|c| {
                let cats: BTreeSet<&str> = rows.iter().map(|&r| category(&c.values[r])).collect();
                (c.name.clone(), cats.into_iter().map(str::to_owned).collect())
            })
            .collect();
        OneHotEncoder { columns }
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(|(_, c)| c.len()).sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(|(name, cats)| cats.iter().map(move |c| format!("{name}={c}")))
            .collect()
    }

    pub fn transform(&self, columns: &[CategoricalColumn], rows: &[usize]) -> Result<DenseMatrix> {
        if columns.len() != self.columns.len() {
            return Err(Error::dim("categorical columns", self.columns.len(), columns.len()));
        }
        let mut out = DenseMatrix::zeros(rows.len(), self.width());
        let mut offset = 0;
        for ((_, cats), col) in self.columns.iter().zip(columns) {
            for (i, &r) in rows.iter().enumerate() {
                if let Ok(pos) = cats.binary_search_by(|c| c.as_str().cmp(category(&col.values[r]))) {
                    out.set(i, offset + pos, 1.0);
                }
            }
            offset += cats.len();
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub x: DenseMatrix,
    pub y: Targets,
}

/// Model-ready splits: scaler and encoder fitted on the training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub name: String,
    pub task: Task,
    pub train: SplitData,
    pub val: SplitData,
    pub test: SplitData,
    pub feature_names: Vec<String>,
    pub scaler: FeatureScaler,
    pub encoder: OneHotEncoder,
    pub indices: SplitIndices,
}

impl PreparedData {
    pub fn in_features(&self) -> usize {
        self.train.x.cols()
    }

    pub fn out_features(&self) -> usize {
        self.train.y.output_width()
    }
}

pub fn prepare(ds: &TabularDataset, split_seed: u64) -> Result<PreparedData> {
    let indices = split(&ds.targets, split_seed)?;
    let scaler = FeatureScaler::fit(&ds.features.select_rows(&indices.train));
    let encoder = OneHotEncoder::fit(&ds.categorical, &indices.train);
    let block = |rows: &[usize]| -> Result<SplitData> {
        let numeric = scaler.transform(&ds.features.select_rows(rows))?;
        let x = numeric.hstack(&encoder.transform(&ds.categorical, rows)?)?;
        Ok(SplitData {
            x,
            y: ds.targets.select(rows),
        })
    };
    let (train, val, test) = (block(&indices.train)?, block(&indices.val)?, block(&indices.test)?);
    if !(train.x.is_finite() && val.x.is_finite() && test.x.is_finite()) {
        return Err(Error::Data(format!("{}: non-finite features after preprocessing", ds.name)));
    }
    let mut feature_names = ds.feature_names.clone();
    feature_names.extend(encoder.feature_names());
    Ok(PreparedData {
        name: ds.name.clone(),
        task: ds.task(),
        train,
        val,
        test,
        feature_names,
        scaler,
        encoder,
        indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Churn,
    Otto,
    Adult,
    California,
    Mnist,
}

impl DatasetName {
    pub const ALL: [DatasetName; 5] = [
        DatasetName::Churn,
        DatasetName::Otto,
        DatasetName::Adult,
        DatasetName::California,
        DatasetName::Mnist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Churn => "churn",
            DatasetName::Otto => "otto",
            DatasetName::Adult => "adult",
            DatasetName::California => "california",
            DatasetName::Mnist => "mnist",
        }
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetName::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownDataset(s.to_owned()))
    }
}

enum TargetRule {
    Real,
    Classes,
    Income,
}

struct CsvRecipe {
    files: &'static [&'static str],
    target: &'static [&'static str],
    drop: &'static [&'static str],
    rule: TargetRule,
}

fn recipe(name: DatasetName) -> CsvRecipe {
    match name {
        DatasetName::Churn => CsvRecipe {
            files: &["Churn_Modelling.csv", "churn.csv"],
            target: &["Exited"],
            drop: &["RowNumber", "CustomerId", "Surname"],
            rule: TargetRule::Classes,
        },
        DatasetName::Otto => CsvRecipe {
            files: &["train.csv", "otto.csv"],
            target: &["target"],
            drop: &["id"],
            rule: TargetRule::Classes,
        },
        DatasetName::Adult => CsvRecipe {
            files: &["adult.csv"],
            target: &["income", "class", "salary"],
            drop: &[],
            rule: TargetRule::Income,
        },
        DatasetName::California => CsvRecipe {
            files: &["california_housing.csv", "housing.csv", "california.csv"],
            target: &["MedHouseVal", "median_house_value", "target"],
            drop: &[],
            rule: TargetRule::Real,
        },
        DatasetName::Mnist => CsvRecipe {
            files: &["mnist.csv"],
            target: &["label"],
            drop: &[],
            rule: TargetRule::Classes,
        },
    }
}

/// Load `<dir>/<name>/…` and apply the dataset's column handling.
pub fn load_dataset(name: DatasetName, data_dir: &Path) -> Result<TabularDataset> {
    let dir = data_dir.join(name.as_str());
    if name == DatasetName::Mnist && dir.join("train-images-idx3-ubyte").exists() {
        return load_mnist_idx(&dir);
    }
    let r = recipe(name);
    let path = r
        .files
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.exists())
        .ok_or_else(|| Error::MissingFile(dir.join(r.files[0])))?;
    let mut ds = dataset_from_csv(name.as_str(), &path, &r)?;
    if name == DatasetName::Mnist {
        ds.features.scale(1.0 / 255.0);
    }
    Ok(ds)
}

fn is_missing(v: &str) -> bool {
    MISSING_TOKENS.contains(&v)
}

fn dataset_from_csv(name: &str, path: &Path, r: &CsvRecipe) -> Result<TabularDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let target_col = headers
        .iter()
        .position(|h| r.target.iter().any(|t| t.eq_ignore_ascii_case(h)))
        .ok_or_else(|| {
            Error::Data(format!("{}: no target column among {:?}", path.display(), r.target))
        })?;
    let mut cols: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for rec in reader.records() {
        let rec = rec?;
        for (c, v) in cols.iter_mut().zip(rec.iter()) {
            c.push(v.to_owned());
        }
    }
    let n = cols[target_col].len();
    if n == 0 {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }

    let targets = match r.rule {
        TargetRule::Real => {
            let vals = cols[target_col]
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::Data(format!("bad regression target {v:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            Targets::Values(DenseMatrix::from_vec(n, 1, vals)?)
        }
        TargetRule::Classes => encode_labels(&cols[target_col])?,
        TargetRule::Income => Targets::Labels {
            labels: cols[target_col]
                .iter()
                .map(|v| income_label(v))
                .collect::<Result<_>>()?,
            classes: 2,
        },
    };

    let mut numeric_names = Vec::new();
    let mut numeric_cols: Vec<Vec<f64>> = Vec::new();
    let mut categorical = Vec::new();
    for (j, (h, col)) in headers.iter().zip(&cols).enumerate() {
        if j == target_col || r.drop.iter().any(|d| d.eq_ignore_ascii_case(h)) {
            continue;
        }
        let parsed: Option<Vec<f64>> = col
            .iter()
            .map(|v| {
                if is_missing(v) {
                    Some(0.0)
                } else {
                    v.parse::<f64>().ok().filter(|x| x.is_finite())
                }
            })
            .collect();
        match parsed {
            Some(vals) => {
                numeric_names.push(h.clone());
                numeric_cols.push(vals);
            }
            None => categorical.push(CategoricalColumn {
                name: h.clone(),
                values: col
                    .iter()
                    .map(|v| (!is_missing(v)).then(|| v.clone()))
                    .collect(),
            }),
        }
    }
    let features = DenseMatrix::from_fn(n, numeric_cols.len(), |r, c| numeric_cols[c][r]);
    Ok(TabularDataset {
        name: name.to_owned(),
        features,
        feature_names: numeric_names,
        categorical,
        targets,
    })
}

/// `<=50K` → 0 and `>50K` → 1, tolerating a trailing period.
pub fn income_label(v: &str) -> Result<usize> {
    match v.trim().trim_end_matches('.') {
        "<=50K" => Ok(0),
        ">50K" => Ok(1),
        other => Err(Error::Data(format!("unrecognised income label {other:?}"))),
    }
}

/// Sorted distinct values become 0..C; integer-valued labels sort numerically.
pub fn encode_labels(raw: &[String]) -> Result<Targets> {
    if let Some(bad) = raw.iter().find(|v| is_missing(v)) {
        return Err(Error::Data(format!("missing class label {bad:?}")));
    }
    let mut distinct: Vec<&str> = raw.iter().map(String::as_str).collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.iter().all(|v| v.parse::<i64>().is_ok()) {
        distinct.sort_by_key(|v| v.parse::<i64>().unwrap_or_default());
    }
    let index: BTreeMap<&str, usize> = distinct.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    Ok(Targets::Labels {
        labels: raw.iter().map(|v| index[v.as_str()]).collect(),
        classes: distinct.len(),
    })
}

fn read_idx(path: &Path, magic: u32) -> Result<(Vec<usize>, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_owned()),
        _ => e.into(),
    })?;
    let be = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::Data(format!("{}: truncated IDX header", path.display())))
    };
    if be(0)? != magic {
        return Err(Error::Data(format!("{}: bad IDX magic", path.display())));
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (0..ndim).map(|i| be(4 + 4 * i).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * ndim;
    let len: usize = dims.iter().product();
    if bytes.len() != start + len {
        return Err(Error::Data(format!("{}: IDX payload size mismatch", path.display())));
    }
    Ok((dims, bytes[start..].to_vec()))
}

fn load_mnist_idx(dir: &Path) -> Result<TabularDataset> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    let mut width = 0;
    for prefix in ["train", "t10k"] {
        let img: PathBuf = dir.join(format!("{prefix}-images-idx3-ubyte"));
        let lab: PathBuf = dir.join(format!("{prefix}-labels-idx1-ubyte"));
        let (idims, ibytes) = read_idx(&img, 0x0803)?;
        let (ldims, lbytes) = read_idx(&lab, 0x0801)?;
        if idims[0] != ldims[0] {
            return Err(Error::Data(format!("{}: image/label count mismatch", dir.display())));
        }
        width = idims[1] * idims[2];
        pixels.extend(ibytes.iter().map(|&b| b as f64 / 255.0));
        labels.extend(lbytes.iter().map(|&b| b as usize));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::LabelOutOfRange { label: bad, classes: 10 });
    }
    let n = labels.len();
    Ok(TabularDataset {
        name: DatasetName::Mnist.as_str().to_owned(),
        features: DenseMatrix::from_vec(n, width, pixels)?,
        feature_names: (0..width).map(|i| format!("pixel{i}")).collect(),
        categorical: Vec::new(),
        targets: Targets::Labels { labels, classes: 10 },
    })
}

/// Knobs of the synthetic generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    /// Standard deviation of the additive regression noise.
    pub noise: f64,
    pub classes: usize,
    /// Distance between class centres, in units of the blob σ (= 1).
    pub separation: f64,
    /// When set, points closer than this to a boundary between their class
    /// and any other are redrawn, making the blobs linearly separable.
    pub margin: Option<f64>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            noise: 0.1,
            classes: 3,
            separation: 2.0,
            margin: Some(0.0),
        }
    }
}

/// Generating weights of the synthetic regression task for `(d, seed)`.
pub fn synth_regression_weights(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = SeedKey::new(Purpose::Synthetic).with_cell(seed, 1).stream();
    (0..d).map(|_| rng.standard_normal()).collect()
}

/// Regression: `y = w·x + 0.5·sin(x₀·x₁) + noise·ε` with `x ~ N(0, I)`.
/// The sine term is uncorrelated with every coordinate, so least squares
/// recovers `w`. Classification: Gaussian blobs, labels cycling `0..classes`.
pub fn synth_dataset(task: Task, n: usize, d: usize, seed: u64, opts: &SynthOptions) -> Result<TabularDataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("synthetic dataset needs n, d >= 1".into()));
    }
    let mut rng = SeedKey::new(Purpose::Synthetic).with_cell(seed, 2).stream();
    let (features, targets, name) = match task {
        Task::Regression => {
            let w = synth_regression_weights(d, seed);
            let x = DenseMatrix::from_fn(n, d, |_, _| rng.standard_normal());
            let y = DenseMatrix::from_fn(n, 1, |r, _| {
                let row = x.row(r);
                let lin: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
                lin + 0.5 * (row[0] * row[1 % d]).sin() + opts.noise * rng.standard_normal()
            });
            (x, Targets::Values(y), "synth-regression")
        }
        Task::Classification => {
            if opts.classes < 2 {
                return Err(Error::InvalidArgument("need at least 2 classes".into()));
            }
            let centers = blob_centers(opts.classes, d, opts.separation, &mut rng);
            let mut x = DenseMatrix::zeros(n, d);
            let labels: Vec<usize> = (0..n).map(|i| i % opts.classes).collect();
            for (r, &c) in labels.iter().enumerate() {
                let mut attempts = 0;
                loop {
                    for (v, m) in x.row_mut(r).iter_mut().zip(&centers[c]) {
                        *v = m + rng.standard_normal();
                    }
                    let ok = opts
                        .margin
                        .is_none_or(|m| boundary_gap(x.row(r), c, &centers) >= m);
                    if ok {
                        break;
                    }
                    attempts += 1;
                    if attempts > 10_000 {
                        return Err(Error::InvalidArgument(
                            "margin too large for the blob separation".into(),
                        ));
                    }
                }
            }
            let t = Targets::Labels {
                labels,
                classes: opts.classes,
            };
            (x, t, "synth-classification")
        }
    };
    Ok(TabularDataset {
        name: name.to_owned(),
        features,
        feature_names: (0..d).map(|i| format!("x{i}")).collect(),
        categorical: Vec::new(),
        targets,
    })
}

/// Axis-aligned centres when there are enough dimensions, random directions
/// otherwise; pairwise distance equals `separation` in the axis case.
fn blob_centers(classes: usize, d: usize, separation: f64, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let radius = separation / std::f64::consts::SQRT_2;
    (0..classes)
        .map(|c| {
            let mut v = vec![0.0; d];
            if classes <= d {
                v[c] = radius;
            } else {
                v.iter_mut().for_each(|x| *x = rng.standard_normal());
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.iter_mut().for_each(|x| *x *= radius / norm);
            }
            v
        })
        .collect()
}

/// Smallest signed distance from `x` to the bisecting hyperplanes between
/// its own centre and every other centre (positive on its own side).
fn boundary_gap(x: &[f64], own: usize, centers: &[Vec<f64>]) -> f64 {
    let mine = &centers[own];
    centers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != own)
        .map(|(_, other)| {
            let diff: Vec<f64> = mine.iter().zip(other).map(|(a, b)| a - b).collect();
            let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            let proj: f64 = x
                .iter()
                .zip(mine.iter().zip(other))
                .zip(&diff)
                .map(|((xi, (a, b)), dv)| (xi - 0.5 * (a + b)) * dv)
                .sum();
            proj / norm
        })
        .fold(f64::INFINITY, f64::min)
}
