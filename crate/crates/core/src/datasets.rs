//! Sample-set collections, term-count corpora and the synthetic generators.
//!
//! File formats:
//!
//! * `collection.csv`: header `set_id,label,x1,...,xD`, one row per point;
//!   `label` is an integer or empty.
//! * directory form: one `<set_id>.csv` per set with header `x1,...,xD`, plus
//!   an optional `set_labels.csv` (`set_id,label`).
//! * `labels.csv` sidecar (either form): `label,name`.
//! * `terms.csv`: `doc_id,term_index,count` triplets with 0-based indices.
//! * `ground_truth.csv`: `set_id,y1,y2,y3`.
//! * Gaussian parameter lists: `set_id,mu,sigma`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FineError, Result};
use crate::io::{csv_error, csv_reader, fmt_f64, parse_f64, read_to_string};

pub const SET_LABELS_FILE: &str = "set_labels.csv";
pub const LABEL_NAMES_FILE: &str = "labels.csv";

/// Angle range of the swiss-roll spiral, in radians.
pub const SWISS_ROLL_T_RANGE: (f64, f64) = (1.5 * PI, 4.5 * PI);
/// Height of the swiss roll along its flat axis.
pub const SWISS_ROLL_HEIGHT: f64 = 20.0;

/// One observed data set: `n` points in `R^dim` with an optional class.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    id: String,
    points: Array2<f64>,
    label: Option<i64>,
}

impl SampleSet {
    pub fn new(id: impl Into<String>, points: Array2<f64>, label: Option<i64>) -> Result<Self> {
        let id = id.into();
        if points.nrows() == 0 {
            return Err(FineError::EmptyInput(format!("set `{id}` has no points")));
        }
        if points.ncols() == 0 {
            return Err(FineError::Format(format!("set `{id}` has zero dimensions")));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(FineError::Format(format!(
                "set `{id}` contains non-finite coordinates"
            )));
        }
        Ok(SampleSet { id, points, label })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn label(&self) -> Option<i64> {
        self.label
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.points
            .columns()
            .into_iter()
            .map(|c| c.iter().sum::<f64>() / n)
            .collect()
    }
}

/// An ordered family of sample sets sharing one ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetCollection {
    sets: Vec<SampleSet>,
    dim: usize,
    labels_present: bool,
    label_names: BTreeMap<i64, String>,
}

impl DatasetCollection {
    /// Validates and sorts the sets by id.
    pub fn new(mut sets: Vec<SampleSet>) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(FineError::EmptyInput("collection has no sets".into()));
        };
        let dim = first.dim();
        let mut seen = HashSet::new();
        for s in &sets {
            if s.dim() != dim {
                return Err(FineError::Format(format!(
                    "set `{}` has dimension {}, expected {dim}",
                    s.id,
                    s.dim()
                )));
            }
            if !seen.insert(s.id.clone()) {
                return Err(FineError::Format(format!("duplicate set id `{}`", s.id)));
            }
        }
        sets.sort_by(|a, b| a.id.cmp(&b.id));
        let labels_present = sets.iter().all(|s| s.label.is_some());
        Ok(DatasetCollection {
            sets,
            dim,
            labels_present,
            label_names: BTreeMap::new(),
        })
    }

    pub fn with_label_names(mut self, names: BTreeMap<i64, String>) -> Self {
        self.label_names = names;
        self
    }

    pub fn sets(&self) -> &[SampleSet] {
        &self.sets
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn labels_present(&self) -> bool {
        self.labels_present
    }

    pub fn label_names(&self) -> &BTreeMap<i64, String> {
        &self.label_names
    }

    pub fn ids(&self) -> Vec<String> {
        self.sets.iter().map(|s| s.id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<Option<i64>> {
        self.sets.iter().map(|s| s.label).collect()
    }

    /// Canonical `collection.csv` text.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("set_id,label");
        for k in 1..=self.dim {
            out.push_str(&format!(",x{k}"));
        }
        out.push('\n');
        for s in &self.sets {
            let label = s.label.map(|l| l.to_string()).unwrap_or_default();
            for row in s.points.rows() {
                out.push_str(&s.id);
                out.push(',');
                out.push_str(&label);
                for x in row {
                    out.push(',');
                    out.push_str(&fmt_f64(*x));
                }
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionFormat {
    LongCsv,
    Directory,
}

/// Loads a collection from a long CSV file or a directory of per-set CSVs.
///
/// A `labels.csv` next to the file (or inside the directory) supplies
/// human-readable class names.
pub fn load_collection(path: &Path, format: CollectionFormat) -> Result<DatasetCollection> {
    let (collection, names_path) = match format {
        CollectionFormat::LongCsv => {
            let text = read_to_string(path)?;
            let names = path
                .parent()
                .map(|p| p.join(LABEL_NAMES_FILE))
                .filter(|p| p.as_path() != path);
            (parse_long_csv(&text)?, names)
        }
        CollectionFormat::Directory => (load_directory(path)?, Some(path.join(LABEL_NAMES_FILE))),
    };
    match names_path {
        Some(p) if p.is_file() => {
            let names = parse_label_names(&read_to_string(&p)?)?;
            Ok(collection.with_label_names(names))
        }
        _ => Ok(collection),
    }
}

/// Parses `collection.csv` text.
pub fn parse_long_csv(text: &str) -> Result<DatasetCollection> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(FineError::EmptyInput("collection file is empty".into()));
    }
    if header.len() < 3 || &header[0] != "set_id" || &header[1] != "label" {
        return Err(FineError::Format(
            "header must be `set_id,label,x1,...,xD`".into(),
        ));
    }
    let dim = header.len() - 2;

    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, (Option<i64>, Vec<f64>)> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(csv_error)?;
        if record.len() != header.len() {
            return Err(FineError::Format(format!(
                "row {row} has {} columns, header has {}",
                record.len(),
                header.len()
            )));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(FineError::Format(format!("row {row} has an empty set_id")));
        }
        let label = parse_label(&record[1], row)?;
        let entry = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (label, Vec::new())
        });
        if entry.0 != label {
            return Err(FineError::Format(format!(
                "set `{id}` has conflicting labels at row {row}"
            )));
        }
        for k in 0..dim {
            entry
                .1
                .push(parse_f64(&record[k + 2], row, &header[k + 2])?);
        }
    }
    if groups.is_empty() {
        return Err(FineError::EmptyInput(
            "collection file has no data rows".into(),
        ));
    }
    let sets = groups
        .into_iter()
        .map(|(id, (label, flat))| {
            let n = flat.len() / dim;
            let points = Array2::from_shape_vec((n, dim), flat)
                .map_err(|e| FineError::Format(e.to_string()))?;
            SampleSet::new(id, points, label)
        })
        .collect::<Result<Vec<_>>>()?;
    DatasetCollection::new(sets)
}

fn parse_label(field: &str, row: usize) -> Result<Option<i64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| FineError::Parse {
        row,
        message: format!("label `{field}` is not an integer"),
    })
}

fn load_directory(dir: &Path) -> Result<DatasetCollection> {
    let entries = fs::read_dir(dir).map_err(|e| FineError::io(dir, e))?;
    let mut files = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| FineError::io(dir, e))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if path.is_file()
            && name.ends_with(".csv")
            && name != SET_LABELS_FILE
            && name != LABEL_NAMES_FILE
        {
            files.insert(path);
        }
    }
    if files.is_empty() {
        return Err(FineError::EmptyInput(format!(
            "no set files in {}",
            dir.display()
        )));
    }
    let labels_path = dir.join(SET_LABELS_FILE);
    let labels = if labels_path.is_file() {
        parse_id_labels(&read_to_string(&labels_path)?)?
    } else {
        BTreeMap::new()
    };

    let mut sets = Vec::with_capacity(files.len());
    for path in files {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = read_to_string(&path)?;
        let points = parse_point_csv(&text)?;
        sets.push(SampleSet::new(
            id.clone(),
            points,
            labels.get(&id).copied(),
        )?);
    }
    DatasetCollection::new(sets)
}

/// Parses a headed CSV of coordinates (`x1,...,xD`).
fn parse_point_csv(text: &str) -> Result<Array2<f64>> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(FineError::EmptyInput("set file is empty".into()));
    }
    let dim = header.len();
    let mut flat = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(csv_error)?;
        if record.len() != dim {
            return Err(FineError::Format(format!(
                "row {row} has {} columns, header has {dim}",
                record.len()
            )));
        }
        for k in 0..dim {
            flat.push(parse_f64(&record[k], row, &header[k])?);
        }
    }
    if flat.is_empty() {
        return Err(FineError::EmptyInput("set file has no data rows".into()));
    }
    Array2::from_shape_vec((flat.len() / dim, dim), flat)
        .map_err(|e| FineError::Format(e.to_string()))
}

/// Parses `id,label` pairs with integer labels.
fn parse_id_labels(text: &str) -> Result<BTreeMap<String, i64>> {
    let mut reader = csv_reader(text);
    let mut out = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(csv_error)?;
        if record.len() != 2 {
            return Err(FineError::Format(format!("row {row}: expected `id,label`")));
        }
        if let Some(l) = parse_label(&record[1], row)? {
            out.insert(record[0].to_string(), l);
        }
    }
    Ok(out)
}

/// Parses a `label,name` sidecar.
pub fn parse_label_names(text: &str) -> Result<BTreeMap<i64, String>> {
    let mut reader = csv_reader(text);
    let mut out = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(csv_error)?;
        if record.len() != 2 {
            return Err(FineError::Format(format!(
                "row {row}: expected `label,name`"
            )));
        }
        let label = parse_label(&record[0], row)?
            .ok_or_else(|| FineError::Format(format!("row {row}: empty label")))?;
        out.insert(label, record[1].to_string());
    }
    Ok(out)
}

pub fn label_names_csv(names: &BTreeMap<i64, String>) -> String {
    let mut out = String::from("label,name\n");
    for (l, n) in names {
        out.push_str(&format!("{l},{n}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Term counts
// ---------------------------------------------------------------------------

/// Word counts of one document over a shared dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermDocument {
    pub id: String,
    pub counts: Vec<u64>,
    pub label: Option<i64>,
}

impl TermDocument {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermCorpus {
    pub docs: Vec<TermDocument>,
    pub dict_size: usize,
    pub label_names: BTreeMap<i64, String>,
}

impl TermCorpus {
    pub fn ids(&self) -> Vec<String> {
        self.docs.iter().map(|d| d.id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<Option<i64>> {
        self.docs.iter().map(|d| d.label).collect()
    }

    pub fn labels_present(&self) -> bool {
        !self.docs.is_empty() && self.docs.iter().all(|d| d.label.is_some())
    }

    /// Sparse `doc_id,term_index,count` text, nonzero entries only.
    pub fn to_triplet_csv(&self) -> String {
        let mut out = String::from("doc_id,term_index,count\n");
        for d in &self.docs {
            for (i, c) in d.counts.iter().enumerate() {
                if *c > 0 {
                    out.push_str(&format!("{},{i},{c}\n", d.id));
                }
            }
        }
        out
    }

    /// `doc_id,label` text for labeled documents.
    pub fn to_label_csv(&self) -> String {
        let mut out = String::from("doc_id,label\n");
        for d in &self.docs {
            if let Some(l) = d.label {
                out.push_str(&format!("{},{l}\n", d.id));
            }
        }
        out
    }
}

/// Loads `terms.csv` triplets. Documents come back in lexicographic id order;
/// `dict_size` defaults to the largest term index plus one.
pub fn load_term_counts(path: &Path, dict_size: Option<usize>) -> Result<TermCorpus> {
    parse_term_counts(&read_to_string(path)?, dict_size)
}

pub fn parse_term_counts(text: &str, dict_size: Option<usize>) -> Result<TermCorpus> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(FineError::EmptyInput("term file is empty".into()));
    }
    if header.len() != 3 {
        return Err(FineError::Format(
            "header must be `doc_id,term_index,count`".into(),
        ));
    }
    let mut triplets: BTreeMap<String, BTreeMap<usize, u64>> = BTreeMap::new();
    let mut max_index = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(csv_error)?;
        if record.len() != 3 {
            return Err(FineError::Format(format!(
                "row {row} has {} columns, expected 3",
                record.len()
            )));
        }
        let term: i64 = record[1].parse().map_err(|_| FineError::Parse {
            row,
            message: format!("term index `{}` is not an integer", &record[1]),
        })?;
        let count: i64 = record[2].parse().map_err(|_| FineError::Parse {
            row,
            message: format!("count `{}` is not an integer", &record[2]),
        })?;
        if term < 0 {
            return Err(FineError::Format(format!("row {row}: negative term index")));
        }
        if count < 0 {
            return Err(FineError::Format(format!(
                "row {row}: negative count {count}"
            )));
        }
        let term = term as usize;
        if let Some(size) = dict_size {
            if term >= size {
                return Err(FineError::Format(format!(
                    "row {row}: term index {term} outside dictionary of size {size}"
                )));
            }
        }
        max_index = max_index.max(term);
        *triplets
            .entry(record[0].to_string())
            .or_default()
            .entry(term)
            .or_insert(0) += count as u64;
    }
    if triplets.is_empty() {
        return Err(FineError::EmptyInput("term file has no data rows".into()));
    }
    let dict_size = dict_size.unwrap_or(max_index + 1);
    let mut docs = Vec::with_capacity(triplets.len());
    for (id, terms) in triplets {
        let mut counts = vec![0u64; dict_size];
        for (t, c) in terms {
            counts[t] += c;
        }
        let doc = TermDocument {
            id,
            counts,
            label: None,
        };
        if doc.total() == 0 {
            return Err(FineError::DegenerateDocument(doc.id));
        }
        docs.push(doc);
    }
    Ok(TermCorpus {
        docs,
        dict_size,
        label_names: BTreeMap::new(),
    })
}

/// Attaches `doc_id,label` labels. Integer labels are used directly; any
/// non-integer label switches to name mode, where distinct names get ids
/// 0.. in lexicographic order and are recorded in `label_names`.
pub fn attach_doc_labels(corpus: &mut TermCorpus, text: &str) -> Result<()> {
    let mut reader = csv_reader(text);
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(csv_error)?;
        if record.len() != 2 {
            return Err(FineError::Format(format!(
                "row {row}: expected `doc_id,label`"
            )));
        }
        raw.insert(record[0].to_string(), record[1].to_string());
    }
    let numeric = raw.values().all(|v| v.parse::<i64>().is_ok());
    let names: BTreeSet<&String> = raw.values().collect();
    let name_ids: BTreeMap<&String, i64> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, i as i64))
        .collect();
    let known: HashSet<&str> = corpus.docs.iter().map(|d| d.id.as_str()).collect();
    if let Some(unknown) = raw.keys().find(|k| !known.contains(k.as_str())) {
        return Err(FineError::Format(format!(
            "label file names unknown document `{unknown}`"
        )));
    }
    for doc in &mut corpus.docs {
        doc.label = raw.get(&doc.id).map(|v| {
            if numeric {
                v.parse().unwrap_or_default()
            } else {
                name_ids[v]
            }
        });
    }
    if !numeric {
        corpus.label_names = name_ids.into_iter().map(|(n, i)| (i, n.clone())).collect();
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gaussian parameter families
// ---------------------------------------------------------------------------

/// Mean and standard deviation of a univariate normal density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(FineError::InvalidParameter(format!(
                "gaussian needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(GaussianParams { mu, sigma })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGrid {
    pub params: Vec<GaussianParams>,
    pub grid_shape: (usize, usize),
}

impl GaussianGrid {
    /// Ids `g<k>_<l>` with 1-based zero-padded grid coordinates, aligned with
    /// `params`.
    pub fn ids(&self) -> Vec<String> {
        let (ks, ls) = self.grid_shape;
        let w = ks.max(ls).to_string().len();
        (1..=ks)
            .flat_map(|k| (1..=ls).map(move |l| format!("g{k:0w$}_{l:0w$}")))
            .collect()
    }
}

/// Densities with `(μ, σ) = (α·k, 1 + β·l)`, `k` and `l` from 1, row-major
/// over `(k, l)`.
pub fn gen_gaussian_grid(
    alpha: f64,
    beta: f64,
    k_steps: usize,
    l_steps: usize,
) -> Result<GaussianGrid> {
    if k_steps == 0 || l_steps == 0 {
        return Err(FineError::InvalidParameter("grid steps must be ≥ 1".into()));
    }
    let mut params = Vec::with_capacity(k_steps * l_steps);
    for k in 1..=k_steps {
        for l in 1..=l_steps {
            params.push(GaussianParams::new(
                alpha * k as f64,
                1.0 + beta * l as f64,
            )?);
        }
    }
    Ok(GaussianGrid {
        params,
        grid_shape: (k_steps, l_steps),
    })
}

/// Evenly spaced grid covering `[mu_lo, mu_hi] × [sigma_lo, sigma_hi]`
/// inclusive, row-major over `(μ, σ)`. A single step sits at the lower end.
pub fn gaussian_parameter_grid(
    mu_range: (f64, f64),
    sigma_range: (f64, f64),
    mu_steps: usize,
    sigma_steps: usize,
) -> Result<GaussianGrid> {
    if mu_steps == 0 || sigma_steps == 0 {
        return Err(FineError::InvalidParameter("grid steps must be ≥ 1".into()));
    }
    let lin = |(lo, hi): (f64, f64), steps: usize, i: usize| {
        if steps == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (steps - 1) as f64
        }
    };
    let mut params = Vec::with_capacity(mu_steps * sigma_steps);
    for i in 0..mu_steps {
        for j in 0..sigma_steps {
            params.push(GaussianParams::new(
                lin(mu_range, mu_steps, i),
                lin(sigma_range, sigma_steps, j),
            )?);
        }
    }
    Ok(GaussianGrid {
        params,
        grid_shape: (mu_steps, sigma_steps),
    })
}

pub fn gaussian_params_csv(ids: &[String], params: &[GaussianParams]) -> String {
    let mut out = String::from("set_id,mu,sigma\n");
    for (id, p) in ids.iter().zip(params) {
        out.push_str(&format!("{id},{},{}\n", fmt_f64(p.mu), fmt_f64(p.sigma)));
    }
    out
}

/// Parses `set_id,mu,sigma` rows, sorted by id.
pub fn parse_gaussian_params(text: &str) -> Result<Vec<(String, GaussianParams)>> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(FineError::EmptyInput("parameter file is empty".into()));
    }
    if header.len() != 3 {
        return Err(FineError::Format("header must be `set_id,mu,sigma`".into()));
    }
    let mut out = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(csv_error)?;
        if record.len() != 3 {
            return Err(FineError::Format(format!("row {row}: expected 3 columns")));
        }
        let mu = parse_f64(&record[1], row, "mu")?;
        let sigma = parse_f64(&record[2], row, "sigma")?;
        let p = GaussianParams::new(mu, sigma)?;
        if out.insert(record[0].to_string(), p).is_some() {
            return Err(FineError::Format(format!("duplicate id `{}`", &record[0])));
        }
    }
    if out.is_empty() {
        return Err(FineError::EmptyInput(
            "parameter file has no data rows".into(),
        ));
    }
    Ok(out.into_iter().collect())
}

// ---------------------------------------------------------------------------
// Swiss roll
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SwissRollSets {
    pub collection: DatasetCollection,
    /// Rows are the set means `y_i = (t cos t, h, t sin t)`.
    pub ground_truth: Array2<f64>,
    /// `(t, h)` manifold coordinates of each mean.
    pub roll_coords: Vec<(f64, f64)>,
}

impl SwissRollSets {
    pub fn ground_truth_csv(&self) -> String {
        let mut out = String::from("set_id,y1,y2,y3\n");
        for (s, y) in self.collection.sets().iter().zip(self.ground_truth.rows()) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.id(),
                fmt_f64(y[0]),
                fmt_f64(y[1]),
                fmt_f64(y[2])
            ));
        }
        out
    }
}

pub fn swiss_roll_point(t: f64, h: f64) -> [f64; 3] {
    [t * t.cos(), h, t * t.sin()]
}

/// Draws `n_sets` means uniformly in swiss-roll coordinates and, for each,
/// `samples_per_set` points from `N(y_i, noise_scale²·I₃)`.
pub fn gen_swiss_roll_sets(
    n_sets: usize,
    samples_per_set: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<SwissRollSets> {
    if n_sets < 4 {
        return Err(FineError::InvalidParameter(
            "swiss roll needs n_sets ≥ 4".into(),
        ));
    }
    if samples_per_set < 2 {
        return Err(FineError::InvalidParameter(
            "swiss roll needs samples_per_set ≥ 2".into(),
        ));
    }
    if !noise_scale.is_finite() || noise_scale < 0.0 {
        return Err(FineError::InvalidParameter(
            "noise_scale must be finite and non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t_lo, t_hi) = SWISS_ROLL_T_RANGE;
    let roll_coords: Vec<(f64, f64)> = (0..n_sets)
        .map(|_| {
            let t = rng.random_range(t_lo..=t_hi);
            let h = rng.random_range(0.0..=SWISS_ROLL_HEIGHT);
            (t, h)
        })
        .collect();
    let width = (n_sets - 1).to_string().len().max(3);
    let mut ground_truth = Array2::zeros((n_sets, 3));
    let mut sets = Vec::with_capacity(n_sets);
    for (i, &(t, h)) in roll_coords.iter().enumerate() {
        let y = swiss_roll_point(t, h);
        for k in 0..3 {
            ground_truth[[i, k]] = y[k];
        }
        let mut points = Array2::zeros((samples_per_set, 3));
        for mut row in points.rows_mut() {
            for k in 0..3 {
                let z: f64 = rng.sample(StandardNormal);
                row[k] = y[k] + noise_scale * z;
            }
        }
        sets.push(SampleSet::new(format!("s{i:0width$}"), points, None)?);
    }
    Ok(SwissRollSets {
        collection: DatasetCollection::new(sets)?,
        ground_truth,
        roll_coords,
    })
}

// ---------------------------------------------------------------------------
// Multinomial clusters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MultinomialClusters {
    pub corpus: TermCorpus,
    /// The generating distribution of each class.
    pub class_probs: Vec<Vec<f64>>,
}

/// Synthetic labeled corpus. Class `c` owns the dictionary block
/// `[c·B, (c+1)·B)` with `B = dict_size / n_classes`; its distribution is a
/// Dirichlet draw with parameter `concentration + 1` inside the block and
/// `concentration` elsewhere. Small concentrations give nearly disjoint
/// classes, large ones push every class toward the uniform distribution.
pub fn gen_multinomial_clusters(
    n_classes: usize,
    dict_size: usize,
    docs_per_class: usize,
    counts_per_doc: usize,
    concentration: f64,
    seed: u64,
) -> Result<MultinomialClusters> {
    if n_classes == 0 || dict_size == 0 || docs_per_class == 0 || counts_per_doc == 0 {
        return Err(FineError::InvalidParameter(
            "multinomial cluster sizes must be ≥ 1".into(),
        ));
    }
    if dict_size < n_classes {
        return Err(FineError::InvalidParameter(format!(
            "dictionary of {dict_size} terms cannot hold {n_classes} class blocks"
        )));
    }
    if !concentration.is_finite() || concentration <= 0.0 {
        return Err(FineError::InvalidParameter(
            "concentration must be positive and finite".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = dict_size / n_classes;
    let invalid = |e: &dyn std::fmt::Display| FineError::InvalidParameter(e.to_string());

    let mut class_probs = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let mut g = Vec::with_capacity(dict_size);
        for i in 0..dict_size {
            let in_block = i / block == c && i < block * n_classes;
            let shape = concentration + if in_block { 1.0 } else { 0.0 };
            let gamma = Gamma::new(shape, 1.0).map_err(|e| invalid(&e))?;
            g.push(gamma.sample(&mut rng));
        }
        let total: f64 = g.iter().sum();
        class_probs.push(g.into_iter().map(|x| x / total).collect::<Vec<f64>>());
    }

    let n_docs = n_classes * docs_per_class;
    let width = (n_docs - 1).to_string().len().max(3);
    let mut docs = Vec::with_capacity(n_docs);
    for (c, probs) in class_probs.iter().enumerate() {
        let sampler = WeightedIndex::new(probs).map_err(|e| invalid(&e))?;
        for j in 0..docs_per_class {
            let mut counts = vec![0u64; dict_size];
            for _ in 0..counts_per_doc {
                counts[sampler.sample(&mut rng)] += 1;
            }
            docs.push(TermDocument {
                id: format!("d{:0width$}", c * docs_per_class + j),
                counts,
                label: Some(c as i64),
            });
        }
    }
    Ok(MultinomialClusters {
        corpus: TermCorpus {
            docs,
            dict_size,
            label_names: BTreeMap::new(),
        },
        class_probs,
    })
}

/// Radius of a point in the swiss-roll plane `(y1, y3)`.
pub fn roll_radius(y: ArrayView1<f64>) -> f64 {
    y[0].hypot(y[2])
}
