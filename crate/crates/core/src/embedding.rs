//! Spectral embeddings of dissimilarity matrices and the downstream
//! classifiers used to evaluate them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::density::MultinomialPdf;
use crate::divergence::{cosine, DissimilarityMatrix};
use crate::error::{FineError, Result};
use crate::geodesic::{build_neighbor_graph, ensure_connected};
use crate::io::{csv_error, csv_reader, fmt_f64, parse_f64};
use crate::linalg::{canonical_sign, symmetric_eigen};

/// LEM eigenvalues below this are treated as the null space and dropped.
pub const LEM_NULL_TOL: f64 = 1e-9;

/// cMDS and PCA eigenvalues at or below this fraction of the largest
/// magnitude count as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMethod {
    Cmds,
    Lem,
    Ccdr,
    Pca,
}

impl EmbedMethod {
    pub const ALL: [EmbedMethod; 4] = [
        EmbedMethod::Cmds,
        EmbedMethod::Lem,
        EmbedMethod::Ccdr,
        EmbedMethod::Pca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmbedMethod::Cmds => "cmds",
            EmbedMethod::Lem => "lem",
            EmbedMethod::Ccdr => "ccdr",
            EmbedMethod::Pca => "pca",
        }
    }
}

impl fmt::Display for EmbedMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmbedMethod {
    type Err = FineError;

    fn from_str(s: &str) -> Result<Self> {
        EmbedMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FineError::InvalidParameter(format!("unknown embedding method `{s}`")))
    }
}

/// Heat-kernel scale for LEM weights `exp(−D²/t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum HeatParam {
    /// Mean squared dissimilarity over the neighbor-graph edges.
    #[default]
    Auto,
    Finite(f64),
    /// Unit weight on every graph edge.
    Infinite,
}

impl HeatParam {
    pub fn validate(self) -> Result<()> {
        match self {
            HeatParam::Finite(t) if !(t.is_finite() && t > 0.0) => Err(
                FineError::InvalidParameter(format!("heat_t must be positive, got {t}")),
            ),
            _ => Ok(()),
        }
    }
}

impl FromStr for HeatParam {
    type Err = FineError;

    /// `auto`, `inf` or a positive number.
    fn from_str(s: &str) -> Result<Self> {
        let h = match s.trim() {
            "auto" => HeatParam::Auto,
            "inf" | "infinity" | "∞" => HeatParam::Infinite,
            other => HeatParam::Finite(
                other
                    .parse()
                    .map_err(|_| FineError::InvalidParameter(format!("bad heat_t `{other}`")))?,
            ),
        };
        h.validate()?;
        Ok(h)
    }
}

impl fmt::Display for HeatParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeatParam::Auto => f.write_str("auto"),
            HeatParam::Infinite => f.write_str("inf"),
            HeatParam::Finite(t) => write!(f, "{t}"),
        }
    }
}

impl Serialize for HeatParam {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HeatParam::Finite(t) => s.serialize_f64(*t),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for HeatParam {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let parsed = match &v {
            serde_json::Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| FineError::InvalidParameter("bad heat_t".into()))
                .and_then(|t| {
                    let h = HeatParam::Finite(t);
                    h.validate().map(|_| h)
                }),
            serde_json::Value::String(s) => s.parse(),
            serde_json::Value::Null => Ok(HeatParam::Auto),
            _ => Err(FineError::InvalidParameter(format!("bad heat_t {v}"))),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Neighborhood size, heat scale and label emphasis for LEM and CCDR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemParams {
    pub k_neighbors: usize,
    #[serde(default)]
    pub heat_t: HeatParam,
    #[serde(default)]
    pub label_weight_beta: f64,
    /// Join the components of a disconnected neighbor graph with minimal
    /// bridging edges instead of failing.
    #[serde(default)]
    pub bridge: bool,
}

impl LemParams {
    pub fn new(k_neighbors: usize, heat_t: HeatParam, label_weight_beta: f64) -> Result<Self> {
        let p = LemParams {
            k_neighbors,
            heat_t,
            label_weight_beta,
            bridge: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_bridge(mut self, bridge: bool) -> Self {
        self.bridge = bridge;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 1 {
            return Err(FineError::InvalidParameter(
                "k_neighbors must be ≥ 1".into(),
            ));
        }
        if !(self.label_weight_beta.is_finite() && self.label_weight_beta >= 0.0) {
            return Err(FineError::InvalidParameter(
                "label_weight_beta must be finite and ≥ 0".into(),
            ));
        }
        self.heat_t.validate()
    }
}

/// Method-specific record written alongside an embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedParams {
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lem: Option<LemParams>,
    /// Heat scale actually used, after resolving `auto`; absent for `inf`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heat_t_resolved: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbedDiagnostics {
    /// `Σ|λ_neg| / Σ|λ|` of the double-centered matrix (cMDS only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_eigen_mass: Option<f64>,
    /// Trailing axes filled with zeros because the spectrum ran out.
    pub padded_dims: usize,
    /// Null-space eigenpairs dropped (LEM/CCDR only).
    pub discarded_eigenvalues: usize,
}

/// Low-dimensional coordinates, one row per set.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub ids: Vec<String>,
    pub labels: Vec<Option<i64>>,
    pub coords: Array2<f64>,
    pub spectrum: Vec<f64>,
    pub method: EmbedMethod,
    pub params: EmbedParams,
    pub diagnostics: EmbedDiagnostics,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    method: EmbedMethod,
    spectrum: Vec<f64>,
    params: EmbedParams,
    diagnostics: EmbedDiagnostics,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn with_labels(mut self, labels: Vec<Option<i64>>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(FineError::Dimension {
                expected: self.len(),
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    /// Leading `d` axes.
    pub fn truncate(&self, d: usize) -> Result<Embedding> {
        if d < 1 || d > self.dim() {
            return Err(FineError::InvalidParameter(format!(
                "cannot truncate a {}-dimensional embedding to {d}",
                self.dim()
            )));
        }
        let mut out = self.clone();
        out.coords = self.coords.slice(ndarray::s![.., ..d]).to_owned();
        out.spectrum.truncate(d);
        out.params.dim = d;
        out.diagnostics.padded_dims = self.diagnostics.padded_dims.saturating_sub(self.dim() - d);
        Ok(out)
    }

    /// `set_id,label,y1,...,yd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("set_id,label");
        for k in 1..=self.dim() {
            out.push_str(&format!(",y{k}"));
        }
        out.push('\n');
        for (i, row) in self.coords.rows().into_iter().enumerate() {
            out.push_str(&self.ids[i]);
            out.push(',');
            if let Some(l) = self.labels[i] {
                out.push_str(&l.to_string());
            }
            for x in row {
                out.push(',');
                out.push_str(&fmt_f64(*x));
            }
            out.push('\n');
        }
        out
    }

    /// Spectrum, method, parameters and diagnostics as pretty JSON.
    pub fn sidecar_json(&self) -> Result<String> {
        let s = Sidecar {
            method: self.method,
            spectrum: self.spectrum.clone(),
            params: self.params.clone(),
            diagnostics: self.diagnostics.clone(),
        };
        Ok(serde_json::to_string_pretty(&s)?)
    }

    pub fn from_csv(text: &str, sidecar_json: &str) -> Result<Embedding> {
        let side: Sidecar = serde_json::from_str(sidecar_json)?;
        let (ids, labels, coords) = parse_embedding_csv(text)?;
        Ok(Embedding {
            ids,
            labels,
            coords,
            spectrum: side.spectrum,
            method: side.method,
            params: side.params,
            diagnostics: side.diagnostics,
        })
    }
}

/// Ids, optional labels and coordinates of an `embedding.csv`.
pub type EmbeddingRows = (Vec<String>, Vec<Option<i64>>, Array2<f64>);

/// Reads `set_id,label,y1,...,yd` rows.
pub fn parse_embedding_csv(text: &str) -> Result<EmbeddingRows> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.len() < 3 || &header[0] != "set_id" || &header[1] != "label" {
        return Err(FineError::Format(
            "header must be `set_id,label,y1,...,yd`".into(),
        ));
    }
    let d = header.len() - 2;
    let (mut ids, mut labels, mut flat) = (Vec::new(), Vec::new(), Vec::new());
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(csv_error)?;
        if record.len() != header.len() {
            return Err(FineError::Format(format!("row {row}: wrong column count")));
        }
        ids.push(record[0].to_string());
        labels.push(if record[1].is_empty() {
            None
        } else {
            Some(record[1].parse().map_err(|_| FineError::Parse {
                row,
                message: format!("label `{}` is not an integer", &record[1]),
            })?)
        });
        for k in 0..d {
            flat.push(parse_f64(&record[k + 2], row, &header[k + 2])?);
        }
    }
    if ids.is_empty() {
        return Err(FineError::EmptyInput("embedding has no rows".into()));
    }
    let coords = Array2::from_shape_vec((ids.len(), d), flat)
        .map_err(|e| FineError::Format(e.to_string()))?;
    Ok((ids, labels, coords))
}

/// Flips each column so its first non-negligible entry is positive.
fn canonicalize(coords: &mut Array2<f64>) {
    for mut col in coords.columns_mut() {
        let v: Vec<f64> = col.to_vec();
        if canonical_sign(&v) < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

/// Classical MDS of `−½ H D² H`. Axes with non-positive eigenvalues are
/// zero-filled and their count reported.
pub fn classical_mds(d: &DissimilarityMatrix, dim: usize) -> Result<Embedding> {
    let n = d.len();
    if dim < 1 || dim > n {
        return Err(FineError::InvalidParameter(format!(
            "cMDS dimension {dim} must lie in [1, {n}]"
        )));
    }
    // Double centering with a single final division:
    // b_ij = −(N²·d²_ij − N·R_i − N·R_j + T) / (2N²) with row sums R and total T.
    let sq = d.values().mapv(|x| x * x);
    let nf = n as f64;
    let row_sum: Vec<f64> = sq.rows().into_iter().map(|r| r.sum()).collect();
    let total = row_sum.iter().sum::<f64>();
    let denom = 2.0 * nf * nf;
    let mut b = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = -(nf * nf * sq[[i, j]] - nf * row_sum[i] - nf * row_sum[j] + total) / denom;
            b[[i, j]] = v;
            b[[j, i]] = v;
        }
    }
    let eig = symmetric_eigen(&b)?;
    let abs_total: f64 = eig.values.iter().map(|x| x.abs()).sum();
    let neg_total: f64 = eig.values.iter().filter(|x| **x < 0.0).map(|x| -x).sum();
    let scale = eig.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut coords = Array2::zeros((n, dim));
    let mut padded = 0;
    for k in 0..dim {
        let lambda = eig.values[k];
        if lambda > RANK_TOL * scale {
            let s = lambda.sqrt();
            for i in 0..n {
                coords[[i, k]] = eig.vectors[[i, k]] * s;
            }
        } else {
            padded += 1;
        }
    }
    if padded > 0 {
        log::warn!(
            "cMDS: {padded} of {dim} requested axes have no positive eigenvalue; zero-padded"
        );
    }
    canonicalize(&mut coords);
    Ok(Embedding {
        ids: d.ids().to_vec(),
        labels: vec![None; n],
        coords,
        spectrum: eig.values.iter().take(dim).copied().collect(),
        method: EmbedMethod::Cmds,
        params: EmbedParams {
            dim,
            lem: None,
            heat_t_resolved: None,
        },
        diagnostics: EmbedDiagnostics {
            negative_eigen_mass: Some(if abs_total > 0.0 {
                neg_total / abs_total
            } else {
                0.0
            }),
            padded_dims: padded,
            discarded_eigenvalues: 0,
        },
    })
}

/// Heat-kernel weights on the symmetric-union kNN graph of `d`.
/// Returns the dense weight matrix and the resolved heat scale.
pub fn heat_weights(
    d: &DissimilarityMatrix,
    params: &LemParams,
) -> Result<(Array2<f64>, Option<f64>)> {
    params.validate()?;
    let n = d.len();
    if params.k_neighbors > n.saturating_sub(1) {
        return Err(FineError::InvalidParameter(format!(
            "k_neighbors {} exceeds N − 1 = {}",
            params.k_neighbors,
            n.saturating_sub(1)
        )));
    }
    let mut graph = build_neighbor_graph(d, params.k_neighbors)?;
    if params.bridge {
        graph = ensure_connected(&graph, d);
    }
    if !graph.connected() {
        return Err(FineError::DisconnectedGraph {
            components: graph.components(),
        });
    }
    let t = match params.heat_t {
        HeatParam::Infinite => None,
        HeatParam::Finite(t) => Some(t),
        HeatParam::Auto => {
            let m = graph
                .edges()
                .iter()
                .map(|e| e.weight * e.weight)
                .sum::<f64>()
                / graph.edges().len() as f64;
            Some(if m > 0.0 { m } else { 1.0 })
        }
    };
    let mut w = Array2::zeros((n, n));
    for e in graph.edges() {
        let v = match t {
            Some(t) => (-(e.weight * e.weight) / t).exp(),
            None => 1.0,
        };
        w[[e.i, e.j]] = v;
        w[[e.j, e.i]] = v;
    }
    Ok((w, t))
}

/// Laplacian Eigenmaps: generalized problem `L f = λ D f` on heat-kernel
/// weights, returning the `dim` smallest non-null eigenvectors.
pub fn laplacian_eigenmaps(
    d: &DissimilarityMatrix,
    dim: usize,
    params: &LemParams,
) -> Result<Embedding> {
    let (w, t) = heat_weights(d, params)?;
    spectral_embedding(d, w, t, dim, params, EmbedMethod::Lem)
}

/// Classification-constrained variant of LEM: every pair of points sharing a
/// label gains `β` weight on top of its heat-kernel weight. Unlabeled points
/// get no extra weight, so test points embed jointly with training points.
pub fn ccdr(
    d: &DissimilarityMatrix,
    labels: &[Option<i64>],
    dim: usize,
    params: &LemParams,
) -> Result<Embedding> {
    if labels.len() != d.len() {
        return Err(FineError::Dimension {
            expected: d.len(),
            got: labels.len(),
        });
    }
    let (mut w, t) = heat_weights(d, params)?;
    let beta = params.label_weight_beta;
    if beta > 0.0 {
        let n = d.len();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    if let (Some(a), Some(b)) = (labels[i], labels[j]) {
                        if a == b {
                            w[[i, j]] += beta;
                        }
                    }
                }
            }
        }
    }
    let mut e = spectral_embedding(d, w, t, dim, params, EmbedMethod::Ccdr)?;
    e.labels = labels.to_vec();
    Ok(e)
}

fn spectral_embedding(
    d: &DissimilarityMatrix,
    w: Array2<f64>,
    heat_t: Option<f64>,
    dim: usize,
    params: &LemParams,
    method: EmbedMethod,
) -> Result<Embedding> {
    let n = d.len();
    if dim < 1 {
        return Err(FineError::InvalidParameter("dimension must be ≥ 1".into()));
    }
    let degree: Vec<f64> = w.rows().into_iter().map(|r| r.sum()).collect();
    if degree.iter().any(|x| *x <= 0.0) {
        let isolated = degree.iter().filter(|x| **x <= 0.0).count();
        return Err(FineError::DisconnectedGraph {
            components: isolated + 1,
        });
    }
    let s: Vec<f64> = degree.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = 1.0 - w[[i, i]] / degree[i];
        for j in i + 1..n {
            let v = -w[[i, j]] * s[i] * s[j];
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    let eig = symmetric_eigen(&m)?;
    let kept: Vec<usize> = eig
        .ascending()
        .filter(|&k| eig.values[k] >= LEM_NULL_TOL)
        .collect();
    let discarded = n - kept.len();
    if kept.len() < dim {
        return Err(FineError::InsufficientSpectrum {
            requested: dim,
            available: kept.len(),
        });
    }
    let mut coords = Array2::zeros((n, dim));
    for (c, &k) in kept.iter().take(dim).enumerate() {
        for i in 0..n {
            coords[[i, c]] = eig.vectors[[i, k]] * s[i];
        }
    }
    canonicalize(&mut coords);
    Ok(Embedding {
        ids: d.ids().to_vec(),
        labels: vec![None; n],
        coords,
        spectrum: kept.iter().take(dim).map(|&k| eig.values[k]).collect(),
        method,
        params: EmbedParams {
            dim,
            lem: Some(*params),
            heat_t_resolved: heat_t,
        },
        diagnostics: EmbedDiagnostics {
            negative_eigen_mass: None,
            padded_dims: 0,
            discarded_eigenvalues: discarded,
        },
    })
}

/// PCA projection of row vectors onto the top `dim` covariance axes.
/// Uses the Gram matrix when there are fewer rows than columns.
pub fn pca_embed(vectors: ArrayView2<f64>, dim: usize, ids: Vec<String>) -> Result<Embedding> {
    let (n, m) = vectors.dim();
    if ids.len() != n {
        return Err(FineError::Dimension {
            expected: n,
            got: ids.len(),
        });
    }
    if dim < 1 || dim > n.min(m) {
        return Err(FineError::InvalidParameter(format!(
            "PCA dimension {dim} must lie in [1, {}]",
            n.min(m)
        )));
    }
    let mean = vectors.mean_axis(Axis(0)).expect("non-empty");
    let x = &vectors - &mean;
    let denom = (n.max(2) - 1) as f64;
    let mut coords = Array2::zeros((n, dim));
    let mut spectrum = Vec::with_capacity(dim);
    let mut padded = 0;
    if n < m {
        let gram = symmetrized(x.dot(&x.t()));
        let eig = symmetric_eigen(&gram)?;
        let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in 0..dim {
            let lambda = eig.values[k];
            spectrum.push(lambda / denom);
            if lambda > RANK_TOL * scale {
                let s = lambda.sqrt();
                for i in 0..n {
                    coords[[i, k]] = eig.vectors[[i, k]] * s;
                }
            } else {
                padded += 1;
            }
        }
    } else {
        let cov = symmetrized(x.t().dot(&x) / denom);
        let eig = symmetric_eigen(&cov)?;
        let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in 0..dim {
            let lambda = eig.values[k];
            spectrum.push(lambda);
            if lambda > RANK_TOL * scale {
                let axis = eig.vectors.column(k);
                for i in 0..n {
                    coords[[i, k]] = x.row(i).dot(&axis);
                }
            } else {
                padded += 1;
            }
        }
    }
    if padded > 0 {
        log::warn!("PCA: data rank is below {dim}; {padded} axes zero-padded");
    }
    canonicalize(&mut coords);
    Ok(Embedding {
        ids,
        labels: vec![None; n],
        coords,
        spectrum,
        method: EmbedMethod::Pca,
        params: EmbedParams {
            dim,
            lem: None,
            heat_t_resolved: None,
        },
        diagnostics: EmbedDiagnostics {
            negative_eigen_mass: None,
            padded_dims: padded,
            discarded_eigenvalues: 0,
        },
    })
}

fn symmetrized(mut a: Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            a[[j, i]] = a[[i, j]];
        }
    }
    a
}

/// Euclidean k-nearest-neighbor vote. Neighbor ties go to the lower training
/// index; vote ties go to the label with the smallest mean neighbor distance,
/// then to the smallest label.
pub fn knn_classify(
    train: ArrayView2<f64>,
    train_labels: &[i64],
    test: ArrayView2<f64>,
    k: usize,
) -> Result<Vec<i64>> {
    let n = train.nrows();
    if n == 0 {
        return Err(FineError::InsufficientSamples { needed: 1, got: 0 });
    }
    if train_labels.len() != n {
        return Err(FineError::Dimension {
            expected: n,
            got: train_labels.len(),
        });
    }
    if train.ncols() != test.ncols() {
        return Err(FineError::Dimension {
            expected: train.ncols(),
            got: test.ncols(),
        });
    }
    if k < 1 || k > n {
        return Err(FineError::InvalidParameter(format!(
            "k = {k} must lie in [1, {n}]"
        )));
    }
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    Ok(test
        .rows()
        .into_iter()
        .map(|x| {
            dist.clear();
            for (j, t) in train.rows().into_iter().enumerate() {
                let d2: f64 = x.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                dist.push((d2.sqrt(), j));
            }
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
            for &(d, j) in &dist[..k] {
                let e = votes.entry(train_labels[j]).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += d;
            }
            votes
                .into_iter()
                .min_by(|(la, (ca, sa)), (lb, (cb, sb))| {
                    cb.cmp(ca)
                        .then((sa / *ca as f64).total_cmp(&(sb / *cb as f64)))
                        .then(la.cmp(lb))
                })
                .map(|(l, _)| l)
                .expect("k ≥ 1")
        })
        .collect())
}

/// Sign of the exponent on the `(4πt)` prefactor of the diffusion kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefactorSign {
    /// `(4πt)^{+n/2}`.
    #[default]
    Positive,
    /// `(4πt)^{−n/2}`, the heat-kernel normalization.
    Negative,
}

/// `ln K(p, q)` for the multinomial diffusion kernel
/// `K = (4πt)^{±n/2} exp(−arccos²(Σ√(p_i q_i)) / t)`.
pub fn log_diffusion_kernel(
    p: &MultinomialPdf,
    q: &MultinomialPdf,
    t: f64,
    n_dims: usize,
    sign: PrefactorSign,
) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(FineError::InvalidParameter(format!(
            "t must be positive, got {t}"
        )));
    }
    let half_angle = cosine(p, q)? / 2.0;
    let s = match sign {
        PrefactorSign::Positive => 1.0,
        PrefactorSign::Negative => -1.0,
    };
    Ok(s * 0.5 * n_dims as f64 * (4.0 * PI * t).ln() - half_angle * half_angle / t)
}

/// The diffusion kernel itself; overflows to infinity for large `n_dims`,
/// where [`log_diffusion_kernel`] should be used instead.
pub fn diffusion_kernel(
    p: &MultinomialPdf,
    q: &MultinomialPdf,
    t: f64,
    n_dims: usize,
    sign: PrefactorSign,
) -> Result<f64> {
    log_diffusion_kernel(p, q, t, n_dims, sign).map(f64::exp)
}

/// Assigns each test PDF to the class whose training PDFs have the largest
/// mean similarity `exp(−arccos²(Σ√(p_i q_i)) / t)`. The constant prefactor
/// does not affect the ranking and is omitted. Ties go to the smallest label.
pub fn kernel_nearest_mean(
    train: &[MultinomialPdf],
    train_labels: &[i64],
    test: &[MultinomialPdf],
    t: f64,
) -> Result<Vec<i64>> {
    if train.is_empty() {
        return Err(FineError::InsufficientSamples { needed: 1, got: 0 });
    }
    if train_labels.len() != train.len() {
        return Err(FineError::Dimension {
            expected: train.len(),
            got: train_labels.len(),
        });
    }
    test.iter()
        .map(|x| {
            let mut sums: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
            for (p, l) in train.iter().zip(train_labels) {
                let k = log_diffusion_kernel(x, p, t, 0, PrefactorSign::Positive)?.exp();
                let e = sums.entry(*l).or_insert((0.0, 0));
                e.0 += k;
                e.1 += 1;
            }
            Ok(sums
                .into_iter()
                .map(|(l, (s, c))| (l, s / c as f64))
                .fold(None, |best: Option<(i64, f64)>, (l, m)| match best {
                    Some((_, bm)) if bm >= m => best,
                    _ => Some((l, m)),
                })
                .expect("non-empty training set")
                .0)
        })
        .collect()
}
