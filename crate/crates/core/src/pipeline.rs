//! End-to-end embedding pipeline: load, fit densities, pairwise
//! dissimilarities, optional geodesic completion, and embedding.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datasets::{
    attach_doc_labels, load_collection, load_term_counts, parse_gaussian_params, CollectionFormat,
    DatasetCollection, GaussianParams, TermCorpus,
};
use crate::density::{corpus_pdfs, fit_kde, MultinomialPdf};
use crate::divergence::{build_dissimilarity_matrix, DissimilarityMatrix, Metric, PdfCollection};
use crate::embedding::{
    ccdr, classical_mds, laplacian_eigenmaps, pca_embed, EmbedMethod, Embedding, HeatParam,
    LemParams,
};
use crate::error::{FineError, Result};
use crate::geodesic::{
    build_neighbor_graph, default_k, ensure_connected, geodesic_distances, NeighborGraph,
};
use crate::io::{read_to_string, write_file};

/// Doc-label sidecar looked up next to a term-count file.
pub const DOC_LABELS_FILE: &str = "doc_labels.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdfKind {
    Kde,
    Multinomial,
    GaussianParams,
}

impl PdfKind {
    pub fn name(self) -> &'static str {
        match self {
            PdfKind::Kde => "kde",
            PdfKind::Multinomial => "multinomial",
            PdfKind::GaussianParams => "gaussian_params",
        }
    }
}

impl fmt::Display for PdfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PdfKind {
    type Err = FineError;

    fn from_str(s: &str) -> Result<Self> {
        [PdfKind::Kde, PdfKind::Multinomial, PdfKind::GaussianParams]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FineError::InvalidParameter(format!("unknown pdf kind `{s}`")))
    }
}

/// Optional limits checked after a run; exceeding one fails the run after
/// all artifacts are written.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_negative_eigen_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_clamped_kl: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bridged_edges: Option<usize>,
}

fn default_true() -> bool {
    true
}

fn default_dim() -> usize {
    2
}

/// Everything needed to reproduce one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub pdf_kind: PdfKind,
    pub metric: Metric,
    #[serde(default)]
    pub geodesic: bool,
    /// Geodesic graph neighbors; `max(3, ⌈log₂N⌉)` when absent.
    #[serde(default)]
    pub graph_k: Option<usize>,
    pub embed_method: EmbedMethod,
    #[serde(default = "default_dim")]
    pub embed_dim: usize,
    /// LEM/CCDR neighbors; `max(3, ⌈log₂N⌉)` when absent.
    #[serde(default)]
    pub k_neighbors: Option<usize>,
    #[serde(default)]
    pub heat_t: HeatParam,
    #[serde(default)]
    pub beta: f64,
    /// Bridge a disconnected LEM/CCDR neighbor graph instead of failing.
    #[serde(default)]
    pub lem_bridge: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: PathBuf,
    /// `long_csv` or `directory`; inferred from the input path when absent.
    #[serde(default)]
    pub input_format: Option<CollectionFormat>,
    #[serde(default)]
    pub dict_size: Option<usize>,
    /// `doc_id,label` file for term counts; `doc_labels.csv` beside the
    /// input is used when present.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Start from a saved dissimilarity matrix instead of fitting densities.
    #[serde(default)]
    pub from_distances: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub parallel: bool,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl PipelineConfig {
    pub fn new(
        input: impl Into<PathBuf>,
        pdf_kind: PdfKind,
        metric: Metric,
        embed_method: EmbedMethod,
    ) -> Self {
        PipelineConfig {
            input: input.into(),
            pdf_kind,
            metric,
            geodesic: false,
            graph_k: None,
            embed_method,
            embed_dim: default_dim(),
            k_neighbors: None,
            heat_t: HeatParam::Auto,
            beta: 0.0,
            lem_bridge: false,
            seed: 0,
            output: PathBuf::new(),
            input_format: None,
            dict_size: None,
            labels: None,
            from_distances: None,
            parallel: true,
            thresholds: Thresholds::default(),
        }
    }

    /// Accepts a bare config or a `run.json` that embeds one under `config`.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let inner = match v.get("config") {
            Some(c) if v.get("diagnostics").is_some() => c.clone(),
            _ => v,
        };
        Ok(serde_json::from_value(inner)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 1 {
            return Err(FineError::InvalidParameter("embed_dim must be ≥ 1".into()));
        }
        let supported = match self.pdf_kind {
            PdfKind::Kde => matches!(self.metric, Metric::FisherKl | Metric::EuclideanL2),
            PdfKind::Multinomial => matches!(
                self.metric,
                Metric::Hellinger | Metric::Cosine | Metric::EuclideanL2
            ),
            PdfKind::GaussianParams => true,
        };
        if !supported && self.from_distances.is_none() {
            return Err(FineError::MetricMismatch {
                metric: self.metric.name().into(),
                kind: self.pdf_kind.name().into(),
            });
        }
        if self.embed_method == EmbedMethod::Pca && self.from_distances.is_some() {
            return Err(FineError::InvalidParameter(
                "PCA needs the input vectors, not a dissimilarity matrix".into(),
            ));
        }
        self.lem_params(2)?;
        Ok(())
    }

    /// LEM parameters with the neighbor default resolved for `n` points.
    pub fn lem_params(&self, n: usize) -> Result<LemParams> {
        LemParams::new(
            self.k_neighbors.unwrap_or_else(|| default_k(n)).max(1),
            self.heat_t,
            self.beta,
        )
        .map(|p| p.with_bridge(self.lem_bridge))
    }
}

/// Pipeline stage names used in error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Density,
    Distances,
    Geodesic,
    Embed,
    Write,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Density => "density",
            Stage::Distances => "distances",
            Stage::Geodesic => "geodesic",
            Stage::Embed => "embed",
            Stage::Write => "write",
            Stage::Evaluate => "evaluate",
        })
    }
}

/// A module error tagged with the stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: FineError,
}

pub type StageResult<T> = std::result::Result<T, StageError>;

pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Parsed input data of any supported kind.
#[derive(Debug, Clone)]
pub enum InputData {
    Collection(DatasetCollection),
    Corpus(TermCorpus),
    Gaussian(Vec<GaussianParams>),
    /// Only a saved dissimilarity matrix is available.
    MatrixOnly,
}

#[derive(Debug, Clone)]
pub struct LoadedInput {
    pub ids: Vec<String>,
    pub labels: Vec<Option<i64>>,
    pub data: InputData,
}

impl LoadedInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Multinomial PDFs of a term-count corpus.
    pub fn multinomials(&self) -> Result<Vec<MultinomialPdf>> {
        match &self.data {
            InputData::Corpus(c) => corpus_pdfs(c),
            _ => Err(FineError::InvalidParameter(
                "input is not a term-count corpus".into(),
            )),
        }
    }

    /// Row vectors for PCA: set means, probability vectors or `(μ, σ)`.
    pub fn vectors(&self) -> Result<Array2<f64>> {
        match &self.data {
            InputData::Collection(c) => {
                let flat: Vec<f64> = c.sets().iter().flat_map(|s| s.mean()).collect();
                Ok(Array2::from_shape_vec((c.len(), c.dim()), flat).expect("consistent shape"))
            }
            InputData::Corpus(c) => {
                let pdfs = corpus_pdfs(c)?;
                let flat: Vec<f64> = pdfs.iter().flat_map(|p| p.probs().to_vec()).collect();
                Ok(Array2::from_shape_vec((pdfs.len(), c.dict_size), flat)
                    .expect("consistent shape"))
            }
            InputData::Gaussian(g) => {
                let flat: Vec<f64> = g.iter().flat_map(|p| [p.mu, p.sigma]).collect();
                Ok(Array2::from_shape_vec((g.len(), 2), flat).expect("consistent shape"))
            }
            InputData::MatrixOnly => Err(FineError::InvalidParameter(
                "no input vectors loaded".into(),
            )),
        }
    }
}

pub fn load_input(config: &PipelineConfig) -> Result<LoadedInput> {
    let path = &config.input;
    match config.pdf_kind {
        PdfKind::Kde => {
            let format = config.input_format.unwrap_or(if path.is_dir() {
                CollectionFormat::Directory
            } else {
                CollectionFormat::LongCsv
            });
            let c = load_collection(path, format)?;
            Ok(LoadedInput {
                ids: c.ids(),
                labels: c.labels(),
                data: InputData::Collection(c),
            })
        }
        PdfKind::Multinomial => {
            let mut corpus = load_term_counts(path, config.dict_size)?;
            let labels_path = config.labels.clone().or_else(|| {
                path.parent()
                    .map(|p| p.join(DOC_LABELS_FILE))
                    .filter(|p| p.is_file())
            });
            if let Some(lp) = labels_path {
                attach_doc_labels(&mut corpus, &read_to_string(&lp)?)?;
            }
            Ok(LoadedInput {
                ids: corpus.ids(),
                labels: corpus.labels(),
                data: InputData::Corpus(corpus),
            })
        }
        PdfKind::GaussianParams => {
            let rows = parse_gaussian_params(&read_to_string(path)?)?;
            let n = rows.len();
            let (ids, params): (Vec<String>, Vec<GaussianParams>) = rows.into_iter().unzip();
            Ok(LoadedInput {
                ids,
                labels: vec![None; n],
                data: InputData::Gaussian(params),
            })
        }
    }
}

/// Counters reported in `run.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub n_sets: usize,
    pub clamped_kl: usize,
    pub degenerate_bandwidth_sets: usize,
    pub graph_k: Option<usize>,
    pub graph_edges: Option<usize>,
    pub bridged_edges: usize,
    pub negative_eigen_mass: Option<f64>,
    pub padded_dims: usize,
    pub heat_t: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DistanceStage {
    pub matrix: DissimilarityMatrix,
    pub clamped_kl: usize,
    pub degenerate_bandwidth_sets: usize,
}

/// Fits densities and assembles the pairwise matrix.
pub fn compute_distances(
    input: &LoadedInput,
    metric: Metric,
    parallel: bool,
) -> StageResult<DistanceStage> {
    let ids = input.ids.clone();
    match &input.data {
        InputData::Collection(c) => {
            let kdes = c
                .sets()
                .iter()
                .map(|s| fit_kde(s, None))
                .collect::<Result<Vec<_>>>()
                .at(Stage::Density)?;
            let degenerate = kdes
                .iter()
                .filter(|k| k.degenerate().iter().any(|d| *d))
                .count();
            let b = build_dissimilarity_matrix(&PdfCollection::Kde(kdes), ids, metric, parallel)
                .at(Stage::Distances)?;
            Ok(DistanceStage {
                matrix: b.matrix,
                clamped_kl: b.clamped_kl,
                degenerate_bandwidth_sets: degenerate,
            })
        }
        InputData::Corpus(c) => {
            let pdfs = corpus_pdfs(c).at(Stage::Density)?;
            let b = build_dissimilarity_matrix(
                &PdfCollection::Multinomial(pdfs),
                ids,
                metric,
                parallel,
            )
            .at(Stage::Distances)?;
            Ok(DistanceStage {
                matrix: b.matrix,
                clamped_kl: 0,
                degenerate_bandwidth_sets: 0,
            })
        }
        InputData::Gaussian(g) => {
            let b = build_dissimilarity_matrix(
                &PdfCollection::GaussianParams(g.clone()),
                ids,
                metric,
                parallel,
            )
            .at(Stage::Distances)?;
            Ok(DistanceStage {
                matrix: b.matrix,
                clamped_kl: 0,
                degenerate_bandwidth_sets: 0,
            })
        }
        InputData::MatrixOnly => Err(FineError::InvalidParameter(
            "no densities to compare".into(),
        ))
        .at(Stage::Density),
    }
}

#[derive(Debug, Clone)]
pub struct GeodesicStage {
    pub graph: NeighborGraph,
    pub matrix: DissimilarityMatrix,
}

/// kNN graph, minimal bridging when needed, and all-pairs shortest paths.
/// A single set has nothing to connect and is returned as is.
pub fn compute_geodesic(
    d: &DissimilarityMatrix,
    graph_k: Option<usize>,
) -> Result<Option<GeodesicStage>> {
    let n = d.len();
    if n < 2 {
        return Ok(None);
    }
    let k = graph_k.unwrap_or_else(|| default_k(n));
    let graph = ensure_connected(&build_neighbor_graph(d, k)?, d);
    let matrix = geodesic_distances(&graph)?;
    Ok(Some(GeodesicStage { graph, matrix }))
}

/// Embeds a (possibly geodesic) matrix with the configured method.
pub fn embed_matrix(
    g: &DissimilarityMatrix,
    labels: &[Option<i64>],
    config: &PipelineConfig,
    vectors: Option<&Array2<f64>>,
) -> Result<Embedding> {
    let dim = config.embed_dim;
    let e = match config.embed_method {
        EmbedMethod::Cmds => classical_mds(g, dim)?,
        EmbedMethod::Lem => laplacian_eigenmaps(g, dim, &config.lem_params(g.len())?)?,
        EmbedMethod::Ccdr => ccdr(g, labels, dim, &config.lem_params(g.len())?)?,
        EmbedMethod::Pca => {
            let v = vectors
                .ok_or_else(|| FineError::InvalidParameter("PCA needs input vectors".into()))?;
            pca_embed(v.view(), dim, g.ids().to_vec())?
        }
    };
    e.with_labels(labels.to_vec())
}

/// Every artifact of one run, in memory.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    /// The input config with neighbor-count defaults filled in.
    pub config: PipelineConfig,
    pub distances: DistanceStage,
    pub geodesic: Option<GeodesicStage>,
    pub embedding: Embedding,
    pub diagnostics: RunDiagnostics,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    config: &'a PipelineConfig,
    diagnostics: &'a RunDiagnostics,
}

impl PipelineRun {
    pub fn run_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RunRecord {
            config: &self.config,
            diagnostics: &self.diagnostics,
        })?)
    }

    /// Writes `distances.csv`, `geodesic.csv` and `graph.csv` (when enabled),
    /// `embedding.csv`, `spectrum.json` and `run.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(
            &dir.join("distances.csv"),
            self.distances.matrix.to_csv().as_bytes(),
        )?;
        if let Some(g) = &self.geodesic {
            write_file(&dir.join("geodesic.csv"), g.matrix.to_csv().as_bytes())?;
            write_file(&dir.join("graph.csv"), g.graph.to_csv().as_bytes())?;
        }
        write_file(
            &dir.join("embedding.csv"),
            self.embedding.to_csv().as_bytes(),
        )?;
        write_file(
            &dir.join("spectrum.json"),
            self.embedding.sidecar_json()?.as_bytes(),
        )?;
        write_file(&dir.join("run.json"), self.run_json()?.as_bytes())
    }

    /// Threshold violations, if any.
    pub fn threshold_violations(&self) -> Vec<String> {
        let t = &self.config.thresholds;
        let d = &self.diagnostics;
        let mut out = Vec::new();
        if let (Some(max), Some(v)) = (t.max_negative_eigen_mass, d.negative_eigen_mass) {
            if v > max {
                out.push(format!("negative eigenvalue mass {v} exceeds {max}"));
            }
        }
        if let Some(max) = t.max_clamped_kl {
            if d.clamped_kl > max {
                out.push(format!(
                    "{} clamped KL estimates exceed {max}",
                    d.clamped_kl
                ));
            }
        }
        if let Some(max) = t.max_bridged_edges {
            if d.bridged_edges > max {
                out.push(format!("{} bridged edges exceed {max}", d.bridged_edges));
            }
        }
        out
    }
}

/// Loads the input (and, when configured, the saved matrix) and computes the
/// distance stage.
pub fn run_distances(config: &PipelineConfig) -> StageResult<(LoadedInput, DistanceStage)> {
    config.validate().at(Stage::Config)?;
    if let Some(path) = &config.from_distances {
        let text = read_to_string(path).at(Stage::Load)?;
        let matrix = DissimilarityMatrix::from_csv(&text, config.metric).at(Stage::Load)?;
        let input = if config.input.as_os_str().is_empty() {
            LoadedInput {
                ids: matrix.ids().to_vec(),
                labels: vec![None; matrix.len()],
                data: InputData::MatrixOnly,
            }
        } else {
            let input = load_input(config).at(Stage::Load)?;
            if input.ids != matrix.ids() {
                return Err(FineError::Format(
                    "matrix ids do not match the input ids".into(),
                ))
                .at(Stage::Load);
            }
            input
        };
        let stage = DistanceStage {
            matrix,
            clamped_kl: 0,
            degenerate_bandwidth_sets: 0,
        };
        return Ok((input, stage));
    }
    let input = load_input(config).at(Stage::Load)?;
    let stage = compute_distances(&input, config.metric, config.parallel)?;
    Ok((input, stage))
}

/// Runs every stage of the pipeline.
pub fn run_pipeline(config: &PipelineConfig) -> StageResult<PipelineRun> {
    let (input, distances) = run_distances(config)?;
    let geodesic = if config.geodesic {
        compute_geodesic(&distances.matrix, config.graph_k).at(Stage::Geodesic)?
    } else {
        None
    };
    let target = geodesic
        .as_ref()
        .map(|g| &g.matrix)
        .unwrap_or(&distances.matrix);
    let vectors = if config.embed_method == EmbedMethod::Pca {
        Some(input.vectors().at(Stage::Embed)?)
    } else {
        None
    };
    let embedding =
        embed_matrix(target, &input.labels, config, vectors.as_ref()).at(Stage::Embed)?;
    let diagnostics = RunDiagnostics {
        n_sets: input.len(),
        clamped_kl: distances.clamped_kl,
        degenerate_bandwidth_sets: distances.degenerate_bandwidth_sets,
        graph_k: geodesic.as_ref().map(|g| g.graph.k()),
        graph_edges: geodesic.as_ref().map(|g| g.graph.edges().len()),
        bridged_edges: geodesic.as_ref().map(|g| g.graph.bridged()).unwrap_or(0),
        negative_eigen_mass: embedding.diagnostics.negative_eigen_mass,
        padded_dims: embedding.diagnostics.padded_dims,
        heat_t: embedding.params.heat_t_resolved,
    };
    let mut resolved = config.clone();
    if let Some(g) = &geodesic {
        resolved.graph_k = Some(g.graph.k());
    }
    if let Some(lem) = embedding.params.lem {
        resolved.k_neighbors = Some(lem.k_neighbors);
    }
    Ok(PipelineRun {
        config: resolved,
        distances,
        geodesic,
        embedding,
        diagnostics,
    })
}
