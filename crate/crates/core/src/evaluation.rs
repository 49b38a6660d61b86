//! Validation and evaluation drivers: geodesic convergence on Gaussian
//! grids, cross-validated classification of embeddings, and plot data.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{gaussian_parameter_grid, GaussianParams};
use crate::divergence::{fisher_gaussian_closed, kl_gaussian_closed, DissimilarityMatrix, Metric};
use crate::embedding::{kernel_nearest_mean, knn_classify, Embedding};
use crate::error::{FineError, Result};
use crate::geodesic::{build_neighbor_graph, default_k, ensure_connected, geodesic_distances};
use crate::io::{fmt_f64, write_file};
use crate::pipeline::{
    compute_geodesic, embed_matrix, run_distances, AtStage, PipelineConfig, Stage, StageResult,
};

/// Parameter range of the convergence grids.
pub const CONVERGENCE_MU_RANGE: (f64, f64) = (0.0, 1.0);
pub const CONVERGENCE_SIGMA_RANGE: (f64, f64) = (1.0, 2.0);

/// Grid size `mu_steps × sigma_steps`; written `r` for a square grid or
/// `MxS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub mu_steps: usize,
    pub sigma_steps: usize,
}

impl Resolution {
    pub fn square(r: usize) -> Self {
        Resolution {
            mu_steps: r,
            sigma_steps: r,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.mu_steps, self.sigma_steps)
    }
}

impl FromStr for Resolution {
    type Err = FineError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || FineError::InvalidParameter(format!("bad resolution `{s}`"));
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match s.split_once(['x', 'X']) {
            Some((m, g)) => Ok(Resolution {
                mu_steps: parse(m)?,
                sigma_steps: parse(g)?,
            }),
            None => parse(s).map(Resolution::square),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub resolution: Resolution,
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
}

/// Approximate Fisher distance between adjacent-or-not grid densities:
/// `√(2·KL(p_i → p_j))` taken from the lower to the higher grid index.
fn kl_edge_matrix(params: &[GaussianParams], ids: Vec<String>) -> Result<DissimilarityMatrix> {
    let n = params.len();
    let mut v = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let d = (2.0 * kl_gaussian_closed(params[i], params[j]))
                .max(0.0)
                .sqrt();
            v[[i, j]] = d;
            v[[j, i]] = d;
        }
    }
    DissimilarityMatrix::new(v, Metric::FisherKl, ids)
}

/// Geodesic estimate between the first and last grid densities against the
/// closed-form Fisher distance.
pub fn convergence_point(res: Resolution) -> Result<ConvergenceRow> {
    let grid = gaussian_parameter_grid(
        CONVERGENCE_MU_RANGE,
        CONVERGENCE_SIGMA_RANGE,
        res.mu_steps,
        res.sigma_steps,
    )?;
    let n = grid.params.len();
    if n < 2 {
        return Err(FineError::InsufficientSamples { needed: 2, got: n });
    }
    let d = kl_edge_matrix(&grid.params, grid.ids())?;
    let graph = ensure_connected(&build_neighbor_graph(&d, default_k(n))?, &d);
    let g = geodesic_distances(&graph)?;
    let estimate = g.get(0, n - 1);
    let exact = fisher_gaussian_closed(grid.params[0], grid.params[n - 1]);
    Ok(ConvergenceRow {
        resolution: res,
        estimate,
        exact,
        abs_error: (estimate - exact).abs(),
    })
}

pub fn convergence_report(resolutions: &[Resolution]) -> Result<Vec<ConvergenceRow>> {
    if resolutions.is_empty() {
        return Err(FineError::InvalidParameter("no resolutions given".into()));
    }
    resolutions.iter().map(|r| convergence_point(*r)).collect()
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("resolution,estimate,exact,abs_error\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.resolution,
            fmt_f64(r.estimate),
            fmt_f64(r.exact),
            fmt_f64(r.abs_error)
        ));
    }
    s
}

/// Classifier applied to held-out items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Classifier {
    /// Euclidean kNN vote in the embedding.
    Knn { k: usize },
    /// Nearest class by mean diffusion-kernel similarity on the raw
    /// multinomials; no embedding is computed.
    KernelNearestMean { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifySettings {
    pub classifier: Classifier,
    pub folds: usize,
    pub train_frac: f64,
    pub seed: u64,
    /// Label weights to compare; each fold is embedded once per value.
    pub betas: Vec<f64>,
    /// Embedding dimensions to compare; empty means the configured one.
    pub dims: Vec<usize>,
}

impl ClassifySettings {
    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 {
            return Err(FineError::InvalidParameter("folds must be ≥ 1".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(FineError::InvalidParameter(format!(
                "train_frac must lie in (0, 1), got {}",
                self.train_frac
            )));
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(FineError::InvalidParameter(
                "betas must be finite and ≥ 0".into(),
            ));
        }
        if self.dims.contains(&0) {
            return Err(FineError::InvalidParameter("dimensions must be ≥ 1".into()));
        }
        match self.classifier {
            Classifier::Knn { k: 0 } => {
                Err(FineError::InvalidParameter("knn k must be ≥ 1".into()))
            }
            Classifier::KernelNearestMean { t } if !(t.is_finite() && t > 0.0) => Err(
                FineError::InvalidParameter("kernel t must be positive".into()),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResult {
    pub beta: Option<f64>,
    pub dim: Option<usize>,
    pub mean: f64,
    /// Sample standard deviation over folds; 0 for a single fold.
    pub std: f64,
    pub per_fold: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub classifier: Classifier,
    pub folds: usize,
    pub train_frac: f64,
    pub seed: u64,
    pub fold_seeds: Vec<u64>,
    pub results: Vec<ClassifyResult>,
    /// Highest mean accuracy; the first listed wins ties.
    pub best: ClassifyResult,
}

/// Per-fold seeds drawn from one generator seeded with `seed`.
pub fn fold_seeds(seed: u64, folds: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..folds).map(|_| rng.next_u64()).collect()
}

/// Stratified split: within each class (ascending label order), indices are
/// shuffled and the first `round(train_frac·n_c)` go to training. Unlabeled
/// items join neither side. Returns sorted `(train, test)` indices.
pub fn stratified_split(
    labels: &[Option<i64>],
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut by_class: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = l {
            by_class.entry(*l).or_default().push(i);
        }
    }
    if by_class.is_empty() {
        return Err(FineError::MissingLabel("no labeled items to split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, mut idx) in by_class {
        idx.shuffle(&mut rng);
        let n_train = (train_frac * idx.len() as f64).round() as usize;
        if n_train == 0 {
            return Err(FineError::Stratification(label));
        }
        let n_train = n_train.min(idx.len());
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    if test.is_empty() {
        return Err(FineError::InvalidParameter(
            "split leaves no test items".into(),
        ));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn accuracy(pred: &[i64], truth: &[i64]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

fn summarize(beta: Option<f64>, dim: Option<usize>, per_fold: Vec<f64>) -> ClassifyResult {
    let n = per_fold.len() as f64;
    let mean = per_fold.iter().sum::<f64>() / n;
    let std = if per_fold.len() > 1 {
        (per_fold
            .iter()
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    ClassifyResult {
        beta,
        dim,
        mean,
        std,
        per_fold,
    }
}

/// Repeated stratified cross validation. Each fold embeds all items jointly
/// with test labels withheld, once per `β` at the largest requested
/// dimension; smaller dimensions use the leading coordinates.
pub fn eval_classify(
    config: &PipelineConfig,
    settings: &ClassifySettings,
) -> StageResult<ClassifyReport> {
    settings.validate().at(Stage::Config)?;
    let (input, distances) = run_distances(config)?;
    let labels = input.labels.clone();
    let truth =
        |idx: &[usize]| -> Vec<i64> { idx.iter().map(|&i| labels[i].expect("labeled")).collect() };
    let seeds = fold_seeds(settings.seed, settings.folds);
    let splits = seeds
        .iter()
        .map(|s| stratified_split(&labels, settings.train_frac, *s))
        .collect::<Result<Vec<_>>>()
        .at(Stage::Evaluate)?;

    let results = match settings.classifier {
        Classifier::KernelNearestMean { t } => {
            let pdfs = input.multinomials().at(Stage::Density)?;
            let per_fold = splits
                .iter()
                .map(|(train, test)| {
                    let tr: Vec<_> = train.iter().map(|&i| pdfs[i].clone()).collect();
                    let te: Vec<_> = test.iter().map(|&i| pdfs[i].clone()).collect();
                    let pred = kernel_nearest_mean(&tr, &truth(train), &te, t)?;
                    Ok(accuracy(&pred, &truth(test)))
                })
                .collect::<Result<Vec<_>>>()
                .at(Stage::Evaluate)?;
            vec![summarize(None, None, per_fold)]
        }
        Classifier::Knn { k } => {
            let target = if config.geodesic {
                compute_geodesic(&distances.matrix, config.graph_k)
                    .at(Stage::Geodesic)?
                    .map(|g| g.matrix)
                    .unwrap_or_else(|| distances.matrix.clone())
            } else {
                distances.matrix.clone()
            };
            let vectors = if config.embed_method == crate::embedding::EmbedMethod::Pca {
                Some(input.vectors().at(Stage::Embed)?)
            } else {
                None
            };
            let dims = if settings.dims.is_empty() {
                vec![config.embed_dim]
            } else {
                settings.dims.clone()
            };
            let max_dim = *dims.iter().max().expect("non-empty");
            let run_fold = |(train, test): &(Vec<usize>, Vec<usize>)| -> Result<Vec<Vec<f64>>> {
                let mut masked = vec![None; labels.len()];
                for &i in train {
                    masked[i] = labels[i];
                }
                let (tr_y, te_y) = (truth(train), truth(test));
                settings
                    .betas
                    .iter()
                    .map(|beta| {
                        let mut c = config.clone();
                        c.embed_dim = max_dim;
                        c.beta = *beta;
                        let e = embed_matrix(&target, &masked, &c, vectors.as_ref())?;
                        dims.iter()
                            .map(|d| {
                                let coords = e.truncate(*d)?.coords;
                                let pred = knn_classify(
                                    coords.select(Axis(0), train).view(),
                                    &tr_y,
                                    coords.select(Axis(0), test).view(),
                                    k.min(train.len()),
                                )?;
                                Ok(accuracy(&pred, &te_y))
                            })
                            .collect()
                    })
                    .collect()
            };
            let per_fold: Vec<Vec<Vec<f64>>> = if config.parallel {
                splits.par_iter().map(run_fold).collect::<Result<_>>()
            } else {
                splits.iter().map(run_fold).collect::<Result<_>>()
            }
            .at(Stage::Evaluate)?;
            let mut out = Vec::new();
            for (bi, beta) in settings.betas.iter().enumerate() {
                for (di, d) in dims.iter().enumerate() {
                    let acc = per_fold.iter().map(|f| f[bi][di]).collect();
                    out.push(summarize(Some(*beta), Some(*d), acc));
                }
            }
            out
        }
    };
    let best = results
        .iter()
        .fold(None::<&ClassifyResult>, |b, r| match b {
            Some(b) if b.mean >= r.mean => Some(b),
            _ => Some(r),
        })
        .expect("non-empty")
        .clone();
    Ok(ClassifyReport {
        classifier: settings.classifier,
        folds: settings.folds,
        train_frac: settings.train_frac,
        seed: settings.seed,
        fold_seeds: seeds,
        results,
        best,
    })
}

fn dat_rows(e: &Embedding, rows: &[usize]) -> String {
    let mut s = String::new();
    for &i in rows {
        let line: Vec<String> = e.coords.row(i).iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// Splits embedding rows into whitespace-separated `class_<label>.dat`
/// files, or one `all.dat` when `by_label` is false. Row order is kept.
pub fn plot_data(e: &Embedding, by_label: bool, dir: &Path) -> Result<Vec<PathBuf>> {
    if !by_label {
        let p = dir.join("all.dat");
        write_file(
            &p,
            dat_rows(e, &(0..e.len()).collect::<Vec<_>>()).as_bytes(),
        )?;
        return Ok(vec![p]);
    }
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, l) in e.labels.iter().enumerate() {
        match l {
            Some(l) => groups.entry(*l).or_default().push(i),
            None => return Err(FineError::MissingLabel(e.ids[i].clone())),
        }
    }
    groups
        .into_iter()
        .map(|(l, rows)| {
            let p = dir.join(format!("class_{l}.dat"));
            write_file(&p, dat_rows(e, &rows).as_bytes())?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_multinomial_clusters;
    use crate::divergence::Metric;
    use crate::embedding::{EmbedDiagnostics, EmbedMethod, EmbedParams};
    use crate::pipeline::{PdfKind, DOC_LABELS_FILE};

    #[test]
    fn resolution_parsing() {
        assert_eq!("5".parse::<Resolution>().unwrap(), Resolution::square(5));
        assert_eq!(
            "2x1".parse::<Resolution>().unwrap(),
            Resolution {
                mu_steps: 2,
                sigma_steps: 1
            }
        );
        assert!("x3".parse::<Resolution>().is_err());
        assert_eq!(Resolution::square(10).to_string(), "10x10");
    }

    #[test]
    fn convergence_exact_constant_and_error_shrinks() {
        let rows = convergence_report(&[
            Resolution::square(5),
            Resolution::square(10),
            Resolution::square(20),
        ])
        .unwrap();
        let exact = fisher_gaussian_closed(
            GaussianParams::new(0.0, 1.0).unwrap(),
            GaussianParams::new(1.0, 2.0).unwrap(),
        );
        for r in &rows {
            assert_eq!(r.exact, exact);
        }
        assert!(rows[2].abs_error < rows[0].abs_error);
        let csv = convergence_csv(&rows);
        assert!(csv.starts_with("resolution,estimate,exact,abs_error\n5x5,"));
    }

    #[test]
    fn degenerate_two_point_grid_is_one_hop() {
        let r = convergence_point("2x1".parse().unwrap()).unwrap();
        let a = GaussianParams::new(0.0, 1.0).unwrap();
        let b = GaussianParams::new(1.0, 1.0).unwrap();
        assert_eq!(r.estimate, (2.0 * kl_gaussian_closed(a, b)).sqrt());
        assert!(convergence_point(Resolution::square(1)).is_err());
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let labels: Vec<Option<i64>> = (0..30)
            .map(|i| Some((i % 3) as i64))
            .chain([None])
            .collect();
        let (tr, te) = stratified_split(&labels, 0.6, 9).unwrap();
        assert_eq!(tr.len(), 18);
        assert_eq!(te.len(), 12);
        assert!(!tr.contains(&30) && !te.contains(&30));
        for c in 0..3 {
            assert_eq!(tr.iter().filter(|&&i| labels[i] == Some(c)).count(), 6);
        }
        assert_eq!(stratified_split(&labels, 0.6, 9).unwrap(), (tr, te));
        let tiny = vec![Some(0), Some(0), Some(1)];
        assert!(matches!(
            stratified_split(&tiny, 0.3, 0),
            Err(FineError::Stratification(1))
        ));
    }

    #[test]
    fn fold_seeds_are_reproducible() {
        assert_eq!(fold_seeds(3, 5), fold_seeds(3, 5));
        assert_ne!(fold_seeds(3, 5), fold_seeds(4, 5));
    }

    fn disjoint_corpus(dir: &Path) -> PipelineConfig {
        let m = gen_multinomial_clusters(3, 30, 8, 60, 1e-6, 5).unwrap();
        // Zero out-of-block counts to force disjoint supports.
        let mut corpus = m.corpus.clone();
        for d in &mut corpus.docs {
            let c = d.label.unwrap() as usize;
            for (w, n) in d.counts.iter_mut().enumerate() {
                if w / 10 != c {
                    *n = 0;
                }
            }
            if d.counts.iter().all(|n| *n == 0) {
                d.counts[c * 10] = 1;
            }
        }
        let terms = dir.join("terms.csv");
        write_file(&terms, corpus.to_triplet_csv().as_bytes()).unwrap();
        write_file(&dir.join(DOC_LABELS_FILE), corpus.to_label_csv().as_bytes()).unwrap();
        let mut c = PipelineConfig::new(
            terms,
            PdfKind::Multinomial,
            Metric::Hellinger,
            EmbedMethod::Ccdr,
        );
        c.dict_size = Some(30);
        c.k_neighbors = Some(10);
        c
    }

    #[test]
    fn separable_classes_classify_perfectly() {
        let dir = tempfile::tempdir().unwrap();
        let c = disjoint_corpus(dir.path());
        let s = ClassifySettings {
            classifier: Classifier::Knn { k: 3 },
            folds: 4,
            train_frac: 0.5,
            seed: 1,
            betas: vec![0.0, 1.0],
            dims: vec![1, 2],
        };
        let r = eval_classify(&c, &s).unwrap();
        assert_eq!(r.results.len(), 4);
        assert_eq!(r.fold_seeds.len(), 4);
        assert_eq!(r.results[0].beta, Some(0.0));
        assert_eq!(r.results[1].dim, Some(2));
        let top = r.results.iter().find(|x| x.dim == Some(2)).unwrap();
        assert!(top.per_fold.iter().all(|a| *a == 1.0), "{:?}", top.per_fold);
        assert_eq!(r.best.mean, 1.0);

        let k = ClassifySettings {
            classifier: Classifier::KernelNearestMean { t: 0.5 },
            ..s.clone()
        };
        let r = eval_classify(&c, &k).unwrap();
        assert_eq!(r.results.len(), 1);
        assert_eq!(r.results[0].mean, 1.0);

        let mut serial = c.clone();
        serial.parallel = false;
        assert_eq!(
            eval_classify(&serial, &s).unwrap(),
            eval_classify(&c, &s).unwrap()
        );
    }

    fn toy_embedding(labels: Vec<Option<i64>>) -> Embedding {
        let n = labels.len();
        Embedding {
            ids: (0..n).map(|i| format!("s{i}")).collect(),
            labels,
            coords: Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64 * 0.5),
            spectrum: vec![],
            method: EmbedMethod::Cmds,
            params: EmbedParams {
                dim: 2,
                lem: None,
                heat_t_resolved: None,
            },
            diagnostics: EmbedDiagnostics::default(),
        }
    }

    #[test]
    fn plot_files_split_by_label_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let e = toy_embedding(vec![Some(1), Some(0), Some(1), Some(0), Some(1)]);
        let files = plot_data(&e, true, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let c1 = std::fs::read_to_string(dir.path().join("class_1.dat")).unwrap();
        let c0 = std::fs::read_to_string(dir.path().join("class_0.dat")).unwrap();
        assert_eq!(c1.lines().count() + c0.lines().count(), 5);
        let firsts: Vec<f64> = c1
            .lines()
            .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(firsts, vec![0.0, 2.0, 4.0]);

        let unl = toy_embedding(vec![None, Some(0)]);
        assert!(matches!(
            plot_data(&unl, true, dir.path()),
            Err(FineError::MissingLabel(_))
        ));
        let files = plot_data(&unl, false, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
    }
}
