//! Divergences between PDFs and pairwise dissimilarity matrices.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::GaussianParams;
use crate::density::{KernelDensityEstimate, MultinomialPdf};
use crate::error::{FineError, Result};
use crate::io::{csv_error, csv_reader, fmt_f64, parse_f64};

/// A plug-in KL value and whether a negative raw estimate was clamped to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlEstimate {
    pub value: f64,
    pub clamped: bool,
}

/// Log-densities of a KDE at its own samples, reused across many pairs.
pub fn self_log_densities(p: &KernelDensityEstimate) -> Vec<f64> {
    p.log_density_many(p.samples())
        .expect("a KDE always matches its own sample dimension")
}

/// Resubstitution estimate `max(0, mean_{x ∈ samples(p)} [log p̂(x) − log q̂(x)])`.
pub fn kl_empirical(p: &KernelDensityEstimate, q: &KernelDensityEstimate) -> Result<KlEstimate> {
    kl_with_self(p, &self_log_densities(p), q)
}

/// As [`kl_empirical`], with `log p̂` at p's samples supplied by the caller.
pub fn kl_with_self(
    p: &KernelDensityEstimate,
    p_self: &[f64],
    q: &KernelDensityEstimate,
) -> Result<KlEstimate> {
    if p.dim() != q.dim() {
        return Err(FineError::Dimension {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let cross = q.log_density_many(p.samples())?;
    let total: f64 = p_self.iter().zip(&cross).map(|(a, b)| a - b).sum();
    let raw = total / p.n_samples() as f64;
    Ok(if raw < 0.0 {
        KlEstimate {
            value: 0.0,
            clamped: true,
        }
    } else {
        KlEstimate {
            value: raw,
            clamped: false,
        }
    })
}

/// `KL(p‖q) + KL(q‖p)` with each direction clamped separately.
pub fn kl_symmetric(p: &KernelDensityEstimate, q: &KernelDensityEstimate) -> Result<KlEstimate> {
    let a = kl_empirical(p, q)?;
    let b = kl_empirical(q, p)?;
    Ok(combine(a, b))
}

fn combine(a: KlEstimate, b: KlEstimate) -> KlEstimate {
    KlEstimate {
        value: a.value + b.value,
        clamped: a.clamped || b.clamped,
    }
}

/// `√(KL(p‖q) + KL(q‖p))`.
pub fn fisher_approx_from_kl(p: &KernelDensityEstimate, q: &KernelDensityEstimate) -> Result<f64> {
    kl_symmetric(p, q).map(|k| k.value.sqrt())
}

/// KL divergence between two univariate normals.
pub fn kl_gaussian_closed(a: GaussianParams, b: GaussianParams) -> f64 {
    if a == b {
        return 0.0;
    }
    let r = (a.sigma / b.sigma).powi(2);
    let dm = (b.mu - a.mu) / b.sigma;
    (0.5 * (-r.ln() + r + dm * dm - 1.0)).max(0.0)
}

/// Exact Fisher information distance between two univariate normals.
///
/// With `u = (μ_a/√2, σ_a)`, `v = (μ_b/√2, σ_b)`, `A = ‖u − v̄‖` (v̄ reflected
/// through σ = 0) and `B = ‖u − v‖`, the distance is `√2 ln((A+B)/(A−B))`.
/// Since `A² − B² = 4σ_aσ_b` this equals `√2 ln1p(B(A+B) / (2σ_aσ_b))`,
/// which avoids the cancellation in `A − B`.
pub fn fisher_gaussian_closed(a: GaussianParams, b: GaussianParams) -> f64 {
    if a == b {
        return 0.0;
    }
    let dx = (a.mu - b.mu) / SQRT_2;
    let big_a = dx.hypot(a.sigma + b.sigma);
    let big_b = dx.hypot(a.sigma - b.sigma);
    SQRT_2 * (big_b * (big_a + big_b) / (2.0 * a.sigma * b.sigma)).ln_1p()
}

fn same_dict(p: &MultinomialPdf, q: &MultinomialPdf) -> Result<()> {
    if p.dict_size() != q.dict_size() {
        return Err(FineError::Dimension {
            expected: p.dict_size(),
            got: q.dict_size(),
        });
    }
    Ok(())
}

/// `√Σ(√p_i − √q_i)²`, in `[0, √2]`.
pub fn hellinger(p: &MultinomialPdf, q: &MultinomialPdf) -> Result<f64> {
    same_dict(p, q)?;
    Ok(sq_hellinger_sum(p.probs(), q.probs()).sqrt())
}

fn sq_hellinger_sum(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum()
}

/// Great-circle distance `2 arccos Σ√(p_i q_i)` on the unit sphere, in `[0, π]`.
///
/// On the simplex `Σ√(p_i q_i) = 1 − D_H²/2`, so the distance is evaluated as
/// `4 arcsin(D_H / 2)`, which stays accurate for nearly equal inputs where
/// `arccos` near 1 loses half the significant digits.
pub fn cosine(p: &MultinomialPdf, q: &MultinomialPdf) -> Result<f64> {
    let h = hellinger(p, q)?;
    Ok(4.0 * (h / 2.0).min(SQRT_2 / 2.0).asin())
}

/// Amari α-divergence between multinomials.
///
/// `α = ±1` are the KL limits, `D^(−1)(p‖q) = Σ p log(p/q)` and
/// `D^(1)(p‖q) = Σ q log(q/p)`. `α = 0` is evaluated as `2Σ(√p − √q)²`.
/// An infinite result (a zero raised to a negative power, or a log of zero
/// under positive mass) is reported as a support violation.
pub fn alpha_divergence(p: &MultinomialPdf, q: &MultinomialPdf, alpha: f64) -> Result<f64> {
    same_dict(p, q)?;
    if !alpha.is_finite() {
        return Err(FineError::InvalidParameter("alpha must be finite".into()));
    }
    let (p, q) = (p.probs(), q.probs());
    if p == q {
        return Ok(0.0);
    }
    if alpha == -1.0 {
        return kl_sum(p, q);
    }
    if alpha == 1.0 {
        return kl_sum(q, p);
    }
    if alpha == 0.0 {
        return Ok(2.0 * sq_hellinger_sum(p, q));
    }
    let (ep, eq) = ((1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0);
    let mut s = 0.0;
    for (i, (a, b)) in p.iter().zip(q).enumerate() {
        if *a == 0.0 && *b == 0.0 {
            continue;
        }
        if (*a == 0.0 && ep < 0.0) || (*b == 0.0 && eq < 0.0) {
            return Err(FineError::Support { index: i });
        }
        s += a.powf(ep) * b.powf(eq);
    }
    Ok((4.0 / (1.0 - alpha * alpha) * (1.0 - s)).max(0.0))
}

/// `Σ_{p_i > 0} p_i log(p_i / q_i)`.
fn kl_sum(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (i, (a, b)) in p.iter().zip(q).enumerate() {
        if *a > 0.0 {
            if *b == 0.0 {
                return Err(FineError::Support { index: i });
            }
            s += a * (a / b).ln();
        }
    }
    Ok(s.max(0.0))
}

/// `‖p − q‖₂` between probability vectors.
pub fn l2_multinomial(p: &MultinomialPdf, q: &MultinomialPdf) -> Result<f64> {
    same_dict(p, q)?;
    Ok(p.probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// `∫ p̂ q̂` for two Gaussian KDEs: a double sum of Gaussians with summed
/// per-dimension variances.
pub fn kde_inner_product(p: &KernelDensityEstimate, q: &KernelDensityEstimate) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(FineError::Dimension {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let var: Vec<f64> = p
        .bandwidths()
        .iter()
        .zip(q.bandwidths())
        .map(|(a, b)| a * a + b * b)
        .collect();
    let inv_var: Vec<f64> = var.iter().map(|v| 1.0 / v).collect();
    let log_norm = -0.5 * var.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>();
    let mut total = 0.0;
    for s in p.samples().rows() {
        for t in q.samples().rows() {
            let mut e = 0.0;
            for k in 0..var.len() {
                let d = s[k] - t[k];
                e += d * d * inv_var[k];
            }
            total += (log_norm - 0.5 * e).exp();
        }
    }
    Ok(total / (p.n_samples() * q.n_samples()) as f64)
}

/// `√∫(p̂ − q̂)²` for two Gaussian KDEs.
pub fn l2_kde(p: &KernelDensityEstimate, q: &KernelDensityEstimate) -> Result<f64> {
    let pq = kde_inner_product(p, q)?;
    let pp = kde_inner_product(p, p)?;
    let qq = kde_inner_product(q, q)?;
    Ok((pp + qq - 2.0 * pq).max(0.0).sqrt())
}

/// Bhattacharyya coefficient `∫√(pq)` of two univariate normals.
pub fn bhattacharyya_gaussian(a: GaussianParams, b: GaussianParams) -> f64 {
    if a == b {
        return 1.0;
    }
    let s2 = a.sigma * a.sigma + b.sigma * b.sigma;
    let dm = a.mu - b.mu;
    (2.0 * a.sigma * b.sigma / s2).sqrt() * (-dm * dm / (4.0 * s2)).exp()
}

/// `√∫(p − q)²` between univariate normals.
pub fn l2_gaussian(a: GaussianParams, b: GaussianParams) -> f64 {
    if a == b {
        return 0.0;
    }
    let self_a = 1.0 / (2.0 * a.sigma * PI.sqrt());
    let self_b = 1.0 / (2.0 * b.sigma * PI.sqrt());
    let s2 = a.sigma * a.sigma + b.sigma * b.sigma;
    let dm = a.mu - b.mu;
    let cross = (-dm * dm / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt();
    (self_a + self_b - 2.0 * cross).max(0.0).sqrt()
}

/// Pairwise dissimilarity measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `√(KL(p‖q) + KL(q‖p))`.
    FisherKl,
    /// `√Σ(√p − √q)²`.
    Hellinger,
    /// `2 arccos ∫√(pq)`.
    Cosine,
    /// L2 distance between density functions.
    EuclideanL2,
    /// Closed-form Fisher distance between univariate normals.
    FisherExactGaussian,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::FisherKl,
        Metric::Hellinger,
        Metric::Cosine,
        Metric::EuclideanL2,
        Metric::FisherExactGaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::FisherKl => "fisher_kl",
            Metric::Hellinger => "hellinger",
            Metric::Cosine => "cosine",
            Metric::EuclideanL2 => "euclidean_l2",
            Metric::FisherExactGaussian => "fisher_exact_gaussian",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = FineError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FineError::InvalidParameter(format!("unknown metric `{s}`")))
    }
}

/// Fitted densities of one collection, all of the same kind.
#[derive(Debug, Clone)]
pub enum PdfCollection<'a> {
    Kde(Vec<KernelDensityEstimate<'a>>),
    Multinomial(Vec<MultinomialPdf>),
    GaussianParams(Vec<GaussianParams>),
}

impl PdfCollection<'_> {
    pub fn len(&self) -> usize {
        match self {
            PdfCollection::Kde(v) => v.len(),
            PdfCollection::Multinomial(v) => v.len(),
            PdfCollection::GaussianParams(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PdfCollection::Kde(_) => "kde",
            PdfCollection::Multinomial(_) => "multinomial",
            PdfCollection::GaussianParams(_) => "gaussian_params",
        }
    }

    /// Whether `metric` is defined for this kind of density.
    pub fn supports(&self, metric: Metric) -> bool {
        match self {
            PdfCollection::Kde(_) => matches!(metric, Metric::FisherKl | Metric::EuclideanL2),
            PdfCollection::Multinomial(_) => matches!(
                metric,
                Metric::Hellinger | Metric::Cosine | Metric::EuclideanL2
            ),
            PdfCollection::GaussianParams(_) => true,
        }
    }

    fn check_dims(&self) -> Result<()> {
        let dims: Vec<usize> = match self {
            PdfCollection::Kde(v) => v.iter().map(|k| k.dim()).collect(),
            PdfCollection::Multinomial(v) => v.iter().map(|p| p.dict_size()).collect(),
            PdfCollection::GaussianParams(_) => return Ok(()),
        };
        if let Some(first) = dims.first() {
            if let Some(bad) = dims.iter().find(|d| *d != first) {
                return Err(FineError::Dimension {
                    expected: *first,
                    got: *bad,
                });
            }
        }
        Ok(())
    }
}

/// Symmetric, zero-diagonal, non-negative matrix of pairwise dissimilarities.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    values: Array2<f64>,
    metric: Metric,
    ids: Vec<String>,
}

impl DissimilarityMatrix {
    pub fn new(values: Array2<f64>, metric: Metric, ids: Vec<String>) -> Result<Self> {
        let n = ids.len();
        if values.dim() != (n, n) {
            return Err(FineError::Dimension {
                expected: n,
                got: values.nrows(),
            });
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(FineError::Format(format!(
                "dissimilarities must be finite and non-negative, found {bad}"
            )));
        }
        let scale = values.iter().copied().fold(1.0, f64::max);
        for i in 0..n {
            if values[[i, i]] != 0.0 {
                return Err(FineError::Format(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..i {
                if (values[[i, j]] - values[[j, i]]).abs() > 1e-12 * scale {
                    return Err(FineError::Format(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(DissimilarityMatrix {
            values,
            metric,
            ids,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    /// Header row of ids, then one row of 17-significant-digit values per set.
    pub fn to_csv(&self) -> String {
        let mut out = self.ids.join(",");
        out.push('\n');
        for row in self.values.rows() {
            let line: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, metric: Metric) -> Result<Self> {
        let mut reader = csv_reader(text);
        let header = reader.headers().map_err(csv_error)?.clone();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(FineError::EmptyInput("matrix file is empty".into()));
        }
        let ids: Vec<String> = header.iter().map(str::to_string).collect();
        let n = ids.len();
        let mut flat = Vec::with_capacity(n * n);
        let mut rows = 0;
        for (idx, record) in reader.records().enumerate() {
            let row = idx + 1;
            let record = record.map_err(csv_error)?;
            if record.len() != n {
                return Err(FineError::Format(format!(
                    "row {row} has {} values, expected {n}",
                    record.len()
                )));
            }
            for (k, field) in record.iter().enumerate() {
                flat.push(parse_f64(field, row, &ids[k])?);
            }
            rows += 1;
        }
        if rows != n {
            return Err(FineError::Format(format!(
                "expected {n} rows, found {rows}"
            )));
        }
        let values =
            Array2::from_shape_vec((n, n), flat).map_err(|e| FineError::Format(e.to_string()))?;
        DissimilarityMatrix::new(values, metric, ids)
    }
}

/// A dissimilarity matrix together with estimator diagnostics.
#[derive(Debug, Clone)]
pub struct MatrixBuild {
    pub matrix: DissimilarityMatrix,
    /// Ordered pairs whose plug-in KL estimate was clamped to 0.
    pub clamped_kl: usize,
}

/// Computes every upper-triangle entry and mirrors it. Each entry is a pure
/// function of its pair, so the result does not depend on `parallel`.
pub fn build_dissimilarity_matrix(
    pdfs: &PdfCollection,
    ids: Vec<String>,
    metric: Metric,
    parallel: bool,
) -> Result<MatrixBuild> {
    let n = pdfs.len();
    if ids.len() != n {
        return Err(FineError::Dimension {
            expected: n,
            got: ids.len(),
        });
    }
    if !pdfs.supports(metric) {
        return Err(FineError::MetricMismatch {
            metric: metric.name().into(),
            kind: pdfs.kind().into(),
        });
    }
    pdfs.check_dims()?;

    let self_terms: Vec<Vec<f64>> = match (pdfs, metric) {
        (PdfCollection::Kde(k), Metric::FisherKl) => map_maybe_par(k, parallel, self_log_densities),
        (PdfCollection::Kde(k), Metric::EuclideanL2) => map_maybe_par(k, parallel, |p| {
            vec![kde_inner_product(p, p).expect("same dimension")]
        }),
        _ => Vec::new(),
    };

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let entry = |&(i, j): &(usize, usize)| -> Result<(f64, usize)> {
        pair_value(pdfs, metric, &self_terms, i, j)
    };
    let results: Vec<Result<(f64, usize)>> = if parallel {
        pairs.par_iter().map(entry).collect()
    } else {
        pairs.iter().map(entry).collect()
    };

    let mut values = Array2::zeros((n, n));
    let mut clamped_kl = 0;
    for (&(i, j), r) in pairs.iter().zip(results) {
        let (v, c) = r?;
        values[[i, j]] = v;
        values[[j, i]] = v;
        clamped_kl += c;
    }
    Ok(MatrixBuild {
        matrix: DissimilarityMatrix::new(values, metric, ids)?,
        clamped_kl,
    })
}

fn map_maybe_par<T: Sync, U: Send>(
    items: &[T],
    parallel: bool,
    f: impl Fn(&T) -> U + Sync + Send,
) -> Vec<U> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn pair_value(
    pdfs: &PdfCollection,
    metric: Metric,
    self_terms: &[Vec<f64>],
    i: usize,
    j: usize,
) -> Result<(f64, usize)> {
    let plain = |v: f64| Ok((v, 0));
    match pdfs {
        PdfCollection::Kde(k) => match metric {
            Metric::FisherKl => {
                let a = kl_with_self(&k[i], &self_terms[i], &k[j])?;
                let b = kl_with_self(&k[j], &self_terms[j], &k[i])?;
                let c = combine(a, b);
                Ok((c.value.sqrt(), a.clamped as usize + b.clamped as usize))
            }
            Metric::EuclideanL2 => {
                let cross = kde_inner_product(&k[i], &k[j])?;
                plain(
                    (self_terms[i][0] + self_terms[j][0] - 2.0 * cross)
                        .max(0.0)
                        .sqrt(),
                )
            }
            _ => unreachable!("checked by supports"),
        },
        PdfCollection::Multinomial(m) => match metric {
            Metric::Hellinger => plain(hellinger(&m[i], &m[j])?),
            Metric::Cosine => plain(cosine(&m[i], &m[j])?),
            Metric::EuclideanL2 => plain(l2_multinomial(&m[i], &m[j])?),
            _ => unreachable!("checked by supports"),
        },
        PdfCollection::GaussianParams(g) => {
            let (a, b) = (g[i], g[j]);
            plain(match metric {
                Metric::FisherKl => (kl_gaussian_closed(a, b) + kl_gaussian_closed(b, a)).sqrt(),
                Metric::Hellinger => (2.0 - 2.0 * bhattacharyya_gaussian(a, b)).max(0.0).sqrt(),
                Metric::Cosine => 2.0 * bhattacharyya_gaussian(a, b).clamp(-1.0, 1.0).acos(),
                Metric::EuclideanL2 => l2_gaussian(a, b),
                Metric::FisherExactGaussian => fisher_gaussian_closed(a, b),
            })
        }
    }
}
