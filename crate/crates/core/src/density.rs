//! Gaussian kernel density estimates and term-frequency multinomials.

use std::f64::consts::PI;

use ndarray::{ArrayView1, ArrayView2};

use crate::datasets::{SampleSet, TermCorpus};
use crate::error::{FineError, Result};

/// Per-dimension bandwidths from a selection rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidths {
    pub values: Vec<f64>,
    /// Dimensions whose sample spread was zero and got a substitute value.
    pub degenerate: Vec<bool>,
}

impl Bandwidths {
    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|d| *d)
    }
}

/// Silverman's multivariate rule `h_k = σ̂_k · (4 / ((d + 2) n))^(1/(d + 4))`
/// with unbiased per-dimension standard deviations. A zero σ̂_k is replaced by
/// the largest σ̂ (or 1 when every dimension is constant).
pub fn silverman_bandwidth(samples: ArrayView2<f64>) -> Result<Bandwidths> {
    let (n, d) = samples.dim();
    if n < 2 {
        return Err(FineError::InsufficientSamples { needed: 2, got: n });
    }
    let factor = (4.0 / ((d as f64 + 2.0) * n as f64)).powf(1.0 / (d as f64 + 4.0));
    let sd: Vec<f64> = samples
        .columns()
        .into_iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            let ss: f64 = c.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n as f64 - 1.0)).sqrt()
        })
        .collect();
    if let Some(bad) = sd.iter().position(|s| !s.is_finite()) {
        return Err(FineError::InvalidParameter(format!(
            "sample standard deviation of dimension {bad} is not finite"
        )));
    }
    let max_sd = sd.iter().copied().fold(0.0, f64::max);
    let fallback = if max_sd > 0.0 { max_sd } else { 1.0 };
    let degenerate: Vec<bool> = sd.iter().map(|s| *s == 0.0).collect();
    let values = sd
        .iter()
        .map(|s| if *s == 0.0 { fallback } else { *s } * factor)
        .collect();
    Ok(Bandwidths { values, degenerate })
}

/// `p̂(x) = (1/n) Σ_j N(x; s_j, diag(h²))` over the borrowed samples `s_j`.
#[derive(Debug, Clone)]
pub struct KernelDensityEstimate<'a> {
    samples: ArrayView2<'a, f64>,
    bandwidths: Vec<f64>,
    inv_bandwidths: Vec<f64>,
    log_norm_const: f64,
    degenerate: Vec<bool>,
}

/// Fits a KDE to a set, using Silverman bandwidths when none are given.
pub fn fit_kde<'a>(
    set: &'a SampleSet,
    bandwidths: Option<&[f64]>,
) -> Result<KernelDensityEstimate<'a>> {
    fit_kde_points(set.points().view(), bandwidths)
}

pub fn fit_kde_points<'a>(
    samples: ArrayView2<'a, f64>,
    bandwidths: Option<&[f64]>,
) -> Result<KernelDensityEstimate<'a>> {
    let (n, d) = samples.dim();
    if n == 0 {
        return Err(FineError::InsufficientSamples { needed: 1, got: 0 });
    }
    let bw = match bandwidths {
        Some(h) => {
            if h.len() != d {
                return Err(FineError::Dimension {
                    expected: d,
                    got: h.len(),
                });
            }
            if h.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                return Err(FineError::InvalidParameter(
                    "bandwidths must be positive and finite".into(),
                ));
            }
            Bandwidths {
                values: h.to_vec(),
                degenerate: vec![false; d],
            }
        }
        None => silverman_bandwidth(samples)?,
    };
    let log_norm_const = -(n as f64).ln()
        - 0.5 * d as f64 * (2.0 * PI).ln()
        - bw.values.iter().map(|h| h.ln()).sum::<f64>();
    Ok(KernelDensityEstimate {
        samples,
        inv_bandwidths: bw.values.iter().map(|h| 1.0 / h).collect(),
        bandwidths: bw.values,
        log_norm_const,
        degenerate: bw.degenerate,
    })
}

impl<'a> KernelDensityEstimate<'a> {
    pub fn samples(&self) -> ArrayView2<'a, f64> {
        self.samples
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn log_norm_const(&self) -> f64 {
        self.log_norm_const
    }

    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    /// `log p̂(x)` by log-sum-exp over samples in ascending index order.
    pub fn log_density(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut buf = Vec::with_capacity(self.n_samples());
        Ok(self.log_density_into(x, &mut buf))
    }

    pub fn density(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.log_density(x).map(f64::exp)
    }

    /// Log-densities at every row of `points`.
    pub fn log_density_many(&self, points: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_dim(points.ncols())?;
        let mut buf = Vec::with_capacity(self.n_samples());
        Ok(points
            .rows()
            .into_iter()
            .map(|x| self.log_density_into(x, &mut buf))
            .collect())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(FineError::Dimension {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    fn log_density_into(&self, x: ArrayView1<f64>, buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        let mut max = f64::NEG_INFINITY;
        for s in self.samples.rows() {
            let mut q = 0.0;
            for ((xk, sk), ik) in x.iter().zip(s.iter()).zip(&self.inv_bandwidths) {
                let z = (xk - sk) * ik;
                q += z * z;
            }
            let l = -0.5 * q;
            max = max.max(l);
            buf.push(l);
        }
        let sum: f64 = buf.iter().map(|l| (l - max).exp()).sum();
        self.log_norm_const + max + sum.ln()
    }
}

/// A probability vector over a fixed dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialPdf {
    probs: Vec<f64>,
}

impl MultinomialPdf {
    /// Accepts non-negative entries summing to 1 within 1e-12.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(FineError::EmptyInput("empty probability vector".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(FineError::InvalidParameter(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FineError::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(MultinomialPdf { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dict_size(&self) -> usize {
        self.probs.len()
    }
}

/// Maximum-likelihood multinomial `x_i / Σ x`.
pub fn term_frequency_pdf(counts: &[u64]) -> Result<MultinomialPdf> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(FineError::DegenerateDocument(String::new()));
    }
    let t = total as f64;
    Ok(MultinomialPdf {
        probs: counts.iter().map(|c| *c as f64 / t).collect(),
    })
}

/// Term-frequency PDFs of every document, in corpus order.
pub fn corpus_pdfs(corpus: &TermCorpus) -> Result<Vec<MultinomialPdf>> {
    corpus
        .docs
        .iter()
        .map(|d| {
            term_frequency_pdf(&d.counts).map_err(|e| match e {
                FineError::DegenerateDocument(_) => FineError::DegenerateDocument(d.id.clone()),
                other => other,
            })
        })
        .collect()
}
