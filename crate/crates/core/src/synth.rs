//! Writes synthetic data sets to disk in the interchange formats.

use std::path::{Path, PathBuf};

use crate::datasets::{
    gaussian_params_csv, gen_gaussian_grid, gen_multinomial_clusters, gen_swiss_roll_sets,
};
use crate::error::Result;
use crate::io::write_file;
use crate::pipeline::DOC_LABELS_FILE;

/// Generator choice with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthSpec {
    /// Writes `collection.csv` and `ground_truth.csv`.
    SwissRoll {
        n_sets: usize,
        samples_per_set: usize,
        noise_scale: f64,
        seed: u64,
    },
    /// Writes `params.csv`.
    GaussianGrid {
        alpha: f64,
        beta: f64,
        k_steps: usize,
        l_steps: usize,
    },
    /// Writes `terms.csv` and `doc_labels.csv`.
    MultinomialClusters {
        n_classes: usize,
        dict_size: usize,
        docs_per_class: usize,
        counts_per_doc: usize,
        concentration: f64,
        seed: u64,
    },
}

/// Generates the data and writes it under `dir`; returns the written paths.
pub fn synthesize(spec: &SynthSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    let files: Vec<(&str, String)> = match *spec {
        SynthSpec::SwissRoll {
            n_sets,
            samples_per_set,
            noise_scale,
            seed,
        } => {
            let r = gen_swiss_roll_sets(n_sets, samples_per_set, noise_scale, seed)?;
            vec![
                ("collection.csv", r.collection.to_long_csv()),
                ("ground_truth.csv", r.ground_truth_csv()),
            ]
        }
        SynthSpec::GaussianGrid {
            alpha,
            beta,
            k_steps,
            l_steps,
        } => {
            let g = gen_gaussian_grid(alpha, beta, k_steps, l_steps)?;
            vec![("params.csv", gaussian_params_csv(&g.ids(), &g.params))]
        }
        SynthSpec::MultinomialClusters {
            n_classes,
            dict_size,
            docs_per_class,
            counts_per_doc,
            concentration,
            seed,
        } => {
            let m = gen_multinomial_clusters(
                n_classes,
                dict_size,
                docs_per_class,
                counts_per_doc,
                concentration,
                seed,
            )?;
            vec![
                ("terms.csv", m.corpus.to_triplet_csv()),
                (DOC_LABELS_FILE, m.corpus.to_label_csv()),
            ]
        }
    };
    files
        .into_iter()
        .map(|(name, text)| {
            let p = dir.join(name);
            write_file(&p, text.as_bytes())?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bytes() {
        let spec = SynthSpec::SwissRoll {
            n_sets: 12,
            samples_per_set: 5,
            noise_scale: 0.3,
            seed: 8,
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = synthesize(&spec, a.path()).unwrap();
        let fb = synthesize(&spec, b.path()).unwrap();
        assert_eq!(fa.len(), 2);
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }

    #[test]
    fn grid_and_clusters_write_expected_files() {
        let d = tempfile::tempdir().unwrap();
        let f = synthesize(
            &SynthSpec::GaussianGrid {
                alpha: 0.1,
                beta: 0.1,
                k_steps: 10,
                l_steps: 10,
            },
            d.path(),
        )
        .unwrap();
        let text = std::fs::read_to_string(&f[0]).unwrap();
        assert_eq!(text.lines().count(), 101);
        let f = synthesize(
            &SynthSpec::MultinomialClusters {
                n_classes: 2,
                dict_size: 20,
                docs_per_class: 3,
                counts_per_doc: 10,
                concentration: 0.5,
                seed: 1,
            },
            d.path(),
        )
        .unwrap();
        assert!(f[1].ends_with(DOC_LABELS_FILE));
        assert_eq!(std::fs::read_to_string(&f[1]).unwrap().lines().count(), 7);
    }
}
