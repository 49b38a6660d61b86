//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use fine_core::datasets::{
    gen_multinomial_clusters, gen_swiss_roll_sets, GaussianParams, SampleSet,
};
use fine_core::density::{fit_kde, MultinomialPdf};
use fine_core::divergence::{
    alpha_divergence, cosine, fisher_gaussian_closed, hellinger, kl_empirical, kl_gaussian_closed,
    l2_multinomial, DissimilarityMatrix, Metric,
};
use fine_core::embedding::{classical_mds, heat_weights, EmbedMethod, Embedding, HeatParam};
use fine_core::evaluation::{
    convergence_report, eval_classify, Classifier, ClassifySettings, Resolution,
};
use fine_core::geodesic::{build_neighbor_graph, ensure_connected, geodesic_distances};
use fine_core::io::write_file;
use fine_core::linalg::{symmetric_eigen_with, EigenMethod};
use fine_core::pipeline::{run_pipeline, PdfKind, PipelineConfig, DOC_LABELS_FILE};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gp(mu: f64, sigma: f64) -> GaussianParams {
    GaussianParams::new(mu, sigma).unwrap()
}

fn c1_closed_form() -> Outcome {
    let (a, b) = (gp(0.0, 1.0), gp(1.0, 1.0));
    let want = 2f64.sqrt() * 2f64.ln();
    let df = fisher_gaussian_closed(a, b);
    let kl = kl_gaussian_closed(a, b);
    outcome(
        (df - want).abs() < 1e-9 && (df - 0.980_258_143_4).abs() < 1e-9 && (kl - 0.5).abs() < 1e-12,
        format!("D_F = {df:.12}, KL = {kl:.15}"),
    )
}

fn c2_local_approximation() -> Outcome {
    let center = gp(0.6, 1.5);
    let steps: Vec<f64> = (0..21).map(|i| -0.01 + 0.001 * i as f64).collect();
    let mut worst = 0.0f64;
    let mut count = 0;
    for &dm in &steps {
        for &ds in &steps {
            let norm = (dm * dm + ds * ds).sqrt();
            if norm == 0.0 || norm > 0.01 + 1e-15 {
                continue;
            }
            let q = gp(0.6 + dm, 1.5 + ds);
            let df = fisher_gaussian_closed(center, q);
            let approx = (2.0 * kl_gaussian_closed(center, q)).sqrt();
            worst = worst.max((approx - df).abs() / df);
            count += 1;
        }
    }
    outcome(
        worst < 0.01,
        format!("max relative error {worst:.3e} over {count} perturbations"),
    )
}

fn c3_convergence() -> Outcome {
    let rows = match convergence_report(&[
        Resolution::square(5),
        Resolution::square(10),
        Resolution::square(20),
    ]) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let errs: Vec<f64> = rows.iter().map(|r| r.abs_error).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let rel = errs[2] / rows[2].exact;
    outcome(
        decreasing && rel < 0.10,
        format!(
            "abs errors {:.4e}, {:.4e}, {:.4e}; final relative {:.3}%",
            errs[0],
            errs[1],
            errs[2],
            100.0 * rel
        ),
    )
}

fn euclidean(points: &Array2<f64>) -> Array2<f64> {
    let n = points.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let d = &points.row(i) - &points.row(j);
        d.dot(&d).sqrt()
    })
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i:03}")).collect()
}

fn c4_cmds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts = Array2::from_shape_fn((50, 3), |_| rng.random_range(-5.0..5.0));
    let d = DissimilarityMatrix::new(euclidean(&pts), Metric::EuclideanL2, ids(50)).unwrap();
    let e = classical_mds(&d, 3).unwrap();
    let rec = euclidean(&e.coords);
    let err = (&rec - d.values())
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));

    let line = ndarray::array![[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
    let hand = classical_mds(
        &DissimilarityMatrix::new(line, Metric::EuclideanL2, ids(3)).unwrap(),
        1,
    )
    .unwrap();
    let col: Vec<f64> = hand.coords.column(0).to_vec();
    let hand_ok = (col == [1.0, 0.0, -1.0] || col == [-1.0, 0.0, 1.0]) && hand.spectrum[0] == 2.0;
    outcome(
        err < 1e-8 && hand_ok,
        format!(
            "max distance error {err:.3e}; collinear coords {col:?}, top eigenvalue {}",
            hand.spectrum[0]
        ),
    )
}

/// Shortest simple path by exhaustive enumeration, summing weights from the
/// source outward.
fn exhaustive(w: &[Vec<Option<f64>>], s: usize, t: usize) -> f64 {
    fn go(w: &[Vec<Option<f64>>], u: usize, t: usize, acc: f64, seen: &mut [bool], best: &mut f64) {
        if u == t {
            *best = best.min(acc);
            return;
        }
        for v in 0..w.len() {
            if let Some(x) = w[u][v] {
                if !seen[v] {
                    seen[v] = true;
                    go(w, v, t, acc + x, seen, best);
                    seen[v] = false;
                }
            }
        }
    }
    let mut seen = vec![false; w.len()];
    seen[s] = true;
    let mut best = f64::INFINITY;
    go(w, s, t, 0.0, &mut seen, &mut best);
    best
}

fn c5_shortest_paths() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut pairs = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=8usize);
        let mut v = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let x: f64 = rng.random_range(0.01..1.0);
                v[[i, j]] = x;
                v[[j, i]] = x;
            }
        }
        let d = DissimilarityMatrix::new(v, Metric::Hellinger, ids(n)).unwrap();
        let k = rng.random_range(1..n);
        let g = ensure_connected(&build_neighbor_graph(&d, k).unwrap(), &d);
        let geo = geodesic_distances(&g).unwrap();
        let mut w = vec![vec![None; n]; n];
        for e in g.edges() {
            w[e.i][e.j] = Some(e.weight);
            w[e.j][e.i] = Some(e.weight);
        }
        for i in 0..n {
            for j in i + 1..n {
                pairs += 1;
                if geo.get(i, j) != exhaustive(&w, i, j) || geo.get(j, i) != geo.get(i, j) {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches over {pairs} pairs in 100 graphs"),
    )
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

fn upper(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| m[[i, j]])
        .collect()
}

fn c6_swiss_roll(work: &Path) -> Outcome {
    let roll = gen_swiss_roll_sets(200, 100, 0.5, 6).unwrap();
    let input = work.join("swiss").join("collection.csv");
    write_file(&input, roll.collection.to_long_csv().as_bytes()).unwrap();
    let mut c = PipelineConfig::new(input, PdfKind::Kde, Metric::FisherKl, EmbedMethod::Cmds);
    c.geodesic = true;
    c.graph_k = Some(8);
    c.embed_dim = 3;
    let run = run_pipeline(&c).unwrap();
    let embedded = euclidean(&run.embedding.coords);

    let truth = DissimilarityMatrix::new(
        euclidean(&roll.ground_truth),
        Metric::EuclideanL2,
        roll.collection.ids(),
    )
    .unwrap();
    let truth_graph = ensure_connected(&build_neighbor_graph(&truth, 8).unwrap(), &truth);
    let truth_geo = geodesic_distances(&truth_graph).unwrap();
    let rho = spearman(&upper(&embedded), &upper(truth_geo.values()));
    outcome(
        rho >= 0.9,
        format!(
            "Spearman {rho:.4}; clamped KL {}, bridged edges {}",
            run.diagnostics.clamped_kl, run.diagnostics.bridged_edges
        ),
    )
}

fn c7_classification(work: &Path) -> Outcome {
    let m = gen_multinomial_clusters(4, 500, 100, 200, 0.1, 7).unwrap();
    let dir = work.join("docs");
    let terms = dir.join("terms.csv");
    write_file(&terms, m.corpus.to_triplet_csv().as_bytes()).unwrap();
    write_file(
        &dir.join(DOC_LABELS_FILE),
        m.corpus.to_label_csv().as_bytes(),
    )
    .unwrap();
    let mut c = PipelineConfig::new(
        terms,
        PdfKind::Multinomial,
        Metric::Hellinger,
        EmbedMethod::Ccdr,
    );
    c.dict_size = Some(500);
    c.embed_dim = 5;
    c.k_neighbors = Some(10);
    c.heat_t = HeatParam::Auto;
    c.lem_bridge = true;
    let s = ClassifySettings {
        classifier: Classifier::Knn { k: 5 },
        folds: 20,
        train_frac: 0.6,
        seed: 7,
        betas: vec![0.0, 1.0, 10.0],
        dims: vec![5],
    };
    let r = eval_classify(&c, &s).unwrap();
    let mean_at = |b: f64| r.results.iter().find(|x| x.beta == Some(b)).unwrap().mean;
    let (lem, b1, b10) = (mean_at(0.0), mean_at(1.0), mean_at(10.0));
    let tuned = b1.max(b10);
    outcome(
        r.best.mean >= 0.90 && tuned >= lem,
        format!("mean accuracy β=0 {lem:.4}, β=1 {b1:.4}, β=10 {b10:.4}; tuned CCDR {tuned:.4}"),
    )
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> MultinomialPdf {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                0.0
            } else {
                -rng.random::<f64>().max(1e-300).ln()
            }
        })
        .collect();
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    let s: f64 = v.iter().sum();
    MultinomialPdf::new(v.iter().map(|x| x / s).collect()).unwrap()
}

fn c8_divergence_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut asym, mut neg, mut tri, mut ident, mut alpha0) = (0, 0, 0.0f64, 0.0f64, 0.0f64);
    let mut literal = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..40usize);
        let (p, q, r) = (
            random_simplex(&mut rng, n),
            random_simplex(&mut rng, n),
            random_simplex(&mut rng, n),
        );
        let dh = hellinger(&p, &q).unwrap();
        let dc = cosine(&p, &q).unwrap();
        let d0 = alpha_divergence(&p, &q, 0.0).unwrap();
        let l2 = l2_multinomial(&p, &q).unwrap();
        if dh != hellinger(&q, &p).unwrap()
            || dc != cosine(&q, &p).unwrap()
            || d0 != alpha_divergence(&q, &p, 0.0).unwrap()
            || l2 != l2_multinomial(&q, &p).unwrap()
        {
            asym += 1;
        }
        if [dh, dc, d0, l2].iter().any(|x| *x < 0.0) {
            neg += 1;
        }
        let excess = dh - (hellinger(&p, &r).unwrap() + hellinger(&r, &q).unwrap());
        tri = tri.max(excess);
        ident = ident.max((dc - 2.0 * (1.0 - dh * dh / 2.0).clamp(-1.0, 1.0).acos()).abs());
        literal = literal.max((dc - 2.0 * (1.0 - dh * dh).clamp(-1.0, 1.0).acos()).abs());
        alpha0 = alpha0.max((d0 - 2.0 * dh * dh).abs());
    }
    outcome(
        asym == 0 && neg == 0 && tri <= 1e-12 && ident < 1e-9 && alpha0 < 1e-12,
        format!(
            "asymmetric {asym}, negative {neg}, triangle excess {tri:.2e}, \
             |D_C − 2·arccos(1 − D_H²/2)| {ident:.2e}, |D⁽⁰⁾ − 2D_H²| {alpha0:.2e} \
             (unnormalized 2·arccos(1 − D_H²) deviates by up to {literal:.2e})"
        ),
    )
}

fn c9_empirical_kl() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut draw = |shift: f64| {
        let v: Array1<f64> = (0..2000)
            .map(|_| rng.sample::<f64, _>(StandardNormal) + shift)
            .collect();
        v.into_shape_with_order((2000, 1)).unwrap()
    };
    let a = SampleSet::new("a", draw(0.0), None).unwrap();
    let b = SampleSet::new("b", draw(1.0), None).unwrap();
    let (pa, pb) = (fit_kde(&a, None).unwrap(), fit_kde(&b, None).unwrap());
    let kl = kl_empirical(&pa, &pb).unwrap().value;
    let same = kl_empirical(&pa, &pa).unwrap().value;
    let rel = (kl - 0.5).abs() / 0.5;
    outcome(
        rel <= 0.25 && same == 0.0,
        format!(
            "plug-in KL {kl:.4} ({:.1}% from 0.5); identical-input KL {same}",
            100.0 * rel
        ),
    )
}

fn run_fine(cwd: &Path, threads: usize, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fine"))
        .current_dir(cwd)
        .env("FINE_THREADS", threads.to_string())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`fine {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    files
}

fn c10_determinism(work: &Path) -> Outcome {
    let root = work.join("determinism");
    std::fs::create_dir_all(&root).unwrap();
    let setup: [&[&str]; 3] = [
        &[
            "synth",
            "swiss-roll",
            "--n-sets",
            "40",
            "--samples-per-set",
            "30",
            "--noise",
            "0.5",
            "--seed",
            "1",
            "--out",
            "data/roll",
        ],
        &[
            "synth",
            "multinomial-clusters",
            "--n-classes",
            "3",
            "--dict-size",
            "60",
            "--docs-per-class",
            "15",
            "--counts-per-doc",
            "80",
            "--seed",
            "2",
            "--out",
            "data/docs",
        ],
        &[
            "synth",
            "gaussian-grid",
            "--k-steps",
            "6",
            "--l-steps",
            "6",
            "--out",
            "data/grid",
        ],
    ];
    for args in setup {
        if let Err(e) = run_fine(&root, 1, args) {
            return outcome(false, e);
        }
    }
    let commands: Vec<(&str, Vec<&str>)> = vec![
        (
            "synth swiss-roll",
            vec![
                "synth",
                "swiss-roll",
                "--n-sets",
                "40",
                "--samples-per-set",
                "30",
                "--seed",
                "1",
                "--out",
                "out",
            ],
        ),
        (
            "synth gaussian-grid",
            vec!["synth", "gaussian-grid", "--out", "out"],
        ),
        (
            "synth multinomial-clusters",
            vec![
                "synth",
                "multinomial-clusters",
                "--docs-per-class",
                "10",
                "--seed",
                "3",
                "--out",
                "out",
            ],
        ),
        (
            "embed kde",
            vec![
                "embed",
                "--input",
                "data/roll/collection.csv",
                "--pdf-kind",
                "kde",
                "--metric",
                "fisher_kl",
                "--geodesic",
                "--embed",
                "cmds",
                "--dim",
                "3",
                "--out",
                "out",
            ],
        ),
        (
            "embed multinomial",
            vec![
                "embed",
                "--input",
                "data/docs/terms.csv",
                "--pdf-kind",
                "multinomial",
                "--metric",
                "hellinger",
                "--embed",
                "ccdr",
                "--beta",
                "1",
                "--knn-k",
                "8",
                "--lem-bridge",
                "--dim",
                "2",
                "--out",
                "out",
            ],
        ),
        (
            "embed gaussian",
            vec![
                "embed",
                "--input",
                "data/grid/params.csv",
                "--pdf-kind",
                "gaussian_params",
                "--metric",
                "fisher_exact_gaussian",
                "--geodesic",
                "--embed",
                "lem",
                "--dim",
                "2",
                "--out",
                "out",
            ],
        ),
        (
            "distances",
            vec![
                "distances",
                "--input",
                "data/roll/collection.csv",
                "--pdf-kind",
                "kde",
                "--metric",
                "euclidean_l2",
                "--out",
                "out",
            ],
        ),
        (
            "validate-convergence",
            vec![
                "validate-convergence",
                "--resolutions",
                "3,5,8",
                "--out",
                "out",
            ],
        ),
        (
            "eval-classify",
            vec![
                "eval-classify",
                "--input",
                "data/docs/terms.csv",
                "--pdf-kind",
                "multinomial",
                "--metric",
                "hellinger",
                "--embed",
                "ccdr",
                "--knn-k",
                "8",
                "--lem-bridge",
                "--dim",
                "2",
                "--betas",
                "0,1",
                "--dim-sweep",
                "1,2",
                "--folds",
                "5",
                "--seed",
                "4",
                "--out",
                "out",
            ],
        ),
        (
            "eval-classify kernel",
            vec![
                "eval-classify",
                "--input",
                "data/docs/terms.csv",
                "--pdf-kind",
                "multinomial",
                "--metric",
                "hellinger",
                "--classifier",
                "kernel-nearest-mean",
                "--folds",
                "5",
                "--out",
                "out",
            ],
        ),
        (
            "plot-data",
            vec![
                "plot-data",
                "--embedding",
                "data/embedding.csv",
                "--out",
                "out",
            ],
        ),
    ];
    if let Err(e) = run_fine(
        &root,
        1,
        &[
            "embed",
            "--input",
            "data/docs/terms.csv",
            "--pdf-kind",
            "multinomial",
            "--metric",
            "hellinger",
            "--embed",
            "lem",
            "--knn-k",
            "8",
            "--lem-bridge",
            "--out",
            "data",
        ],
    ) {
        return outcome(false, e);
    }
    let out = root.join("out");
    let mut differing = Vec::new();
    for (name, args) in &commands {
        let mut snaps = Vec::new();
        for threads in [1, 1, 8, 8] {
            let _ = std::fs::remove_dir_all(&out);
            if let Err(e) = run_fine(&root, threads, args) {
                return outcome(false, e);
            }
            snaps.push(snapshot(&out));
        }
        if snaps[0].is_empty() || snaps.iter().any(|s| s != &snaps[0]) {
            differing.push(*name);
        }
    }
    outcome(
        differing.is_empty(),
        format!(
            "{} commands × FINE_THREADS {{1, 1, 8, 8}}; differing: {differing:?}",
            commands.len()
        ),
    )
}

fn max_abs(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn lem_residual(d: &DissimilarityMatrix, e: &Embedding) -> f64 {
    let (w, _) = heat_weights(d, e.params.lem.as_ref().unwrap()).unwrap();
    let deg = w.sum_axis(ndarray::Axis(1));
    let mut worst = 0.0f64;
    for (c, lambda) in e.spectrum.iter().enumerate() {
        let f = e.coords.column(c);
        let lf = &(&deg * &f) - &w.dot(&f);
        let df = &deg * &f;
        worst = lf
            .iter()
            .zip(df.iter())
            .fold(worst, |m, (a, b)| m.max((a - lambda * b).abs()));
    }
    worst
}

fn c11_eigensolver(work: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a0 = Array2::from_shape_fn((200, 200), |_| rng.random_range(-1.0..1.0));
    let a = &a0 + &a0.t();
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, method) in [
        ("Jacobi", EigenMethod::Jacobi),
        ("QL", EigenMethod::TridiagonalQl),
    ] {
        let eig = symmetric_eigen_with(&a, method).unwrap();
        let v = &eig.vectors;
        let rec = v.dot(&Array2::from_diag(&eig.values)).dot(&v.t());
        let r = max_abs(&(&rec - &a));
        let o = max_abs(&(&v.t().dot(v) - &Array2::<f64>::eye(200)));
        pass &= r < 1e-10 && o < 1e-10;
        detail.push(format!(
            "{name} reconstruction {r:.2e}, orthogonality {o:.2e}"
        ));
    }

    let m = gen_multinomial_clusters(4, 200, 30, 100, 0.3, 11).unwrap();
    let dir = work.join("lem");
    let terms = dir.join("terms.csv");
    write_file(&terms, m.corpus.to_triplet_csv().as_bytes()).unwrap();
    let mut c = PipelineConfig::new(
        terms,
        PdfKind::Multinomial,
        Metric::Hellinger,
        EmbedMethod::Lem,
    );
    c.embed_dim = 5;
    c.k_neighbors = Some(10);
    c.lem_bridge = true;
    let run = run_pipeline(&c).unwrap();
    let r1 = lem_residual(&run.distances.matrix, &run.embedding);

    let roll = gen_swiss_roll_sets(60, 40, 0.5, 11).unwrap();
    let input = dir.join("collection.csv");
    write_file(&input, roll.collection.to_long_csv().as_bytes()).unwrap();
    let mut c = PipelineConfig::new(input, PdfKind::Kde, Metric::FisherKl, EmbedMethod::Lem);
    c.geodesic = true;
    c.embed_dim = 3;
    c.k_neighbors = Some(8);
    let run = run_pipeline(&c).unwrap();
    let r2 = lem_residual(&run.geodesic.as_ref().unwrap().matrix, &run.embedding);
    pass &= r1 < 1e-8 && r2 < 1e-8;
    detail.push(format!(
        "LEM ‖Lf − λDf‖_max {r1:.2e} (documents), {r2:.2e} (swiss roll geodesic)"
    ));
    outcome(pass, detail.join("; "))
}

fn main() {
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(u32, &str, Option<Duration>, Check)> = vec![
        (1, "closed-form oracles", None, Box::new(c1_closed_form)),
        (
            2,
            "local √(2KL) approximation",
            Some(Duration::from_secs(1)),
            Box::new(c2_local_approximation),
        ),
        (
            3,
            "geodesic convergence",
            Some(Duration::from_secs(30)),
            Box::new(c3_convergence),
        ),
        (4, "cMDS exactness", None, Box::new(c4_cmds)),
        (
            5,
            "shortest-path oracle",
            Some(Duration::from_secs(5)),
            Box::new(c5_shortest_paths),
        ),
        (
            6,
            "swiss-roll reconstruction",
            Some(Duration::from_secs(300)),
            Box::new(move || c6_swiss_roll(w)),
        ),
        (
            7,
            "document classification",
            Some(Duration::from_secs(300)),
            Box::new(move || c7_classification(w)),
        ),
        (
            8,
            "divergence axioms",
            Some(Duration::from_secs(5)),
            Box::new(c8_divergence_axioms),
        ),
        (
            9,
            "empirical KL",
            Some(Duration::from_secs(10)),
            Box::new(c9_empirical_kl),
        ),
        (
            10,
            "determinism",
            None,
            Box::new(move || c10_determinism(w)),
        ),
        (
            11,
            "eigensolver contract",
            None,
            Box::new(move || c11_eigensolver(w)),
        ),
    ];
    let mut failed = 0;
    for (n, name, limit, check) in criteria {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "acceptance {n:>2} {}: {name}: {} [{:.2}s{}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            if in_time {
                String::new()
            } else {
                format!(" exceeds {}s", limit.unwrap().as_secs())
            }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
