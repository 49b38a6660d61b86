use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use fine_core::datasets::CollectionFormat;
use fine_core::divergence::Metric;
use fine_core::embedding::{EmbedMethod, Embedding, HeatParam};
use fine_core::error::FineError;
use fine_core::evaluation::{
    convergence_csv, convergence_report, eval_classify, plot_data, Classifier, ClassifySettings,
    Resolution,
};
use fine_core::io::{read_to_string, write_file};
use fine_core::pipeline::{run_distances, run_pipeline, PdfKind, PipelineConfig, StageError};
use fine_core::synth::{synthesize, SynthSpec};

/// Fisher information non-parametric embedding of collections of sample
/// sets and term-count documents.
#[derive(Parser)]
#[command(name = "fine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: densities, dissimilarities, optional geodesics, embedding.
    Embed(PipelineArgs),
    /// Densities and the pairwise dissimilarity matrix only.
    Distances(PipelineArgs),
    /// Write a synthetic data set.
    Synth(SynthArgs),
    /// Geodesic estimates of a Gaussian Fisher distance on refining grids.
    ValidateConvergence(ConvergenceArgs),
    /// Cross-validated classification of a labeled collection.
    EvalClassify(EvalArgs),
    /// Per-class coordinate files from an embedding.
    PlotData(PlotArgs),
}

fn parse_via<T: FromStr<Err = FineError>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: FineError| e.to_string())
}

fn parse_format(s: &str) -> Result<CollectionFormat, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown input format `{s}`"))
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// JSON config or a previous `run.json`; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// `long_csv` or `directory`; inferred from the input path by default.
    #[arg(long, value_parser = parse_format)]
    input_format: Option<CollectionFormat>,
    /// `kde`, `multinomial` or `gaussian_params`.
    #[arg(long, value_parser = parse_via::<PdfKind>)]
    pdf_kind: Option<PdfKind>,
    /// `fisher_kl`, `hellinger`, `cosine`, `euclidean_l2` or `fisher_exact_gaussian`.
    #[arg(long, value_parser = parse_via::<Metric>)]
    metric: Option<Metric>,
    /// Replace dissimilarities with shortest paths on a neighbor graph.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    geodesic: Option<bool>,
    /// Neighbors per node of the geodesic graph.
    #[arg(long)]
    graph_k: Option<usize>,
    /// `cmds`, `lem`, `ccdr` or `pca`.
    #[arg(long = "embed", value_parser = parse_via::<EmbedMethod>)]
    embed: Option<EmbedMethod>,
    #[arg(long)]
    dim: Option<usize>,
    /// Heat-kernel width: a positive number, `inf` or `auto`.
    #[arg(long, value_parser = parse_via::<HeatParam>)]
    heat_t: Option<HeatParam>,
    /// Extra weight between same-label pairs (ccdr).
    #[arg(long)]
    beta: Option<f64>,
    /// Neighbors per node of the Laplacian graph (lem, ccdr).
    #[arg(long)]
    knn_k: Option<usize>,
    /// Bridge a disconnected Laplacian neighbor graph instead of failing.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    lem_bridge: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Term dictionary size; the largest index + 1 by default.
    #[arg(long)]
    dict_size: Option<usize>,
    /// `doc_id,label` file for term counts.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Start from a saved `distances.csv` instead of fitting densities.
    #[arg(long)]
    from_distances: Option<PathBuf>,
    /// Fail when cMDS negative eigenvalue mass exceeds this fraction.
    #[arg(long)]
    max_negative_eigen_mass: Option<f64>,
    /// Fail when more KL estimates than this were clamped at zero.
    #[arg(long)]
    max_clamped_kl: Option<usize>,
    /// Fail when more bridging edges than this were needed.
    #[arg(long)]
    max_bridged_edges: Option<usize>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<PipelineConfig, Failure> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::from_json(&read_to_string(p).map_err(Failure::config)?)
                .map_err(Failure::config)?,
            None => {
                let missing = |flag: &str| {
                    Failure::new("config", format!("--{flag} is required without --config"))
                };
                PipelineConfig::new(
                    self.input.clone().unwrap_or_default(),
                    self.pdf_kind.ok_or_else(|| missing("pdf-kind"))?,
                    self.metric.ok_or_else(|| missing("metric"))?,
                    self.embed.unwrap_or(EmbedMethod::Cmds),
                )
            }
        };
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value.clone() {
                    c.$field = v;
                }
            };
        }
        set!(input, self.input);
        set!(pdf_kind, self.pdf_kind);
        set!(metric, self.metric);
        set!(geodesic, self.geodesic);
        set!(embed_method, self.embed);
        set!(embed_dim, self.dim);
        set!(heat_t, self.heat_t);
        set!(beta, self.beta);
        set!(lem_bridge, self.lem_bridge);
        set!(seed, self.seed);
        set!(output, self.out);
        if self.graph_k.is_some() {
            c.graph_k = self.graph_k;
        }
        if self.knn_k.is_some() {
            c.k_neighbors = self.knn_k;
        }
        if self.input_format.is_some() {
            c.input_format = self.input_format;
        }
        if self.dict_size.is_some() {
            c.dict_size = self.dict_size;
        }
        if self.labels.is_some() {
            c.labels = self.labels.clone();
        }
        if self.from_distances.is_some() {
            c.from_distances = self.from_distances.clone();
        }
        if self.max_negative_eigen_mass.is_some() {
            c.thresholds.max_negative_eigen_mass = self.max_negative_eigen_mass;
        }
        if self.max_clamped_kl.is_some() {
            c.thresholds.max_clamped_kl = self.max_clamped_kl;
        }
        if self.max_bridged_edges.is_some() {
            c.thresholds.max_bridged_edges = self.max_bridged_edges;
        }
        if c.output.as_os_str().is_empty() {
            c.output = PathBuf::from(".");
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    SwissRoll,
    GaussianGrid,
    MultinomialClusters,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Swiss roll: number of sample sets.
    #[arg(long, default_value_t = 200)]
    n_sets: usize,
    /// Swiss roll: points per set.
    #[arg(long, default_value_t = 100)]
    samples_per_set: usize,
    /// Swiss roll: isotropic noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Gaussian grid: mean step.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Gaussian grid: standard deviation step.
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Gaussian grid: number of mean steps.
    #[arg(long, default_value_t = 10)]
    k_steps: usize,
    /// Gaussian grid: number of standard deviation steps.
    #[arg(long, default_value_t = 10)]
    l_steps: usize,
    /// Multinomial clusters: number of classes.
    #[arg(long, default_value_t = 4)]
    n_classes: usize,
    /// Multinomial clusters: dictionary size.
    #[arg(long, default_value_t = 500)]
    dict_size: usize,
    /// Multinomial clusters: documents per class.
    #[arg(long, default_value_t = 100)]
    docs_per_class: usize,
    /// Multinomial clusters: term draws per document.
    #[arg(long, default_value_t = 200)]
    counts_per_doc: usize,
    /// Multinomial clusters: Dirichlet background concentration.
    #[arg(long, default_value_t = 0.1)]
    concentration: f64,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        match self.kind {
            SynthKind::SwissRoll => SynthSpec::SwissRoll {
                n_sets: self.n_sets,
                samples_per_set: self.samples_per_set,
                noise_scale: self.noise,
                seed: self.seed,
            },
            SynthKind::GaussianGrid => SynthSpec::GaussianGrid {
                alpha: self.alpha,
                beta: self.beta,
                k_steps: self.k_steps,
                l_steps: self.l_steps,
            },
            SynthKind::MultinomialClusters => SynthSpec::MultinomialClusters {
                n_classes: self.n_classes,
                dict_size: self.dict_size,
                docs_per_class: self.docs_per_class,
                counts_per_doc: self.counts_per_doc,
                concentration: self.concentration,
                seed: self.seed,
            },
        }
    }
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Grid resolutions, `r` for `r×r` or `MxS`.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20", value_parser = parse_via::<Resolution>)]
    resolutions: Vec<Resolution>,
    /// Output directory for `convergence.csv`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierKind {
    Knn,
    KernelNearestMean,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_enum, default_value_t = ClassifierKind::Knn)]
    classifier: ClassifierKind,
    /// Neighbors of the kNN classifier.
    #[arg(long, default_value_t = 5)]
    classifier_k: usize,
    /// Diffusion time of the kernel classifier.
    #[arg(long, default_value_t = 0.5)]
    kernel_t: f64,
    #[arg(long, default_value_t = 20)]
    folds: usize,
    #[arg(long, default_value_t = 0.6)]
    train_frac: f64,
    /// Label weights to compare; defaults to the configured `beta`.
    #[arg(long, value_delimiter = ',')]
    betas: Vec<f64>,
    /// Embedding dimensions to compare; defaults to `--dim`.
    #[arg(long, value_delimiter = ',')]
    dim_sweep: Vec<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// `embedding.csv` to split.
    #[arg(long)]
    embedding: PathBuf,
    /// One file per label; `false` writes a single `all.dat`.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    by_label: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// A failure with the stage it happened in.
struct Failure {
    stage: String,
    message: String,
}

impl Failure {
    fn new(stage: &str, message: impl fmt::Display) -> Self {
        Failure {
            stage: stage.into(),
            message: message.to_string(),
        }
    }

    fn config(e: FineError) -> Self {
        Failure::new("config", e)
    }

    fn write(e: FineError) -> Self {
        Failure::new("write", e)
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure::new(&e.stage.to_string(), e.source)
    }
}

fn write_run_json(
    dir: &Path,
    config: &PipelineConfig,
    diagnostics: serde_json::Value,
) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(
        &serde_json::json!({ "config": config, "diagnostics": diagnostics }),
    )
    .map_err(|e| Failure::new("write", e))?;
    write_file(&dir.join("run.json"), text.as_bytes()).map_err(Failure::write)
}

fn cmd_embed(args: &PipelineArgs) -> Result<(), Failure> {
    let config = args.resolve()?;
    let run = run_pipeline(&config)?;
    run.write(&config.output).map_err(Failure::write)?;
    let violations = run.threshold_violations();
    if !violations.is_empty() {
        return Err(Failure::new("diagnostics", violations.join("; ")));
    }
    log::info!(
        "embedded {} items into {} dimensions",
        run.embedding.len(),
        run.embedding.dim()
    );
    Ok(())
}

fn cmd_distances(args: &PipelineArgs) -> Result<(), Failure> {
    let config = args.resolve()?;
    let (input, stage) = run_distances(&config)?;
    let dir = &config.output;
    write_file(&dir.join("distances.csv"), stage.matrix.to_csv().as_bytes())
        .map_err(Failure::write)?;
    write_run_json(
        dir,
        &config,
        serde_json::json!({
            "n_sets": input.len(),
            "clamped_kl": stage.clamped_kl,
            "degenerate_bandwidth_sets": stage.degenerate_bandwidth_sets,
        }),
    )?;
    if let Some(max) = config.thresholds.max_clamped_kl {
        if stage.clamped_kl > max {
            return Err(Failure::new(
                "diagnostics",
                format!("{} clamped KL estimates exceed {max}", stage.clamped_kl),
            ));
        }
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let files = synthesize(&args.spec(), &args.out).map_err(|e| Failure::new("synth", e))?;
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_convergence(args: &ConvergenceArgs) -> Result<(), Failure> {
    let rows = convergence_report(&args.resolutions).map_err(|e| Failure::new("geodesic", e))?;
    write_file(
        &args.out.join("convergence.csv"),
        convergence_csv(&rows).as_bytes(),
    )
    .map_err(Failure::write)
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let config = args.pipeline.resolve()?;
    let settings = ClassifySettings {
        classifier: match args.classifier {
            ClassifierKind::Knn => Classifier::Knn {
                k: args.classifier_k,
            },
            ClassifierKind::KernelNearestMean => Classifier::KernelNearestMean { t: args.kernel_t },
        },
        folds: args.folds,
        train_frac: args.train_frac,
        seed: config.seed,
        betas: if args.betas.is_empty() {
            vec![config.beta]
        } else {
            args.betas.clone()
        },
        dims: args.dim_sweep.clone(),
    };
    let report = eval_classify(&config, &settings)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::new("write", e))?;
    write_file(&config.output.join("classification.json"), text.as_bytes())
        .map_err(Failure::write)?;
    log::info!("best mean accuracy {}", report.best.mean);
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Result<(), Failure> {
    let load = |p: &Path| read_to_string(p).map_err(|e| Failure::new("load", e));
    let csv = load(&args.embedding)?;
    let sidecar = args.embedding.with_file_name("spectrum.json");
    let embedding = if sidecar.is_file() {
        Embedding::from_csv(&csv, &load(&sidecar)?)
    } else {
        fine_core::embedding::parse_embedding_csv(&csv).map(|(ids, labels, coords)| Embedding {
            ids,
            labels,
            spectrum: Vec::new(),
            method: EmbedMethod::Cmds,
            params: fine_core::embedding::EmbedParams {
                dim: coords.ncols(),
                lem: None,
                heat_t_resolved: None,
            },
            diagnostics: Default::default(),
            coords,
        })
    }
    .map_err(|e| Failure::new("load", e))?;
    plot_data(&embedding, args.by_label, &args.out).map_err(|e| Failure::new("plot", e))?;
    Ok(())
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("FINE_THREADS") {
        let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            Failure::new(
                "config",
                format!("FINE_THREADS must be a positive integer, got `{v}`"),
            )
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new("config", e))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Embed(a) => cmd_embed(a),
        Command::Distances(a) => cmd_distances(a),
        Command::Synth(a) => cmd_synth(a),
        Command::ValidateConvergence(a) => cmd_convergence(a),
        Command::EvalClassify(a) => cmd_eval(a),
        Command::PlotData(a) => cmd_plot(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {} stage failed: {}", f.stage, f.message);
            ExitCode::FAILURE
        }
    }
}
