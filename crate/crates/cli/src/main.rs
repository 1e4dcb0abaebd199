use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ecoc::assignment::{
    class_codeword_score, exhaustive_min_score, local_search_restarts, random_assignment,
    taxonomy_dag_assignment, Assignment, Direction,
};
use ecoc::codebook::{
    codeword_distance_matrix, column_stats, generate_random_dense, generate_truncated_hadamard,
    Codebook,
};
use ecoc::data::{
    class_feature_means, generate_gaussian_mixture, read_sparse_dataset,
    read_sparse_dataset_with_labels, write_sparse_dataset, Dataset, IndexBase, SyntheticSpec,
};
use ecoc::engine::{
    evaluate, graph_decode_scores, train_dag_ensemble, train_ensemble, DecodingLoss, Decoder,
    Ensemble,
};
use ecoc::harness::config::LearnerKind;
use ecoc::harness::stats::density_bins;
use ecoc::harness::tuning::{cross_validate_c, default_c_grid};
use ecoc::harness::{
    build_column_bank, compare_policies, run_exhaustive_study, Code, Comparison, Policy,
    RecordWriter, RunConfig, Sample,
};
use ecoc::metrics::{
    agglomerative_taxonomy, compute_confusion, confusion_to_metric, embeddings_to_metric,
    means_to_metric, ClassMetric, Linkage, Taxonomy,
};
use ecoc::wltls::{build_coding_dag, dag_to_codebook, CodingDag};

#[derive(Parser)]
#[command(name = "ecoc", version, about = "Error-correcting output codes and codeword assignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Gaussian-mixture dataset in sparse text format.
    GenData(GenDataArgs),
    /// Generate a codebook or a coding DAG.
    GenCodebook(GenCodebookArgs),
    /// Build a normalized class distance matrix.
    Metric(MetricArgs),
    /// Cluster class means into a taxonomy.
    Taxonomy(TaxonomyArgs),
    /// Choose a codeword-to-class assignment.
    Assign(AssignArgs),
    /// Train one binary predictor per codebook column.
    Train(TrainArgs),
    /// Evaluate a trained model.
    Eval(EvalArgs),
    /// Evaluate many assignments from a bank of pre-trained columns.
    ExhaustiveStudy(StudyArgs),
    /// Compare assignment policies over repeated runs.
    Compare(CompareArgs),
    /// Cross-validate the hinge learner's C over a grid.
    Cv(CvArgs),
}

#[derive(Args)]
struct FormatArgs {
    /// Feature indices in data files start at 0 instead of 1.
    #[arg(long)]
    zero_based: bool,
}

impl FormatArgs {
    fn base(&self) -> IndexBase {
        if self.zero_based {
            IndexBase::Zero
        } else {
            IndexBase::One
        }
    }
}

#[derive(Args)]
struct LearnerArgs {
    /// Flat TOML run config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    learner: Option<LearnerChoice>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    early_stopping: bool,
    #[arg(long)]
    min_samples_split: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerChoice {
    Hinge,
    Arow,
    Tree,
}

impl LearnerArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(l) = self.learner {
            cfg.learner = match l {
                LearnerChoice::Hinge => LearnerKind::Hinge,
                LearnerChoice::Arow => LearnerKind::Arow,
                LearnerChoice::Tree => LearnerKind::Tree,
            };
        }
        if let Some(c) = self.c {
            cfg.c = c;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(r) = self.r {
            cfg.r = r;
        }
        if self.early_stopping {
            cfg.early_stopping = true;
        }
        if let Some(m) = self.min_samples_split {
            cfg.min_samples_split = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LossChoice {
    Hinge,
    Exp,
    Hamming,
}

impl From<LossChoice> for DecodingLoss {
    fn from(l: LossChoice) -> Self {
        match l {
            LossChoice::Hinge => DecodingLoss::Hinge,
            LossChoice::Exp => DecodingLoss::Exponential,
            LossChoice::Hamming => DecodingLoss::Hamming,
        }
    }
}

#[derive(Args)]
struct GenDataArgs {
    /// TOML dataset description (`k`, `per_class`, `dim`, `centers`, `noise_std`, `seed`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    /// Overrides the configured seed, e.g. to draw a test split.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum CodebookKind {
    Dense,
    Hadamard,
    Wltls,
}

#[derive(Args)]
struct GenCodebookArgs {
    #[arg(long, value_enum)]
    kind: CodebookKind,
    #[arg(long)]
    k: usize,
    /// Number of columns (dense, hadamard).
    #[arg(long)]
    l: Option<usize>,
    /// Slice width (wltls).
    #[arg(long, default_value_t = 2)]
    b: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Codebook file, or the DAG file for `wltls`.
    #[arg(long)]
    out: PathBuf,
    /// For `wltls`: also write the induced codebook here.
    #[arg(long)]
    codebook_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricSource {
    Means,
    Confusion,
    Embeddings,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long, value_enum)]
    source: MetricSource,
    #[arg(long)]
    data: PathBuf,
    /// Word-vector file (`name v1 v2 …` per line) for `embeddings`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Folds for `confusion`: train on one, predict the rest.
    #[arg(long, default_value_t = 2)]
    folds: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkageChoice {
    Single,
    Complete,
    Average,
}

#[derive(Args)]
struct TaxonomyArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "average")]
    linkage: LinkageChoice,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum AssignPolicy {
    Random,
    Exhaustive,
    LocalMin,
    LocalMax,
    Dag,
}

#[derive(Args)]
struct AssignArgs {
    #[arg(long, value_enum)]
    policy: AssignPolicy,
    #[arg(long, conflicts_with = "graph")]
    codebook: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    metric: Option<PathBuf>,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, conflicts_with = "graph")]
    codebook: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Defaults to the identity assignment.
    #[arg(long)]
    assignment: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Training data, to map raw labels to the same class ids.
    #[arg(long)]
    labels_from: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hinge")]
    loss: LossChoice,
    /// Decode by shortest path over the model's coding DAG.
    #[arg(long)]
    graph_decode: bool,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    data: PathBuf,
    /// Held-out set for accuracy; defaults to the training data.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    codebook: PathBuf,
    /// `name=path` or `path`; repeatable.
    #[arg(long)]
    metric: Vec<String>,
    /// Evaluate this many sampled assignments instead of all K!.
    #[arg(long)]
    sample: Option<u64>,
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
    #[arg(long, value_enum, default_value = "hinge")]
    loss: LossChoice,
    #[arg(long)]
    out_records: Option<PathBuf>,
    #[arg(long)]
    out_summary: PathBuf,
    /// Binned (x, accuracy) densities for ε and each metric's score.
    #[arg(long)]
    out_density: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    bins: usize,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, conflicts_with = "graph")]
    codebook: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    metric: PathBuf,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Comma-separated: random, identity, local-min, local-max, dag.
    #[arg(long, value_delimiter = ',', default_value = "random,dag")]
    policies: Vec<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, value_enum)]
    loss: Option<LossChoice>,
    #[arg(long)]
    out: PathBuf,
    /// Per-run results as JSON.
    #[arg(long)]
    runs_out: Option<PathBuf>,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    assignment: Option<PathBuf>,
    /// Comma-separated C values; defaults to 1e-3 … 1e3.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, value_enum, default_value = "hinge")]
    loss: LossChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    format: FormatArgs,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenData(a) => gen_data(a),
        Command::GenCodebook(a) => gen_codebook(a),
        Command::Metric(a) => metric(a),
        Command::Taxonomy(a) => taxonomy(a),
        Command::Assign(a) => assign(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::ExhaustiveStudy(a) => study(a),
        Command::Compare(a) => compare(a),
        Command::Cv(a) => cv(a),
    }
}

fn load_data(path: &Path, format: &FormatArgs) -> Result<Dataset> {
    read_sparse_dataset(path, format.base()).with_context(|| format!("reading {}", path.display()))
}

fn load_split(path: &Path, train: &Dataset, format: &FormatArgs) -> Result<Dataset> {
    read_sparse_dataset_with_labels(path, format.base(), train.label_names())
        .with_context(|| format!("reading {}", path.display()))
}

fn load_code(codebook: &Option<PathBuf>, graph: &Option<PathBuf>) -> Result<Code> {
    match (codebook, graph) {
        (Some(p), None) => Ok(Code::Matrix(Codebook::load(p)?)),
        (None, Some(p)) => Ok(Code::Graph(CodingDag::load(p)?)),
        _ => bail!("pass exactly one of --codebook or --graph"),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(p) => SyntheticSpec::from_toml_str(&std::fs::read_to_string(p)?)?,
        None => {
            let (Some(k), Some(per_class)) = (a.k, a.per_class) else {
                bail!("pass --config or both --k and --per-class");
            };
            SyntheticSpec::circle(k, per_class, 0)
        }
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(n) = a.noise_std {
        spec.noise_std = n;
    }
    let ds = generate_gaussian_mixture(&spec)?;
    write_sparse_dataset(&ds, &a.out, a.format.base())?;
    eprintln!("wrote {} examples, {} classes", ds.len(), ds.num_classes());
    Ok(())
}

fn gen_codebook(a: GenCodebookArgs) -> Result<()> {
    let cb = match a.kind {
        CodebookKind::Dense => {
            let l = a.l.context("--l is required")?;
            generate_random_dense(a.k, l, a.trials, a.seed)?
        }
        CodebookKind::Hadamard => {
            let l = a.l.context("--l is required")?;
            generate_truncated_hadamard(a.k, l)?
        }
        CodebookKind::Wltls => {
            let dag = build_coding_dag(a.k, a.b)?;
            dag.save(&a.out)?;
            let cb = dag_to_codebook(&dag)?;
            if let Some(p) = &a.codebook_out {
                cb.save(p)?;
            }
            eprintln!("{} edges, {} slices", dag.num_edges(), dag.num_slices());
            return Ok(());
        }
    };
    cb.save(&a.out)?;
    let stats = column_stats(&cb);
    eprintln!(
        "rho={} max|corr|={:.4} equidistant={}",
        stats.min_row_distance, stats.max_abs_column_correlation, stats.equidistant
    );
    Ok(())
}

fn metric(a: MetricArgs) -> Result<()> {
    let ds = load_data(&a.data, &a.format)?;
    let m = match a.source {
        MetricSource::Means => means_to_metric(&class_feature_means(&ds)?)?,
        MetricSource::Embeddings => {
            let p = a.embeddings.as_ref().context("--embeddings is required")?;
            embeddings_to_metric(p, ds.label_names())?
        }
        MetricSource::Confusion => {
            let cfg = a.learner.run_config()?;
            let learner = cfg.learner_config()?;
            let cb = Codebook::one_vs_all(ds.num_classes())?;
            let id = Assignment::identity(ds.num_classes());
            let confusion = compute_confusion(
                &ds,
                |fold: &Dataset| {
                    let ens = train_ensemble(fold, &cb, &id, &learner, cfg.seed)?;
                    Ok(OwnedDecoder { ens, loss: cfg.loss })
                },
                a.folds,
            )?;
            confusion_to_metric(&confusion)?
        }
    };
    m.save(&a.out)?;
    Ok(())
}

struct OwnedDecoder {
    ens: Ensemble,
    loss: DecodingLoss,
}

impl ecoc::engine::Classifier for OwnedDecoder {
    fn predict(&self, x: &[(u32, f64)]) -> ecoc::Result<usize> {
        Decoder {
            ensemble: &self.ens,
            loss: self.loss,
        }
        .predict(x)
    }
}

fn taxonomy(a: TaxonomyArgs) -> Result<()> {
    let ds = load_data(&a.data, &a.format)?;
    let linkage = match a.linkage {
        LinkageChoice::Single => Linkage::Single,
        LinkageChoice::Complete => Linkage::Complete,
        LinkageChoice::Average => Linkage::Average,
    };
    agglomerative_taxonomy(&class_feature_means(&ds)?, linkage)?.save(&a.out)?;
    Ok(())
}

fn assign(a: AssignArgs) -> Result<()> {
    let code = load_code(&a.codebook, &a.graph)?;
    let cb = code.codebook()?;
    let k = cb.rows();
    let d_m = codeword_distance_matrix(&cb);
    let metric = || -> Result<ClassMetric> {
        Ok(ClassMetric::load(a.metric.as_ref().context("--metric is required")?)?)
    };
    let chosen = match a.policy {
        AssignPolicy::Random => random_assignment(k, a.seed),
        AssignPolicy::Exhaustive => exhaustive_min_score(&metric()?, &d_m)?.assignment,
        AssignPolicy::LocalMin | AssignPolicy::LocalMax => {
            let dir = if matches!(a.policy, AssignPolicy::LocalMin) {
                Direction::Minimize
            } else {
                Direction::Maximize
            };
            let runs = local_search_restarts(&metric()?, &d_m, dir, a.restarts.max(1), a.seed)?;
            runs.into_iter()
                .map(|r| r.best)
                .reduce(|x, y| {
                    let better = match dir {
                        Direction::Minimize => y.score < x.score,
                        Direction::Maximize => y.score > x.score,
                    };
                    if better { y } else { x }
                })
                .expect("at least one restart")
                .assignment
        }
        AssignPolicy::Dag => {
            let Code::Graph(dag) = &code else {
                bail!("the dag policy needs --graph");
            };
            let t = Taxonomy::load(a.taxonomy.as_ref().context("--taxonomy is required")?)?;
            taxonomy_dag_assignment(&t, dag)?
        }
    };
    chosen.save(&a.out)?;
    if let Some(p) = &a.metric {
        let s = class_codeword_score(&ClassMetric::load(p)?, &d_m, &chosen)?;
        eprintln!("s_cc={s}");
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let ds = load_data(&a.data, &a.format)?;
    let cfg = a.learner.run_config()?;
    let learner = cfg.learner_config()?;
    let code = load_code(&a.codebook, &a.graph)?;
    let assignment = match &a.assignment {
        Some(p) => Assignment::load(p)?,
        None => Assignment::identity(ds.num_classes()),
    };
    let ens = match &code {
        Code::Matrix(cb) => train_ensemble(&ds, cb, &assignment, &learner, cfg.seed)?,
        Code::Graph(dag) => train_dag_ensemble(&ds, dag, &assignment, &learner, cfg.seed)?,
    };
    ens.save(&a.out)?;
    eprintln!("trained {} predictors, train epsilon (hinge) {:.6}", ens.predictors().len(), ens.train_epsilon());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ens = Ensemble::load(&a.model)?;
    let ds = match &a.labels_from {
        Some(train) => load_split(&a.data, &load_data(train, &a.format)?, &a.format)?,
        None => load_data(&a.data, &a.format)?,
    };
    let loss = DecodingLoss::from(a.loss);
    let mut report = evaluate(&ens, &ds, loss)?;
    if a.graph_decode {
        let dag = ens.dag().context("the model has no coding DAG")?;
        // Shortest-path decoding; tied paths may resolve to a different class
        // than row-by-row decoding does.
        let k = ens.num_classes();
        let (mut hits, mut seen) = (vec![0usize; k], vec![0usize; k]);
        for ex in ds.examples() {
            let f = ens.scores(&ex.features);
            seen[ex.label] += 1;
            hits[ex.label] += (graph_decode_scores(dag, ens.assignment(), &f, loss)? == ex.label) as usize;
        }
        report.accuracy = hits.iter().sum::<usize>() as f64 / ds.len() as f64;
        report.per_class = hits
            .iter()
            .zip(&seen)
            .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
            .collect();
    }
    let text = serde_json::to_string_pretty(&report)?;
    match &a.report {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_metric_arg(arg: &str) -> Result<(String, ClassMetric)> {
    let (name, path) = match arg.split_once('=') {
        Some((n, p)) => (n.to_string(), PathBuf::from(p)),
        None => {
            let p = PathBuf::from(arg);
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| arg.to_string());
            (stem, p)
        }
    };
    Ok((name, ClassMetric::load(&path)?))
}

fn study(a: StudyArgs) -> Result<()> {
    let train = load_data(&a.data, &a.format)?;
    let test = match &a.test {
        Some(p) => load_split(p, &train, &a.format)?,
        None => train.clone(),
    };
    let cb = Codebook::load(&a.codebook)?;
    let metrics = a
        .metric
        .iter()
        .map(|m| parse_metric_arg(m))
        .collect::<Result<Vec<_>>>()?;
    let cfg = a.learner.run_config()?;
    let bank = build_column_bank(&train, &test, &cfg.learner_config()?, cfg.seed)?;
    let sample = match a.sample {
        Some(count) => Sample::Random {
            count,
            seed: a.sample_seed,
        },
        None => Sample::All,
    };
    let names: Vec<String> = metrics.iter().map(|m| m.0.clone()).collect();
    let mut writer = match &a.out_records {
        Some(p) => Some(RecordWriter::new(BufWriter::new(File::create(p)?), &names)?),
        None => None,
    };
    let keep = a.out_density.is_some();
    let mut points: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    let summary = run_exhaustive_study(&bank, &cb, &metrics, a.loss.into(), sample, |r| {
        if let Some(w) = writer.as_mut() {
            w.write(r).map_err(|e| ecoc::Error::Io {
                path: PathBuf::from("records"),
                source: e,
            })?;
        }
        if keep {
            points.push((r.train_epsilon, r.test_accuracy, r.scores.clone()));
        }
        Ok(())
    })?;
    if let Some(w) = writer {
        w.into_inner().flush()?;
    }
    write_json(&a.out_summary, &summary)?;
    if let Some(p) = &a.out_density {
        let mut out = BufWriter::new(File::create(p)?);
        writeln!(out, "x,x_lo,x_hi,accuracy_lo,accuracy_hi,count")?;
        let acc: Vec<f64> = points.iter().map(|p| p.1).collect();
        let mut series = vec![("epsilon".to_string(), points.iter().map(|p| p.0).collect::<Vec<_>>())];
        for (i, n) in names.iter().enumerate() {
            series.push((format!("s_cc_{n}"), points.iter().map(|p| p.2[i]).collect()));
        }
        for (name, xs) in series {
            for b in density_bins(&xs, &acc, a.bins) {
                writeln!(out, "{name},{},{},{},{},{}", b.x_lo, b.x_hi, b.y_lo, b.y_hi, b.count)?;
            }
        }
        out.flush()?;
    }
    eprintln!(
        "{} assignments, mean accuracy {:.4}, {} perfect",
        summary.records, summary.mean_accuracy, summary.perfect
    );
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let train = load_data(&a.data, &a.format)?;
    let test = load_split(&a.test, &train, &a.format)?;
    let code = load_code(&a.codebook, &a.graph)?;
    let metric = ClassMetric::load(&a.metric)?;
    let taxonomy = a.taxonomy.as_ref().map(Taxonomy::load).transpose()?;
    let cfg = a.learner.run_config()?;
    let learner = cfg.learner_config()?;
    let policies = a
        .policies
        .iter()
        .map(|p| p.parse::<Policy>())
        .collect::<ecoc::Result<Vec<_>>>()?;
    let cmp = Comparison {
        train: &train,
        test: &test,
        code: &code,
        metric: &metric,
        taxonomy: taxonomy.as_ref(),
        learner: &learner,
        loss: a.loss.map_or(cfg.loss, DecodingLoss::from),
        repeats: a.repeats.unwrap_or(cfg.repeats),
        restarts: a.restarts.unwrap_or(cfg.restarts),
        seed: cfg.seed,
    };
    let (rows, runs) = compare_policies(&cmp, &policies)?;
    std::fs::write(&a.out, ecoc::harness::compare::rows_to_csv(&rows))?;
    if let Some(p) = &a.runs_out {
        write_json(p, &runs)?;
    }
    for r in &rows {
        eprintln!(
            "{:<10} accuracy {:.4} ± {:.4}   s_cc {:.4}",
            r.policy, r.mean_accuracy, r.two_sigma, r.mean_score
        );
    }
    Ok(())
}

fn cv(a: CvArgs) -> Result<()> {
    let ds = load_data(&a.data, &a.format)?;
    let cb = Codebook::load(&a.codebook)?;
    let assignment = match &a.assignment {
        Some(p) => Assignment::load(p)?,
        None => Assignment::identity(ds.num_classes()),
    };
    let grid = if a.grid.is_empty() { default_c_grid() } else { a.grid.clone() };
    let (points, best) = cross_validate_c(
        &ds.shuffled(a.seed),
        &cb,
        &assignment,
        &grid,
        a.epochs,
        a.folds,
        a.loss.into(),
        a.seed,
    )?;
    println!("{}", serde_json::to_string_pretty(&serde_json::json!({ "grid": points, "best": best }))?);
    Ok(())
}
