//! `emns` — command-line front door for the magnetic field modeling
//! pipeline: dataset generation, model fitting, evaluation, the
//! training-size ablation and feature-importance inspection.
//!
//! Exit codes: 0 success, 1 validation/configuration error, 2 I/O error,
//! 3 numerical failure.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use emns_core::dataset::{meta_path, validate_dataset, Dataset};
use emns_core::error::{Error, Result};
use emns_core::eval::{
    self, default_bin_edges, evaluate_model, mape_per_location, report, stratify_by_current,
    FieldPredictor,
};
use emns_core::forest::{fit_forest, grid_search, GridSearchSpec};
use emns_core::lmem::{self, MultipoleBasis};
use emns_core::model_io::{file_sha256, load_model, load_model_of_kind, save_model, SavedModel, TrainMeta};
use emns_core::net::train_mlp;
use emns_core::split::{split_by_current_vector, SplitSpec};
use emns_core::synth::{collect_dataset, CurrentProfile};
use emns_core::types::Position;

use config::Settings;
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "emns", version, about = "eMNS magnetic field modeling pipeline")]
struct Cli {
    /// Cap on worker threads (fallback: EMNS_THREADS; default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flat key-value config file with section prefixes (synth., rf., ann., lmem.).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic calibration dataset (CSV + sidecar metadata).
    Generate(GenerateArgs),
    /// Fit a model on the training side of the 9:1 current-vector split.
    Fit(FitArgs),
    /// Evaluate fitted models: overall, current-stratified and spatial reports.
    Evaluate(EvaluateArgs),
    /// Training-size ablation: retrain RF and ANN on training subsets.
    Ablate(AblateArgs),
    /// Print a random forest's ranked feature importances.
    Importance(ImportanceArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Number of current vectors (default from config; reference protocol 3590).
    #[arg(long)]
    n_currents: Option<usize>,
    /// Generation seed (overrides synth.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Keep all 125 grid sensors instead of dropping the malfunctioning six.
    #[arg(long)]
    all_sensors: bool,
    /// Per-coil current bound in amperes (overrides synth.max_current_a).
    #[arg(long)]
    max_current: Option<f64>,
    /// Current sampling profile.
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    /// Replace existing outputs.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Uniform,
    LevelStratified,
}

#[derive(Args)]
struct FitArgs {
    /// Model kind to fit.
    #[arg(value_enum)]
    model: ModelKindArg,
    /// Training dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Output model JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Seed of the 9:1 train/test split.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Model seed (rf bootstrap / ann init; ignored by lmem).
    #[arg(long)]
    seed: Option<u64>,
    /// LMEM: only samples with i_max at or below this cap are fitted.
    #[arg(long)]
    current_cap: Option<f64>,
    /// LMEM: maximum multipole degree.
    #[arg(long)]
    degree: Option<usize>,
    /// RF: run the 5-fold cross-validated grid search first.
    #[arg(long)]
    grid_search: bool,
    /// RF: where to write the grid-search CV table (default: <out>.cv.csv).
    #[arg(long)]
    cv_table: Option<PathBuf>,
    /// ANN: where to write the training history (default: <out>.history.csv).
    #[arg(long)]
    history: Option<PathBuf>,
    /// Replace existing outputs.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKindArg {
    Lmem,
    Rf,
    Ann,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Evaluation dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Model files to evaluate (at least one).
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Directory for the report files.
    #[arg(long)]
    report_dir: PathBuf,
    /// Which side of the recorded split to evaluate on.
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    /// Permit evaluating a model on data it was trained on.
    #[arg(long)]
    allow_train_eval: bool,
    /// Replace existing outputs.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SplitArg {
    Test,
    Train,
    All,
}

#[derive(Args)]
struct AblateArgs {
    /// Dataset CSV; split 9:1, subsets drawn from the training side.
    #[arg(long)]
    data: PathBuf,
    /// Output report CSV.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated training fractions in (0, 1].
    #[arg(long, value_delimiter = ',')]
    fractions: Vec<f64>,
    /// Append the full-data (fraction 1.0) reference row.
    #[arg(long)]
    include_full: bool,
    /// Subset-draw seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the 9:1 train/test split.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Replace existing outputs.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct ImportanceArgs {
    /// Random forest model file.
    #[arg(long)]
    model: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 2,
        Error::NonFinite(_)
        | Error::Diverged { .. }
        | Error::SingularBasis { .. }
        | Error::RankDeficient { .. }
        | Error::StandoffViolation { .. } => 3,
        _ => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("EMNS_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        // Determinism holds at any thread count; this only caps workers.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn run(cli: Cli) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(args) => cmd_generate(&settings, args),
        Command::Fit(args) => cmd_fit(&settings, args),
        Command::Evaluate(args) => cmd_evaluate(&settings, args),
        Command::Ablate(args) => cmd_ablate(&settings, args),
        Command::Importance(args) => cmd_importance(args),
    }
}

fn ensure_writable(path: &Path, overwrite: bool) -> Result<()> {
    if path.exists() && !overwrite {
        return Err(Error::Config(format!(
            "output {} exists; pass --overwrite to replace it",
            path.display()
        )));
    }
    Ok(())
}

fn read_and_validate(path: &Path) -> Result<Dataset> {
    let dataset = Dataset::read_csv(path)?;
    let validation = validate_dataset(&dataset);
    if !validation.passed() {
        let failures: Vec<String> = validation
            .failures()
            .iter()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        return Err(Error::InvalidDataset(failures.join("; ")));
    }
    Ok(dataset)
}

fn cmd_generate(settings: &Settings, args: GenerateArgs) -> Result<()> {
    ensure_writable(&args.out, args.overwrite)?;
    let mut cfg = settings.synth.clone();
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(max) = args.max_current {
        cfg.max_current_a = max;
    }
    if let Some(profile) = args.profile {
        cfg.current_profile = match profile {
            ProfileArg::Uniform => CurrentProfile::Uniform,
            ProfileArg::LevelStratified => CurrentProfile::LevelStratified,
        };
    }
    if args.all_sensors {
        cfg.dropped_sensors.clear();
    }
    cfg.validate()?;
    let n_currents = args.n_currents.unwrap_or(settings.n_current_vectors);

    let (dataset, meta) = collect_dataset(n_currents, &cfg)?;
    dataset.write_csv(&args.out)?;
    meta.write(&meta_path(&args.out))?;

    let validation = validate_dataset(&dataset);
    println!(
        "wrote {} rows ({} current vectors x {} sensors) to {}",
        dataset.len(),
        n_currents,
        cfg.n_sensors(),
        args.out.display()
    );
    if let Some(rate) = meta.get("acceptance_rate") {
        println!("current-vector acceptance rate: {rate}");
    }
    println!("column ranges:");
    for c in &validation.column_stats {
        println!("  {:<6} min {:>14.6e}  max {:>14.6e}", c.name, c.min, c.max);
    }
    for check in &validation.checks {
        if !check.passed {
            return Err(Error::InvalidDataset(format!(
                "{}: {}",
                check.name, check.detail
            )));
        }
    }

    let mut manifest = RunManifest::new(&settings.raw, BTreeMap::from([("seed".into(), cfg.seed)]));
    manifest.add_output(&args.out)?;
    manifest.add_output(&meta_path(&args.out))?;
    manifest.write_for(&args.out)
}

fn cmd_fit(settings: &Settings, args: FitArgs) -> Result<()> {
    ensure_writable(&args.out, args.overwrite)?;
    let dataset = read_and_validate(&args.data)?;
    let dataset_sha256 = file_sha256(&args.data)?;
    let (train, _test) = split_by_current_vector(&dataset, &SplitSpec::new(args.split_seed))?;

    let mut seeds = BTreeMap::from([("split_seed".to_string(), args.split_seed)]);
    let mut extra_outputs: Vec<PathBuf> = Vec::new();

    let (saved, model_seed) = match args.model {
        ModelKindArg::Lmem => {
            let degree = args.degree.unwrap_or(settings.lmem_max_degree);
            let cap = args.current_cap.unwrap_or(settings.lmem_current_cap_a);
            let centers: Vec<Position> = settings.synth.coils.iter().map(|c| c.center).collect();
            let basis = MultipoleBasis::new(centers, degree)?;
            let model = lmem::fit(&train, basis, cap)?;
            println!(
                "lmem fit: {} samples with i_max <= {cap} A, residual rmse {:.3e} T, condition {:.3e}",
                model.diagnostics.n_samples,
                model.diagnostics.residual_rmse_t,
                model.diagnostics.condition_estimate
            );
            (SavedModel::Lmem(model), 0)
        }
        ModelKindArg::Rf => {
            let mut hp = settings.rf;
            if let Some(seed) = args.seed {
                hp.seed = seed;
            }
            if args.grid_search {
                let spec = GridSearchSpec {
                    seed: hp.seed,
                    ..GridSearchSpec::default()
                };
                let (best, table) = grid_search(&train, &spec)?;
                let cv_path = args
                    .cv_table
                    .clone()
                    .unwrap_or_else(|| args.out.with_extension("cv.csv"));
                ensure_writable(&cv_path, args.overwrite)?;
                write_cv_table(&cv_path, &table)?;
                extra_outputs.push(cv_path);
                println!(
                    "grid search winner: trees {} depth {} min_split {} max_features {} min_leaf {}",
                    best.n_trees,
                    best.max_depth,
                    best.min_samples_split,
                    best.max_features,
                    best.min_samples_leaf
                );
                hp = best;
            }
            let model = fit_forest(&train, &hp)?;
            println!(
                "rf fit: {} trees on {} samples",
                model.trees.len(),
                train.len()
            );
            (SavedModel::Rf(model), hp.seed)
        }
        ModelKindArg::Ann => {
            let mut spec = settings.ann_spec.clone();
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            let (model, history) = train_mlp(&train, &settings.ann_arch, &spec)?;
            let history_path = args
                .history
                .clone()
                .unwrap_or_else(|| args.out.with_extension("history.csv"));
            ensure_writable(&history_path, args.overwrite)?;
            report::write_history_csv(&history_path, &history)?;
            extra_outputs.push(history_path);
            let best = history
                .iter()
                .map(|r| r.val_mse)
                .fold(f64::INFINITY, f64::min);
            println!(
                "ann fit: {} epochs, best validation mse {best:.6e}",
                history.len()
            );
            (SavedModel::Ann(model), spec.seed)
        }
    };
    seeds.insert("model_seed".into(), model_seed);

    let meta = TrainMeta {
        dataset_sha256,
        split_seed: args.split_seed,
        model_seed,
    };
    save_model(&args.out, &saved, &meta)?;
    println!("wrote model to {}", args.out.display());

    let mut manifest = RunManifest::new(&settings.raw, seeds);
    manifest.add_input(&args.data)?;
    manifest.add_output(&args.out)?;
    for p in &extra_outputs {
        manifest.add_output(p)?;
    }
    manifest.write_for(&args.out)
}

fn write_cv_table(path: &Path, table: &[emns_core::forest::CvRecord]) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from(
        "n_trees,max_depth,min_samples_split,max_features,min_samples_leaf,mean_mse,fold_mse\n",
    );
    for r in table {
        let folds: Vec<String> = r.fold_mse.iter().map(|m| m.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.hyperparams.n_trees,
            r.hyperparams.max_depth,
            r.hyperparams.min_samples_split,
            r.hyperparams.max_features,
            r.hyperparams.min_samples_leaf,
            r.mean_mse,
            folds.join(";")
        )
        .expect("string write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct LoadedModel {
    name: String,
    meta: TrainMeta,
    model: SavedModel,
}

impl LoadedModel {
    fn predictor(&self) -> &dyn FieldPredictor {
        match &self.model {
            SavedModel::Lmem(m) => m,
            SavedModel::Rf(m) => m,
            SavedModel::Ann(m) => m,
        }
    }
}

fn cmd_evaluate(settings: &Settings, args: EvaluateArgs) -> Result<()> {
    std::fs::create_dir_all(&args.report_dir).map_err(|e| Error::io(&args.report_dir, e))?;
    let dataset_sha256 = file_sha256(&args.data)?;

    // Load models; disambiguate duplicate kinds by suffixing an index.
    let mut loaded: Vec<LoadedModel> = Vec::new();
    for path in &args.models {
        let file = load_model(path)?;
        let base = file.model.kind().to_string();
        let dup = loaded.iter().filter(|m| m.name.starts_with(&base)).count();
        let name = if dup == 0 {
            base
        } else {
            format!("{base}{}", dup + 1)
        };
        loaded.push(LoadedModel {
            name,
            meta: file.train_meta,
            model: file.model,
        });
    }

    // Models trained on this very dataset pin the split; they must agree.
    let trained_here: Vec<&LoadedModel> = loaded
        .iter()
        .filter(|m| m.meta.dataset_sha256 == dataset_sha256)
        .collect();
    let eval_set: Dataset;
    let dataset = read_and_validate(&args.data)?;
    if let Some(first) = trained_here.first() {
        let split_seed = first.meta.split_seed;
        if trained_here.iter().any(|m| m.meta.split_seed != split_seed) {
            return Err(Error::ModelMismatch(
                "models trained on this dataset disagree on the split seed".into(),
            ));
        }
        if args.split != SplitArg::Test && !args.allow_train_eval {
            return Err(Error::Config(
                "evaluating on training data requires --allow-train-eval".into(),
            ));
        }
        let (train, test) = split_by_current_vector(&dataset, &SplitSpec::new(split_seed))?;
        eval_set = match args.split {
            SplitArg::Test => test,
            SplitArg::Train => train,
            SplitArg::All => dataset,
        };
    } else {
        // Held-out data the models have never seen: use all rows.
        eval_set = dataset;
    }

    let overall_path = args.report_dir.join("overall.csv");
    let stratified_path = args.report_dir.join("stratified.csv");
    let summary_path = args.report_dir.join("summary.json");
    ensure_writable(&overall_path, args.overwrite)?;
    ensure_writable(&stratified_path, args.overwrite)?;
    ensure_writable(&summary_path, args.overwrite)?;

    let mut overall = Vec::new();
    let mut spatial = BTreeMap::new();
    for m in &loaded {
        let metrics = evaluate_model(&eval_set, m.predictor())?;
        println!(
            "{}: r2_norm {:.4}  rmse_norm {:.3} mT",
            m.name,
            metrics.r2_norm,
            metrics.rmse_norm * 1e3
        );
        overall.push((m.name.clone(), metrics));
        let spatial_report = mape_per_location(&eval_set, m.predictor())?;
        let spatial_path = args.report_dir.join(format!("spatial_{}.csv", m.name));
        ensure_writable(&spatial_path, args.overwrite)?;
        report::write_spatial_csv(&spatial_path, &m.name, &spatial_report)?;
        println!(
            "{}: max location MAPE {:.2}%",
            m.name, spatial_report.max_mape_percent
        );
        spatial.insert(m.name.clone(), spatial_report);
    }
    let model_refs: Vec<(&str, &dyn FieldPredictor)> = loaded
        .iter()
        .map(|m| (m.name.as_str(), m.predictor()))
        .collect();
    let stratified = stratify_by_current(&eval_set, &model_refs, &default_bin_edges())?;

    report::write_overall_csv(&overall_path, &overall)?;
    report::write_stratified_csv(&stratified_path, &stratified)?;

    #[derive(serde::Serialize)]
    struct Summary<'a> {
        n_samples: usize,
        overall: &'a [(String, eval::ComponentMetrics)],
        stratified: &'a eval::StratifiedReport,
        spatial: &'a BTreeMap<String, eval::SpatialReport>,
    }
    report::write_json(
        &summary_path,
        &Summary {
            n_samples: eval_set.len(),
            overall: &overall,
            stratified: &stratified,
            spatial: &spatial,
        },
    )?;

    let mut manifest = RunManifest::new(&settings.raw, BTreeMap::new());
    manifest.add_input(&args.data)?;
    for p in &args.models {
        manifest.add_input(p)?;
    }
    manifest.add_output(&overall_path)?;
    manifest.add_output(&stratified_path)?;
    manifest.add_output(&summary_path)?;
    manifest.write_for(&overall_path)
}

fn cmd_ablate(settings: &Settings, args: AblateArgs) -> Result<()> {
    ensure_writable(&args.out, args.overwrite)?;
    let dataset = read_and_validate(&args.data)?;
    let (train, test) = split_by_current_vector(&dataset, &SplitSpec::new(args.split_seed))?;

    let mut fractions = if args.fractions.is_empty() {
        (1..=9).map(|k| k as f64 / 10.0).collect()
    } else {
        args.fractions.clone()
    };
    if args.include_full && !fractions.contains(&1.0) {
        fractions.push(1.0);
    }

    let report_data = eval::run_ablation(
        &train,
        &test,
        &fractions,
        &settings.rf,
        &settings.ann_arch,
        &settings.ann_spec,
        args.seed,
    )?;
    report::write_ablation_csv(&args.out, &report_data)?;
    for r in &report_data.rows {
        println!(
            "fraction {:.2} {}: rmse_norm {:.3} mT",
            r.fraction,
            r.model,
            r.metrics.rmse_norm * 1e3
        );
    }
    println!("wrote ablation report to {}", args.out.display());

    let mut manifest = RunManifest::new(
        &settings.raw,
        BTreeMap::from([
            ("seed".to_string(), args.seed),
            ("split_seed".to_string(), args.split_seed),
        ]),
    );
    manifest.add_input(&args.data)?;
    manifest.add_output(&args.out)?;
    manifest.write_for(&args.out)
}

fn cmd_importance(args: ImportanceArgs) -> Result<()> {
    let file = load_model_of_kind(&args.model, "rf")?;
    let SavedModel::Rf(model) = file.model else {
        unreachable!("kind checked above");
    };
    println!("rank,feature,importance");
    for (rank, (feature, importance)) in model.ranked_importances().iter().enumerate() {
        println!("{},{feature},{importance}", rank + 1);
    }
    Ok(())
}
