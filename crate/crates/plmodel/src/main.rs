//! Command-line front end for the path-loss toolkit. Every subcommand is a
//! thin wrapper around the library: scene handling, coverage simulation,
//! dataset construction, baseline scoring, model training and evaluation,
//! and the one-command comparative study.
//!
//! Exit codes: 0 success; 1 I/O, parse, or schema problems; 2 validation
//! or gate failures; 3 training failures.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use plmodel::dataset::{Dataset, FEATURE_NAMES};
use plmodel::empirical::CiParams;
use plmodel::metrics::evaluate_stratified;
use plmodel::ml::{
    cross_validate, fit_mlp, fit_model, MlConfig, ModelKind, TrainedModel,
};
use plmodel::pipeline::{
    ci_fit_dataset, ci_predictions, cost231_predictions, distance_curve_csv, fspl_predictions,
    mlp_log_csv, reproduce, simulate_runs, slug, BaselineKind, ReproduceScale, RunConfig,
};
use plmodel::scene::{generate_scene, Scene, SceneGenSpec};
use plmodel::{write_atomic, Error, Result};

/// Seed used whenever neither `--seed` nor a config file provides one.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "plmodel",
    version,
    about = "Deterministic multipath coverage simulation, empirical baselines, \
             and learned path-loss models for suburban radio planning"
)]
struct Cli {
    /// Run-configuration JSON (consumed by `simulate` and `dataset build`).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for every random decision; overrides the config file's seed.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Output directory; artifacts keep fixed names inside it.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or validate scene files.
    #[command(subcommand)]
    Scene(SceneCmd),

    /// Trace one coverage run per (site, height, frequency, power) in the config.
    Simulate {
        /// Also render a grayscale path-loss map (PGM) next to each CSV.
        #[arg(long)]
        pgm: bool,
    },

    /// Build per-site datasets and split them for training.
    #[command(subcommand)]
    Dataset(DatasetCmd),

    /// Score an empirical baseline against a simulated dataset.
    #[command(subcommand)]
    Baseline(BaselineCmd),

    /// Train one regressor and write its model file.
    Train(TrainArgs),

    /// Evaluate a trained model on a dataset, stratified by LoS/NLoS.
    Evaluate {
        /// Trained model file.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Dataset CSV to score on.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },

    /// Append a `pl_pred_db` column of model predictions to a feature CSV.
    Predict {
        /// Trained model file.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Input CSV; it must carry every feature column, in any order.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },

    /// Run the comparative study end to end and check its acceptance gates.
    Reproduce {
        /// Sweep size: "small" for a desk-scale grid, "full-sweep" for the
        /// complete parameter table.
        #[arg(long, default_value = "small", value_parser = parse_scale)]
        scale: ReproduceScale,
    },
}

#[derive(Subcommand)]
enum SceneCmd {
    /// Write a deterministically generated scene to <out>/scene.json.
    Gen {
        /// Number of buildings to place (0 gives a valid empty scene).
        #[arg(long)]
        buildings: Option<usize>,
        /// Scene width in meters.
        #[arg(long)]
        width_m: Option<f64>,
        /// Scene depth in meters.
        #[arg(long)]
        height_m: Option<f64>,
    },
    /// Check a scene file's invariants; exits 2 with a diagnostic on failure.
    Validate {
        /// Scene JSON to check.
        path: PathBuf,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Sweep every config run into one merged dataset CSV per site.
    Build,
    /// Split a dataset into train/test CSVs with a seeded shuffle.
    Split {
        /// Dataset CSV to split.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Fraction of rows routed to the test file.
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
    },
}

#[derive(Subcommand)]
enum BaselineCmd {
    /// Free-space path loss at each sample's frequency and distance.
    Fspl {
        /// Dataset CSV to score on.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Distance-bin width for the PL-vs-distance curve.
        #[arg(long, default_value_t = 50.0)]
        bin_width_m: f64,
    },
    /// Fit close-in reference-distance parameters, then score the fit.
    CiFit {
        /// Dataset CSV to fit and score on.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Close-in reference distance d0.
        #[arg(long, default_value_t = 1.0)]
        d0_m: f64,
        /// Distance-bin width for the PL-vs-distance curve.
        #[arg(long, default_value_t = 50.0)]
        bin_width_m: f64,
    },
    /// Score a previously fitted close-in parameter file.
    CiEval {
        /// Dataset CSV to score on.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Fitted parameter JSON written by ci-fit.
        #[arg(long, value_name = "PATH")]
        params: PathBuf,
        /// Distance-bin width for the PL-vs-distance curve.
        #[arg(long, default_value_t = 50.0)]
        bin_width_m: f64,
    },
    /// COST-231 Hata suburban formula; range warnings go to stderr.
    Cost231 {
        /// Dataset CSV to score on.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Receiver antenna height fed to the formula.
        #[arg(long, default_value_t = 1.5)]
        rx_height_m: f64,
        /// Distance-bin width for the PL-vs-distance curve.
        #[arg(long, default_value_t = 50.0)]
        bin_width_m: f64,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Model family: dtr, rfr, knn, or mlp.
    #[arg(long, value_parser = parse_model_kind)]
    model: ModelKind,
    /// Training dataset CSV.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Neighbor count (knn).
    #[arg(long)]
    k: Option<usize>,
    /// Training epochs (mlp).
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate (mlp).
    #[arg(long)]
    lr: Option<f64>,
    /// Mini-batch size (mlp).
    #[arg(long)]
    batch_size: Option<usize>,
    /// Number of trees (rfr).
    #[arg(long)]
    n_estimators: Option<usize>,
    /// Depth cap for tree models.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Minimum samples needed to split a node (tree models).
    #[arg(long)]
    min_samples_split: Option<usize>,
    /// Run k-fold cross-validation before the final fit and print the folds.
    #[arg(long, value_name = "FOLDS")]
    cv: Option<usize>,
}

fn parse_scale(s: &str) -> std::result::Result<ReproduceScale, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_model_kind(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Global flags resolved once, shared by every handler.
struct Ctx {
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Loads the run configuration and applies `--seed`/`--out` overrides.
    fn load_config(&self) -> Result<RunConfig> {
        let path = self.config.as_ref().ok_or_else(|| {
            Error::Validation("--config <path> is required for this command".into())
        })?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Scene(cmd) => cmd_scene(&ctx, cmd),
        Command::Simulate { pgm } => cmd_simulate(&ctx, pgm),
        Command::Dataset(cmd) => cmd_dataset(&ctx, cmd),
        Command::Baseline(cmd) => cmd_baseline(&ctx, cmd),
        Command::Train(args) => cmd_train(&ctx, args),
        Command::Evaluate { model, data } => cmd_evaluate(&ctx, &model, &data),
        Command::Predict { model, input } => cmd_predict(&ctx, &model, &input),
        Command::Reproduce { scale } => cmd_reproduce(&ctx, scale),
    }
}

fn cmd_scene(ctx: &Ctx, cmd: SceneCmd) -> Result<()> {
    match cmd {
        SceneCmd::Gen {
            buildings,
            width_m,
            height_m,
        } => {
            let mut spec = SceneGenSpec::default();
            if let Some(n) = buildings {
                spec.n_buildings = n;
            }
            if let Some(w) = width_m {
                spec.width_m = w;
            }
            if let Some(h) = height_m {
                spec.height_m = h;
            }
            let seed = ctx.seed();
            let scene = generate_scene(seed, &spec)?;
            let path = ctx.out_dir().join("scene.json");
            scene.save(&path)?;
            println!(
                "wrote scene with {} buildings over {:.0} x {:.0} m (seed {seed}) to {}",
                scene.buildings.len(),
                spec.width_m,
                spec.height_m,
                path.display()
            );
            Ok(())
        }
        SceneCmd::Validate { path } => {
            let scene = Scene::load(&path)?;
            scene.validate()?;
            println!(
                "{} is valid: {} buildings",
                path.display(),
                scene.buildings.len()
            );
            Ok(())
        }
    }
}

fn cmd_simulate(ctx: &Ctx, pgm: bool) -> Result<()> {
    let cfg = ctx.load_config()?;
    let records = simulate_runs(&cfg, pgm)?;
    for r in &records {
        println!(
            "{}: h {} m, {} GHz, {} W -> {}/{} cells covered ({})",
            r.site, r.h_tx_m, r.f_ghz, r.p_tx_w, r.n_covered, r.n_cells, r.path
        );
    }
    println!(
        "{} runs indexed in {}",
        records.len(),
        cfg.out_dir.join("runs.json").display()
    );
    Ok(())
}

fn cmd_dataset(ctx: &Ctx, cmd: DatasetCmd) -> Result<()> {
    match cmd {
        DatasetCmd::Build => {
            let cfg = ctx.load_config()?;
            let scene = cfg.resolve_scene()?;
            for site in &cfg.sites {
                let ds = plmodel::dataset::sweep(&scene, site, &cfg.grid, &cfg.sim, &cfg.sweep)?;
                let rel = format!("datasets/site_{}.csv", slug(&site.name));
                let path = cfg.out_dir.join(&rel);
                ds.save_csv(&path)?;
                let combos = cfg.sweep.heights_m.len()
                    * cfg.sweep.frequencies_ghz.len()
                    * cfg.sweep.powers_w.len();
                println!(
                    "{}: merged {combos} sweep runs into {} samples ({})",
                    site.name,
                    ds.len(),
                    path.display()
                );
            }
            Ok(())
        }
        DatasetCmd::Split {
            data,
            test_fraction,
        } => {
            let ds = Dataset::load_csv(&data)?;
            let seed = ctx.seed();
            let (train, test) = ds.train_test_split(test_fraction, seed)?;
            let out = ctx.out_dir();
            let train_path = out.join("train.csv");
            let test_path = out.join("test.csv");
            train.save_csv(&train_path)?;
            test.save_csv(&test_path)?;
            println!(
                "split {} samples into {} train / {} test (fraction {test_fraction}, seed {seed})",
                ds.len(),
                train.len(),
                test.len()
            );
            println!("wrote {} and {}", train_path.display(), test_path.display());
            Ok(())
        }
    }
}

fn cmd_baseline(ctx: &Ctx, cmd: BaselineCmd) -> Result<()> {
    let out = ctx.out_dir();
    match cmd {
        BaselineCmd::Fspl { data, bin_width_m } => {
            let ds = Dataset::load_csv(&data)?;
            let pred = fspl_predictions(&ds)?;
            report_baseline(BaselineKind::Fspl, &ds, &pred, bin_width_m, &out, &data)
        }
        BaselineCmd::CiFit {
            data,
            d0_m,
            bin_width_m,
        } => {
            let ds = Dataset::load_csv(&data)?;
            let params = ci_fit_dataset(&ds, d0_m)?;
            println!(
                "fitted close-in parameters: n = {:.6}, sigma = {:.6} dB (d0 = {} m)",
                params.n, params.sigma_db, params.d0_m
            );
            let params_path = out.join("ci_params.json");
            let mut text = serde_json::to_string_pretty(&params)
                .map_err(|e| Error::Parse(format!("parameter serialization failed: {e}")))?;
            text.push('\n');
            write_atomic(&params_path, text.as_bytes())?;
            println!("wrote {}\n", params_path.display());
            let pred = ci_predictions(&params, &ds)?;
            report_baseline(BaselineKind::CloseIn, &ds, &pred, bin_width_m, &out, &data)
        }
        BaselineCmd::CiEval {
            data,
            params,
            bin_width_m,
        } => {
            let ds = Dataset::load_csv(&data)?;
            let text = std::fs::read_to_string(&params)?;
            let params: CiParams = serde_json::from_str(&text)
                .map_err(|e| Error::Schema(format!("close-in parameter file: {e}")))?;
            let pred = ci_predictions(&params, &ds)?;
            report_baseline(BaselineKind::CloseIn, &ds, &pred, bin_width_m, &out, &data)
        }
        BaselineCmd::Cost231 {
            data,
            rx_height_m,
            bin_width_m,
        } => {
            let ds = Dataset::load_csv(&data)?;
            let (pred, warnings) = cost231_predictions(&ds, rx_height_m)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            report_baseline(BaselineKind::Cost231, &ds, &pred, bin_width_m, &out, &data)
        }
    }
}

/// Shared baseline tail: stratified report to stdout plus report and
/// PL-vs-distance curve files under the output directory.
fn report_baseline(
    kind: BaselineKind,
    ds: &Dataset,
    pred: &[f64],
    bin_width_m: f64,
    out: &Path,
    data_path: &Path,
) -> Result<()> {
    let report = evaluate_stratified(&ds.targets(), pred, &ds.los_flags())?;
    println!(
        "{} on {} ({} samples)\n",
        kind.label(),
        data_path.display(),
        ds.len()
    );
    print!("{}", report.to_text());
    let name = kind.name();
    let text_path = out.join(format!("baseline_{name}_report.txt"));
    write_atomic(&text_path, report.to_text().as_bytes())?;
    let csv_path = out.join(format!("baseline_{name}_report.csv"));
    write_atomic(&csv_path, report.to_csv().as_bytes())?;
    let curve_path = out.join(format!("baseline_{name}_curve.csv"));
    write_atomic(&curve_path, distance_curve_csv(ds, pred, bin_width_m)?.as_bytes())?;
    println!(
        "\nwrote {}, {}, {}",
        text_path.display(),
        csv_path.display(),
        curve_path.display()
    );
    Ok(())
}

fn cmd_train(ctx: &Ctx, args: TrainArgs) -> Result<()> {
    let ds = Dataset::load_csv(&args.data)?;
    let x = ds.features();
    let y = ds.targets();

    let mut cfg = MlConfig::default();
    if let Some(k) = args.k {
        cfg.knn.k = k;
    }
    if let Some(e) = args.epochs {
        cfg.mlp.epochs = e;
    }
    if let Some(lr) = args.lr {
        cfg.mlp.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        cfg.mlp.batch_size = b;
    }
    if let Some(n) = args.n_estimators {
        cfg.rfr.n_estimators = n;
    }
    if let Some(d) = args.max_depth {
        cfg.dtr.max_depth = d;
        cfg.rfr.max_depth = d;
    }
    if let Some(m) = args.min_samples_split {
        cfg.dtr.min_samples_split = m;
        cfg.rfr.min_samples_split = m;
    }

    let seed = ctx.seed();
    if let Some(folds) = args.cv {
        let cv = cross_validate(args.model, &x, &y, &cfg, folds, seed)?;
        println!("{folds}-fold cross-validation on {} samples:", ds.len());
        for f in &cv.folds {
            println!(
                "  fold {}: rmse {:.3} dB, mape {:.3} %, msle {:.4e}",
                f.fold, f.metrics.rmse_db, f.metrics.mape_pct, f.metrics.msle
            );
        }
        println!(
            "  mean: rmse {:.3} dB, mape {:.3} %, msle {:.4e}\n",
            cv.mean_rmse_db, cv.mean_mape_pct, cv.mean_msle
        );
    }

    let out = ctx.out_dir();
    let model_path = out.join(format!("{}.json", args.model.name()));
    match args.model {
        ModelKind::Mlp => {
            let (model, history) = fit_mlp(&x, &y, &cfg, seed)?;
            model.save(&model_path)?;
            let log_path = out.join("mlp_training_log.csv");
            write_atomic(&log_path, mlp_log_csv(&history).as_bytes())?;
            if let Some(last) = history.last() {
                let val = last
                    .val_mse
                    .map(|v| format!(", val mse {v:.3}"))
                    .unwrap_or_default();
                println!(
                    "trained mlp for {} epochs; final train mse {:.3}{val}",
                    history.len(),
                    last.train_mse
                );
            }
            println!("wrote {} and {}", model_path.display(), log_path.display());
        }
        kind => {
            let model = fit_model(kind, &x, &y, &cfg, seed)?;
            model.save(&model_path)?;
            println!(
                "trained {} on {} samples; wrote {}",
                kind.name(),
                ds.len(),
                model_path.display()
            );
        }
    }
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx, model_path: &Path, data_path: &Path) -> Result<()> {
    let model = TrainedModel::load(model_path)?;
    let ds = Dataset::load_csv(data_path)?;
    if model.feature_width() != FEATURE_NAMES.len() {
        return Err(Error::Schema(format!(
            "model expects {} feature columns but the dataset schema has {}",
            model.feature_width(),
            FEATURE_NAMES.len()
        )));
    }
    let pred = model.predict(&ds.features())?;
    let report = evaluate_stratified(&ds.targets(), &pred, &ds.los_flags())?;
    println!(
        "{} on {} ({} samples)\n",
        model.kind().name(),
        data_path.display(),
        ds.len()
    );
    print!("{}", report.to_text());
    if let Some(out) = &ctx.out {
        let text_path = out.join("evaluation_report.txt");
        write_atomic(&text_path, report.to_text().as_bytes())?;
        let csv_path = out.join("evaluation_report.csv");
        write_atomic(&csv_path, report.to_csv().as_bytes())?;
        println!("\nwrote {} and {}", text_path.display(), csv_path.display());
    }
    Ok(())
}

/// Reads a generic CSV by header name, predicts with the model, and writes
/// every original column back followed by `pl_pred_db`. Rows keep their
/// order; an input with only a header yields only a header.
fn cmd_predict(ctx: &Ctx, model_path: &Path, input: &Path) -> Result<()> {
    let model = TrainedModel::load(model_path)?;
    if model.feature_width() != FEATURE_NAMES.len() {
        return Err(Error::Schema(format!(
            "model expects {} feature columns but this tool's schema has {}",
            model.feature_width(),
            FEATURE_NAMES.len()
        )));
    }
    let text = std::fs::read_to_string(input)?;
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", input.display())))?
        .clone();

    let mut columns = Vec::with_capacity(FEATURE_NAMES.len());
    let mut missing = Vec::new();
    for name in FEATURE_NAMES {
        match headers.iter().position(|h| h == name) {
            Some(i) => columns.push(i),
            None => missing.push(name),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "input is missing feature columns: {}",
            missing.join(", ")
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
        let mut feats = Vec::with_capacity(columns.len());
        for (j, &c) in columns.iter().enumerate() {
            let field = rec
                .get(c)
                .ok_or_else(|| Error::Parse(format!("row {}: record is too short", i + 1)))?;
            feats.push(parse_feature(FEATURE_NAMES[j], field).map_err(|msg| {
                Error::Parse(format!("row {}, column {}: {msg}", i + 1, FEATURE_NAMES[j]))
            })?);
        }
        rows.push(feats);
        records.push(rec);
    }

    let pred = model.predict(&rows)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header: Vec<&str> = headers.iter().collect();
        header.push("pl_pred_db");
        w.write_record(&header)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for (rec, p) in records.iter().zip(&pred) {
            let mut row: Vec<String> = rec.iter().map(str::to_string).collect();
            row.push(format!("{p}"));
            w.write_record(&row)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
    }
    let out_path = ctx.out_dir().join("predictions.csv");
    write_atomic(&out_path, &buf)?;
    println!("wrote {} predictions to {}", pred.len(), out_path.display());
    Ok(())
}

/// Parses one feature field. The LoS flag accepts 1/0 and true/false; every
/// other feature is a plain float.
fn parse_feature(name: &str, field: &str) -> std::result::Result<f64, String> {
    if name == "los" {
        match field.trim().to_ascii_lowercase().as_str() {
            "1" | "true" => return Ok(1.0),
            "0" | "false" => return Ok(0.0),
            other => return Err(format!("expected 1/0/true/false, got {other:?}")),
        }
    }
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("{e} in {field:?}"))
}

fn cmd_reproduce(ctx: &Ctx, scale: ReproduceScale) -> Result<()> {
    let out = ctx.out.clone().ok_or_else(|| {
        Error::Validation(
            "--out <dir> is required: the study writes its artifact tree into a fresh directory"
                .into(),
        )
    })?;
    let seed = ctx.seed();
    let summary = reproduce(&out, scale, seed)?;
    println!("comparative study, seed {seed}:");
    for g in &summary.gates {
        let mark = if g.passed { "PASS" } else { "FAIL" };
        println!("[{mark}] {} - {}", g.name, g.detail);
    }
    println!(
        "{} artifacts under {}; see manifest.json for content hashes",
        summary.artifacts.len(),
        out.display()
    );
    summary.ensure_gates()
}
