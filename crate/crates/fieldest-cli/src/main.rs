//! Command-line front end for the `fieldest` spatial estimation library.
//!
//! Subcommands mirror the library workflow: `fit` trains the hybrid model
//! and saves it as a JSON artifact, `predict` rasterizes a saved artifact,
//! `crossval` scores the hybrid by k-fold cross-validation, `compare` runs
//! the hybrid against the classical baselines under one protocol, `sweep`
//! re-fits across neighbor counts, and `rules export` dumps the trained
//! rule base in IF–THEN form.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fieldest::config::ConfigMap;
use fieldest::crossval::{
    compare_methods, k_fold_cv, EvaluationProtocol, GpMethod, IdwMethod, Interpolator,
};
use fieldest::f64_types::{FieldGrid, HybridModelArtifact, ObservationSet, PipelineConfig};
use fieldest::observations::{load_observations, CsvSchema};
use fieldest::pipeline::{
    fit_pipeline, render_sweep_aligned, sweep_m, sweep_to_delimited, HybridMethod,
};
use fieldest::{Error, ErrorClass};

#[derive(Parser)]
#[command(
    name = "fieldest",
    version,
    about = "Spatial field estimation from scattered observations",
    long_about = "Fits a hybrid spatial estimator (neighbor covariates -> low-dimensional \
                  embedding -> fuzzy rule system) on scattered (x, y, value) observations, \
                  and ships inverse-distance, ordinary-kriging and Gaussian-process \
                  baselines plus cross-validation tooling for honest comparison."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the hybrid model on a data set and save the artifact.
    Fit(FitArgs),
    /// Predict a raster from a saved artifact.
    Predict(PredictArgs),
    /// Score the hybrid by k-fold cross-validation.
    Crossval(CrossvalArgs),
    /// Compare the hybrid against IDW, ordinary kriging and GP regression.
    Compare(CompareArgs),
    /// Re-fit across several neighbor counts and report each one.
    Sweep(SweepArgs),
    /// Inspect a saved artifact.
    Rules(RulesArgs),
}

#[derive(clap::Args)]
struct FitArgs {
    /// Observation file: delimited text with x, y and value columns.
    #[arg(long)]
    data: PathBuf,
    /// Configuration file (flat key = value text); defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory that receives artifact.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct PredictArgs {
    /// Artifact produced by `fit`.
    #[arg(long)]
    artifact: PathBuf,
    /// Configuration file whose grid keys override the artifact's raster.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory that receives the raster file(s).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Raster output format.
    #[arg(long, value_enum, default_value_t = RasterFormat::Grid)]
    format: RasterFormat,
}

#[derive(clap::Args)]
struct CrossvalArgs {
    /// Observation file: delimited text with x, y and value columns.
    #[arg(long)]
    data: PathBuf,
    /// Configuration file (flat key = value text); defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of folds.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Directory that receives crossval.txt (tab-separated, full precision).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CompareArgs {
    /// Observation file: delimited text with x, y and value columns.
    #[arg(long)]
    data: PathBuf,
    /// Configuration file (flat key = value text); defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of cross-validation folds behind each row.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Directory that receives compare.txt (tab-separated, full precision).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Observation file: delimited text with x, y and value columns.
    #[arg(long)]
    data: PathBuf,
    /// Configuration file (flat key = value text); defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Neighbor counts to sweep, comma separated (e.g. 5,10,30).
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    /// Number of cross-validation folds per entry.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Directory that receives sweep.txt plus one raster per entry.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raster output format for the per-entry grids.
    #[arg(long, value_enum, default_value_t = RasterFormat::Grid)]
    format: RasterFormat,
}

#[derive(clap::Args)]
struct RulesArgs {
    #[command(subcommand)]
    action: RulesAction,
}

#[derive(Subcommand)]
enum RulesAction {
    /// Print the trained rule base as human-readable IF-THEN rules.
    Export(RulesExportArgs),
}

#[derive(clap::Args)]
struct RulesExportArgs {
    /// Artifact produced by `fit`.
    #[arg(long)]
    artifact: PathBuf,
    /// Directory that receives rules.txt instead of printing to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RasterFormat {
    /// Delimited text grid: header with bounds and shape, row-major values.
    Grid,
    /// 8-bit graymap plus a sidecar recording the value range.
    Pgm,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits; anything else
            // is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Crossval(args) => cmd_crossval(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Rules(args) => match args.action {
            RulesAction::Export(args) => cmd_rules_export(args),
        },
    }
}

/// Load the pipeline configuration, apply the seed override, validate.
fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig, Error> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            let mut map = ConfigMap::parse(&text)?;
            let cfg = PipelineConfig::from_config(&mut map)?;
            map.finish()?;
            cfg
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Read observations from a delimited text file with an x,y,value header.
fn load_data(path: &Path) -> Result<ObservationSet, Error> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open data file {}: {e}", path.display())))?;
    load_observations(file, &CsvSchema::default())
}

/// Create `dir` (and parents) if needed and return the joined file path.
fn out_path(dir: &Path, name: &str) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

/// Write a raster in the requested format; returns the paths written.
fn write_raster(
    grid: &FieldGrid,
    dir: &Path,
    stem: &str,
    format: RasterFormat,
) -> Result<Vec<PathBuf>, Error> {
    match format {
        RasterFormat::Grid => {
            let path = out_path(dir, &format!("{stem}.txt"))?;
            fs::write(&path, grid.to_delimited()?)?;
            Ok(vec![path])
        }
        RasterFormat::Pgm => {
            let (bytes, sidecar) = grid.to_pgm()?;
            let pgm = out_path(dir, &format!("{stem}.pgm"))?;
            fs::write(&pgm, bytes)?;
            let side = out_path(dir, &format!("{stem}.pgm.txt"))?;
            fs::write(&side, sidecar)?;
            Ok(vec![pgm, side])
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "n/a".into(),
    }
}

fn cmd_fit(args: FitArgs) -> Result<(), Error> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let obs = load_data(&args.data)?;
    let artifact = fit_pipeline(&obs, &cfg)?;
    let path = out_path(&args.out, "artifact.json")?;
    artifact.save(&path)?;
    let report = artifact.training_report()?;
    println!(
        "fitted hybrid model: {} observations, m = {}, d = {}",
        obs.len(),
        artifact.config.m,
        artifact.sdb.d
    );
    println!(
        "training fit: rmse {:.6}  mae {:.6}  r2 {}",
        report.rmse,
        report.mae,
        fmt_opt(report.r2)
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), Error> {
    let artifact = HybridModelArtifact::load(&args.artifact)?;
    let spec = match args.config.as_deref() {
        Some(p) => load_config(Some(p), None)?.grid,
        None => artifact.config.grid.clone(),
    };
    let grid = artifact.predict_grid(&spec)?;
    let masked = grid.invalid_count();
    if masked > 0 {
        log::warn!("{masked} of {} cells could not be predicted", spec.nx * spec.ny);
    }
    for path in write_raster(&grid, &args.out, "raster", args.format)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_crossval(args: CrossvalArgs) -> Result<(), Error> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let obs = load_data(&args.data)?;
    let method = HybridMethod {
        config: cfg.clone(),
    };
    let result = k_fold_cv(&obs, &method, args.k, cfg.seed)?;
    print!("{}", result.render_aligned());
    if let Some(dir) = args.out.as_deref() {
        let path = out_path(dir, "crossval.txt")?;
        fs::write(&path, result.to_delimited())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), Error> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let obs = load_data(&args.data)?;
    let hybrid = HybridMethod {
        config: cfg.clone(),
    };
    let idw = IdwMethod {
        config: cfg.baselines.idw.clone(),
    };
    let kriging = cfg.baselines.kriging.clone();
    let gp = GpMethod {
        config: cfg.baselines.gp.clone(),
    };
    let methods: [&dyn Interpolator<f64>; 4] = [&hybrid, &idw, &kriging, &gp];
    let protocol = EvaluationProtocol::CrossValidation {
        k: args.k,
        rng_seed: cfg.seed,
    };
    let table = compare_methods(&obs, &protocol, &methods)?;
    print!("{}", table.render_aligned());
    if let Some(dir) = args.out.as_deref() {
        let path = out_path(dir, "compare.txt")?;
        fs::write(&path, table.to_delimited())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    if args.m.is_empty() {
        return Err(Error::Config("sweep needs at least one m value".into()));
    }
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let obs = load_data(&args.data)?;
    let entries = sweep_m(&obs, &cfg, &args.m, args.k);
    print!("{}", render_sweep_aligned(&entries));
    if let Some(dir) = args.out.as_deref() {
        let path = out_path(dir, "sweep.txt")?;
        fs::write(&path, sweep_to_delimited(&entries))?;
        println!("wrote {}", path.display());
        for entry in &entries {
            if let Ok(outcome) = &entry.outcome {
                for path in
                    write_raster(&outcome.grid, dir, &format!("raster_m{}", entry.m), args.format)?
                {
                    println!("wrote {}", path.display());
                }
            }
        }
    }
    Ok(())
}

fn cmd_rules_export(args: RulesExportArgs) -> Result<(), Error> {
    let artifact = HybridModelArtifact::load(&args.artifact)?;
    let dump = artifact.rules.describe();
    match args.out.as_deref() {
        Some(dir) => {
            let path = out_path(dir, "rules.txt")?;
            fs::write(&path, dump)?;
            println!("wrote {}", path.display());
        }
        None => print!("{dump}"),
    }
    Ok(())
}
