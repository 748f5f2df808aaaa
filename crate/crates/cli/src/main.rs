use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rfsvm::harness::{
    emit_report, render_text, run_rfsvm, run_single_view_baseline, EvalReport, ReportFormat,
};
use rfsvm::ingest::{assemble_dataset, load_view, FeatureView, LabeledDataset, RunConfig};
use rfsvm::rfd::{
    forest_dissimilarity_matrix, joint_dissimilarity, min_eigenvalue, read_square_csv,
};
use rfsvm::texture::{extract_corpus, GlcmParams};
use rfsvm::{train_forest, ForestParams};

#[derive(Parser)]
#[command(
    name = "rfsvm",
    version,
    about = "Random forest dissimilarity multi-view classification"
)]
struct Cli {
    /// Seed for every random choice; overrides `rng_seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract PFTAS and GLCM features for the images in a manifest.
    ExtractTexture {
        /// CSV with columns sample_id,image_path.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// GLCM pixel distances.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        distances: Vec<usize>,
        /// Grey levels used for the co-occurrence matrices.
        #[arg(long, default_value_t = 256)]
        levels: usize,
    },
    /// Random forest accuracy of a single view under repeated stratified holdout.
    Baseline {
        #[arg(long)]
        view: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// RFSVM over one or more views under repeated stratified holdout.
    Rfsvm {
        #[arg(long, num_args = 1.., required = true)]
        views: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Joint forest dissimilarity of all samples, written as a square CSV.
    Dissimilarity {
        #[arg(long, num_args = 1.., required = true)]
        views: Vec<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summary statistics of a square dissimilarity or similarity CSV.
    InspectMatrix {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    labels: PathBuf,
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the report.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Text => ReportFormat::Text,
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> rfsvm::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    Ok(cfg)
}

fn run_config(run: &RunArgs, seed: Option<u64>) -> rfsvm::Result<RunConfig> {
    let mut cfg = load_config(run.config.as_deref(), seed)?;
    if let Some(t) = run.trees {
        cfg.n_trees = t;
    }
    if let Some(r) = run.repeats {
        cfg.n_repeats = r;
    }
    if let Some(f) = run.train_fraction {
        cfg.train_fraction = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_dataset(views: &[PathBuf], labels: &Path) -> rfsvm::Result<LabeledDataset> {
    let views = views
        .iter()
        .map(load_view)
        .collect::<rfsvm::Result<Vec<FeatureView>>>()?;
    assemble_dataset(views, labels)
}

fn finish(report: &EvalReport, run: &RunArgs) -> anyhow::Result<()> {
    print!("{}", render_text(report));
    if let Some(path) = &run.report {
        emit_report(report, path, run.format.into())?;
    }
    Ok(())
}

fn inspect(path: &Path) -> anyhow::Result<()> {
    let (ids, m) = read_square_csv(path)?;
    let n = ids.len();
    let off: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m[[i, j]])
        .collect();
    let diag: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    let max_asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (m[[i, j]] - m[[j, i]]).abs())
        .fold(0.0, f64::max);
    let stats = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
        (lo, hi, mean)
    };
    let (lo, hi, mean) = stats(&off);
    let (dlo, dhi, _) = stats(&diag);
    println!("samples: {n}");
    println!("off-diagonal: min {lo:.6}, max {hi:.6}, mean {mean:.6}");
    println!("diagonal: min {dlo:.6}, max {dhi:.6}");
    println!("max asymmetry: {max_asym:e}");
    println!("min eigenvalue: {:.6e}", min_eigenvalue(m.view()));
    let kind = if max_asym == 0.0
        && diag.iter().all(|&d| d == 0.0)
        && off.iter().all(|v| (0.0..=1.0).contains(v))
    {
        "valid dissimilarity matrix"
    } else if max_asym == 0.0 && diag.iter().all(|&d| d == 1.0) {
        "unit-diagonal similarity matrix"
    } else {
        "neither a dissimilarity nor a unit-diagonal similarity matrix"
    };
    println!("kind: {kind}");
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::ExtractTexture {
            manifest,
            out,
            distances,
            levels,
        } => {
            let params = GlcmParams { distances, levels };
            let run = extract_corpus(&manifest, &out, &params)?;
            println!(
                "wrote {} rows x {} features to {}",
                run.view.n_samples(),
                run.view.n_features(),
                out.display()
            );
            for f in &run.failures {
                eprintln!(
                    "failed: {} ({}): {}",
                    f.sample_id,
                    f.path.display(),
                    f.message
                );
            }
            if !run.failures.is_empty() {
                bail!(ExtractionIncomplete(run.failures.len()));
            }
        }
        Command::Baseline { view, run } => {
            let cfg = run_config(&run, cli.seed)?;
            let name = load_view(&view)?.name().to_string();
            let ds = load_dataset(&[view], &run.labels)?;
            finish(&run_single_view_baseline(&ds, &name, &cfg)?, &run)?;
        }
        Command::Rfsvm { views, run } => {
            let cfg = run_config(&run, cli.seed)?;
            let ds = load_dataset(&views, &run.labels)?;
            let names: Vec<String> = ds.view_names().iter().map(|s| s.to_string()).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            finish(&run_rfsvm(&ds, &refs, &cfg)?, &run)?;
        }
        Command::Dissimilarity {
            views,
            labels,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref(), cli.seed)?;
            let ds = load_dataset(&views, &labels)?;
            let params = ForestParams {
                n_trees: cfg.n_trees,
                mtry: cfg.mtry,
                seed: cfg.rng_seed,
            };
            let mats = ds
                .views()
                .iter()
                .map(|v| {
                    let forest = train_forest(v, ds.labels(), ds.class_names(), &params)?;
                    forest_dissimilarity_matrix(&forest, v)
                })
                .collect::<rfsvm::Result<Vec<_>>>()?;
            joint_dissimilarity(&mats)?.write_csv(&out)?;
            println!(
                "wrote {0}x{0} joint dissimilarity to {1}",
                ds.n_samples(),
                out.display()
            );
        }
        Command::InspectMatrix { input } => inspect(&input)?,
    }
    Ok(())
}

#[derive(Debug)]
struct ExtractionIncomplete(usize);

impl std::fmt::Display for ExtractionIncomplete {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} image(s) could not be processed", self.0)
    }
}

impl std::error::Error for ExtractionIncomplete {}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<rfsvm::Error>() {
        Some(e) => e.exit_code() as u8,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli).context("rfsvm") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}
