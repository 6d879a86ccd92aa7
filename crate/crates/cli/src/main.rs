use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rockseg::bench::{apply_elimination, emit_report, load_report, run_stage, summarize, StageOutcome};
use rockseg::classifiers::Algorithm;
use rockseg::config::Config;
use rockseg::features::{FeatureSpec, FilterMode};
use rockseg::io::{
    load_catalog, load_label_stack, load_volume, save_csv_dataset, save_label_stack, save_raw_volume,
};
use rockseg::pipeline::{
    class_fractions, labeled_feature_rows, save_fractions_csv, save_probability_stacks, segment_volume,
    train_segmenter, with_workers, MissingClassPolicy, SegmentOptions, SegmenterModel, TrainOptions,
};
use rockseg::synth::{generate_phantom, generate_table1_dataset, sparse_mask, table1_catalog, TABLE1_LABEL_COLUMN};
use rockseg::{ErrorKind, LabelVolume, Result};

/// Random-forest segmentation of micro-CT rock volumes and a staged
/// classifier benchmark.
///
/// Exit codes: 0 success, 2 configuration error, 3 data error, 4 algorithm failure.
#[derive(Parser)]
#[command(name = "rockseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic data.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Compute the feature bank of a volume and write it as CSV.
    Featurize(FeaturizeArgs),
    /// Train a segmenter from a volume and a sparse label stack.
    Train(TrainArgs),
    /// Segment a volume with a trained model.
    Segment(SegmentArgs),
    /// Run one benchmark stage (1, 2 or 4).
    Bench(BenchArgs),
    /// Summarize a benchmark CSV and apply an elimination gate.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Expert-rule tabular data as CSV.
    Tabular(TabularArgs),
    /// Phantom volume with dense ground truth.
    Phantom(PhantomArgs),
}

#[derive(Args)]
struct TabularArgs {
    #[arg(long)]
    out: PathBuf,
    /// Config file with `stage1.*` keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rows: Option<usize>,
    /// Gray-level noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// Class proportions for Pore,throat,Solid,NC_Vugs.
    #[arg(long)]
    mix: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PhantomArgs {
    /// Output directory: volume.raw, labels/ and, with --mask, mask/.
    #[arg(long)]
    out: PathBuf,
    /// Config file with `phantom.*` keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dimensions such as 128x128x64.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    porosity: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a sparse training mask keeping this fraction of voxels.
    #[arg(long)]
    mask: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Volumetric,
    PerSlice,
}

impl From<Mode> for FilterMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Volumetric => FilterMode::Volumetric,
            Mode::PerSlice => FilterMode::PerSlice,
        }
    }
}

#[derive(Args)]
struct FeatureArgs {
    /// Feature spec file; one descriptor per line (`identity`, `gaussian S`,
    /// `dog S1 S2`, `gradmag S`, `mean R`, `variance R`). Defaults to the
    /// 12-feature bank.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "volumetric")]
    mode: Mode,
    /// Slices per feature slab.
    #[arg(long, default_value_t = 16)]
    batch: usize,
}

impl FeatureArgs {
    fn spec(&self) -> Result<FeatureSpec> {
        match &self.features {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| rockseg::Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
                FeatureSpec::parse(&text)
            }
            None => Ok(FeatureSpec::default_bank()),
        }
    }
}

#[derive(Args)]
struct FeaturizeArgs {
    /// RAW volume (with .json sidecar) or directory of PGM slices.
    #[arg(long)]
    volume: PathBuf,
    /// Label stack; only labeled voxels are written, with a label column.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    volume: PathBuf,
    /// Label stack directory; 0 means unlabeled.
    #[arg(long)]
    labels: PathBuf,
    /// Class catalog JSON; defaults to `<labels>/catalog.json`.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// RF, KNN, NB, LoR, SVM, MLP or DNN.
    #[arg(long, default_value = "RF")]
    algorithm: String,
    /// Config file with hyperparameter keys such as `rf.n_trees`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Warn instead of failing when a catalog class has no labels.
    #[arg(long)]
    allow_missing_classes: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    volume: PathBuf,
    /// Output directory: labels/, fractions.csv and, with --probabilities, probabilities/.
    #[arg(long)]
    out: PathBuf,
    /// Also write 8-bit per-class probability stacks.
    #[arg(long)]
    probabilities: bool,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    stage: Option<u8>,
    /// Flat key=value config, e.g. `rf.n_trees=100`, `stage1.rows=10000`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report CSV; a summary is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated algorithm roster.
    #[arg(long)]
    roster: Option<String>,
    /// lowest, threshold:<acc>, budget:<seconds> or drop:<A>,<B>.
    #[arg(long)]
    gate: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "lowest")]
    gate: String,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

fn synth(cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::Tabular(a) => {
            let mut c = load_config(a.config.as_deref())?;
            if let Some(v) = a.rows {
                c.set("stage1.rows", v);
            }
            if let Some(v) = a.noise {
                c.set("stage1.noise", v);
            }
            if let Some(v) = a.mix {
                c.set("stage1.mix", v);
            }
            if let Some(v) = a.seed {
                c.set("stage1.seed", v);
            }
            let cfg = c.synth_tabular()?;
            c.finish()?;
            let data = generate_table1_dataset(&cfg)?;
            save_csv_dataset(&data, &a.out, TABLE1_LABEL_COLUMN, Some(&table1_catalog()))?;
            println!("wrote {} rows to {}", data.n_rows(), a.out.display());
        }
        SynthCommand::Phantom(a) => {
            let mut c = load_config(a.config.as_deref())?;
            if let Some(v) = a.dims {
                c.set("phantom.dims", v);
            }
            if let Some(v) = a.porosity {
                c.set("phantom.porosity", v);
            }
            if let Some(v) = a.seed {
                c.set("phantom.seed", v);
            }
            let cfg = c.phantom()?;
            c.finish()?;
            let (gray, labels, catalog) = generate_phantom(&cfg)?;
            std::fs::create_dir_all(&a.out).map_err(|e| rockseg::Error::Io {
                path: a.out.clone(),
                source: e,
            })?;
            save_raw_volume(&gray, &a.out.join("volume.raw"))?;
            save_label_stack(&labels, &catalog, &a.out.join("labels"))?;
            if let Some(f) = a.mask {
                let mask = sparse_mask(&labels, f, cfg.seed)?;
                save_label_stack(&mask, &catalog, &a.out.join("mask"))?;
                println!("mask keeps {} voxels", mask.labeled_count());
            }
            for f in class_fractions(&labels, &catalog) {
                println!("{:<50} {:.4}", f.name, f.fraction);
            }
            println!("wrote phantom {} to {}", cfg.dims, a.out.display());
        }
    }
    Ok(())
}

fn featurize(a: FeaturizeArgs) -> Result<()> {
    let v = load_volume(&a.volume)?;
    let spec = a.features.spec()?;
    let mode = a.features.mode.into();
    let (lv, catalog) = match &a.labels {
        Some(dir) => {
            let cat = load_catalog(&dir.join("catalog.json"))?;
            (load_label_stack(dir, &cat)?, Some(cat))
        }
        None => (LabelVolume::new(v.dims(), vec![1; v.dims().len()])?, None),
    };
    let data = labeled_feature_rows(&v, &lv, &spec, mode, a.features.batch)?;
    match catalog {
        Some(cat) => save_csv_dataset(&data, &a.out, "label", Some(&cat))?,
        None => {
            let unlabeled = rockseg::Dataset::new(data.feature_names().to_vec(), data.values().to_vec(), None)?;
            save_csv_dataset(&unlabeled, &a.out, "label", None)?
        }
    }
    println!("wrote {} rows x {} features to {}", data.n_rows(), data.n_features(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let alg: Algorithm = a.algorithm.parse()?;
    let mut c = load_config(a.config.as_deref())?;
    let config = c.algorithm(alg)?;
    c.finish()?;
    let v = load_volume(&a.volume)?;
    let catalog = load_catalog(&a.catalog.clone().unwrap_or_else(|| a.labels.join("catalog.json")))?;
    let lv = load_label_stack(&a.labels, &catalog)?;
    let opts = TrainOptions {
        filter_mode: a.features.mode.into(),
        batch_slices: a.features.batch,
        missing_class: if a.allow_missing_classes {
            MissingClassPolicy::Warn
        } else {
            MissingClassPolicy::Error
        },
    };
    let spec = a.features.spec()?;
    let (model, report) = with_workers(a.workers, || train_segmenter(&v, &lv, &catalog, &spec, &config, a.seed, &opts))??;
    model.save(&a.out)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for (e, n) in catalog.entries().iter().zip(&report.class_counts) {
        println!("{:<50} {n} labeled voxels", e.name);
    }
    println!(
        "{}: training accuracy {:.4}; features {:.3}s, fit {:.3}s on {} worker(s)",
        alg, report.training_accuracy, report.feature_time_s, report.train_time_s, report.workers
    );
    println!("wrote model to {}", a.out.display());
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<()> {
    let t = Instant::now();
    let model = SegmenterModel::load(&a.model)?;
    let v = load_volume(&a.volume)?;
    let load_s = t.elapsed().as_secs_f64();
    let opts = SegmentOptions {
        batch_slices: a.batch,
        with_probabilities: a.probabilities,
    };
    let seg = with_workers(a.workers, || segment_volume(&model, &v, &opts))??;
    let t = Instant::now();
    save_label_stack(&seg.labels, &model.catalog, &a.out.join("labels"))?;
    let fractions = class_fractions(&seg.labels, &model.catalog);
    save_fractions_csv(&fractions, &a.out.join("fractions.csv"))?;
    if let Some(p) = &seg.probabilities {
        save_probability_stacks(p, &a.out.join("probabilities"))?;
    }
    let write_s = t.elapsed().as_secs_f64();
    for f in &fractions {
        println!("{:<50} {:.4}", f.name, f.fraction);
    }
    println!(
        "{} voxels: load {load_s:.3}s, features {:.3}s, predict {:.3}s, write {write_s:.3}s, total {:.3}s on {} worker(s)",
        v.dims().len(),
        seg.feature_time_s,
        seg.predict_time_s,
        load_s + seg.feature_time_s + seg.predict_time_s + write_s,
        seg.workers
    );
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut c = load_config(a.config.as_deref())?;
    let stage = match (a.stage, c.take::<u8>("stage")?) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => return Err(rockseg::Error::Config("no stage given (--stage or `stage=`)".into())),
    };
    if let Some(v) = a.workers {
        c.set("workers", v);
    }
    if let Some(v) = a.repeats {
        c.set("repeats", v);
    }
    if let Some(v) = a.seed {
        c.set("seed", v);
    }
    if let Some(v) = a.roster {
        c.set("roster", v);
    }
    if let Some(v) = a.gate {
        c.set("gate", v);
    }
    let plan = c.stage_plan(stage)?;
    let gate = c.gate()?;
    let out = c.take_raw("report").map(PathBuf::from).or(a.out);
    c.finish()?;
    match run_stage(&plan)? {
        StageOutcome::Skipped { reason } => {
            println!("stage {stage} skipped: {reason}");
        }
        StageOutcome::Completed(report) => {
            print!("{}", summarize(&report.records));
            for n in &report.notes {
                println!("note: {n}");
            }
            if report.records.len() >= 2 {
                let e = apply_elimination(&report.records, &gate)?;
                for line in &e.audit {
                    println!("gate: {line}");
                }
                println!("survivors: {}", e.survivors.join(", "));
            }
            if let Some(path) = out {
                emit_report(&report.records, &path)?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let records = load_report(&a.input)?;
    print!("{}", summarize(&records));
    if records.len() >= 2 {
        let e = apply_elimination(&records, &a.gate.parse()?)?;
        for line in &e.audit {
            println!("gate: {line}");
        }
        println!("survivors: {}", e.survivors.join(", "));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(c) => synth(c),
        Command::Featurize(a) => featurize(a),
        Command::Train(a) => train(a),
        Command::Segment(a) => segment(a),
        Command::Bench(a) => bench(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Algorithm => 4,
            })
        }
    }
}
