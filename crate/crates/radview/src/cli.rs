//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! data errors. Outputs go under `--out` only.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use radview_core::archzoo::{
    build_mini_resnet, describe_architecture, relative_parameters, ArchName, MiniResNetConfig,
};
use radview_core::augment::{center_crop, AugmentConfig, CropMode};
use radview_core::cam::compute_cam;
use radview_core::dataset::{audit_sets, split_sets, standardize_view_name, RadiographRecord, Split};
use radview_core::engine::{Model, OptimizerConfig};
use radview_core::imaging::prepare;
use radview_core::metrics::{confusion, MetricsReport};
use radview_core::stats::{association_by_label, chi2_sf, overall_association, phi_coefficient, ScoredRecord};
use radview_core::synthgen::{generate_corpus, PhantomConfig};
use radview_core::taxonomy::{parse_label, NUM_CLASSES};
use radview_core::trainer::{evaluate, train, LabeledImage, TrainConfig};
use radview_core::{Image16, Orientation};

use crate::config::{ConfigError, RunConfig};
use crate::records::{format_records, Metadata};
use crate::{checkpoint, dicom, pgm, ppm, report};

#[derive(Debug, Parser)]
#[command(name = "radview", version, about = "Radiograph view classification pipeline")]
pub struct Cli {
    /// INI config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker cap. All stages currently run on one thread.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a directory of DICOM files (one subdirectory per set) to PGM + metadata CSV.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Check every set for exactly one radiograph per view.
    Audit {
        #[arg(long)]
        metadata: PathBuf,
    },
    /// Orient, pad to square and downsample every image.
    Preprocess {
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        side: Option<usize>,
    },
    /// Assign sets to train / validation / test.
    Split {
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        val: Option<usize>,
        #[arg(long)]
        test: Option<usize>,
    },
    /// Generate a synthetic phantom corpus.
    Synth(SynthArgs),
    /// Train a mini-ResNet on the train split.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Evaluate {
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Render class activation map overlays.
    Cam {
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Maximum number of images.
        #[arg(long, default_value_t = 48)]
        limit: usize,
    },
    /// Side-marker and redaction association tests on evaluation output.
    Stats {
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Parameter counts of the reference architectures.
    ArchInfo {
        #[arg(long, default_value_t = 1000)]
        classes: usize,
        #[arg(long, default_value_t = 3)]
        channels: usize,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub sets: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub marker_prob: Option<f64>,
    #[arg(long)]
    pub redact_prob: Option<f64>,
    #[arg(long)]
    pub asymmetry: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub metadata: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub input_side: Option<usize>,
    /// Comma-separated blocks per stage.
    #[arg(long)]
    pub stage_blocks: Option<String>,
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub no_augment: bool,
    #[arg(long)]
    pub zoom_lo: Option<f64>,
    #[arg(long)]
    pub zoom_hi: Option<f64>,
    #[arg(long)]
    pub hist_points: Option<usize>,
    #[arg(long)]
    pub hist_mag: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn data<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data(format!("{context}: {e}"))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(data(dir.display()))?;
    }
    fs::write(path, contents).map_err(data(path.display()))
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.set("seed", cli.seed)?;
    cfg.set("threads", cli.threads)?;
    cfg.set("out", cli.out.as_ref().map(|p| p.display()))?;
    if cfg.get::<usize>("threads")? == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let out = PathBuf::from(cfg.raw("out"));
    match cli.command {
        Command::Ingest { input } => ingest(&input, &out),
        Command::Audit { metadata } => audit(&metadata, &out),
        Command::Preprocess { metadata, side } => {
            cfg.set("preprocess.side", side)?;
            preprocess(&metadata, cfg.get("preprocess.side")?, &out)
        }
        Command::Split {
            metadata,
            train,
            val,
            test,
        } => {
            cfg.set("split.train", train)?;
            cfg.set("split.val", val)?;
            cfg.set("split.test", test)?;
            let counts = (cfg.get("split.train")?, cfg.get("split.val")?, cfg.get("split.test")?);
            split(&metadata, counts, cfg.get("seed")?, &out)
        }
        Command::Synth(a) => {
            cfg.set("synth.sets", a.sets)?;
            cfg.set("synth.side", a.side)?;
            cfg.set("synth.marker_prob", a.marker_prob)?;
            cfg.set("synth.redact_prob", a.redact_prob)?;
            cfg.set("synth.asymmetry", a.asymmetry)?;
            cfg.set("synth.noise", a.noise)?;
            cfg.set("synth.jitter", a.jitter)?;
            synth(&cfg, &out)
        }
        Command::Train(a) => {
            cfg.set("train.epochs", a.epochs)?;
            cfg.set("train.batch_size", a.batch_size)?;
            cfg.set("train.lr", a.lr)?;
            cfg.set("train.momentum", a.momentum)?;
            cfg.set("train.input_side", a.input_side)?;
            cfg.set("model.stage_blocks", a.stage_blocks)?;
            cfg.set("model.base_channels", a.base_channels)?;
            cfg.set("augment.enabled", a.no_augment.then_some(false))?;
            cfg.set("augment.zoom_lo", a.zoom_lo)?;
            cfg.set("augment.zoom_hi", a.zoom_hi)?;
            cfg.set("augment.hist_points", a.hist_points)?;
            cfg.set("augment.hist_mag", a.hist_mag)?;
            train_cmd(&a.metadata, &cfg, &out)
        }
        Command::Evaluate {
            metadata,
            checkpoint,
            split,
        } => evaluate_cmd(&metadata, &checkpoint, split, &out),
        Command::Cam {
            metadata,
            checkpoint,
            split,
            limit,
        } => cam_cmd(&metadata, &checkpoint, split, limit, &out),
        Command::Stats { predictions } => stats_cmd(&predictions, &out),
        Command::ArchInfo { classes, channels } => arch_info(classes, channels, &out),
    }
}

fn load_metadata(path: &Path) -> Result<Metadata> {
    Metadata::load(path).map_err(data(path.display()))
}

/// Rewrites record paths so they resolve from `out`.
fn rebase(meta: &Metadata, records: &mut [RadiographRecord], out: &Path) -> Result<()> {
    let same = match (fs::canonicalize(meta.root.join(".")), fs::canonicalize(out)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same {
        return Ok(());
    }
    for r in records {
        let p = meta.image_path(r);
        let abs = fs::canonicalize(&p).map_err(data(p.display()))?;
        r.file = abs.display().to_string();
    }
    Ok(())
}

fn ingest(input: &Path, out: &Path) -> Result<()> {
    let mut sets: Vec<PathBuf> = fs::read_dir(input)
        .map_err(data(input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    sets.sort();
    let mut records = Vec::new();
    let mut rejects = String::from("set_id,file,reason\n");
    for set_dir in sets {
        let set_id = set_dir.file_name().unwrap().to_string_lossy().to_string();
        let mut files: Vec<PathBuf> = fs::read_dir(&set_dir)
            .map_err(data(set_dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for file in files {
            let name = file.file_name().unwrap().to_string_lossy().to_string();
            let stem = file.file_stem().unwrap().to_string_lossy().to_string();
            let parsed = fs::read(&file)
                .map_err(|e| e.to_string())
                .and_then(|b| dicom::parse_dicom(&b).map_err(|e| e.to_string()))
                .and_then(|obj| {
                    let meta = dicom::extract_meta(&obj).map_err(|e| e.to_string())?;
                    let img = dicom::extract_pixels(&obj).map_err(|e| e.to_string())?;
                    let label = standardize_view_name(&meta.raw_view)
                        .map_err(|e| format!("{e} (view text {:?})", meta.raw_view))?;
                    Ok((meta, img, label))
                });
            match parsed {
                Ok((meta, img, label)) => {
                    let rel = format!("images/{set_id}/{stem}.pgm");
                    pgm::save_pgm16(&out.join(&rel), &img).map_err(data(&rel))?;
                    records.push(RadiographRecord {
                        set_id: set_id.clone(),
                        file: rel,
                        raw_view: meta.raw_view,
                        label,
                        has_marker: false,
                        redacted: false,
                        orientation: Orientation::default(),
                        split: None,
                    });
                }
                Err(reason) => {
                    let reason = reason.replace('"', "'");
                    rejects.push_str(&format!("{set_id},{name},\"{reason}\"\n"));
                }
            }
        }
    }
    write(&out.join("metadata.csv"), format_records(&records))?;
    write(&out.join("rejects.csv"), rejects)?;
    eprintln!("ingested {} radiographs", records.len());
    Ok(())
}

fn audit(metadata: &Path, out: &Path) -> Result<()> {
    let meta = load_metadata(metadata)?;
    let audits = audit_sets(&meta.records);
    write(&out.join("audit.csv"), report::audit_csv(&audits))?;
    let complete = audits.iter().filter(|a| a.is_complete()).count();
    println!("{complete} complete, {} incomplete", audits.len() - complete);
    Ok(())
}

fn preprocess(metadata: &Path, side: usize, out: &Path) -> Result<()> {
    let meta = load_metadata(metadata)?;
    let mut records = meta.records.clone();
    for r in &mut records {
        let path = meta.image_path(r);
        let img = pgm::load_pgm16(&path).map_err(data(path.display()))?;
        let prepared = prepare(&img, r.orientation, side).map_err(data(path.display()))?;
        let rel = format!("images/{}/{}.pgm", r.set_id, stem(&r.file));
        pgm::save_pgm16(&out.join(&rel), &prepared).map_err(data(&rel))?;
        r.file = rel;
        r.orientation = Orientation::default();
    }
    write(&out.join("metadata.csv"), format_records(&records))
}

fn stem(file: &str) -> String {
    Path::new(file)
        .file_stem()
        .map_or_else(|| file.to_string(), |s| s.to_string_lossy().to_string())
}

fn split(metadata: &Path, counts: (usize, usize, usize), seed: u64, out: &Path) -> Result<()> {
    let meta = load_metadata(metadata)?;
    let mut ids: Vec<String> = meta.records.iter().map(|r| r.set_id.clone()).collect();
    ids.sort();
    ids.dedup();
    let assignment = split_sets(&ids, counts, seed).map_err(data("split"))?;
    let mut records = meta.records.clone();
    for r in &mut records {
        r.split = assignment.get(&r.set_id).copied();
    }
    fs::create_dir_all(out).map_err(data(out.display()))?;
    rebase(&meta, &mut records, out)?;
    write(&out.join("metadata.csv"), format_records(&records))
}

fn synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let pc = PhantomConfig {
        side: cfg.get("synth.side")?,
        marker_prob: cfg.get("synth.marker_prob")?,
        redact_prob: cfg.get("synth.redact_prob")?,
        asymmetry: cfg.get("synth.asymmetry")?,
        noise: cfg.get("synth.noise")?,
        jitter: cfg.get("synth.jitter")?,
        seed: cfg.get("seed")?,
    };
    pc.validate().map_err(CliError::Usage)?;
    let corpus = generate_corpus(cfg.get("synth.sets")?, &pc);
    let mut records = Vec::with_capacity(corpus.len());
    for (mut rec, phantom) in corpus {
        rec.file = format!("images/{}", rec.file);
        pgm::save_pgm16(&out.join(&rec.file), &phantom.image).map_err(data(&rec.file))?;
        records.push(rec);
    }
    write(&out.join("metadata.csv"), format_records(&records))
}

fn load_split(meta: &Metadata, split: Split) -> Result<Vec<(RadiographRecord, LabeledImage)>> {
    meta.records
        .iter()
        .filter(|r| r.split == Some(split))
        .map(|r| {
            let path = meta.image_path(r);
            let image = pgm::load_pgm16(&path).map_err(data(path.display()))?;
            let sample = LabeledImage {
                image,
                label: r.label.class_index(),
            };
            Ok((r.clone(), sample))
        })
        .collect()
}

fn model_config(cfg: &RunConfig) -> Result<MiniResNetConfig> {
    let mc = MiniResNetConfig {
        stage_blocks: cfg.get_list("model.stage_blocks")?,
        base_channels: cfg.get("model.base_channels")?,
        input_side: cfg.get("train.input_side")?,
        input_channels: 1,
        num_classes: NUM_CLASSES,
    };
    mc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(mc)
}

fn sidecar(mc: &MiniResNetConfig) -> String {
    let blocks: Vec<String> = mc.stage_blocks.iter().map(|b| b.to_string()).collect();
    format!(
        "[model]\nstage_blocks = {}\nbase_channels = {}\n\n[train]\ninput_side = {}\n",
        blocks.join(","),
        mc.base_channels,
        mc.input_side
    )
}

fn sidecar_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("ini")
}

fn train_cmd(metadata: &Path, cfg: &RunConfig, out: &Path) -> Result<()> {
    let mc = model_config(cfg)?;
    let seed: u64 = cfg.get("seed")?;
    let tc = TrainConfig {
        epochs: cfg.get("train.epochs")?,
        batch_size: cfg.get("train.batch_size")?,
        optimizer: OptimizerConfig {
            lr: cfg.get("train.lr")?,
            momentum: cfg.get("train.momentum")?,
        },
        seed,
        augment: AugmentConfig {
            zoom_lo: cfg.get("augment.zoom_lo")?,
            zoom_hi: cfg.get("augment.zoom_hi")?,
            output_side: mc.input_side,
            hist_points: cfg.get("augment.hist_points")?,
            hist_mag: cfg.get("augment.hist_mag")?,
            crop: CropMode::Random,
        },
        augment_enabled: cfg.get_bool("augment.enabled")?,
    };
    tc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let meta = load_metadata(metadata)?;
    let train_set: Vec<LabeledImage> = load_split(&meta, Split::Train)?.into_iter().map(|(_, s)| s).collect();
    let val_set: Vec<LabeledImage> = load_split(&meta, Split::Val)?.into_iter().map(|(_, s)| s).collect();
    let mut model = build_mini_resnet::<f32>(&mc, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let start = Instant::now();
    let outcome = train(&mut model, &train_set, &val_set, &tc, |r, _| {
        eprintln!(
            "epoch {} loss {:.4} train_acc {:.4} val_acc {} ({:.1}s)",
            r.epoch,
            r.train_loss,
            r.train_acc,
            r.val_acc.map_or("-".into(), |v| format!("{v:.4}")),
            start.elapsed().as_secs_f64()
        );
    })
    .map_err(data("training"))?;
    let ckpt = out.join("model.ervc");
    checkpoint::save(&ckpt, &checkpoint::model_tensors(&outcome.best_model)).map_err(data(ckpt.display()))?;
    write(&sidecar_path(&ckpt), sidecar(&mc))?;
    write(&out.join("history.jsonl"), report::history_jsonl(&outcome.history))?;
    write(&out.join("history.csv"), report::history_csv(&outcome.history))?;
    write(&out.join("training_curve.svg"), report::training_curve_svg(&outcome.history))?;
    eprintln!("best epoch {}", outcome.best_epoch);
    Ok(())
}

fn load_model(checkpoint_path: &Path) -> Result<(Model<f32>, MiniResNetConfig)> {
    let side = sidecar_path(checkpoint_path);
    let cfg = RunConfig::load(Some(&side))?;
    let mc = model_config(&cfg)?;
    let mut model = build_mini_resnet::<f32>(&mc, 0).map_err(|e| CliError::Usage(e.to_string()))?;
    let tensors = checkpoint::load(checkpoint_path).map_err(data(checkpoint_path.display()))?;
    checkpoint::load_into(&mut model, &tensors).map_err(data(checkpoint_path.display()))?;
    Ok((model, mc))
}

pub const PREDICTIONS_HEADER: &str = "set_id,file,label,predicted,correct,has_marker,redacted";

fn evaluate_cmd(metadata: &Path, ckpt: &Path, split: Split, out: &Path) -> Result<()> {
    let (model, mc) = load_model(ckpt)?;
    let meta = load_metadata(metadata)?;
    let rows = load_split(&meta, split)?;
    if rows.is_empty() {
        return Err(CliError::Data(format!("no records in split {split}")));
    }
    let samples: Vec<LabeledImage> = rows.iter().map(|(_, s)| s.clone()).collect();
    let eval = evaluate(&model, &samples, mc.input_side).map_err(data("evaluation"))?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let metrics = MetricsReport::compute(&eval.predictions, &eval.scores, &labels).map_err(data("metrics"))?;
    let cm = confusion(&eval.predictions, &labels).map_err(data("metrics"))?;
    let all: Vec<_> = radview_core::ViewLabel::all().collect();
    let mut preds = format!("{PREDICTIONS_HEADER}\n");
    for ((r, s), &p) in rows.iter().zip(&eval.predictions) {
        preds.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.set_id,
            r.file,
            r.label,
            all[p],
            u8::from(p == s.label),
            u8::from(r.has_marker),
            u8::from(r.redacted)
        ));
    }
    write(&out.join("metrics.json"), report::metrics_json(&metrics))?;
    write(&out.join("confusion.csv"), report::confusion_csv(&cm))?;
    write(&out.join("confusion.svg"), report::confusion_svg(&cm))?;
    write(&out.join("predictions.csv"), preds)?;
    println!(
        "top1 {:.4} collapsed {:.4} macro_auc {}",
        metrics.top1_accuracy,
        metrics.collapsed_accuracy,
        metrics.macro_auc.map_or("-".into(), |v| format!("{v:.4}"))
    );
    Ok(())
}

fn cam_cmd(metadata: &Path, ckpt: &Path, split: Split, limit: usize, out: &Path) -> Result<()> {
    let (model, mc) = load_model(ckpt)?;
    let meta = load_metadata(metadata)?;
    let rows = load_split(&meta, split)?;
    for (r, s) in rows.iter().take(limit) {
        let input = center_crop::<f32>(&s.image, mc.input_side).map_err(data(&r.file))?;
        let logits = model
            .predict(&input.clone().reshape(&[1, 1, mc.input_side, mc.input_side]).map_err(data(&r.file))?)
            .map_err(data(&r.file))?;
        let predicted = radview_core::trainer::argmax(logits.data());
        let cam = compute_cam(&model, &input, predicted).map_err(data(&r.file))?;
        let base = Image16::new(
            mc.input_side,
            mc.input_side,
            input.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16).collect(),
        )
        .expect("crop shape");
        let overlay = radview_core::cam::render_overlay(&cam, &base).map_err(data(&r.file))?;
        let name = format!("{}_{}", r.set_id, stem(&r.file));
        let ppm_path = out.join(format!("{name}.ppm"));
        ppm::save_ppm(&ppm_path, &overlay).map_err(data(ppm_path.display()))?;
        write(&out.join(format!("{name}.csv")), report::cam_grid_csv(&cam))?;
    }
    Ok(())
}

fn flag(s: &str) -> bool {
    s.trim() == "1"
}

fn stats_cmd(predictions: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(predictions).map_err(data(predictions.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some(PREDICTIONS_HEADER) {
        return Err(CliError::Data(format!("{}: bad header", predictions.display())));
    }
    let mut marker = Vec::new();
    let mut redaction = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(CliError::Data(format!("{}: line {}", predictions.display(), i + 2)));
        }
        let label = parse_label(f[2]).map_err(data(format!("line {}", i + 2)))?;
        let correct = flag(f[4]);
        marker.push(ScoredRecord {
            label,
            flag: flag(f[5]),
            correct,
        });
        redaction.push(ScoredRecord {
            label,
            flag: flag(f[6]),
            correct,
        });
    }
    write(&out.join("association_marker.csv"), report::association_csv(&association_by_label(&marker)))?;
    write(
        &out.join("association_redaction.csv"),
        report::association_csv(&association_by_label(&redaction)),
    )?;
    let mut overall = String::from("flag,n,chi2,p_value,phi\n");
    for (name, recs) in [("side_marker", &marker), ("redaction", &redaction)] {
        let (table, chi) = overall_association(recs);
        let chi = chi.ok().filter(|c| !c.zero_marginal);
        let p = chi.and_then(|c| chi2_sf(c.statistic).ok());
        overall.push_str(&format!(
            "{name},{},{},{},{}\n",
            table.total(),
            chi.map_or(String::new(), |c| format!("{:.4}", c.statistic)),
            report::format_p_value(p),
            phi_coefficient(&table).map_or(String::new(), |v| format!("{v:.4}"))
        ));
    }
    write(&out.join("association_overall.csv"), overall)
}

/// Parameter counts and ratios to Inception V3 for every reference
/// architecture.
pub fn arch_rows(classes: usize, channels: usize) -> Result<Vec<(ArchName, u64, f64)>> {
    let counts = ArchName::ALL
        .iter()
        .map(|&n| {
            describe_architecture(n, classes, channels)
                .map(|d| (n, d.parameter_count()))
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let rel = relative_parameters(&counts).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(counts.iter().zip(rel).map(|(&(n, c), (_, r))| (n, c, r)).collect())
}

fn arch_info(classes: usize, channels: usize, out: &Path) -> Result<()> {
    let csv = report::arch_info_csv(&arch_rows(classes, channels)?);
    write(&out.join("arch_info.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}
