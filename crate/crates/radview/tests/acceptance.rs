//! Acceptance criteria 1 to 10, one PASS/FAIL line each.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use radview::checkpoint::{decode, encode, NamedTensor, TensorValues};
use radview::cli::arch_rows;
use radview::dicom::{extract_meta, extract_pixels, parse_dicom};
use radview::pgm::{read_pgm16, write_pgm16};
use radview_core::archzoo::{build_mini_resnet, ArchName, MiniResNetConfig};
use radview_core::augment::AugmentConfig;
use radview_core::cam::compute_cam;
use radview_core::dataset::{split_sets, Split};
use radview_core::engine::gradcheck::{finite_diff_check, widened_check, Objective};
use radview_core::engine::{BatchNorm2d, Conv2d, Graph, LayerSpec, Linear, Mode, Model, OptimizerConfig, Pool2d};
use radview_core::metrics::{
    collapsed_accuracy, laterality_error_fraction, roc_auc_macro_ovr, ConfusionMatrix, MetricsReport,
};
use radview_core::rng::{derive_seed, rng_from_seed};
use radview_core::stats::{chi2_sf, chi2_statistic, phi_coefficient, ContingencyTable2x2};
use radview_core::synthgen::{generate_corpus, set_id, PhantomConfig};
use radview_core::trainer::{evaluate, train, LabeledImage, TrainConfig};
use radview_core::{Image16, Tensor};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let rows = arch_rows(1000, 3).map_err(|e| e.message().to_string())?;
    let elapsed = start.elapsed();
    let expected = [
        (ArchName::DenseNet121, 7_978_856, 0.29),
        (ArchName::InceptionV3, 27_161_264, 1.00),
        (ArchName::MobileNetV3, 5_483_032, 0.20),
        (ArchName::ResNet18, 11_689_512, 0.43),
        (ArchName::ResNet34, 21_797_672, 0.80),
        (ArchName::ResNet50, 25_557_032, 0.94),
    ];
    ensure(rows.len() == expected.len(), "row count")?;
    for ((n, c, r), (en, ec, er)) in rows.iter().zip(expected) {
        ensure(*n == en && *c == ec && *r == er, format!("{n:?}: {c} / {r} vs {ec} / {er}"))?;
    }
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("six counts and ratios exact in {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let a = chi2_sf(16.3).map_err(|e| e.to_string())?;
    let b = chi2_sf(102.0).map_err(|e| e.to_string())?;
    let ra = (a - 5.4e-5).abs() / 5.4e-5;
    let rb = (b - 5.7e-24).abs() / 5.7e-24;
    ensure(ra <= 0.02, format!("sf(16.3) = {a:e}, rel {ra:.4}"))?;
    ensure(rb <= 0.05, format!("sf(102) = {b:e}, rel {rb:.4}"))?;
    Ok(format!("sf(16.3) = {a:.3e} (rel {ra:.4}), sf(102) = {b:.3e} (rel {rb:.4})"))
}

fn criterion_3() -> Outcome {
    let ids: Vec<String> = (0..198).map(set_id).collect();
    let a = split_sets(&ids, (116, 40, 42), 7).map_err(|e| e.to_string())?;
    let b = split_sets(&ids, (116, 40, 42), 7).map_err(|e| e.to_string())?;
    let count = |s: Split| a.values().filter(|v| **v == s).count();
    let sizes = (count(Split::Train), count(Split::Val), count(Split::Test));
    ensure(sizes == (116, 40, 42), format!("sizes {sizes:?}"))?;
    ensure(a.len() == 198 && ids.iter().all(|i| a.contains_key(i)), "not a partition")?;
    ensure(a == b, "not deterministic")?;
    Ok(format!("sizes {sizes:?}, disjoint, identical on rerun"))
}

fn random_tensor<T: radview_core::Scalar>(shape: &[usize], seed: u64) -> Tensor<T> {
    let mut rng = rng_from_seed(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_f64(shape, &v).unwrap()
}

fn layer_cases() -> Vec<(&'static str, Graph, Mode)> {
    let single = |spec: LayerSpec, input: &[usize]| {
        let mut g = Graph::new(input);
        g.chain("layer", spec).unwrap();
        let flat: usize = g.output_shape().iter().product();
        if g.output_shape().len() > 1 {
            g.chain("flatten", LayerSpec::Flatten).unwrap();
        }
        g.chain("head", LayerSpec::Linear(Linear { in_features: flat, out_features: 3, bias: true }))
            .unwrap();
        g
    };
    let mut add = Graph::new(&[2, 4, 4]);
    let input = add.output();
    let conv = add.chain("conv", LayerSpec::Conv2d(Conv2d::new(2, 2, 3, 1, 1).with_bias())).unwrap();
    add.push("add", LayerSpec::Add, &[conv, input]).unwrap();
    add.chain("flatten", LayerSpec::Flatten).unwrap();
    add.chain("head", LayerSpec::Linear(Linear { in_features: 32, out_features: 3, bias: true }))
        .unwrap();
    let img = [2, 5, 5];
    vec![
        ("conv2d", single(LayerSpec::Conv2d(Conv2d::new(2, 3, 3, 2, 1).with_bias()), &img), Mode::Eval),
        ("relu", single(LayerSpec::Relu, &img), Mode::Eval),
        ("maxpool2d", single(LayerSpec::MaxPool2d(Pool2d { kernel: 3, stride: 2, padding: 1 }), &img), Mode::Eval),
        ("global_avg_pool", single(LayerSpec::GlobalAvgPool, &img), Mode::Eval),
        ("flatten", single(LayerSpec::Flatten, &img), Mode::Eval),
        ("linear", single(LayerSpec::Linear(Linear { in_features: 6, out_features: 4, bias: true }), &[6]), Mode::Eval),
        ("batchnorm2d", single(LayerSpec::BatchNorm2d(BatchNorm2d { channels: 2 }), &img), Mode::Train),
        ("add", add, Mode::Eval),
    ]
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let eps = 1e-5;
    let (mut worst64, mut worst32) = (0.0f64, 0.0f64);
    let mut cases = layer_cases();
    let resnet = MiniResNetConfig {
        stage_blocks: vec![1, 1],
        base_channels: 3,
        input_side: 8,
        input_channels: 1,
        num_classes: 4,
    };
    for mode in [Mode::Train, Mode::Eval] {
        let g = build_mini_resnet::<f64>(&resnet, 5).unwrap().graph().clone();
        cases.push(("mini_resnet_2_blocks", g, mode));
    }
    for (name, graph, mode) in cases {
        let batch = 3;
        let mut shape = vec![batch];
        shape.extend_from_slice(graph.input_shape());
        let targets = [0, 2, 1];
        let m64: Model<f64> = Model::new(graph.clone(), 5).unwrap();
        let e64 = finite_diff_check(&m64, &random_tensor(&shape, 6), Objective::CrossEntropy(&targets), mode, eps)
            .map_err(|e| e.to_string())?
            .max_relative_error;
        let m32: Model<f32> = Model::new(graph, 5).unwrap();
        let e32 = widened_check(&m32, &random_tensor(&shape, 6), Objective::CrossEntropy(&targets), mode, eps)
            .map_err(|e| e.to_string())?
            .max_relative_error;
        ensure(e64 <= 1e-6, format!("{name} f64: {e64:e}"))?;
        ensure(e32 <= 1e-3, format!("{name} f32: {e32:e}"))?;
        worst64 = worst64.max(e64);
        worst32 = worst32.max(e32);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!("max rel error f64 {worst64:.2e} (<= 1e-6), f32 {worst32:.2e} (<= 1e-3), {elapsed:.2?}"))
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let mut rng = rng_from_seed(derive_seed(41, 0, i));
        let cfg = MiniResNetConfig {
            stage_blocks: (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=2)).collect(),
            base_channels: rng.random_range(2..=6),
            input_side: rng.random_range(8..=24),
            input_channels: 1,
            num_classes: rng.random_range(2..=48),
        };
        let mut model = build_mini_resnet::<f32>(&cfg, i).unwrap();
        let bias: Vec<f64> = (0..cfg.num_classes).map(|_| rng.random_range(-0.5..0.5)).collect();
        model
            .set_tensor("fc.bias", Tensor::from_f64(&[cfg.num_classes], &bias).unwrap())
            .unwrap();
        let n = cfg.input_side * cfg.input_side;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let input = Tensor::<f32>::from_f64(&[1, cfg.input_side, cfg.input_side], &x).unwrap();
        let class = rng.random_range(0..cfg.num_classes);
        let cam = compute_cam(&model, &input, class).map_err(|e| e.to_string())?;
        worst = worst.max(cam.identity_error());
    }
    ensure(worst <= 1e-4, format!("worst relative error {worst:e}"))?;
    Ok(format!("100 nets, worst relative error {worst:.2e} (<= 1e-4)"))
}

struct DeskResult {
    report: MetricsReport,
    best_epoch: usize,
    epochs: usize,
    elapsed: Duration,
}

fn desk_run() -> Result<DeskResult, String> {
    let start = Instant::now();
    let pc = PhantomConfig {
        side: 64,
        asymmetry: 0.05,
        marker_prob: 0.193,
        ..PhantomConfig::default()
    };
    let corpus = generate_corpus(100, &pc);
    let ids: Vec<String> = (0..100).map(set_id).collect();
    let split = split_sets(&ids, (60, 20, 20), 1).map_err(|e| e.to_string())?;
    let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for (meta, phantom) in corpus {
        let s = LabeledImage {
            image: phantom.image,
            label: meta.label.class_index(),
        };
        match split[&meta.set_id] {
            Split::Train => tr.push(s),
            Split::Val => va.push(s),
            Split::Test => te.push(s),
        }
    }
    let side = 56;
    let mc = MiniResNetConfig {
        stage_blocks: vec![1, 1, 1],
        base_channels: 8,
        input_side: side,
        input_channels: 1,
        num_classes: 48,
    };
    let mut model = build_mini_resnet::<f32>(&mc, 7).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        epochs: 20,
        batch_size: 32,
        optimizer: OptimizerConfig { lr: 0.05, momentum: 0.9 },
        seed: 3,
        augment: AugmentConfig {
            output_side: side,
            ..AugmentConfig::default()
        },
        augment_enabled: true,
    };
    let out = train(&mut model, &tr, &va, &tc, |_, _| {}).map_err(|e| e.to_string())?;
    let eval = evaluate(&out.best_model, &te, side).map_err(|e| e.to_string())?;
    let labels: Vec<usize> = te.iter().map(|s| s.label).collect();
    let report = MetricsReport::compute(&eval.predictions, &eval.scores, &labels).map_err(|e| e.to_string())?;
    Ok(DeskResult {
        report,
        best_epoch: out.best_epoch,
        epochs: tc.epochs,
        elapsed: start.elapsed(),
    })
}

fn criterion_6() -> Outcome {
    let r = desk_run()?;
    let m = &r.report;
    let lat = m.laterality_error_fraction.unwrap_or(0.0);
    let summary = format!(
        "collapsed {:.4}, top1 {:.4}, laterality share of errors {:.4}, best epoch {}/{}, {:.0?}",
        m.collapsed_accuracy, m.top1_accuracy, lat, r.best_epoch, r.epochs, r.elapsed
    );
    ensure(r.epochs <= 40, "more than 40 epochs")?;
    ensure(r.elapsed <= Duration::from_secs(30 * 60), format!("over 30 min: {summary}"))?;
    ensure(m.collapsed_accuracy >= 0.90, format!("(a) failed: {summary}"))?;
    ensure(m.collapsed_accuracy > m.top1_accuracy, format!("(b) failed: {summary}"))?;
    ensure(
        m.laterality_error_fraction.is_some_and(|f| f >= 0.5),
        format!("(c) failed: {summary}"),
    )?;
    Ok(summary)
}

fn criterion_7() -> Outcome {
    let side = 32;
    let pc = PhantomConfig { side, ..PhantomConfig::default() };
    let data: Vec<LabeledImage> = generate_corpus(1, &pc)
        .into_iter()
        .map(|(m, p)| LabeledImage {
            image: p.image,
            label: m.label.class_index(),
        })
        .collect();
    ensure(data.len() == 48, "corpus size")?;
    let mc = MiniResNetConfig {
        stage_blocks: vec![1, 1],
        base_channels: 8,
        input_side: side,
        input_channels: 1,
        num_classes: 48,
    };
    let mut model = build_mini_resnet::<f32>(&mc, 1).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        epochs: 250,
        batch_size: 4,
        optimizer: OptimizerConfig { lr: 0.05, momentum: 0.9 },
        seed: 2,
        augment: AugmentConfig::disabled(side),
        augment_enabled: false,
    };
    let out = train(&mut model, &data, &[], &tc, |_, _| {}).map_err(|e| e.to_string())?;
    let last = out.history.last().unwrap();
    ensure(last.train_acc == 1.0, format!("train top-1 {}", last.train_acc))?;
    ensure(last.train_loss < 0.01, format!("loss {}", last.train_loss))?;
    Ok(format!("train top-1 {:.3}, loss {:.5} after {} epochs", last.train_acc, last.train_loss, last.epoch))
}

fn criterion_8() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    for i in 0..100 {
        let (w, h) = (rng.random_range(1..=48), rng.random_range(1..=48));
        let img = Image16::new(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap();
        let back = read_pgm16(&write_pgm16(&img)).map_err(|e| e.to_string())?;
        ensure(back == img, format!("PGM case {i}"))?;
    }
    for i in 0..100 {
        let tensors: Vec<NamedTensor> = (0..rng.random_range(1..6))
            .map(|k| {
                let shape: Vec<usize> = (0..rng.random_range(0..=4)).map(|_| rng.random_range(1..=5)).collect();
                let n = shape.iter().product();
                let values = if rng.random_bool(0.5) {
                    TensorValues::F32((0..n).map(|_| f32::from_bits(rng.random())).collect())
                } else {
                    TensorValues::F64((0..n).map(|_| f64::from_bits(rng.random())).collect())
                };
                NamedTensor { name: format!("t{k}"), shape, values }
            })
            .collect();
        let bytes = encode(&tensors);
        let back = decode(&bytes).map_err(|e| e.to_string())?;
        let same = back.len() == tensors.len()
            && back
                .iter()
                .zip(&tensors)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape && a.values.bits_eq(&b.values));
        ensure(same && encode(&back) == bytes, format!("checkpoint case {i}"))?;
    }
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dicom");
    let expected: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.join("expected.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    for (name, want) in &expected {
        let bytes = fs::read(dir.join(name)).map_err(|e| e.to_string())?;
        let got = match parse_dicom(&bytes) {
            Err(e) => format!("{e:?}"),
            Ok(obj) => match extract_meta(&obj) {
                Err(e) => format!("{e:?}"),
                Ok(meta) => {
                    ensure(Some(meta.raw_view.as_str()) == want["raw_view"].as_str(), format!("{name} view text"))?;
                    match extract_pixels(&obj) {
                        Err(e) => format!("{e:?}"),
                        Ok(img) => {
                            let px: Vec<u64> = img.data().iter().map(|&v| v as u64).collect();
                            let want_px: Option<Vec<u64>> =
                                want["pixels"].as_array().map(|a| a.iter().filter_map(|v| v.as_u64()).collect());
                            ensure(Some(px) == want_px, format!("{name} pixels"))?;
                            "ok".into()
                        }
                    }
                }
            },
        };
        let want_kind = [&want["parse"], &want["meta"], &want["pixels"]]
            .into_iter()
            .filter_map(|v| v.as_str())
            .find(|k| *k != "ok")
            .unwrap_or("ok");
        ensure(got.starts_with(want_kind), format!("{name}: got {got}, expected {want_kind}"))?;
    }
    Ok(format!("100 PGM16 + 100 checkpoint round-trips bit-exact, {} DICOM fixtures as expected", expected.len()))
}

fn brute_auc(scores: &[Vec<f64>], labels: &[usize], classes: usize) -> Option<f64> {
    let mut aucs = Vec::new();
    for c in 0..classes {
        let pos: Vec<f64> = labels.iter().zip(scores).filter(|(l, _)| **l == c).map(|(_, s)| s[c]).collect();
        let neg: Vec<f64> = labels.iter().zip(scores).filter(|(l, _)| **l != c).map(|(_, s)| s[c]).collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let credit: f64 = pos
            .iter()
            .flat_map(|p| neg.iter().map(move |n| if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 }))
            .sum();
        aucs.push(credit / (pos.len() * neg.len()) as f64);
    }
    (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
}

fn criterion_9() -> Outcome {
    let mut worst_auc = 0.0f64;
    for case in 0..50u64 {
        let mut rng = rng_from_seed(derive_seed(99, case, 0));
        let classes = rng.random_range(2..=6);
        let n = rng.random_range(6..=30);
        let levels = rng.random_range(2..=8);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..classes).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect())
            .collect();
        let want = brute_auc(&scores, &labels, classes);
        match (roc_auc_macro_ovr(&scores, &labels), want) {
            (Ok(r), Some(w)) => worst_auc = worst_auc.max((r.macro_auc - w).abs()),
            (Err(_), None) => {}
            _ => return Err(format!("AUC case {case}: defined-ness differs")),
        }
    }
    ensure(worst_auc <= 1e-12, format!("AUC deviation {worst_auc:e}"))?;

    let mut cm = ConfusionMatrix::new(48);
    for (t, p, k) in [(0, 0, 8), (0, 24, 2), (25, 25, 5), (25, 1, 1), (25, 3, 4)] {
        for _ in 0..k {
            cm.record(t, p).map_err(|e| e.to_string())?;
        }
    }
    let collapsed = collapsed_accuracy(&cm).map_err(|e| e.to_string())?;
    let lat = laterality_error_fraction(&cm).map_err(|e| e.to_string())?;
    ensure(collapsed == 16.0 / 20.0, format!("collapsed {collapsed}"))?;
    ensure(lat == Some(3.0 / 7.0), format!("laterality {lat:?}"))?;

    let mut worst_phi = 0.0f64;
    for case in 0..200u64 {
        let mut rng = rng_from_seed(derive_seed(98, case, 0));
        let mut c = || rng.random_range(1..500u64);
        let t = ContingencyTable2x2::new(c(), c(), c(), c());
        let chi = chi2_statistic(&t, false).map_err(|e| e.to_string())?.statistic;
        let phi = phi_coefficient(&t).map_err(|e| e.to_string())?;
        worst_phi = worst_phi.max((phi * phi * t.total() as f64 - chi).abs());
    }
    ensure(worst_phi <= 1e-10, format!("phi^2 N deviation {worst_phi:e}"))?;
    Ok(format!(
        "AUC max deviation {worst_auc:.1e}, toy collapsed 0.8 and laterality 3/7 exact, phi^2 N max deviation {worst_phi:.1e}"
    ))
}

fn radview(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_radview"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        out.status.success(),
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn pipeline(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let p = |rel: &str| root.join(rel).display().to_string();
    let meta = p("corpus/metadata.csv");
    let ckpt = p("run/model.ervc");
    let g = ["--seed", "11", "--threads", "1"];
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--sets".into(), "5".into(), "--side".into(), "64".into(), "--out".into(), p("corpus")],
        vec!["split".into(), "--metadata".into(), meta.clone(), "--train".into(), "3".into(), "--val".into(), "1".into(), "--test".into(), "1".into(), "--out".into(), p("corpus")],
        vec!["train".into(), "--metadata".into(), meta.clone(), "--epochs".into(), "2".into(), "--out".into(), p("run")],
        vec!["evaluate".into(), "--metadata".into(), meta.clone(), "--checkpoint".into(), ckpt.clone(), "--out".into(), p("eval")],
        vec!["stats".into(), "--predictions".into(), p("eval/predictions.csv"), "--out".into(), p("stats")],
        vec!["cam".into(), "--metadata".into(), meta, "--checkpoint".into(), ckpt, "--limit".into(), "4".into(), "--out".into(), p("cam")],
    ];
    for step in steps {
        let mut args: Vec<&str> = step.iter().map(String::as_str).collect();
        args.extend_from_slice(&g);
        radview(&args)?;
    }
    let mut files = BTreeMap::new();
    for sub in ["run", "eval", "stats", "cam"] {
        for e in fs::read_dir(root.join(sub)).map_err(|e| e.to_string())? {
            let path = e.map_err(|e| e.to_string())?.path();
            let key = format!("{sub}/{}", path.file_name().unwrap().to_string_lossy());
            files.insert(key, fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn criterion_10() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ra = pipeline(a.path())?;
    let rb = pipeline(b.path())?;
    ensure(ra.contains_key("eval/metrics.json") && ra.contains_key("run/model.ervc"), "missing reports")?;
    ensure(ra.keys().eq(rb.keys()), "different file sets")?;
    for (k, v) in &ra {
        ensure(rb[k] == *v, format!("{k} differs"))?;
    }
    Ok(format!("{} report files byte-identical across two runs", ra.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "architecture parameter counts and ratios", criterion_1),
        (2, "chi-squared survival function", criterion_2),
        (3, "set split sizes", criterion_3),
        (4, "gradient correctness", criterion_4),
        (5, "CAM identity", criterion_5),
        (6, "desk-scale laterality findings", criterion_6),
        (7, "memorization", criterion_7),
        (8, "format round-trips", criterion_8),
        (9, "metrics oracles", criterion_9),
        (10, "pipeline determinism", criterion_10),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (n, name, check) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let t = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{t:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail} [{t:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
