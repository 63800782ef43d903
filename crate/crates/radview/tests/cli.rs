use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use radview::pgm::load_pgm16;

fn radview(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_radview")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, stdout, stderr) = radview(args);
    assert_eq!(code, 0, "{args:?}: {stderr}");
    stdout
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn arch_info_table() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["arch-info", "--out", s(dir.path())]);
    let expected = "architecture,parameters,relative\n\
                    DenseNet-121,7978856,0.29\n\
                    Inception V3,27161264,1.00\n\
                    MobileNet V3,5483032,0.20\n\
                    ResNet-18,11689512,0.43\n\
                    ResNet-34,21797672,0.80\n\
                    ResNet-50,25557032,0.94\n";
    assert_eq!(stdout, expected);
    assert_eq!(fs::read_to_string(dir.path().join("arch_info.csv")).unwrap(), expected);
}

#[test]
fn synthetic_sets_audit_complete() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["synth", "--sets", "10", "--side", "24", "--out", s(&corpus)]);
    let meta = corpus.join("metadata.csv");
    let stdout = ok(&["audit", "--metadata", s(&meta), "--out", s(&dir.path().join("audit"))]);
    assert_eq!(stdout.trim(), "10 complete, 0 incomplete");
    let audit = fs::read_to_string(dir.path().join("audit/audit.csv")).unwrap();
    assert_eq!(audit.lines().filter(|l| l.contains(",COMPLETE,")).count(), 10);
}

#[test]
fn preprocess_downsamples() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["synth", "--sets", "1", "--side", "40", "--out", s(&corpus)]);
    let out = dir.path().join("prep");
    ok(&["preprocess", "--metadata", s(&corpus.join("metadata.csv")), "--side", "25", "--out", s(&out)]);
    let img = load_pgm16(&out.join("images/set0000/00.pgm")).unwrap();
    assert_eq!((img.width(), img.height()), (25, 25));
}

#[test]
fn ingest_dicom_directory() {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dicom");
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("in/horse01");
    fs::create_dir_all(&set).unwrap();
    for f in ["cr_carpus.dcm", "sequences.dcm", "mr.dcm", "no_view.dcm"] {
        fs::copy(fixtures.join(f), set.join(f)).unwrap();
    }
    let out = dir.path().join("out");
    ok(&["ingest", "--input", s(&dir.path().join("in")), "--out", s(&out)]);
    let meta = fs::read_to_string(out.join("metadata.csv")).unwrap();
    assert_eq!(meta.lines().count(), 3);
    assert!(meta.contains("horse01,images/horse01/cr_carpus.pgm,L FORE CARPUS DP,L FORE CARPUS DP,"));
    assert!(meta.contains(",R HIND FETLOCK DP,R HIND FETLOCK DP,"));
    let rejects = fs::read_to_string(out.join("rejects.csv")).unwrap();
    assert_eq!(rejects.lines().count(), 3);
    assert!(rejects.contains("mr.dcm") && rejects.contains("no_view.dcm"));
    let img = load_pgm16(&out.join("images/horse01/sequences.pgm")).unwrap();
    assert_eq!(img.data(), &[7, 8, 9, 10, 11, 12]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.ini");
    fs::write(&bad_cfg, "[augment]\nzoom = 2\n").unwrap();
    assert_eq!(radview(&["arch-info", "--config", s(&bad_cfg), "--out", s(dir.path())]).0, 1);
    assert_eq!(radview(&["arch-info", "--threads", "0", "--out", s(dir.path())]).0, 1);
    assert_eq!(radview(&["no-such-command"]).0, 1);
    assert_eq!(radview(&["--help"]).0, 0);
    let missing = dir.path().join("missing.csv");
    let (code, _, stderr) = radview(&["audit", "--metadata", s(&missing), "--out", s(dir.path())]);
    assert_eq!(code, 2);
    assert!(stderr.contains("missing.csv"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    fs::write(&cfg, "seed = 5\n[synth]\nsets = 2\nside = 20\n").unwrap();
    let a = dir.path().join("a");
    ok(&["synth", "--config", s(&cfg), "--out", s(&a)]);
    assert_eq!(fs::read_to_string(a.join("metadata.csv")).unwrap().lines().count(), 97);
    let b = dir.path().join("b");
    ok(&["synth", "--config", s(&cfg), "--sets", "1", "--out", s(&b)]);
    assert_eq!(fs::read_to_string(b.join("metadata.csv")).unwrap().lines().count(), 49);
    assert_eq!(
        fs::read(a.join("images/set0000/07.pgm")).unwrap(),
        fs::read(b.join("images/set0000/07.pgm")).unwrap()
    );
}

fn pipeline(root: &Path) {
    let corpus = root.join("corpus");
    let meta = corpus.join("metadata.csv");
    let ckpt = root.join("run/model.ervc");
    let common = ["--seed", "3", "--threads", "1"];
    let run = |args: &[&str]| {
        let mut v: Vec<&str> = args.to_vec();
        v.extend_from_slice(&common);
        ok(&v);
    };
    run(&["synth", "--sets", "4", "--side", "40", "--out", s(&corpus)]);
    run(&["split", "--metadata", s(&meta), "--train", "2", "--val", "1", "--test", "1", "--out", s(&corpus)]);
    run(&["train", "--metadata", s(&meta), "--epochs", "2", "--input-side", "32", "--base-channels", "4", "--out", s(&root.join("run"))]);
    run(&["evaluate", "--metadata", s(&meta), "--checkpoint", s(&ckpt), "--out", s(&root.join("eval"))]);
    run(&["stats", "--predictions", s(&root.join("eval/predictions.csv")), "--out", s(&root.join("stats"))]);
    run(&["cam", "--metadata", s(&meta), "--checkpoint", s(&ckpt), "--limit", "3", "--out", s(&root.join("cam"))]);
}

#[test]
fn full_pipeline_emits_every_artifact_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let ta = tree(a.path());
    let tb = tree(b.path());
    for f in [
        "corpus/metadata.csv",
        "run/model.ervc",
        "run/model.ini",
        "run/history.jsonl",
        "run/history.csv",
        "run/training_curve.svg",
        "eval/metrics.json",
        "eval/confusion.csv",
        "eval/confusion.svg",
        "eval/predictions.csv",
        "stats/association_marker.csv",
        "stats/association_redaction.csv",
        "stats/association_overall.csv",
    ] {
        assert!(ta.contains_key(Path::new(f)), "missing {f}");
    }
    assert_eq!(ta.keys().filter(|p| p.starts_with("cam") && p.extension().is_some_and(|e| e == "ppm")).count(), 3);
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(tb[k] == *v, "{} differs", k.display());
    }
}
