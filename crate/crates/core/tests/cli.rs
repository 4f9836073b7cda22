mod common;

use common::*;
use otalign::cli::{manifest_path, provenance_path, sha256_hex};
use otalign::{read_embeddings, write_embeddings, EmbeddingSequence};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn otalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otalign"))
        .args(args)
        .output()
        .expect("spawn otalign")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn put(dir: &Path, name: &str, seq: &EmbeddingSequence) -> PathBuf {
    let p = dir.join(name);
    write_embeddings(seq, &p).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn file_hash(p: &Path) -> String {
    sha256_hex(&std::fs::read(p).unwrap())
}

#[test]
fn transport_keeps_source_length() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(1);
    let src = put(
        dir.path(),
        "src.emb",
        &random_f32_sequence(&mut rng, 10, 16),
    );
    let pool = put(
        dir.path(),
        "pool.emb",
        &random_f32_sequence(&mut rng, 20, 16),
    );
    let out = dir.path().join("out.emb");
    let o = otalign(&["transport", s(&src), s(&pool), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let moved = read_embeddings(&out).unwrap();
    assert_eq!((moved.len(), moved.dim()), (10, 16));

    let manifest = std::fs::read_to_string(manifest_path(&out)).unwrap();
    assert!(manifest.starts_with("command=transport\n"));
    assert!(manifest.contains(&format!("input.0.sha256={}", file_hash(&src))));
    assert!(manifest.contains(&format!("input.1.sha256={}", file_hash(&pool))));
    assert!(manifest.contains(&format!("output.0.sha256={}", file_hash(&out))));
    assert!(manifest.contains("param.epsilon=0.1\n"));
    assert!(manifest.contains("param.k=5\n"));
    assert!(manifest.contains("diag.converged=true\n"));
    assert!(manifest.lines().all(|l| l.contains('=')));
}

#[test]
fn transport_is_reproducible_and_leaves_inputs_alone() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(2);
    let src = put(dir.path(), "src.emb", &random_f32_sequence(&mut rng, 12, 8));
    let p1 = put(dir.path(), "p1.emb", &random_f32_sequence(&mut rng, 9, 8));
    let p2 = put(dir.path(), "p2.emb", &random_f32_sequence(&mut rng, 14, 8));
    let before: Vec<String> = [&src, &p1, &p2].iter().map(|p| file_hash(p)).collect();
    let mut hashes = Vec::new();
    for name in ["a.emb", "b.emb"] {
        let out = dir.path().join(name);
        let o = otalign(&[
            "transport",
            s(&src),
            s(&p1),
            s(&p2),
            "-o",
            s(&out),
            "--k",
            "3",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        hashes.push(file_hash(&out));
    }
    assert_eq!(hashes[0], hashes[1]);
    let after: Vec<String> = [&src, &p1, &p2].iter().map(|p| file_hash(p)).collect();
    assert_eq!(before, after);
}

#[test]
fn missing_pool_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(3);
    let src = put(dir.path(), "src.emb", &random_f32_sequence(&mut rng, 4, 4));
    let missing = dir.path().join("absent-pool.emb");
    let out = dir.path().join("out.emb");
    let o = otalign(&["transport", s(&src), s(&missing), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent-pool.emb"));
    assert!(!out.exists());
}

#[test]
fn dimension_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(4);
    let src = put(dir.path(), "src.emb", &random_f32_sequence(&mut rng, 4, 4));
    let pool = put(dir.path(), "pool.emb", &random_f32_sequence(&mut rng, 4, 5));
    let out = dir.path().join("out.emb");
    let o = otalign(&["transport", s(&src), s(&pool), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains('4') && stderr(&o).contains('5'));
    assert!(!out.exists());
}

#[test]
fn corrupt_input_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.emb");
    std::fs::write(&bad, b"EMB2\x01\0\0\0\x01\0\0\0\0\0\x80\x3f").unwrap();
    let other = dir.path().join("other.emb");
    std::fs::write(&other, b"EMB1\x01\0\0\0\x01\0\0\0\0\0\x80\x3f").unwrap();
    let o = otalign(&["fad", s(&bad), s(&other)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.emb"));
}

#[test]
fn unconverged_transport_warns_and_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(5);
    let src = put(dir.path(), "src.emb", &random_f32_sequence(&mut rng, 30, 8));
    let pool = put(
        dir.path(),
        "pool.emb",
        &random_f32_sequence(&mut rng, 40, 8),
    );
    let out = dir.path().join("out.emb");
    let o = otalign(&[
        "transport",
        s(&src),
        s(&pool),
        "-o",
        s(&out),
        "--epsilon",
        "0.01",
        "--max-iters",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("warning"));
    assert_eq!(read_embeddings(&out).unwrap().len(), 30);
    let manifest = std::fs::read_to_string(manifest_path(&out)).unwrap();
    assert!(manifest.contains("diag.converged=false"));
    assert!(manifest.contains("diag.iterations_used=2"));
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(otalign(&["transport"]).status.code(), Some(1));
    assert_eq!(otalign(&["nonsense"]).status.code(), Some(1));
    assert_eq!(otalign(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(6);
    let src = put(dir.path(), "src.emb", &random_f32_sequence(&mut rng, 4, 4));
    let out = dir.path().join("out.emb");
    for bad in [
        ["--epsilon", "0"],
        ["--k", "0"],
        ["--tol", "-1"],
        ["--max-iters", "0"],
    ] {
        let o = otalign(&["transport", s(&src), s(&src), "-o", s(&out), bad[0], bad[1]]);
        assert_eq!(o.status.code(), Some(1), "{bad:?}");
    }
}

#[test]
fn pool_orders_by_duration_and_records_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(7);
    let a = put(dir.path(), "a.emb", &random_f32_sequence(&mut rng, 5, 3));
    let b = put(dir.path(), "b.emb", &random_f32_sequence(&mut rng, 9, 3));
    let out = dir.path().join("pool.emb");
    let o = otalign(&["pool", s(&a), s(&b), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pooled = read_embeddings(&out).unwrap();
    assert_eq!(pooled.len(), 14);
    let first_b = read_embeddings(&b).unwrap();
    assert_eq!(pooled.frame(0), first_b.frame(0));
    let prov = std::fs::read_to_string(provenance_path(&out)).unwrap();
    let b_line = format!("utterance.0.source_id={}", b.display());
    assert!(prov.contains(&b_line), "{prov}");
    assert!(prov.contains("utterance.0.frames=9"));
    assert!(prov.contains("utterance.1.frames=5"));
    assert!(prov.contains("total_frames=14"));
    assert!(manifest_path(&out).exists());

    let out2 = dir.path().join("given.emb");
    let o = otalign(&["pool", s(&a), s(&b), "-o", s(&out2), "--order", "given"]);
    assert_eq!(o.status.code(), Some(0));
    let given = read_embeddings(&out2).unwrap();
    assert_eq!(given.frame(0), read_embeddings(&a).unwrap().frame(0));
}

#[test]
fn eer_reports() {
    let dir = tempfile::tempdir().unwrap();
    let sep = dir.path().join("sep.txt");
    std::fs::write(&sep, "bonafide 0.9\nbonafide 0.8\nspoof 0.1\nspoof 0.2\n").unwrap();
    let o = otalign(&["eer", s(&sep)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("EER 0.000%"), "{}", stdout(&o));

    let mixed = dir.path().join("mixed.txt");
    std::fs::write(
        &mixed,
        "bonafide 0.8\nbonafide 0.6\nbonafide 0.4\nspoof 0.7\nspoof 0.3\nspoof 0.2\n",
    )
    .unwrap();
    let o = otalign(&["eer", s(&mixed)]);
    assert!(stdout(&o).starts_with("EER 33.333%"), "{}", stdout(&o));

    let inverted = dir.path().join("inv.txt");
    std::fs::write(&inverted, "bonafide -3\nbonafide -2\nspoof 1\nspoof 4\n").unwrap();
    let o = otalign(&["eer", s(&inverted), "--negate-scores"]);
    assert!(stdout(&o).starts_with("EER 0.000%"), "{}", stdout(&o));
    let o = otalign(&["eer", s(&inverted)]);
    assert!(stdout(&o).starts_with("EER 100.000%"), "{}", stdout(&o));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "bonafide 0.1\nreal 0.3\n").unwrap();
    let o = otalign(&["eer", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let one_class = dir.path().join("one.txt");
    std::fs::write(&one_class, "bonafide 0.1\nbonafide 0.3\n").unwrap();
    assert_eq!(otalign(&["eer", s(&one_class)]).status.code(), Some(1));
}

#[test]
fn fad_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(8);
    let a = put(dir.path(), "a.emb", &random_f32_sequence(&mut rng, 50, 6));
    let o = otalign(&["fad", s(&a), s(&a)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0.000");

    // Same spread, means three apart: 3^2 = 9.
    let base: Vec<f64> = (0..40).map(|_| rng.range(1.0, 2.0)).collect();
    let lo = EmbeddingSequence::new(1, base.clone(), "lo").unwrap();
    let hi = EmbeddingSequence::new(1, base.iter().map(|v| v + 3.0).collect(), "hi").unwrap();
    let lo = put(dir.path(), "lo.emb", &lo);
    let hi = put(dir.path(), "hi.emb", &hi);
    let o = otalign(&["fad", s(&lo), s(&hi)]);
    assert_eq!(stdout(&o).trim(), "9.000");

    let one = put(dir.path(), "one.emb", &random_f32_sequence(&mut rng, 1, 6));
    assert_eq!(otalign(&["fad", s(&one), s(&a)]).status.code(), Some(1));
}

#[test]
fn synth_and_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("syn.emb");
    let args = [
        "synth",
        "--center",
        "1,0,0",
        "--center",
        "0,1,0",
        "--spread",
        "0.1",
        "--frames-per-center",
        "7",
        "--seed",
        "42",
        "-o",
        s(&out),
    ];
    let o = otalign(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let seq = read_embeddings(&out).unwrap();
    assert_eq!((seq.len(), seq.dim()), (14, 3));
    let first = file_hash(&out);
    assert_eq!(otalign(&args).status.code(), Some(0));
    assert_eq!(file_hash(&out), first);
    assert!(std::fs::read_to_string(manifest_path(&out))
        .unwrap()
        .contains("param.seed=42"));

    let o = otalign(&[
        "experiment",
        "--source-center",
        "1,0,0",
        "--target-center",
        "0,0,1",
        "--spread",
        "0.1",
        "--frames-per-center",
        "60",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = stdout(&o);
    let value = |key: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key}=")))
            .unwrap_or_else(|| panic!("{key} missing in {report}"))
            .parse()
            .unwrap()
    };
    assert!(value("fad_after") < value("fad_before"));
    assert!(value("nearest_cost_after") < value("nearest_cost_before"));

    let o = otalign(&["synth", "--center", "1,x", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let o = otalign(&["synth", "--center", "1,0", "--spread", "0", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}
