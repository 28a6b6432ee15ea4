use std::process::Command;

fn imgraph(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_imgraph"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "imgraph {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_ingest_improve_stats() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let (features, meta, graph) = (p("f.bin"), p("f.tsv"), p("g.higr"));

    imgraph(&["gen", "--clusters", "3", "--per-cluster", "40", "--seed", "9", "--out", &features]);
    assert_eq!(std::fs::metadata(&features).unwrap().len(), 120 * 118);
    assert_eq!(std::fs::read_to_string(&meta).unwrap().lines().count(), 120);

    let out = imgraph(&["ingest", "--features", &features, "--meta", &meta, "--out", &graph]);
    assert!(out.starts_with("120 images, 3 keywords"), "{out}");

    let out = imgraph(&["improve", "--graph", &graph, "--budget", "5000"]);
    assert!(out.contains("swaps accepted"), "{out}");

    let out = imgraph(&["stats", "--graph", &graph]);
    assert!(out.contains("layer 0: 120 nodes, 240 edges"), "{out}");
    let size = std::fs::metadata(&graph).unwrap().len();
    assert!(out.contains(&format!("file size: {size} bytes (expected {size})")), "{out}");
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("x.higr");
    std::fs::write(&bogus, b"XXXX\x01\x00").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_imgraph"))
        .args(["stats", "--graph", bogus.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("format error"));
}
