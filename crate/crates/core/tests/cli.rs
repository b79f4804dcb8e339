use std::path::Path;
use std::process::Command;

use medet::cli::{read_meta, run, EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn medet(args: &[&str]) -> i32 {
    run(std::iter::once("medet").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn world(dir: &Path) -> String {
    let out = dir.join("world");
    assert_eq!(
        medet(&["synth", "--images", "8", "--out", p(&out)]),
        EXIT_OK
    );
    p(&out.join("manifest.txt")).to_string()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(medet(&[]), EXIT_USAGE);
    assert_eq!(medet(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(medet(&["mine", "--out", "/tmp/x", "--bogus"]), EXIT_USAGE);
    assert_eq!(medet(&["mine", "--out", "/tmp/x"]), EXIT_USAGE);
    assert_eq!(
        medet(&[
            "mine",
            "--out",
            "/tmp/x",
            "--data",
            "m.txt",
            "--theta-iou",
            "1.5"
        ]),
        EXIT_USAGE
    );
    assert_eq!(
        medet(&["mine", "--out", "/tmp/x", "--data", "m.txt", "--top-k", "0"]),
        EXIT_USAGE
    );
    assert_eq!(
        medet(&["calibrate", "--out", "/tmp/x", "--population", "everyone"]),
        EXIT_USAGE
    );
    assert_eq!(
        medet(&["eval", "--out", "/tmp/x", "--truth", "t.jsonl"]),
        EXIT_USAGE
    );
    assert_eq!(medet(&["--help"]), EXIT_OK);
}

#[test]
fn data_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.txt");
    assert_eq!(
        medet(&["mine", "--data", p(&missing), "--out", p(tmp.path())]),
        EXIT_DATA
    );

    let manifest = world(tmp.path());
    let table = tmp.path().join("world/proposal_embeddings.mdet");
    std::fs::write(&table, b"XXXX").unwrap();
    assert_eq!(
        medet(&[
            "mine",
            "--data",
            &manifest,
            "--out",
            p(&tmp.path().join("m"))
        ]),
        EXIT_DATA
    );
}

#[test]
fn config_file_is_merged_under_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = world(tmp.path());
    let cfg = tmp.path().join("mine.cfg");
    std::fs::write(
        &cfg,
        format!("# shared settings\ntheta_iou = 0.5\ntop_k = 2\ndata = {manifest}\n"),
    )
    .unwrap();

    let a = tmp.path().join("a");
    assert_eq!(
        medet(&["mine", "--config", p(&cfg), "--out", p(&a)]),
        EXIT_OK
    );
    let meta = read_meta(&a).unwrap();
    assert_eq!(meta.get("theta_iou"), Some("0.5"));
    assert_eq!(meta.get("top_k"), Some("2"));

    let b = tmp.path().join("b");
    assert_eq!(
        medet(&[
            "mine",
            "--config",
            p(&cfg),
            "--theta-iou",
            "0.7",
            "--out",
            p(&b)
        ]),
        EXIT_OK
    );
    let meta = read_meta(&b).unwrap();
    assert_eq!(meta.get("theta_iou"), Some("0.7"));
    assert_eq!(meta.get("top_k"), Some("2"));
    assert_eq!(meta.get("subcommand"), Some("mine"));
    assert!(meta.get("workers").is_none());

    std::fs::write(&cfg, "theta = 0.5\n").unwrap();
    assert_eq!(
        medet(&["mine", "--config", p(&cfg), "--out", p(&b)]),
        EXIT_USAGE
    );
    std::fs::write(&cfg, "subcommand = score\n").unwrap();
    assert_eq!(
        medet(&["mine", "--config", p(&cfg), "--out", p(&b)]),
        EXIT_USAGE
    );
}

#[test]
fn run_meta_replays_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = world(tmp.path());
    let first = tmp.path().join("first");
    assert_eq!(
        medet(&[
            "mine",
            "--data",
            &manifest,
            "--top-k",
            "2",
            "--augment",
            "--seed",
            "9",
            "--out",
            p(&first)
        ]),
        EXIT_OK
    );
    let again = tmp.path().join("again");
    let meta = first.join("run.meta");
    assert_eq!(
        medet(&["mine", "--config", p(&meta), "--out", p(&again)]),
        EXIT_OK
    );
    for f in [
        "run.meta",
        "mined.jsonl",
        "mined_proposals.mdet",
        "mined_concepts.mdet",
    ] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
    let meta = read_meta(&first).unwrap();
    assert_eq!(meta.get("use_augmentation"), Some("true"));
}

#[test]
fn mine_header_reports_effective_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = world(tmp.path());
    let out = Command::new(env!("CARGO_BIN_EXE_medet"))
        .args([
            "mine",
            "--data",
            &manifest,
            "--out",
            p(&tmp.path().join("m")),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr
            .lines()
            .next()
            .unwrap()
            .contains("theta_iou=0.6 top_k=3"),
        "{stderr}"
    );
}

#[test]
fn adjust_with_zero_gamma_copies_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = world(tmp.path());
    let mined = tmp.path().join("mined");
    let cal = tmp.path().join("cal");
    let adj = tmp.path().join("adj");
    let scores = tmp.path().join("world/scores.mdet");
    assert_eq!(
        medet(&["mine", "--data", &manifest, "--out", p(&mined)]),
        EXIT_OK
    );
    assert_eq!(
        medet(&[
            "calibrate",
            "--mined",
            p(&mined),
            "--data",
            &manifest,
            "--out",
            p(&cal)
        ]),
        EXIT_OK
    );
    let bias = cal.join("bias.json");
    assert_eq!(
        medet(&[
            "adjust",
            "--scores",
            p(&scores),
            "--bias",
            p(&bias),
            "--gamma",
            "0",
            "--out",
            p(&adj)
        ]),
        EXIT_OK
    );
    assert_eq!(
        std::fs::read(&scores).unwrap(),
        std::fs::read(adj.join("adjusted.mdet")).unwrap()
    );
    assert_eq!(read_meta(&adj).unwrap().get("gamma"), Some("0"));

    assert_eq!(
        medet(&[
            "adjust",
            "--scores",
            p(&scores),
            "--bias",
            p(&bias),
            "--out",
            p(&adj)
        ]),
        EXIT_OK
    );
    assert_eq!(read_meta(&adj).unwrap().get("gamma"), Some("0.4"));
    assert_ne!(
        std::fs::read(&scores).unwrap(),
        std::fs::read(adj.join("adjusted.mdet")).unwrap()
    );
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let mut listings = Vec::new();
    for name in ["one", "two"] {
        let out = tmp.path().join(name);
        assert_eq!(
            medet(&["synth", "--seed", "7", "--images", "10", "--out", p(&out)]),
            EXIT_OK
        );
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let path = e.unwrap().path();
                (
                    path.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(&path).unwrap(),
                )
            })
            .collect();
        files.sort();
        listings.push(files);
    }
    assert_eq!(listings[0], listings[1]);
    assert!(listings[0].iter().any(|(n, _)| n == "scores.mdet"));
}

#[test]
fn score_writes_similarity_and_loss_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = world(tmp.path());
    let mined = tmp.path().join("mined");
    let score = tmp.path().join("score");
    assert_eq!(
        medet(&["mine", "--data", &manifest, "--out", p(&mined)]),
        EXIT_OK
    );
    assert_eq!(
        medet(&[
            "score",
            "--mined",
            p(&mined),
            "--batch-size",
            "3",
            "--out",
            p(&score)
        ]),
        EXIT_OK
    );
    let loss = std::fs::read_to_string(score.join("loss.csv")).unwrap();
    let lines: Vec<&str> = loss.lines().collect();
    assert_eq!(lines[0], "batch,size,loss");
    assert_eq!(lines.len(), 1 + 3, "{loss}");
    let sim = std::fs::read_to_string(score.join("similarity.csv")).unwrap();
    assert_eq!(sim.lines().count(), 1 + 9 + 9 + 4);
    assert_eq!(read_meta(&score).unwrap().get("margin"), Some("0.2"));
}
