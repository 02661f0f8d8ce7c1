//! Driver-level tests: the hand-counted preprocessing report, stable exit
//! codes from the installed binary, and config override precedence.

use std::path::Path;
use std::process::Command;

use hotspot_cli::commands;
use hotspot_cli::config::RunConfig;

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

/// Ten tiny documents whose per-stage token counts are countable by hand:
/// five of "The stolen car sped." (4 tokens; 3 after stopwords; 5 with
/// bigrams) and five of "An officer found the car." (5; 3; 5).
fn ten_doc_fixture(dir: &Path) -> std::path::PathBuf {
    let mut csv = String::from("id,narrative,call_type,lat,lon\n");
    for i in 0..5 {
        csv.push_str(&format!("a{i},The stolen car sped.,45V,33.7,-84.4\n"));
    }
    for i in 0..5 {
        csv.push_str(&format!("b{i},An officer found the car.,52,33.8,-84.3\n"));
    }
    let path = dir.join("ten.csv");
    write(&path, &csv);
    path
}

#[test]
fn preprocess_stats_match_hand_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let input = ten_doc_fixture(tmp.path());
    let out = tmp.path().join("out");
    let config = RunConfig::load(
        None,
        &[
            ("input".into(), input.display().to_string()),
            ("out".into(), out.display().to_string()),
        ],
    )
    .unwrap();
    commands::cmd_preprocess(&config).unwrap();

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run.summary")).unwrap()).unwrap();
    let stats = &summary["preprocess"];
    // Hand counts: 5*4 + 5*5 = 45 raw tokens; stopwords drop 1 and 2 per
    // doc kind -> 30; each 3-token sentence gains 2 bigrams -> 50. All 50
    // (doc, term) pairs have tf = 1; "car" is in every doc (idf 0, the 10
    // lowest pairs), everything else has idf ln 2. The 0.2-quantile cut
    // lands on ln 2, so exactly the ten "car" occurrences are pruned.
    assert_eq!(stats["docs"], 10);
    assert_eq!(stats["tokens_tokenized"], 45);
    assert_eq!(stats["tokens_after_stopwords"], 30);
    assert_eq!(stats["tokens_after_bigrams"], 50);
    assert_eq!(stats["tokens_after_prune"], 40);
    assert_eq!(stats["tfidf_pairs"], 50);
    assert_eq!(stats["tfidf_pairs_removed"], 10);
    assert_eq!(stats["tfidf_threshold"], 2.0f64.ln());
    assert_eq!(stats["vocab_size"], 8);
    assert_eq!(stats["oov_skipped"], 0);

    // Rerunning on the same input leaves every artifact byte-identical.
    let before: Vec<(String, Vec<u8>)> = ["dictionary.tsv", "corpus.txt", "run.summary"]
        .iter()
        .map(|n| (n.to_string(), std::fs::read(out.join(n)).unwrap()))
        .collect();
    commands::cmd_preprocess(&config).unwrap();
    for (name, bytes) in before {
        assert_eq!(std::fs::read(out.join(&name)).unwrap(), bytes, "{name}");
    }
}

fn hotspot() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hotspot"))
}

#[test]
fn exit_code_2_on_config_errors() {
    let status = hotspot()
        .args(["preprocess", "--set", "no_such_key=1"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("config error"));

    // Missing input is a configuration problem too.
    let tmp = tempfile::tempdir().unwrap();
    let status = hotspot()
        .args(["preprocess", "--out"])
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn exit_code_3_on_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let status = hotspot()
        .args(["preprocess", "--input", "/nonexistent/incidents.csv", "--out"])
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));

    // A file whose rows all fail validation: zero valid rows.
    let bad = tmp.path().join("bad.csv");
    write(&bad, "id,narrative,call_type,lat,lon\nx,text,45,999,0\n");
    let status = hotspot()
        .args(["preprocess", "--input"])
        .arg(&bad)
        .arg("--out")
        .arg(tmp.path().join("out2"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&status.stderr).contains("zero valid rows"));
}

#[test]
fn binary_runs_synth_and_preprocess_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = hotspot()
        .args([
            "synth",
            "--seed",
            "5",
            "--set",
            "synth_docs=40",
            "--set",
            "synth_vocab_per_topic=10",
            "--set",
            "synth_doc_length=12",
            "--set",
            "topics=2",
        ])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{status:?}");
    assert!(out.join("synthetic.csv").exists());

    let status = hotspot()
        .args(["preprocess", "--input"])
        .arg(out.join("synthetic.csv"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{status:?}");
    assert!(out.join("dictionary.tsv").exists());
    assert!(out.join("corpus.txt").exists());
    assert!(out.join("run.config").exists());
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    write(&cfg, "k = 50\ntopics = 9\n");
    let out = tmp.path().join("out");
    let input = ten_doc_fixture(tmp.path());
    let status = hotspot()
        .args(["preprocess", "-c"])
        .arg(&cfg)
        .args(["--set", "k=7", "--input"])
        .arg(&input)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{status:?}");
    let snapshot = std::fs::read_to_string(out.join("run.config")).unwrap();
    assert!(snapshot.contains("k = 7\n"), "{snapshot}");
    assert!(snapshot.contains("topics = 9\n"));
}
