use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn avalon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avalon"))
        .args(args)
        .env_remove("AVALON_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn game_logs(out: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(out.join("games"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    v.sort();
    v
}

#[test]
fn learning_series_replays_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = avalon(&[
        "series",
        "--games",
        "3",
        "--learning",
        "on",
        "--seed",
        "9",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    let complete = manifest["games"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|g| g["complete"] == true)
        .count();
    assert_eq!(
        manifest["final_store_version"].as_u64(),
        Some(complete as u64)
    );
    let logs = game_logs(dir.path());
    assert_eq!(logs.len(), 3);
    for log in &logs {
        let p = log.to_str().unwrap();
        let r = avalon(&["replay", "--game", p]);
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
        assert_eq!(code(&avalon(&["validate", "--log", p])), 0);
    }
}

#[test]
fn analyze_prints_a_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        code(&avalon(&[
            "series",
            "--games",
            "2",
            "--learning",
            "off",
            "--out",
            out
        ])),
        0
    );
    let o = avalon(&["analyze", "--logs", out]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["games"], 2);
    let table = avalon(&["analyze", "--logs", out, "--table"]);
    assert!(String::from_utf8_lossy(&table.stdout).contains("winning rate"));
}

#[test]
fn replay_without_exchanges_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&avalon(&["run", "--seed", "2", "--out", out])), 0);
    let log = game_logs(dir.path()).remove(0);
    let o = avalon(&[
        "replay",
        "--game",
        log.to_str().unwrap(),
        "--exchanges",
        dir.path().join("nope.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("replay mismatch"));
}

#[test]
fn ablating_analysis_removes_its_calls() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        code(&avalon(&[
            "run", "--seed", "4", "--ablate", "AM", "--out", out
        ])),
        0
    );
    let ex = fs::read_dir(dir.path().join("exchanges"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let stages: Vec<String> = fs::read_to_string(ex)
        .unwrap()
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["request"]["stage"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert!(stages.iter().any(|s| s == "Planning"));
    assert!(!stages.iter().any(|s| s == "Analysis"));
}

#[test]
fn independent_games_do_not_depend_on_scheduling() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let out = dir.path().to_str().unwrap();
        let o = avalon(&[
            "series",
            "--games",
            "4",
            "--learning",
            "off",
            "--workers",
            workers,
            "--out",
            out,
        ]);
        assert_eq!(code(&o), 0);
    }
    let (la, lb) = (game_logs(a.path()), game_logs(b.path()));
    assert_eq!(la.len(), 4);
    for (x, y) in la.iter().zip(&lb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&avalon(&["series", "--games", "many"])), 2);
    assert_eq!(code(&avalon(&["frobnicate"])), 2);
    assert_eq!(code(&avalon(&["run", "--ablate", "XYZ"])), 2);
}

#[test]
fn live_backend_needs_a_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("live.json");
    fs::write(&config, r#"{"backend": {"kind": "live"}, "games": 1}"#).unwrap();
    let o = avalon(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("AVALON_API_KEY"));
}
