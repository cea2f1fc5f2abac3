use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gomcts(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gomcts"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gomcts(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const CONFIG: &str = r#"
game = "mini3"
seed = 3

[gen_data]
games = 300

[train]
kind = "trie"
smoothing = 1.0

[search]
model = "model/model.bin"
n_runs = 50

[tournament]
num_matches = 20

[tournament.player_a]
name = "greedy"
kind = "argmax_val_star"
lambda = 0.05
model = "model/model.bin"

[tournament.player_b]
name = "scripted"
kind = "scripted"
"#;

#[test]
fn pipeline_stages_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), CONFIG).unwrap();
    let out = ok(d, &["gen-data", "--config", "run.toml", "--out", "data"]);
    assert!(out.starts_with("1200 records from 300 games"));
    let tokens = fs::read_to_string(d.join("data/tokens.tsv")).unwrap();
    assert_eq!(tokens.lines().count(), 1 + 21);
    assert!(tokens.lines().nth(1).unwrap().starts_with("0\tcard\t"));
    assert!(fs::read_to_string(d.join("data/outcomes.tsv"))
        .unwrap()
        .contains("\t0,0,0,"));

    let out = ok(d, &["verify", "data/dataset.txt"]);
    assert_eq!(out, "legal\t1200\nillegal\t0\n");

    ok(
        d,
        &[
            "train",
            "--config",
            "run.toml",
            "--out",
            "model",
            "data/dataset.txt",
        ],
    );
    assert!(d.join("model/model.bin").exists());

    let out = ok(d, &["search", "--config", "run.toml", "--out", "search"]);
    assert!(out.contains("action\t"));
    let trace = fs::read_to_string(d.join("search/trace.txt")).unwrap();
    for line in trace.lines() {
        let fields: Vec<&str> = line.split(';').collect();
        assert_eq!(fields.len(), 4);
        assert!(["legal", "illegal", "cutoff"].contains(&fields[1]));
    }

    let out = ok(d, &["tournament", "--config", "run.toml", "--out", "t"]);
    assert!(out.contains("greedy") && out.contains("1A/3B"));
    let report = ok(
        d,
        &[
            "report",
            "t/result.bin",
            "--name-a",
            "greedy",
            "--name-b",
            "scripted",
        ],
    );
    assert_eq!(report, fs::read_to_string(d.join("t/result.txt")).unwrap());
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), CONFIG).unwrap();
    for out in ["a", "b"] {
        ok(
            d,
            &[
                "gen-data", "--config", "run.toml", "--seed", "9", "--out", out,
            ],
        );
    }
    ok(
        d,
        &[
            "gen-data", "--config", "run.toml", "--seed", "10", "--out", "c",
        ],
    );
    let a = fs::read(d.join("a/dataset.txt")).unwrap();
    assert_eq!(a, fs::read(d.join("b/dataset.txt")).unwrap());
    assert_ne!(a, fs::read(d.join("c/dataset.txt")).unwrap());
}

#[test]
fn bad_input_exits_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| gomcts(d, args).status.code();
    assert_eq!(code(&["tournament", "--no-such-flag"]), Some(1));
    assert_eq!(code(&["no-such-command"]), Some(1));
    assert_eq!(code(&["verify", "missing.txt"]), Some(1));
    assert_eq!(code(&["report", "missing.bin"]), Some(1));
    fs::write(d.join("bad.toml"), "game = \"mini3\"\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&["gen-data", "--config", "bad.toml"]), Some(1));
    fs::write(d.join("game.toml"), "game = \"chess\"\n").unwrap();
    assert_eq!(code(&["gen-data", "--config", "game.toml"]), Some(1));
    fs::write(
        d.join("nomodel.toml"),
        "[tournament.player_a]\nkind = \"argmax_val_star\"\nlambda = 0.05\n",
    )
    .unwrap();
    assert_eq!(code(&["tournament", "--config", "nomodel.toml"]), Some(1));
    assert_eq!(code(&["search"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
}
