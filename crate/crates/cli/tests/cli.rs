use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mbal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbal-clo")).args(args).output().expect("spawn mbal-clo")
}

fn ok(args: &[&str]) -> String {
    let out = mbal(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_grid(dir: &TempDir) -> PathBuf {
    let out = path(dir, "sp.json");
    ok(&["gen", "--problem", "shortest-path", "--grid", "3", "--seed", "42", "--out", s(&out)]);
    out
}

fn data_rows(csv: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    lines.next().expect("header");
    lines.map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn gen_reports_the_world_shape() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "sp.json");
    let stdout = ok(&["gen", "--problem", "shortest-path", "--grid", "3", "--seed", "42", "--out", s(&out)]);
    assert!(stdout.contains("d=12 vertices=6"), "{stdout}");
    let out = path(&dir, "pr.json");
    let stdout = ok(&["gen", "--problem", "pricing", "--seed", "7", "--out", s(&out)]);
    assert!(stdout.contains("d=9 vertices=10"), "{stdout}");
}

#[test]
fn supervised_run_labels_every_point() {
    let dir = TempDir::new().unwrap();
    let scenario = gen_grid(&dir);
    let out = path(&dir, "sup.csv");
    ok(&[
        "run", "--scenario", s(&scenario), "--algo", "supervised", "--T", "100", "--trials", "3", "--test-size", "50",
        "--out", s(&out),
    ]);
    let rows = data_rows(&out);
    for trial in 0..3 {
        let last = rows.iter().filter(|r| r[0] == trial.to_string()).last().unwrap();
        assert_eq!(last[1], "100");
        assert_eq!(last[2], "110");
    }
}

#[test]
fn invalid_configuration_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let scenario = gen_grid(&dir);
    let out = path(&dir, "never.csv");
    for extra in [["--p-tilde", "1.5"], ["--q-tilde", "0"], ["--warmup", "0"], ["--trials", "0"]] {
        let mut args = vec!["run", "--scenario", s(&scenario), "--out", s(&out)];
        args.extend(extra);
        let res = mbal(&args);
        assert!(!res.status.success(), "{extra:?} was accepted");
        assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
        assert!(!out.exists(), "{extra:?} wrote output");
    }
    let res = mbal(&["run", "--scenario", s(&scenario), "--surrogate", "hinge", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn comparing_a_file_with_itself_gives_ratio_one() {
    let dir = TempDir::new().unwrap();
    let scenario = gen_grid(&dir);
    let sup = path(&dir, "sup.csv");
    let base = ["--scenario", s(&scenario), "--T", "30", "--trials", "4", "--test-size", "50"];
    let mut args = vec!["run", "--algo", "supervised", "--out", s(&sup)];
    args.extend(base);
    ok(&args);
    // a supervised run relabeled as mbal: identical risks on both sides
    let twin = path(&dir, "twin.csv");
    let text = std::fs::read_to_string(&sup).unwrap().replacen("\"algo\":\"supervised\"", "\"algo\":\"mbal\"", 1);
    std::fs::write(&twin, text).unwrap();
    let out = path(&dir, "cmp.csv");
    let stdout = ok(&["compare", "--supervised", s(&sup), "--mbal", s(&twin), "--label-budget", "20", "--out", s(&out)]);
    assert!(stdout.contains("ratio 1 [1, 1]"), "{stdout}");
    let rows = data_rows(&out);
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 1.0);
    assert_eq!(rows[0][6], "4");
}

#[test]
fn zero_mbal_risk_prints_infinity() {
    let dir = TempDir::new().unwrap();
    let header = "trial,t,n_labels,excess_spo_risk,surrogate_risk,b_t,labeled_flag";
    let write = |name: &str, algo: &str, risk: &str| {
        let p = path(&dir, name);
        let meta = format!(
            "{{\"problem\":\"shortest-path\",\"algo\":\"{algo}\",\"surrogate\":\"spo+\",\"n0\":10,\"seed\":0,\"trials\":2}}"
        );
        let body = format!("# mbal-clo v1\n# {meta}\n{header}\n0,5,15,{risk},1,1,1\n1,5,15,{risk},1,1,1\n");
        std::fs::write(&p, body).unwrap();
        p
    };
    let sup = write("sup.csv", "supervised", "0.2");
    let act = write("act.csv", "mbal", "0");
    let out = path(&dir, "cmp.csv");
    ok(&["compare", "--supervised", s(&sup), "--mbal", s(&act), "--label-budget", "5", "--out", s(&out)]);
    assert_eq!(data_rows(&out)[0][3], "inf");
}

#[test]
fn failing_trials_exit_nonzero_and_name_their_seeds() {
    let dir = TempDir::new().unwrap();
    let scenario = gen_grid(&dir);
    let text = std::fs::read_to_string(&scenario)
        .unwrap()
        .replace("\"sigma_m2\": 0.1111111111111111", "\"sigma_m2\": 1e300")
        .replacen("\"deg\": 1,", "\"deg\": 3,", 1);
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, text).unwrap();
    let out = path(&dir, "bad.csv");
    let res = mbal(&["run", "--scenario", s(&bad), "--trials", "2", "--T", "5", "--seed", "17", "--out", s(&out)]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("--seed 17 trial 0") && stderr.contains("--seed 17 trial 1"), "{stderr}");
}

#[test]
fn unreadable_results_are_rejected() {
    let dir = TempDir::new().unwrap();
    let junk = path(&dir, "junk.csv");
    std::fs::write(&junk, "a,b\n1,2\n").unwrap();
    let out = path(&dir, "cmp.csv");
    let res = mbal(&["compare", "--supervised", s(&junk), "--mbal", s(&junk), "--label-budget", "1", "--out", s(&out)]);
    assert!(!res.status.success());
}
