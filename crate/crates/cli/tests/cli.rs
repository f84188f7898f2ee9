use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const COUETTE: &str = "[profile]\nexpr = \"x2\"\nh = 1.0\n[trace]\nk_max = 3.0\n[census]\nk_list = [0.5, 3.0]\n";
const TANH: &str =
    "[profile]\nexpr = \"tanh(2*(x2+1))\"\nh = 2.0\n[trace]\nk_max = 3.0\n[census]\nk_list = [0.3, 1.0, 2.5]\n";
const CUBIC: &str =
    "[profile]\nexpr = \"1+x2+((1+x2)^3)/2\"\nh = 2.0\n[trace]\nk_max = 4.0\n[census]\nk_list = [2.0]\n";

struct Run {
    dir: TempDir,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn exec(&self, args: &[&str]) -> Output {
        self.exec_in(&self.out(), args)
    }

    fn exec_in(&self, out: &Path, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_shearflow"))
            .arg("--config")
            .arg(self.dir.path().join("run.toml"))
            .arg("--out")
            .arg(out)
            .args(args)
            .output()
            .unwrap()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Data rows of a branch file as `(k, re c, im c)`.
fn branch_rows(text: &str) -> Vec<(f64, f64, f64)> {
    text.lines()
        .skip(1)
        .map(|line| {
            let cols: Vec<f64> = line.split(',').take(3).map(|v| v.parse().unwrap()).collect();
            (cols[0], cols[1], cols[2])
        })
        .collect()
}

#[test]
fn check_reports_inflections_and_exit_codes() {
    let couette = Run::new(COUETTE).exec(&["check"]);
    assert_eq!(couette.status.code(), Some(0));
    assert!(stdout(&couette).contains("inflections: none"));

    let tanh = Run::new(TANH).exec(&["check"]);
    assert_eq!(tanh.status.code(), Some(0));
    assert!(stdout(&tanh).contains("U'''<0"));

    let wavy = Run::new("[profile]\nexpr = \"sin(3*x2)\"\nh = 2.0\n").exec(&["check"]);
    assert_eq!(wavy.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_two() {
    let unknown = Run::new(&format!("{COUETTE}[physics]\ngravity = 2.0\n")).exec(&["check"]);
    assert_eq!(unknown.status.code(), Some(2));
    let negative = Run::new("[profile]\nexpr = \"x2\"\nh = -1.0\n").exec(&["check"]);
    assert_eq!(negative.status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let missing = Command::new(env!("CARGO_BIN_EXE_shearflow"))
        .arg("--config")
        .arg(dir.path().join("absent.toml"))
        .arg("check")
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn neutral_writes_report_files() {
    let run = Run::new(TANH);
    let output = run.exec(&["neutral"]);
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout(&output).contains("k_minus = 0.61315"));
    let csv = run.read("neutral.csv");
    assert!(csv.starts_with("kind,c,k,k_sl,residual\n"));
    assert!(csv.lines().any(|l| l.starts_with("inflection,") && l.contains("2.18513778")));
    let text = run.read("neutral.txt");
    assert!(text.contains("inflection.0.class=channel_unstable_single"));
    assert!(text.contains("inflection.0.k_c=1.8316"));
}

#[test]
fn couette_trace_has_two_real_branches() {
    let run = Run::new(COUETTE);
    assert_eq!(run.exec(&["trace"]).status.code(), Some(0));
    let plus = branch_rows(&run.read("branch_c_plus_1.csv"));
    let minus = branch_rows(&run.read("branch_c_minus_lower_1.csv"));
    assert!(plus.iter().chain(&minus).all(|r| r.2 == 0.0));
    assert!((plus.last().unwrap().0 - 3.0).abs() < 1e-12);
    let end = minus.last().unwrap();
    assert!((end.0 - 1.9150080481).abs() < 1e-8, "{end:?}");
    assert!((end.1 + 1.0).abs() < 1e-12);
}

#[test]
fn tanh_trace_connects_bottom_to_inflection() {
    let run = Run::new(TANH);
    assert_eq!(run.exec(&["trace"]).status.code(), Some(0));
    let rows = branch_rows(&run.read("branch_c_minus_lower_1.csv"));
    let last = rows.last().unwrap();
    assert!((last.0 - 2.185137781).abs() < 1e-6 && last.1.abs() < 1e-8, "{last:?}");
    assert!(rows.iter().any(|r| (r.0 - 0.6131562924).abs() < 1e-8 && (r.1 - (-2.0f64).tanh()).abs() < 1e-10));
    assert!(rows.iter().filter(|r| r.0 > 0.62 && r.0 < 2.18).all(|r| r.2 > 0.0));
}

#[test]
fn cubic_trace_leaves_inflection_upward() {
    let run = Run::new(CUBIC);
    assert_eq!(run.exec(&["trace"]).status.code(), Some(0));
    let rows = branch_rows(&run.read("branch_inflection_branch_1.csv"));
    assert!((rows[0].0 - 1.468993).abs() < 1e-5 && rows[0].1 == 0.0);
    assert!(rows[1..].iter().all(|r| r.2 > 0.0));
    assert!((rows.last().unwrap().0 - 4.0).abs() < 1e-12);
}

#[test]
fn verify_passes_by_default_and_fails_when_loose() {
    let run = Run::new(TANH);
    let output = run.exec(&["verify"]);
    assert_eq!(output.status.code(), Some(0), "{}", stdout(&output));
    let csv = run.read("verify.csv");
    assert!(csv.starts_with("check,status,detail\n"));
    for k in ["0.3", "1", "2.5"] {
        assert_eq!(csv.lines().filter(|l| l.starts_with(&format!("census_branch_k={k},pass"))).count(), 1, "{csv}");
    }

    let loose = Run::new(&format!("{TANH}[solver]\nrtol = 1e-2\natol = 1e-2\n"));
    let output = loose.exec(&["verify"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(loose.read("verify.csv").lines().any(|l| l.contains(",fail,")));
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let run = Run::new(TANH);
    let a = run.dir.path().join("a");
    let b = run.dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        for cmd in ["trace", "census", "scan"] {
            assert_eq!(run.exec_in(out, &["--threads", threads, cmd]).status.code(), Some(0));
        }
    }
    for name in ["branch_c_plus_1.csv", "branch_c_minus_lower_1.csv", "census.csv", "scan.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn census_counts_unstable_modes() {
    let run = Run::new(TANH);
    assert_eq!(run.exec(&["census"]).status.code(), Some(0));
    let csv = run.read("census.csv");
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let counts: Vec<(&str, &str)> = rows.iter().map(|r| (r[1], r[2])).collect();
    assert_eq!(counts, [("0", "0"), ("1", "1"), ("0", "0")]);
}

#[test]
fn effective_config_reloads() {
    let run = Run::new(COUETTE);
    assert_eq!(run.exec(&["neutral"]).status.code(), Some(0));
    let effective = run.read("effective_config.toml");
    assert!(effective.contains("[solver]") && effective.contains("rtol"));
    let again = Run::new(&effective);
    let output = again.exec(&["neutral"]);
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(again.read("neutral.csv"), run.read("neutral.csv"));
}
