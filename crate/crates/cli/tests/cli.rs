use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const IDENTITY_LINE: &str = r#"
[map]
kind = "identity"
[cloud]
kind = "grid1d"
lo = -2.0
hi = 2.0
count = 50
[qmetric]
kind = "example1_line"
[schedule]
n_list = [1, 2, 3, 4]
epsilon_list = [0.5, 0.25, 0.125]
"#;

const DOUBLING_SMALL: &str = r#"
[map]
kind = "doubling"
[cloud]
kind = "circle_grid"
count = 32
[qmetric]
kind = "circle_arc"
[schedule]
n_list = [1, 2, 3, 4]
epsilon_list = [0.25, 0.125, 0.0625]
"#;

struct Run {
    dir: TempDir,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("run.toml")
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn qme(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_qme"))
            .args(args)
            .arg("--config")
            .arg(self.config())
            .arg("--out")
            .arg(self.out())
            .output()
            .unwrap()
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.out().join(name)).unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn validate_accepts_example_one() {
    let run = Run::new(IDENTITY_LINE);
    let o = run.qme(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_str(&run.read("run_axioms.json")).unwrap();
    assert_eq!(report["triangle_ok"], true);
    assert_eq!(report["exhaustive"], true);
    assert_eq!(report["symmetric"], false);
}

#[test]
fn validate_lists_triangle_violation() {
    let config = IDENTITY_LINE
        .replace("kind = \"grid1d\"\nlo = -2.0\nhi = 2.0\ncount = 50", "kind = \"indices\"\ncount = 3")
        .replace(
            "kind = \"example1_line\"",
            "kind = \"matrix\"\nrows = [[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]",
        );
    let run = Run::new(&config);
    let o = run.qme(&["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("violation: e(0,2) = 5 > e(0,1) + e(1,2) = 2"), "{}", stdout(&o));
    let rows = csv_rows(&run.read("run_triangle_violations.csv"));
    assert_eq!(rows, vec![vec!["0", "1", "2", "5", "2"]]);
}

#[test]
fn matrix_from_csv_file() {
    let config = IDENTITY_LINE
        .replace("kind = \"grid1d\"\nlo = -2.0\nhi = 2.0\ncount = 50", "kind = \"indices\"\ncount = 2")
        .replace("kind = \"example1_line\"", "kind = \"matrix_csv\"\npath = \"m.csv\"");
    let run = Run::new(&config);
    std::fs::write(run.dir.path().join("m.csv"), "qmetric,v1,2\n0,1\n2,0\n").unwrap();
    let o = run.qme(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn configuration_errors_exit_three() {
    let empty = IDENTITY_LINE.replace("count = 50", "count = 0");
    assert_eq!(Run::new(&empty).qme(&["validate"]).status.code(), Some(3));
    assert_eq!(Run::new("not toml [").qme(&["counts"]).status.code(), Some(3));
    let bad_eps = IDENTITY_LINE.replace("[0.5, 0.25, 0.125]", "[0.5, 0.3]");
    assert_eq!(Run::new(&bad_eps).qme(&["counts"]).status.code(), Some(3));
    let missing = Run::new(IDENTITY_LINE);
    std::fs::remove_file(missing.config()).unwrap();
    assert_eq!(missing.qme(&["counts"]).status.code(), Some(3));
}

#[test]
fn usage_errors_exit_two() {
    let o = Command::new(env!("CARGO_BIN_EXE_qme")).arg("counts").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_qme")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identity_counts_are_constant_in_n() {
    let run = Run::new(IDENTITY_LINE);
    assert_eq!(run.qme(&["counts", "--format", "csv"]).status.code(), Some(0));
    assert!(!run.out().join("run_counts.json").exists());
    let rows = csv_rows(&run.read("run_counts.csv"));
    assert_eq!(rows.len(), 4 * 3 * 4);
    for r in &rows {
        let same_cell_at_n1 = rows
            .iter()
            .find(|o| o[0] == "1" && o[1] == r[1] && o[3] == r[3])
            .unwrap();
        assert_eq!(r[4], same_cell_at_n1[4], "{r:?}");
        assert_eq!(r[5], "exact");
    }
}

#[test]
fn count_rows_satisfy_the_sandwich() {
    let run = Run::new(DOUBLING_SMALL);
    assert_eq!(run.qme(&["counts"]).status.code(), Some(0));
    let rows = csv_rows(&run.read("run_counts.csv"));
    let get = |n: &str, eps: f64, q: &str| -> usize {
        rows.iter()
            .find(|r| r[0] == n && r[1].parse::<f64>().unwrap() == eps && r[3] == q)
            .map(|r| r[4].parse().unwrap())
            .unwrap()
    };
    for n in ["1", "2", "3", "4"] {
        for eps in [0.25, 0.125] {
            for (r, s) in [("r1", "s1"), ("r2", "s2")] {
                assert!(get(n, eps, r) <= get(n, eps, s));
                assert!(get(n, eps, s) <= get(n, eps / 2.0, r));
            }
        }
    }
    let json: serde_json::Value = serde_json::from_str(&run.read("run_counts.json")).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), rows.len());
}

#[test]
fn same_seed_gives_identical_files() {
    let config = format!("seed = 11\ntriple_budget = 100\n{IDENTITY_LINE}");
    let run = Run::new(&config);
    let read_all = |out: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(out).unwrap().map(|e| std::fs::read(e.unwrap().path()).unwrap()).collect();
        v.sort();
        v
    };
    run.qme(&["validate"]);
    run.qme(&["counts"]);
    let first = read_all(&run.out());
    std::fs::remove_dir_all(run.out()).unwrap();
    run.qme(&["validate"]);
    run.qme(&["counts"]);
    assert_eq!(first, read_all(&run.out()));
    let report: serde_json::Value = serde_json::from_str(&run.read("run_axioms.json")).unwrap();
    assert_eq!(report["exhaustive"], false);
    assert_eq!(report["seed"], 11);
}

#[test]
fn seed_flag_overrides_config() {
    let run = Run::new(&format!("triple_budget = 100\n{IDENTITY_LINE}"));
    run.qme(&["validate", "--seed", "99"]);
    let report: serde_json::Value = serde_json::from_str(&run.read("run_axioms.json")).unwrap();
    assert_eq!(report["seed"], 99);
}

#[test]
fn identity_entropy_and_comparison() {
    let run = Run::new(IDENTITY_LINE);
    let o = run.qme(&["entropy"]);
    assert_eq!(o.status.code(), Some(0));
    let est: serde_json::Value = serde_json::from_str(&run.read("run_entropy.json")).unwrap();
    let est = est.as_array().unwrap();
    assert_eq!(est.len(), 4);
    for e in est {
        assert_eq!(e["extrapolated"].as_f64(), Some(0.0));
        assert_eq!(e["log_base"], "e");
    }
    let csv = run.read("run_entropy.csv");
    assert!(csv.starts_with("epsilon,slope,residual,variant,log_base\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 3);

    let o = run.qme(&["compare"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let rows = csv_rows(&run.read("run_compare.csv"));
    assert!(rows.iter().all(|r| r[2] == "true"));
}

#[test]
fn doubling_desk_run_entropy() {
    let run = Run::new(crate_example());
    let o = run.qme(&["entropy", "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let est: serde_json::Value = serde_json::from_str(&run.read("run_entropy.json")).unwrap();
    let h = est[0]["extrapolated"].as_f64().unwrap();
    assert!((0.55..=0.80).contains(&h), "{h}");
}

fn crate_example() -> &'static str {
    include_str!("../src/example.toml")
}

#[test]
fn example_config_is_printed() {
    let o = Command::new(env!("CARGO_BIN_EXE_qme")).arg("example-config").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), crate_example());
}

#[test]
fn power_rule_exit_codes() {
    let run = Run::new(DOUBLING_SMALL);
    let o = run.qme(&["power", "--m", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_str(&run.read("run_power.json")).unwrap();
    assert_eq!(report["power_estimate"]["extrapolated"], report["base_estimate"]["extrapolated"]);

    let undeclared = DOUBLING_SMALL.replace("kind = \"doubling\"", "kind = \"doubling\"\nuniformly_continuous = false");
    let run = Run::new(&undeclared);
    let o = run.qme(&["power"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not declared uniformly continuous"));
}

#[test]
fn identity_power_rule_is_zero_on_both_sides() {
    let run = Run::new(IDENTITY_LINE);
    let o = run.qme(&["power", "--m", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_str(&run.read("run_power.json")).unwrap();
    assert_eq!(report["power_estimate"]["extrapolated"].as_f64(), Some(0.0));
    assert_eq!(report["scaled_base"].as_f64(), Some(0.0));
}
