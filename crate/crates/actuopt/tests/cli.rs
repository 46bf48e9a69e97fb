use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use actuopt::ExperimentConfig;
use serde_json::Value;
use tempfile::TempDir;

const SMALL_BEAM: &str = r#"
model = "beam"
seed = 3

[beam]
n_cells = 32

[time]
t_final = 1.0
n_steps = 100

[probes]
points = [[0.25], [0.5]]
"#;

const SMALL_WAVE: &str = r#"
model = "wave"
seed = 5

[wave]
nx = 10
ny = 12
neumann = ["top"]
nonlinearity = "sine-gordon"

[initial]
kind = "gaussian"
width = 0.2
amplitude = 0.5

[time]
t_final = 0.5
n_steps = 50

[admissible]
r_ad = 5.0
"#;

struct Run {
    dir: PathBuf,
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().expect("exit code")
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }

    fn table(&self, name: &str) -> (Vec<String>, Vec<Vec<String>>) {
        let text = self.read(name);
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        (header, rows)
    }

    fn column(&self, name: &str, col: &str) -> Vec<f64> {
        let (header, rows) = self.table(name);
        let i = header
            .iter()
            .position(|h| h == col)
            .unwrap_or_else(|| panic!("no column {col}"));
        rows.iter().map(|r| r[i].parse().unwrap()).collect()
    }
}

fn run_in(tmp: &Path, tag: &str, command: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = tmp.join(format!("{tag}.toml"));
    fs::write(&cfg, config).unwrap();
    let dir = tmp.join(tag);
    let output = Command::new(env!("CARGO_BIN_EXE_actuopt"))
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .args(extra)
        .output()
        .unwrap();
    Run { dir, output }
}

fn run(command: &str, config: &str) -> (TempDir, Run) {
    let tmp = TempDir::new().unwrap();
    let r = run_in(tmp.path(), "run", command, config, &[]);
    (tmp, r)
}

fn assert_listed_files_exist(r: &Run) {
    let summary = r.json("summary.json");
    let files = summary["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f == "summary.json"));
    for f in files {
        assert!(r.dir.join(f.as_str().unwrap()).is_file(), "{f} missing");
    }
}

#[test]
fn simulate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = run_in(tmp.path(), "a", "simulate", SMALL_WAVE, &["--threads", "1"]);
    let b = run_in(tmp.path(), "b", "simulate", SMALL_WAVE, &["--threads", "3"]);
    assert_eq!(a.code(), 0, "{}", a.stderr());
    assert_eq!(b.code(), 0, "{}", b.stderr());
    assert_eq!(a.read("trajectory.csv"), b.read("trajectory.csv"));
    assert_listed_files_exist(&a);
}

#[test]
fn rest_state_without_forcing_stays_at_rest() {
    let config = format!("{SMALL_BEAM}\n[initial]\nkind = \"zero\"\n");
    let (_tmp, r) = run("simulate", &config);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let (header, rows) = r.table("trajectory.csv");
    assert_eq!(header, ["t", "energy", "w[0.25]", "w[0.5]"]);
    assert_eq!(rows.len(), 101);
    for row in &rows {
        for v in &row[1..] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn undamped_linear_beam_conserves_energy() {
    let config = SMALL_BEAM.replace("[beam]", "[beam]\nmu = 0.0\ncd = 0.0\nalpha = 0.0");
    let (_tmp, r) = run("simulate", &config);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let energy = r.column("trajectory.csv", "energy");
    let e0 = energy[0];
    assert!(e0 > 0.0);
    let drift = energy.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max);
    assert!(drift < 1e-6, "relative drift {drift:e}");
}

#[test]
fn blow_up_truncates_with_marker() {
    let config = r#"
model = "wave"
[wave]
nx = 12
ny = 12
nonlinearity = "klein-gordon"
exponent = 3
[initial]
kind = "mode"
amplitude = 30.0
[time]
t_final = 2.0
n_steps = 100
"#;
    let (_tmp, r) = run("simulate", config);
    assert_eq!(r.code(), 3, "{}", r.stderr());
    let text = r.read("trajectory.csv");
    let last = text.lines().last().unwrap();
    assert!(
        last.starts_with("# truncated: non-finite state at step"),
        "{last}"
    );
    assert!(text.lines().count() < 102);
    assert_eq!(r.json("summary.json")["status"], "blow_up");
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let tmp = TempDir::new().unwrap();
    let good = run_in(tmp.path(), "good", "gradcheck", SMALL_BEAM, &[]);
    assert_eq!(good.code(), 0, "{}", good.stderr());
    let report = good.json("gradcheck.json");
    assert_eq!(report["failed_checks"].as_array().unwrap().len(), 0);
    assert_listed_files_exist(&good);

    let bad = run_in(
        tmp.path(),
        "bad",
        "gradcheck",
        SMALL_BEAM,
        &["--corrupt-gradient"],
    );
    assert_eq!(bad.code(), 1);
    assert!(bad.stderr().contains("check failed"), "{}", bad.stderr());
    assert!(!bad.json("gradcheck.json")["failed_checks"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn wave_gradcheck_passes() {
    let (_tmp, r) = run("gradcheck", SMALL_WAVE);
    assert_eq!(r.code(), 0, "{}", r.stderr());
}

#[test]
fn optimize_from_rest_stops_immediately() {
    let config = format!("{SMALL_BEAM}\n[initial]\nkind = \"zero\"\n");
    let (_tmp, r) = run("optimize", &config);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let summary = r.json("summary.json");
    assert_eq!(summary["converged"], true);
    assert_eq!(summary["cost_history"], serde_json::json!([0.0]));
    let u = r.column("optimal_u.csv", "u");
    assert!(u.iter().all(|&v| v == 0.0));
}

#[test]
fn optimize_finds_symmetric_design() {
    let (_tmp, r) = run("optimize", SMALL_BEAM);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let j = r.column("optim_history.csv", "J");
    assert!(j.len() > 1);
    assert!(j.windows(2).all(|w| w[1] <= w[0]), "{j:?}");
    let design = r.json("optimal_r.json")["design"][0].as_f64().unwrap();
    assert!((design - 0.5).abs() < 1.0 / 32.0, "{design}");
    let summary = r.json("summary.json");
    assert!(summary["final_residuals"]["res_u"].as_f64().unwrap() < 1e-4);
    assert_listed_files_exist(&r);
}

#[test]
fn wave_optimize_keeps_design_admissible() {
    let (_tmp, r) = run("optimize", SMALL_WAVE);
    assert!(r.code() <= 1, "{}", r.stderr());
    let (header, rows) = r.table("optim_history.csv");
    let cols: Vec<usize> = ["r_1", "r_2"]
        .iter()
        .map(|c| header.iter().position(|h| h == c).unwrap())
        .collect();
    for row in &rows {
        for &c in &cols {
            let v: f64 = row[c].parse().unwrap();
            assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }
    let j = r.column("optim_history.csv", "J");
    assert!(j.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn gridsearch_landscape_is_symmetric() {
    let config = format!("{SMALL_BEAM}\n[gridsearch]\nn_grid = 8\n");
    let (_tmp, r) = run("gridsearch", &config);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let r1 = r.column("landscape.csv", "r_1");
    let j = r.column("landscape.csv", "J");
    assert_eq!(j.len(), 8);
    for k in 0..4 {
        assert!((r1[k] + r1[7 - k] - 1.0).abs() < 1e-12);
        assert!((j[k] - j[7 - k]).abs() <= 1e-6 * j[k], "{} vs {}", j[k], j[7 - k]);
    }
    let best = r.json("summary.json")["details"]["best"]["design"][0]
        .as_f64()
        .unwrap();
    assert!((best - 0.5).abs() < 0.1);
}

#[test]
fn gridsearch_rejects_coarse_grid() {
    let config = format!("{SMALL_BEAM}\n[gridsearch]\nn_grid = 4\n");
    let (_tmp, r) = run("gridsearch", &config);
    assert_eq!(r.code(), 2, "{}", r.stderr());
}

#[test]
fn oracle_compare_passes() {
    let (_tmp, r) = run("oracle-compare", SMALL_BEAM);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let oracle = r.json("oracle.json");
    assert!(oracle["relative_sup_difference"].as_f64().unwrap() <= 1e-2);
    let orders = oracle["greens_orders"].as_array().unwrap();
    assert_eq!(orders.len(), 2);
    assert!(orders.iter().all(|o| o.as_f64().unwrap() >= 1.8), "{orders:?}");
}

#[test]
fn oracle_difference_vanishes_without_state_cost() {
    let config = format!(
        "{SMALL_BEAM}\n[cost]\nq1 = {{ kind = \"uniform\", value = 0.0 }}\nq2 = {{ kind = \"uniform\", value = 0.0 }}\n"
    );
    let (_tmp, r) = run("oracle-compare", &config);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    assert_eq!(
        r.json("oracle.json")["relative_sup_difference"].as_f64().unwrap(),
        0.0
    );
}

#[test]
fn summary_records_the_configuration() {
    let (_tmp, r) = run("simulate", SMALL_WAVE);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let original = ExperimentConfig::from_toml_str(SMALL_WAVE).unwrap();
    let recorded: ExperimentConfig =
        serde_json::from_value(r.json("summary.json")["config"].clone()).unwrap();
    assert_eq!(recorded, original);
    let again = ExperimentConfig::from_toml_str(&recorded.to_toml_string()).unwrap();
    assert_eq!(again, original);
}

#[test]
fn unknown_keys_are_rejected() {
    let config = SMALL_BEAM.replace("n_cells = 32", "n_cells = 32\nstiffness = 2.0");
    let (_tmp, r) = run("simulate", &config);
    assert_eq!(r.code(), 2);
    assert!(r.stderr().contains("stiffness"), "{}", r.stderr());
    assert!(!r.dir.join("summary.json").exists());
}

#[test]
fn invalid_values_name_the_field() {
    let config = SMALL_BEAM.replace("n_steps = 100", "n_steps = 0");
    let (_tmp, r) = run("simulate", &config);
    assert_eq!(r.code(), 2);
    assert!(r.stderr().contains("n_steps"), "{}", r.stderr());
}

#[test]
fn missing_config_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_actuopt"))
        .args(["simulate", "--config"])
        .arg(tmp.path().join("absent.toml"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn sample_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["beam.toml", "wave.toml"] {
        let config = ExperimentConfig::load(&root.join(name)).unwrap();
        config.validate().unwrap();
    }
}
