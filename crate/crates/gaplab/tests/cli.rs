//! End-to-end checks of the command-line interface and the pipeline's file
//! artifacts, including byte-level determinism across worker counts.

use std::path::Path;
use std::process::Command;

fn gaplab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gaplab"))
}

fn tmp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("gaplab-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn gen_writes_certified_dimacs_and_exit_codes_work() {
    let dir = tmp_dir("gen");
    let out = dir.join("inst.cnf");
    let status = gaplab()
        .args(["gen", "--n", "10", "--seed", "5", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let inst = gaplab::sat::dimacs::from_dimacs(&text).unwrap();
    assert_eq!(inst.n, 10);
    assert!(gaplab::sat::certify_exactly_two(&inst).unwrap());

    // an impossible cap aborts with exit code 2
    let status = gaplab()
        .args(["gen", "--n", "10", "--seed", "5", "--cap", "3", "--out"])
        .arg(dir.join("nope.cnf"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn exact_perturb_hist_and_qmc_run_on_a_penalized_instance() {
    let dir = tmp_dir("ops");
    let inst_path = dir.join("inst.cnf");
    let status = gaplab()
        .args(["gen", "--n", "8", "--seed", "11", "--penalize", "--out"])
        .arg(&inst_path)
        .status()
        .unwrap();
    assert!(status.success());

    let csv_path = dir.join("spec.csv");
    let status = gaplab()
        .args(["exact", "--instance"])
        .arg(&inst_path)
        .args(["--s-grid", "0.2:0.8:0.2", "--out"])
        .arg(&csv_path)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s,E0,E1,gap,W0,W1");
    assert_eq!(lines.len(), 5); // header + 4 grid points

    let json_path = dir.join("perturb.json");
    let status = gaplab()
        .args(["perturb", "--instance"])
        .arg(&inst_path)
        .arg("--out")
        .arg(&json_path)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert!(report["e2_lower"].as_f64().unwrap() < 0.0);
    assert_eq!(report["d"].as_array().unwrap().len(), 8);

    let hist_path = dir.join("hist.csv");
    let status = gaplab()
        .args(["hist", "--instance"])
        .arg(&inst_path)
        .args(["--samples", "20000", "--bins", "16", "--out"])
        .arg(&hist_path)
        .status()
        .unwrap();
    assert!(status.success());
    let hist = std::fs::read_to_string(&hist_path).unwrap();
    assert!(hist.starts_with("bin_lo,bin_hi,count\n"));
    let total: u64 = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 20000);

    let qmc_path = dir.join("qmc.csv");
    let status = gaplab()
        .args(["qmc", "--instance"])
        .arg(&inst_path)
        .args([
            "--s", "0.5", "--seed-string", "zeros", "--beta", "8", "--sweeps", "4000", "--thin",
            "4", "--equil", "100", "--rng-seed", "3", "--out",
        ])
        .arg(&qmc_path)
        .status()
        .unwrap();
    assert!(status.success());
    let qmc = std::fs::read_to_string(&qmc_path).unwrap();
    assert!(qmc.starts_with("s,seed_string,H_mean,H_err,"));
    assert!(qmc.lines().nth(1).unwrap().contains(",zeros,"));
}

fn write_config(dir: &Path, workers: usize) -> std::path::PathBuf {
    let path = dir.join(format!("config-{workers}.toml"));
    std::fs::write(
        &path,
        format!(
            "n = 8\nmaster_seed = 21\nbeta = 10.0\ns_grid = \"0.2:0.8:0.2\"\n\
             sweeps = 4000\nthin = 4\nequil = 100\nworkers = {workers}\n\
             coeff_threshold = -10.0\nrefine = false\n"
        ),
    )
    .unwrap();
    path
}

#[test]
fn pipeline_artifacts_are_complete_and_worker_count_invariant() {
    let dir = tmp_dir("pipeline");
    let expected = [
        "instance.cnf",
        "perturb.json",
        "grid_original.csv",
        "crossing.json",
        "coeffs.json",
        "grid_randomized.csv",
        "crossing_randomized.json",
        "manifest.json",
    ];

    let mut artifacts: Vec<Vec<String>> = Vec::new();
    for workers in [1usize, 2] {
        let out_dir = dir.join(format!("run-{workers}"));
        let config = write_config(&dir, workers);
        let status = gaplab()
            .args(["pipeline", "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(&out_dir)
            .status()
            .unwrap();
        assert!(status.success(), "pipeline failed with workers={workers}");
        let mut contents = Vec::new();
        for name in &expected {
            let text = std::fs::read_to_string(out_dir.join(name))
                .unwrap_or_else(|_| panic!("missing artifact {name}"));
            contents.push(text);
        }
        artifacts.push(contents);
    }
    for (name, (a, b)) in expected.iter().zip(artifacts[0].iter().zip(&artifacts[1])) {
        assert_eq!(a, b, "artifact {name} differs between worker counts");
    }

    let manifest: serde_json::Value = serde_json::from_str(&artifacts[0][7]).unwrap();
    let stages = manifest["stages"].as_array().unwrap();
    assert!(stages.iter().all(|s| s["status"] == "completed"));
}

#[test]
fn pipeline_dry_run_plans_without_artifacts() {
    let dir = tmp_dir("dry");
    let config = write_config(&dir, 1);
    let out_dir = dir.join("plan");
    let status = gaplab()
        .args(["pipeline", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .arg("--dry-run")
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert!(manifest["stages"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["status"] == "planned"));
    assert!(!out_dir.join("instance.cnf").exists());
}
