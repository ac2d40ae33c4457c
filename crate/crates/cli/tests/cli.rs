//! End-to-end checks of the `vflsim` binary: run output files, determinism,
//! divergence handling, config error anchoring, the shipped reference
//! config, comparison verdicts, and the selftest budget.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use tempfile::TempDir;

const SMALL: &str = "data = synthetic\n\
samples = 40\n\
features = 16\n\
cond = 50\n\
noise = 0.05\n\
data_seed = 3\n\
n_clients = 4\n\
iterations = 400\n\
report_every = 50\n\
seeds = 1\n\
\n\
[solver.gd]\n";

fn vflsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vflsim"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_config(dir: &Path, text: &str) -> (Output, PathBuf) {
    let config = write_config(dir, "exp.cfg", text);
    let outdir = dir.join("runs");
    let out = vflsim().arg("run").arg(&config).arg("--outdir").arg(&outdir).output().unwrap();
    (out, outdir)
}

fn first_iter_reaching(csv: &Path, threshold: f64) -> Option<u64> {
    let text = fs::read_to_string(csv).unwrap();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let iter: u64 = fields[0].parse().unwrap();
        let subopt: f64 = fields[4].parse().unwrap();
        if subopt <= threshold {
            return Some(iter);
        }
    }
    None
}

#[test]
fn zero_iteration_runs_emit_only_the_initial_row() {
    let dir = TempDir::new().unwrap();
    let (out, outdir) = run_config(dir.path(), &SMALL.replace("iterations = 400", "iterations = 0"));
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = fs::read_to_string(outdir.join("gd-1.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "expected header plus the initial row:\n{csv}");
    assert_eq!(lines[0], "iter,up,down,flops,subopt,violation,gapstar,newgap");
    assert!(lines[1].starts_with("0,"), "row: {}", lines[1]);
    let meta = fs::read_to_string(outdir.join("gd-1.meta.json")).unwrap();
    assert!(meta.contains("\"status\": \"completed\""), "meta: {meta}");
}

#[test]
fn reruns_write_byte_identical_records() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "exp.cfg", SMALL);
    let (first, second) = (dir.path().join("a"), dir.path().join("b"));
    for outdir in [&first, &second] {
        let out = vflsim().arg("run").arg(&config).arg("--outdir").arg(outdir).output().unwrap();
        assert!(out.status.success(), "stderr: {}", stderr(&out));
    }
    for name in ["gd-1.csv", "gd-1.meta.json"] {
        let a = fs::read(first.join(name)).unwrap();
        let b = fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn seed_flag_overrides_the_configured_list() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "exp.cfg", SMALL);
    let outdir = dir.path().join("runs");
    let out = vflsim()
        .arg("run")
        .arg(&config)
        .arg("--outdir")
        .arg(&outdir)
        .arg("--seed")
        .arg("9")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(outdir.join("gd-9.csv").exists());
    assert!(!outdir.join("gd-1.csv").exists());
}

#[test]
fn outdir_env_var_supplies_the_default() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "exp.cfg", SMALL);
    let outdir = dir.path().join("from-env");
    let out = vflsim()
        .arg("run")
        .arg(&config)
        .env("VFLSIM_OUTDIR", &outdir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(outdir.join("gd-1.csv").exists());
}

#[test]
fn libsvm_files_resolve_against_the_config_directory() {
    let dir = TempDir::new().unwrap();
    let data = "\
+1 1:0.5 3:1.0 6:0.25\n\
-1 2:0.75 4:0.5\n\
+1 1:0.25 5:1.0\n\
-1 3:0.5 6:0.75\n\
+1 2:1.0 4:0.25 5:0.5\n\
-1 1:0.75 6:1.0\n\
+1 3:0.25 5:0.75\n\
-1 2:0.5 4:1.0\n";
    fs::write(dir.path().join("tiny.libsvm"), data).unwrap();
    let text = "data = libsvm\n\
path = tiny.libsvm\n\
dimension = 6\n\
n_clients = 3\n\
iterations = 300\n\
report_every = 100\n\
seeds = 1\n\
\n\
[solver.eg_basic]\n";
    let (out, outdir) = run_config(dir.path(), text);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let meta = fs::read_to_string(outdir.join("eg_basic-1.meta.json")).unwrap();
    assert!(meta.contains("\"status\": \"completed\""), "meta: {meta}");
}

#[test]
fn divergence_is_recorded_without_killing_the_batch() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{}gamma = 1e6\nlabel = blowup\n\n[solver.gd]\n",
        SMALL.replace("[solver.gd]", "[solver.eg_basic]")
    );
    let (out, outdir) = run_config(dir.path(), &text);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    let meta = fs::read_to_string(outdir.join("blowup-1.meta.json")).unwrap();
    assert!(meta.contains("\"status\": \"diverged\""), "meta: {meta}");
    assert!(meta.contains("\"divergence_iter\""), "meta: {meta}");
    let gd_meta = fs::read_to_string(outdir.join("gd-1.meta.json")).unwrap();
    assert!(gd_meta.contains("\"status\": \"completed\""), "meta: {gd_meta}");
    assert!(stdout(&out).contains("diverged"), "stdout: {}", stdout(&out));
}

#[test]
fn config_errors_name_the_file_and_line() {
    let dir = TempDir::new().unwrap();
    let config =
        write_config(dir.path(), "bad.cfg", "data = synthetic\nsamples = 40\niterations = soon\n");
    let out = vflsim().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    let anchor = format!("{}:3: key iterations has malformed value soon", config.display());
    assert!(err.contains(&anchor), "stderr: {err}");
}

#[test]
fn reference_config_orders_the_solvers() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fig1-synthetic.cfg");
    let dir = TempDir::new().unwrap();
    let outdir = dir.path().join("fig1");
    let out = vflsim()
        .arg("run")
        .arg(&config)
        .arg("--outdir")
        .arg(&outdir)
        .arg("--quiet")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let eg = first_iter_reaching(&outdir.join("eg_beta-1.csv"), 1e-4).unwrap();
    let nesterov = first_iter_reaching(&outdir.join("nesterov-1.csv"), 1e-4).unwrap();
    let gd = first_iter_reaching(&outdir.join("gd-1.csv"), 1e-4).unwrap();
    assert!(
        eg < nesterov && nesterov < gd,
        "expected eg_beta < nesterov < gd, got {eg} / {nesterov} / {gd}"
    );
}

#[test]
fn compare_detects_ties_and_winners() {
    let dir = TempDir::new().unwrap();
    let (out, outdir) = run_config(dir.path(), SMALL);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let record = outdir.join("gd-1.csv");
    let left = dir.path().join("left.csv");
    let right = dir.path().join("right.csv");
    fs::copy(&record, &left).unwrap();
    fs::copy(&record, &right).unwrap();

    let out = vflsim().arg("compare").arg(&left).arg(&right).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("overall: tie"), "stdout: {}", stdout(&out));

    let out = vflsim().arg("compare").arg(&left).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("single record"), "stdout: {}", stdout(&out));
}

#[test]
fn compare_rejects_mismatched_columns() {
    let dir = TempDir::new().unwrap();
    let (out, outdir) = run_config(dir.path(), SMALL);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "iter,up,loss\n0,0,1.0\n").unwrap();
    let out = vflsim().arg("compare").arg(outdir.join("gd-1.csv")).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("column mismatch"), "stderr: {}", stderr(&out));
}

#[test]
fn compare_merges_records_for_plotting() {
    let dir = TempDir::new().unwrap();
    let (out, outdir) = run_config(dir.path(), SMALL);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let merged = dir.path().join("merged.csv");
    let out = vflsim()
        .arg("compare")
        .arg(outdir.join("gd-1.csv"))
        .arg("--merge")
        .arg(&merged)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = fs::read_to_string(&merged).unwrap();
    assert!(text.starts_with("name,iter,up,down,flops,subopt,violation\n"), "merged: {text}");
    assert!(text.lines().skip(1).all(|l| l.starts_with("gd-1,")), "merged: {text}");
}

#[test]
fn selftest_passes_within_the_budget() {
    let started = Instant::now();
    let out = vflsim().arg("selftest").output().unwrap();
    assert!(out.status.success(), "stdout: {}\nstderr: {}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("invariants ok"), "stdout: {}", stdout(&out));
    assert!(started.elapsed().as_secs() < 60, "selftest took {:?}", started.elapsed());
}
