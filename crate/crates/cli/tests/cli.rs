use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use llghom::container::{self, Container, Kind};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn llghom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llghom")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout_dir(dir: &Path, out: &Output) -> PathBuf {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join(String::from_utf8(out.stdout.clone()).unwrap().trim())
}

fn manifest(run: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap()
}

const SMALL_2D: &str = "dim = 2
a = harmonic mean=2 amp=1 k=1,0
Ms = harmonic mean=1 amp=0.3 k=0,1
K = 0.5
u = 0 0.6 0.8
alpha = 0.5
mu0 = 1
h_a = 0.1 0 0
n_cell = 32
cells = 16
tau = 1e-3
T = 0.005
output_every = 2
";

#[test]
fn minimal_config_fills_defaults_and_hash_matches() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "min.cfg", "dim = 1\n");
    let out = llghom(tmp.path(), &["cell", "min.cfg"]);
    let run = stdout_dir(tmp.path(), &out);
    assert!(run.starts_with(tmp.path().join("runs")));
    let m = manifest(&run);
    let config = m["config"].as_str().unwrap();
    for key in ["alpha = 1.0", "mu0 = 0.0", "n_cell = 256", "profile = bump", "a11 = constant value=1.0"] {
        assert!(config.contains(key), "{key} missing from echo:\n{config}");
    }
    assert_eq!(m["config_hash"].as_str().unwrap(), hex::encode(Sha256::digest(config.as_bytes())));
    assert_eq!(m["subcommand"], "cell");
    assert_eq!(std::fs::read_to_string(run.join("config.txt")).unwrap(), config);
    let manifests =
        std::fs::read_dir(&run).unwrap().filter(|e| e.as_ref().unwrap().file_name() == "manifest.json").count();
    assert_eq!(manifests, 1);
    for o in m["outputs"].as_array().unwrap() {
        assert!(run.join(o.as_str().unwrap()).exists());
    }
    let summary = std::fs::read_to_string(run.join("summary.txt")).unwrap();
    assert!(summary.contains("a0 =\n1.000000000000e0\n"), "{summary}");
}

#[test]
fn validation_and_parse_errors_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "alpha.cfg", "dim = 1\nalpha = -1\n");
    let out = llghom(tmp.path(), &["cell", "alpha.cfg"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha > 0"));

    write(tmp.path(), "mu.cfg", "dim = 1\nmu0 = 0.5\n");
    let out = llghom(tmp.path(), &["cell", "mu.cfg"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n != 1"));

    write(tmp.path(), "bad.cfg", "dim = 1\n\nK = wobbly value=1\n");
    let out = llghom(tmp.path(), &["cell", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    assert_eq!(llghom(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(llghom(tmp.path(), &["cell", "absent.cfg"]).status.code(), Some(5));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn constant_material_cell_reports_a() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.cfg", "dim = 2\na11 = 1.5\na22 = 2.5\na12 = 0.25\nn_cell = 16\n");
    let run = stdout_dir(tmp.path(), &llghom(tmp.path(), &["cell", "c.cfg", "--out", "cellrun"]));
    let (_, hom) = container::read_cell(&Container::read(&run.join("cell.bin")).unwrap()).unwrap();
    assert_eq!(hom.a0[0][0], 1.5);
    assert_eq!(hom.a0[1][1], 2.5);
    assert_eq!(hom.a0[0][1], 0.25);
}

#[test]
fn dry_run_plans_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.cfg", "dim = 1\nsweep_eps = 1/4 1/8 1/16\nT = 0.1\ntau = 1e-3\n");
    let out = llghom(tmp.path(), &["converge", "s.cfg", "--dry-run"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].contains("64") && rows[0].contains("100"), "{text}");
    assert!(rows[2].contains("256"));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn missing_cell_container_for_correct() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.cfg", SMALL_2D);
    write(tmp.path(), "traj.bin", "");
    let out = llghom(
        tmp.path(),
        &["correct", "c.cfg", "--trajectory", "traj.bin", "--cell", "nowhere/cell.bin", "--eps", "0.25"],
    );
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing artifact"));
}

#[test]
fn cell_simulate_correct_energy_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "hom.cfg", &format!("{SMALL_2D}eps = 0\n"));
    let cell = stdout_dir(dir, &llghom(dir, &["cell", "hom.cfg"])).join("cell.bin");
    let cell_s = cell.to_str().unwrap();
    let sim = stdout_dir(dir, &llghom(dir, &["simulate", "hom.cfg", "--cell", cell_s]));
    let csv = std::fs::read_to_string(sim.join("energy.csv")).unwrap();
    assert!(csv.starts_with(
        "t,G_total,exchange,anisotropy,stray,microscale,zeeman,damping_integral,kinetic_integral,max_norm_deviation\n"
    ));
    assert_eq!(csv.lines().count(), 1 + 6);
    let traj_c = Container::read(&sim.join("trajectory.bin")).unwrap();
    assert_eq!(traj_c.meta["level"], "homogenized");
    let traj = container::read_trajectory(&traj_c).unwrap();
    assert_eq!(traj.snapshots.len(), 4);
    let m = manifest(&sim);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(std::fs::read(&cell).unwrap())));

    let traj_path = sim.join("trajectory.bin");
    let traj_s = traj_path.to_str().unwrap();
    let cor = stdout_dir(
        dir,
        &llghom(dir, &["correct", "hom.cfg", "--trajectory", traj_s, "--cell", cell_s, "--eps", "0.5"]),
    );
    let a = Container::read(&cor.join("approximations.bin")).unwrap();
    assert_eq!(a.kind, Kind::Approximation);
    assert_eq!(a.cells, 16);
    assert_eq!(a.require("t").unwrap().len(), 4);
    for k in 0..4 {
        let m0 = a.vector(&format!("m0.{k}")).unwrap();
        let m1 = a.vector(&format!("m1.{k}")).unwrap();
        let dots: f64 = (0..m0.len())
            .map(|i| {
                let (p, q) = (m0.get(i), m1.get(i));
                (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]).abs()
            })
            .fold(0.0, f64::max);
        assert!(dots < 1e-10);
        for name in ["tilde_m", "neumann_corrected", "twoscale_corrected"] {
            a.vector(&format!("{name}.{k}")).unwrap();
        }
    }
    // correct refuses an ε-level trajectory
    write(dir, "eps.cfg", &format!("{SMALL_2D}eps = 0.5\n"));
    let esim = stdout_dir(dir, &llghom(dir, &["simulate", "eps.cfg"]));
    let etraj = esim.join("trajectory.bin");
    let out =
        llghom(dir, &["correct", "hom.cfg", "--trajectory", etraj.to_str().unwrap(), "--cell", cell_s, "--eps", "0.5"]);
    assert_eq!(out.status.code(), Some(5));

    let en = stdout_dir(dir, &llghom(dir, &["energy", "hom.cfg", "--trajectory", traj_s, "--cell", cell_s]));
    let text = std::fs::read_to_string(en.join("energy.txt")).unwrap();
    assert!(text.contains("max |G(snapshot) - G(log)| = 0.000e0"), "{text}");
    assert!(text.contains("kinetic within bound = true"));

    let study = stdout_dir(dir, &llghom(dir, &["energy", "eps.cfg", "--levels", "2"]));
    let text = std::fs::read_to_string(study.join("energy.txt")).unwrap();
    assert!(text.contains("orders = ["), "{text}");
}

#[test]
fn output_directory_is_not_shared_between_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "a.cfg", "dim = 1\nn_cell = 16\n");
    write(dir, "b.cfg", "dim = 1\nn_cell = 32\n");
    assert!(llghom(dir, &["cell", "a.cfg", "--out", "o"]).status.success());
    assert!(llghom(dir, &["cell", "a.cfg", "--out", "o"]).status.success());
    assert_eq!(llghom(dir, &["cell", "b.cfg", "--out", "o"]).status.code(), Some(6));
    let m = manifest(&dir.join("o"));
    assert!(m["config"].as_str().unwrap().contains("n_cell = 16"));
}

#[test]
fn converge_is_deterministic_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(
        dir,
        "s.cfg",
        "dim = 1\na = harmonic mean=2 amp=1 k=1\nK = 0.5\nu = 0 0.6 0.8\nalpha = 0.5\nh_a = 0.2 0 0.1\n\
         T = 0.005\ntau = 1e-3\ncoarse_cells = 64\nn_cell = 32\nsweep_eps = 1/4 1/8 1/16\n",
    );
    let mut csvs = Vec::new();
    for (w, out) in [("1", "w1"), ("3", "w3"), ("1", "w1b")] {
        let run = stdout_dir(dir, &llghom(dir, &["converge", "s.cfg", "--workers", w, "--out", out, "--gnuplot"]));
        assert!(run.join("report.gp").exists());
        assert!(std::fs::read_to_string(run.join("rates.txt")).unwrap().contains("slope"));
        csvs.push(std::fs::read(run.join("report.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
}
