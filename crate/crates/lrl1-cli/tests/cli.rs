use lrl1::classify::PerturbationReport;
use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lrl1(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrl1"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("LRL1_SEED")
        .output()
        .expect("spawn lrl1")
}

fn ok(out: &Path, args: &[&str]) -> Value {
    let o = lrl1(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is json")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_MC_SYM: &[&str] =
    &["--set", "formulation=mc-sym", "--set", "d=8", "--set", "r=1", "--set", "k=3", "--set", "s=0.9"];

#[test]
fn gen_is_reproducible_and_loads_back() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "11", "--set", "formulation=ms-asym", "--set", "d=5", "--set", "m=30", "gen"];
    let mut sa = ok(a.path(), &args);
    let mut sb = ok(b.path(), &args);
    sa["file"].take();
    sb["file"].take();
    assert_eq!(sa, sb);
    assert_eq!(sa["m"], 30);
    assert_eq!(sa["formulation"], "ms-asym");
    let fa = fs::read(a.path().join("instance.lrl1")).unwrap();
    assert_eq!(fa, fs::read(b.path().join("instance.lrl1")).unwrap());

    let inst = lrl1::io::load_instance(&a.path().join("instance.lrl1")).unwrap();
    let again = a.path().join("again.lrl1");
    lrl1::io::save_instance(&inst, &again).unwrap();
    assert_eq!(fa, fs::read(&again).unwrap());

    let c = tempfile::tempdir().unwrap();
    ok(c.path(), &["--seed", "12", "--set", "formulation=ms-asym", "--set", "d=5", "--set", "m=30", "gen"]);
    assert_ne!(fa, fs::read(c.path().join("instance.lrl1")).unwrap());
}

#[test]
fn seed_from_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lrl1"))
        .arg("--out")
        .arg(a.path())
        .arg("gen")
        .env("LRL1_SEED", "5")
        .output()
        .unwrap();
    assert!(o.status.success());
    ok(b.path(), &["--seed", "5", "gen"]);
    assert_eq!(fs::read(a.path().join("instance.lrl1")).unwrap(), fs::read(b.path().join("instance.lrl1")).unwrap());
}

#[test]
fn solve_with_zero_iterations_records_the_start() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--set", "d=5", "--set", "m=40", "gen"]);
    let inst = d.path().join("instance.lrl1");
    let s = ok(d.path(), &["--set", "t_max=0", "solve", "--instance", inst.to_str().unwrap()]);
    assert_eq!(s["status"], "ok");
    let csv = fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");

    let s = ok(d.path(), &["--set", "t_max=50", "--format", "json", "--plot", "solve", "--instance", inst.to_str().unwrap()]);
    assert_eq!(s["iterations"], 50);
    let t = json(&d.path().join("trajectory.json"));
    assert_eq!(t["records"].as_array().unwrap().len(), 51);
    assert!(fs::read_to_string(d.path().join("trajectory.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn probe_report_round_trips_and_matches_prediction() {
    let d = tempfile::tempdir().unwrap();
    let mut args = SMALL_MC_SYM.to_vec();
    args.extend(["--set", "p=0.5", "--set", "noise=positive-outlier", "gen"]);
    ok(d.path(), &args);
    let inst = d.path().join("instance.lrl1");
    let s = ok(d.path(), &["--set", "refine_iters=20", "probe", "--instance", inst.to_str().unwrap()]);
    assert_eq!(s["solution"], "sym");

    let text = fs::read_to_string(d.path().join("report.json")).unwrap();
    let rep: PerturbationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(rep.gammas.len(), 8);
    let m = lrl1::io::load_instance(&inst).unwrap().m() as f64;
    let sc: Vec<_> = rep.probes.iter().filter(|p| p.name == "sym_completion").collect();
    assert_eq!(sc.len(), 8);
    for p in sc {
        assert!(p.feasible);
        assert_eq!(p.predicted, Some(-p.gamma * p.gamma / m));
        assert!((p.delta_f - p.predicted.unwrap()).abs() <= 1e-9 * p.gamma * p.gamma, "{p:?}");
    }
    assert_eq!(rep.classification.name(), s["classification"]);
}

#[test]
fn noiseless_instance_has_no_noise_probes() {
    let d = tempfile::tempdir().unwrap();
    let mut args = SMALL_MC_SYM.to_vec();
    args.extend(["--set", "p=0", "gen"]);
    let g = ok(d.path(), &args);
    assert_eq!(g["support"], 0);
    let inst = d.path().join("instance.lrl1");
    ok(d.path(), &["--set", "refine_iters=20", "probe", "--instance", inst.to_str().unwrap()]);
    let rep: PerturbationReport = serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    for p in &rep.probes {
        if p.name != "random_sphere" {
            assert!(!p.feasible, "{} should be infeasible without noise", p.name);
        }
    }
    assert_ne!(rep.classification.name(), "StrictSaddleCandidate");
}

const SWEEP: &[&str] = &[
    "--set", "formulation=ms-asym", "--set", "d=6", "--set", "r=1", "--set", "k=3", "--set", "grid=12,60",
    "--set", "kinds=balanced,imbalanced", "--set", "seeds=2", "--set", "refine_iters=30", "--set", "n_random=4",
    "--seed", "3",
];

fn sweep(out: &Path, jobs: &str) -> Value {
    let mut args = SWEEP.to_vec();
    args.extend(["--jobs", jobs, "sweep"]);
    ok(out, &args)
}

#[test]
fn sweep_is_deterministic_and_restartable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    sweep(a.path(), "1");
    sweep(b.path(), "4");
    let pa = a.path().join("phase.csv");
    let full = fs::read_to_string(&pa).unwrap();
    assert_eq!(full, fs::read_to_string(b.path().join("phase.csv")).unwrap());
    assert_eq!(full.lines().count(), 1 + 8);
    assert_eq!(
        fs::read_to_string(a.path().join("summary.json")).unwrap(),
        fs::read_to_string(b.path().join("summary.json")).unwrap()
    );

    // Keep three rows plus half of the fourth, as if the run was killed.
    let cut: usize = full.split_inclusive('\n').take(4).map(str::len).sum::<usize>() + 10;
    fs::write(&pa, &full[..cut]).unwrap();
    sweep(a.path(), "2");
    assert_eq!(fs::read_to_string(&pa).unwrap(), full);

    // A finished sweep reruns nothing and leaves the file alone.
    sweep(a.path(), "1");
    assert_eq!(fs::read_to_string(&pa).unwrap(), full);
}

#[test]
fn usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let o = lrl1(d.path(), &["--set", "bogus=1", "gen"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let o = lrl1(d.path(), &["--set", "formulation=mc-sym", "rip"]);
    assert_eq!(o.status.code(), Some(2));

    let o = lrl1(d.path(), &["solve", "--instance", d.path().join("missing.lrl1").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = lrl1(d.path(), &["--jobs", "0", "gen"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg");
    fs::write(&cfg, "# small sensing run\nformulation = ms-sym\nd = 4\nm = 25 # inline\nseed = 9\n").unwrap();
    let g = ok(d.path(), &["--config", cfg.to_str().unwrap(), "gen"]);
    assert_eq!((g["d1"].as_u64(), g["m"].as_u64(), g["seed"].as_u64()), (Some(4), Some(25), Some(9)));
    let g = ok(d.path(), &["--config", cfg.to_str().unwrap(), "--set", "m=30", "--seed", "1", "gen"]);
    assert_eq!((g["m"].as_u64(), g["seed"].as_u64()), (Some(30), Some(1)));

    ok(d.path(), &["--config", cfg.to_str().unwrap(), "--set", "samples=20", "--format", "json", "rip"]);
    let r = json(&d.path().join("rip.json"));
    let (lo, hi) = (r["min_ratio"].as_f64().unwrap(), r["max_ratio"].as_f64().unwrap());
    assert!(0.0 < lo && lo <= hi, "{r}");
}

#[test]
fn fig1_preset_writes_every_formulation() {
    let d = tempfile::tempdir().unwrap();
    let s = ok(d.path(), &["--set", "t_max=3", "--set", "d=6", "--set", "m=60", "preset", "fig1"]);
    let runs = s.as_array().unwrap();
    assert_eq!(runs.len(), 4);
    for (v, f) in runs.iter().zip(["ms-sym", "ms-asym", "mc-sym", "mc-asym"]) {
        assert_eq!(v["formulation"], f);
        assert_eq!(v["assumptions"]["t_max"], 3);
        let csv = fs::read_to_string(d.path().join("fig1").join(format!("{f}-0.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + 4);
    }
}

#[test]
fn fig2_preset_uses_documented_sizes() {
    let d = tempfile::tempdir().unwrap();
    let s = ok(d.path(), &["--set", "seeds=1", "--set", "t_max=5", "preset", "fig2-sym"]);
    assert_eq!(s["trajectories"], 1);
    let sum = json(&d.path().join("fig2-sym").join("summary.json"));
    let a = &sum["assumptions"];
    assert_eq!(a["m"], 90);
    assert_eq!(a["p"], 0.1);
    assert_eq!(a["t_max"], 5);
    assert_eq!(sum["target"], 1e-3);
    assert!(d.path().join("fig2-sym").join("seed-00.csv").exists());

    let p = lrl1::presets::fig2(true);
    assert_eq!((p.spec.d1, p.spec.r, p.spec.k), (20, 3, 20));
}

#[test]
fn table1_preset_with_overrides() {
    let d = tempfile::tempdir().unwrap();
    let s = ok(
        d.path(),
        &["--set", "grid=10,20", "--set", "seeds=1", "--set", "refine_iters=20", "--set", "n_random=4", "--plot", "preset", "table1"],
    );
    let parts = s.as_array().unwrap();
    assert_eq!(parts.len(), 2);
    for p in parts {
        assert_eq!(p["failed_jobs"], 0);
        let dir = Path::new(p["dir"].as_str().unwrap());
        let sum = json(&dir.join("summary.json"));
        assert!(!sum["global_min"].as_array().unwrap().is_empty());
        assert!(dir.join("phase.csv").exists() && dir.join("heat.svg").exists());
    }
}
