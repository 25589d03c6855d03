//! `lrl1`: instance generation, sub-gradient runs, landscape probes, phase
//! sweeps, RIP checks and figure presets.

mod config;
mod svg;
mod sweep;

use clap::{Parser, Subcommand, ValueEnum};
use config::RunConfig;
use lrl1::classify::{
    default_gammas, global_min_check, job_seed, probe_scaling, rip_ratio, rng_for, Classification, SweepConfig,
};
use lrl1::io::{load_instance, save_instance};
use lrl1::optimizer::{fmt_f64, run_subgradient, write_csv, OptimError, Record, SolveConfig, Trajectory};
use lrl1::presets;
use lrl1::problem::{sample_sensing, Formulation, Instance, InstanceSpec};
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, keys or values (exit code 2).
    Usage(String),
    /// Failures while running (exit code 1).
    Run(String),
}

impl CliError {
    pub fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
        move |e| CliError::Run(format!("{}: {e}", path.display()))
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetName {
    Fig1,
    #[value(name = "fig2-sym")]
    Fig2Sym,
    #[value(name = "fig2-asym")]
    Fig2Asym,
    Table1,
}

#[derive(Parser, Debug)]
#[command(name = "lrl1", version, about = "Landscape probes and sub-gradient experiments for l1-loss matrix recovery")]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed (overrides LRL1_SEED and the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,
    /// Worker threads for sweeps and multi-seed runs; outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Config override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Draw an instance and write it in the binary instance format.
    Gen,
    /// Run the sub-gradient method on an instance.
    Solve {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Probe a true solution of an instance and classify it.
    Probe {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Phase sweep over a sample-size grid, solution kinds and seeds.
    Sweep,
    /// Extremes of the l1/l2 ratio over random low-rank matrices.
    Rip,
    /// Figure and table presets.
    Preset {
        #[arg(value_enum)]
        name: PresetName,
    },
}

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    out: PathBuf,
    pool: rayon::ThreadPool,
    plot: bool,
    format: Format,
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn run_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Run(e.to_string())
}

fn base_seed(flag: Option<u64>, cfg: &RunConfig) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Ok(v) = std::env::var("LRL1_SEED") {
        return v.trim().parse().map_err(|_| CliError::Usage(format!("LRL1_SEED: not an integer: '{v}'")));
    }
    Ok(cfg.seed.unwrap_or(0))
}

fn build_ctx(cli: &Cli) -> Result<Ctx> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            RunConfig::parse_text(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    for pair in &cli.set {
        cfg.set_pair(pair).map_err(usage)?;
    }
    let seed = base_seed(cli.seed, &cfg)?;
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(run_err)?;
    fs::create_dir_all(&cli.out).map_err(CliError::io(&cli.out))?;
    Ok(Ctx { cfg, seed, out: cli.out.clone(), pool, plot: cli.plot, format: cli.format })
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, text).map_err(CliError::io(path))
}

fn to_json(v: &impl serde::Serialize) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(run_err)
}

fn instance_path(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.instance.clone())
        .ok_or_else(|| CliError::Usage("an instance file is required (--instance PATH or instance = PATH)".into()))
}

fn load(path: &Path) -> Result<Instance> {
    load_instance(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn instance_summary(inst: &Instance) -> Value {
    json!({
        "formulation": inst.formulation().name(),
        "d1": inst.gt.d1,
        "d2": inst.gt.d2,
        "r": inst.gt.r,
        "k": inst.k,
        "m": inst.m(),
        "support": inst.noise.support.len(),
        "st": inst.noise.st.len(),
        "t0": inst.noise.t0,
        "p0": inst.noise.p0,
        "sigma1": inst.gt.sigma1(),
    })
}

fn cmd_gen(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.instance_spec().map_err(usage)?;
    let inst = spec.generate(&mut rng_for(ctx.seed)).map_err(usage)?;
    let path = ctx.out.join("instance.lrl1");
    save_instance(&inst, &path).map_err(CliError::io(&path))?;
    let mut v = instance_summary(&inst);
    v["file"] = json!(path.display().to_string());
    v["seed"] = json!(ctx.seed);
    println!("{}", serde_json::to_string(&v).map_err(run_err)?);
    Ok(())
}

/// Outcome of a run, with the recorded prefix when it diverged.
fn finish(res: std::result::Result<Trajectory, OptimError>) -> Result<(&'static str, Vec<Record>)> {
    match res {
        Ok(t) => Ok(("ok", t.records)),
        Err(OptimError::Diverged { trajectory, .. }) => Ok(("diverged", trajectory.records)),
        Err(e) => Err(CliError::Usage(e.to_string())),
    }
}

fn trajectory_text(records: &[Record], format: Format, status: &str) -> Result<String> {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(records, &mut buf).map_err(run_err)?;
            String::from_utf8(buf).map_err(run_err)
        }
        Format::Json => to_json(&json!({"status": status, "records": records})),
    }
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn run_summary(status: &str, records: &[Record], target: Option<f64>) -> Value {
    let min_rel = records.iter().map(|r| r.rel_dist).fold(f64::INFINITY, f64::min);
    let last = records.last();
    let mut v = json!({
        "status": status,
        "iterations": last.map_or(0, |r| r.iter),
        "final_loss": last.map(|r| r.loss),
        "final_rel_dist": last.map(|r| r.rel_dist),
        "min_rel_dist": min_rel,
    });
    if let Some(t) = target {
        v["reached"] = json!(min_rel <= t);
    }
    v
}

fn series(label: String, records: &[Record]) -> svg::Series {
    svg::Series { label, points: records.iter().map(|r| (r.iter as f64, r.rel_dist)).collect() }
}

fn cmd_solve(ctx: &Ctx, instance: &Option<PathBuf>) -> Result<()> {
    let inst = load(&instance_path(instance, &ctx.cfg)?)?;
    let mut rng = rng_for(ctx.seed);
    let cfg = ctx.cfg.solve_config(&inst, &mut rng).map_err(usage)?;
    let (status, records) = finish(run_subgradient(&inst, &cfg, &mut rng))?;
    let path = ctx.out.join(format!("trajectory.{}", ext(ctx.format)));
    write(&path, &trajectory_text(&records, ctx.format, status)?)?;
    if ctx.plot {
        let svg = svg::line_plot("relative distance", "iteration", "rel_dist", &[series(inst.formulation().name().into(), &records)]);
        write(&ctx.out.join("trajectory.svg"), &svg)?;
    }
    let mut v = run_summary(status, &records, None);
    v["trajectory"] = json!(path.display().to_string());
    println!("{}", serde_json::to_string(&v).map_err(run_err)?);
    Ok(())
}

fn cmd_probe(ctx: &Ctx, instance: &Option<PathBuf>) -> Result<()> {
    let inst = load(&instance_path(instance, &ctx.cfg)?)?;
    let mut rng = rng_for(ctx.seed);
    let kind = ctx.cfg.solution_kind(&inst).map_err(usage)?;
    let w = kind.build(&inst, &mut rng).map_err(usage)?;
    let gammas = ctx.cfg.validated_gammas().map_err(usage)?.unwrap_or_else(|| default_gammas(inst.noise.t0));
    let opts = ctx.cfg.probe_options(Default::default()).map_err(usage)?;
    let report = probe_scaling(&inst, &w, &gammas, &opts, &mut rng).map_err(run_err)?;
    let path = ctx.out.join("report.json");
    write(&path, &to_json(&report)?)?;
    let v = json!({
        "solution": kind.name(),
        "classification": report.classification.name(),
        "alpha": report.alpha,
        "first_order_min": report.first_order_min,
        "report": path.display().to_string(),
    });
    println!("{}", serde_json::to_string(&v).map_err(run_err)?);
    Ok(())
}

const CLASSES: [Classification; 4] = [
    Classification::NonCritical,
    Classification::StrictSaddleCandidate,
    Classification::NoDescentFound,
    Classification::Inconclusive,
];

fn write_sweep_outputs(ctx: &Ctx, cfg: &SweepConfig, dir: &Path, title: &str) -> Result<Value> {
    let rows = sweep::run(cfg, dir, &ctx.pool)?;
    let cells = sweep::cells(cfg, &rows);
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    let summary = json!({
        "formulation": cfg.base.formulation.name(),
        "grid": cfg.grid,
        "seeds": cfg.seeds,
        "base_seed": cfg.base_seed,
        "failed_jobs": failed,
        "cells": cells,
    });
    write(&dir.join("summary.json"), &to_json(&summary)?)?;
    if ctx.format == Format::Json {
        let table: Vec<Value> = rows
            .iter()
            .map(|r| {
                json!({
                    "grid_index": r.key.grid_index, "kind_index": r.key.kind_index, "trial": r.key.trial,
                    "grid_value": r.grid_value, "m": r.m, "solution_kind": r.kind.name(), "seed": r.seed,
                    "status": r.status, "classification": r.classification.map(|c| c.name()),
                    "alpha": r.alpha, "first_order_min": r.first_order_min,
                    "best_delta_at_gamma_max": r.best_delta,
                })
            })
            .collect();
        write(&dir.join("phase.json"), &to_json(&table)?)?;
    }
    if ctx.plot {
        let cols: Vec<String> = cfg.grid.iter().map(|g| format!("{g}")).collect();
        let row_labels: Vec<String> = cfg.kinds.iter().map(|k| k.name().to_string()).collect();
        let grid: Vec<Vec<svg::Cell>> = (0..cfg.kinds.len())
            .map(|ki| {
                cells
                    .iter()
                    .filter(|c| c.kind == cfg.kinds[ki])
                    .map(|c| svg::Cell {
                        label: format!("{:.0}%", 100.0 * c.modal_frequency),
                        class: CLASSES.iter().position(|x| *x == c.modal).unwrap_or(3),
                        weight: c.modal_frequency,
                    })
                    .collect()
            })
            .collect();
        let legend: Vec<&str> = CLASSES.iter().map(|c| c.name()).collect();
        write(&dir.join("heat.svg"), &svg::heat_grid(title, &row_labels, &cols, &grid, &legend))?;
    }
    Ok(summary)
}

fn cmd_sweep(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg.sweep_config(ctx.seed).map_err(usage)?;
    let s = write_sweep_outputs(ctx, &cfg, &ctx.out, cfg.base.formulation.name())?;
    println!("{}", serde_json::to_string(&json!({"failed_jobs": s["failed_jobs"], "dir": ctx.out.display().to_string()})).map_err(run_err)?);
    Ok(())
}

fn cmd_rip(ctx: &Ctx) -> Result<()> {
    let c = &ctx.cfg;
    if c.formulation.is_some_and(|f| !f.is_sensing()) {
        return Err(CliError::Usage("rip needs a sensing formulation; completion input rejected".into()));
    }
    let (d1, d2) = (c.d1.unwrap_or(20), c.d2.unwrap_or(20));
    let (m, rp, n) = (c.m.unwrap_or(5000), c.r_prime.unwrap_or(1), c.samples.unwrap_or(500));
    if d1 == 0 || d2 == 0 || m == 0 || n == 0 || rp == 0 || 2 * rp > d1.min(d2) {
        return Err(CliError::Usage(format!("invalid rip parameters d1={d1} d2={d2} m={m} r_prime={rp} samples={n}")));
    }
    let mut rng = rng_for(ctx.seed);
    let ens = sample_sensing(d1, d2, m, &mut rng);
    let (lo, hi) = rip_ratio(&ens, rp, n, &mut rng).map_err(usage)?;
    let c0 = (2.0 / std::f64::consts::PI).sqrt();
    let delta = (1.0 - lo / c0).max(hi / c0 - 1.0);
    let text = match ctx.format {
        Format::Csv => format!(
            "min_ratio,max_ratio,reference,delta\n{},{},{},{}\n",
            fmt_f64(lo),
            fmt_f64(hi),
            fmt_f64(c0),
            fmt_f64(delta)
        ),
        Format::Json => to_json(&json!({"min_ratio": lo, "max_ratio": hi, "reference": c0, "delta": delta}))?,
    };
    write(&ctx.out.join(format!("rip.{}", ext(ctx.format))), &text)?;
    print!("{text}");
    Ok(())
}

/// One seeded run of a multi-seed preset.
struct RunJob {
    label: String,
    seed: u64,
}

fn run_many<F>(ctx: &Ctx, jobs: &[RunJob], run: F) -> Vec<Result<(&'static str, Vec<Record>)>>
where
    F: Fn(&RunJob) -> Result<(&'static str, Vec<Record>)> + Sync,
{
    use rayon::prelude::*;
    ctx.pool.install(|| jobs.par_iter().map(&run).collect())
}

fn solve_overrides(c: &RunConfig, mut s: SolveConfig) -> Result<SolveConfig> {
    s.eta0 = c.eta0.unwrap_or(s.eta0);
    s.q = c.q.unwrap_or(s.q);
    s.t_max = c.t_max.unwrap_or(s.t_max);
    s.validate().map_err(usage)?;
    Ok(s)
}

fn assumptions(spec: &InstanceSpec, s: &SolveConfig) -> Value {
    json!({
        "p": spec.p,
        "noise": spec.noise,
        "noise_relative_to_sigma1": spec.noise_relative,
        "s": if spec.formulation.is_sensing() { None } else { Some(spec.s) },
        "m": if spec.formulation.is_sensing() { Some(spec.m) } else { None },
        "truth_scale": spec.scale,
        "eta0": s.eta0,
        "q": s.q,
        "t_max": s.t_max,
    })
}

fn preset_fig1(ctx: &Ctx) -> Result<()> {
    let dir = ctx.out.join("fig1");
    let trials = ctx.cfg.seeds.unwrap_or(1);
    let mut all = Vec::new();
    for (fi, f) in Formulation::ALL.into_iter().enumerate() {
        let mut p = presets::fig1(f);
        p.spec = ctx.cfg.apply_spec(p.spec).map_err(usage)?;
        if p.spec.formulation != f {
            return Err(CliError::Usage("fig1 runs all four formulations; do not set formulation".into()));
        }
        if let Some(s) = ctx.cfg.init_scale {
            p.init_factor = s;
        }
        let probe = solve_overrides(&ctx.cfg, SolveConfig { eta0: p.eta0, q: p.q, t_max: p.t_max, init: lrl1::Init::Small { scale: 1.0 } })?;
        (p.eta0, p.q, p.t_max) = (probe.eta0, probe.q, probe.t_max);
        let jobs: Vec<RunJob> = (0..trials)
            .map(|t| RunJob { label: format!("{}-{t}", f.name()), seed: job_seed(ctx.seed, fi as u64, t as u64) })
            .collect();
        let results = run_many(ctx, &jobs, |j| {
            let mut rng = rng_for(j.seed);
            let inst = p.spec.generate(&mut rng).map_err(usage)?;
            finish(run_subgradient(&inst, &p.solve_config(&inst), &mut rng))
        });
        let mut runs = Vec::new();
        let mut plot_series = None;
        for (j, res) in jobs.iter().zip(results) {
            let (status, records) = res?;
            write(&dir.join(format!("{}.{}", j.label, ext(ctx.format))), &trajectory_text(&records, ctx.format, status)?)?;
            let mut v = run_summary(status, &records, Some(p.target));
            v["seed"] = json!(j.seed);
            runs.push(v);
            if plot_series.is_none() {
                plot_series = Some(series(f.name().into(), &records));
            }
        }
        let reached = runs.iter().filter(|v| v["reached"] == json!(true)).count();
        let solve = SolveConfig { eta0: p.eta0, q: p.q, t_max: p.t_max, init: lrl1::Init::Small { scale: p.init_factor } };
        let mut a = assumptions(&p.spec, &solve);
        a["init_scale"] = json!(format!("{} * sqrt(sigma1)", p.init_factor));
        all.push((
            json!({"formulation": f.name(), "reached": reached, "runs": runs, "target": p.target, "assumptions": a}),
            plot_series,
        ));
    }
    let summary: Vec<Value> = all.iter().map(|x| x.0.clone()).collect();
    write(&dir.join("summary.json"), &to_json(&summary)?)?;
    if ctx.plot {
        let s: Vec<svg::Series> = all.into_iter().filter_map(|x| x.1).collect();
        write(&dir.join("fig1.svg"), &svg::line_plot("small initialization, d = 40, r = 2, k = 40", "iteration", "rel_dist", &s))?;
    }
    println!("{}", serde_json::to_string(&summary).map_err(run_err)?);
    Ok(())
}

fn preset_fig2(ctx: &Ctx, symmetric: bool) -> Result<()> {
    let name = if symmetric { "fig2-sym" } else { "fig2-asym" };
    let dir = ctx.out.join(name);
    let mut p = presets::fig2(symmetric);
    p.spec = ctx.cfg.apply_spec(p.spec).map_err(usage)?;
    let probe = solve_overrides(&ctx.cfg, SolveConfig { eta0: p.eta0, q: p.q, t_max: p.t_max, init: lrl1::Init::Small { scale: 1.0 } })?;
    (p.eta0, p.q, p.t_max) = (probe.eta0, probe.q, probe.t_max);
    p.variance = ctx.cfg.variance.unwrap_or(p.variance);
    p.seeds = ctx.cfg.seeds.unwrap_or(p.seeds);
    let jobs: Vec<RunJob> = (0..p.seeds)
        .map(|t| RunJob { label: format!("seed-{t:02}"), seed: job_seed(ctx.seed, symmetric as u64, t as u64) })
        .collect();
    let results = run_many(ctx, &jobs, |j| {
        let mut rng = rng_for(j.seed);
        let inst = p.spec.generate(&mut rng).map_err(usage)?;
        let cfg = p.solve_config(&inst).map_err(usage)?;
        finish(run_subgradient(&inst, &cfg, &mut rng))
    });
    let mut runs = Vec::new();
    let mut plot = Vec::new();
    for (j, res) in jobs.iter().zip(results) {
        let (status, records) = res?;
        write(&dir.join(format!("{}.{}", j.label, ext(ctx.format))), &trajectory_text(&records, ctx.format, status)?)?;
        let mut v = run_summary(status, &records, Some(p.target));
        v["seed"] = json!(j.seed);
        runs.push(v);
        plot.push(series(j.label.clone(), &records));
    }
    let reached = runs.iter().filter(|v| v["reached"] == json!(true)).count();
    let solve = SolveConfig { eta0: p.eta0, q: p.q, t_max: p.t_max, init: lrl1::Init::Small { scale: 1.0 } };
    let mut a = assumptions(&p.spec, &solve);
    a["init_variance"] = json!(p.variance);
    let summary = json!({"preset": name, "reached": reached, "trajectories": p.seeds, "target": p.target, "runs": runs, "assumptions": a});
    write(&dir.join("summary.json"), &to_json(&summary)?)?;
    if ctx.plot {
        write(&dir.join(format!("{name}.svg")), &svg::line_plot(&format!("near-truth initialization ({name})"), "iteration", "rel_dist", &plot))?;
    }
    println!("{}", serde_json::to_string(&json!({"preset": name, "reached": reached, "trajectories": p.seeds})).map_err(run_err)?);
    Ok(())
}

fn preset_table1(ctx: &Ctx) -> Result<()> {
    let mut out = Vec::new();
    for (name, base) in presets::table1() {
        let cfg = ctx.cfg.apply_sweep(base, ctx.seed).map_err(usage)?;
        let dir = ctx.out.join("table1").join(&name);
        let mut summary = write_sweep_outputs(ctx, &cfg, &dir, &format!("{name} phase table"))?;
        // Global-minimum check for every solution kind at the largest sample size.
        let gi = cfg.grid.len() - 1;
        let mut global = Vec::new();
        for (ki, kind) in cfg.kinds.iter().enumerate() {
            let keys: Vec<_> = (0..cfg.seeds).map(|trial| lrl1::classify::JobKey { grid_index: gi, kind_index: ki, trial }).collect();
            let passed: Vec<bool> = {
                use rayon::prelude::*;
                ctx.pool.install(|| {
                    keys.par_iter()
                        .map(|key| {
                            let inst = cfg.instance(key).map_err(run_err)?;
                            let mut rng = rng_for(job_seed(cfg.job_seed(key), 1, 0));
                            let w = kind.build(&inst, &mut rng).map_err(run_err)?;
                            let solve = SolveConfig { t_max: 1000, ..SolveConfig::small(&inst) };
                            Ok(global_min_check(&inst, &w, 50, &solve, &mut rng).map_err(run_err)?.passed)
                        })
                        .collect::<Result<Vec<bool>>>()
                })?
            };
            global.push(json!({"solution_kind": kind.name(), "m": cfg.grid[gi], "passed": passed.iter().filter(|b| **b).count(), "of": passed.len()}));
        }
        summary["global_min"] = json!(global);
        write(&dir.join("summary.json"), &to_json(&summary)?)?;
        out.push(json!({"name": name, "dir": dir.display().to_string(), "failed_jobs": summary["failed_jobs"]}));
    }
    println!("{}", serde_json::to_string(&out).map_err(run_err)?);
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let ctx = build_ctx(cli)?;
    match &cli.cmd {
        Cmd::Gen => cmd_gen(&ctx),
        Cmd::Solve { instance } => cmd_solve(&ctx, instance),
        Cmd::Probe { instance } => cmd_probe(&ctx, instance),
        Cmd::Sweep => cmd_sweep(&ctx),
        Cmd::Rip => cmd_rip(&ctx),
        Cmd::Preset { name } => match name {
            PresetName::Fig1 => preset_fig1(&ctx),
            PresetName::Fig2Sym => preset_fig2(&ctx, true),
            PresetName::Fig2Asym => preset_fig2(&ctx, false),
            PresetName::Table1 => preset_table1(&ctx),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
