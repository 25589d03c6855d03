//! Landscape classification from probe outputs, lower-bound and global-minimum
//! checks, the ℓ1/ℓ2 RIP ratio, and seeded phase sweeps.

use crate::linalg::{self, Mat};
use crate::loss;
use crate::optimizer::{run_subgradient, OptimError, SolveConfig};
use crate::probes::{self, ProbeError, ProbeResult, RefineConfig};
use crate::problem::{
    haar_z, true_solution_asym, true_solution_symmetric, Balance, Ensemble, FactorPair, Formulation, Instance,
    InstanceSpec, ProblemError, TruthKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const TOL_ABS: f64 = 1e-10;
pub const QUADRATIC_BAND: (f64, f64) = (1.7, 2.3);
pub const LINEAR_BAND: (f64, f64) = (0.7, 1.3);

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("gamma grid must be strictly increasing with at least 4 points spanning a decade")]
    BadGrid,
    #[error("rip ratio needs a sensing ensemble")]
    NotSensing,
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Classification {
    NonCritical,
    StrictSaddleCandidate,
    NoDescentFound,
    /// Descent at some radii but not a clean Θ(γ²) law.
    Inconclusive,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::NonCritical => "NonCritical",
            Classification::StrictSaddleCandidate => "StrictSaddleCandidate",
            Classification::NoDescentFound => "NoDescentFound",
            Classification::Inconclusive => "Inconclusive",
        }
    }
}

impl std::str::FromStr for Classification {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            Classification::NonCritical,
            Classification::StrictSaddleCandidate,
            Classification::NoDescentFound,
            Classification::Inconclusive,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown classification '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Sphere samples per radius.
    pub n_random: usize,
    /// Random unit directions for the first-order test.
    pub n_first_order: usize,
    pub refine: RefineConfig,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { n_random: 32, n_first_order: 64, refine: RefineConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub gammas: Vec<f64>,
    pub best_delta: Vec<f64>,
    pub best_probe: Vec<String>,
    pub first_order_min: f64,
    pub alpha: Option<f64>,
    pub classification: Classification,
    pub loss_star: f64,
    pub probes: Vec<ProbeResult>,
}

/// 8 log-spaced radii in [1e-3, 1e-1]·min(1, √t0).
pub fn default_gammas(t0: f64) -> Vec<f64> {
    let c = if t0 > 0.0 { t0.sqrt().min(1.0) } else { 1.0 };
    log_grid(1e-3 * c, 1e-1 * c, 8)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Least-squares slope of log(−δ) against log γ over points with δ < −1e-12.
pub fn fit_exponent(gammas: &[f64], deltas: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = gammas
        .iter()
        .zip(deltas)
        .filter(|(_, &d)| d < -1e-12)
        .map(|(&g, &d)| (g.ln(), (-d).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// tol_fd = 1e-8·(1 + loss(W*)).
pub fn tol_fd(loss_star: f64) -> f64 {
    1e-8 * (1.0 + loss_star)
}

pub fn classify(best_delta: &[f64], first_order_min: f64, alpha: Option<f64>, loss_star: f64) -> Classification {
    if first_order_min < -tol_fd(loss_star) {
        return Classification::NonCritical;
    }
    let all_negative = best_delta.iter().all(|&d| d < -1e-12);
    if all_negative && alpha.is_some_and(|a| (QUADRATIC_BAND.0..=QUADRATIC_BAND.1).contains(&a)) {
        return Classification::StrictSaddleCandidate;
    }
    if best_delta.iter().all(|&d| d >= -TOL_ABS) {
        return Classification::NoDescentFound;
    }
    Classification::Inconclusive
}

fn validate_grid(gammas: &[f64]) -> Result<(), ClassifyError> {
    let increasing = gammas.windows(2).all(|w| w[0] < w[1]);
    let ok = gammas.len() >= 4 && increasing && gammas[0] > 0.0 && gammas[gammas.len() - 1] >= 10.0 * gammas[0] * (1.0 - 1e-12);
    if ok {
        Ok(())
    } else {
        Err(ClassifyError::BadGrid)
    }
}

/// Spectral bound on both factors, used as Γ by the coherent probe.
fn factor_bound(w: &FactorPair) -> f64 {
    match w {
        FactorPair::Sym(w) => linalg::op_norm(w),
        FactorPair::Asym(a, b) => linalg::op_norm(a).max(linalg::op_norm(b)),
    }
}

/// Runs every probe that applies at a single radius.
pub fn probes_at<R: Rng + ?Sized>(
    inst: &Instance,
    w_star: &FactorPair,
    gamma: f64,
    refined: Option<&probes::RefinedDirection>,
    n_random: usize,
    rng: &mut R,
) -> Result<Vec<ProbeResult>, ClassifyError> {
    let mut out = Vec::new();
    match inst.formulation() {
        Formulation::McSym => out.push(probes::sym_completion_probe(inst, w_star, gamma)?),
        Formulation::MsSym => out.push(probes::sym_sensing_probe(inst, w_star, gamma)?),
        Formulation::McAsym => {
            if inst.k > inst.gt.r && inst.k - inst.gt.r <= inst.gt.d2 {
                let eq10 = crate::problem::identity_imbalanced_solution(&inst.gt, inst.k)?;
                if &eq10 == w_star {
                    out.push(probes::asym_completion_first_order_probe(inst, gamma)?.1);
                }
            }
            if inst.gt.kind == TruthKind::Coherent {
                out.push(probes::asym_completion_coherent_probe(inst, w_star, gamma, factor_bound(w_star))?);
            }
            out.push(probes::asym_completion_second_order_probe(inst, w_star, gamma)?);
        }
        Formulation::MsAsym => {
            out.push(probes::asym_sensing_first_order_probe(inst, w_star, gamma, None)?);
            out.push(probes::asym_sensing_second_order_probe(inst, w_star, gamma, 0.0, rng)?);
        }
    }
    if let Some(dir) = refined {
        out.push(probes::refined_probe(inst, w_star, dir, gamma)?);
    }
    if n_random > 0 {
        out.push(probes::random_sphere_probe(inst, w_star, gamma, n_random, rng)?);
    }
    Ok(out)
}

pub fn refined_direction(
    inst: &Instance,
    w_star: &FactorPair,
    cfg: &RefineConfig,
) -> Result<Option<probes::RefinedDirection>, ClassifyError> {
    if cfg.iters == 0 {
        return Ok(None);
    }
    Ok(if w_star.is_symmetric() {
        probes::refine_sym_direction(inst, w_star, cfg)?
    } else {
        probes::refine_asym_direction(inst, w_star, cfg)?
    })
}

/// Smallest one-sided directional derivative over the given unit directions,
/// the negative subgradient, and `n` random unit directions.
pub fn first_order_min<R: Rng + ?Sized>(
    inst: &Instance,
    w_star: &FactorPair,
    dirs: &[&FactorPair],
    n: usize,
    rng: &mut R,
) -> f64 {
    let r = loss::residuals(inst, w_star);
    let eval = |d: &FactorPair| {
        let nd = d.norm();
        if nd == 0.0 {
            return f64::INFINITY;
        }
        let dl = loss::linear_change(inst, w_star, &d.scale(1.0 / nd));
        loss::one_sided(&r, &dl, &inst.y)
    };
    let mut best = f64::INFINITY;
    for d in dirs {
        best = best.min(eval(d));
    }
    best = best.min(eval(&loss::subgradient_from_residuals(inst, w_star, &r).scale(-1.0)));
    for _ in 0..n {
        best = best.min(eval(&w_star.gaussian_like(1.0, rng)));
    }
    best
}

/// Probes W* over the γ grid, fits the decay exponent, and classifies.
pub fn probe_scaling<R: Rng + ?Sized>(
    inst: &Instance,
    w_star: &FactorPair,
    gammas: &[f64],
    opts: &ProbeOptions,
    rng: &mut R,
) -> Result<PerturbationReport, ClassifyError> {
    validate_grid(gammas)?;
    let loss_star = loss::loss(inst, w_star);
    let refined = refined_direction(inst, w_star, &opts.refine)?;
    let mut all = Vec::new();
    let mut best_delta = Vec::with_capacity(gammas.len());
    let mut best_probe = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let results = probes_at(inst, w_star, g, refined.as_ref(), opts.n_random, rng)?;
        let best = results
            .iter()
            .filter(|p| p.feasible)
            .min_by(|a, b| a.delta_f.total_cmp(&b.delta_f));
        best_delta.push(best.map_or(0.0, |p| p.delta_f));
        best_probe.push(best.map_or_else(|| "none".to_string(), |p| p.name.clone()));
        all.extend(results);
    }
    let dirs: Vec<&FactorPair> = all.iter().filter(|p| p.feasible).filter_map(|p| p.dw.as_ref()).collect();
    let fo = first_order_min(inst, w_star, &dirs, opts.n_first_order, rng);
    let alpha = if best_delta.iter().all(|&d| d < -1e-12) { fit_exponent(gammas, &best_delta) } else { None };
    let classification = classify(&best_delta, fo, alpha, loss_star);
    Ok(PerturbationReport {
        gammas: gammas.to_vec(),
        best_delta,
        best_probe,
        first_order_min: fo,
        alpha,
        classification,
        loss_star,
        probes: all,
    })
}

/// (√(2/π) + √(max(d1,d2)·k/m))·γ², the scale of the local lower bound.
pub fn lower_bound_reference(inst: &Instance, gamma: f64) -> f64 {
    let (d1, d2) = inst.ens.dims();
    let m = inst.m().max(1) as f64;
    ((2.0 / std::f64::consts::PI).sqrt() + ((d1.max(d2) * inst.k) as f64 / m).sqrt()) * gamma * gamma
}

/// Most negative change over `n` sphere samples and every probe at radius γ.
pub fn local_lower_bound_check<R: Rng + ?Sized>(
    inst: &Instance,
    w_star: &FactorPair,
    gamma: f64,
    n: usize,
    opts: &ProbeOptions,
    rng: &mut R,
) -> Result<f64, ClassifyError> {
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let refined = refined_direction(inst, w_star, &opts.refine)?;
    let results = probes_at(inst, w_star, gamma, refined.as_ref(), n, rng)?;
    Ok(results.iter().filter(|p| p.feasible).map(|p| p.delta_f).fold(0.0, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalMinCheck {
    pub passed: bool,
    /// min over candidates of loss(candidate) − loss(W*).
    pub worst_gap: f64,
    pub optimizer_loss: f64,
}

/// Compares loss(W*) with `n` random points (entries N(0, σ₁/k)) and with the
/// endpoint of a sub-gradient run.
pub fn global_min_check<R: Rng + ?Sized>(
    inst: &Instance,
    w_star: &FactorPair,
    n: usize,
    solve: &SolveConfig,
    rng: &mut R,
) -> Result<GlobalMinCheck, ClassifyError> {
    let base = loss::loss(inst, w_star);
    let std = (inst.gt.sigma1() / inst.k as f64).sqrt();
    let mut worst = f64::INFINITY;
    for _ in 0..n {
        let w = w_star.gaussian_like(std, rng);
        worst = worst.min(loss::loss(inst, &w) - base);
    }
    let opt_loss = match run_subgradient(inst, solve, rng) {
        Ok(t) => t.records.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min),
        Err(OptimError::Diverged { trajectory, .. }) => {
            trajectory.records.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min)
        }
        Err(e) => return Err(e.into()),
    };
    worst = worst.min(opt_loss - base);
    Ok(GlobalMinCheck { passed: worst >= -1e-9, worst_gap: worst, optimizer_loss: opt_loss })
}

/// Extremes of (1/m)Σ|⟨A_i, X⟩| over `n` random unit-Frobenius rank-2r′ matrices.
pub fn rip_ratio<R: Rng + ?Sized>(ens: &Ensemble, r_prime: usize, n: usize, rng: &mut R) -> Result<(f64, f64), ClassifyError> {
    if !ens.is_sensing() {
        return Err(ClassifyError::NotSensing);
    }
    let (d1, d2) = ens.dims();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..n {
        let x: Mat = linalg::random_gaussian(d1, 2 * r_prime, rng) * linalg::random_gaussian(2 * r_prime, d2, rng);
        let x = &x / x.norm();
        let ratio = loss::mean_abs(&ens.apply(&x));
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SolutionKind {
    /// V*Σ*^{1/2}R with Haar R.
    Sym,
    Balanced,
    /// Haar Z.
    Imbalanced,
}

impl SolutionKind {
    pub fn name(self) -> &'static str {
        match self {
            SolutionKind::Sym => "sym",
            SolutionKind::Balanced => "balanced",
            SolutionKind::Imbalanced => "imbalanced",
        }
    }

    pub fn build<R: Rng + ?Sized>(self, inst: &Instance, rng: &mut R) -> Result<FactorPair, ProblemError> {
        let (gt, k) = (&inst.gt, inst.k);
        match self {
            SolutionKind::Sym => true_solution_symmetric(gt, k, &linalg::random_orthonormal(gt.r, k, rng)),
            SolutionKind::Balanced => true_solution_asym(gt, k, &Balance::Balanced),
            SolutionKind::Imbalanced => true_solution_asym(gt, k, &Balance::Imbalanced(haar_z(gt.d2, k - gt.r, rng))),
        }
    }
}

impl std::str::FromStr for SolutionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sym" => Ok(SolutionKind::Sym),
            "balanced" => Ok(SolutionKind::Balanced),
            "imbalanced" => Ok(SolutionKind::Imbalanced),
            _ => Err(format!("unknown solution kind '{s}'")),
        }
    }
}

/// SplitMix64 finalizer over (base, a, b).
pub fn job_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base;
    for v in [a, b] {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(v.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: InstanceSpec,
    /// Measurement counts for sensing, sampling probabilities for completion.
    pub grid: Vec<f64>,
    pub kinds: Vec<SolutionKind>,
    pub seeds: usize,
    pub base_seed: u64,
    pub opts: ProbeOptions,
    /// Empty means [`default_gammas`] at the instance's t0.
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JobKey {
    pub grid_index: usize,
    pub kind_index: usize,
    pub trial: usize,
}

impl JobKey {
    pub fn cell(&self, n_kinds: usize) -> usize {
        self.grid_index * n_kinds + self.kind_index
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub key: JobKey,
    pub m: usize,
    pub kind: SolutionKind,
    pub seed: u64,
    pub classification: Classification,
    pub alpha: Option<f64>,
    pub first_order_min: f64,
    pub best_delta_max: f64,
}

const INSTANCE_DOMAIN: u64 = 0x4C52_4C31;

impl SweepConfig {
    pub fn jobs(&self) -> Vec<JobKey> {
        let mut out = Vec::new();
        for grid_index in 0..self.grid.len() {
            for kind_index in 0..self.kinds.len() {
                for trial in 0..self.seeds {
                    out.push(JobKey { grid_index, kind_index, trial });
                }
            }
        }
        out
    }

    pub fn spec_at(&self, grid_index: usize) -> InstanceSpec {
        let mut spec = self.base.clone();
        let v = self.grid[grid_index];
        if spec.formulation.is_sensing() {
            spec.m = v.round() as usize;
        } else {
            spec.s = v;
        }
        spec
    }

    /// Instances depend only on (grid point, trial), so every solution kind
    /// in a column is probed on the same instance.
    pub fn instance(&self, key: &JobKey) -> Result<Instance, ProblemError> {
        let seed = job_seed(self.base_seed ^ INSTANCE_DOMAIN, key.grid_index as u64, key.trial as u64);
        self.spec_at(key.grid_index).generate(&mut rng_for(seed))
    }

    pub fn job_seed(&self, key: &JobKey) -> u64 {
        job_seed(self.base_seed, key.cell(self.kinds.len()) as u64, key.trial as u64)
    }

    pub fn run_job(&self, key: &JobKey) -> Result<(PhaseRow, PerturbationReport), ClassifyError> {
        let inst = self.instance(key)?;
        let seed = self.job_seed(key);
        let mut rng = rng_for(seed);
        let kind = self.kinds[key.kind_index];
        let w = kind.build(&inst, &mut rng)?;
        let gammas = if self.gammas.is_empty() { default_gammas(inst.noise.t0) } else { self.gammas.clone() };
        let rep = probe_scaling(&inst, &w, &gammas, &self.opts, &mut rng)?;
        let row = PhaseRow {
            key: *key,
            m: inst.m(),
            kind,
            seed,
            classification: rep.classification,
            alpha: rep.alpha,
            first_order_min: rep.first_order_min,
            best_delta_max: *rep.best_delta.last().unwrap_or(&0.0),
        };
        Ok((row, rep))
    }
}

/// Runs `keys` on a pool of `jobs` threads; rows come back in key order.
pub fn run_jobs(cfg: &SweepConfig, keys: &[JobKey], jobs: usize) -> Result<Vec<PhaseRow>, ClassifyError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let mut rows: Vec<PhaseRow> = pool.install(|| {
        keys.par_iter().map(|k| cfg.run_job(k).map(|(row, _)| row)).collect::<Result<Vec<_>, _>>()
    })?;
    rows.sort_by_key(|r| r.key);
    Ok(rows)
}

pub fn phase_sweep(cfg: &SweepConfig, jobs: usize) -> Result<Vec<PhaseRow>, ClassifyError> {
    run_jobs(cfg, &cfg.jobs(), jobs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub grid_value: f64,
    pub kind: SolutionKind,
    pub trials: usize,
    pub counts: BTreeMap<String, usize>,
    pub modal: Classification,
    pub modal_frequency: f64,
}

pub fn summarize(cfg: &SweepConfig, rows: &[PhaseRow]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(usize, usize), Vec<&PhaseRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.key.grid_index, r.key.kind_index)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((g, ki), rs)| {
            let mut counts: BTreeMap<Classification, usize> = BTreeMap::new();
            for r in &rs {
                *counts.entry(r.classification).or_default() += 1;
            }
            // Ties go to the earlier classification in declaration order.
            let (modal, n) = counts.iter().fold((Classification::Inconclusive, 0), |acc, (&c, &n)| {
                if n > acc.1 {
                    (c, n)
                } else {
                    acc
                }
            });
            CellSummary {
                grid_value: cfg.grid[g],
                kind: cfg.kinds[ki],
                trials: rs.len(),
                counts: counts.into_iter().map(|(c, n)| (c.name().to_string(), n)).collect(),
                modal,
                modal_frequency: n as f64 / rs.len() as f64,
            }
        })
        .collect()
}
