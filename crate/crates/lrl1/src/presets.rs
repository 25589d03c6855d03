//! Experiment presets: the two convergence figures and the phase table.
//!
//! Values not pinned down by the experiments themselves (noise magnitude,
//! sampling probability, step schedule) are exposed as fields so callers
//! can override them.

use crate::classify::{ProbeOptions, SolutionKind, SweepConfig};
use crate::optimizer::{Init, SolveConfig};
use crate::problem::{
    canonical_rotation, true_solution_asym, true_solution_symmetric, Balance, FactorPair, Formulation, Instance,
    InstanceSpec, NoiseDist, ProblemError,
};
use serde::{Deserialize, Serialize};

/// Small-initialization run from `init_factor·√σ₁(X*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Preset {
    pub spec: InstanceSpec,
    pub eta0: f64,
    pub q: f64,
    pub t_max: usize,
    pub init_factor: f64,
    pub seeds: usize,
    /// Convergence threshold on rel_dist.
    pub target: f64,
}

impl Fig1Preset {
    pub fn solve_config(&self, inst: &Instance) -> SolveConfig {
        SolveConfig {
            eta0: self.eta0,
            q: self.q,
            t_max: self.t_max,
            init: Init::Small { scale: self.init_factor * inst.gt.sigma1().sqrt() },
        }
    }
}

/// d = 40, r = 2, k = 40; 10% symmetric outliers of magnitude σ₁(X*);
/// m = 1200 for sensing, s = 0.8 for completion.
pub fn fig1(f: Formulation) -> Fig1Preset {
    let (d, r, k) = (40, 2, 40);
    let outliers = NoiseDist::SymmetricOutlier { a: 1.0 };
    let base = if f.is_sensing() {
        InstanceSpec::sensing(f, d, r, k, 1200)
    } else {
        InstanceSpec::completion(f, d, r, k, 0.8)
    };
    let mut spec = base.with_noise(0.1, outliers);
    spec.noise_relative = true;
    let eta0 = match f {
        Formulation::MsSym | Formulation::MsAsym => 0.05,
        Formulation::McSym => 2.0,
        Formulation::McAsym => 3.0,
    };
    Fig1Preset { spec, eta0, q: 0.998, t_max: 5000, init_factor: 1e-6, seeds: 10, target: 1e-2 }
}

/// Runs started at W* plus i.i.d. N(0, variance) entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Preset {
    pub spec: InstanceSpec,
    pub eta0: f64,
    pub q: f64,
    pub t_max: usize,
    pub variance: f64,
    pub seeds: usize,
    pub target: f64,
}

impl Fig2Preset {
    /// The start point: canonical rotation (sym) or the balanced pair (asym).
    pub fn true_solution(&self, inst: &Instance) -> Result<FactorPair, ProblemError> {
        if inst.symmetric {
            true_solution_symmetric(&inst.gt, inst.k, &canonical_rotation(inst.gt.r, inst.k))
        } else {
            true_solution_asym(&inst.gt, inst.k, &Balance::Balanced)
        }
    }

    pub fn solve_config(&self, inst: &Instance) -> Result<SolveConfig, ProblemError> {
        Ok(SolveConfig {
            eta0: self.eta0,
            q: self.q,
            t_max: self.t_max,
            init: Init::NearTruth { w: self.true_solution(inst)?, variance: self.variance },
        })
    }
}

/// d = 20, r = 3, k = 20, 10% outliers, init variance 5e-5; m = 90 (sym)
/// or 170 (asym). The truth spectrum is scaled by 100 so the perturbation is
/// small relative to X*.
pub fn fig2(symmetric: bool) -> Fig2Preset {
    let (f, m) = if symmetric { (Formulation::MsSym, 90) } else { (Formulation::MsAsym, 170) };
    let mut spec = InstanceSpec::sensing(f, 20, 3, 20, m).with_noise(0.1, NoiseDist::SymmetricOutlier { a: 1.0 });
    spec.noise_relative = true;
    spec.scale = 100.0;
    Fig2Preset { spec, eta0: 1e-4, q: 0.9995, t_max: 4000, variance: 5e-5, seeds: 20, target: 1e-3 }
}

/// Three sample-size columns around {0.5·dr, 3·dr, 20·dk} for a symmetric and
/// an asymmetric sensing problem.
pub fn table1() -> Vec<(String, SweepConfig)> {
    let outliers = NoiseDist::SymmetricOutlier { a: 10.0 };
    let column = |d: usize, r: usize, k: usize| {
        vec![(d * r / 2) as f64, (3 * d * r) as f64, (20 * d * k) as f64]
    };
    let sym = SweepConfig {
        base: InstanceSpec::sensing(Formulation::MsSym, 20, 1, 5, 0).with_noise(0.1, outliers),
        grid: column(20, 1, 5),
        kinds: vec![SolutionKind::Sym],
        seeds: 10,
        base_seed: 0,
        opts: ProbeOptions::default(),
        gammas: vec![],
    };
    let asym = SweepConfig {
        base: InstanceSpec::sensing(Formulation::MsAsym, 20, 2, 9, 0).with_noise(0.2, outliers),
        grid: column(20, 2, 9),
        kinds: vec![SolutionKind::Balanced, SolutionKind::Imbalanced],
        seeds: 10,
        base_seed: 0,
        opts: ProbeOptions::default(),
        gammas: vec![],
    };
    vec![("ms-sym".into(), sym), ("ms-asym".into(), asym)]
}
