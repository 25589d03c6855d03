//! Sub-gradient method with an exponentially decaying step.

use crate::loss::{mean_abs, residuals_of_product, subgradient_from_residuals};
use crate::problem::{FactorPair, Instance};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// I.i.d. N(0, scale²) entries.
    Small { scale: f64 },
    /// W* plus i.i.d. N(0, variance) entries.
    NearTruth { w: FactorPair, variance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub eta0: f64,
    pub q: f64,
    pub t_max: usize,
    pub init: Init,
}

pub const DEFAULT_ETA0: f64 = 0.1;
pub const DEFAULT_Q: f64 = 0.999;
pub const DEFAULT_T: usize = 5000;

/// Small-init scale used when none is given: 1e-3·√σ₁(X*).
pub fn default_init_scale(inst: &Instance) -> f64 {
    1e-3 * inst.gt.sigma1().sqrt()
}

impl SolveConfig {
    pub fn small(inst: &Instance) -> Self {
        SolveConfig {
            eta0: DEFAULT_ETA0,
            q: DEFAULT_Q,
            t_max: DEFAULT_T,
            init: Init::Small { scale: default_init_scale(inst) },
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |s: String| Err(OptimError::InvalidConfig(s));
        if !(self.eta0 >= 0.0 && self.eta0.is_finite()) {
            return bad(format!("eta0 = {}", self.eta0));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad(format!("q = {} not in (0, 1)", self.q));
        }
        match &self.init {
            Init::Small { scale } if !(*scale > 0.0) => bad(format!("init scale {scale}")),
            Init::NearTruth { variance, .. } if !(*variance >= 0.0) => bad(format!("variance {variance}")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub iter: usize,
    pub loss: f64,
    pub rel_dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub final_w: FactorPair,
}

impl Trajectory {
    pub fn min_rel_dist(&self) -> f64 {
        self.records.iter().map(|r| r.rel_dist).fold(f64::INFINITY, f64::min)
    }

    pub fn last(&self) -> Record {
        *self.records.last().expect("trajectory has the initial record")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("diverged after iteration {}", last.iter)]
    Diverged { last: Record, trajectory: Trajectory },
    #[error("initial point does not match the instance")]
    Shape,
}

pub fn small_init<R: Rng + ?Sized>(inst: &Instance, scale: f64, rng: &mut R) -> FactorPair {
    FactorPair::zeros_for(inst).gaussian_like(scale, rng)
}

pub fn perturbed_truth_init<R: Rng + ?Sized>(w: &FactorPair, variance: f64, rng: &mut R) -> FactorPair {
    w.axpy(1.0, &w.gaussian_like(variance.sqrt(), rng))
}

/// W_{t+1} = W_t − η0·qᵗ·G(W_t), recording iterates 0..=T.
pub fn run_subgradient<R: Rng + ?Sized>(
    inst: &Instance,
    cfg: &SolveConfig,
    rng: &mut R,
) -> Result<Trajectory, OptimError> {
    cfg.validate()?;
    let mut w = match &cfg.init {
        Init::Small { scale } => small_init(inst, *scale, rng),
        Init::NearTruth { w, variance } => {
            if !w.fits(inst) {
                return Err(OptimError::Shape);
            }
            perturbed_truth_init(w, *variance, rng)
        }
    };
    let xnorm = inst.gt.xstar.norm();
    let mut records = Vec::with_capacity(cfg.t_max + 1);
    let mut loss0 = f64::NAN;
    let mut eta = cfg.eta0;
    for t in 0..=cfg.t_max {
        let p = w.product();
        let r = residuals_of_product(inst, &p);
        let loss = mean_abs(&r);
        let rel_dist = (&p - &inst.gt.xstar).norm() / xnorm;
        if t == 0 {
            loss0 = loss;
        }
        if !loss.is_finite() || !rel_dist.is_finite() || loss > 1e6 * loss0.max(f64::MIN_POSITIVE) {
            let last = records.last().copied().unwrap_or(Record { iter: 0, loss: loss0, rel_dist });
            return Err(OptimError::Diverged { last, trajectory: Trajectory { records, final_w: w } });
        }
        records.push(Record { iter: t, loss, rel_dist });
        if t == cfg.t_max {
            break;
        }
        let g = subgradient_from_residuals(inst, &w, &r);
        w = w.axpy(-eta, &g);
        eta *= cfg.q;
    }
    Ok(Trajectory { records, final_w: w })
}

/// Full-precision float text (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(records: &[Record], mut out: W) -> io::Result<()> {
    writeln!(out, "iter,loss,rel_dist")?;
    for r in records {
        writeln!(out, "{},{},{}", r.iter, fmt_f64(r.loss), fmt_f64(r.rel_dist))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn sym_instance() -> Instance {
        InstanceSpec::sensing(Formulation::MsSym, 10, 1, 2, 200).generate(&mut rng(1)).unwrap()
    }

    #[test]
    fn small_init_norm() {
        let inst = InstanceSpec::sensing(Formulation::MsSym, 40, 2, 40, 1).generate(&mut rng(2)).unwrap();
        let n = small_init(&inst, 1e-3, &mut rng(3)).norm();
        assert!(n > 0.04 / 1.3 && n < 0.04 * 1.3, "{n}");
        assert_eq!(small_init(&inst, 1e-3, &mut rng(3)), small_init(&inst, 1e-3, &mut rng(3)));
    }

    #[test]
    fn tiny_init_loss_is_origin_loss() {
        let inst = sym_instance();
        let w = small_init(&inst, 1e-12, &mut rng(4));
        let origin = mean_abs(&inst.y);
        assert!((crate::loss::loss(&inst, &w) - origin).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_is_truth() {
        let inst = sym_instance();
        let w = true_solution_symmetric(&inst.gt, 2, &canonical_rotation(1, 2)).unwrap();
        assert_eq!(perturbed_truth_init(&w, 0.0, &mut rng(5)), w);
    }

    #[test]
    fn converges_on_noiseless_symmetric_sensing() {
        let inst = sym_instance();
        let cfg = SolveConfig { eta0: 0.1, q: 0.999, t_max: 3000, init: Init::Small { scale: 1e-3 } };
        let tr = run_subgradient(&inst, &cfg, &mut rng(6)).unwrap();
        assert_eq!(tr.records.len(), 3001);
        assert!(tr.last().rel_dist <= 1e-2, "{}", tr.last().rel_dist);
    }

    #[test]
    fn zero_iterations_and_zero_step() {
        let inst = sym_instance();
        let cfg = SolveConfig { eta0: 0.1, q: 0.9, t_max: 0, init: Init::Small { scale: 1e-3 } };
        assert_eq!(run_subgradient(&inst, &cfg, &mut rng(7)).unwrap().records.len(), 1);
        let cfg = SolveConfig { eta0: 0.0, t_max: 5, ..cfg };
        let tr = run_subgradient(&inst, &cfg, &mut rng(7)).unwrap();
        assert!(tr.records.windows(2).all(|w| w[0].loss == w[1].loss && w[0].rel_dist == w[1].rel_dist));
    }

    #[test]
    fn huge_step_diverges() {
        let inst = sym_instance();
        let cfg = SolveConfig { eta0: 1e6, q: 0.999, t_max: 50, init: Init::Small { scale: 1.0 } };
        match run_subgradient(&inst, &cfg, &mut rng(8)) {
            Err(OptimError::Diverged { last, .. }) => assert!(last.loss.is_finite()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let inst = sym_instance();
        for cfg in [
            SolveConfig { eta0: 0.1, q: 1.0, t_max: 1, init: Init::Small { scale: 1.0 } },
            SolveConfig { eta0: -1.0, q: 0.5, t_max: 1, init: Init::Small { scale: 1.0 } },
            SolveConfig { eta0: 0.1, q: 0.5, t_max: 1, init: Init::Small { scale: 0.0 } },
        ] {
            assert!(matches!(run_subgradient(&inst, &cfg, &mut rng(0)), Err(OptimError::InvalidConfig(_))));
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&[Record { iter: 0, loss: 1.0, rel_dist: 0.5 }], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "iter,loss,rel_dist\n0,1.0000000000000000e0,5.0000000000000000e-1\n");
    }
}
