//! Flat `key = value` run configuration with command-line overrides.

use lrl1::classify::{ProbeOptions, SolutionKind, SweepConfig};
use lrl1::optimizer::{default_init_scale, Init, SolveConfig, DEFAULT_ETA0, DEFAULT_Q, DEFAULT_T};
use lrl1::problem::{FactorPair, Formulation, Instance, InstanceSpec, NoiseDist};
use rand::Rng;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    SymmetricOutlier,
    PositiveOutlier,
}

impl FromStr for NoiseKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "symmetric-outlier" => Ok(NoiseKind::SymmetricOutlier),
            "positive-outlier" => Ok(NoiseKind::PositiveOutlier),
            _ => Err(format!("unknown noise '{s}' (gaussian|symmetric-outlier|positive-outlier)")),
        }
    }
}

impl NoiseKind {
    fn of(d: &NoiseDist) -> (Self, f64) {
        match *d {
            NoiseDist::Gaussian { sigma } => (NoiseKind::Gaussian, sigma),
            NoiseDist::SymmetricOutlier { a } => (NoiseKind::SymmetricOutlier, a),
            NoiseDist::PositiveOutlier { a } => (NoiseKind::PositiveOutlier, a),
        }
    }

    fn with(self, v: f64) -> NoiseDist {
        match self {
            NoiseKind::Gaussian => NoiseDist::Gaussian { sigma: v },
            NoiseKind::SymmetricOutlier => NoiseDist::SymmetricOutlier { a: v },
            NoiseKind::PositiveOutlier => NoiseDist::PositiveOutlier { a: v },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Small,
    NearTruth,
}

impl FromStr for InitKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "small" => Ok(InitKind::Small),
            "near-truth" => Ok(InitKind::NearTruth),
            _ => Err(format!("unknown init '{s}' (small|near-truth)")),
        }
    }
}

/// Every key is optional; commands fill in their own defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub formulation: Option<Formulation>,
    pub d1: Option<usize>,
    pub d2: Option<usize>,
    pub r: Option<usize>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub noise: Option<NoiseKind>,
    pub noise_param: Option<f64>,
    pub noise_relative: Option<bool>,
    pub coherent: Option<bool>,
    pub scale: Option<f64>,
    pub instance: Option<PathBuf>,
    pub eta0: Option<f64>,
    pub q: Option<f64>,
    pub t_max: Option<usize>,
    pub init: Option<InitKind>,
    pub init_scale: Option<f64>,
    pub variance: Option<f64>,
    pub solution: Option<SolutionKind>,
    pub gammas: Option<Vec<f64>>,
    pub n_random: Option<usize>,
    pub n_first_order: Option<usize>,
    pub refine_iters: Option<usize>,
    pub refine_step: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub kinds: Option<Vec<SolutionKind>>,
    pub seeds: Option<usize>,
    pub r_prime: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

pub const KEYS: &[&str] = &[
    "formulation", "d", "d1", "d2", "r", "k", "m", "s", "p", "noise", "noise_param", "noise_relative", "coherent",
    "scale", "instance", "eta0", "q", "t_max", "init", "init_scale", "variance", "solution", "gammas", "n_random",
    "n_first_order", "refine_iters", "refine_step", "grid", "kinds", "seeds", "r_prime", "samples", "seed",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{key}: cannot parse '{v}': {e}"))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|x| parse(key, x.trim())).collect()
}

fn bool_value(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got '{v}'")),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let v = v.trim();
        match key {
            "formulation" => self.formulation = Some(parse(key, v)?),
            "d" => {
                let d = parse(key, v)?;
                self.d1 = Some(d);
                self.d2 = Some(d);
            }
            "d1" => self.d1 = Some(parse(key, v)?),
            "d2" => self.d2 = Some(parse(key, v)?),
            "r" => self.r = Some(parse(key, v)?),
            "k" => self.k = Some(parse(key, v)?),
            "m" => self.m = Some(parse(key, v)?),
            "s" => self.s = Some(parse(key, v)?),
            "p" => self.p = Some(parse(key, v)?),
            "noise" => self.noise = Some(parse(key, v)?),
            "noise_param" => self.noise_param = Some(parse(key, v)?),
            "noise_relative" => self.noise_relative = Some(bool_value(key, v)?),
            "coherent" => self.coherent = Some(bool_value(key, v)?),
            "scale" => self.scale = Some(parse(key, v)?),
            "instance" => self.instance = Some(PathBuf::from(v)),
            "eta0" => self.eta0 = Some(parse(key, v)?),
            "q" => self.q = Some(parse(key, v)?),
            "t_max" => self.t_max = Some(parse(key, v)?),
            "init" => self.init = Some(parse(key, v)?),
            "init_scale" => self.init_scale = Some(parse(key, v)?),
            "variance" => self.variance = Some(parse(key, v)?),
            "solution" => self.solution = Some(parse(key, v)?),
            "gammas" => self.gammas = Some(parse_list(key, v)?),
            "n_random" => self.n_random = Some(parse(key, v)?),
            "n_first_order" => self.n_first_order = Some(parse(key, v)?),
            "refine_iters" => self.refine_iters = Some(parse(key, v)?),
            "refine_step" => self.refine_step = Some(parse(key, v)?),
            "grid" => self.grid = Some(parse_list(key, v)?),
            "kinds" => self.kinds = Some(parse_list(key, v)?),
            "seeds" => self.seeds = Some(parse(key, v)?),
            "r_prime" => self.r_prime = Some(parse(key, v)?),
            "samples" => self.samples = Some(parse(key, v)?),
            "seed" => self.seed = Some(parse(key, v)?),
            _ => return Err(format!("unknown config key '{key}' (known: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// `key=value` as given to `--set`.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), String> {
        let (k, v) = pair.split_once('=').ok_or_else(|| format!("expected key=value, got '{pair}'"))?;
        self.set(k.trim(), v)
    }

    /// Lines of `key = value`; `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            cfg.set_pair(line).map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(cfg)
    }

    /// Applies instance keys on top of `base` and validates the result.
    pub fn apply_spec(&self, base: InstanceSpec) -> Result<InstanceSpec, String> {
        let mut spec = base;
        if let Some(f) = self.formulation {
            spec.formulation = f;
        }
        macro_rules! take {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { spec.$f = v; })*};
        }
        take!(d1, d2, r, k, m, s, p, noise_relative, coherent, scale);
        let (kind, param) = NoiseKind::of(&spec.noise);
        spec.noise = self.noise.unwrap_or(kind).with(self.noise_param.unwrap_or(param));
        validate_spec(&spec)?;
        Ok(spec)
    }

    pub fn instance_spec(&self) -> Result<InstanceSpec, String> {
        let base = InstanceSpec::sensing(Formulation::MsSym, 20, 2, 5, 200)
            .with_noise(0.1, NoiseDist::SymmetricOutlier { a: 10.0 });
        let base = InstanceSpec { s: 0.5, ..base };
        self.apply_spec(base)
    }

    pub fn solution_kind(&self, inst: &Instance) -> Result<SolutionKind, String> {
        let kind = self.solution.unwrap_or(if inst.symmetric { SolutionKind::Sym } else { SolutionKind::Balanced });
        if (kind == SolutionKind::Sym) != inst.symmetric {
            return Err(format!("solution '{}' does not match {}", kind.name(), inst.formulation().name()));
        }
        Ok(kind)
    }

    pub fn solve_config<R: Rng + ?Sized>(&self, inst: &Instance, rng: &mut R) -> Result<SolveConfig, String> {
        let init = match self.init.unwrap_or(InitKind::Small) {
            InitKind::Small => Init::Small { scale: self.init_scale.unwrap_or_else(|| default_init_scale(inst)) },
            InitKind::NearTruth => {
                let w: FactorPair = self.solution_kind(inst)?.build(inst, rng).map_err(|e| e.to_string())?;
                Init::NearTruth { w, variance: self.variance.unwrap_or(5e-5) }
            }
        };
        let cfg = SolveConfig {
            eta0: self.eta0.unwrap_or(DEFAULT_ETA0),
            q: self.q.unwrap_or(DEFAULT_Q),
            t_max: self.t_max.unwrap_or(DEFAULT_T),
            init,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn probe_options(&self, base: ProbeOptions) -> Result<ProbeOptions, String> {
        let mut o = base;
        o.n_random = self.n_random.unwrap_or(o.n_random);
        o.n_first_order = self.n_first_order.unwrap_or(o.n_first_order);
        o.refine.iters = self.refine_iters.unwrap_or(o.refine.iters);
        o.refine.step = self.refine_step.unwrap_or(o.refine.step);
        if !(o.refine.step >= 0.0 && o.refine.step.is_finite()) {
            return Err(format!("refine_step {}", o.refine.step));
        }
        Ok(o)
    }

    pub fn validated_gammas(&self) -> Result<Option<Vec<f64>>, String> {
        match &self.gammas {
            None => Ok(None),
            Some(g) => {
                let ok = g.len() >= 4 && g[0] > 0.0 && g.windows(2).all(|w| w[0] < w[1]) && g[g.len() - 1] >= 10.0 * g[0];
                if ok {
                    Ok(Some(g.clone()))
                } else {
                    Err("gammas must be increasing, positive, at least 4 points spanning a decade".into())
                }
            }
        }
    }

    /// Overrides a sweep (grid, kinds, seeds, instance and probe keys).
    pub fn apply_sweep(&self, base: SweepConfig, base_seed: u64) -> Result<SweepConfig, String> {
        let mut cfg = base;
        cfg.base = self.apply_spec(cfg.base)?;
        cfg.grid = self.grid.clone().unwrap_or(cfg.grid);
        cfg.kinds = self.kinds.clone().unwrap_or(cfg.kinds);
        cfg.seeds = self.seeds.unwrap_or(cfg.seeds);
        cfg.base_seed = base_seed;
        cfg.opts = self.probe_options(cfg.opts)?;
        if let Some(g) = self.validated_gammas()? {
            cfg.gammas = g;
        }
        if cfg.grid.is_empty() || cfg.kinds.is_empty() || cfg.seeds == 0 {
            return Err("sweep needs a non-empty grid, kinds and seeds".into());
        }
        let sensing = cfg.base.formulation.is_sensing();
        for &v in &cfg.grid {
            let ok = if sensing { v >= 1.0 && v.fract() == 0.0 } else { v > 0.0 && v <= 1.0 };
            if !ok {
                return Err(format!("grid value {v} invalid for {}", cfg.base.formulation.name()));
            }
        }
        for k in &cfg.kinds {
            if (*k == SolutionKind::Sym) != cfg.base.formulation.is_symmetric() {
                return Err(format!("solution kind '{}' does not match {}", k.name(), cfg.base.formulation.name()));
            }
        }
        Ok(cfg)
    }

    pub fn sweep_config(&self, base_seed: u64) -> Result<SweepConfig, String> {
        let base = self.instance_spec()?;
        let kinds = if base.formulation.is_symmetric() {
            vec![SolutionKind::Sym]
        } else {
            vec![SolutionKind::Balanced, SolutionKind::Imbalanced]
        };
        let grid = if base.formulation.is_sensing() { vec![base.m as f64] } else { vec![base.s] };
        let cfg = SweepConfig { base, grid, kinds, seeds: 10, base_seed, opts: ProbeOptions::default(), gammas: vec![] };
        self.apply_sweep(cfg, base_seed)
    }
}

fn validate_spec(s: &InstanceSpec) -> Result<(), String> {
    let err = |m: String| Err(m);
    if s.d1 == 0 || s.d2 == 0 {
        return err("dimensions must be positive".into());
    }
    if s.r == 0 || s.r > s.d1.min(s.d2) {
        return err(format!("rank r = {} must be in 1..={}", s.r, s.d1.min(s.d2)));
    }
    if s.k < s.r {
        return err(format!("search rank k = {} below r = {}", s.k, s.r));
    }
    if s.formulation.is_symmetric() && s.d1 != s.d2 {
        return err("symmetric formulations need d1 = d2".into());
    }
    if !(0.0..=1.0).contains(&s.p) {
        return err(format!("p = {} not in [0, 1]", s.p));
    }
    if !s.formulation.is_sensing() && !(s.s > 0.0 && s.s <= 1.0) {
        return err(format!("s = {} not in (0, 1]", s.s));
    }
    let (_, param) = NoiseKind::of(&s.noise);
    if !(param >= 0.0 && param.is_finite()) {
        return err(format!("noise_param = {param}"));
    }
    if !(s.scale > 0.0 && s.scale.is_finite()) {
        return err(format!("scale = {}", s.scale));
    }
    Ok(())
}
