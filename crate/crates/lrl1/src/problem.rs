//! Ground truths, measurement ensembles, noise, and true solutions.

use crate::linalg::{self, LinalgError, Mat};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid dimensions: {0}")]
    Dimensions(String),
    #[error("not a true solution (residual {0:e})")]
    NotTrueSolution(f64),
    #[error("rotation rows are not orthonormal")]
    NonOrthonormal,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthKind {
    Generic,
    PsdSymmetric,
    Coherent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub d1: usize,
    pub d2: usize,
    pub r: usize,
    pub ustar: Mat,
    /// Descending, positive.
    pub sigma: Vec<f64>,
    pub vstar: Mat,
    pub xstar: Mat,
    pub kind: TruthKind,
}

impl GroundTruth {
    pub fn sigma1(&self) -> f64 {
        self.sigma[0]
    }

    pub fn sigma_r(&self) -> f64 {
        self.sigma[self.r - 1]
    }

    /// Multiplies the spectrum by `c > 0`.
    pub fn scaled(mut self, c: f64) -> Self {
        for s in &mut self.sigma {
            *s *= c;
        }
        self.xstar *= c;
        self
    }

    fn sqrt_sigma(&self) -> Mat {
        Mat::from_diagonal(&DVector::from_iterator(self.r, self.sigma.iter().map(|s| s.sqrt())))
    }
}

fn orthonormal_columns<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Mat {
    if p == 0 {
        return Mat::zeros(n, 0);
    }
    linalg::random_orthonormal(n, p, rng)
}

pub fn make_ground_truth<R: Rng + ?Sized>(
    d1: usize,
    d2: usize,
    r: usize,
    kind: TruthKind,
    rng: &mut R,
) -> Result<GroundTruth, ProblemError> {
    if r == 0 || r > d1.min(d2) {
        return Err(ProblemError::Dimensions(format!("rank {r} for {d1}x{d2}")));
    }
    if kind == TruthKind::PsdSymmetric && d1 != d2 {
        return Err(ProblemError::Dimensions(format!("psd truth needs d1 = d2, got {d1}x{d2}")));
    }
    let ustar = orthonormal_columns(d1, r, rng);
    let vstar = match kind {
        TruthKind::PsdSymmetric => ustar.clone(),
        TruthKind::Generic => orthonormal_columns(d2, r, rng),
        TruthKind::Coherent => {
            // Last column is e_0; the rest are Haar in its orthogonal complement.
            let mut v = Mat::zeros(d2, r);
            if r > 1 {
                let rest = orthonormal_columns(d2 - 1, r - 1, rng);
                v.view_mut((1, 0), (d2 - 1, r - 1)).copy_from(&rest);
            }
            v[(0, r - 1)] = 1.0;
            v
        }
    };
    let log3 = 3f64.ln();
    let mut sigma: Vec<f64> = (0..r).map(|_| (rng.random::<f64>() * log3).exp()).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    let s = Mat::from_diagonal(&DVector::from_vec(sigma.clone()));
    let xstar = &ustar * s * vstar.transpose();
    Ok(GroundTruth { d1, d2, r, ustar, sigma, vstar, xstar, kind })
}

/// Measurement operator. Sensing matrices are stored one per row, each
/// flattened row-major, so A(X) is a single matrix-vector product.
#[derive(Debug, Clone, PartialEq)]
pub enum Ensemble {
    Sensing { d1: usize, d2: usize, a: Mat },
    Completion { d1: usize, d2: usize, psi: Vec<(usize, usize)>, s: f64 },
}

impl Ensemble {
    pub fn m(&self) -> usize {
        match self {
            Ensemble::Sensing { a, .. } => a.nrows(),
            Ensemble::Completion { psi, .. } => psi.len(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Ensemble::Sensing { d1, d2, .. } | Ensemble::Completion { d1, d2, .. } => (*d1, *d2),
        }
    }

    pub fn is_sensing(&self) -> bool {
        matches!(self, Ensemble::Sensing { .. })
    }

    /// ⟨A_i, X⟩ for every i.
    pub fn apply(&self, x: &Mat) -> Vec<f64> {
        match self {
            Ensemble::Sensing { a, .. } => {
                let v = DVector::from_column_slice(x.transpose().as_slice());
                (a * v).as_slice().to_vec()
            }
            Ensemble::Completion { psi, .. } => psi.iter().map(|&(i, j)| x[(i, j)]).collect(),
        }
    }

    /// Σ c_i A_i.
    pub fn adjoint(&self, c: &[f64]) -> Mat {
        match self {
            Ensemble::Sensing { d1, d2, a } => {
                let v = a.tr_mul(&DVector::from_column_slice(c));
                Mat::from_row_slice(*d1, *d2, v.as_slice())
            }
            Ensemble::Completion { d1, d2, psi, .. } => {
                let mut out = Mat::zeros(*d1, *d2);
                for (&(i, j), &ci) in psi.iter().zip(c) {
                    out[(i, j)] += ci;
                }
                out
            }
        }
    }

    /// The i-th measurement matrix.
    pub fn matrix(&self, i: usize) -> Mat {
        match self {
            Ensemble::Sensing { d1, d2, a } => {
                Mat::from_row_slice(*d1, *d2, a.row(i).transpose().as_slice())
            }
            Ensemble::Completion { d1, d2, psi, .. } => {
                let mut e = Mat::zeros(*d1, *d2);
                e[psi[i]] = 1.0;
                e
            }
        }
    }
}

pub fn sample_sensing<R: Rng + ?Sized>(d1: usize, d2: usize, m: usize, rng: &mut R) -> Ensemble {
    let data: Vec<f64> = (0..m * d1 * d2).map(|_| rng.sample(StandardNormal)).collect();
    Ensemble::Sensing { d1, d2, a: Mat::from_row_slice(m, d1 * d2, &data) }
}

/// Bernoulli(s) mask, listed in row-major order.
pub fn sample_mask<R: Rng + ?Sized>(d1: usize, d2: usize, s: f64, rng: &mut R) -> Ensemble {
    let mut psi = Vec::new();
    for i in 0..d1 {
        for j in 0..d2 {
            if rng.random::<f64>() < s {
                psi.push((i, j));
            }
        }
    }
    Ensemble::Completion { d1, d2, psi, s }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum NoiseDist {
    Gaussian { sigma: f64 },
    SymmetricOutlier { a: f64 },
    PositiveOutlier { a: f64 },
}

impl NoiseDist {
    /// (t0, p0) with P(|ε| ≥ t0) ≥ p0.
    pub fn tail(&self) -> (f64, f64) {
        match *self {
            NoiseDist::Gaussian { sigma } => (sigma / 4.0, 0.5),
            NoiseDist::SymmetricOutlier { a } | NoiseDist::PositiveOutlier { a } => (a, 1.0),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            NoiseDist::Gaussian { sigma } => NoiseDist::Gaussian { sigma: sigma * c },
            NoiseDist::SymmetricOutlier { a } => NoiseDist::SymmetricOutlier { a: a * c },
            NoiseDist::PositiveOutlier { a } => NoiseDist::PositiveOutlier { a: a * c },
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseDist::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseDist::SymmetricOutlier { a } => {
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
            NoiseDist::PositiveOutlier { a } => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub p: f64,
    pub dist: NoiseDist,
    /// Corrupted indices S, ascending.
    pub support: Vec<usize>,
    pub eps: Vec<f64>,
    pub t0: f64,
    pub p0: f64,
    /// {i ∈ S : |ε_i| ≥ t0}, ascending.
    pub st: Vec<usize>,
}

impl NoiseRealization {
    pub fn from_parts(p: f64, dist: NoiseDist, support: Vec<usize>, eps: Vec<f64>) -> Self {
        let (t0, p0) = dist.tail();
        let st = support.iter().copied().filter(|&i| eps[i].abs() >= t0).collect();
        NoiseRealization { p, dist, support, eps, t0, p0, st }
    }

    pub fn noiseless(m: usize) -> Self {
        Self::from_parts(0.0, NoiseDist::SymmetricOutlier { a: 0.0 }, vec![], vec![0.0; m])
    }
}

pub fn sample_noise<R: Rng + ?Sized>(
    m: usize,
    p: f64,
    dist: NoiseDist,
    rng: &mut R,
) -> Result<NoiseRealization, ProblemError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ProblemError::Parameter(format!("corruption probability {p}")));
    }
    let mut eps = vec![0.0; m];
    let mut support = Vec::new();
    for (i, e) in eps.iter_mut().enumerate() {
        if rng.random::<f64>() < p {
            support.push(i);
            *e = dist.draw(rng);
        }
    }
    Ok(NoiseRealization::from_parts(p, dist, support, eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    #[serde(rename = "ms-sym")]
    MsSym,
    #[serde(rename = "ms-asym")]
    MsAsym,
    #[serde(rename = "mc-sym")]
    McSym,
    #[serde(rename = "mc-asym")]
    McAsym,
}

impl Formulation {
    pub const ALL: [Formulation; 4] =
        [Formulation::MsSym, Formulation::MsAsym, Formulation::McSym, Formulation::McAsym];

    pub fn is_symmetric(self) -> bool {
        matches!(self, Formulation::MsSym | Formulation::McSym)
    }

    pub fn is_sensing(self) -> bool {
        matches!(self, Formulation::MsSym | Formulation::MsAsym)
    }

    pub fn name(self) -> &'static str {
        match self {
            Formulation::MsSym => "ms-sym",
            Formulation::MsAsym => "ms-asym",
            Formulation::McSym => "mc-sym",
            Formulation::McAsym => "mc-asym",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Formulation::MsSym => 0,
            Formulation::MsAsym => 1,
            Formulation::McSym => 2,
            Formulation::McAsym => 3,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        Self::ALL.get(t as usize).copied()
    }
}

impl std::str::FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown formulation '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub gt: GroundTruth,
    pub ens: Ensemble,
    pub noise: NoiseRealization,
    pub y: Vec<f64>,
    pub k: usize,
    pub symmetric: bool,
}

impl Instance {
    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn formulation(&self) -> Formulation {
        match (self.ens.is_sensing(), self.symmetric) {
            (true, true) => Formulation::MsSym,
            (true, false) => Formulation::MsAsym,
            (false, true) => Formulation::McSym,
            (false, false) => Formulation::McAsym,
        }
    }
}

pub fn measure(
    gt: GroundTruth,
    ens: Ensemble,
    noise: NoiseRealization,
    k: usize,
    symmetric: bool,
) -> Result<Instance, ProblemError> {
    if ens.dims() != (gt.d1, gt.d2) {
        return Err(ProblemError::Dimensions(format!(
            "ensemble {:?} vs truth {}x{}",
            ens.dims(),
            gt.d1,
            gt.d2
        )));
    }
    if noise.eps.len() != ens.m() {
        return Err(ProblemError::Dimensions(format!(
            "{} noise entries for {} measurements",
            noise.eps.len(),
            ens.m()
        )));
    }
    if k < gt.r {
        return Err(ProblemError::Dimensions(format!("search rank {k} below true rank {}", gt.r)));
    }
    if symmetric && gt.kind != TruthKind::PsdSymmetric {
        return Err(ProblemError::Parameter("symmetric instance needs a psd truth".into()));
    }
    let y = ens.apply(&gt.xstar).iter().zip(&noise.eps).map(|(a, e)| a + e).collect();
    Ok(Instance { gt, ens, noise, y, k, symmetric })
}

/// Everything needed to draw an instance from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub formulation: Formulation,
    pub d1: usize,
    pub d2: usize,
    pub r: usize,
    pub k: usize,
    /// Sensing only.
    pub m: usize,
    /// Completion only.
    pub s: f64,
    pub p: f64,
    pub noise: NoiseDist,
    /// Multiply the noise magnitude by σ₁(X*).
    pub noise_relative: bool,
    pub coherent: bool,
    /// Ground-truth spectrum multiplier.
    pub scale: f64,
}

impl InstanceSpec {
    pub fn sensing(formulation: Formulation, d: usize, r: usize, k: usize, m: usize) -> Self {
        InstanceSpec {
            formulation,
            d1: d,
            d2: d,
            r,
            k,
            m,
            s: 1.0,
            p: 0.0,
            noise: NoiseDist::SymmetricOutlier { a: 10.0 },
            noise_relative: false,
            coherent: false,
            scale: 1.0,
        }
    }

    pub fn completion(formulation: Formulation, d: usize, r: usize, k: usize, s: f64) -> Self {
        InstanceSpec { s, m: 0, ..Self::sensing(formulation, d, r, k, 0) }
    }

    pub fn with_noise(mut self, p: f64, noise: NoiseDist) -> Self {
        self.p = p;
        self.noise = noise;
        self
    }

    pub fn truth_kind(&self) -> TruthKind {
        if self.formulation.is_symmetric() {
            TruthKind::PsdSymmetric
        } else if self.coherent {
            TruthKind::Coherent
        } else {
            TruthKind::Generic
        }
    }

    /// Draws truth, ensemble and noise in that order from `rng`.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Instance, ProblemError> {
        if self.formulation.is_symmetric() && self.d1 != self.d2 {
            return Err(ProblemError::Dimensions("symmetric formulations need d1 = d2".into()));
        }
        if !(self.scale > 0.0) {
            return Err(ProblemError::Parameter(format!("scale {}", self.scale)));
        }
        let gt = make_ground_truth(self.d1, self.d2, self.r, self.truth_kind(), rng)?
            .scaled(self.scale);
        let ens = if self.formulation.is_sensing() {
            sample_sensing(self.d1, self.d2, self.m, rng)
        } else {
            if !(0.0..=1.0).contains(&self.s) {
                return Err(ProblemError::Parameter(format!("sampling probability {}", self.s)));
            }
            sample_mask(self.d1, self.d2, self.s, rng)
        };
        let dist = if self.noise_relative { self.noise.scaled(gt.sigma1()) } else { self.noise };
        let noise = sample_noise(ens.m(), self.p, dist, rng)?;
        measure(gt, ens, noise, self.k, self.formulation.is_symmetric())
    }
}

/// A point of the factorized model; the symmetric variant stores W with W2 = Wᵀ.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorPair {
    Sym(Mat),
    Asym(Mat, Mat),
}

impl FactorPair {
    pub fn product(&self) -> Mat {
        match self {
            FactorPair::Sym(w) => w * w.transpose(),
            FactorPair::Asym(w1, w2) => w1 * w2,
        }
    }

    /// First-order change of the product along `d`: D1·W2 + W1·D2.
    pub fn product_differential(&self, d: &FactorPair) -> Mat {
        match (self, d) {
            (FactorPair::Sym(w), FactorPair::Sym(dw)) => {
                let t = dw * w.transpose();
                &t + t.transpose()
            }
            (FactorPair::Asym(w1, w2), FactorPair::Asym(d1, d2)) => d1 * w2 + w1 * d2,
            _ => panic!("mixed symmetric and asymmetric factor pairs"),
        }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &FactorPair) -> f64 {
        match (self, other) {
            (FactorPair::Sym(a), FactorPair::Sym(b)) => a.dot(b),
            (FactorPair::Asym(a1, a2), FactorPair::Asym(b1, b2)) => a1.dot(b1) + a2.dot(b2),
            _ => panic!("mixed symmetric and asymmetric factor pairs"),
        }
    }

    pub fn scale(&self, c: f64) -> FactorPair {
        match self {
            FactorPair::Sym(w) => FactorPair::Sym(w * c),
            FactorPair::Asym(a, b) => FactorPair::Asym(a * c, b * c),
        }
    }

    /// self + c·other
    pub fn axpy(&self, c: f64, other: &FactorPair) -> FactorPair {
        match (self, other) {
            (FactorPair::Sym(a), FactorPair::Sym(b)) => FactorPair::Sym(a + b * c),
            (FactorPair::Asym(a1, a2), FactorPair::Asym(b1, b2)) => {
                FactorPair::Asym(a1 + b1 * c, a2 + b2 * c)
            }
            _ => panic!("mixed symmetric and asymmetric factor pairs"),
        }
    }

    pub fn zeros_like(&self) -> FactorPair {
        self.scale(0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, FactorPair::Sym(_))
    }

    pub fn is_finite(&self) -> bool {
        match self {
            FactorPair::Sym(w) => linalg::is_finite(w),
            FactorPair::Asym(a, b) => linalg::is_finite(a) && linalg::is_finite(b),
        }
    }

    /// Search rank k.
    pub fn k(&self) -> usize {
        match self {
            FactorPair::Sym(w) => w.ncols(),
            FactorPair::Asym(w1, _) => w1.ncols(),
        }
    }

    /// Same shape, i.i.d. N(0, std²) entries (W1 then W2, row-major).
    pub fn gaussian_like<R: Rng + ?Sized>(&self, std: f64, rng: &mut R) -> FactorPair {
        match self {
            FactorPair::Sym(w) => {
                FactorPair::Sym(linalg::random_gaussian(w.nrows(), w.ncols(), rng) * std)
            }
            FactorPair::Asym(a, b) => FactorPair::Asym(
                linalg::random_gaussian(a.nrows(), a.ncols(), rng) * std,
                linalg::random_gaussian(b.nrows(), b.ncols(), rng) * std,
            ),
        }
    }

    /// Whether the shape matches the instance.
    pub fn fits(&self, inst: &Instance) -> bool {
        let (d1, d2) = inst.ens.dims();
        match self {
            FactorPair::Sym(w) => inst.symmetric && w.shape() == (d1, inst.k),
            FactorPair::Asym(w1, w2) => {
                !inst.symmetric && w1.shape() == (d1, inst.k) && w2.shape() == (inst.k, d2)
            }
        }
    }

    /// Zero point of the right shape for an instance.
    pub fn zeros_for(inst: &Instance) -> FactorPair {
        let (d1, d2) = inst.ens.dims();
        if inst.symmetric {
            FactorPair::Sym(Mat::zeros(d1, inst.k))
        } else {
            FactorPair::Asym(Mat::zeros(d1, inst.k), Mat::zeros(inst.k, d2))
        }
    }
}

fn check_psd(gt: &GroundTruth) -> Result<(), ProblemError> {
    if gt.kind != TruthKind::PsdSymmetric {
        return Err(ProblemError::Parameter("symmetric solution needs a psd truth".into()));
    }
    Ok(())
}

/// W = V*Σ*^{1/2}R for R with orthonormal rows.
pub fn true_solution_symmetric(gt: &GroundTruth, k: usize, rot: &Mat) -> Result<FactorPair, ProblemError> {
    check_psd(gt)?;
    if rot.shape() != (gt.r, k) {
        return Err(ProblemError::Dimensions(format!("rotation {:?}, want {}x{k}", rot.shape(), gt.r)));
    }
    if (rot * rot.transpose() - Mat::identity(gt.r, gt.r)).amax() > 1e-10 {
        return Err(ProblemError::NonOrthonormal);
    }
    Ok(FactorPair::Sym(&gt.vstar * gt.sqrt_sigma() * rot))
}

/// The embedding R = [I_r | 0].
pub fn canonical_rotation(r: usize, k: usize) -> Mat {
    Mat::identity(r, k)
}

/// R = Σ*^{-1/2}V*ᵀW for a symmetric true solution W.
pub fn recover_rotation(w: &FactorPair, gt: &GroundTruth) -> Result<Mat, ProblemError> {
    check_psd(gt)?;
    let FactorPair::Sym(w) = w else {
        return Err(ProblemError::Parameter("rotation needs a symmetric factor".into()));
    };
    let resid = (w * w.transpose() - &gt.xstar).norm();
    if resid > 1e-8 * gt.xstar.norm() {
        return Err(ProblemError::NotTrueSolution(resid));
    }
    let inv = Mat::from_diagonal(&DVector::from_iterator(gt.r, gt.sigma.iter().map(|s| 1.0 / s.sqrt())));
    let rot = inv * gt.vstar.transpose() * w;
    if (&rot * rot.transpose() - Mat::identity(gt.r, gt.r)).amax() > 1e-8 {
        return Err(ProblemError::NonOrthonormal);
    }
    Ok(rot)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Balance {
    /// W1 = [U*Σ*^{1/2} | 0], W2 = [Σ*^{1/2}V*ᵀ ; 0].
    Balanced,
    /// W1 = [U*Σ* | 0], W2 = [V* Z]ᵀ with Z of size d2×(k−r).
    Imbalanced(Mat),
}

pub fn true_solution_asym(gt: &GroundTruth, k: usize, balance: &Balance) -> Result<FactorPair, ProblemError> {
    let (d1, d2, r) = (gt.d1, gt.d2, gt.r);
    if k < r {
        return Err(ProblemError::Dimensions(format!("search rank {k} below true rank {r}")));
    }
    let mut w1 = Mat::zeros(d1, k);
    let mut w2 = Mat::zeros(k, d2);
    match balance {
        Balance::Balanced => {
            let sq = gt.sqrt_sigma();
            w1.view_mut((0, 0), (d1, r)).copy_from(&(&gt.ustar * &sq));
            w2.view_mut((0, 0), (r, d2)).copy_from(&(sq * gt.vstar.transpose()));
        }
        Balance::Imbalanced(z) => {
            if k == r || z.shape() != (d2, k - r) {
                return Err(ProblemError::Dimensions(format!(
                    "Z is {:?}, want {d2}x{} with k > r",
                    z.shape(),
                    k.saturating_sub(r)
                )));
            }
            let s = Mat::from_diagonal(&DVector::from_vec(gt.sigma.clone()));
            w1.view_mut((0, 0), (d1, r)).copy_from(&(&gt.ustar * s));
            w2.view_mut((0, 0), (r, d2)).copy_from(&gt.vstar.transpose());
            w2.view_mut((r, 0), (k - r, d2)).copy_from(&z.transpose());
        }
    }
    Ok(FactorPair::Asym(w1, w2))
}

/// Haar Z with orthonormal columns (full row rank of W2 when k ≤ d2).
pub fn haar_z<R: Rng + ?Sized>(d2: usize, cols: usize, rng: &mut R) -> Mat {
    linalg::random_orthonormal(d2, cols, rng)
}

/// The imbalanced solution with Z = [e_1 … e_{k−r}].
pub fn identity_imbalanced_solution(gt: &GroundTruth, k: usize) -> Result<FactorPair, ProblemError> {
    if k <= gt.r || k - gt.r > gt.d2 {
        return Err(ProblemError::Dimensions(format!("need r < k ≤ r + d2, got k = {k}")));
    }
    true_solution_asym(gt, k, &Balance::Imbalanced(Mat::identity(gt.d2, k - gt.r)))
}

/// rank(W1, τ) + rank(W2, τ); 2·rank(W, τ) for symmetric factors.
pub fn factorized_rank(w: &FactorPair, tau: f64) -> Result<usize, ProblemError> {
    Ok(match w {
        FactorPair::Sym(w) => 2 * linalg::threshold_svd(w, tau)?.1,
        FactorPair::Asym(w1, w2) => linalg::threshold_svd(w1, tau)?.1 + linalg::threshold_svd(w2, tau)?.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn psd_truth_is_psd() {
        let gt = make_ground_truth(4, 4, 2, TruthKind::PsdSymmetric, &mut rng(1)).unwrap();
        assert!((&gt.xstar - gt.xstar.transpose()).amax() < 1e-14);
        let eig = gt.xstar.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e > -1e-12));
    }

    #[test]
    fn coherent_truth_has_basis_column() {
        let gt = make_ground_truth(5, 4, 2, TruthKind::Coherent, &mut rng(2)).unwrap();
        assert_eq!(gt.vstar.column(1).amax(), 1.0);
        assert!((gt.vstar.tr_mul(&gt.vstar) - Mat::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn generic_truth_rank_and_spectrum() {
        let gt = make_ground_truth(40, 40, 2, TruthKind::Generic, &mut rng(3)).unwrap();
        let (_, k) = linalg::threshold_svd(&gt.xstar, 1e-8 * gt.sigma1()).unwrap();
        assert_eq!(k, 2);
        assert!(gt.sigma.iter().all(|&s| (1.0..=3.0).contains(&s)));
        let x = &gt.ustar * Mat::from_diagonal(&DVector::from_vec(gt.sigma.clone())) * gt.vstar.transpose();
        assert!((x - &gt.xstar).amax() < 1e-10 * gt.sigma1());
    }

    #[test]
    fn bad_dimensions_rejected() {
        assert!(make_ground_truth(3, 3, 4, TruthKind::Generic, &mut rng(0)).is_err());
        assert!(make_ground_truth(3, 4, 1, TruthKind::PsdSymmetric, &mut rng(0)).is_err());
    }

    #[test]
    fn mask_extremes() {
        assert_eq!(sample_mask(5, 4, 1.0, &mut rng(0)).m(), 20);
        assert_eq!(sample_mask(5, 4, 0.0, &mut rng(0)).m(), 0);
    }

    #[test]
    fn mask_count_concentrates() {
        let m = sample_mask(40, 40, 0.5, &mut rng(4)).m();
        assert!((680..=920).contains(&m), "{m}");
    }

    #[test]
    fn sensing_reproducible_and_moments() {
        assert_eq!(sample_sensing(2, 2, 1, &mut rng(5)), sample_sensing(2, 2, 1, &mut rng(5)));
        let Ensemble::Sensing { a, .. } = sample_sensing(10, 10, 2000, &mut rng(6)) else { unreachable!() };
        let var = a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64;
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn noiseless_noise() {
        let n = sample_noise(10, 0.0, NoiseDist::SymmetricOutlier { a: 3.0 }, &mut rng(7)).unwrap();
        assert!(n.support.is_empty() && n.st.is_empty());
        assert!(n.eps.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn outlier_noise_counts() {
        let n = sample_noise(1000, 0.3, NoiseDist::SymmetricOutlier { a: 10.0 }, &mut rng(8)).unwrap();
        assert!((255..=345).contains(&n.support.len()));
        assert_eq!(n.st, n.support);
        assert_eq!((n.t0, n.p0), (10.0, 1.0));
    }

    #[test]
    fn gaussian_tail_parameters() {
        let n = sample_noise(10, 0.5, NoiseDist::Gaussian { sigma: 1.0 }, &mut rng(9)).unwrap();
        assert_eq!((n.t0, n.p0), (0.25, 0.5));
        assert!(n.st.iter().all(|i| n.support.contains(i)));
    }

    #[test]
    fn measurements_match_inner_products() {
        let mut g = rng(10);
        let gt = make_ground_truth(3, 4, 1, TruthKind::Generic, &mut g).unwrap();
        let ens = sample_sensing(3, 4, 5, &mut g);
        let noise = sample_noise(5, 0.5, NoiseDist::Gaussian { sigma: 1.0 }, &mut g).unwrap();
        let inst = measure(gt, ens, noise, 1, false).unwrap();
        for i in 0..5 {
            let a = inst.ens.matrix(i);
            let mut dot = 0.0;
            for x in 0..3 {
                for y in 0..4 {
                    dot += a[(x, y)] * inst.gt.xstar[(x, y)];
                }
            }
            assert!((inst.y[i] - dot - inst.noise.eps[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn full_completion_lists_entries() {
        let mut g = rng(11);
        let gt = make_ground_truth(3, 3, 1, TruthKind::Generic, &mut g).unwrap();
        let ens = sample_mask(3, 3, 1.0, &mut g);
        let inst = measure(gt, ens, NoiseRealization::noiseless(9), 1, false).unwrap();
        assert_eq!(inst.y, linalg::to_row_major(&inst.gt.xstar));
    }

    #[test]
    fn adjoint_is_transpose_of_apply() {
        let mut g = rng(12);
        for ens in [sample_sensing(3, 4, 6, &mut g), sample_mask(3, 4, 0.6, &mut g)] {
            let x = linalg::random_gaussian(3, 4, &mut g);
            let c: Vec<f64> = (0..ens.m()).map(|i| (i as f64).sin()).collect();
            let lhs: f64 = ens.apply(&x).iter().zip(&c).map(|(a, b)| a * b).sum();
            let rhs = ens.adjoint(&c).dot(&x);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_solutions_and_rotation_round_trip() {
        let mut g = rng(13);
        let gt = make_ground_truth(6, 6, 2, TruthKind::PsdSymmetric, &mut g).unwrap();
        let w = true_solution_symmetric(&gt, 2, &canonical_rotation(2, 2)).unwrap();
        assert!((w.product() - &gt.xstar).amax() < 1e-10 * gt.sigma1());
        let r0 = linalg::random_orthonormal(2, 5, &mut g);
        let w = true_solution_symmetric(&gt, 5, &r0).unwrap();
        assert!((w.product() - &gt.xstar).amax() < 1e-10 * gt.sigma1());
        let r = recover_rotation(&w, &gt).unwrap();
        assert!((r - &r0).amax() < 1e-10);
        let FactorPair::Sym(mut bad) = w else { unreachable!() };
        bad[(0, 0)] += 0.1;
        assert!(matches!(
            recover_rotation(&FactorPair::Sym(bad), &gt),
            Err(ProblemError::NotTrueSolution(_))
        ));
        let canonical = true_solution_symmetric(&gt, 4, &canonical_rotation(2, 4)).unwrap();
        let FactorPair::Sym(c) = canonical else { unreachable!() };
        assert!(c.columns(2, 2).amax() == 0.0);
    }

    #[test]
    fn asym_solutions_reproduce_truth_and_ranks() {
        let mut g = rng(14);
        let gt = make_ground_truth(8, 7, 2, TruthKind::Generic, &mut g).unwrap();
        let b = true_solution_asym(&gt, 4, &Balance::Balanced).unwrap();
        assert!((b.product() - &gt.xstar).amax() < 1e-10 * gt.sigma1());
        assert_eq!(factorized_rank(&b, 0.0).unwrap(), 4);
        let k = 7;
        let z = haar_z(7, k - 2, &mut g);
        let im = true_solution_asym(&gt, k, &Balance::Imbalanced(z)).unwrap();
        assert!((im.product() - &gt.xstar).amax() < 1e-10 * gt.sigma1());
        assert_eq!(factorized_rank(&im, 0.0).unwrap(), 2 + k);
        let zero = true_solution_asym(&gt, k, &Balance::Imbalanced(Mat::zeros(7, k - 2))).unwrap();
        assert_eq!(factorized_rank(&zero, 0.0).unwrap(), 4);
        assert_eq!(factorized_rank(&im, 1e6).unwrap(), 0);
        let eye = identity_imbalanced_solution(&gt, 3).unwrap();
        assert!((eye.product() - &gt.xstar).amax() < 1e-10 * gt.sigma1());
    }

    #[test]
    fn spec_generate_is_deterministic() {
        let spec = InstanceSpec::sensing(Formulation::MsAsym, 5, 1, 2, 7)
            .with_noise(0.3, NoiseDist::SymmetricOutlier { a: 2.0 });
        let a = spec.generate(&mut rng(15)).unwrap();
        let b = spec.generate(&mut rng(15)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.formulation(), Formulation::MsAsym);
    }

    #[test]
    fn relative_noise_uses_top_singular_value() {
        let mut spec = InstanceSpec::completion(Formulation::McSym, 6, 1, 2, 1.0)
            .with_noise(1.0, NoiseDist::SymmetricOutlier { a: 1.0 });
        spec.noise_relative = true;
        let inst = spec.generate(&mut rng(16)).unwrap();
        assert_eq!(inst.noise.t0, inst.gt.sigma1());
    }
}
