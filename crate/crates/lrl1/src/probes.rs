//! Explicit descent-direction constructions around a true solution.
//!
//! Each probe returns the perturbation, the measured change
//! `loss(W* + dW) − loss(W*)`, an optional closed-form prediction, and
//! diagnostics. Failed preconditions give an infeasible result; calling a
//! probe on the wrong formulation is an error.

use crate::linalg::{self, pairwise_sum, LinalgError, Mat};
use crate::loss::{self, sgn, zero_tolerance};
use crate::problem::{recover_rotation, Formulation, FactorPair, Instance, ProblemError, TruthKind};
use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("probe {probe} does not apply to {formulation:?} instances")]
    Inapplicable { probe: &'static str, formulation: Formulation },
    #[error("probe {0} needs a coherent ground truth")]
    NotCoherent(&'static str),
    #[error("factor shape does not match the instance")]
    Shape,
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub name: String,
    pub gamma: f64,
    #[serde(skip)]
    pub dw: Option<FactorPair>,
    pub delta_f: f64,
    pub predicted: Option<f64>,
    pub feasible: bool,
    pub diag: BTreeMap<String, f64>,
}

impl ProbeResult {
    fn infeasible(name: &str, gamma: f64, diag: BTreeMap<String, f64>) -> Self {
        ProbeResult { name: name.into(), gamma, dw: None, delta_f: 0.0, predicted: None, feasible: false, diag }
    }

    fn measured(
        name: &str,
        inst: &Instance,
        w_star: &FactorPair,
        base: f64,
        gamma: f64,
        dw: FactorPair,
        predicted: Option<f64>,
        diag: BTreeMap<String, f64>,
    ) -> Self {
        let delta_f = loss::loss(inst, &w_star.axpy(1.0, &dw)) - base;
        ProbeResult { name: name.into(), gamma, dw: Some(dw), delta_f, predicted, feasible: true, diag }
    }

    /// Norm of the perturbation, 0 when infeasible.
    pub fn dw_norm(&self) -> f64 {
        self.dw.as_ref().map_or(0.0, FactorPair::norm)
    }
}

macro_rules! diag {
    ($($k:expr => $v:expr),* $(,)?) => {{
        #[allow(unused_mut)]
        let mut d = BTreeMap::new();
        $(d.insert(String::from($k), ($v) as f64);)*
        d
    }};
}

fn expect(inst: &Instance, probe: &'static str, f: Formulation) -> Result<(), ProbeError> {
    if inst.formulation() != f {
        return Err(ProbeError::Inapplicable { probe, formulation: inst.formulation() });
    }
    Ok(())
}

fn expect_fits(inst: &Instance, w: &FactorPair) -> Result<(), ProbeError> {
    if !w.fits(inst) {
        return Err(ProbeError::Shape);
    }
    Ok(())
}

fn asym_parts(w: &FactorPair) -> (&Mat, &Mat) {
    match w {
        FactorPair::Asym(a, b) => (a, b),
        FactorPair::Sym(_) => unreachable!("shape checked against an asymmetric instance"),
    }
}

/// Rows spanning the orthogonal complement of R's row space, (k−r)×k.
fn complement_rows(inst: &Instance, w_star: &FactorPair) -> Result<Mat, ProbeError> {
    let rot = recover_rotation(w_star, &inst.gt)?;
    Ok(linalg::kernel_basis(&rot)?.transpose())
}

/// Orthonormal basis of ker(W1) ∩ ker(W2ᵀ) via the stacked [W1; W2ᵀ].
pub fn shared_kernel(w1: &Mat, w2: &Mat) -> Result<Mat, LinalgError> {
    let (d1, k) = w1.shape();
    let d2 = w2.ncols();
    let mut stacked = Mat::zeros(d1 + d2, k);
    stacked.view_mut((0, 0), (d1, k)).copy_from(w1);
    stacked.view_mut((d1, 0), (d2, k)).copy_from(&w2.transpose());
    linalg::kernel_basis(&stacked)
}

/// Σ_{i∈St} sgn(ε_i)·A_i / √|St|.
pub fn noise_aligned_matrix(inst: &Instance) -> Mat {
    let st = &inst.noise.st;
    let mut c = vec![0.0; inst.m()];
    let norm = (st.len().max(1) as f64).sqrt();
    for &i in st {
        c[i] = sgn(inst.noise.eps[i]) / norm;
    }
    inst.ens.adjoint(&c)
}

/// MC-sym: a single entry γ on an observed diagonal position with E[l,l] ≥ t0,
/// pushed through the orthogonal block of the rotation.
pub fn sym_completion_probe(inst: &Instance, w_star: &FactorPair, gamma: f64) -> Result<ProbeResult, ProbeError> {
    const NAME: &str = "sym_completion";
    expect(inst, NAME, Formulation::McSym)?;
    expect_fits(inst, w_star)?;
    let (r, k, m) = (inst.gt.r, inst.k, inst.m());
    let t0 = inst.noise.t0;
    if k <= r || gamma * gamma > t0 {
        return Ok(ProbeResult::infeasible(NAME, gamma, diag! {"k_minus_r" => k - r, "t0" => t0}));
    }
    let Some(i) = (0..m).find(|&i| {
        let (x, y) = psi_at(inst, i);
        x == y && inst.noise.eps[i] >= t0
    }) else {
        return Ok(ProbeResult::infeasible(NAME, gamma, diag! {"t0" => t0}));
    };
    let (l, _) = psi_at(inst, i);
    let rc = complement_rows(inst, w_star)?;
    let mut ubar = Mat::zeros(inst.gt.d1, k - r);
    ubar[(l, 0)] = gamma;
    let dw = FactorPair::Sym(ubar * rc);
    let base = loss::loss(inst, w_star);
    Ok(ProbeResult::measured(
        NAME,
        inst,
        w_star,
        base,
        gamma,
        dw,
        Some(-gamma * gamma / m as f64),
        diag! {"l" => l, "eps" => inst.noise.eps[i], "m" => m},
    ))
}

fn psi_at(inst: &Instance, i: usize) -> (usize, usize) {
    match &inst.ens {
        crate::problem::Ensemble::Completion { psi, .. } => psi[i],
        crate::problem::Ensemble::Sensing { .. } => unreachable!("completion only"),
    }
}

/// Decomposition of the change at W* + U R′: the St part
/// (1/m)Σ_{St} −sgn(ε_i)⟨A_i, UUᵀ⟩ and the rest (1/m)Σ_{∉St} |⟨A_i, UUᵀ⟩|.
pub fn sensing_split(inst: &Instance, uut: &Mat) -> (f64, f64) {
    let v = inst.ens.apply(uut);
    let m = inst.m() as f64;
    let mut in_st = vec![false; inst.m()];
    for &i in &inst.noise.st {
        in_st[i] = true;
    }
    let a: Vec<f64> = (0..v.len()).filter(|&i| in_st[i]).map(|i| -sgn(inst.noise.eps[i]) * v[i]).collect();
    let b: Vec<f64> = (0..v.len()).filter(|&i| !in_st[i]).map(|i| v[i].abs()).collect();
    (pairwise_sum(&a) / m, pairwise_sum(&b) / m)
}

/// MS-sym: U spans the top-r0 eigenvectors of sym(Ã), scaled so ‖U‖_F = γ.
pub fn sym_sensing_probe(inst: &Instance, w_star: &FactorPair, gamma: f64) -> Result<ProbeResult, ProbeError> {
    const NAME: &str = "sym_sensing";
    expect(inst, NAME, Formulation::MsSym)?;
    expect_fits(inst, w_star)?;
    let (d, r, k) = (inst.gt.d1, inst.gt.r, inst.k);
    let st = inst.noise.st.len();
    if k <= r || st == 0 {
        return Ok(ProbeResult::infeasible(NAME, gamma, diag! {"st" => st, "k_minus_r" => k - r}));
    }
    let rc = complement_rows(inst, w_star)?;
    let r0 = (k - r).min(d / 2);
    if r0 == 0 {
        return Ok(ProbeResult::infeasible(NAME, gamma, diag! {"r0" => 0}));
    }
    let (value, q) = linalg::top_p_projection(&linalg::sym(&noise_aligned_matrix(inst)), r0)?;
    let mut u = Mat::zeros(d, k - r);
    u.view_mut((0, 0), (d, r0)).copy_from(&(q * (gamma / (r0 as f64).sqrt())));
    let (a_part, b_part) = sensing_split(inst, &(&u * u.transpose()));
    let dw = FactorPair::Sym(u * rc);
    let base = loss::loss(inst, w_star);
    Ok(ProbeResult::measured(
        NAME,
        inst,
        w_star,
        base,
        gamma,
        dw,
        None,
        diag! {"st" => st, "r0" => r0, "top_p_value" => value, "a_part" => a_part, "b_part" => b_part},
    ))
}

/// MC-asym: builds W1* = [U*Σ* | 0], W2* = [V* | I]ᵀ and moves the zero block
/// of W1 toward the large-noise entries in the first k−r columns.
pub fn asym_completion_first_order_probe(
    inst: &Instance,
    gamma: f64,
) -> Result<(Option<FactorPair>, ProbeResult), ProbeError> {
    const NAME: &str = "asym_completion_first_order";
    expect(inst, NAME, Formulation::McAsym)?;
    let (d1, d2, r, k, m) = (inst.gt.d1, inst.gt.d2, inst.gt.r, inst.k, inst.m());
    let t0 = inst.noise.t0;
    if k <= r || k - r > d2 {
        return Ok((None, ProbeResult::infeasible(NAME, gamma, diag! {"k_minus_r" => k - r})));
    }
    let w_star = crate::problem::identity_imbalanced_solution(&inst.gt, k)?;
    let psibar: Vec<usize> = (0..m)
        .filter(|&i| psi_at(inst, i).1 < k - r && inst.noise.eps[i].abs() >= t0)
        .collect();
    if psibar.is_empty() || gamma > t0 {
        return Ok((Some(w_star), ProbeResult::infeasible(NAME, gamma, diag! {"psibar" => psibar.len(), "t0" => t0})));
    }
    let n = psibar.len() as f64;
    let mut d = Mat::zeros(d1, k);
    for &i in &psibar {
        let (x, y) = psi_at(inst, i);
        d[(x, r + y)] = gamma * sgn(inst.noise.eps[i]) / n.sqrt();
    }
    let dw = FactorPair::Asym(d, Mat::zeros(k, d2));
    let base = loss::loss(inst, &w_star);
    let res = ProbeResult::measured(
        NAME,
        inst,
        &w_star,
        base,
        gamma,
        dw,
        Some(-n.sqrt() * gamma / m as f64),
        diag! {"psibar" => n, "m" => m},
    );
    Ok((Some(w_star), res))
}

/// MC-asym with a coherent truth (last column of V* = e_0): shifts column 0 of
/// the product toward the noise through W1 alone. Works for k = r.
pub fn asym_completion_coherent_probe(
    inst: &Instance,
    w_star: &FactorPair,
    gamma: f64,
    big_gamma: f64,
) -> Result<ProbeResult, ProbeError> {
    const NAME: &str = "asym_completion_coherent";
    expect(inst, NAME, Formulation::McAsym)?;
    expect_fits(inst, w_star)?;
    if inst.gt.kind != TruthKind::Coherent {
        return Err(ProbeError::NotCoherent(NAME));
    }
    let (w1, w2) = asym_parts(w_star);
    let (d1, r, m) = (inst.gt.d1, inst.gt.r, inst.m());
    let t0 = inst.noise.t0;
    let bound = linalg::op_norm(w1).max(linalg::op_norm(w2));
    let psip: Vec<usize> = (0..m)
        .filter(|&i| psi_at(inst, i).1 == 0 && inst.noise.eps[i].abs() >= t0)
        .collect();
    let base_diag = diag! {"psi_prime" => psip.len(), "factor_norm" => bound, "big_gamma" => big_gamma};
    if psip.is_empty() || gamma > t0 || bound > big_gamma * (1.0 + 1e-12) {
        return Ok(ProbeResult::infeasible(NAME, gamma, base_diag));
    }
    let n = psip.len() as f64;
    let sr = inst.gt.sigma_r();
    let mut y = Mat::zeros(d1, r);
    for &i in &psip {
        let (x, _) = psi_at(inst, i);
        y[(x, r - 1)] = sr * gamma * sgn(inst.noise.eps[i]) / (big_gamma * n.sqrt());
    }
    let sinv = Mat::from_diagonal(&DVector::from_iterator(r, inst.gt.sigma.iter().map(|s| 1.0 / s)));
    let d = y * sinv * inst.gt.ustar.transpose() * w1;
    let dw = FactorPair::Asym(d, Mat::zeros(w2.nrows(), w2.ncols()));
    let base = loss::loss(inst, w_star);
    Ok(ProbeResult::measured(
        NAME,
        inst,
        w_star,
        base,
        gamma,
        dw,
        Some(-n.sqrt() * sr * gamma / (big_gamma * m as f64)),
        base_diag,
    ))
}

/// MC-asym: single-entry second-order move inside ker(W1*) ∩ ker(W2*ᵀ).
pub fn asym_completion_second_order_probe(
    inst: &Instance,
    w_star: &FactorPair,
    gamma: f64,
) -> Result<ProbeResult, ProbeError> {
    const NAME: &str = "asym_completion_second_order";
    expect(inst, NAME, Formulation::McAsym)?;
    expect_fits(inst, w_star)?;
    let (w1, w2) = asym_parts(w_star);
    let (d1, d2, m) = (inst.gt.d1, inst.gt.d2, inst.m());
    let t0 = inst.noise.t0;
    let s = shared_kernel(w1, w2)?;
    let kp = s.ncols();
    let Some(i) = (0..m).find(|&i| inst.noise.eps[i].abs() >= t0 && inst.noise.eps[i] != 0.0) else {
        return Ok(ProbeResult::infeasible(NAME, gamma, diag! {"kernel_dim" => kp}));
    };
    if kp == 0 || gamma * gamma > t0 {
        return Ok(ProbeResult::infeasible(NAME, gamma, diag! {"kernel_dim" => kp, "t0" => t0}));
    }
    let (x, y) = psi_at(inst, i);
    let mut y1 = Mat::zeros(d1, kp);
    let mut y2 = Mat::zeros(kp, d2);
    y1[(x, 0)] = gamma;
    y2[(0, y)] = gamma * sgn(inst.noise.eps[i]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let dw = FactorPair::Asym(y1 * s.transpose() * h, &s * y2 * h);
    let base = loss::loss(inst, w_star);
    Ok(ProbeResult::measured(
        NAME,
        inst,
        w_star,
        base,
        gamma,
        dw,
        Some(-gamma * gamma / (2.0 * m as f64)),
        diag! {"kernel_dim" => kp, "x" => x, "y" => y, "m" => m},
    ))
}

/// Rows vec(A_i·Bᵀ) (row-major), the linear map ΔW1 ↦ (⟨A_i, ΔW1·B⟩)_i.
fn right_factor_system(inst: &Instance, b: &Mat) -> Mat {
    let m = inst.m();
    let (d1, kk) = (inst.gt.d1, b.nrows());
    let mut out = Mat::zeros(m, d1 * kk);
    let bt = b.transpose();
    for i in 0..m {
        let prod = inst.ens.matrix(i) * &bt;
        for x in 0..d1 {
            for j in 0..kk {
                out[(i, x * kk + j)] = prod[(x, j)];
            }
        }
    }
    out
}

/// b_i = scale·sgn(ε_i) on St, zero elsewhere.
fn st_rhs(inst: &Instance, scale: f64) -> Vec<f64> {
    let mut b = vec![0.0; inst.m()];
    for &i in &inst.noise.st {
        b[i] = scale * sgn(inst.noise.eps[i]);
    }
    b
}

/// MS-asym: ΔW1 is the least-norm solution of A_{W*}u = b, which shifts each
/// large-noise residual by ζ and leaves the clean ones at their kinks.
pub fn asym_sensing_first_order_probe(
    inst: &Instance,
    w_star: &FactorPair,
    gamma: f64,
    zeta: Option<f64>,
) -> Result<ProbeResult, ProbeError> {
    const NAME: &str = "asym_sensing_first_order";
    expect(inst, NAME, Formulation::MsAsym)?;
    expect_fits(inst, w_star)?;
    let (_, w2) = asym_parts(w_star);
    let (d1, k, m) = (inst.gt.d1, inst.k, inst.m());
    let t0 = inst.noise.t0;
    let st = inst.noise.st.len();
    if st == 0 || m > d1 * k {
        return Ok(ProbeResult::infeasible(NAME, gamma, diag! {"st" => st, "m" => m, "unknowns" => d1 * k}));
    }
    let a = right_factor_system(inst, w2);
    let sigma_min = match linalg::least_norm_solution(&a, &vec![0.0; m]) {
        Ok((_, s)) => s,
        Err(LinalgError::Singular { sigma_min }) => {
            return Ok(ProbeResult::infeasible(NAME, gamma, diag! {"st" => st, "sigma_min" => sigma_min}));
        }
        Err(e) => return Err(e.into()),
    };
    let zeta = zeta.unwrap_or_else(|| t0.min(0.9 * sigma_min * gamma / (st as f64).sqrt()));
    let (u, _) = linalg::least_norm_solution(&a, &st_rhs(inst, zeta))?;
    let unorm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diag = diag! {"st" => st, "sigma_min" => sigma_min, "zeta" => zeta, "u_norm" => unorm};
    if unorm > gamma * (1.0 + 1e-9) || zeta > t0 {
        return Ok(ProbeResult::infeasible(NAME, gamma, diag));
    }
    let dw = FactorPair::Asym(Mat::from_row_slice(d1, k, &u), Mat::zeros(k, w2.ncols()));
    let base = loss::loss(inst, w_star);
    Ok(ProbeResult::measured(NAME, inst, w_star, base, gamma, dw, Some(-zeta * st as f64 / m as f64), diag))
}

/// MS-asym: ΔW = (Y1Sᵀ, SY2)/√2 with S spanning ker(W1*(τ)) ∩ ker(W2*(τ)ᵀ),
/// Y2 = (γ/√k′)V for Haar V, and Y1 solving the linear system that moves each
/// large-noise residual by ζ through the product Y1Y2/2.
pub fn asym_sensing_second_order_probe<R: Rng + ?Sized>(
    inst: &Instance,
    w_star: &FactorPair,
    gamma: f64,
    tau: f64,
    rng: &mut R,
) -> Result<ProbeResult, ProbeError> {
    const NAME: &str = "asym_sensing_second_order";
    expect(inst, NAME, Formulation::MsAsym)?;
    expect_fits(inst, w_star)?;
    let (w1, w2) = asym_parts(w_star);
    let (d1, d2, m) = (inst.gt.d1, inst.gt.d2, inst.m());
    let t0 = inst.noise.t0;
    let st = inst.noise.st.len();
    let (w1t, _) = linalg::threshold_svd(w1, tau)?;
    let (w2t, _) = linalg::threshold_svd(w2, tau)?;
    let frank = crate::problem::factorized_rank(w_star, tau)?;
    let s = shared_kernel(&w1t, &w2t)?;
    let kp = s.ncols();
    if kp == 0 || kp > d2 || st == 0 || m > d1 * kp {
        return Ok(ProbeResult::infeasible(
            NAME,
            gamma,
            diag! {"kernel_dim" => kp, "factorized_rank" => frank, "st" => st, "m" => m},
        ));
    }
    let v = linalg::random_orthonormal(kp, d2, rng);
    let c = gamma / (kp as f64).sqrt();
    let a = right_factor_system(inst, &v) * c;
    let sigma_min = match linalg::least_norm_solution(&a, &vec![0.0; m]) {
        Ok((_, s)) => s,
        Err(LinalgError::Singular { sigma_min }) => {
            return Ok(ProbeResult::infeasible(NAME, gamma, diag! {"kernel_dim" => kp, "sigma_min" => sigma_min}));
        }
        Err(e) => return Err(e.into()),
    };
    let zeta = t0.min(0.9 * sigma_min * gamma / (2.0 * (st as f64).sqrt()));
    let (u, _) = linalg::least_norm_solution(&a, &st_rhs(inst, 2.0 * zeta))?;
    let y1 = Mat::from_row_slice(d1, kp, &u);
    let y1n = y1.norm();
    let max_a = (0..m).map(|i| inst.ens.matrix(i).norm()).fold(0.0, f64::max);
    let diag = diag! {
        "kernel_dim" => kp,
        "factorized_rank" => frank,
        "st" => st,
        "sigma_min" => sigma_min,
        "zeta" => zeta,
        "y1_norm" => y1n,
        "deviation_bound" => 4.0 * tau * gamma * max_a,
    };
    if y1n > gamma * (1.0 + 1e-9) {
        return Ok(ProbeResult::infeasible(NAME, gamma, diag));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let dw = FactorPair::Asym(y1 * s.transpose() * h, &s * (v * c) * h);
    let exact = (w1 * &s).amax() <= 1e-12 * w1.amax().max(1.0) && (s.tr_mul(w2)).amax() <= 1e-12 * w2.amax().max(1.0);
    let predicted = exact.then(|| -zeta * st as f64 / m as f64);
    let base = loss::loss(inst, w_star);
    Ok(ProbeResult::measured(NAME, inst, w_star, base, gamma, dw, predicted, diag))
}

/// Evaluates `dir` rescaled to norm γ.
pub fn probe_direction(
    inst: &Instance,
    w_star: &FactorPair,
    dir: &FactorPair,
    gamma: f64,
    name: &str,
) -> Result<ProbeResult, ProbeError> {
    expect_fits(inst, w_star)?;
    let n = dir.norm();
    if n == 0.0 {
        return Ok(ProbeResult::infeasible(name, gamma, BTreeMap::new()));
    }
    let base = loss::loss(inst, w_star);
    Ok(ProbeResult::measured(name, inst, w_star, base, gamma, dir.scale(gamma / n), None, BTreeMap::new()))
}

/// Best of `n` directions drawn uniformly on the radius-γ sphere.
pub fn random_sphere_probe<R: Rng + ?Sized>(
    inst: &Instance,
    w_star: &FactorPair,
    gamma: f64,
    n: usize,
    rng: &mut R,
) -> Result<ProbeResult, ProbeError> {
    const NAME: &str = "random_sphere";
    expect_fits(inst, w_star)?;
    let base = loss::loss(inst, w_star);
    let mut best: Option<ProbeResult> = None;
    for _ in 0..n {
        let d = w_star.gaussian_like(1.0, rng);
        let d = d.scale(gamma / d.norm());
        let res = ProbeResult::measured(NAME, inst, w_star, base, gamma, d, None, diag! {"samples" => n});
        if best.as_ref().is_none_or(|b| res.delta_f < b.delta_f) {
            best = Some(res);
        }
    }
    Ok(best.unwrap_or_else(|| ProbeResult::infeasible(NAME, gamma, diag! {"samples" => 0})))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub iters: usize,
    /// Initial geodesic step length; decays as 1/√(t+1).
    pub step: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { iters: 3000, step: 0.05 }
    }
}

/// Limit of (f(W* + γΔ) − f(W*))/γ² along a product change γ²·V, with
/// (1/m)·∂/∂v_i as the coefficients.
fn quadratic_model(r_star: &[f64], y: &[f64], v: &[f64]) -> (f64, Vec<f64>) {
    let m = v.len().max(1) as f64;
    let mut terms = Vec::with_capacity(v.len());
    let mut c = Vec::with_capacity(v.len());
    for ((&ri, &yi), &vi) in r_star.iter().zip(y).zip(v) {
        if ri.abs() <= zero_tolerance(yi) {
            terms.push(vi.abs());
            c.push(sgn(vi) / m);
        } else {
            terms.push(-sgn(ri) * vi);
            c.push(-sgn(ri) / m);
        }
    }
    (pairwise_sum(&terms) / m, c)
}

/// A unit second-order direction found by projected sub-gradient descent on
/// the sphere, with its model value φ (the change is γ²φ for small γ).
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedDirection {
    pub dir: FactorPair,
    pub phi: f64,
    pub iters: usize,
}

fn sphere_descent<P, G>(
    inst: &Instance,
    w_star: &FactorPair,
    start: FactorPair,
    cfg: &RefineConfig,
    product: P,
    grad: G,
) -> (FactorPair, f64)
where
    P: Fn(&FactorPair) -> Mat,
    G: Fn(&FactorPair, &Mat) -> FactorPair,
{
    let r_star = loss::residuals(inst, w_star);
    let mut x = start.scale(1.0 / start.norm());
    let mut best = (x.clone(), f64::INFINITY);
    for t in 0..=cfg.iters {
        let v = inst.ens.apply(&product(&x));
        let (phi, c) = quadratic_model(&r_star, &inst.y, &v);
        if phi < best.1 {
            best = (x.clone(), phi);
        }
        if t == cfg.iters {
            break;
        }
        let g = grad(&x, &inst.ens.adjoint(&c));
        let g = g.axpy(-g.dot(&x), &x);
        let gn = g.norm();
        if gn < 1e-15 {
            break;
        }
        x = x.axpy(-cfg.step / ((t + 1) as f64).sqrt() / gn, &g);
        x = x.scale(1.0 / x.norm());
    }
    best
}

/// Symmetric case: U (d×(k−r), ‖U‖_F = 1) minimizing the second-order model of
/// W* + γ·U·R′, started from the top eigenvectors of sym(Ã).
pub fn refine_sym_direction(
    inst: &Instance,
    w_star: &FactorPair,
    cfg: &RefineConfig,
) -> Result<Option<RefinedDirection>, ProbeError> {
    expect_fits(inst, w_star)?;
    let FactorPair::Sym(_) = w_star else { return Err(ProbeError::Shape) };
    let (d, r, k) = (inst.gt.d1, inst.gt.r, inst.k);
    if k <= r || inst.noise.st.is_empty() {
        return Ok(None);
    }
    let rc = complement_rows(inst, w_star)?;
    let r0 = (k - r).min(d);
    let (_, q) = linalg::top_p_projection(&linalg::sym(&noise_aligned_matrix(inst)), r0)?;
    let mut u0 = Mat::zeros(d, k - r);
    u0.view_mut((0, 0), (d, r0)).copy_from(&q);
    let (u, phi) = sphere_descent(inst, w_star, FactorPair::Sym(u0), cfg, FactorPair::product, |x, mm| {
        let FactorPair::Sym(u) = x else { unreachable!() };
        FactorPair::Sym((mm + mm.transpose()) * u)
    });
    let FactorPair::Sym(u) = u else { unreachable!() };
    Ok(Some(RefinedDirection { dir: FactorPair::Sym(u * rc), phi, iters: cfg.iters }))
}

/// Asymmetric case: (Y1, Y2) with ‖Y1‖² + ‖Y2‖² = 1 minimizing the model of
/// W* + γ·(Y1Sᵀ, SY2), started from the top singular pairs of Ã.
pub fn refine_asym_direction(
    inst: &Instance,
    w_star: &FactorPair,
    cfg: &RefineConfig,
) -> Result<Option<RefinedDirection>, ProbeError> {
    expect_fits(inst, w_star)?;
    let FactorPair::Asym(w1, w2) = w_star else { return Err(ProbeError::Shape) };
    let s = shared_kernel(w1, w2)?;
    let kp = s.ncols();
    if kp == 0 || inst.noise.st.is_empty() {
        return Ok(None);
    }
    let dec = linalg::svd(&noise_aligned_matrix(inst))?;
    let p = kp.min(dec.s.len());
    let (d1, d2) = (inst.gt.d1, inst.gt.d2);
    let mut y1 = Mat::zeros(d1, kp);
    let mut y2 = Mat::zeros(kp, d2);
    for j in 0..p {
        let sq = dec.s[j].sqrt();
        y1.set_column(j, &(dec.u.column(j) * sq));
        y2.set_row(j, &(dec.v.column(j).transpose() * sq));
    }
    let (y, phi) = sphere_descent(inst, w_star, FactorPair::Asym(y1, y2), cfg, FactorPair::product, |x, mm| {
        let FactorPair::Asym(a, b) = x else { unreachable!() };
        FactorPair::Asym(mm * b.transpose(), a.tr_mul(mm))
    });
    let FactorPair::Asym(y1, y2) = y else { unreachable!() };
    Ok(Some(RefinedDirection { dir: FactorPair::Asym(y1 * s.transpose(), &s * y2), phi, iters: cfg.iters }))
}

/// Evaluates a refined direction at radius γ.
pub fn refined_probe(
    inst: &Instance,
    w_star: &FactorPair,
    refined: &RefinedDirection,
    gamma: f64,
) -> Result<ProbeResult, ProbeError> {
    let name = if w_star.is_symmetric() { "sym_second_order_refined" } else { "asym_second_order_refined" };
    let mut res = probe_direction(inst, w_star, &refined.dir, gamma, name)?;
    res.diag.insert("phi".into(), refined.phi);
    res.diag.insert("iters".into(), refined.iters as f64);
    Ok(res)
}
