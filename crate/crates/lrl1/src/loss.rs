//! The ℓ1 objective, its subgradient, and exact one-sided directional derivatives.

use crate::linalg::{pairwise_sum, Mat};
use crate::problem::{FactorPair, Instance};

/// sgn with sgn(0) = 0.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Residuals are treated as kinks when |r_i| is at or below this.
pub fn zero_tolerance(y: f64) -> f64 {
    1e-11 * (1.0 + y.abs())
}

pub fn residuals(inst: &Instance, w: &FactorPair) -> Vec<f64> {
    residuals_of_product(inst, &w.product())
}

pub fn residuals_of_product(inst: &Instance, p: &Mat) -> Vec<f64> {
    inst.ens.apply(p).iter().zip(&inst.y).map(|(a, y)| y - a).collect()
}

pub fn mean_abs(r: &[f64]) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    let abs: Vec<f64> = r.iter().map(|x| x.abs()).collect();
    pairwise_sum(&abs) / r.len() as f64
}

/// (1/m) Σ |y_i − ⟨A_i, W1W2⟩|.
pub fn loss(inst: &Instance, w: &FactorPair) -> f64 {
    mean_abs(&residuals(inst, w))
}

/// Chain rule through the ℓ1 composite given the residuals.
pub fn subgradient_from_residuals(inst: &Instance, w: &FactorPair, r: &[f64]) -> FactorPair {
    let m = r.len().max(1) as f64;
    let c: Vec<f64> = r.iter().map(|&ri| -sgn(ri) / m).collect();
    let g = inst.ens.adjoint(&c);
    match w {
        FactorPair::Sym(w) => FactorPair::Sym((&g + g.transpose()) * w),
        FactorPair::Asym(w1, w2) => FactorPair::Asym(&g * w2.transpose(), w1.tr_mul(&g)),
    }
}

/// G1 = −(1/m)Σ sgn(r_i) A_i W2ᵀ, G2 = −(1/m)Σ sgn(r_i) W1ᵀ A_i;
/// symmetric: G = −(2/m)Σ sgn(r_i) sym(A_i) W.
pub fn subgradient(inst: &Instance, w: &FactorPair) -> FactorPair {
    subgradient_from_residuals(inst, w, &residuals(inst, w))
}

/// d_i = ⟨A_i, D1W2 + W1D2⟩.
pub fn linear_change(inst: &Instance, w: &FactorPair, d: &FactorPair) -> Vec<f64> {
    inst.ens.apply(&w.product_differential(d))
}

/// lim_{t→0+} (f(W + tD) − f(W))/t.
pub fn directional_derivative(inst: &Instance, w: &FactorPair, d: &FactorPair) -> f64 {
    let r = residuals(inst, w);
    let dl = linear_change(inst, w, d);
    one_sided(&r, &dl, &inst.y)
}

/// (1/m) Σ [r_i ≠ 0 ? −sgn(r_i)·d_i : |d_i|].
pub fn one_sided(r: &[f64], d: &[f64], y: &[f64]) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    let terms: Vec<f64> = r
        .iter()
        .zip(d)
        .zip(y)
        .map(|((&ri, &di), &yi)| if ri.abs() <= zero_tolerance(yi) { di.abs() } else { -sgn(ri) * di })
        .collect();
    pairwise_sum(&terms) / r.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_gaussian;
    use crate::problem::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn noisy_sensing(seed: u64, f: Formulation, m: usize) -> Instance {
        InstanceSpec::sensing(f, 5, 1, 3, m)
            .with_noise(0.3, NoiseDist::SymmetricOutlier { a: 2.0 })
            .generate(&mut rng(seed))
            .unwrap()
    }

    #[test]
    fn loss_at_truth_is_noise_level() {
        let inst = noisy_sensing(1, Formulation::MsAsym, 40);
        let w = true_solution_asym(&inst.gt, 3, &Balance::Balanced).unwrap();
        let want: f64 = inst.noise.eps.iter().map(|e| e.abs()).sum::<f64>() / 40.0;
        assert!((loss(&inst, &w) - want).abs() < 1e-12);
        let clean = InstanceSpec::sensing(Formulation::MsSym, 5, 1, 3, 20).generate(&mut rng(2)).unwrap();
        let w = true_solution_symmetric(&clean.gt, 3, &canonical_rotation(1, 3)).unwrap();
        assert!(loss(&clean, &w) < 1e-14);
    }

    #[test]
    fn hand_loss() {
        let gt = make_ground_truth(2, 2, 1, TruthKind::Generic, &mut rng(3)).unwrap();
        let ens = Ensemble::Completion { d1: 2, d2: 2, psi: vec![(0, 0), (0, 1), (1, 1)], s: 0.75 };
        let mut inst = measure(gt, ens, NoiseRealization::noiseless(3), 1, false).unwrap();
        inst.y = vec![1.0, -2.0, 0.0];
        let w = FactorPair::Asym(Mat::zeros(2, 1), Mat::zeros(1, 2));
        assert_eq!(loss(&inst, &w), 1.0);
    }

    #[test]
    fn zero_residuals_give_zero_subgradient() {
        let gt = make_ground_truth(3, 3, 1, TruthKind::PsdSymmetric, &mut rng(4)).unwrap();
        let ens = sample_mask(3, 3, 1.0, &mut rng(5));
        let mut inst = measure(gt, ens, NoiseRealization::noiseless(9), 2, true).unwrap();
        let w = FactorPair::Sym(Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        inst.y = linalg_rm(&w.product());
        assert_eq!(subgradient(&inst, &w).norm(), 0.0);
    }

    fn linalg_rm(m: &Mat) -> Vec<f64> {
        crate::linalg::to_row_major(m)
    }

    #[test]
    fn single_measurement_gradient_matches_fd() {
        for f in [Formulation::MsSym, Formulation::MsAsym] {
            let inst = noisy_sensing(6, f, 1);
            let mut g = rng(7);
            let w = FactorPair::zeros_for(&inst).gaussian_like(1.0, &mut g);
            let grad = subgradient(&inst, &w);
            let d = w.gaussian_like(1.0, &mut g);
            let h = 1e-6;
            let fd = (loss(&inst, &w.axpy(h, &d)) - loss(&inst, &w.axpy(-h, &d))) / (2.0 * h);
            assert!((fd - grad.dot(&d)).abs() < 1e-5, "{f:?}");
        }
    }

    #[test]
    fn negating_data_flips_subgradient() {
        let inst = noisy_sensing(8, Formulation::MsAsym, 12);
        let w = FactorPair::zeros_for(&inst).gaussian_like(0.5, &mut rng(9));
        let g = subgradient(&inst, &w);
        let mut neg = inst.clone();
        neg.y.iter_mut().for_each(|y| *y = -*y);
        neg.gt.xstar *= -1.0;
        let FactorPair::Asym(w1, w2) = &w else { unreachable!() };
        let wn = FactorPair::Asym(-w1, w2.clone());
        let gn = subgradient(&neg, &wn);
        let (FactorPair::Asym(g1, _), FactorPair::Asym(gn1, _)) = (&g, &gn) else { unreachable!() };
        // r(−y, −W1 W2) = −r(y, W1 W2), and G1 does not depend on W1.
        assert!((g1 + gn1).amax() < 1e-14);
    }

    #[test]
    fn directional_derivative_sign_arithmetic() {
        assert_eq!(one_sided(&[0.5], &[-1.0], &[0.5]), 1.0);
        assert_eq!(one_sided(&[0.5], &[1.0], &[0.5]), -1.0);
        assert_eq!(one_sided(&[0.0], &[2.0], &[0.0]), 2.0);
        assert_eq!(one_sided(&[0.0], &[-2.0], &[0.0]), 2.0);
    }

    #[test]
    fn directional_derivative_homogeneous_and_smooth() {
        let inst = noisy_sensing(10, Formulation::MsAsym, 15);
        let mut g = rng(11);
        let w = FactorPair::zeros_for(&inst).gaussian_like(1.0, &mut g);
        let d = w.gaussian_like(1.0, &mut g);
        let f1 = directional_derivative(&inst, &w, &d);
        let f3 = directional_derivative(&inst, &w, &d.scale(3.0));
        assert!((f3 - 3.0 * f1).abs() < 1e-12 * (1.0 + f1.abs()));
        let grad = subgradient(&inst, &w).dot(&d);
        assert!((grad - f1).abs() < 1e-12 * (1.0 + f1.abs()));
    }

    #[test]
    fn completion_symmetric_product_used() {
        let spec = InstanceSpec::completion(Formulation::McSym, 4, 1, 2, 1.0);
        let inst = spec.generate(&mut rng(12)).unwrap();
        let w = FactorPair::Sym(random_gaussian(4, 2, &mut rng(13)));
        let p = w.product();
        let r = residuals(&inst, &w);
        assert!((r[1] - (inst.y[1] - p[(0, 1)])).abs() < 1e-15);
    }
}
