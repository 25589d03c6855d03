//! Independent oracles shared by the oracle tests and the acceptance run.
//! Each check returns Err with a description on the first violation.

#![allow(dead_code)]

use lrl1::linalg::{self, Mat};
use lrl1::loss;
use lrl1::problem::*;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn noisy(f: Formulation, seed: u64) -> Instance {
    let spec = if f.is_sensing() {
        InstanceSpec::sensing(f, 5, 1, 3, 10)
    } else {
        InstanceSpec::completion(f, 5, 1, 3, 0.4)
    };
    spec.with_noise(0.3, NoiseDist::SymmetricOutlier { a: 2.0 }).generate(&mut rng(seed)).unwrap()
}

/// Replaces y by A(W·W2) + ε so that clean residuals at `w` are exactly 0.
fn pin_kinks(inst: &mut Instance, w: &FactorPair) {
    let a = inst.ens.apply(&w.product());
    inst.y = a.iter().zip(&inst.noise.eps).map(|(a, e)| a + e).collect();
}

fn true_point(inst: &Instance, seed: u64) -> FactorPair {
    let mut g = rng(seed);
    if inst.symmetric {
        true_solution_symmetric(&inst.gt, inst.k, &linalg::random_orthonormal(inst.gt.r, inst.k, &mut g)).unwrap()
    } else {
        true_solution_asym(&inst.gt, inst.k, &Balance::Imbalanced(haar_z(inst.gt.d2, inst.k - inst.gt.r, &mut g)))
            .unwrap()
    }
}

/// One-sided difference quotients at steps 1e-3, 1e-4, 1e-5 differ from the
/// directional derivative by at most C·t, with C = (1/m)Σ|⟨A_i, D1D2⟩|,
/// both at generic points and at true solutions with exact kinks.
pub fn directional_derivative_vs_fd() -> Check {
    for f in Formulation::ALL {
        for seed in 0..20 {
            let mut inst = noisy(f, seed);
            let mut g = rng(1000 + seed);
            let generic = FactorPair::zeros_for(&inst).gaussian_like(1.0, &mut g);
            let kinked = true_point(&inst, seed);
            pin_kinks(&mut inst, &kinked);
            for w in [&generic, &kinked] {
                let d = w.gaussian_like(1.0, &mut g);
                let dd = loss::directional_derivative(&inst, w, &d);
                let c = loss::mean_abs(&inst.ens.apply(&d.product()));
                let f0 = loss::loss(&inst, w);
                for t in [1e-3, 1e-4, 1e-5] {
                    let fd = (loss::loss(&inst, &w.axpy(t, &d)) - f0) / t;
                    let err = (fd - dd).abs();
                    ensure(err <= c * t * (1.0 + 1e-6) + 1e-8, || {
                        format!("{f:?} seed {seed} t {t}: |fd - dd| = {err:e} > C t = {:e}", c * t)
                    })?;
                }
            }
        }
    }
    Ok(())
}

fn signs(mask: u32, m: usize) -> Vec<f64> {
    (0..m).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

/// f = max over s ∈ {±1}^m of (1/m)Σ s_i r_i, and (Danskin) the one-sided
/// derivative is the max of (1/m)Σ s_i·(−d_i) over the maximizing signs.
pub fn sign_enumeration() -> Check {
    for f in Formulation::ALL {
        for seed in 0..30 {
            let mut inst = noisy(f, 50 + seed);
            let m = inst.m();
            if m == 0 || m > 12 {
                continue;
            }
            let mut g = rng(2000 + seed);
            let w = if seed % 2 == 0 {
                let w = true_point(&inst, seed);
                pin_kinks(&mut inst, &w);
                w
            } else {
                FactorPair::zeros_for(&inst).gaussian_like(1.0, &mut g)
            };
            let d = w.gaussian_like(1.0, &mut g);
            let r = loss::residuals(&inst, &w);
            let dl = loss::linear_change(&inst, &w, &d);
            let mut fmax = f64::NEG_INFINITY;
            let mut dmax = f64::NEG_INFINITY;
            for mask in 0..(1u32 << m) {
                let s = signs(mask, m);
                let v: f64 = s.iter().zip(&r).map(|(s, r)| s * r).sum::<f64>() / m as f64;
                fmax = fmax.max(v);
                if s.iter().zip(&r).all(|(s, r)| s * r == r.abs()) {
                    let dv: f64 = s.iter().zip(&dl).map(|(s, d)| -s * d).sum::<f64>() / m as f64;
                    dmax = dmax.max(dv);
                }
            }
            let fl = loss::loss(&inst, &w);
            ensure((fl - fmax).abs() <= 1e-8 * (1.0 + fl), || format!("{f:?} seed {seed}: loss {fl} vs {fmax}"))?;
            let dd = loss::directional_derivative(&inst, &w, &d);
            ensure((dd - dmax).abs() <= 1e-8 * (1.0 + dd.abs()), || {
                format!("{f:?} seed {seed}: derivative {dd} vs {dmax}")
            })?;
        }
    }
    Ok(())
}

/// top_p_projection value equals tr(M QQᵀ) and dominates tr(M P) for
/// `samples` random rank-p projections.
pub fn top_p_dominance(samples: usize) -> Check {
    let mut g = rng(3);
    let (n, p) = (8, 3);
    let b = linalg::random_gaussian(n, n, &mut g);
    let m = &b + b.transpose();
    let (value, q) = linalg::top_p_projection(&m, p).map_err(|e| e.to_string())?;
    let attained = (q.transpose() * &m * &q).trace();
    ensure((attained - value).abs() <= 1e-8 * (1.0 + value.abs()), || format!("value {value} vs tr {attained}"))?;
    let eig = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues;
    let mut ev: Vec<f64> = eig.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = ev[..p].iter().sum();
    ensure((top - value).abs() <= 1e-8 * (1.0 + top.abs()), || format!("value {value} vs eigen sum {top}"))?;
    for i in 0..samples {
        let u = linalg::random_orthonormal(n, p, &mut g);
        let t = (u.transpose() * &m * &u).trace();
        ensure(t <= value + 1e-8, || format!("sample {i}: {t} > {value}"))?;
    }
    Ok(())
}

/// Kernel of A via nalgebra's QR of Aᵀ: g − QQᵀg.
fn kernel_vector<R: Rng>(a: &Mat, rng: &mut R) -> DVector<f64> {
    let q = a.transpose().qr().q();
    let g = DVector::from_fn(a.ncols(), |_, _| rng.random::<f64>() - 0.5);
    &g - &q * (q.transpose() * &g)
}

/// The least-norm solution solves Ax = b, is orthogonal to ker A, and no
/// kernel perturbation shortens it.
pub fn least_norm_minimality() -> Check {
    let mut g = rng(4);
    for trial in 0..50 {
        let (m, n) = (3 + trial % 5, 12);
        let a = linalg::random_gaussian(m, n, &mut g);
        let b: Vec<f64> = (0..m).map(|_| g.random::<f64>() * 2.0 - 1.0).collect();
        let (x, _) = linalg::least_norm_solution(&a, &b).map_err(|e| e.to_string())?;
        let x = DVector::from_vec(x);
        let res = (&a * &x - DVector::from_vec(b.clone())).norm();
        ensure(res <= 1e-8, || format!("trial {trial}: residual {res:e}"))?;
        for _ in 0..20 {
            let z = kernel_vector(&a, &mut g);
            ensure(x.dot(&z).abs() <= 1e-8 * z.norm().max(1.0), || format!("trial {trial}: x not orthogonal to kernel"))?;
            for c in [1e-3, 1.0] {
                ensure((&x + &z * c).norm() >= x.norm() - 1e-12, || format!("trial {trial}: shorter solution found"))?;
            }
        }
    }
    Ok(())
}

/// Reconstruction, orthonormality and ordering of the SVD on random shapes.
pub fn svd_random() -> Check {
    let mut g = rng(5);
    for trial in 0..100 {
        let (r, c) = (1 + trial % 7, 1 + (trial * 3) % 9);
        let a = linalg::random_gaussian(r, c, &mut g);
        let s = linalg::svd(&a).map_err(|e| e.to_string())?;
        let err = (s.reconstruct() - &a).amax();
        ensure(err <= 1e-10, || format!("trial {trial}: reconstruction {err:e}"))?;
        let p = s.s.len();
        let iu = (s.u.transpose() * &s.u - Mat::identity(p, p)).amax();
        let iv = (s.v.transpose() * &s.v - Mat::identity(p, p)).amax();
        ensure(iu <= 1e-10 && iv <= 1e-10, || format!("trial {trial}: orthonormality {iu:e} {iv:e}"))?;
        ensure(s.s.windows(2).all(|w| w[0] >= w[1]), || format!("trial {trial}: unsorted"))?;
    }
    Ok(())
}
