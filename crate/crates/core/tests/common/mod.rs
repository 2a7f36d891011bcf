#![allow(dead_code)]

use addident::estimator::instrument_from;
use addident::lti::{pack_parameters, unpack_parameters, AdditiveModel, CtSubmodel, CtTransferFunction, DtTransferFunction};
use addident::poly::Polynomial;
use addident::signals::{filter_bank, model_output, SampledSignal};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two lightly damped modes under PID control, `h = 0.05`.
pub fn closed_loop_plant() -> AdditiveModel {
    AdditiveModel::new(
        vec![
            CtSubmodel::from_theta(2, 0, &[0.25, 0.25, 3.0]).unwrap(),
            CtSubmodel::from_theta(2, 0, &[0.01, 0.025, 1.0]).unwrap(),
        ],
        0,
        0,
    )
    .unwrap()
}

pub fn pid() -> DtTransferFunction {
    let (kp, ki, kd) = (0.0115, 0.00725, 0.00454);
    DtTransferFunction::new(
        Polynomial::new(vec![kd, -kp - 2.0 * kd, kp + ki + kd]),
        Polynomial::new(vec![0.0, -1.0, 1.0]),
        0.05,
    )
    .unwrap()
}

/// Eighth-order system of four second-order modes, given by pole pairs and
/// DC gains.
pub fn eight_mode_plant() -> AdditiveModel {
    let poles = [(-0.25, 1.39), (-0.15, 3.16), (-0.17, 5.77), (-0.5, 9.99)];
    let gains = [3.0, 0.4, 0.2, 0.05];
    let subs = poles
        .iter()
        .zip(gains)
        .map(|(&(re, im), g): (&(f64, f64), f64)| {
            let m2 = re * re + im * im;
            CtSubmodel::from_theta(2, 0, &[-2.0 * re / m2, 1.0 / m2, g]).unwrap()
        })
        .collect();
    AdditiveModel::new(subs, 0, 0).unwrap()
}

/// Random stable `b / (1 + a1 p + a2 p^2)` or `b / (1 + a1 p)` with
/// natural frequencies between 0.5 and 6 rad/s.
pub fn random_submodel(g: &mut ChaCha8Rng, order: usize) -> CtSubmodel {
    let gain = g.random_range(0.3..3.0) * if g.random_bool(0.5) { 1.0 } else { -1.0 };
    if order == 1 {
        let tau = g.random_range(0.2..2.0);
        return CtSubmodel::from_theta(1, 0, &[tau, gain]).unwrap();
    }
    let w = g.random_range(0.5..6.0);
    let zeta = g.random_range(0.05..0.9);
    CtSubmodel::from_theta(2, 0, &[2.0 * zeta / w, 1.0 / (w * w), gain]).unwrap()
}

/// Two-submodel model with well separated natural frequencies.
pub fn random_additive(g: &mut ChaCha8Rng) -> AdditiveModel {
    loop {
        let order = g.random_range(1..=2);
        let a = random_submodel(g, order);
        let b = random_submodel(g, 2);
        let m = AdditiveModel::new(vec![a, b], 0, 0).unwrap();
        let ra = m.submodels[0].a().roots().unwrap();
        let rb = m.submodels[1].a().roots().unwrap();
        let sep = ra.iter().flat_map(|x| rb.iter().map(move |y| (x - y).norm())).fold(f64::INFINITY, f64::min);
        if sep > 0.5 {
            return m;
        }
    }
}

pub fn gaussian(g: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n).map(|_| StandardNormal.sample(g)).collect()
}

/// Simulate `num/den` with a ZOH input by classical RK4 on a controllable
/// canonical realization, `substeps` steps per sample.
pub fn rk4_zoh(tf: &CtTransferFunction, u: &[f64], h: f64, substeps: usize) -> Vec<f64> {
    let lead = tf.den.leading();
    let n = tf.den.degree();
    let d: Vec<f64> = (0..n).map(|k| tf.den.coeff(k) / lead).collect();
    let c_n = if tf.num.degree() == n && !tf.num.is_zero() { tf.num.coeff(n) / lead } else { 0.0 };
    let c: Vec<f64> = (0..n).map(|k| tf.num.coeff(k) / lead - c_n * d[k]).collect();
    let f = |x: &[f64], uk: f64| -> Vec<f64> {
        let mut dx = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            dx[i] = x[i + 1];
        }
        if n > 0 {
            dx[n - 1] = uk - (0..n).map(|k| d[k] * x[k]).sum::<f64>();
        }
        dx
    };
    let dt = h / substeps as f64;
    let mut x = vec![0.0; n];
    let mut y = Vec::with_capacity(u.len());
    for &uk in u {
        y.push((0..n).map(|k| c[k] * x[k]).sum::<f64>() + c_n * uk);
        for _ in 0..substeps {
            let k1 = f(&x, uk);
            let x2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * dt * k1[i]).collect();
            let k2 = f(&x2, uk);
            let x3: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * dt * k2[i]).collect();
            let k3 = f(&x3, uk);
            let x4: Vec<f64> = (0..n).map(|i| x[i] + dt * k3[i]).collect();
            let k4 = f(&x4, uk);
            for i in 0..n {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    y
}

fn to_matrix(n: usize, cols: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Plain open-loop SRIVC for `B(p)/A(p)` with `A(0) = 1`, written from
/// scratch: returns the iterate sequence starting at `theta0`.
pub fn srivc_reference(u: &[f64], y: &[f64], h: f64, n: usize, m: usize, theta0: &[f64], tol: f64, max_it: usize) -> Vec<Vec<f64>> {
    let len = u.len();
    let mut theta = theta0.to_vec();
    let mut traj = vec![theta.clone()];
    for _ in 0..max_it {
        let mut ac = vec![1.0];
        ac.extend_from_slice(&theta[..n]);
        let a = Polynomial::new(ac);
        let b = Polynomial::new(theta[n..].to_vec());
        let mut phi = Vec::new();
        let mut zeta = Vec::new();
        for j in 1..=n {
            let mono = Polynomial::monomial(j);
            phi.extend(filter_bank(y, h, &a, &[-&mono]).unwrap());
            zeta.extend(filter_bank(u, h, &(&a * &a), &[-&(&b * &mono)]).unwrap());
        }
        for j in 0..=m {
            let cols = filter_bank(u, h, &a, &[Polynomial::monomial(j)]).unwrap();
            phi.extend(cols.clone());
            zeta.extend(cols);
        }
        let yf = filter_bank(y, h, &a, &[Polynomial::one()]).unwrap().remove(0);
        let phi = to_matrix(len, &phi);
        let zeta = to_matrix(len, &zeta);
        let lhs = zeta.tr_mul(&phi);
        let rhs = zeta.tr_mul(&DVector::from_vec(yf));
        let next: Vec<f64> = lhs.lu().solve(&rhs).unwrap().iter().copied().collect();
        let num: f64 = next.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        theta = next;
        traj.push(theta.clone());
        if num / den < tol {
            break;
        }
    }
    traj
}

/// Central-difference Jacobian of the model output with respect to the
/// packed parameters.
pub fn output_jacobian_fd(model: &AdditiveModel, u: &SampledSignal, rel_step: f64) -> DMatrix<f64> {
    let beta = pack_parameters(model).into_inner();
    let s = model.structure();
    let cols: Vec<Vec<f64>> = (0..beta.len())
        .map(|j| {
            let d = rel_step * beta[j].abs().max(1e-3);
            let mut bp = beta.clone();
            bp[j] += d;
            let mut bm = beta.clone();
            bm[j] -= d;
            let yp = model_output(&unpack_parameters(&bp, &s).unwrap(), u).unwrap();
            let ym = model_output(&unpack_parameters(&bm, &s).unwrap(), u).unwrap();
            yp.values().iter().zip(ym.values()).map(|(a, b)| (a - b) / (2.0 * d)).collect()
        })
        .collect();
    to_matrix(u.len(), &cols)
}

/// Worst per-column RMS relative error between the open-loop instrument
/// and the finite-difference output Jacobian.
pub fn gradient_mismatch(model: &AdditiveModel, u: &SampledSignal) -> f64 {
    let inst = instrument_from(u, model).unwrap();
    let fd = output_jacobian_fd(model, u, 1e-6);
    (0..inst.ncols())
        .map(|j| (inst.column(j) - fd.column(j)).norm() / inst.column(j).norm())
        .fold(0.0, f64::max)
}

/// Random stable proper filter of order 1 to 4.
pub fn random_stable_tf(g: &mut rand_chacha::ChaCha8Rng) -> CtTransferFunction {
    let n = g.random_range(1..=4);
    let mut roots = Vec::new();
    while roots.len() < n {
        let re = -g.random_range(0.2..5.0);
        if n - roots.len() >= 2 && g.random_bool(0.6) {
            let im = g.random_range(0.3..8.0);
            roots.push(Complex64::new(re, im));
            roots.push(Complex64::new(re, -im));
        } else {
            roots.push(Complex64::new(re, 0.0));
        }
    }
    let den = Polynomial::from_roots(&roots, g.random_range(0.5..2.0));
    let m = g.random_range(0..=n);
    let num = Polynomial::new((0..=m).map(|_| g.random_range(-2.0..2.0)).collect());
    CtTransferFunction::new(num, den).unwrap()
}
