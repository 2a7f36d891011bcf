//! Open- and closed-loop data generation with ZOH actuation.

use nalgebra::{DMatrix, DVector};

use super::dataset::Dataset;
use super::filter::filter_bank;
use super::generate::{generate_signal, mix_seed, NoiseModel, SignalSpec};
use super::signal::{delay_values, SampledSignal};
use crate::error::{Error, Result};
use crate::lti::{AdditiveModel, DiscreteStateSpace, DtTransferFunction, StateSpace};

/// Everything needed to synthesize one dataset.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: AdditiveModel,
    /// Present for closed-loop experiments.
    pub controller: Option<DtTransferFunction>,
    /// Plant input in open loop, reference in closed loop.
    pub excitation: SignalSpec,
    pub noise: NoiseModel,
    pub n: usize,
    pub h: f64,
    pub seed: u64,
}

/// Simulated dataset together with the noise-free output and the noise
/// realization.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: Dataset,
    pub x: SampledSignal,
    pub v: SampledSignal,
}

impl Simulation {
    /// `10 log10(var(x) / var(v))`.
    pub fn snr_db(&self) -> f64 {
        super::signal::snr_db(&self.x, &self.v)
    }
}

const EXCITATION_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

fn draw(cfg: &ExperimentConfig) -> Result<(SampledSignal, SampledSignal)> {
    let ex = generate_signal(&cfg.excitation, cfg.n, cfg.h, mix_seed(cfg.seed, &[EXCITATION_STREAM]))?;
    let v = cfg.noise.generate(cfg.n, cfg.h, mix_seed(cfg.seed, &[NOISE_STREAM]))?;
    Ok((ex, v))
}

/// Noise-free output `sum_i G_i(p) u(t_k - d h)`, one submodel at a time.
pub fn model_output(model: &AdditiveModel, u: &SampledSignal) -> Result<SampledSignal> {
    let ud = delay_values(u.values(), model.input_delay);
    let mut x = vec![0.0; u.len()];
    for i in 0..model.n_submodels() {
        let tf = model.submodel_tf(i);
        tf.ensure_proper()?;
        let out = filter_bank(&ud, u.h(), &tf.den, std::slice::from_ref(&tf.num))?;
        for (acc, v) in x.iter_mut().zip(&out[0]) {
            *acc += v;
        }
    }
    Ok(u.with_values(x))
}

pub fn simulate_open_loop(cfg: &ExperimentConfig) -> Result<Simulation> {
    if let Some(i) = cfg.model.submodels.iter().position(|s| !s.is_stable()) {
        return Err(Error::UnstableModel { submodel: i + 1 });
    }
    let (u, v) = draw(cfg)?;
    let x = model_output(&cfg.model, &u)?;
    let y = x.add(&v)?;
    Ok(Simulation {
        data: Dataset { u, y, r: None },
        x,
        v,
    })
}

pub fn simulate_closed_loop(cfg: &ExperimentConfig) -> Result<Simulation> {
    let controller = cfg
        .controller
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("closed-loop experiment requires a controller".into()))?;
    let (r, v) = draw(cfg)?;
    let lp = FeedbackLoop::new(&cfg.model, controller, cfg.h)?;
    lp.check_stable()?;
    let (u, y) = lp.run(r.values(), v.values());
    let x: Vec<f64> = y.iter().zip(v.values()).map(|(a, b)| a - b).collect();
    Ok(Simulation {
        data: Dataset {
            u: r.with_values(u),
            y: r.with_values(y),
            r: Some(r.clone()),
        },
        x: r.with_values(x),
        v,
    })
}

/// Plant input `u = S_uo(q) r` of the noise-free loop formed by `model` and
/// `controller`.
pub fn closed_loop_input(model: &AdditiveModel, controller: &DtTransferFunction, r: &SampledSignal) -> Result<SampledSignal> {
    let lp = FeedbackLoop::new(model, controller, r.h())?;
    lp.check_stable()?;
    let zeros = vec![0.0; r.len()];
    Ok(r.with_values(lp.run(r.values(), &zeros).0))
}

/// Eigenvalue moduli of the discrete closed loop, largest first.
pub fn closed_loop_pole_moduli(model: &AdditiveModel, controller: &DtTransferFunction) -> Result<Vec<f64>> {
    let a = FeedbackLoop::new(model, controller, controller.h)?.closed_loop_matrix();
    let mut m: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    m.sort_by(|a, b| b.total_cmp(a));
    Ok(m)
}

/// ZOH equivalent of the additive plant as one block-diagonal realization,
/// with the input delay prepended as a shift register.
pub fn discrete_plant(model: &AdditiveModel, h: f64) -> Result<DiscreteStateSpace> {
    let parts = (0..model.n_submodels())
        .map(|i| StateSpace::from_tf(&model.submodel_tf(i))?.discretize(h))
        .collect::<Result<Vec<_>>>()?;
    let ng: usize = parts.iter().map(|p| p.order()).sum();
    let d = model.input_delay;
    let n = ng + d;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut c = DMatrix::zeros(1, n);
    let mut dd = 0.0;
    let mut off = 0;
    for p in &parts {
        let k = p.order();
        a.view_mut((off, off), (k, k)).copy_from(&p.ad);
        for j in 0..k {
            b[off + j] = p.bd[j];
            c[(0, off + j)] = p.c[(0, j)];
        }
        dd += p.d[0];
        off += k;
    }
    if d == 0 {
        return Ok(DiscreteStateSpace::new(a, b, c, DVector::from_element(1, dd), h));
    }
    // Register states s_1..s_d at indices ng..ng+d; the plant sees s_d.
    let last = ng + d - 1;
    for j in 0..ng {
        a[(j, last)] = b[j];
        b[j] = 0.0;
    }
    c[(0, last)] = dd;
    b[ng] = 1.0;
    for j in 1..d {
        a[(ng + j, ng + j - 1)] = 1.0;
    }
    Ok(DiscreteStateSpace::new(a, b, c, DVector::zeros(1), h))
}

/// Discrete loop `u = C_d (r - y)`, `y = G_d u + v`.
pub(crate) struct FeedbackLoop {
    plant: DiscreteStateSpace,
    ctrl: DiscreteStateSpace,
    /// `1 + D_c D_g`.
    den: f64,
}

impl FeedbackLoop {
    pub(crate) fn new(model: &AdditiveModel, controller: &DtTransferFunction, h: f64) -> Result<Self> {
        if (controller.h - h).abs() > 1e-12 * h {
            return Err(Error::InvalidInput(format!(
                "controller sampling period {} differs from data period {h}",
                controller.h
            )));
        }
        let plant = discrete_plant(model, h)?;
        let ctrl = DiscreteStateSpace::from_tf(controller)?;
        let den = 1.0 + ctrl.d[0] * plant.d[0];
        if den.abs() < 1e-12 {
            return Err(Error::InvalidInput("feedback loop is not well posed (1 + D_c D_g = 0)".into()));
        }
        Ok(Self { plant, ctrl, den })
    }

    pub(crate) fn closed_loop_matrix(&self) -> DMatrix<f64> {
        let (ng, nc) = (self.plant.order(), self.ctrl.order());
        let (dg, dc) = (self.plant.d[0], self.ctrl.d[0]);
        let n = ng + nc;
        // u = ku x, e = ke x for r = v = 0.
        let mut ku = DVector::zeros(n);
        for j in 0..ng {
            ku[j] = -dc * self.plant.c[(0, j)] / self.den;
        }
        for j in 0..nc {
            ku[ng + j] = self.ctrl.c[(0, j)] / self.den;
        }
        let mut ke = -&ku * dg;
        for j in 0..ng {
            ke[j] -= self.plant.c[(0, j)];
        }
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (ng, ng)).copy_from(&self.plant.ad);
        a.view_mut((ng, ng), (nc, nc)).copy_from(&self.ctrl.ad);
        for i in 0..ng {
            for j in 0..n {
                a[(i, j)] += self.plant.bd[i] * ku[j];
            }
        }
        for i in 0..nc {
            for j in 0..n {
                a[(ng + i, j)] += self.ctrl.bd[i] * ke[j];
            }
        }
        a
    }

    /// Error listing the eigenvalue moduli when any is `>= 1`.
    pub(crate) fn check_stable(&self) -> Result<()> {
        let a = self.closed_loop_matrix();
        if a.nrows() == 0 {
            return Ok(());
        }
        let moduli: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.norm()).collect();
        if moduli.iter().all(|m| *m < 1.0) {
            Ok(())
        } else {
            Err(Error::UnstableClosedLoop { moduli })
        }
    }

    /// Returns `(u, y)`.
    pub(crate) fn run(&self, r: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = &self.plant;
        let c = &self.ctrl;
        let (ng, nc) = (g.order(), c.order());
        let (dg, dc) = (g.d[0], c.d[0]);
        let mut xg = DVector::zeros(ng);
        let mut xc = DVector::zeros(nc);
        let mut u = Vec::with_capacity(r.len());
        let mut y = Vec::with_capacity(r.len());
        for (&rk, &vk) in r.iter().zip(v) {
            let yg = (g.c.row(0) * &xg)[0];
            let uc = (c.c.row(0) * &xc)[0];
            let uk = (uc + dc * (rk - yg - vk)) / self.den;
            let yk = yg + dg * uk + vk;
            let ek = rk - yk;
            xg = &g.ad * &xg + &g.bd * uk;
            xc = &c.ad * &xc + &c.bd * ek;
            u.push(uk);
            y.push(yk);
        }
        (u, y)
    }
}
