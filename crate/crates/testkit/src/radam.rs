//! Scalar RAdam written straight from the published update rule.

use drgn::numerics::{Matrix, ParamGroup, ParamStore};
use drgn::training::{RAdamConfig, RAdamState};

pub struct Reference {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: f64,
    v: f64,
    t: i32,
}

impl Reference {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Reference {
            lr,
            beta1,
            beta2,
            eps,
            m: 0.0,
            v: 0.0,
            t: 0,
        }
    }

    /// Returns the update applied and whether the variance rectification ran.
    pub fn step(&mut self, theta: f64, g: f64) -> (f64, bool) {
        self.t += 1;
        let t = self.t;
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g;
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g;
        let m_hat = self.m / (1.0 - self.beta1.powi(t));
        let rho_inf = 2.0 / (1.0 - self.beta2) - 1.0;
        let b2t = self.beta2.powi(t);
        let rho_t = rho_inf - 2.0 * t as f64 * b2t / (1.0 - b2t);
        if rho_t > 4.0 {
            let l = (1.0 - b2t).sqrt() / (self.v.sqrt() + self.eps);
            let r = (((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)).sqrt();
            (theta - self.lr * r * m_hat * l, true)
        } else {
            (theta - self.lr * m_hat, false)
        }
    }
}

pub fn scalar_store(theta: f64, group: ParamGroup) -> ParamStore<f64> {
    let mut s = ParamStore::new();
    s.add("theta", group, Matrix::from_f64(1, 1, &[theta]).unwrap()).unwrap();
    s
}

/// Both optimizers run on f(θ) = ½θ² (gradient θ) from θ = 1.
pub struct QuadraticRun {
    /// The crate's θ after each step.
    pub theta: Vec<f64>,
    /// Largest |θ_crate − θ_reference| over the run.
    pub max_deviation: f64,
    /// (crate rectified, reference rectified) per step.
    pub branches: Vec<(bool, bool)>,
}

pub fn quadratic(steps: usize, cfg: RAdamConfig, group: ParamGroup) -> QuadraticRun {
    let mut store = scalar_store(1.0, group);
    let mut opt = RAdamState::new(&store, cfg);
    let mut reference = Reference::new(cfg.lr(group), cfg.beta1, cfg.beta2, cfg.eps);
    let mut theta_ref = 1.0;
    let mut run = QuadraticRun {
        theta: Vec::with_capacity(steps),
        max_deviation: 0.0,
        branches: Vec::with_capacity(steps),
    };
    for _ in 0..steps {
        let theta = store.iter().next().unwrap().value.get(0, 0);
        store.iter_mut().next().unwrap().grad.set(0, 0, theta);
        let info = opt.step(&mut store).unwrap();
        let (next_ref, rect_ref) = reference.step(theta_ref, theta_ref);
        theta_ref = next_ref;
        let theta = store.iter().next().unwrap().value.get(0, 0);
        run.max_deviation = run.max_deviation.max((theta - theta_ref).abs());
        run.theta.push(theta);
        run.branches.push((info.rectified, rect_ref));
    }
    run
}
