use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamGroup, ParamStore};
use crate::scalar::Scalar;

/// Hyperparameters for rectified Adam with one learning rate per group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RAdamConfig {
    pub lr_encoder: f64,
    pub lr_graph: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for RAdamConfig {
    fn default() -> Self {
        RAdamConfig {
            lr_encoder: 1e-5,
            lr_graph: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl RAdamConfig {
    pub fn lr(&self, group: ParamGroup) -> f64 {
        match group {
            ParamGroup::Encoder => self.lr_encoder,
            ParamGroup::Graph => self.lr_graph,
        }
    }

    /// `ρ∞ = 2/(1−β2) − 1`
    pub fn rho_inf(&self) -> f64 {
        2.0 / (1.0 - self.beta2) - 1.0
    }

    /// `ρ_t = ρ∞ − 2tβ2ᵗ/(1−β2ᵗ)`
    pub fn rho(&self, t: u64) -> f64 {
        let b2t = self.beta2.powi(t as i32);
        self.rho_inf() - 2.0 * t as f64 * b2t / (1.0 - b2t)
    }
}

/// What one step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub t: u64,
    pub rho: f64,
    pub rectified: bool,
}

/// Moment estimates and step counter.
#[derive(Debug, Clone)]
pub struct RAdamState<T> {
    pub config: RAdamConfig,
    pub m: Vec<Matrix<T>>,
    pub v: Vec<Matrix<T>>,
    /// Steps taken so far; the next step uses `t + 1`.
    pub t: u64,
}

impl<T: Scalar> RAdamState<T> {
    pub fn new(params: &ParamStore<T>, config: RAdamConfig) -> Self {
        RAdamState {
            config,
            m: params.grad_buffers(),
            v: params.grad_buffers(),
            t: 0,
        }
    }

    /// Applies one update from the gradients stored in `params`. A
    /// non-finite gradient rejects the whole step before anything changes.
    pub fn step(&mut self, params: &mut ParamStore<T>) -> Result<StepInfo> {
        if self.m.len() != params.len() {
            return Err(Error::Validation("optimizer state does not match parameter store".into()));
        }
        for p in params.iter() {
            if let Some(k) = p.grad.data().iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of `{}`[{k}]; step rejected", p.name)));
            }
        }
        self.t += 1;
        let c = self.config;
        let t = self.t;
        let rho = c.rho(t);
        let rectified = rho > 4.0;
        let bc1 = 1.0 - c.beta1.powi(t as i32);
        let bc2 = 1.0 - c.beta2.powi(t as i32);
        let r = if rectified {
            let ri = c.rho_inf();
            ((rho - 4.0) * (rho - 2.0) * ri / ((ri - 4.0) * (ri - 2.0) * rho)).sqrt()
        } else {
            0.0
        };
        let (b1, b2, eps) = (T::of(c.beta1), T::of(c.beta2), T::of(c.eps));
        let one = T::one();
        for (i, p) in params.iter_mut().enumerate() {
            let lr = c.lr(p.group);
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let g = p.grad.data();
            let theta = p.value.data_mut();
            for k in 0..g.len() {
                m[k] = b1 * m[k] + (one - b1) * g[k];
                v[k] = b2 * v[k] + (one - b2) * g[k] * g[k];
                let m_hat = m[k] / T::of(bc1);
                if rectified {
                    let l = T::of(bc2.sqrt()) / (v[k].sqrt() + eps);
                    theta[k] -= T::of(lr * r) * m_hat * l;
                } else {
                    theta[k] -= T::of(lr) * m_hat;
                }
            }
        }
        Ok(StepInfo { t, rho, rectified })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(theta: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("theta", ParamGroup::Graph, Matrix::from_vec(1, 1, vec![theta]).unwrap())
            .unwrap();
        s
    }

    #[test]
    fn first_step_is_not_rectified() {
        let c = RAdamConfig::default();
        assert!((c.rho(1) - 1.0).abs() < 1e-9);
        let mut p = scalar_store(1.0);
        p.iter_mut().next().unwrap().grad.set(0, 0, 1.0);
        let mut st = RAdamState::new(&p, c);
        let info = st.step(&mut p).unwrap();
        assert!(!info.rectified);
        // momentum branch: θ −= lr · m̂ with m̂ = g
        assert!((p.value(crate::numerics::ParamId(0)).get(0, 0) - (1.0 - 1e-3)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut p = scalar_store(0.5);
        let mut st = RAdamState::new(&p, RAdamConfig::default());
        for _ in 0..10 {
            st.step(&mut p).unwrap();
        }
        assert_eq!(p.value(crate::numerics::ParamId(0)).get(0, 0), 0.5);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = scalar_store(0.5);
        p.iter_mut().next().unwrap().grad.set(0, 0, f64::NAN);
        let mut st = RAdamState::new(&p, RAdamConfig::default());
        let err = st.step(&mut p).unwrap_err();
        assert!(err.to_string().contains("theta"));
        assert_eq!(st.t, 0);
        assert_eq!(p.value(crate::numerics::ParamId(0)).get(0, 0), 0.5);
    }

    #[test]
    fn rectified_step_without_momentum_matches_hand_formula() {
        // β1 = 0 so m̂ = g; starting at step 9 puts ρ_10 past the threshold
        let c = RAdamConfig {
            beta1: 0.0,
            beta2: 0.9,
            eps: 0.0,
            ..Default::default()
        };
        let mut p = scalar_store(2.0);
        let mut st = RAdamState::new(&p, c);
        st.t = 9;
        st.v[0].set(0, 0, 0.25);
        p.iter_mut().next().unwrap().grad.set(0, 0, 0.5);
        let info = st.step(&mut p).unwrap();
        assert!(info.rectified);

        let t = 10.0f64;
        let b2t = 0.9f64.powf(t);
        let rho_inf = 2.0 / 0.1 - 1.0;
        let rho = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
        let r = ((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)).sqrt();
        let v: f64 = 0.9 * 0.25 + 0.1 * 0.25;
        let want = 2.0 - 1e-3 * r * 0.5 * (1.0 - b2t).sqrt() / v.sqrt();
        assert!((p.value(crate::numerics::ParamId(0)).get(0, 0) - want).abs() < 1e-12);
    }

    #[test]
    fn group_learning_rates() {
        let mut s = ParamStore::<f64>::new();
        s.add("enc", ParamGroup::Encoder, Matrix::zeros(1, 1)).unwrap();
        s.add("gnn", ParamGroup::Graph, Matrix::zeros(1, 1)).unwrap();
        for p in s.iter_mut() {
            p.grad.set(0, 0, 1.0);
        }
        let mut st = RAdamState::new(&s, RAdamConfig::default());
        st.step(&mut s).unwrap();
        let vals: Vec<f64> = s.iter().map(|p| p.value.get(0, 0)).collect();
        assert!((vals[0] + 1e-5).abs() < 1e-18);
        assert!((vals[1] + 1e-3).abs() < 1e-18);
    }
}
