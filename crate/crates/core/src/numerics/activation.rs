use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    #[default]
    Gelu,
    Tanh,
    Identity,
}

impl ActivationKind {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            ActivationKind::Relu => x.max(T::zero()),
            ActivationKind::Gelu => {
                let half = T::of(0.5);
                half * x * (T::one() + (x * T::of(std::f64::consts::FRAC_1_SQRT_2)).erf())
            }
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Identity => x,
        }
    }

    /// Derivative evaluated at the pre-activation `x`. ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            ActivationKind::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            ActivationKind::Gelu => {
                let half = T::of(0.5);
                let cdf = half * (T::one() + (x * T::of(std::f64::consts::FRAC_1_SQRT_2)).erf());
                let pdf = (-half * x * x).exp() * T::of(1.0 / (2.0 * std::f64::consts::PI).sqrt());
                cdf + x * pdf
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            ActivationKind::Identity => T::one(),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Identity => "identity",
        })
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(ActivationKind::Relu),
            "gelu" => Ok(ActivationKind::Gelu),
            "tanh" => Ok(ActivationKind::Tanh),
            "identity" => Ok(ActivationKind::Identity),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// Elementwise activation.
pub fn activation<T: Scalar>(x: &Matrix<T>, kind: ActivationKind) -> Result<Matrix<T>> {
    let data = x.data().iter().map(|&v| kind.apply(v)).collect();
    let out = Matrix::from_vec(x.rows(), x.cols(), data).map_err(|_| Error::NonFinite(format!("{kind}")))?;
    Ok(out)
}

/// Vector-Jacobian product of [`activation`]: `upstream ⊙ σ'(pre)`.
pub fn activation_backward<T: Scalar>(pre: &Matrix<T>, upstream: &Matrix<T>, kind: ActivationKind) -> Result<Matrix<T>> {
    if pre.shape() != upstream.shape() {
        return Err(Error::Dimension {
            op: "activation_backward",
            left: pre.shape(),
            right: upstream.shape(),
        });
    }
    let data = pre
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&p, &g)| g * kind.derivative(p))
        .collect();
    Matrix::from_vec(pre.rows(), pre.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_and_identity() {
        let x = Matrix::<f64>::from_f64(1, 3, &[-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(activation(&x, ActivationKind::Relu).unwrap().data(), &[0.0, 0.0, 2.0]);
        assert_eq!(activation(&x, ActivationKind::Identity).unwrap(), x);
    }

    #[test]
    fn gelu_matches_high_precision_values() {
        // 40-digit erf evaluations
        let cases = [
            (1.0f64, 0.841_344_746_068_542_9),
            (-0.5, -0.154_268_769_362_993_45),
            (2.0, 1.954_499_736_103_641_6),
            (0.1, 0.053_982_783_727_702_9),
        ];
        for (x, want) in cases {
            let got = ActivationKind::Gelu.apply(x);
            assert!((got - want).abs() < 1e-14, "gelu({x}) = {got}");
        }
        assert!((ActivationKind::Gelu.apply(1.0f32) as f64 - 0.841_344_746_068_542_9).abs() < 1e-6);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let eps = 1e-6f64;
        for kind in [ActivationKind::Gelu, ActivationKind::Relu, ActivationKind::Identity] {
            for &x in &[-2.3f64, -0.7, 0.4, 1.9] {
                let numeric = (kind.apply(x + eps) - kind.apply(x - eps)) / (2.0 * eps);
                let analytic = kind.derivative(x);
                let rel = (numeric - analytic).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                assert!(rel < 1e-6, "{kind} at {x}: {analytic} vs {numeric}");
            }
        }
    }
}
