use crate::error::{Error, Result};
use crate::numerics::{activation, activation_backward, axpy, ActivationKind, Matrix};
use crate::scalar::Scalar;

/// Mean over the first `num_entities` rows; the question row is excluded.
/// A graph without entity rows pools to zeros.
pub fn pool_graph<T: Scalar>(states: &Matrix<T>, num_entities: usize) -> Vec<T> {
    let mut out = vec![T::zero(); states.cols()];
    if num_entities == 0 {
        return out;
    }
    for i in 0..num_entities {
        axpy(&mut out, T::one(), states.row(i));
    }
    let inv = T::one() / T::of(num_entities as f64);
    out.iter_mut().for_each(|x| *x *= inv);
    out
}

/// Two-layer scoring MLP `f_out`.
#[derive(Debug, Clone, Copy)]
pub struct ScorerWeights<'a, T> {
    pub w1: &'a Matrix<T>,
    pub b1: &'a Matrix<T>,
    pub w2: &'a Matrix<T>,
    pub b2: &'a Matrix<T>,
}

#[derive(Debug, Clone)]
pub struct ScorerTrace<T> {
    /// `[h_cls; h_Q; pooled]`
    pub input: Matrix<T>,
    hidden_pre: Matrix<T>,
    hidden: Matrix<T>,
    pub score: T,
}

pub fn score_forward<T: Scalar>(
    h_cls: &[T],
    h_q: &[T],
    pooled: &[T],
    f_out: ScorerWeights<'_, T>,
    act: ActivationKind,
) -> Result<ScorerTrace<T>> {
    let mut x = Vec::with_capacity(h_cls.len() + h_q.len() + pooled.len());
    x.extend_from_slice(h_cls);
    x.extend_from_slice(h_q);
    x.extend_from_slice(pooled);
    let input = Matrix::row_vector(&x)?;
    let mut hidden_pre = input.matmul(f_out.w1)?;
    hidden_pre.add_assign(f_out.b1)?;
    let hidden = activation(&hidden_pre, act)?;
    let mut s = hidden.matmul(f_out.w2)?;
    s.add_assign(f_out.b2)?;
    Ok(ScorerTrace {
        input,
        hidden_pre,
        hidden,
        score: s.get(0, 0),
    })
}

/// Scalar logit `f_out([h_cls; h_Q; pooled])`.
pub fn score_candidate<T: Scalar>(h_cls: &[T], h_q: &[T], pooled: &[T], f_out: ScorerWeights<'_, T>, act: ActivationKind) -> Result<T> {
    Ok(score_forward(h_cls, h_q, pooled, f_out, act)?.score)
}

/// Gradients of the scorer parameters, and of its input row, for upstream `d_score`.
pub struct ScorerGrads<T> {
    pub w1: Matrix<T>,
    pub b1: Matrix<T>,
    pub w2: Matrix<T>,
    pub b2: Matrix<T>,
    pub input: Matrix<T>,
}

pub fn score_backward<T: Scalar>(
    trace: &ScorerTrace<T>,
    f_out: ScorerWeights<'_, T>,
    act: ActivationKind,
    d_score: T,
) -> Result<ScorerGrads<T>> {
    let ds = Matrix::from_vec(1, 1, vec![d_score])?;
    let w2 = trace.hidden.t_matmul(&ds)?;
    let d_hidden = ds.matmul_t(f_out.w2)?;
    let du = activation_backward(&trace.hidden_pre, &d_hidden, act)?;
    let w1 = trace.input.t_matmul(&du)?;
    let input = du.matmul_t(f_out.w1)?;
    Ok(ScorerGrads {
        w1,
        b1: du,
        w2,
        b2: ds,
        input,
    })
}

/// Index of the highest score; ties go to the lowest index.
pub fn predict<T: Scalar>(scores: &[T]) -> Result<usize> {
    if scores.len() < 2 {
        return Err(Error::Validation(format!("need at least 2 candidate scores, got {}", scores.len())));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("candidate score {i}")));
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Cross-entropy `−log softmax(scores)[gold]` and its gradient w.r.t. the scores.
pub fn loss<T: Scalar>(scores: &[T], gold: usize) -> Result<(T, Vec<T>)> {
    if gold >= scores.len() {
        return Err(Error::Validation(format!(
            "gold index {gold} out of range for {} candidates",
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("candidate score {i}")));
    }
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let log_z = total.ln() + max;
    let value = log_z - scores[gold];
    let mut grad: Vec<T> = exps.iter().map(|&e| e / total).collect();
    grad[gold] -= T::one();
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pooling_cases() {
        let one = Matrix::<f64>::from_f64(2, 2, &[1.0, 2.0, 9.0, 9.0]).unwrap();
        assert_eq!(pool_graph(&one, 1), vec![1.0, 2.0]);
        let sym = Matrix::<f64>::from_f64(3, 2, &[1.0, -2.0, -1.0, 2.0, 5.0, 5.0]).unwrap();
        assert_eq!(pool_graph(&sym, 2), vec![0.0, 0.0]);
        assert_eq!(pool_graph(&sym, 0), vec![0.0, 0.0]);
    }

    #[test]
    fn pooling_matches_column_mean() {
        let data: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = Matrix::<f64>::from_f64(5, 4, &data).unwrap();
        let pooled = pool_graph(&h, 4);
        for (c, p) in pooled.iter().enumerate() {
            let mean = (0..4).map(|r| h.get(r, c)).sum::<f64>() / 4.0;
            assert!((p - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_weights_score_zero() {
        let z1 = Matrix::<f64>::zeros(6, 3);
        let z2 = Matrix::<f64>::zeros(1, 3);
        let z3 = Matrix::<f64>::zeros(3, 1);
        let z4 = Matrix::<f64>::zeros(1, 1);
        let w = ScorerWeights {
            w1: &z1,
            b1: &z2,
            w2: &z3,
            b2: &z4,
        };
        let s = score_candidate(&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0], w, ActivationKind::Gelu).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn hand_fixture() {
        // hidden = relu(x W1 + b1), score = sum(hidden) + b2
        let w1 = Matrix::<f64>::from_f64(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, -1.0]).unwrap();
        let b1 = Matrix::<f64>::from_f64(1, 2, &[0.5, 0.0]).unwrap();
        let w2 = Matrix::<f64>::filled(2, 1, 1.0);
        let b2 = Matrix::<f64>::from_f64(1, 1, &[0.25]).unwrap();
        let w = ScorerWeights {
            w1: &w1,
            b1: &b1,
            w2: &w2,
            b2: &b2,
        };
        // x = [2, 3, 1]: pre = [2 + 1 + 0.5, 3 - 1] = [3.5, 2]
        let s = score_candidate(&[2.0], &[3.0], &[1.0], w, ActivationKind::Relu).unwrap();
        assert_eq!(s, 3.5 + 2.0 + 0.25);
    }

    #[test]
    fn concatenation_order_matters() {
        let w1 = Matrix::<f64>::from_f64(5, 2, &[0.3, -0.2, 0.7, 0.1, -0.5, 0.9, 0.4, -0.8, 0.6, 0.2]).unwrap();
        let b1 = Matrix::<f64>::zeros(1, 2);
        let w2 = Matrix::<f64>::from_f64(2, 1, &[1.1, -0.7]).unwrap();
        let b2 = Matrix::<f64>::zeros(1, 1);
        let w = ScorerWeights {
            w1: &w1,
            b1: &b1,
            w2: &w2,
            b2: &b2,
        };
        let a = score_candidate(&[0.2], &[1.0, -1.0], &[0.5, 0.25], w, ActivationKind::Gelu).unwrap();
        let b = score_candidate(&[0.2], &[0.5, 0.25], &[1.0, -1.0], w, ActivationKind::Gelu).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn predict_cases() {
        assert_eq!(predict(&[0.1, 0.9, 0.3]).unwrap(), 1);
        assert_eq!(predict(&[0.5, 0.5]).unwrap(), 0);
        assert!(predict(&[0.5]).is_err());
        assert!(predict(&[0.5, f64::NAN]).is_err());
    }

    #[test]
    fn loss_cases() {
        let (l, _) = loss(&[0.3f64; 5], 2).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-15);
        let (l, _) = loss(&[0.0, 50.0, 0.0], 1).unwrap();
        assert!(l < 1e-20);
        assert!(loss(&[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn loss_matches_high_precision_oracle() {
        // 50-digit log-sum-exp evaluations
        let scores = [0.3f64, -1.2, 2.4, 0.05, -0.6];
        let want = [
            2.358_461_567_522_896_4f64,
            3.858_461_567_522_896_4,
            0.258_461_567_522_896_36,
            2.608_461_567_522_896_4,
            3.258_461_567_522_896_4,
        ];
        for (gold, w) in want.iter().enumerate() {
            let (got, grad) = loss(&scores, gold).unwrap();
            assert!((got - w).abs() < 1e-12, "{got} vs {w}");
            assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn predict_shift_invariant(scores in prop::collection::vec(-10.0f64..10.0, 2..8), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
            // exact shift can merge near-ties; only compare when the gap survives rounding
            let best = predict(&scores).unwrap();
            let gap = scores.iter().enumerate().filter(|(i, _)| *i != best).map(|(_, s)| scores[best] - s).fold(f64::INFINITY, f64::min);
            prop_assume!(gap > 1e-9);
            prop_assert_eq!(predict(&shifted).unwrap(), best);
            let cubed: Vec<f64> = scores.iter().map(|s| s * s * s + 2.0 * s).collect();
            prop_assert_eq!(predict(&cubed).unwrap(), best);
        }
    }
}
