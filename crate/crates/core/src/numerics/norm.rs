use crate::error::Result;
use crate::numerics::{dot, Matrix};
use crate::scalar::Scalar;

/// Added to the mean square before the root so zero rows stay finite.
pub const RMS_EPS: f64 = 1e-6;

fn row_rms<T: Scalar>(row: &[T]) -> T {
    (dot(row, row) / T::of(row.len().max(1) as f64) + T::of(RMS_EPS)).sqrt()
}

/// Divides every row by its root mean square, so rows come out with
/// norm close to sqrt(cols). No learned gain or shift.
pub fn rms_norm_rows<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>> {
    let mut out = x.clone();
    for r in 0..x.rows() {
        let inv = T::one() / row_rms(x.row(r));
        out.row_mut(r).iter_mut().for_each(|v| *v *= inv);
    }
    out.check_finite("rms_norm")?;
    Ok(out)
}

/// Gradient of [`rms_norm_rows`] at `x`, given the upstream gradient `dy`.
pub fn rms_norm_rows_backward<T: Scalar>(x: &Matrix<T>, dy: &Matrix<T>) -> Result<Matrix<T>> {
    let n = T::of(x.cols().max(1) as f64);
    let mut dx = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let rms = row_rms(x.row(r));
        let g = dy.row(r);
        // dy·y / n, with y = x / rms
        let proj = dot(g, x.row(r)) / (rms * n);
        for ((o, &gi), &xi) in dx.row_mut(r).iter_mut().zip(g).zip(x.row(r)) {
            *o = (gi - xi / rms * proj) / rms;
        }
    }
    dx.check_finite("rms_norm backward")?;
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_get_unit_rms() {
        let x = Matrix::<f64>::from_rows(&[[3.0, 4.0], [0.0, 0.0]]).unwrap();
        let y = rms_norm_rows(&x).unwrap();
        let ms: f64 = y.row(0).iter().map(|v| v * v).sum::<f64>() / 2.0;
        assert!((ms - 1.0).abs() < 1e-6);
        assert_eq!(y.row(1), [0.0, 0.0]);
    }

    #[test]
    fn scale_invariant() {
        let x = Matrix::<f64>::from_rows(&[[0.3, -1.2, 2.0]]).unwrap();
        let a = rms_norm_rows(&x).unwrap();
        let b = rms_norm_rows(&x.scale(50.0)).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn backward_matches_differences() {
        let x = Matrix::<f64>::from_rows(&[[0.3, -1.2, 2.0], [0.05, 0.4, -0.1]]).unwrap();
        let w = Matrix::<f64>::from_rows(&[[1.0, 0.5, -2.0], [0.7, -0.3, 1.1]]).unwrap();
        let f = |x: &Matrix<f64>| -> f64 { rms_norm_rows(x).unwrap().hadamard(&w).unwrap().data().iter().sum() };
        let dx = rms_norm_rows_backward(&x, &w).unwrap();
        let eps = 1e-6;
        for i in 0..x.len() {
            let (mut p, mut m) = (x.clone(), x.clone());
            p.data_mut()[i] += eps;
            m.data_mut()[i] -= eps;
            let num = (f(&p) - f(&m)) / (2.0 * eps);
            assert!((num - dx.data()[i]).abs() < 1e-7, "{i}: {num} vs {}", dx.data()[i]);
        }
    }
}
