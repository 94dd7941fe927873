use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};
use crate::scalar::Scalar;

/// Pairwise inner products of node states, `M[i,j] = ⟨h_i, h_j⟩`.
///
/// Symmetric by construction: only the upper triangle is computed and the
/// lower one mirrored, so `M[i,j] == M[j,i]` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix<T> {
    pub matrix: Matrix<T>,
    pub layer: usize,
}

impl<T: Scalar> RelevanceMatrix<T> {
    /// Number of stored entries, `(|V|+1)²` for a graph with a question node.
    pub fn storage(&self) -> usize {
        self.matrix.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.matrix.get(i, j)
    }

    /// The `k` largest off-diagonal entries of `row` as `(column, value)`,
    /// largest first; equal values keep column order.
    pub fn top_in_row(&self, row: usize, k: usize) -> Vec<(usize, T)> {
        let mut entries: Vec<(usize, T)> = (0..self.matrix.cols())
            .filter(|&j| j != row)
            .map(|j| (j, self.matrix.get(row, j)))
            .collect();
        entries.sort_by(|a, b| b.1.as_f64().total_cmp(&a.1.as_f64()).then(a.0.cmp(&b.0)));
        entries.truncate(k);
        entries
    }

    /// Checks exact symmetry and that each diagonal entry equals the squared
    /// row norm of `states` within `tol` (relative to the norm).
    pub fn check_invariants(&self, states: &Matrix<T>, scale: T, tol: T) -> Result<()> {
        let n = self.matrix.rows();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.matrix.get(i, j) != self.matrix.get(j, i) {
                    return Err(Error::Validation(format!("relevance not symmetric at ({i},{j})")));
                }
            }
            let norm = states.row(i).iter().fold(T::zero(), |s, &x| s + x * x) * scale;
            let diag = self.matrix.get(i, i);
            if diag < T::zero() || (diag - norm).abs() > tol * norm.max(T::one()) {
                return Err(Error::Validation(format!("relevance diagonal {i}: {diag} vs {norm}")));
            }
        }
        Ok(())
    }
}

/// Relevance of the rows of `states`, divided by d when `scaled`.
pub fn relevance_matrix<T: Scalar>(states: &Matrix<T>, scaled: bool, layer: usize) -> Result<RelevanceMatrix<T>> {
    let n = states.rows();
    let scale = relevance_scale::<T>(states.cols(), scaled);
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dot(states.row(i), states.row(j)) * scale;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m.check_finite("relevance_matrix")?;
    Ok(RelevanceMatrix { matrix: m, layer })
}

pub(crate) fn relevance_scale<T: Scalar>(width: usize, scaled: bool) -> T {
    if scaled {
        T::one() / T::of(width as f64)
    } else {
        T::one()
    }
}
