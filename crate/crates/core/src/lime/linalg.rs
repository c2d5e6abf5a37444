//! Dense Cholesky factorization for the (N+1)x(N+1) normal equations.

use ndarray::{Array1, Array2};

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<f64>,
}

/// Pivot below this fraction of the largest diagonal entry is treated as
/// numerically singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

impl Cholesky {
    /// Returns the index of the first failing pivot on rank deficiency.
    pub fn factor(a: &Array2<f64>) -> Result<Self, usize> {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let scale = a.diag().iter().cloned().fold(0.0, f64::max);
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if d.is_nan() || d <= PIVOT_TOLERANCE * scale {
                return Err(j);
            }
            let d = d.sqrt();
            l[[j, j]] = d;
            for i in j + 1..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / d;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let l = &self.lower;
        let n = l.nrows();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[[i, k]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[[k, i]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        y
    }

    /// `A⁻¹` via `L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> Array2<f64> {
        let l = &self.lower;
        let n = l.nrows();
        // invert the triangular factor column by column
        let mut linv = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            linv[[j, j]] = 1.0 / l[[j, j]];
            for i in j + 1..n {
                let mut s = 0.0;
                for k in j..i {
                    s -= l[[i, k]] * linv[[k, j]];
                }
                linv[[i, j]] = s / l[[i, i]];
            }
        }
        linv.t().dot(&linv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_and_inverts_spd() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let c = Cholesky::factor(&a).unwrap();
        let b = array![1.0, -2.0, 0.5];
        let x = c.solve(&b);
        let back = a.dot(&x);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
        let prod = a.dot(&c.inverse());
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[[i, j]] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_is_detected() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert_eq!(Cholesky::factor(&a).unwrap_err(), 1);
    }
}
