//! Dense `f64` vectors and row-major matrices, plus the activation functions
//! shared by all three network types.

use serde::{Deserialize, Serialize};

use crate::error::{FxError, Result};

pub type Vector = Vec<f64>;

/// Row-major dense matrix. Shape is fixed at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(FxError::Dimension {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(FxError::Dimension {
                    op: "from_rows",
                    left: (rows.len(), cols),
                    right: (r.len(), 1),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(self.mismatch("matvec", x.len()));
        }
        if self.cols == 0 {
            return Ok(vec![0.0; self.rows]);
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| dot(row, x))
            .collect())
    }

    /// `Aᵀ y`, used to push error signals back through a layer.
    pub fn matvec_transposed(&self, y: &[f64]) -> Result<Vector> {
        if y.len() != self.rows {
            return Err(FxError::Dimension {
                op: "matvec_transposed",
                left: (self.cols, self.rows),
                right: (y.len(), 1),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        Ok(out)
    }

    /// `A += scale · u vᵀ`.
    pub fn add_outer(&mut self, scale: f64, u: &[f64], v: &[f64]) -> Result<()> {
        if u.len() != self.rows || v.len() != self.cols {
            return Err(FxError::Dimension {
                op: "add_outer",
                left: (self.rows, self.cols),
                right: (u.len(), v.len()),
            });
        }
        let cols = self.cols;
        for (i, &ui) in u.iter().enumerate() {
            let s = scale * ui;
            if s == 0.0 {
                continue;
            }
            for (a, &vj) in self.data[i * cols..(i + 1) * cols].iter_mut().zip(v) {
                *a += s * vj;
            }
        }
        Ok(())
    }

    fn mismatch(&self, op: &'static str, len: usize) -> FxError {
        FxError::Dimension {
            op,
            left: (self.rows, self.cols),
            right: (len, 1),
        }
    }
}

/// Free-function form of [`Matrix::matvec`].
pub fn matvec(a: &Matrix, x: &[f64]) -> Result<Vector> {
    a.matvec(x)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a · x`, element-wise.
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn hadamard(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    Relu,
    Linear,
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        activate(self, x)
    }

    /// Derivative evaluated at the pre-activation `x`.
    pub fn prime(self, x: f64) -> f64 {
        activate_prime(self, x)
    }

    pub fn apply_all(self, xs: &[f64]) -> Vector {
        xs.iter().map(|&x| activate(self, x)).collect()
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = FxError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            "relu" => Ok(ActivationKind::Relu),
            "linear" => Ok(ActivationKind::Linear),
            other => Err(FxError::Config(format!("unknown activation '{other}'"))),
        }
    }
}

/// Logistic function, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn activate(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Sigmoid => sigmoid(x),
        ActivationKind::Tanh => x.tanh(),
        ActivationKind::Relu => x.max(0.0),
        ActivationKind::Linear => x,
    }
}

/// First derivative at `x`. Relu'(0) is taken as 1.
#[inline]
pub fn activate_prime(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Sigmoid => {
            let s = sigmoid(x);
            s * (1.0 - s)
        }
        ActivationKind::Tanh => {
            let t = x.tanh();
            1.0 - t * t
        }
        ActivationKind::Relu => {
            if x < 0.0 {
                0.0
            } else {
                1.0
            }
        }
        ActivationKind::Linear => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const KINDS: [ActivationKind; 4] = [
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
        ActivationKind::Relu,
        ActivationKind::Linear,
    ];

    #[test]
    fn matvec_examples() {
        let x = vec![1.0, 2.0, 3.0];
        assert_eq!(Matrix::identity(3).matvec(&x).unwrap(), x);
        assert_eq!(Matrix::zeros(2, 3).matvec(&x).unwrap(), vec![0.0, 0.0]);
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn matvec_mismatch_names_both_shapes() {
        let err = Matrix::zeros(2, 3).matvec(&[1.0, 2.0]).unwrap_err();
        assert_eq!(
            err,
            FxError::Dimension {
                op: "matvec",
                left: (2, 3),
                right: (2, 1)
            }
        );
        assert!(err.to_string().contains("(2, 3)"));
    }

    #[test]
    fn transposed_and_outer() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(
            a.matvec_transposed(&[1.0, -1.0]).unwrap(),
            vec![-3.0, -3.0, -3.0]
        );
        let mut z = Matrix::zeros(2, 2);
        z.add_outer(2.0, &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(z.as_slice(), &[6.0, 8.0, 12.0, 16.0]);
        assert!(z.add_outer(1.0, &[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn activation_examples() {
        assert_eq!(activate(ActivationKind::Sigmoid, 0.0), 0.5);
        assert_eq!(activate(ActivationKind::Relu, -3.0), 0.0);
        assert_eq!(activate(ActivationKind::Tanh, 0.0), 0.0);
        assert_eq!(activate_prime(ActivationKind::Sigmoid, 0.0), 0.25);
        assert_eq!(activate_prime(ActivationKind::Linear, 7.3), 1.0);
        assert_eq!(activate_prime(ActivationKind::Relu, 0.0), 1.0);
        // central difference of tanh at 1 with step 1e-6: 0.419974341...
        assert!((activate_prime(ActivationKind::Tanh, 1.0) - 0.419_974_341_614).abs() < 1e-9);
    }

    #[test]
    fn sigmoid_does_not_overflow() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!(activate_prime(ActivationKind::Sigmoid, -800.0).is_finite());
    }

    proptest! {
        #[test]
        fn derivative_matches_central_difference(x in -20.0f64..20.0) {
            let h = 1e-6;
            for kind in KINDS {
                if kind == ActivationKind::Relu && x.abs() < 1e-5 {
                    continue;
                }
                let fd = (activate(kind, x + h) - activate(kind, x - h)) / (2.0 * h);
                prop_assert!((activate_prime(kind, x) - fd).abs() <= 1e-6,
                    "{:?} at {}: {} vs {}", kind, x, activate_prime(kind, x), fd);
            }
        }

        // f64 tanh rounds to ±1 beyond |x| ≈ 19.06, sigmoid to 1 beyond ≈ 36.7
        #[test]
        fn squashing_ranges(x in -19.0f64..19.0) {
            let s = activate(ActivationKind::Sigmoid, x);
            let t = activate(ActivationKind::Tanh, x);
            prop_assert!(s > 0.0 && s < 1.0);
            prop_assert!(t > -1.0 && t < 1.0);
        }

        #[test]
        fn matvec_is_linear(
            entries in prop::collection::vec(-5.0f64..5.0, 12),
            x in prop::collection::vec(-5.0f64..5.0, 4),
            y in prop::collection::vec(-5.0f64..5.0, 4),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let m = Matrix::from_vec(3, 4, entries).unwrap();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = m.matvec(&combo).unwrap();
            let mx = m.matvec(&x).unwrap();
            let my = m.matvec(&y).unwrap();
            for i in 0..3 {
                let rhs = a * mx[i] + b * my[i];
                let scale = lhs[i].abs().max(rhs.abs()).max(1.0);
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * scale);
            }
        }
    }
}
