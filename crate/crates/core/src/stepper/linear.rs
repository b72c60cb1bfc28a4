//! Solves with `I + (τ/2) A` and the propagator `B = (I + τA/2)^{-1}(I - τA/2)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riesz_op::{ApplyPath, RieszOperator, StateField};

/// Largest `M - 1` for which a 1D context factorizes densely by default.
pub const DENSE_SOLVE_LIMIT: usize = 2048;
/// Below this line length the direct Toeplitz sum beats the FFT.
const FFT_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    DenseCholesky,
    MatrixFreeCg,
}

/// Iterations and final relative residual of one solve. Direct solves
/// report zero iterations and no residual.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: Option<f64>,
}

/// Operator, step and cached solver state for repeated applications of `B`.
#[derive(Debug, Clone)]
pub struct LinearSolveContext {
    op: RieszOperator,
    tau: f64,
    mode: SolveMode,
    path: ApplyPath,
    tol: f64,
    max_iter: usize,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl LinearSolveContext {
    /// Dense Cholesky for 1D grids with at most [`DENSE_SOLVE_LIMIT`]
    /// unknowns, matrix-free CG otherwise.
    pub fn new(op: RieszOperator, tau: f64, linear_tol: f64) -> Result<Self> {
        let g = op.grid();
        let mode = if g.dim == 1 && g.n_axis() <= DENSE_SOLVE_LIMIT {
            SolveMode::DenseCholesky
        } else {
            SolveMode::MatrixFreeCg
        };
        Self::with_mode(op, tau, linear_tol, mode)
    }

    pub fn with_mode(
        op: RieszOperator,
        tau: f64,
        linear_tol: f64,
        mode: SolveMode,
    ) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau = {tau} must be >= 0")));
        }
        if !(linear_tol > 0.0 && linear_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "linear_tol = {linear_tol} must lie in (0, 1)"
            )));
        }
        let n = op.grid().n_axis();
        let path = if n <= FFT_THRESHOLD {
            ApplyPath::Dense
        } else {
            ApplyPath::Fft
        };
        let chol = match mode {
            SolveMode::DenseCholesky => {
                if op.grid().dim != 1 {
                    return Err(Error::InvalidArgument(
                        "dense Cholesky mode is only available in one dimension".into(),
                    ));
                }
                let k = op.assemble_dense_1d()?;
                let lhs = DMatrix::identity(n, n) + k * (0.5 * tau * op.scale());
                Some(lhs.cholesky().ok_or_else(|| {
                    Error::LinearSolver("I + tau/2 A is not positive definite".into())
                })?)
            }
            SolveMode::MatrixFreeCg => None,
        };
        let max_iter = 10 * op.grid().len();
        Ok(Self {
            op,
            tau,
            mode,
            path,
            tol: linear_tol,
            max_iter,
            chol,
        })
    }

    pub fn operator(&self) -> &RieszOperator {
        &self.op
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn mode(&self) -> SolveMode {
        self.mode
    }

    /// Matvec path used for `A`.
    pub fn apply_path(&self) -> ApplyPath {
        self.path
    }

    /// `B v`.
    pub fn apply_b(&self, v: &StateField) -> Result<StateField> {
        if v.grid() != self.op.grid() {
            return Err(Error::GridMismatch {
                expected: self.op.grid().len(),
                got: v.values().len(),
            });
        }
        let mut out = vec![0.0; v.values().len()];
        self.apply_b_into(v.values(), &mut out)?;
        StateField::new(*v.grid(), out)
    }

    /// `out = B x` on raw vectors.
    pub fn apply_b_into(&self, x: &[f64], out: &mut [f64]) -> Result<SolveReport> {
        if self.tau == 0.0 {
            out.copy_from_slice(x);
            return Ok(SolveReport::default());
        }
        let half = 0.5 * self.tau;
        let mut w = vec![0.0; x.len()];
        self.op.apply_into(x, &mut w, self.path);
        for (wi, &xi) in w.iter_mut().zip(x) {
            *wi = xi - half * *wi;
        }
        self.solve_shifted(&w, out)
    }

    /// Solve `(I + (τ/2) A) y = w`.
    pub fn solve_shifted(&self, w: &[f64], y: &mut [f64]) -> Result<SolveReport> {
        match &self.chol {
            Some(chol) => {
                let sol = chol.solve(&DVector::from_column_slice(w));
                y.copy_from_slice(sol.as_slice());
                Ok(SolveReport::default())
            }
            None => self.cg(w, y),
        }
    }

    fn shifted_apply(&self, x: &[f64], out: &mut [f64]) {
        let half = 0.5 * self.tau;
        self.op.apply_into(x, out, self.path);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi + half * *o;
        }
    }

    fn cg(&self, b: &[f64], x: &mut [f64]) -> Result<SolveReport> {
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let b_norm = dot(b, b).sqrt();
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(SolveReport {
                iterations: 0,
                residual: Some(0.0),
            });
        }
        // The right-hand side is a good initial guess: the shifted operator is
        // a small perturbation of the identity for moderate τλ.
        x.copy_from_slice(b);
        let n = b.len();
        let mut ax = vec![0.0; n];
        self.shifted_apply(x, &mut ax);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr = dot(&r, &r);
        let target = self.tol * b_norm;
        let mut it = 0;
        while rr.sqrt() > target {
            if it >= self.max_iter {
                return Err(Error::NoConvergence {
                    what: "conjugate gradient",
                    iterations: it,
                    residual: rr.sqrt() / b_norm,
                });
            }
            self.shifted_apply(&p, &mut ap);
            let alpha = rr / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
            it += 1;
        }
        Ok(SolveReport {
            iterations: it,
            residual: Some(rr.sqrt() / b_norm),
        })
    }
}
