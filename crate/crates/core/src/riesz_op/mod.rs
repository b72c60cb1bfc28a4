//! The discrete Riesz operator `A = -ε² D_γ` on interior grid nodes.
//!
//! In one dimension `A = (ε²/h^γ) K` with `K_{ij} = g_{j-i}`; in `d`
//! dimensions `A` is the Kronecker sum of `d` copies of the 1D operator. The
//! multidimensional matrix is never formed: each application sweeps the
//! grid lines along every axis and applies `K` to them, either by the direct
//! sum or through an FFT of the circulant embedding.

mod grid;
mod toeplitz;

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraccoeff::{check_order, gamma_star, CoefficientTable};

pub use grid::{GridSpec, StateField};
pub use toeplitz::SymmetricToeplitz;

/// Largest `M - 1` accepted by [`RieszOperator::assemble_dense_1d`].
pub const DENSE_LIMIT: usize = 4096;
/// Largest `M - 1` accepted by the dense eigenvalue helpers.
pub const EIGEN_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyPath {
    Dense,
    #[default]
    Fft,
}

impl std::str::FromStr for ApplyPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Self::Dense),
            "fft" => Ok(Self::Fft),
            other => Err(Error::InvalidArgument(format!(
                "unknown apply path '{other}' (expected dense or fft)"
            ))),
        }
    }
}

/// Grid, order and interfacial parameter bundled with the Toeplitz action.
#[derive(Debug, Clone)]
pub struct RieszOperator {
    grid: GridSpec,
    gamma: f64,
    epsilon: f64,
    coeffs: Arc<CoefficientTable>,
    toeplitz: Arc<SymmetricToeplitz>,
}

impl RieszOperator {
    /// Accepts γ in (0,1) ∪ (1,2]; the stability helpers further require γ > 1.
    pub fn new(grid: GridSpec, gamma: f64, epsilon: f64) -> Result<Self> {
        check_order(gamma)?;
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Domain(format!(
                "epsilon = {epsilon} must be positive"
            )));
        }
        let n = grid.n_axis();
        let coeffs = CoefficientTable::cached(gamma, n - 1)?;
        let toeplitz = Arc::new(SymmetricToeplitz::new(coeffs.one_sided().to_vec()));
        Ok(Self {
            grid,
            gamma,
            epsilon,
            coeffs,
            toeplitz,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn coeffs(&self) -> &CoefficientTable {
        &self.coeffs
    }

    /// `ε² / h^γ`, the factor between `K` and the 1D operator.
    pub fn scale(&self) -> f64 {
        self.epsilon * self.epsilon / self.grid.h().powf(self.gamma)
    }

    /// The 1D matrix `K` (unscaled), entry `(i,j) = g_{j-i}`.
    pub fn assemble_dense_1d(&self) -> Result<DMatrix<f64>> {
        let n = self.grid.n_axis();
        if n > DENSE_LIMIT {
            return Err(Error::SizeGuard {
                n,
                limit: DENSE_LIMIT,
            });
        }
        let c = self.coeffs.one_sided();
        Ok(DMatrix::from_fn(n, n, |i, j| c[i.abs_diff(j)]))
    }

    /// `A^{(d)} v`.
    pub fn apply(&self, v: &StateField, path: ApplyPath) -> Result<StateField> {
        if v.grid() != &self.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.len(),
                got: v.values().len(),
            });
        }
        let mut out = vec![0.0; self.grid.len()];
        self.apply_into(v.values(), &mut out, path);
        Ok(StateField::from_parts_unchecked(self.grid, out))
    }

    /// `out = A^{(d)} x` on raw lexicographic vectors of length `(M-1)^d`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64], path: ApplyPath) {
        let n = self.grid.n_axis();
        let d = self.grid.dim;
        assert_eq!(x.len(), self.grid.len(), "apply_into: input length");
        assert_eq!(out.len(), self.grid.len(), "apply_into: output length");
        out.iter_mut().for_each(|o| *o = 0.0);
        let alpha = self.scale();

        if d == 1 {
            self.apply_line(x, alpha, out, path, &mut None);
            return;
        }

        let total = self.grid.len();
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            let n_lines = total / n;
            let line_start = |line: usize| (line / stride) * stride * n + line % stride;
            let results: Vec<Vec<f64>> = (0..n_lines)
                .into_par_iter()
                .map_init(
                    || None,
                    |bufs, line| {
                        let start = line_start(line);
                        let gathered: Vec<f64> = (0..n).map(|i| x[start + i * stride]).collect();
                        let mut acc = vec![0.0; n];
                        self.apply_line(&gathered, alpha, &mut acc, path, bufs);
                        acc
                    },
                )
                .collect();
            for (line, acc) in results.into_iter().enumerate() {
                let start = line_start(line);
                for (i, v) in acc.into_iter().enumerate() {
                    out[start + i * stride] += v;
                }
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn apply_line(
        &self,
        x: &[f64],
        alpha: f64,
        out: &mut [f64],
        path: ApplyPath,
        bufs: &mut Option<(
            Vec<rustfft::num_complex::Complex<f64>>,
            Vec<rustfft::num_complex::Complex<f64>>,
        )>,
    ) {
        match path {
            ApplyPath::Dense => self.toeplitz.matvec_dense_add(x, alpha, out),
            ApplyPath::Fft => {
                let (buf, scratch) = bufs.get_or_insert_with(|| self.toeplitz.fft_buffers());
                self.toeplitz.matvec_fft_add(x, alpha, out, buf, scratch);
            }
        }
    }

    /// Eigenvalues of the 1D operator `(ε²/h^γ) K`, ascending.
    pub fn dense_eigenvalues_1d(&self) -> Result<Vec<f64>> {
        let n = self.grid.n_axis();
        if n > EIGEN_LIMIT {
            return Err(Error::SizeGuard {
                n,
                limit: EIGEN_LIMIT,
            });
        }
        let k = self.assemble_dense_1d()?;
        let scale = self.scale();
        let mut ev: Vec<f64> = SymmetricEigen::new(k)
            .eigenvalues
            .iter()
            .map(|l| l * scale)
            .collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    fn require_stability_order(&self) -> Result<()> {
        if self.gamma <= 1.0 {
            return Err(Error::Domain(format!(
                "stability bounds need gamma in (1,2], got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// `g_0` for γ ≤ γ*, `g_0 + 2 g_2` above it: half the Gerschgorin row-sum bound.
    fn gerschgorin_weight(&self) -> Result<f64> {
        self.require_stability_order()?;
        let g0 = self.coeffs.get(0);
        if self.gamma <= gamma_star()? {
            Ok(g0)
        } else {
            let g2 = if self.coeffs.m_max() >= 2 {
                self.coeffs.get(2)
            } else {
                crate::fraccoeff::coefficient_closed_form(self.gamma, 2)?
            };
            Ok(g0 + 2.0 * g2)
        }
    }

    /// Gerschgorin upper bound on the eigenvalues of `A^{(d)}`:
    /// `(2ε²/h^γ) g_0` or `(2ε²/h^γ)(g_0 + 2 g_2)`, multiplied by `d` for the
    /// Kronecker sum.
    pub fn eigenvalue_bound(&self) -> Result<f64> {
        Ok(self.grid.dim as f64 * 2.0 * self.scale() * self.gerschgorin_weight()?)
    }

    /// Largest step for which the discrete energy is guaranteed not to grow:
    /// `4 / (1 + sqrt(1 + 16 ε² w / h^γ))` with `w` the Gerschgorin weight
    /// (`d`-fold for `d > 1`).
    pub fn energy_stability_tau_bound(&self) -> Result<f64> {
        let lam = self.eigenvalue_bound()?;
        // 16 ε² w / h^γ = 8 * (2 ε² w / h^γ)
        Ok(4.0 / (1.0 + (1.0 + 8.0 * lam).sqrt()))
    }

    /// Spectral radius of `B = (I + τA/2)^{-1}(I - τA/2)` from dense
    /// eigenvalues. In `d` dimensions the eigenvalues of `A` are sums of `d`
    /// 1D eigenvalues, and `|1-x|/(1+x)` is extremal at the ends.
    pub fn spectral_radius_b(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau = {tau} must be >= 0")));
        }
        let ev = self.dense_eigenvalues_1d()?;
        let d = self.grid.dim as f64;
        let lo = d * ev[0];
        let hi = d * ev[ev.len() - 1];
        let rho = |lam: f64| (1.0 - 0.5 * tau * lam).abs() / (1.0 + 0.5 * tau * lam);
        Ok(rho(lo).max(rho(hi)))
    }

    /// `‖B‖_∞` of the dense 1D propagator. Reported, not bounded: it can
    /// exceed 1 for large `τ λ_max`.
    pub fn b_infinity_norm(&self, tau: f64) -> Result<f64> {
        let n = self.grid.n_axis();
        if n > DENSE_LIMIT {
            return Err(Error::SizeGuard {
                n,
                limit: DENSE_LIMIT,
            });
        }
        let a = self.assemble_dense_1d()? * self.scale();
        let id = DMatrix::<f64>::identity(n, n);
        let lhs = &id + &a * (0.5 * tau);
        let rhs = &id - &a * (0.5 * tau);
        let chol = lhs
            .cholesky()
            .ok_or_else(|| Error::LinearSolver("I + tau/2 A is not positive definite".into()))?;
        let b = chol.solve(&rhs);
        Ok(b.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max))
    }
}

/// Sixth-order approximation of the Riesz derivative at the interior nodes
/// from samples `u_0, ..., u_M` on the closed grid (zero extension outside):
/// `δu(x_j) = -h^{-γ} Σ_k g_{j-k} u_k`.
pub fn apply_riesz_formula(gamma: f64, h: f64, samples: &[f64]) -> Result<Vec<f64>> {
    check_order(gamma)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mesh width h = {h} must be positive"
        )));
    }
    if samples.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least three samples on the closed grid".into(),
        ));
    }
    let m = samples.len() - 1;
    let coeffs = CoefficientTable::cached(gamma, m)?;
    let scale = -h.powf(-gamma);
    Ok((1..m)
        .map(|j| {
            let s: f64 = samples
                .iter()
                .enumerate()
                .map(|(k, &u)| coeffs.get(j as i64 - k as i64) * u)
                .sum();
            scale * s
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(gamma: f64, eps: f64, m: usize, dim: usize) -> RieszOperator {
        RieszOperator::new(GridSpec::new(0.0, 1.0, m, dim).unwrap(), gamma, eps).unwrap()
    }

    #[test]
    fn dense_gamma_two_stencil() {
        let k = op(2.0, 1.0, 5, 1).assemble_dense_1d().unwrap();
        assert_eq!(k.nrows(), 4);
        for i in 0..4 {
            assert_eq!(k[(i, i)], 49.0 / 18.0);
        }
        for i in 0..3 {
            assert_eq!(k[(i, i + 1)], -1.5);
            assert_eq!(k[(i + 1, i)], -1.5);
        }
        assert_eq!(k[(0, 2)], 0.15);
        assert_eq!(k[(0, 3)], -1.0 / 90.0);
    }

    #[test]
    fn dense_is_exactly_symmetric() {
        let k = op(1.5, 1.0, 8, 1).assemble_dense_1d().unwrap();
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn dense_guard() {
        let big = op(1.5, 1.0, DENSE_LIMIT + 2, 1);
        assert!(matches!(
            big.assemble_dense_1d(),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn positive_definite_small() {
        let ev = op(1.5, 1.0, 16, 1).dense_eigenvalues_1d().unwrap();
        assert!(ev[0] > 0.0);
    }

    #[test]
    fn zero_maps_to_zero() {
        let o = op(1.5, 0.3, 12, 2);
        let z = StateField::zeros(*o.grid());
        for path in [ApplyPath::Dense, ApplyPath::Fft] {
            assert!(o
                .apply(&z, path)
                .unwrap()
                .values()
                .iter()
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let o = op(1.5, 1.0, 12, 1);
        let other = StateField::zeros(GridSpec::unit(13).unwrap());
        assert!(matches!(
            o.apply(&other, ApplyPath::Fft),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn gamma_two_reproduces_negative_laplacian() {
        // -(sin πx)'' = π² sin πx. Nodes within three cells of the boundary
        // see the zero extension and are excluded.
        let o = op(2.0, 1.0, 64, 1);
        let u = StateField::from_fn(*o.grid(), |x| (std::f64::consts::PI * x[0]).sin());
        let au = o.apply(&u, ApplyPath::Dense).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let h = o.grid().h();
        let err = au.values()[3..60]
            .iter()
            .zip(&u.values()[3..60])
            .map(|(a, v)| (a - pi2 * v).abs())
            .fold(0.0, f64::max);
        assert!(err < 2.0 * pi2.powi(4) / 560.0 * h.powi(6), "err = {err:e}");
    }

    #[test]
    fn riesz_formula_zero() {
        let out = apply_riesz_formula(1.5, 0.1, &[0.0; 11]).unwrap();
        assert_eq!(out.len(), 9);
        assert!(out.iter().all(|&v| v == 0.0));
        assert!(apply_riesz_formula(1.0, 0.1, &[0.0; 11]).is_err());
    }

    #[test]
    fn eigenvalue_bound_branches_agree_at_gamma_star() {
        let gs = gamma_star().unwrap();
        let lo = op(gs - 1e-9, 1.0, 16, 1).eigenvalue_bound().unwrap();
        let hi = op(gs + 1e-9, 1.0, 16, 1).eigenvalue_bound().unwrap();
        assert!((lo - hi).abs() / lo < 1e-6);
    }

    #[test]
    fn stability_helpers_reject_small_gamma() {
        let o = op(0.5, 1.0, 16, 1);
        assert!(o.eigenvalue_bound().is_err());
        assert!(o.energy_stability_tau_bound().is_err());
    }

    #[test]
    fn tau_bound_examples() {
        let tiny = op(1.5, 1e-9, 100, 1).energy_stability_tau_bound().unwrap();
        assert!((tiny - 2.0).abs() < 1e-9);
        // Below γ* the weight is g0, above it g0 + 2 g2.
        for (g, m2) in [(1.4, 0.0), (1.8, 2.0)] {
            let b = op(g, 0.1, 100, 1).energy_stability_tau_bound().unwrap();
            let c = |m| crate::fraccoeff::coefficient_closed_form(g, m).unwrap();
            let w = c(0) + m2 * c(2);
            let direct = 4.0 / (1.0 + (1.0 + 16.0 * 0.01 * w / 0.01f64.powf(g)).sqrt());
            assert!(
                (b - direct).abs() < 1e-14 && b > 0.0 && b < 2.0,
                "{b} {direct}"
            );
        }
        let mut prev = f64::INFINITY;
        for eps in [0.01, 0.05, 0.1, 0.5, 1.0] {
            let v = op(1.5, eps, 100, 1).energy_stability_tau_bound().unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn spectral_radius_identity_at_zero_tau() {
        assert_eq!(op(1.5, 1.0, 32, 1).spectral_radius_b(0.0).unwrap(), 1.0);
        let r = op(1.5, 1.0, 32, 1).spectral_radius_b(0.5).unwrap();
        assert!(r > 0.0 && r < 1.0);
    }

    #[test]
    fn apply_path_parses() {
        assert_eq!("dense".parse::<ApplyPath>().unwrap(), ApplyPath::Dense);
        assert!("gpu".parse::<ApplyPath>().is_err());
    }
}
