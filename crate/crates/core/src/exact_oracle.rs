//! Closed-form Riesz derivatives of polynomials supported on `[0,1]`, the
//! test profiles, and the manufactured forcing for the Allen–Cahn studies.
//!
//! For `u(x) = Σ c_k x^k` on `[0,1]`, extended by zero, the left and right
//! Riemann–Liouville derivatives are termwise
//! `Γ(k+1)/Γ(k+1-γ) x^{k-γ}` and the same with `x -> 1-x` applied to the
//! expansion of `u` in powers of `1-x`. The Riesz derivative is their sum
//! times `-1/(2 cos(πγ/2))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraccoeff::check_order;
use crate::riesz_op::{GridSpec, StateField};
use crate::special::{binomial, gamma as gamma_fn, recip_gamma};
use crate::stepper::SourceTerm;

/// `u(x) = Σ_k c_k x^k` on `[0,1]`, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySpec {
    coeffs: Vec<f64>,
}

impl PolySpec {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// `x^a (1-x)^b`, expanded with exact binomial coefficients.
    pub fn bump(a: u32, b: u32) -> Self {
        let mut coeffs = vec![0.0; (a + b + 1) as usize];
        for k in 0..=b {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[(a + k) as usize] = sign * binomial(b, k);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Horner evaluation of the expanded form. Near the middle of `[0,1]` the
    /// alternating coefficients of a bump cancel; sample factored forms
    /// directly where accuracy matters.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Coefficients of the same polynomial in powers of `(1 - x)`.
    pub fn reflected(&self) -> Vec<f64> {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        // x^k = (1 - y)^k = Σ_j C(k,j) (-1)^j y^j
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate().take(k + 1) {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                *o += c * sign * binomial(k as u32, j as u32);
            }
        }
        out
    }

    /// Ordinary second derivative as a polynomial.
    pub fn second_derivative(&self) -> PolySpec {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(2)
            .map(|(k, &c)| c * (k * (k - 1)) as f64)
            .collect::<Vec<_>>();
        if coeffs.is_empty() {
            PolySpec::zero()
        } else {
            PolySpec { coeffs }
        }
    }

    /// True when `u(0) = u(1) = 0` up to rounding.
    pub fn vanishes_at_ends(&self) -> bool {
        let scale: f64 = self.coeffs.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
        self.eval(0.0).abs() <= 1e-14 * scale && self.eval(1.0).abs() <= 1e-14 * scale
    }
}

/// Riesz-type prefactor `-1/(2 cos(πγ/2))`; the `Γ(2-γ)` of the integral
/// form is absorbed in the Riemann–Liouville monomial rule.
fn riesz_prefactor(gamma: f64) -> f64 {
    -1.0 / (2.0 * (PI * gamma / 2.0).cos())
}

/// Sum of left and right Riemann–Liouville derivatives at `x`.
fn two_sided_rl(left: &[f64], right: &[f64], gamma: f64, x: f64) -> f64 {
    let term = |k: usize, c: f64, y: f64| {
        if c == 0.0 {
            return 0.0;
        }
        let kf = k as f64;
        c * gamma_fn(kf + 1.0) * recip_gamma(kf + 1.0 - gamma) * y.powf(kf - gamma)
    };
    let l: f64 = left.iter().enumerate().map(|(k, &c)| term(k, c, x)).sum();
    let r: f64 = right
        .iter()
        .enumerate()
        .map(|(k, &c)| term(k, c, 1.0 - x))
        .sum();
    l + r
}

/// Exact Riesz derivative of the zero-extended polynomial at `x ∈ (0,1)`.
pub fn riesz_derivative_poly(p: &PolySpec, gamma: f64, x: f64) -> Result<f64> {
    check_order(gamma)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!(
            "x = {x} must lie strictly inside (0,1)"
        )));
    }
    if !p.vanishes_at_ends() {
        return Err(Error::InvalidArgument(
            "polynomial must vanish at x = 0 and x = 1 for zero extension".into(),
        ));
    }
    let right = p.reflected();
    Ok(riesz_prefactor(gamma) * two_sided_rl(p.coeffs(), &right, gamma, x))
}

/// Manufactured solution `u(x,t) = e^{-t} x^6 (1-x)^6`.
pub fn manufactured_solution(x: f64, t: f64) -> f64 {
    (-t).exp() * (x * (1.0 - x)).powi(6)
}

/// Forcing that makes [`manufactured_solution`] exact:
/// `s = u_t - ε² L^γ u - u + u³`.
pub fn manufactured_source(x: f64, t: f64, gamma: f64, epsilon: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("t = {t} must be non-negative")));
    }
    let lu = riesz_derivative_poly(&PolySpec::bump(6, 6), gamma, x)?;
    let u = manufactured_solution(x, t);
    Ok(-2.0 * u + u * u * u - epsilon * epsilon * (-t).exp() * lu)
}

/// The manufactured problem on a 1D grid, with the fractional part of the
/// forcing precomputed (it only scales with `e^{-t}` in time).
#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    grid: GridSpec,
    bump: Vec<f64>,
    fractional: Vec<f64>,
    epsilon: f64,
}

impl ManufacturedProblem {
    pub fn new(grid: GridSpec, gamma: f64, epsilon: f64) -> Result<Self> {
        if grid.dim != 1 || grid.a != 0.0 || grid.b != 1.0 {
            return Err(Error::InvalidArgument(
                "the manufactured problem is posed on [0,1] in one dimension".into(),
            ));
        }
        let p = PolySpec::bump(6, 6);
        let nodes = grid.interior_nodes();
        let fractional = nodes
            .iter()
            .map(|&x| riesz_derivative_poly(&p, gamma, x))
            .collect::<Result<Vec<_>>>()?;
        // Factored form: the expanded coefficients reach 924 and cancel.
        let bump = nodes
            .iter()
            .map(|&x| manufactured_solution(x, 0.0))
            .collect();
        Ok(Self {
            grid,
            bump,
            fractional,
            epsilon,
        })
    }

    pub fn exact(&self, t: f64) -> StateField {
        let decay = (-t).exp();
        StateField::new(self.grid, self.bump.iter().map(|b| decay * b).collect())
            .expect("grid-consistent by construction")
    }
}

impl SourceTerm for ManufacturedProblem {
    fn sample(&self, t: f64, out: &mut [f64]) {
        let decay = (-t).exp();
        let eps2 = self.epsilon * self.epsilon;
        for ((o, &b), &lu) in out.iter_mut().zip(&self.bump).zip(&self.fractional) {
            let u = decay * b;
            *o = -2.0 * u + u * u * u - eps2 * decay * lu;
        }
    }
}

/// Named initial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialProfile {
    /// `x^4 (1-x)^4`
    Poly4,
    /// `x^6 (1-x)^6`, the manufactured solution at `t = 0`
    Poly6Decay,
    /// `x^{3.5+γ} (1-x)^{3.5+γ} sin(πx)`
    Maxprinciple,
}

impl std::str::FromStr for InitialProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poly4" => Ok(Self::Poly4),
            "poly6_decay" => Ok(Self::Poly6Decay),
            "maxprinciple" => Ok(Self::Maxprinciple),
            other => Err(Error::InvalidArgument(format!(
                "unknown initial profile '{other}' (poly4, poly6_decay, maxprinciple)"
            ))),
        }
    }
}

impl InitialProfile {
    /// Profile value at a point of `[0,1]` (mapped from the grid's domain).
    pub fn eval(self, x: f64, gamma: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            Self::Poly4 => (x * (1.0 - x)).powi(4),
            Self::Poly6Decay => (x * (1.0 - x)).powi(6),
            Self::Maxprinciple => (x * (1.0 - x)).powf(3.5 + gamma) * (PI * x).sin(),
        }
    }
}

/// Sample a named profile at the interior nodes. The grid's domain is mapped
/// affinely onto `[0,1]`; in `d > 1` the profile is the tensor product over axes.
pub fn example_initials(name: InitialProfile, grid: &GridSpec, gamma: f64) -> StateField {
    let (a, len) = (grid.a, grid.b - grid.a);
    StateField::from_fn(*grid, |coords| {
        coords
            .iter()
            .map(|&x| name.eval((x - a) / len, gamma))
            .product()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_expansion() {
        let p = PolySpec::bump(4, 4);
        assert_eq!(p.coeffs(), &[0.0, 0.0, 0.0, 0.0, 1.0, -4.0, 6.0, -4.0, 1.0]);
        assert_eq!(p.eval(0.5), 0.5f64.powi(8));
        let r = p.reflected();
        // x^4(1-x)^4 is symmetric under x -> 1-x
        assert_eq!(r, p.coeffs());
    }

    #[test]
    fn gamma_two_is_second_derivative() {
        let p = PolySpec::bump(4, 4);
        let exact = p.second_derivative().eval(0.5);
        // u = v^4 with v = x(1-x): u'' = 12 v^2 v'^2 + 4 v^3 v'', and v'(1/2) = 0.
        assert!((exact - (-0.125)).abs() < 1e-15);
        let v = riesz_derivative_poly(&p, 2.0, 0.5).unwrap();
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }

    #[test]
    fn zero_polynomial() {
        for g in [0.3, 1.5, 2.0] {
            assert_eq!(
                riesz_derivative_poly(&PolySpec::zero(), g, 0.3).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn domain_errors() {
        let p = PolySpec::bump(4, 4);
        assert!(riesz_derivative_poly(&p, 1.0, 0.5).is_err());
        assert!(riesz_derivative_poly(&p, 1.5, 0.0).is_err());
        assert!(riesz_derivative_poly(&p, 1.5, 1.0).is_err());
        assert!(riesz_derivative_poly(&PolySpec::new(vec![1.0]), 1.5, 0.5).is_err());
    }

    #[test]
    fn source_without_diffusion() {
        for &(x, t) in &[(0.3, 0.0), (0.5, 0.7), (0.9, 2.0)] {
            let u = manufactured_solution(x, t);
            let s = manufactured_source(x, t, 2.0, 0.0).unwrap();
            assert!((s - (-2.0 * u + u * u * u)).abs() < 1e-18);
        }
    }

    #[test]
    fn source_matches_display_form() {
        // The forcing written term by term with the Riemann–Liouville sums of
        // x^6(1-x)^6 = Σ_l (-1)^l C(6,l) x^{6+l}.
        let (x, t, g, eps): (f64, f64, f64, f64) = (0.37, 0.4, 1.4, 0.05);
        let mut sum = 0.0;
        for l in 0..=6u32 {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            let k = 6.0 + l as f64;
            let c = sign * 720.0 * gamma_fn(k + 1.0)
                / (gamma_fn(l as f64 + 1.0) * gamma_fn(7.0 - l as f64) * gamma_fn(k + 1.0 - g));
            sum += c * (x.powf(k - g) + (1.0 - x).powf(k - g));
        }
        let u = manufactured_solution(x, t);
        let display =
            u.powi(3) - 2.0 * u + eps * eps * (-t).exp() / (2.0 * (PI * g / 2.0).cos()) * sum;
        let s = manufactured_source(x, t, g, eps).unwrap();
        assert!((s - display).abs() < 1e-15, "{s} vs {display}");
    }

    #[test]
    fn source_regression_constant() {
        // Reference values from a 40-digit evaluation of the monomial sums.
        let lu = riesz_derivative_poly(&PolySpec::bump(6, 6), 1.4, 0.5).unwrap();
        // The alternating degree-12 sum loses about three digits to cancellation.
        assert!((lu - (-3.142_348_679_087_803e-3)).abs() < 5e-14, "{lu}");
        let s = manufactured_source(0.5, 0.0, 1.4, 0.001).unwrap();
        assert!((s - (-4.882_780_930_994_057e-4)).abs() < 1e-19, "{s}");
    }

    #[test]
    fn initial_profiles() {
        let grid = GridSpec::unit(100).unwrap();
        let u = example_initials(InitialProfile::Maxprinciple, &grid, 1.5);
        assert!(u.max_norm() < 1e-3);
        assert_eq!(InitialProfile::Maxprinciple.eval(0.0, 1.5), 0.0);
        assert!(InitialProfile::Maxprinciple.eval(1.0, 1.5).abs() < 1e-300);
        let p4 = example_initials(InitialProfile::Poly4, &GridSpec::unit(4).unwrap(), 1.5);
        assert_eq!(p4.values()[1], 0.00390625);
    }

    #[test]
    fn manufactured_problem_matches_pointwise_source() {
        let grid = GridSpec::unit(10).unwrap();
        let prob = ManufacturedProblem::new(grid, 1.6, 0.01).unwrap();
        let mut out = vec![0.0; 9];
        prob.sample(0.3, &mut out);
        for (j, &x) in grid.interior_nodes().iter().enumerate() {
            let s = manufactured_source(x, 0.3, 1.6, 0.01).unwrap();
            assert!((out[j] - s).abs() < 1e-16);
        }
    }
}
