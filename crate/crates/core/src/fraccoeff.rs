//! Sixth-order fractional difference weights `g_m` for the Riesz derivative.
//!
//! The weights are the Laurent coefficients of the generating function
//!
//! ```text
//! G(w) = (2 - w - 1/w)^{γ/2} [1 + γ/24 (2 - w - 1/w) + γ(5γ+22)/5760 (2 - w - 1/w)^2]
//! ```
//!
//! and have the Gamma-function closed form implemented in
//! [`coefficient_closed_form`]. [`coefficient_quadrature`] evaluates the same
//! Fourier integral numerically and exists only as an independent check.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Weights at γ = 2, where the closed form has removable singularities.
/// This is the classical sixth-order central stencil for `u''` (with sign flipped).
pub const GAMMA_TWO_STENCIL: [f64; 4] = [49.0 / 18.0, -3.0 / 2.0, 3.0 / 20.0, -1.0 / 90.0];

/// Check that `gamma` lies in (0,1) ∪ (1,2].
pub fn check_order(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma <= 0.0 || gamma > 2.0 {
        return Err(Error::Domain(format!(
            "fractional order gamma = {gamma} must lie in (0,1) or (1,2]"
        )));
    }
    if gamma == 1.0 {
        return Err(Error::Domain(
            "fractional order gamma = 1 is excluded: the Riesz prefactor 1/cos(pi*gamma/2) is singular"
                .into(),
        ));
    }
    Ok(())
}

/// `g_m^{(γ)}` from the Gamma-function closed form.
pub fn coefficient_closed_form(gamma: f64, m: i64) -> Result<f64> {
    check_order(gamma)?;
    Ok(closed_form_unchecked(gamma, m.unsigned_abs()))
}

fn closed_form_unchecked(gamma: f64, m: u64) -> f64 {
    if gamma == 2.0 {
        return GAMMA_TWO_STENCIL.get(m as usize).copied().unwrap_or(0.0);
    }
    let mf = m as f64;
    // (-1)^m Γ(γ+1) / (Γ(γ/2 - m + 1) Γ(γ/2 + m + 1)), assembled in log space.
    let (l_num, _) = ln_gamma(gamma + 1.0);
    let (l_lo, s_lo) = ln_gamma(gamma / 2.0 - mf + 1.0);
    let (l_hi, _) = ln_gamma(gamma / 2.0 + mf + 1.0);
    let parity = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let base = parity * s_lo * (l_num - l_lo - l_hi).exp();

    let a2 = gamma - 2.0 * mf + 2.0;
    let b2 = gamma + 2.0 * mf + 2.0;
    let a4 = gamma - 2.0 * mf + 4.0;
    let b4 = gamma + 2.0 * mf + 4.0;
    let c1 = gamma * (gamma + 1.0) * (gamma + 2.0);
    let c2 = c1 * (gamma + 3.0) * (gamma + 4.0) * (5.0 * gamma + 22.0);
    let bracket = 1.0 + c1 / (6.0 * a2 * b2) + c2 / (360.0 * a4 * a2 * b4 * b2);
    base * bracket
}

/// Fourier coefficient of `G(e^{is})` by the `n_samples`-point trapezoidal rule.
///
/// Test oracle only: the symbol has an `|s|^γ` cusp at the origin, so the
/// rule converges algebraically and needs many samples.
pub fn coefficient_quadrature(gamma: f64, m: i64, n_samples: usize) -> Result<f64> {
    check_order(gamma)?;
    if !n_samples.is_power_of_two() || n_samples < (1 << 14) {
        return Err(Error::InvalidArgument(format!(
            "n_samples = {n_samples} must be a power of two >= 2^14"
        )));
    }
    let c1 = gamma / 24.0;
    let c2 = gamma * (5.0 * gamma + 22.0) / 5760.0;
    let symbol = |s: f64| {
        // 2 - w - 1/w at w = e^{is}
        let x = 2.0 - 2.0 * s.cos();
        x.max(0.0).powf(gamma / 2.0) * (1.0 + c1 * x + c2 * x * x)
    };
    // The integrand is even in s, so fold the sum onto [0, π].
    let n = n_samples;
    let step = 2.0 * PI / n as f64;
    let mut sum = symbol(0.0) + symbol(PI) * (m as f64 * PI).cos();
    for k in 1..n / 2 {
        let s = k as f64 * step;
        sum += 2.0 * symbol(s) * (m as f64 * s).cos();
    }
    Ok(sum / n as f64)
}

/// Symbol of the Toeplitz matrix built from the weights:
/// `[1 + γ/6 sin²(z/2) + γ(5γ+22)/360 sin⁴(z/2)] (4 sin²(z/2))^{γ/2}`.
pub fn generating_function_value(gamma: f64, z: f64) -> Result<f64> {
    check_order(gamma)?;
    let s2 = (z / 2.0).sin().powi(2);
    let poly = 1.0 + gamma / 6.0 * s2 + gamma * (5.0 * gamma + 22.0) / 360.0 * s2 * s2;
    Ok(poly * (4.0 * s2).powf(gamma / 2.0))
}

/// The quintic whose root in (1,2] is where `g_{±2}` changes sign.
pub fn gamma_star_polynomial(gamma: f64) -> f64 {
    ((((5.0 * gamma + 132.0) * gamma + 1415.0) * gamma + 6900.0) * gamma + 9380.0) * gamma - 34032.0
}

fn gamma_star_polynomial_derivative(gamma: f64) -> f64 {
    (((25.0 * gamma + 528.0) * gamma + 4245.0) * gamma + 13800.0) * gamma + 9380.0
}

/// γ* ≈ 1.4746120, by Newton's method on [`gamma_star_polynomial`] from 1.5.
pub fn gamma_star() -> Result<f64> {
    static ROOT: OnceLock<std::result::Result<f64, Error>> = OnceLock::new();
    ROOT.get_or_init(|| {
        let mut g = 1.5;
        for _ in 0..100 {
            let p = gamma_star_polynomial(g);
            if p.abs() <= 1e-12 {
                return Ok(g);
            }
            g -= p / gamma_star_polynomial_derivative(g);
        }
        let p = gamma_star_polynomial(g);
        if p.abs() <= 1e-9 {
            // Rounding floor of the quintic near its root (|p'| ~ 3e4).
            return Ok(g);
        }
        Err(Error::NoConvergence {
            what: "gamma-star Newton iteration",
            iterations: 100,
            residual: p.abs(),
        })
    })
    .clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffMethod {
    ClosedForm,
    Quadrature,
}

/// Symmetric window `g_{-m_max} ..= g_{m_max}` of the weights.
///
/// Only `g_0..=g_{m_max}` is stored; negative indices read the mirrored
/// entry, so `get(m) == get(-m)` holds bitwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    gamma: f64,
    m_max: usize,
    values: Vec<f64>,
    method: CoeffMethod,
}

impl CoefficientTable {
    /// Closed-form table.
    pub fn new(gamma: f64, m_max: usize) -> Result<Self> {
        check_order(gamma)?;
        let values = (0..=m_max as u64)
            .map(|m| closed_form_unchecked(gamma, m))
            .collect();
        Ok(Self {
            gamma,
            m_max,
            values,
            method: CoeffMethod::ClosedForm,
        })
    }

    /// Quadrature table; slow, intended for cross-checks.
    pub fn from_quadrature(gamma: f64, m_max: usize, n_samples: usize) -> Result<Self> {
        let values = (0..=m_max as i64)
            .map(|m| coefficient_quadrature(gamma, m, n_samples))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            gamma,
            m_max,
            values,
            method: CoeffMethod::Quadrature,
        })
    }

    /// Shared closed-form table, built once per `(gamma, m_max)`.
    pub fn cached(gamma: f64, m_max: usize) -> Result<Arc<Self>> {
        type Cache = Mutex<HashMap<(u64, usize), Arc<CoefficientTable>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        check_order(gamma)?;
        let key = (gamma.to_bits(), m_max);
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().expect("coefficient cache poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(Self::new(gamma, m_max)?);
        let mut guard = cache.lock().expect("coefficient cache poisoned");
        Ok(Arc::clone(guard.entry(key).or_insert(table)))
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn method(&self) -> CoeffMethod {
        self.method
    }

    /// `g_m`; panics if `|m| > m_max`.
    #[inline]
    pub fn get(&self, m: i64) -> f64 {
        self.values[m.unsigned_abs() as usize]
    }

    /// `g_0, g_1, ..., g_{m_max}`.
    pub fn one_sided(&self) -> &[f64] {
        &self.values
    }

    /// `g_{-m_max}, ..., g_{m_max}`.
    pub fn two_sided(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.values.iter().rev().copied().collect();
        out.extend_from_slice(&self.values[1..]);
        out
    }

    /// `Σ_{|m| <= m_max} g_m`.
    pub fn window_sum(&self) -> f64 {
        // small terms first
        let tail: f64 = self.values[1..].iter().rev().sum();
        self.values[0] + 2.0 * tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Laurent coefficients of `x + x²/12 + x³/90` with `x = 2 - w - 1/w`,
    /// i.e. the generating function at γ = 2 expanded by polynomial products.
    fn gamma_two_by_expansion() -> Vec<f64> {
        // coefficient arrays indexed by m + 3, m in -3..=3
        let mul = |a: &[f64], b: &[f64]| {
            let mut out = vec![0.0; 7];
            for (i, x) in a.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    let k = i as i64 + j as i64 - 3;
                    if (0..7).contains(&k) {
                        out[k as usize] += x * y;
                    }
                }
            }
            out
        };
        let x = vec![0.0, 0.0, -1.0, 2.0, -1.0, 0.0, 0.0];
        let x2 = mul(&x, &x);
        let x3 = mul(&x2, &x);
        (0..7).map(|i| x[i] + x2[i] / 12.0 + x3[i] / 90.0).collect()
    }

    #[test]
    fn gamma_two_matches_generating_function_expansion() {
        let expanded = gamma_two_by_expansion();
        for m in -3i64..=3 {
            let c = coefficient_closed_form(2.0, m).unwrap();
            assert!((c - expanded[(m + 3) as usize]).abs() < 1e-15, "m = {m}");
        }
        for m in 4..50 {
            assert_eq!(coefficient_closed_form(2.0, m).unwrap(), 0.0);
        }
        assert_eq!(coefficient_closed_form(2.0, 0).unwrap(), 49.0 / 18.0);
        assert_eq!(coefficient_closed_form(2.0, -1).unwrap(), -1.5);
        assert_eq!(coefficient_closed_form(2.0, 2).unwrap(), 3.0 / 20.0);
        assert_eq!(coefficient_closed_form(2.0, -3).unwrap(), -1.0 / 90.0);
    }

    #[test]
    fn closed_form_tends_to_gamma_two_stencil() {
        for m in 0..4 {
            let near = coefficient_closed_form(2.0 - 1e-7, m).unwrap();
            assert!(
                (near - GAMMA_TWO_STENCIL[m as usize]).abs() < 1e-5,
                "m = {m}"
            );
        }
    }

    #[test]
    fn even_in_m() {
        let a = coefficient_closed_form(1.5, 5).unwrap();
        let b = coefficient_closed_form(1.5, -5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn domain_errors() {
        for g in [0.0, -0.5, 1.0, 2.0000001, f64::NAN] {
            assert!(matches!(
                coefficient_closed_form(g, 0),
                Err(Error::Domain(_))
            ));
        }
        assert!(coefficient_closed_form(0.3, 2).is_ok());
    }

    #[test]
    fn explicit_low_order_formulas() {
        // g_0 and g_1 in rational-times-Gamma form, written out independently.
        use crate::special::gamma as gf;
        for &g in &[1.1, 1.37, 1.5, 1.8, 1.99] {
            let g0 = (g + 2.0)
                * (g + 4.0)
                * ((((5.0 * g + 102.0) * g + 763.0) * g + 2466.0) * g + 2880.0)
                * gf(g + 1.0)
                / (5760.0 * gf(g / 2.0 + 3.0).powi(2));
            let g1 = -((((5.0 * g + 122.0) * g + 1171.0) * g + 5278.0) * g + 9624.0) * gf(g + 1.0)
                / (90.0 * g * (g + 2.0) * (g + 4.0) * (g + 6.0) * gf(g / 2.0).powi(2));
            let q1 = gf(g + 1.0)
                / (90.0 * g * (g + 2.0) * (g + 4.0) * (g + 6.0) * (g + 8.0) * gf(g / 2.0).powi(2));
            let g2 = gamma_star_polynomial(g) * q1;
            assert!((coefficient_closed_form(g, 0).unwrap() - g0).abs() < 1e-13);
            assert!((coefficient_closed_form(g, 1).unwrap() - g1).abs() < 1e-13);
            assert!((coefficient_closed_form(g, 2).unwrap() - g2).abs() < 1e-13);
        }
    }

    #[test]
    fn quadrature_gamma_two() {
        let q = coefficient_quadrature(2.0, 1, 1 << 16).unwrap();
        assert!((q + 1.5).abs() < 1e-9, "{q}");
    }

    #[test]
    fn quadrature_rejects_small_or_odd_sample_counts() {
        assert!(coefficient_quadrature(1.5, 0, 1000).is_err());
        assert!(coefficient_quadrature(1.5, 0, 1 << 10).is_err());
    }

    #[test]
    fn gamma_star_value() {
        let g = gamma_star().unwrap();
        assert!((g - 1.474_612_0).abs() < 5e-7, "{g}");
        assert!(gamma_star_polynomial(g).abs() < 1e-9);
        let below = coefficient_closed_form(g - 1e-3, 2).unwrap();
        let above = coefficient_closed_form(g + 1e-3, 2).unwrap();
        assert!(below < 0.0 && above > 0.0);
    }

    #[test]
    fn generating_function_examples() {
        assert_eq!(generating_function_value(1.5, 0.0).unwrap(), 0.0);
        // Symbol of the γ = 2 stencil at z = π: g0 + 2 Σ (-1)^m g_m = 272/45.
        let v = generating_function_value(2.0, PI).unwrap();
        assert!((v - 272.0 / 45.0).abs() < 1e-13, "{v}");
    }

    #[test]
    fn table_mirrors_bitwise() {
        let t = CoefficientTable::new(1.3, 40).unwrap();
        let two = t.two_sided();
        assert_eq!(two.len(), 81);
        for m in 0..=40usize {
            assert_eq!(two[40 + m].to_bits(), two[40 - m].to_bits());
        }
        assert_eq!(t.method(), CoeffMethod::ClosedForm);
    }

    #[test]
    fn cache_returns_shared_table() {
        let a = CoefficientTable::cached(1.7, 31).unwrap();
        let b = CoefficientTable::cached(1.7, 31).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
