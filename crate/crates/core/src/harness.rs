//! Convergence studies and the maximum-principle and energy sweeps.
//!
//! Independent cells run concurrently on the rayon pool; each cell is a
//! sequential computation and results are assembled in input order, so the
//! reported numbers do not depend on the thread count. Wall-clock timings are
//! kept in a separate field that serialization skips.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_oracle::{
    example_initials, riesz_derivative_poly, InitialProfile, ManufacturedProblem, PolySpec,
};
use crate::riesz_op::{apply_riesz_formula, GridSpec, RieszOperator};
use crate::stepper::{run, Monitors, SolverConfig};

pub const TABLE1_GAMMAS: [f64; 6] = [1.1, 1.3, 1.5, 1.7, 1.9, 2.0];
pub const TABLE2_GAMMAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const TABLE_HS: [f64; 5] = [1.0 / 20.0, 1.0 / 30.0, 1.0 / 40.0, 1.0 / 50.0, 1.0 / 60.0];
pub const TABLE3_GAMMAS: [f64; 4] = [1.2, 1.4, 1.6, 1.8];
pub const TABLE3_LADDER: [(f64, f64); 3] = [
    (1.0 / 8.0, 1.0 / 8.0),
    (1.0 / 64.0, 1.0 / 16.0),
    (1.0 / 512.0, 1.0 / 32.0),
];
pub const TABLE3_EPSILON: f64 = 0.001;
pub const TABLE3_T: f64 = 1.0;

pub const MAXPRINCIPLE_GAMMAS: [f64; 3] = [1.2, 1.5, 1.8];
pub const MAXPRINCIPLE_TAUS: [f64; 4] = [1.0, 0.5, 0.1, 0.05];
pub const MAXPRINCIPLE_H: f64 = 0.01;
pub const MAXPRINCIPLE_EPSILON: f64 = 0.1;
/// Horizon for the maximum-principle and energy runs.
pub const MAXPRINCIPLE_T: f64 = 20.0;
/// Slack above 1 before a max-norm sample counts as an excursion.
pub const EXCURSION_TOL: f64 = 1e-12;
/// Slack for a per-step energy increase.
pub const ENERGY_TOL: f64 = 1e-12;

/// Nodes over which the error maximum is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorRegion {
    /// Every interior node.
    #[default]
    Interior,
    /// Interior nodes with `x ∈ [1/4, 3/4]`. Nodes near the boundary see the
    /// zero extension of the test function, whose derivatives jump there,
    /// and converge at a lower rate.
    Central,
}

impl ErrorRegion {
    fn contains(self, x: f64) -> bool {
        match self {
            Self::Interior => true,
            Self::Central => (0.25 - 1e-12..=0.75 + 1e-12).contains(&x),
        }
    }
}

impl std::str::FromStr for ErrorRegion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(Self::Interior),
            "central" => Ok(Self::Central),
            other => Err(Error::InvalidArgument(format!(
                "unknown error region '{other}' (interior or central)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub label: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub gamma: f64,
    pub tau: Option<f64>,
    pub h: f64,
    pub max_abs_error: f64,
    pub temporal_order: Option<f64>,
    pub spatial_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceMeta {
    pub study: String,
    pub oracle: String,
    pub region: ErrorRegion,
    pub epsilon: Option<f64>,
    pub t_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub meta: ConvergenceMeta,
    pub rows: Vec<ConvergenceRow>,
    #[serde(skip)]
    pub timings: Vec<CellTiming>,
}

impl ConvergenceReport {
    pub fn rows_for(&self, gamma: f64) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |r| r.gamma == gamma)
    }

    pub fn cell(&self, gamma: f64, h: f64) -> Option<&ConvergenceRow> {
        self.rows_for(gamma).find(|r| (r.h - h).abs() <= 1e-12 * h)
    }
}

/// Number of subintervals of `[0,1]` for mesh width `h`.
pub fn subintervals(h: f64) -> Result<usize> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mesh width h = {h} must lie in (0,1)"
        )));
    }
    let m = (1.0 / h).round();
    if (m * h - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "1/h = {} is not an integer number of subintervals",
            1.0 / h
        )));
    }
    Ok(m as usize)
}

fn observed_order(e_prev: f64, e_cur: f64, step_prev: f64, step_cur: f64) -> f64 {
    (e_prev / e_cur).ln() / (step_prev / step_cur).ln()
}

fn fill_orders(rows: &mut [ConvergenceRow], temporal: bool) {
    for i in 1..rows.len() {
        let (p, c) = (&rows[i - 1], &rows[i]);
        if p.gamma != c.gamma {
            continue;
        }
        let spatial = observed_order(p.max_abs_error, c.max_abs_error, p.h, c.h);
        let temporal_order = match (temporal, p.tau, c.tau) {
            (true, Some(tp), Some(tc)) => {
                Some(observed_order(p.max_abs_error, c.max_abs_error, tp, tc))
            }
            _ => None,
        };
        rows[i].spatial_order = Some(spatial);
        rows[i].temporal_order = temporal_order;
    }
}

fn check_decreasing(label: &str, xs: &[f64]) -> Result<()> {
    if xs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "{label} must be strictly decreasing"
        )));
    }
    Ok(())
}

/// Max error of the discrete formula against the exact Riesz derivative of
/// `x⁴(1-x)⁴` on one grid.
pub fn formula_error(gamma: f64, h: f64, region: ErrorRegion) -> Result<f64> {
    let m = subintervals(h)?;
    let p = PolySpec::bump(4, 4);
    let hh = 1.0 / m as f64;
    let samples: Vec<f64> = (0..=m)
        .map(|j| InitialProfile::Poly4.eval(j as f64 * hh, gamma))
        .collect();
    let approx = apply_riesz_formula(gamma, hh, &samples)?;
    let mut err: f64 = 0.0;
    for (i, a) in approx.iter().enumerate() {
        let x = (i + 1) as f64 * hh;
        if region.contains(x) {
            err = err.max((a - riesz_derivative_poly(&p, gamma, x)?).abs());
        }
    }
    Ok(err)
}

/// Errors and observed orders of the spatial formula on `x⁴(1-x)⁴`.
pub fn convergence_space_formula(
    gammas: &[f64],
    hs: &[f64],
    region: ErrorRegion,
) -> Result<ConvergenceReport> {
    check_decreasing("mesh widths", hs)?;
    let cells: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&g| hs.iter().map(move |&h| (g, h)))
        .collect();
    let results: Vec<(ConvergenceRow, CellTiming)> = cells
        .par_iter()
        .map(|&(gamma, h)| {
            let start = Instant::now();
            let e = formula_error(gamma, h, region)?;
            Ok((
                ConvergenceRow {
                    gamma,
                    tau: None,
                    h,
                    max_abs_error: e,
                    temporal_order: None,
                    spatial_order: None,
                },
                CellTiming {
                    label: format!("gamma={gamma} h={h}"),
                    seconds: start.elapsed().as_secs_f64(),
                },
            ))
        })
        .collect::<Result<_>>()?;
    let (mut rows, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    fill_orders(&mut rows, false);
    Ok(ConvergenceReport {
        meta: ConvergenceMeta {
            study: "formula".into(),
            oracle: "exact Riesz derivative of x^4(1-x)^4".into(),
            region,
            epsilon: None,
            t_final: None,
        },
        rows,
        timings,
    })
}

/// Max error at `t = T` of the forced Allen–Cahn problem with exact solution
/// `e^{-t} x⁶(1-x)⁶` on one `(τ, h)` cell.
pub fn full_scheme_error(
    gamma: f64,
    tau: f64,
    h: f64,
    epsilon: f64,
    t_final: f64,
    region: ErrorRegion,
) -> Result<f64> {
    let grid = GridSpec::unit(subintervals(h)?)?;
    let mut cfg = SolverConfig::new(grid, gamma, epsilon, tau, t_final)?;
    cfg.monitors = Monitors {
        max_norm: false,
        energy: false,
        snapshots: false,
    };
    let prob = ManufacturedProblem::new(grid, gamma, epsilon)?;
    let rec = run(&cfg, &prob.exact(0.0), Some(&prob))?;
    let exact = prob.exact(t_final);
    let nodes = grid.interior_nodes();
    Ok(rec
        .final_state
        .values()
        .iter()
        .zip(exact.values())
        .zip(&nodes)
        .filter(|(_, &x)| region.contains(x))
        .map(|((a, b), _)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Joint space-time refinement study on the manufactured problem at `t = 1`.
/// The temporal order is taken against the τ ratio and the spatial order
/// against the h ratio of the same error drop.
pub fn convergence_full(
    gammas: &[f64],
    ladder: &[(f64, f64)],
    epsilon: f64,
    region: ErrorRegion,
) -> Result<ConvergenceReport> {
    check_decreasing(
        "ladder steps",
        &ladder.iter().map(|p| p.0).collect::<Vec<_>>(),
    )?;
    check_decreasing(
        "ladder mesh widths",
        &ladder.iter().map(|p| p.1).collect::<Vec<_>>(),
    )?;
    let cells: Vec<(f64, f64, f64)> = gammas
        .iter()
        .flat_map(|&g| ladder.iter().map(move |&(t, h)| (g, t, h)))
        .collect();
    let results: Vec<(ConvergenceRow, CellTiming)> = cells
        .par_iter()
        .map(|&(gamma, tau, h)| {
            let start = Instant::now();
            let e = full_scheme_error(gamma, tau, h, epsilon, TABLE3_T, region)?;
            Ok((
                ConvergenceRow {
                    gamma,
                    tau: Some(tau),
                    h,
                    max_abs_error: e,
                    temporal_order: None,
                    spatial_order: None,
                },
                CellTiming {
                    label: format!("gamma={gamma} tau={tau} h={h}"),
                    seconds: start.elapsed().as_secs_f64(),
                },
            ))
        })
        .collect::<Result<_>>()?;
    let (mut rows, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    fill_orders(&mut rows, true);
    Ok(ConvergenceReport {
        meta: ConvergenceMeta {
            study: "allen_cahn_forced".into(),
            oracle: "manufactured solution exp(-t) x^6 (1-x)^6".into(),
            region,
            epsilon: Some(epsilon),
            t_final: Some(TABLE3_T),
        },
        rows,
        timings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxNormSeries {
    pub gamma: f64,
    pub tau: f64,
    pub times: Vec<f64>,
    pub max_norms: Vec<f64>,
    pub initial_max: f64,
    pub series_max: f64,
    /// Samples above `1 + EXCURSION_TOL`.
    pub excursions: usize,
    pub first_excursion_time: Option<f64>,
    /// `‖B‖_∞` of the 1D propagator, for diagnosing excursions.
    pub b_infinity_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub h: f64,
    pub epsilon: f64,
    pub t_final: f64,
    pub series: Vec<MaxNormSeries>,
    pub global_max: f64,
    pub bounded: bool,
    #[serde(skip)]
    pub timings: Vec<CellTiming>,
}

/// Unforced runs from `x^{3.5+γ}(1-x)^{3.5+γ} sin(πx)` for every `(γ, τ)`.
pub fn max_principle_experiment(
    gammas: &[f64],
    taus: &[f64],
    h: f64,
    epsilon: f64,
    t_final: f64,
) -> Result<MaxPrincipleReport> {
    let grid = GridSpec::unit(subintervals(h)?)?;
    let cells: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&g| taus.iter().map(move |&t| (g, t)))
        .collect();
    let results: Vec<(MaxNormSeries, CellTiming)> = cells
        .par_iter()
        .map(|&(gamma, tau)| {
            let start = Instant::now();
            let mut cfg = SolverConfig::new(grid, gamma, epsilon, tau, t_final)?;
            cfg.monitors = Monitors {
                max_norm: true,
                energy: false,
                snapshots: false,
            };
            let u0 = example_initials(InitialProfile::Maxprinciple, &grid, gamma);
            let rec = run(&cfg, &u0, None)?;
            let max_norms = rec.max_norms.unwrap_or_default();
            let limit = 1.0 + EXCURSION_TOL;
            let first = max_norms.iter().position(|&m| m > limit);
            let op = RieszOperator::new(grid, gamma, epsilon)?;
            Ok((
                MaxNormSeries {
                    gamma,
                    tau,
                    initial_max: max_norms[0],
                    series_max: max_norms.iter().copied().fold(0.0, f64::max),
                    excursions: max_norms.iter().filter(|&&m| m > limit).count(),
                    first_excursion_time: first.map(|k| rec.times[k]),
                    b_infinity_norm: op.b_infinity_norm(tau)?,
                    times: rec.times,
                    max_norms,
                },
                CellTiming {
                    label: format!("gamma={gamma} tau={tau}"),
                    seconds: start.elapsed().as_secs_f64(),
                },
            ))
        })
        .collect::<Result<_>>()?;
    let (series, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let global_max = series.iter().map(|s| s.series_max).fold(0.0, f64::max);
    Ok(MaxPrincipleReport {
        h,
        epsilon,
        t_final,
        bounded: series.iter().all(|s| s.excursions == 0),
        global_max,
        series,
        timings,
    })
}

/// How the energy run picks its step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauChoice {
    Fixed(f64),
    /// The largest `T/N` not exceeding this fraction of the energy bound.
    FractionOfBound(f64),
}

/// Largest `τ = T/N` with `τ ≤ target`.
pub fn commensurate_tau(t_final: f64, target: f64) -> Result<f64> {
    if !(target > 0.0 && t_final > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step target {target} and horizon {t_final} must be positive"
        )));
    }
    let n = (t_final / target).ceil().max(1.0);
    Ok(t_final / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub gamma: f64,
    pub tau: f64,
    pub h: f64,
    pub epsilon: f64,
    pub t_final: f64,
    pub tau_bound: f64,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub monotone: bool,
    /// Largest `E_{k+1} - E_k` (negative when strictly decreasing).
    pub max_increase: f64,
    #[serde(skip)]
    pub timings: Vec<CellTiming>,
}

/// Unforced run from the maximum-principle initial profile with the energy
/// monitor on.
pub fn energy_experiment(
    gamma: f64,
    tau: TauChoice,
    h: f64,
    epsilon: f64,
    t_final: f64,
) -> Result<EnergyReport> {
    let start = Instant::now();
    let grid = GridSpec::unit(subintervals(h)?)?;
    let op = RieszOperator::new(grid, gamma, epsilon)?;
    let bound = op.energy_stability_tau_bound()?;
    let tau = match tau {
        TauChoice::Fixed(t) => t,
        TauChoice::FractionOfBound(f) => {
            if f.is_nan() || f <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "bound fraction {f} must be positive"
                )));
            }
            commensurate_tau(t_final, f * bound)?
        }
    };
    let mut cfg = SolverConfig::new(grid, gamma, epsilon, tau, t_final)?;
    cfg.monitors = Monitors {
        max_norm: false,
        energy: true,
        snapshots: false,
    };
    let u0 = example_initials(InitialProfile::Maxprinciple, &grid, gamma);
    let rec = run(&cfg, &u0, None)?;
    let energies = rec.energies.unwrap_or_default();
    let max_increase = energies
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyReport {
        gamma,
        tau,
        h,
        epsilon,
        t_final,
        tau_bound: bound,
        times: rec.times,
        monotone: max_increase <= ENERGY_TOL,
        max_increase,
        energies,
        timings: vec![CellTiming {
            label: format!("gamma={gamma} tau={tau}"),
            seconds: start.elapsed().as_secs_f64(),
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subinterval_counts() {
        assert_eq!(subintervals(1.0 / 60.0).unwrap(), 60);
        assert_eq!(subintervals(0.01).unwrap(), 100);
        assert!(subintervals(0.3).is_err());
        assert!(subintervals(0.0).is_err());
    }

    #[test]
    fn orders_only_within_gamma() {
        let r =
            convergence_space_formula(&[1.5, 2.0], &[1.0 / 20.0, 1.0 / 40.0], ErrorRegion::Central)
                .unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.rows[0].spatial_order.is_none());
        assert!(r.rows[2].spatial_order.is_none());
        assert!(r.rows[1].spatial_order.unwrap() > 5.9);
        assert!((r.rows[3].spatial_order.unwrap() - 6.0).abs() < 1e-3);
        assert!(r.rows.iter().all(|r| r.temporal_order.is_none()));
    }

    #[test]
    fn ladder_must_refine() {
        assert!(convergence_space_formula(&[1.5], &[0.05, 0.1], ErrorRegion::Interior).is_err());
    }

    #[test]
    fn commensurate_steps() {
        let t = commensurate_tau(20.0, 0.3).unwrap();
        assert!(t <= 0.3);
        assert!((20.0 / t - 67.0).abs() < 1e-12);
        assert_eq!(commensurate_tau(1.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn serialization_skips_timings() {
        let r = convergence_space_formula(&[1.5], &[0.05], ErrorRegion::Central).unwrap();
        assert_eq!(r.timings.len(), 1);
        let s = serde_json::to_string(&r).unwrap();
        assert!(!s.contains("seconds"));
    }
}
