//! Padé [1,1] integration-factor scheme for the fractional Allen–Cahn
//! equation
//!
//! ```text
//! U^{k+1} = B U^k + (τ/2) f(U^{k+1}) + (τ/2) B f(U^k),   f(u) = u - u³,
//! ```
//!
//! with `B = (I + τA/2)^{-1}(I - τA/2)`. The implicit part is diagonal, so
//! after one application of `B` each node solves its own monotone cubic.

mod cubic;
mod linear;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riesz_op::{GridSpec, RieszOperator, StateField};

pub use cubic::pointwise_cubic_solve;
pub use linear::{LinearSolveContext, SolveMode, SolveReport, DENSE_SOLVE_LIMIT};

/// Node count above which the nodewise cubic solves run in parallel.
const PAR_THRESHOLD: usize = 1 << 14;

/// Time-dependent forcing sampled at the interior nodes.
pub trait SourceTerm: Sync {
    fn sample(&self, t: f64, out: &mut [f64]);
}

/// Which per-step quantities a run records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monitors {
    pub max_norm: bool,
    pub energy: bool,
    pub snapshots: bool,
}

impl Default for Monitors {
    fn default() -> Self {
        Self {
            max_norm: true,
            energy: true,
            snapshots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub t_final: f64,
    pub grid: GridSpec,
    pub linear_tol: f64,
    pub cubic_tol: f64,
    pub monitors: Monitors,
    pub snapshot_stride: usize,
    /// Force a linear-solve mode instead of the size-based default.
    pub solve_mode: Option<SolveMode>,
}

pub const DEFAULT_LINEAR_TOL: f64 = 1e-12;
pub const DEFAULT_CUBIC_TOL: f64 = 1e-14;

impl SolverConfig {
    /// Config with default tolerances and monitors, validated.
    pub fn new(grid: GridSpec, gamma: f64, epsilon: f64, tau: f64, t_final: f64) -> Result<Self> {
        let cfg = Self {
            gamma,
            epsilon,
            tau,
            t_final,
            grid,
            linear_tol: DEFAULT_LINEAR_TOL,
            cubic_tol: DEFAULT_CUBIC_TOL,
            monitors: Monitors::default(),
            snapshot_stride: 1,
            solve_mode: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0 && self.gamma <= 2.0) {
            return Err(Error::Domain(format!(
                "gamma = {} must lie in (1,2] for the Allen-Cahn stepper",
                self.gamma
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Domain(format!(
                "epsilon = {} must be positive",
                self.epsilon
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 2.0) {
            return Err(Error::Domain(format!(
                "tau = {} must lie in (0, 2] (the nodewise cubic loses monotonicity above 2)",
                self.tau
            )));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "T = {} must be positive",
                self.t_final
            )));
        }
        self.n_steps()?;
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "linear_tol = {} must lie in (0, 1)",
                self.linear_tol
            )));
        }
        if !(self.cubic_tol > 0.0 && self.cubic_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cubic_tol = {} must be positive",
                self.cubic_tol
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidArgument(
                "snapshot_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// `N = T/τ`, which must be an integer up to a relative 1e-12.
    pub fn n_steps(&self) -> Result<usize> {
        let ratio = self.t_final / self.tau;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-12 * n.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "T/tau = {ratio} is not an integer number of steps"
            )));
        }
        Ok(n as usize)
    }

    /// `t_k = k τ`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.tau
    }
}

/// Theorem hypothesis not met by a run; reported, never fatal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    /// `0 < τ ≤ 1` is required for the discrete maximum principle.
    MaxPrincipleStep,
    /// `τ` above the energy-stability step bound.
    EnergyStep,
    /// Unforced run started with `‖U⁰‖_∞ > 1`.
    InitialBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunWarning {
    pub kind: WarningKind,
    pub message: String,
}

/// Hypothesis checks for a config. `initial_max` is `None` for forced runs.
pub fn theory_warnings(cfg: &SolverConfig, initial_max: Option<f64>) -> Result<Vec<RunWarning>> {
    let mut out = Vec::new();
    if cfg.tau > 1.0 {
        out.push(RunWarning {
            kind: WarningKind::MaxPrincipleStep,
            message: format!(
                "tau = {} violates the maximum-principle step condition 0 < tau <= 1",
                cfg.tau
            ),
        });
    }
    let op = RieszOperator::new(cfg.grid, cfg.gamma, cfg.epsilon)?;
    let bound = op.energy_stability_tau_bound()?;
    if cfg.tau > bound {
        out.push(RunWarning {
            kind: WarningKind::EnergyStep,
            message: format!(
                "tau = {} exceeds the energy-stability step bound {bound:.6e}",
                cfg.tau
            ),
        });
    }
    if let Some(m) = initial_max {
        if m > 1.0 {
            out.push(RunWarning {
                kind: WarningKind::InitialBound,
                message: format!(
                    "initial max norm {m} exceeds 1; the maximum principle does not apply"
                ),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub cg_iterations: usize,
    pub linear_residual: Option<f64>,
    pub cubic_max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// `t_0, ..., t_N`.
    pub times: Vec<f64>,
    pub max_norms: Option<Vec<f64>>,
    pub energies: Option<Vec<f64>>,
    pub snapshots: Vec<(f64, StateField)>,
    /// One entry per step, `N` in total.
    pub step_reports: Vec<StepReport>,
    pub warnings: Vec<RunWarning>,
    pub final_state: StateField,
}

/// Forcing samples at the two ends of a step.
#[derive(Debug, Clone, Copy)]
pub struct SourcePair<'a> {
    pub now: &'a [f64],
    pub next: &'a [f64],
}

#[inline]
fn reaction(u: f64) -> f64 {
    u - u * u * u
}

/// One step `U^k -> U^{k+1}`:
/// `r = B(U + (τ/2) f(U) [+ (τ/2) s_k]) [+ (τ/2) s_{k+1}]`, then the nodewise
/// cubic `(1 - τ/2) u + (τ/2) u³ = r`.
pub fn step(
    ctx: &LinearSolveContext,
    u: &StateField,
    source: Option<SourcePair<'_>>,
    cubic_tol: f64,
) -> Result<(StateField, StepReport)> {
    let grid = ctx.operator().grid();
    if u.grid() != grid {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            got: u.values().len(),
        });
    }
    let tau = ctx.tau();
    if !(tau > 0.0 && tau <= 2.0) {
        return Err(Error::Domain(format!("tau = {tau} outside (0, 2]")));
    }
    let half = 0.5 * tau;
    let n = u.values().len();
    if let Some(s) = &source {
        if s.now.len() != n || s.next.len() != n {
            return Err(Error::GridMismatch {
                expected: n,
                got: s.now.len().min(s.next.len()),
            });
        }
    }

    let mut v: Vec<f64> = u.values().iter().map(|&x| x + half * reaction(x)).collect();
    if let Some(s) = &source {
        v.iter_mut()
            .zip(s.now)
            .for_each(|(vi, si)| *vi += half * si);
    }
    let mut r = vec![0.0; n];
    let solve = ctx.apply_b_into(&v, &mut r)?;
    if let Some(s) = &source {
        r.iter_mut()
            .zip(s.next)
            .for_each(|(ri, si)| *ri += half * si);
    }

    let a = 1.0 - half;
    let node = |ri: f64| {
        let x = cubic::solve_unchecked(ri, tau, cubic_tol);
        (x, (a * x + half * x * x * x - ri).abs())
    };
    let solved: Vec<(f64, f64)> = if n >= PAR_THRESHOLD {
        r.par_iter().map(|&ri| node(ri)).collect()
    } else {
        r.iter().map(|&ri| node(ri)).collect()
    };
    let cubic_max_residual = solved.iter().map(|p| p.1).fold(0.0, f64::max);
    let values: Vec<f64> = solved.into_iter().map(|p| p.0).collect();
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::LinearSolver(
            "step produced non-finite values".into(),
        ));
    }
    Ok((
        StateField::from_parts_unchecked(*grid, values),
        StepReport {
            cg_iterations: solve.iterations,
            linear_residual: solve.residual,
            cubic_max_residual,
        },
    ))
}

/// `E_h(U) = h^d Σ (u²-1)²/4 + (h^d/2) Uᵀ A U`.
pub fn discrete_energy(op: &RieszOperator, u: &StateField) -> Result<f64> {
    let path = if op.grid().n_axis() <= 64 {
        crate::riesz_op::ApplyPath::Dense
    } else {
        crate::riesz_op::ApplyPath::Fft
    };
    let au = op.apply(u, path)?;
    let w = op.grid().cell_volume();
    let potential: f64 = u
        .values()
        .iter()
        .map(|&x| 0.25 * (x * x - 1.0).powi(2))
        .sum();
    let quad: f64 = u.values().iter().zip(au.values()).map(|(a, b)| a * b).sum();
    Ok(w * potential + 0.5 * w * quad)
}

/// Run `N = T/τ` steps from `initial`, recording the enabled monitors at
/// `t_0, ..., t_N`.
pub fn run(
    cfg: &SolverConfig,
    initial: &StateField,
    source: Option<&dyn SourceTerm>,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if initial.grid() != &cfg.grid {
        return Err(Error::GridMismatch {
            expected: cfg.grid.len(),
            got: initial.values().len(),
        });
    }
    let n_steps = cfg.n_steps()?;
    let warnings = theory_warnings(cfg, source.is_none().then(|| initial.max_norm()))?;
    for w in &warnings {
        log::warn!("{}", w.message);
    }

    let op = RieszOperator::new(cfg.grid, cfg.gamma, cfg.epsilon)?;
    let ctx = match cfg.solve_mode {
        Some(mode) => LinearSolveContext::with_mode(op.clone(), cfg.tau, cfg.linear_tol, mode)?,
        None => LinearSolveContext::new(op.clone(), cfg.tau, cfg.linear_tol)?,
    };
    log::debug!(
        "run: gamma={} eps={} tau={} N={} unknowns={} mode={:?}",
        cfg.gamma,
        cfg.epsilon,
        cfg.tau,
        n_steps,
        cfg.grid.len(),
        ctx.mode()
    );

    let mon = cfg.monitors;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut max_norms = mon.max_norm.then(|| Vec::with_capacity(n_steps + 1));
    let mut energies = mon.energy.then(|| Vec::with_capacity(n_steps + 1));
    let mut snapshots = Vec::new();
    let mut step_reports = Vec::with_capacity(n_steps);

    let mut record = |k: usize, u: &StateField| -> Result<()> {
        let t = cfg.time(k);
        times.push(t);
        if let Some(m) = max_norms.as_mut() {
            m.push(u.max_norm());
        }
        if let Some(e) = energies.as_mut() {
            e.push(discrete_energy(&op, u)?);
        }
        if mon.snapshots && (k.is_multiple_of(cfg.snapshot_stride) || k == n_steps) {
            snapshots.push((t, u.clone()));
        }
        Ok(())
    };

    let len = cfg.grid.len();
    let mut s_now = vec![0.0; len];
    let mut s_next = vec![0.0; len];
    if let Some(src) = source {
        src.sample(cfg.time(0), &mut s_now);
    }

    let mut u = initial.clone();
    record(0, &u)?;
    for k in 0..n_steps {
        let pair = match source {
            Some(src) => {
                src.sample(cfg.time(k + 1), &mut s_next);
                Some(SourcePair {
                    now: &s_now,
                    next: &s_next,
                })
            }
            None => None,
        };
        let (next, report) = step(&ctx, &u, pair, cfg.cubic_tol)?;
        u = next;
        step_reports.push(report);
        record(k + 1, &u)?;
        if source.is_some() {
            std::mem::swap(&mut s_now, &mut s_next);
        }
    }

    Ok(TrajectoryRecord {
        times,
        max_norms,
        energies,
        snapshots,
        step_reports,
        warnings,
        final_state: u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_oracle::{example_initials, InitialProfile, ManufacturedProblem};

    fn cfg(m: usize, gamma: f64, eps: f64, tau: f64, t: f64) -> SolverConfig {
        SolverConfig::new(GridSpec::unit(m).unwrap(), gamma, eps, tau, t).unwrap()
    }

    #[test]
    fn config_validation() {
        let g = GridSpec::unit(16).unwrap();
        assert!(SolverConfig::new(g, 0.5, 0.1, 0.1, 1.0).is_err());
        assert!(SolverConfig::new(g, 1.5, 0.0, 0.1, 1.0).is_err());
        assert!(SolverConfig::new(g, 1.5, 0.1, 0.0, 1.0).is_err());
        assert!(SolverConfig::new(g, 1.5, 0.1, 0.3, 1.0).is_err());
        assert_eq!(
            SolverConfig::new(g, 1.5, 0.1, 0.05, 20.0)
                .unwrap()
                .n_steps()
                .unwrap(),
            400
        );
        assert_eq!(
            SolverConfig::new(g, 1.5, 0.1, 1.0 / 512.0, 1.0)
                .unwrap()
                .n_steps()
                .unwrap(),
            512
        );
    }

    #[test]
    fn warnings_for_large_steps() {
        let c = cfg(16, 1.5, 0.1, 1.5, 3.0);
        let w = theory_warnings(&c, Some(0.5)).unwrap();
        assert!(w.iter().any(|w| w.kind == WarningKind::MaxPrincipleStep));
        assert!(w.iter().any(|w| w.kind == WarningKind::EnergyStep));
        let w = theory_warnings(&cfg(16, 1.5, 0.01, 0.01, 1.0), Some(1.5)).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].kind, WarningKind::InitialBound);
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let c = cfg(100, 1.5, 0.1, 0.5, 5.0);
        let u0 = StateField::zeros(c.grid);
        let rec = run(&c, &u0, None).unwrap();
        assert_eq!(rec.times.len(), 11);
        assert!(rec.max_norms.unwrap().iter().all(|&m| m == 0.0));
        let e0 = 0.25 * 99.0 / 100.0;
        for e in rec.energies.unwrap() {
            assert!((e - e0).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_limit() {
        // With ε -> 0 the operator vanishes and each node follows the scalar map.
        let grid = GridSpec::unit(8).unwrap();
        let op = RieszOperator::new(grid, 1.5, 1e-300).unwrap();
        let ctx = LinearSolveContext::new(op, 1.0, 1e-12).unwrap();
        let u = StateField::new(grid, vec![0.5; 7]).unwrap();
        let (next, _) = step(&ctx, &u, None, 1e-14).unwrap();
        let expected = 0.821_202_585_370_653_5;
        for &v in next.values() {
            assert!((v - expected).abs() < 1e-13, "{v}");
            assert!((0.5 * v + 0.5 * v * v * v - 0.6875).abs() < 1e-14);
        }
    }

    #[test]
    fn deterministic_steps() {
        let c = cfg(64, 1.7, 0.1, 0.1, 0.5);
        let u0 = example_initials(InitialProfile::Poly4, &c.grid, c.gamma);
        let a = run(&c, &u0, None).unwrap();
        let b = run(&c, &u0, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forced_single_step() {
        let (g, tau) = (1.4, 0.125);
        let c = cfg(8, g, 0.001, tau, tau);
        let prob = ManufacturedProblem::new(c.grid, g, 0.001).unwrap();
        let rec = run(&c, &prob.exact(0.0), Some(&prob)).unwrap();
        let exact = prob.exact(tau);
        let err = rec
            .final_state
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn snapshots_follow_stride() {
        let mut c = cfg(16, 1.5, 0.1, 0.1, 1.0);
        c.monitors.snapshots = true;
        c.snapshot_stride = 4;
        let u0 = example_initials(InitialProfile::Poly4, &c.grid, c.gamma);
        let rec = run(&c, &u0, None).unwrap();
        let ts: Vec<f64> = rec.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(ts.len(), 4);
        assert!((ts[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn energy_of_unit_pattern() {
        let grid = GridSpec::unit(20).unwrap();
        let op = RieszOperator::new(grid, 1.5, 0.1).unwrap();
        let u = StateField::from_fn(grid, |x| if x[0] < 0.5 { 1.0 } else { -1.0 });
        let e = discrete_energy(&op, &u).unwrap();
        let au = op.apply(&u, crate::riesz_op::ApplyPath::Dense).unwrap();
        let quad = 0.5
            * grid.h()
            * u.values()
                .iter()
                .zip(au.values())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        assert!(e > 0.0);
        assert!((e - quad).abs() < 1e-15);
    }
}
