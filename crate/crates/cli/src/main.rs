//! `riesz-ac`: coefficient tables, formula checks, Allen–Cahn runs and the
//! convergence and stability studies from the command line.

mod config;
mod error;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use riesz_ac::exact_oracle::{
    example_initials, riesz_derivative_poly, ManufacturedProblem, PolySpec,
};
use riesz_ac::fraccoeff::{check_order, CoefficientTable};
use riesz_ac::harness::{self, ConvergenceReport, ErrorRegion, TauChoice};
use riesz_ac::riesz_op::apply_riesz_formula;
use riesz_ac::stepper::{run, SourceTerm, TrajectoryRecord};
use riesz_ac::{ApplyPath, GridSpec, RieszOperator, StateField, ARTIFACT_VERSION};

use config::{parse_config, OutputPaths, Purpose, RunManifest};
use error::{CliError, CliResult};
use report::{emit_csv, emit_json, Cell, Table};

#[derive(Debug, Parser)]
#[command(
    name = "riesz-ac",
    version,
    about = "Sixth-order Riesz derivative and fractional Allen-Cahn solver"
)]
struct Cli {
    /// JSON config file (required by `run`, optional elsewhere).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the tabular result as CSV here (stdout when no output is given).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Write the full report as JSON here.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Worker threads for independent cells and line sweeps.
    #[arg(long, global = true, env = "RIESZ_AC_THREADS")]
    threads: Option<usize>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Include wall-clock timings in JSON (makes the output non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Difference weights g_m for |m| <= mmax.
    Coeffs {
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        mmax: Option<usize>,
    },
    /// Apply the sixth-order formula to sampled data on [0,1].
    RieszApply {
        #[arg(long)]
        gamma: Option<f64>,
        /// Subintervals of [0,1].
        #[arg(long = "m")]
        m: Option<usize>,
        #[arg(long, value_enum, default_value_t = FunctionArg::Poly4)]
        function: FunctionArg,
        /// Samples for `custom-csv`: a column `u` with M+1 rows on the closed grid.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PathArg::Fft)]
        path: PathArg,
    },
    /// Time-step the Allen-Cahn equation as described by --config.
    Run {
        /// Trajectory CSV `k,t,max_norm,energy`.
        #[arg(long)]
        trajectory_csv: Option<PathBuf>,
        /// Directory for snapshot CSVs (enables snapshots).
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Formula errors on x^4(1-x)^4 for gamma in (1,2].
    Table1(TableArgs),
    /// Formula errors on x^4(1-x)^4 for gamma in (0,1).
    Table2(TableArgs),
    /// Forced Allen-Cahn errors at t = 1 along the (tau, h) ladder.
    Table3(TableArgs),
    /// Max-norm evolution from the small sin-bump initial state.
    Maxprinciple {
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        gammas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        taus: Option<Vec<f64>>,
        #[arg(long, default_value_t = harness::MAXPRINCIPLE_H)]
        h: f64,
        #[arg(long, default_value_t = harness::MAXPRINCIPLE_EPSILON)]
        epsilon: f64,
        #[arg(long = "t-final", default_value_t = harness::MAXPRINCIPLE_T)]
        t_final: f64,
    },
    /// Discrete energy evolution with the step bound annotated.
    Energy {
        #[arg(long, default_value_t = 1.5)]
        gamma: f64,
        /// Fixed step; overrides --bound-fraction.
        #[arg(long)]
        tau: Option<f64>,
        /// Step as a fraction of the energy-stability bound.
        #[arg(long, default_value_t = 0.9)]
        bound_fraction: f64,
        #[arg(long, default_value_t = harness::MAXPRINCIPLE_H)]
        h: f64,
        #[arg(long, default_value_t = harness::MAXPRINCIPLE_EPSILON)]
        epsilon: f64,
        #[arg(long = "t-final", default_value_t = harness::MAXPRINCIPLE_T)]
        t_final: f64,
    },
}

#[derive(Debug, Args)]
struct TableArgs {
    /// Override the fractional orders.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    gammas: Option<Vec<f64>>,
    /// Nodes entering the max error (default: central for tables 1-2, interior for 3).
    #[arg(long, value_enum)]
    region: Option<RegionArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegionArg {
    Interior,
    Central,
}

impl From<RegionArg> for ErrorRegion {
    fn from(r: RegionArg) -> Self {
        match r {
            RegionArg::Interior => ErrorRegion::Interior,
            RegionArg::Central => ErrorRegion::Central,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FunctionArg {
    Poly4,
    CustomCsv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PathArg {
    Dense,
    Fft,
}

impl From<PathArg> for ApplyPath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Dense => ApplyPath::Dense,
            PathArg::Fft => ApplyPath::Fft,
        }
    }
}

/// JSON envelope shared by all subcommands.
#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    artifact_version: &'a str,
    command: &'a str,
    config: C,
    report: R,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<Vec<harness::CellTiming>>,
}

struct Outputs<'a> {
    cli: &'a Cli,
}

impl Outputs<'_> {
    /// CSV to `--csv` or stdout, JSON to `--json` if given.
    fn emit<C: Serialize, R: Serialize>(
        &self,
        command: &str,
        table: &Table,
        config: C,
        report: R,
        timings: Vec<harness::CellTiming>,
    ) -> CliResult<()> {
        match &self.cli.csv {
            Some(p) => emit_csv(table, p)?,
            None if self.cli.json.is_none() => print!("{}", table.to_csv()),
            None => {}
        }
        if let Some(p) = &self.cli.json {
            let env = Envelope {
                artifact_version: ARTIFACT_VERSION,
                command,
                config,
                report,
                timing: self.cli.timing.then_some(timings),
            };
            emit_json(&env, p)?;
        }
        Ok(())
    }
}

fn convergence_table(r: &ConvergenceReport) -> Table {
    let mut t = Table::new(vec![
        "gamma",
        "tau",
        "h",
        "max_abs_error",
        "temporal_order",
        "spatial_order",
    ]);
    for row in &r.rows {
        t.push(vec![
            row.gamma.into(),
            row.tau.into(),
            row.h.into(),
            row.max_abs_error.into(),
            row.temporal_order.into(),
            row.spatial_order.into(),
        ]);
    }
    t
}

/// γ and M from flags, falling back to the config file.
fn formula_inputs(
    cli: &Cli,
    gamma: Option<f64>,
    m: Option<usize>,
    m_name: &str,
) -> CliResult<(f64, usize)> {
    let from_file = match &cli.config {
        Some(p) => Some(parse_config(p, Purpose::Formula)?),
        None => None,
    };
    let gamma = gamma
        .or(from_file.as_ref().map(|c| c.gamma))
        .ok_or_else(|| {
            CliError::Validation("--gamma is required (or a config with 'gamma')".into())
        })?;
    let m = m.or(from_file.as_ref().map(|c| c.m)).ok_or_else(|| {
        CliError::Validation(format!("--{m_name} is required (or a config with 'M')"))
    })?;
    check_order(gamma)?;
    Ok((gamma, m))
}

#[derive(Serialize)]
struct CoeffsReport {
    gamma: f64,
    m_max: usize,
    values: Vec<f64>,
}

fn cmd_coeffs(cli: &Cli, gamma: Option<f64>, mmax: Option<usize>) -> CliResult<()> {
    let (gamma, mmax) = formula_inputs(cli, gamma, mmax, "mmax")?;
    let table = CoefficientTable::new(gamma, mmax)?;
    let mut t = Table::new(vec!["m", "g_m"]);
    for m in -(mmax as i64)..=mmax as i64 {
        t.push(vec![Cell::Int(m), Cell::Coef(table.get(m))]);
    }
    let report = CoeffsReport {
        gamma,
        m_max: mmax,
        values: table.one_sided().to_vec(),
    };
    Outputs { cli }.emit(
        "coeffs",
        &t,
        serde_json::json!({ "gamma": gamma, "mmax": mmax }),
        report,
        Vec::new(),
    )
}

fn read_samples(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CliError::Validation(format!("{}: empty sample file", path.display())))?;
    let col = header
        .split(',')
        .position(|h| h.trim() == "u")
        .ok_or_else(|| {
            CliError::Validation(format!("{}: header needs a 'u' column", path.display()))
        })?;
    lines
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .nth(col)
                .and_then(|f| f.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "{}: line {}: cannot read 'u'",
                        path.display(),
                        i + 2
                    ))
                })
        })
        .collect()
}

#[derive(Serialize)]
struct ApplyRow {
    x: f64,
    approx: f64,
    exact: Option<f64>,
    abserr: Option<f64>,
}

fn cmd_riesz_apply(
    cli: &Cli,
    gamma: Option<f64>,
    m: Option<usize>,
    function: FunctionArg,
    input: Option<&Path>,
    path: PathArg,
) -> CliResult<()> {
    let (samples, gamma, m) = match function {
        FunctionArg::Poly4 => {
            let (gamma, m) = formula_inputs(cli, gamma, m, "m")?;
            let grid = GridSpec::unit(m)?;
            let s: Vec<f64> = (0..=m)
                .map(|j| {
                    let x = j as f64 * grid.h();
                    (x * (1.0 - x)).powi(4)
                })
                .collect();
            (s, gamma, m)
        }
        FunctionArg::CustomCsv => {
            let input = input.ok_or_else(|| {
                CliError::Validation("--function custom-csv needs --input PATH".into())
            })?;
            let s = read_samples(input)?;
            if s.len() < 5 {
                return Err(CliError::Validation(
                    "need at least 5 samples (M >= 4)".into(),
                ));
            }
            let m_file = s.len() - 1;
            if let Some(m) = m.filter(|&m| m != m_file) {
                return Err(CliError::Validation(format!(
                    "--m {m} disagrees with {} samples (M = {m_file})",
                    s.len()
                )));
            }
            let (gamma, _) = formula_inputs(cli, gamma, Some(m_file), "m")?;
            (s, gamma, m_file)
        }
    };
    let grid = GridSpec::unit(m)?;
    let h = grid.h();
    let approx = match ApplyPath::from(path) {
        ApplyPath::Dense => apply_riesz_formula(gamma, h, &samples)?,
        ApplyPath::Fft => {
            // Endpoint samples only enter through the Toeplitz tail; with the
            // usual zero boundary values the operator form applies directly.
            if samples[0] != 0.0 || samples[m] != 0.0 {
                apply_riesz_formula(gamma, h, &samples)?
            } else {
                let op = RieszOperator::new(grid, gamma, 1.0)?;
                let field = StateField::new(grid, samples[1..m].to_vec())?;
                op.apply(&field, ApplyPath::Fft)?
                    .into_values()
                    .into_iter()
                    .map(|v| -v)
                    .collect()
            }
        }
    };
    let p = PolySpec::bump(4, 4);
    let rows: Vec<ApplyRow> = approx
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let x = grid.node(i + 1);
            let exact = match function {
                FunctionArg::Poly4 => Some(riesz_derivative_poly(&p, gamma, x)?),
                FunctionArg::CustomCsv => None,
            };
            Ok(ApplyRow {
                x,
                approx: a,
                exact,
                abserr: exact.map(|e| (a - e).abs()),
            })
        })
        .collect::<riesz_ac::Result<_>>()?;
    let mut t = Table::new(vec!["x", "approx", "exact", "abserr"]);
    for r in &rows {
        t.push(vec![
            r.x.into(),
            r.approx.into(),
            r.exact.into(),
            r.abserr.into(),
        ]);
    }
    Outputs { cli }.emit(
        "riesz-apply",
        &t,
        serde_json::json!({ "gamma": gamma, "M": m }),
        rows,
        Vec::new(),
    )
}

fn trajectory_table(rec: &TrajectoryRecord) -> Table {
    let mut t = Table::new(vec!["k", "t", "max_norm", "energy"]);
    for (k, &time) in rec.times.iter().enumerate() {
        let mn = rec.max_norms.as_ref().map(|v| v[k]);
        let en = rec.energies.as_ref().map(|v| v[k]);
        t.push(vec![k.into(), time.into(), mn.into(), en.into()]);
    }
    t
}

fn snapshot_table(field: &StateField) -> Table {
    let grid = field.grid();
    let header = match grid.dim {
        1 => vec!["x", "u"],
        2 => vec!["x", "y", "u"],
        _ => vec!["x", "y", "z", "u"],
    };
    let mut t = Table::new(header);
    for (idx, &u) in field.values().iter().enumerate() {
        let ijk = grid.unflatten(idx);
        let mut row: Vec<Cell> = (0..grid.dim)
            .map(|a| grid.node(ijk[a] + 1).into())
            .collect();
        row.push(u.into());
        t.push(row);
    }
    t
}

#[derive(Serialize)]
struct RunSummary {
    steps: usize,
    final_time: f64,
    max_norm_overall: Option<f64>,
    final_energy: Option<f64>,
    total_cg_iterations: usize,
    worst_cubic_residual: f64,
    /// Max error against the manufactured solution (forced runs only).
    final_error: Option<f64>,
}

#[derive(Serialize)]
struct RunJson<'a> {
    manifest: &'a RunManifest,
    summary: RunSummary,
    trajectory: &'a TrajectoryRecord,
}

fn cmd_run(cli: &Cli, trajectory_csv: Option<&Path>, snapshots: Option<&Path>) -> CliResult<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("run needs --config PATH".into()))?;
    let mut cfg = parse_config(path, Purpose::Run)?;
    if snapshots.is_some() {
        cfg.snapshots = true;
    }
    let grid = cfg.grid()?;
    let problem = if cfg.forced {
        Some(ManufacturedProblem::new(grid, cfg.gamma, cfg.epsilon)?)
    } else {
        None
    };
    let initial = match &problem {
        Some(p) => p.exact(0.0),
        None => example_initials(cfg.initial, &grid, cfg.gamma),
    };
    let outputs = OutputPaths {
        csv: cli.csv.clone(),
        json: cli.json.clone(),
        trajectory_csv: trajectory_csv.map(Path::to_path_buf),
        snapshots: snapshots.map(Path::to_path_buf),
    };
    let manifest = RunManifest::new(
        cfg.clone(),
        problem.is_none().then(|| initial.max_norm()),
        outputs,
    )?;
    let solver = cfg.solver_config()?;
    let source = problem.as_ref().map(|p| p as &dyn SourceTerm);
    let rec = run(&solver, &initial, source)?;

    let table = trajectory_table(&rec);
    if let Some(p) = trajectory_csv {
        emit_csv(&table, p)?;
    }
    if let Some(dir) = snapshots {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (t, field) in &rec.snapshots {
            let k = (t / cfg.tau).round() as usize;
            emit_csv(
                &snapshot_table(field),
                &dir.join(format!("snapshot_{k:06}.csv")),
            )?;
        }
    }
    let summary = RunSummary {
        steps: rec.step_reports.len(),
        final_time: *rec.times.last().unwrap(),
        max_norm_overall: rec
            .max_norms
            .as_ref()
            .map(|v| v.iter().copied().fold(0.0, f64::max)),
        final_energy: rec.energies.as_ref().and_then(|v| v.last().copied()),
        total_cg_iterations: rec.step_reports.iter().map(|r| r.cg_iterations).sum(),
        worst_cubic_residual: rec
            .step_reports
            .iter()
            .map(|r| r.cubic_max_residual)
            .fold(0.0, f64::max),
        final_error: problem.as_ref().map(|p| {
            let exact = p.exact(cfg.t_final);
            rec.final_state
                .values()
                .iter()
                .zip(exact.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        }),
    };
    match &cli.csv {
        Some(p) => emit_csv(&table, p)?,
        None if cli.json.is_none() && trajectory_csv.is_none() => print!("{}", table.to_csv()),
        None => {}
    }
    if let Some(p) = &cli.json {
        emit_json(
            &RunJson {
                manifest: &manifest,
                summary,
                trajectory: &rec,
            },
            p,
        )?;
    }
    Ok(())
}

fn cmd_table(cli: &Cli, which: u8, args: &TableArgs) -> CliResult<()> {
    let (name, report) = match which {
        1 | 2 => {
            let defaults: &[f64] = if which == 1 {
                &harness::TABLE1_GAMMAS
            } else {
                &harness::TABLE2_GAMMAS
            };
            let gammas = args.gammas.clone().unwrap_or_else(|| defaults.to_vec());
            let region = args.region.map_or(ErrorRegion::Central, Into::into);
            let r = harness::convergence_space_formula(&gammas, &harness::TABLE_HS, region)?;
            (if which == 1 { "table1" } else { "table2" }, r)
        }
        _ => {
            let gammas = args
                .gammas
                .clone()
                .unwrap_or_else(|| harness::TABLE3_GAMMAS.to_vec());
            let region = args.region.map_or(ErrorRegion::Interior, Into::into);
            let r = harness::convergence_full(
                &gammas,
                &harness::TABLE3_LADDER,
                harness::TABLE3_EPSILON,
                region,
            )?;
            ("table3", r)
        }
    };
    log::info!("{name}: {} rows", report.rows.len());
    let t = convergence_table(&report);
    let timings = report.timings.clone();
    Outputs { cli }.emit(name, &t, &report.meta, &report, timings)
}

fn cmd_maxprinciple(
    cli: &Cli,
    gammas: Option<Vec<f64>>,
    taus: Option<Vec<f64>>,
    h: f64,
    epsilon: f64,
    t_final: f64,
) -> CliResult<()> {
    let gammas = gammas.unwrap_or_else(|| harness::MAXPRINCIPLE_GAMMAS.to_vec());
    let taus = taus.unwrap_or_else(|| harness::MAXPRINCIPLE_TAUS.to_vec());
    let r = harness::max_principle_experiment(&gammas, &taus, h, epsilon, t_final)?;
    for s in r.series.iter().filter(|s| s.excursions > 0) {
        log::warn!(
            "gamma={} tau={}: max norm {:.6} exceeds 1 (|B|_inf = {:.3})",
            s.gamma,
            s.tau,
            s.series_max,
            s.b_infinity_norm
        );
    }
    let mut t = Table::new(vec!["gamma", "tau", "k", "t", "max_norm"]);
    for s in &r.series {
        for (k, (&time, &m)) in s.times.iter().zip(&s.max_norms).enumerate() {
            t.push(vec![
                s.gamma.into(),
                s.tau.into(),
                k.into(),
                time.into(),
                m.into(),
            ]);
        }
    }
    let timings = r.timings.clone();
    Outputs { cli }.emit(
        "maxprinciple",
        &t,
        serde_json::json!({ "gammas": gammas, "taus": taus, "h": h, "epsilon": epsilon, "T": t_final }),
        &r,
        timings,
    )
}

fn cmd_energy(
    cli: &Cli,
    gamma: f64,
    tau: Option<f64>,
    bound_fraction: f64,
    h: f64,
    epsilon: f64,
    t_final: f64,
) -> CliResult<()> {
    let choice = match tau {
        Some(t) => TauChoice::Fixed(t),
        None => TauChoice::FractionOfBound(bound_fraction),
    };
    let r = harness::energy_experiment(gamma, choice, h, epsilon, t_final)?;
    if !r.monotone {
        log::warn!(
            "energy increased by up to {:.3e} in one step",
            r.max_increase
        );
    }
    let mut t = Table::new(vec!["k", "t", "energy"]);
    for (k, (&time, &e)) in r.times.iter().zip(&r.energies).enumerate() {
        t.push(vec![k.into(), time.into(), e.into()]);
    }
    let timings = r.timings.clone();
    Outputs { cli }.emit(
        "energy",
        &t,
        serde_json::json!({ "gamma": gamma, "tau": choice, "h": h, "epsilon": epsilon, "T": t_final }),
        &r,
        timings,
    )
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Coeffs { gamma, mmax } => cmd_coeffs(cli, *gamma, *mmax),
        Command::RieszApply {
            gamma,
            m,
            function,
            input,
            path,
        } => cmd_riesz_apply(cli, *gamma, *m, *function, input.as_deref(), *path),
        Command::Run {
            trajectory_csv,
            snapshots,
        } => cmd_run(cli, trajectory_csv.as_deref(), snapshots.as_deref()),
        Command::Table1(a) => cmd_table(cli, 1, a),
        Command::Table2(a) => cmd_table(cli, 2, a),
        Command::Table3(a) => cmd_table(cli, 3, a),
        Command::Maxprinciple {
            gammas,
            taus,
            h,
            epsilon,
            t_final,
        } => cmd_maxprinciple(cli, gammas.clone(), taus.clone(), *h, *epsilon, *t_final),
        Command::Energy {
            gamma,
            tau,
            bound_fraction,
            h,
            epsilon,
            t_final,
        } => cmd_energy(cli, *gamma, *tau, *bound_fraction, *h, *epsilon, *t_final),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
