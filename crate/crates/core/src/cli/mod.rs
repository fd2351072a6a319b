//! Command-line front end.
//!
//! One binary, five subcommands (`apply`, `green`, `solve`, `verify`,
//! `simulate`), each driven by a JSON run configuration and writing
//! machine-readable artifacts (binary fields, JSON summaries, CSV) into
//! the `--output` directory.  The accepted configuration documents and
//! the emitted summaries are described by the JSON schemas shipped under
//! `schemas/`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 numerical failure, 4 parameter-regime rejection.

mod checks;

use crate::error::{Error, Result};
use crate::geometry::{DiagonalSign, HyperplaneKind};
use crate::grid::{Field, Grid};
use crate::levy::{
    axis_concentration_statistic, generator_richardson, simulate_paths, StablePathConfig,
};
use crate::params::{FractionalParams, Normalization};
use crate::potential::{
    green_table_with_policy, green_value, GreenMethod, SingularCellPolicy,
};
use crate::quad::{apply_operator, FieldOperator, QuadratureConfig};
use crate::solver::{
    decay_fit, moving_plane_scan, solve_semilinear, symmetry_report, InitKind, PlaneScan,
    SolveConfig, SolveNormalization,
};
use crate::spectral::apply_spectral;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_REGIME: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "anisofrac",
    version,
    about = "Anisotropic fractional operator toolbox: apply the operator, \
             tabulate its potential kernel, solve the semilinear fixed-point \
             problem, run the property-check suite, and sample the driving \
             stable process."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Apply the operator to a builtin or stored field.
    Apply(RunArgs),
    /// Tabulate the potential kernel with self-checks.
    Green(RunArgs),
    /// Solve u = u^p * G and write the diagnostic bundle.
    Solve(RunArgs),
    /// Run the named property checks and print a pass/fail table.
    Verify(RunArgs),
    /// Monte Carlo sampling of the driving stable process.
    Simulate(RunArgs),
}

impl Cmd {
    fn args(&self) -> &RunArgs {
        match self {
            Cmd::Apply(a) | Cmd::Green(a) | Cmd::Solve(a) | Cmd::Verify(a) | Cmd::Simulate(a) => a,
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON run configuration (see the shipped schemas/ documents).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory receiving output artifacts (created if missing).
    #[arg(long, value_name = "DIR", default_value = ".")]
    output: PathBuf,

    /// Overrides the seed given in the configuration.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Caps the worker-thread count (fallback: ANISOFRAC_THREADS).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Substring filter on check names (verify only).
    #[arg(long, value_name = "PATTERN")]
    only: Option<String>,
}

/// Parses `std::env::args` and runs the selected subcommand, returning the
/// process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// As [`run`], with an explicit argument list (used by tests).
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_SUCCESS,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return code;
        }
    };
    let common = cli.command.args();
    if let Err(e) = configure_threads(common.threads) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    if let Err(e) = std::fs::create_dir_all(&common.output) {
        eprintln!(
            "error: cannot create output directory {}: {e}",
            common.output.display()
        );
        return EXIT_CONFIG;
    }
    let outcome = match &cli.command {
        Cmd::Apply(a) => cmd_apply(a),
        Cmd::Green(a) => cmd_green(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Verify(a) => return cmd_verify(a),
        Cmd::Simulate(a) => cmd_simulate(a),
    };
    match outcome {
        Ok(()) => EXIT_SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::Format(_) | Error::Io(_) => EXIT_CONFIG,
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::RegimeRejected { .. } => EXIT_REGIME,
    }
}

fn configure_threads(explicit: Option<usize>) -> Result<()> {
    let n = match explicit {
        Some(n) => Some(n),
        None => match std::env::var("ANISOFRAC_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Error::invalid(format!("ANISOFRAC_THREADS must be a positive integer, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::invalid("--threads must be positive"));
        }
        // ignore AlreadyInitialized: a second call cannot shrink the pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Rewrites serde's "missing field `name`" phrasing; other messages (for
/// example "unknown field `key`, expected one of ...") already name the
/// offending key and pass through unchanged.
fn humanize_serde_error(raw: &str) -> String {
    if let Some(pos) = raw.find("missing field `") {
        let rest = &raw[pos + "missing field `".len()..];
        if let Some(end) = rest.find('`') {
            let field = &rest[..end];
            let loc = rest[end + 1..].trim();
            return if loc.is_empty() {
                format!("missing field: {field}")
            } else {
                format!("missing field: {field} ({loc})")
            };
        }
    }
    raw.to_string()
}

fn load_config<T: DeserializeOwned>(args: &RunArgs) -> Result<T> {
    let path = args
        .config
        .as_deref()
        .ok_or_else(|| Error::invalid("missing required flag: --config PATH"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(humanize_serde_error(&e.to_string())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("summary serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Format(format!("serialization failed: {e}")))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

// ---------------------------------------------------------------------------
// shared config pieces
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    n: usize,
    extent: f64,
}

impl GridSpec {
    fn build(&self, dim: usize) -> Result<Grid> {
        Grid::new(dim, self.n, self.extent)
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum NormSpec {
    #[default]
    Probabilistic,
    Plain,
}

impl From<NormSpec> for Normalization {
    fn from(n: NormSpec) -> Normalization {
        match n {
            NormSpec::Probabilistic => Normalization::Probabilistic,
            NormSpec::Plain => Normalization::Plain,
        }
    }
}

fn grid_value(grid: &Grid) -> serde_json::Value {
    json!({ "counts": grid.counts(), "extent": grid.extent() })
}

// ---------------------------------------------------------------------------
// apply
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyConfig {
    dim: usize,
    s: f64,
    #[serde(default)]
    normalization: NormSpec,
    method: ApplyMethod,
    #[serde(default)]
    input: InputSpec,
    /// Required when the input is a builtin function; ignored for files.
    #[serde(default)]
    grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum ApplyMethod {
    Quadrature,
    Spectral,
    Both,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
enum InputSpec {
    /// Named analytic profile sampled on the configured grid.
    Builtin(String),
    /// Path to a stored binary field.
    Field(PathBuf),
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Builtin("gaussian".into())
    }
}

fn builtin_field(name: &str, grid: Grid) -> Result<Field> {
    match name {
        "gaussian" => Ok(Field::sample(grid, |x| {
            (-x.iter().map(|c| c * c).sum::<f64>()).exp()
        })),
        other => Err(Error::invalid(format!(
            "unknown builtin input {other:?}; available: \"gaussian\""
        ))),
    }
}

/// Applies `sum_i (-d_ii)^s` to the input field: the quadrature path
/// computes the periodized singular integral, the spectral path multiplies
/// by the symbol; both use the convention in which the operator is
/// positive-definite.
fn cmd_apply(args: &RunArgs) -> Result<()> {
    let cfg: ApplyConfig = load_config(args)?;
    let params = FractionalParams::new(cfg.dim, cfg.s, 2.0, cfg.normalization.into())?;
    let field = match &cfg.input {
        InputSpec::Builtin(name) => {
            let spec = cfg
                .grid
                .ok_or_else(|| Error::invalid("missing field: grid (required for builtin input)"))?;
            builtin_field(name, spec.build(cfg.dim)?)?
        }
        InputSpec::Field(path) => {
            let f = Field::read_binary(path)?;
            if f.grid().dim() != cfg.dim {
                return Err(Error::invalid(format!(
                    "input field has dim {} but config says {}",
                    f.grid().dim(),
                    cfg.dim
                )));
            }
            f
        }
    };
    if cfg.method != ApplyMethod::Quadrature && cfg.normalization != NormSpec::Probabilistic {
        return Err(Error::invalid(
            "the spectral path carries the probabilistic normalization; \
             use method \"quadrature\" with normalization \"plain\"",
        ));
    }
    let quad_out = if cfg.method != ApplyMethod::Spectral {
        let op = FieldOperator::new(field.grid(), &params)?;
        let mut v = op.apply(&field)?;
        // the operator table computes the generator; negate to the
        // positive-definite convention shared with the spectral path
        for x in v.values_mut() {
            *x = -*x;
        }
        Some(v)
    } else {
        None
    };
    let spec_out = if cfg.method != ApplyMethod::Quadrature {
        Some(apply_spectral(&field, cfg.s)?)
    } else {
        None
    };
    let cross_gap = match (&quad_out, &spec_out) {
        (Some(q), Some(sp)) => {
            let scale = sp.sup_norm().max(f64::MIN_POSITIVE);
            let gap = q
                .values()
                .iter()
                .zip(sp.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            Some(gap / scale)
        }
        _ => None,
    };
    let out = spec_out.or(quad_out).expect("one method always runs");
    let field_path = args.output.join("apply_field.afld");
    out.write_binary(&field_path)?;
    let summary = json!({
        "command": "apply",
        "params": {
            "dim": cfg.dim,
            "s": cfg.s,
            "normalization": to_value(&cfg.normalization)?,
        },
        "method": to_value(&cfg.method)?,
        "input": to_value(&cfg.input)?,
        "grid": grid_value(out.grid()),
        "max_abs": out.sup_norm(),
        "cross_method_max_rel_gap": cross_gap,
        "output_field": "apply_field.afld",
    });
    write_json(&args.output.join("apply_summary.json"), &summary)?;
    println!(
        "apply: max_abs = {:.6e}{}",
        out.sup_norm(),
        cross_gap
            .map(|g| format!(", cross-method max rel gap = {g:.3e}"))
            .unwrap_or_default()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// green
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GreenConfig {
    dim: usize,
    s: f64,
    method: GreenMethodSpec,
    grid: GridSpec,
    #[serde(default)]
    policy: Option<PolicySpec>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum GreenMethodSpec {
    ClosedHalf,
    ClosedNewtonian,
    NestedQuadrature,
    /// Periodic inverse on a torus of the configured grid size.
    SpectralInverse,
}

impl GreenMethodSpec {
    fn to_method(self, grid: &GridSpec) -> GreenMethod {
        match self {
            GreenMethodSpec::ClosedHalf => GreenMethod::ClosedHalf,
            GreenMethodSpec::ClosedNewtonian => GreenMethod::ClosedNewtonian,
            GreenMethodSpec::NestedQuadrature => GreenMethod::NestedQuadrature,
            GreenMethodSpec::SpectralInverse => GreenMethod::SpectralInverse {
                n: grid.n,
                extent: grid.extent,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum PolicySpec {
    AnalyticCellAverage,
    RadialRegularize,
}

impl From<PolicySpec> for SingularCellPolicy {
    fn from(p: PolicySpec) -> SingularCellPolicy {
        match p {
            PolicySpec::AnalyticCellAverage => SingularCellPolicy::AnalyticCellAverage,
            PolicySpec::RadialRegularize => SingularCellPolicy::RadialRegularize,
        }
    }
}

fn cmd_green(args: &RunArgs) -> Result<()> {
    let cfg: GreenConfig = load_config(args)?;
    if cfg.dim == 0 {
        return Err(Error::invalid("dim must be at least 1"));
    }
    if !(cfg.s > 0.0 && cfg.s <= 1.0) || !cfg.s.is_finite() {
        return Err(Error::invalid(format!("s must lie in (0, 1], got {}", cfg.s)));
    }
    if 2.0 * cfg.s >= cfg.dim as f64 {
        return Err(Error::invalid(format!(
            "the potential kernel requires 2s < N: got s = {}, N = {} \
             (the defining integral diverges)",
            cfg.s, cfg.dim
        )));
    }
    let method = cfg.method.to_method(&cfg.grid);
    let grid = cfg.grid.build(cfg.dim)?;
    let policy = cfg
        .policy
        .map(SingularCellPolicy::from)
        .unwrap_or(SingularCellPolicy::AnalyticCellAverage);
    let table = green_table_with_policy(&grid, cfg.s, &method, policy)?;
    let table_path = args.output.join("green_table.afld");
    table.write(&table_path)?;

    // exact-value cross-check in the regime with a closed form
    let closed_form_check = if cfg.s == 0.5 && cfg.dim == 2 {
        let x = [1.0, 1.0];
        let value = green_value(&x, cfg.s, cfg.dim, &method)?;
        let exact = 1.0 / (4.0 * std::f64::consts::PI);
        Some(json!({
            "point": x,
            "value": value,
            "exact": exact,
            "rel_gap": (value - exact).abs() / exact,
        }))
    } else {
        None
    };

    // scaling report G(lambda x) = lambda^{2s-N} G(x); the periodic
    // estimate is not homogeneous, so the report is skipped there
    let homogeneity = if cfg.method != GreenMethodSpec::SpectralInverse {
        let lambda = 2.0;
        let base = [0.45, -0.8, 0.6, 1.1, -0.35, 0.9];
        let mut max_rel = 0.0f64;
        let mut points = 0usize;
        for shift in 0..3 {
            let x: Vec<f64> = (0..cfg.dim).map(|i| base[(i + shift) % base.len()]).collect();
            let xl: Vec<f64> = x.iter().map(|c| c * lambda).collect();
            let g = green_value(&x, cfg.s, cfg.dim, &method)?;
            let gl = green_value(&xl, cfg.s, cfg.dim, &method)?;
            let predicted = lambda.powf(2.0 * cfg.s - cfg.dim as f64) * g;
            max_rel = max_rel.max((gl - predicted).abs() / g.abs());
            points += 1;
        }
        Some(json!({ "lambda": lambda, "points": points, "max_rel_gap": max_rel }))
    } else {
        None
    };

    let summary = json!({
        "command": "green",
        "dim": cfg.dim,
        "s": cfg.s,
        "method": to_value(&table.method())?,
        "singular_cell_policy": to_value(&table.singular_cell_policy())?,
        "grid": grid_value(&grid),
        "table": "green_table.afld",
        "min_value": table.field().min(),
        "max_value": table.field().max(),
        "closed_form_check": closed_form_check,
        "homogeneity": homogeneity,
    });
    write_json(&args.output.join("green_summary.json"), &summary)?;
    println!(
        "green: tabulated {} nodes, values in [{:.6e}, {:.6e}]",
        grid.len(),
        table.field().min(),
        table.field().max()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveCmdConfig {
    dim: usize,
    s: f64,
    p: f64,
    grid: GridSpec,
    #[serde(default)]
    normalization: NormSpec,
    #[serde(default = "default_max_iters")]
    max_iters: usize,
    #[serde(default = "default_tol_residual")]
    tol_residual: f64,
    #[serde(default = "default_damping")]
    damping: f64,
    #[serde(default)]
    solve_normalization: Option<SolveNormalization>,
    #[serde(default)]
    init: Option<InitSpec>,
    #[serde(default)]
    kernel_method: Option<GreenMethodSpec>,
    #[serde(default = "default_scan_points")]
    scan_points: usize,
}

fn default_max_iters() -> usize {
    500
}
fn default_tol_residual() -> f64 {
    1e-6
}
fn default_damping() -> f64 {
    0.5
}
fn default_scan_points() -> usize {
    41
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
enum InitSpec {
    Gaussian,
    Anisotropic(Vec<f64>),
    File(PathBuf),
}

impl From<InitSpec> for InitKind {
    fn from(i: InitSpec) -> InitKind {
        match i {
            InitSpec::Gaussian => InitKind::GaussianBump,
            InitSpec::Anisotropic(w) => InitKind::AnisotropicBump(w),
            InitSpec::File(p) => InitKind::FromFile(p),
        }
    }
}

fn auto_kernel_method(params: &FractionalParams) -> Result<GreenMethod> {
    if params.s == 0.5 {
        Ok(GreenMethod::ClosedHalf)
    } else if 2.0 * params.s < params.dim as f64 {
        Ok(GreenMethod::NestedQuadrature)
    } else {
        Err(Error::invalid(format!(
            "no kernel tabulation available for s = {}, N = {}: need 2s < N",
            params.s, params.dim
        )))
    }
}

fn cmd_solve(args: &RunArgs) -> Result<()> {
    let cfg: SolveCmdConfig = load_config(args)?;
    let params = FractionalParams::new(cfg.dim, cfg.s, cfg.p, cfg.normalization.into())?;
    // reject the no-solution regime before the (expensive) kernel build
    if let Some(threshold) = params.critical_exponent() {
        if cfg.p <= threshold {
            return Err(Error::RegimeRejected {
                p: cfg.p,
                threshold,
                dim: cfg.dim,
                s: cfg.s,
            });
        }
    }
    let grid = cfg.grid.build(cfg.dim)?;
    let method = match cfg.kernel_method {
        Some(m) => m.to_method(&GridSpec {
            n: 2 * cfg.grid.n,
            extent: 2.0 * cfg.grid.extent,
        }),
        None => auto_kernel_method(&params)?,
    };
    let kernel_grid = Grid::new(cfg.dim, 2 * cfg.grid.n, 2.0 * cfg.grid.extent)?;
    let kernel = green_table_with_policy(
        &kernel_grid,
        cfg.s,
        &method,
        SingularCellPolicy::AnalyticCellAverage,
    )?;
    let solve_cfg = SolveConfig {
        max_iters: cfg.max_iters,
        tol_residual: cfg.tol_residual,
        damping: cfg.damping,
        normalization: cfg
            .solve_normalization
            .unwrap_or(SolveNormalization::SupToOne),
        init: cfg.init.clone().map(InitKind::from).unwrap_or(InitKind::GaussianBump),
    };
    let result = solve_semilinear(&params, &grid, &kernel, &solve_cfg)?;
    result.write(&args.output.join("solution.afld"))?;

    let report = symmetry_report(&result.field, None)?;
    write_json(
        &args.output.join("symmetry_report.json"),
        &to_value(&report)?,
    )?;

    let lam_max = cfg.grid.extent / 2.0;
    let lambdas = linspace(-lam_max, lam_max, cfg.scan_points.max(2));
    let mut scans: Vec<PlaneScan> = Vec::new();
    for axis in 0..cfg.dim {
        scans.push(moving_plane_scan(
            &result.field,
            HyperplaneKind::Axis { axis },
            &lambdas,
        )?);
    }
    if cfg.dim >= 2 {
        for sign in [DiagonalSign::Plus, DiagonalSign::Minus] {
            scans.push(moving_plane_scan(
                &result.field,
                HyperplaneKind::Diagonal { i: 0, j: 1, sign },
                &lambdas,
            )?);
        }
    }
    write_json(&args.output.join("plane_scan.json"), &to_value(&scans)?)?;

    let decay = decay_fit(&result.field, &params);
    let (decay_exponent, decay_note) = match &decay {
        Ok(beta) => (Some(*beta), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let critical: Vec<serde_json::Value> = scans
        .iter()
        .map(|sc| {
            Ok(json!({
                "direction": to_value(&sc.direction)?,
                "critical_lambda": sc.critical_lambda,
            }))
        })
        .collect::<Result<_>>()?;
    let outcome_note = if result.converged {
        None
    } else {
        Some("no numerical solution found at this discretization".to_string())
    };
    let summary = json!({
        "command": "solve",
        "dim": cfg.dim,
        "s": cfg.s,
        "p": cfg.p,
        "normalization": to_value(&cfg.normalization)?,
        "grid": grid_value(&grid),
        "kernel_method": to_value(&kernel.method())?,
        "max_iters": cfg.max_iters,
        "tol_residual": cfg.tol_residual,
        "damping": cfg.damping,
        "converged": result.converged,
        "outcome_note": outcome_note,
        "iterations": result.residual_history.len(),
        "final_residual": result.residual_history.last().copied(),
        "scale_factor": result.scale_factor,
        "symmetry": {
            "center": report.center,
            "axis_residuals": report.axis_residuals,
            "radial_deviation": report.radial_deviation,
        },
        "critical_lambdas": critical,
        "decay_exponent": decay_exponent,
        "decay_note": decay_note,
        "decay_reference": params.scaling_exponent(),
        "files": {
            "solution": "solution.afld",
            "solution_summary": "solution.json",
            "symmetry_report": "symmetry_report.json",
            "plane_scan": "plane_scan.json",
        },
    });
    write_json(&args.output.join("solve_summary.json"), &summary)?;
    println!(
        "solve: converged = {}, iterations = {}, final residual = {:.3e}, scale factor = {:.6e}",
        result.converged,
        result.residual_history.len(),
        result.residual_history.last().copied().unwrap_or(f64::NAN),
        result.scale_factor
    );
    if let Some(note) = &outcome_note {
        println!("solve: {note}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "snake_case")]
enum SimulateConfig {
    /// Empirical-generator estimate on a Gaussian test function with a
    /// Richardson small-time extrapolation, compared against quadrature.
    Generator {
        dim: usize,
        s: f64,
        #[serde(default = "default_t")]
        t: f64,
        #[serde(default = "default_samples")]
        n: usize,
        #[serde(default)]
        x: Option<Vec<f64>>,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// Path ensemble of the coordinate-wise stable process; endpoints go
    /// to CSV.
    Paths {
        dim: usize,
        s: f64,
        dt: f64,
        horizon: f64,
        n_paths: usize,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default = "default_seed")]
        seed: u64,
    },
}

fn default_t() -> f64 {
    1e-3
}
fn default_samples() -> usize {
    200_000
}
fn default_seed() -> u64 {
    42
}

fn cmd_simulate(args: &RunArgs) -> Result<()> {
    let cfg: SimulateConfig = load_config(args)?;
    match cfg {
        SimulateConfig::Generator { dim, s, t, n, x, seed } => {
            let params = FractionalParams::new(dim, s, 2.0, Normalization::Probabilistic)?;
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::invalid(format!("t must be positive, got {t}")));
            }
            if n == 0 {
                return Err(Error::invalid("n must be positive"));
            }
            let seed = args.seed.unwrap_or(seed);
            let x = x.unwrap_or_else(|| vec![0.0; dim]);
            if x.len() != dim {
                return Err(Error::invalid(format!(
                    "x has {} coordinates but dim = {dim}",
                    x.len()
                )));
            }
            let u = |y: &[f64]| (-y.iter().map(|c| c * c).sum::<f64>()).exp();
            let quadrature = apply_operator(&u, &x, &params, &QuadratureConfig::default())?;
            let (estimate, stderr) = generator_richardson(&u, &x, t, n, s, 1.0, seed)?;
            let gap = (estimate - quadrature).abs();
            let summary = json!({
                "command": "simulate",
                "mode": "generator",
                "dim": dim,
                "s": s,
                "t": t,
                "n": n,
                "seed": seed,
                "x": x,
                "test_function": "gaussian",
                "estimate": estimate,
                "stderr": stderr,
                "quadrature": quadrature,
                "abs_gap": gap,
                "within_three_stderr": gap <= 3.0 * stderr,
            });
            write_json(&args.output.join("simulate_summary.json"), &summary)?;
            println!(
                "simulate: estimate = {estimate:.6e}, stderr = {stderr:.3e}, quadrature = {quadrature:.6e}"
            );
            Ok(())
        }
        SimulateConfig::Paths { dim, s, dt, horizon, n_paths, x0, seed } => {
            let seed = args.seed.unwrap_or(seed);
            let x0 = x0.unwrap_or_else(|| vec![0.0; dim]);
            if x0.len() != dim {
                return Err(Error::invalid(format!(
                    "x0 has {} coordinates but dim = {dim}",
                    x0.len()
                )));
            }
            let path_cfg = StablePathConfig {
                s,
                dt,
                horizon,
                n_paths,
                scale_calibration: 1.0,
                seed,
            };
            let ensemble = simulate_paths(&x0, &path_cfg)?;
            let csv_path = args.output.join("endpoints.csv");
            ensemble.write_endpoints_csv(&csv_path)?;
            let concentration = axis_concentration_statistic(&ensemble, 0.999, 0.95).ok();
            let summary = json!({
                "command": "simulate",
                "mode": "paths",
                "dim": dim,
                "s": s,
                "dt": dt,
                "horizon": horizon,
                "n_paths": n_paths,
                "n_steps": ensemble.n_steps(),
                "seed": seed,
                "x0": x0,
                "endpoints_file": "endpoints.csv",
                "axis_concentration": concentration.map(|frac| json!({
                    "percentile": 0.999,
                    "dominance": 0.95,
                    "fraction": frac,
                })),
            });
            write_json(&args.output.join("simulate_summary.json"), &summary)?;
            println!(
                "simulate: {} paths x {} steps written to {}",
                n_paths,
                ensemble.n_steps(),
                csv_path.display()
            );
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn cmd_verify(args: &RunArgs) -> i32 {
    if args.config.is_some() {
        eprintln!("error: verify takes no config file; use --only PATTERN to filter checks");
        return EXIT_CONFIG;
    }
    let registry = checks::registry();
    let pattern = args.only.as_deref().map(str::to_lowercase);
    let selected: Vec<&checks::Check> = registry
        .iter()
        .filter(|c| match &pattern {
            Some(p) => c.name.contains(p.as_str()),
            None => true,
        })
        .collect();
    if selected.is_empty() {
        eprintln!(
            "error: --only {:?} matches no checks; run without --only to list all",
            args.only.as_deref().unwrap_or("")
        );
        return EXIT_CONFIG;
    }
    let width = selected.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut rows = Vec::new();
    let mut failed = 0usize;
    for check in &selected {
        let (passed, detail) = match (check.run)() {
            Ok(d) => (true, d),
            Err(d) => {
                failed += 1;
                (false, d)
            }
        };
        println!(
            "{} {:<width$}  {}",
            if passed { "PASS" } else { "FAIL" },
            check.name,
            detail,
        );
        rows.push(json!({ "name": check.name, "passed": passed, "detail": detail }));
    }
    println!(
        "verify: {} passed, {} failed, {} run",
        selected.len() - failed,
        failed,
        selected.len()
    );
    let report = json!({
        "command": "verify",
        "only": args.only,
        "total": selected.len(),
        "passed": selected.len() - failed,
        "failed": failed,
        "checks": rows,
    });
    if let Err(e) = write_json(&args.output.join("verify_report.json"), &report) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    if failed == 0 {
        EXIT_SUCCESS
    } else {
        EXIT_VERIFICATION
    }
}
