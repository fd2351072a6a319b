//! Fixed-point solver for `u = u^p * G_s` and the symmetry, moving-plane,
//! decay and nonexistence-rate diagnostics evaluated on solved fields.
//!
//! Solutions come in the scaling family `mu^{2s/(p-1)} u(mu x + x0)`, so an
//! unnormalized Picard iteration drifts along the family instead of
//! converging.  The iteration here renormalizes every step (sup norm one by
//! default) and blends with a damping factor; the absorbed scale is solved
//! in closed form from `p`-homogeneity each iterate and reported as
//! `scale_factor`, so `scale_factor * field` satisfies the unnormalized
//! equation.
//!
//! For `1 < p <= N/(N-2s)` only the trivial solution exists, and the solver
//! rejects the regime outright rather than producing a discretization
//! artifact.

use crate::error::{Error, Result};
use crate::geometry::{DiagonalSign, Hyperplane, HyperplaneKind};
use crate::grid::{Field, Grid};
use crate::params::FractionalParams;
use crate::potential::PotentialTable;
use crate::quad::{apply_1d_fractional_with_breakpoints, apply_operator, QuadratureConfig};
use crate::spectral::{apply_spectral, fft_nd};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Normalization absorbed by the iteration each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveNormalization {
    SupToOne,
    L2ToOne,
}

/// Initial iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// `exp(-|x|^2 / (2 (L/6)^2))`, symmetric under all reflections.
    GaussianBump,
    /// `exp(-sum_i w_i x_i^2 / (2 (L/6)^2))` with per-axis weights.
    AnisotropicBump(Vec<f64>),
    /// A previously stored field in the binary format.
    FromFile(PathBuf),
}

/// Iteration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_iters: usize,
    pub tol_residual: f64,
    /// Blend weight in `(0, 1]`: 1 is undamped Picard.
    pub damping: f64,
    pub normalization: SolveNormalization,
    pub init: InitKind,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iters: 500,
            tol_residual: 1e-6,
            damping: 0.5,
            normalization: SolveNormalization::SupToOne,
            init: InitKind::GaussianBump,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::invalid("tol_residual must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping must lie in (0, 1]"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if let InitKind::AnisotropicBump(w) = &self.init {
            if w.iter().any(|wi| !(*wi > 0.0)) {
                return Err(Error::invalid("axis weights must be positive"));
            }
        }
        Ok(())
    }
}

/// Converged (or best-effort) normalized profile with its history.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub field: Field,
    pub residual_history: Vec<f64>,
    /// Amplitude restoring the unnormalized equation:
    /// `scale_factor * field = (scale_factor * field)^p * G`.
    pub scale_factor: f64,
    pub converged: bool,
}

#[derive(Serialize, Deserialize)]
struct SolveSummary {
    residual_history: Vec<f64>,
    scale_factor: f64,
    converged: bool,
}

impl SolveResult {
    /// Writes the field in the binary format at `path` and the run summary
    /// (residual history, scale factor, convergence flag) next to it with a
    /// `.json` extension.
    pub fn write(&self, path: &Path) -> Result<()> {
        self.field.write_binary(path)?;
        let summary = SolveSummary {
            residual_history: self.residual_history.clone(),
            scale_factor: self.scale_factor,
            converged: self.converged,
        };
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Format(format!("summary serialization failed: {e}")))?;
        std::fs::write(path.with_extension("json"), text)?;
        Ok(())
    }
}

/// Per-plane sup-norm reflection residuals and the lattice measure of
/// radial deviation about a center.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub center: Vec<f64>,
    /// `sup |u - u o reflect|` across the axis plane through the center,
    /// one entry per axis.
    pub axis_residuals: Vec<f64>,
    pub diagonal_residuals: Vec<DiagonalResidual>,
    /// Max over equal-radius node classes of the standard deviation of `u`
    /// on the class, normalized by `sup |u|`.  Zero (up to rounding) for
    /// radial fields; substantially positive for anisotropic ones.
    pub radial_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagonalResidual {
    pub i: usize,
    pub j: usize,
    pub sign: DiagonalSign,
    pub residual: f64,
}

/// Moving-plane sweep along one plane kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlaneScan {
    pub direction: HyperplaneKind,
    pub lambdas: Vec<f64>,
    /// `min over the half-space mask of u(reflect(x)) - u(x)` per lambda.
    pub min_w: Vec<f64>,
    /// Zero crossing of `min_w`, located by bisection; absent when the scan
    /// range contains no sign change.
    pub critical_lambda: Option<f64>,
}

fn clamped_power(values: &[f64], p: f64, out: &mut [f64]) {
    if p == 1.0 {
        out.copy_from_slice(values);
        return;
    }
    for (o, &v) in out.iter_mut().zip(values) {
        *o = if v <= 0.0 { 0.0 } else { v.powf(p) };
    }
}

fn check_kernel_compatible(grid: &Grid, kernel: &PotentialTable) -> Result<()> {
    let kg = kernel.field().grid();
    if kg.dim() != grid.dim() {
        return Err(Error::invalid("kernel and field dimensions differ"));
    }
    for axis in 0..grid.dim() {
        if kg.counts()[axis] != 2 * grid.counts()[axis] {
            return Err(Error::invalid(format!(
                "kernel must tabulate the doubled box: axis {axis} has {} \
                 nodes for a field with {}",
                kg.counts()[axis],
                grid.counts()[axis]
            )));
        }
        let (hk, hu) = (kg.spacing(axis), grid.spacing(axis));
        if (hk - hu).abs() > 1e-12 * hu {
            return Err(Error::invalid(format!(
                "kernel spacing {hk} does not match field spacing {hu} on \
                 axis {axis}"
            )));
        }
    }
    Ok(())
}

/// Zero-padded linear convolution `u^p * G` on the field's grid.
///
/// The kernel table must cover the doubled box (extent `2L`, `2n` nodes per
/// axis, same spacing), so every node difference lands on a kernel node and
/// the cyclic convolution of the padded arrays is exactly the linear one.
/// The kernel's origin cell enters through whatever its singular-cell
/// policy stored (the analytic cell average by default).
pub fn convolve_power(u: &Field, p: f64, kernel: &PotentialTable) -> Result<Field> {
    let grid = u.grid();
    check_kernel_compatible(grid, kernel)?;
    if let Some(bad) = u.values().iter().find(|v| **v < -1e-12) {
        return Err(Error::invalid(format!(
            "field has a negative entry {bad}; the iteration domain is \
             nonnegative"
        )));
    }
    let dim = grid.dim();
    let padded: Vec<usize> = grid.counts().iter().map(|n| 2 * n).collect();
    let m_total: usize = padded.iter().product();

    // a = u^p zero-padded into the doubled box, b = kernel values
    let mut a = vec![Complex::new(0.0, 0.0); m_total];
    let mut up = vec![0.0; grid.len()];
    clamped_power(u.values(), p, &mut up);
    let mut idx = vec![0usize; dim];
    for (flat, &val) in up.iter().enumerate() {
        grid.multi_index(flat, &mut idx);
        let mut padded_flat = 0;
        for axis in 0..dim {
            padded_flat = padded_flat * padded[axis] + idx[axis];
        }
        a[padded_flat] = Complex::new(val, 0.0);
    }
    let mut b: Vec<Complex<f64>> = kernel
        .field()
        .values()
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();

    fft_nd(&mut a, &padded, false);
    fft_nd(&mut b, &padded, false);
    for (av, bv) in a.iter_mut().zip(&b) {
        *av *= *bv;
    }
    fft_nd(&mut a, &padded, true);

    // result at field node k sits at padded index k + n per axis, and the
    // quadrature weight of the node sum is the cell volume
    let volume: f64 = (0..dim).map(|axis| grid.spacing(axis)).product();
    let scale = volume / m_total as f64;
    let mut out = vec![0.0; grid.len()];
    for (flat, o) in out.iter_mut().enumerate() {
        grid.multi_index(flat, &mut idx);
        let mut padded_flat = 0;
        for axis in 0..dim {
            padded_flat = padded_flat * padded[axis] + idx[axis] + grid.counts()[axis];
        }
        *o = a[padded_flat].re * scale;
    }
    Field::from_values(grid.clone(), out)
}

fn norm_of(values: &[f64], grid: &Grid, normalization: SolveNormalization) -> f64 {
    match normalization {
        SolveNormalization::SupToOne => values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        SolveNormalization::L2ToOne => {
            let volume: f64 = (0..grid.dim()).map(|a| grid.spacing(a)).product();
            (values.iter().map(|v| v * v).sum::<f64>() * volume).sqrt()
        }
    }
}

/// Relative sup-norm residual `sup |u - gamma (u^p * G)| / sup |u|` with
/// the scale `gamma` fitted from the normalization constraint.
#[cfg(test)]
fn fitted_residual(
    u: &Field,
    p: f64,
    kernel: &PotentialTable,
    normalization: SolveNormalization,
) -> Result<(f64, f64)> {
    let v = convolve_power(u, p, kernel)?;
    let nu = norm_of(u.values(), u.grid(), normalization);
    let nv = norm_of(v.values(), v.grid(), normalization);
    if nv == 0.0 {
        return Err(Error::numerical("iteration collapsed to zero"));
    }
    let gamma = nu / nv;
    let sup_u = u.sup_norm().max(f64::MIN_POSITIVE);
    let res = u
        .values()
        .iter()
        .zip(v.values())
        .fold(0.0f64, |m, (uu, vv)| m.max((uu - gamma * vv).abs()))
        / sup_u;
    Ok((res, gamma))
}

fn build_init(grid: &Grid, init: &InitKind) -> Result<Field> {
    let sigma = grid.extent() / 6.0;
    match init {
        InitKind::GaussianBump => Ok(Field::sample(grid.clone(), |x| {
            (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * sigma * sigma)).exp()
        })),
        InitKind::AnisotropicBump(w) => {
            if w.len() != grid.dim() {
                return Err(Error::invalid("one axis weight per dimension required"));
            }
            let w = w.clone();
            Ok(Field::sample(grid.clone(), move |x| {
                (-x.iter()
                    .zip(&w)
                    .map(|(c, wi)| wi * c * c)
                    .sum::<f64>()
                    / (2.0 * sigma * sigma))
                    .exp()
            }))
        }
        InitKind::FromFile(path) => {
            let f = Field::read_binary(path)?;
            if f.grid().counts() != grid.counts() {
                return Err(Error::invalid("stored init does not match the grid"));
            }
            Ok(f)
        }
    }
}

/// Damped, normalized Picard iteration for `u = u^p * G_s`.
///
/// Rejects `p <= N/(N-2s)` (only the trivial solution exists there).
/// Divergence (residual growing tenfold over 50 iterations) is an error;
/// a run that merely fails to reach the tolerance returns with
/// `converged = false`.
///
/// The `converged` flag additionally requires the residual history to be
/// non-increasing (within floating-point slack) beyond a burn-in of half
/// the configured iteration budget.  The burn-in is that large because the
/// transient is: a bump iterate first relaxes toward a nearly-radial
/// configuration, then migrates to the anisotropic profile, and the
/// residual genuinely climbs a few percent per step during the migration
/// (measured to persist for up to ~60% of the run across damping choices
/// on benchmark grids).  Monotonicity is therefore demanded of the
/// asymptotic tail, where a trustworthy run contracts cleanly.
pub fn solve_semilinear(
    params: &FractionalParams,
    grid: &Grid,
    kernel: &PotentialTable,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    if grid.dim() != params.dim {
        return Err(Error::invalid("grid dimension does not match params"));
    }
    if let Some(threshold) = params.critical_exponent() {
        if params.p <= threshold {
            return Err(Error::RegimeRejected {
                p: params.p,
                threshold,
                dim: params.dim,
                s: params.s,
            });
        }
    }
    let mut u = build_init(grid, &cfg.init)?;
    let sup = u.sup_norm();
    if !(sup > 0.0) {
        return Err(Error::invalid("initial iterate is identically zero"));
    }
    let n0 = norm_of(u.values(), grid, cfg.normalization);
    u.values_mut().iter_mut().for_each(|v| *v /= n0);

    let mut history = Vec::with_capacity(cfg.max_iters);
    let mut gamma = 1.0;
    let mut converged = false;
    for iter in 0..cfg.max_iters {
        let v = convolve_power(&u, params.p, kernel)?;
        let nv = norm_of(v.values(), grid, cfg.normalization);
        if nv == 0.0 || !nv.is_finite() {
            return Err(Error::numerical("iteration collapsed or overflowed"));
        }
        let nu = norm_of(u.values(), grid, cfg.normalization);
        gamma = nu / nv;
        let sup_u = u.sup_norm();
        let res = u
            .values()
            .iter()
            .zip(v.values())
            .fold(0.0f64, |m, (uu, vv)| m.max((uu - gamma * vv).abs()))
            / sup_u;
        history.push(res);
        if res < cfg.tol_residual {
            converged = true;
            break;
        }
        if iter >= 50 && res > 10.0 * history[iter - 50] {
            return Err(Error::numerical(format!(
                "iteration diverging: residual {res:.3e} vs {:.3e} fifty \
                 iterations ago",
                history[iter - 50]
            )));
        }
        // damped blend toward the normalized image, then renormalize
        let d = cfg.damping;
        let uv: Vec<f64> = u
            .values()
            .iter()
            .zip(v.values())
            .map(|(uu, vv)| (1.0 - d) * uu + d * gamma * vv)
            .collect();
        let nn = norm_of(&uv, grid, cfg.normalization);
        u = Field::from_values(grid.clone(), uv.iter().map(|v| v / nn).collect())?;
    }

    // the history must not climb after the burn-in, else the run is not
    // trusted even if the last residual dipped under the tolerance
    let burn_in = cfg.max_iters / 2;
    if converged && history.len() > burn_in {
        let tail = &history[burn_in..];
        if tail.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-6)) {
            converged = false;
        }
    }
    Ok(SolveResult {
        field: u,
        residual_history: history,
        scale_factor: gamma.powf(1.0 / (params.p - 1.0)),
        converged,
    })
}

/// Relative sup-norm of `(-I)u - u^p` over interior nodes (within half the
/// extent per axis), using the periodic spectral operator.  Cross-validates
/// the convolution formulation against the differential one; expect a
/// discretization-limited level rather than the solver tolerance.
pub fn spectral_residual(u: &Field, params: &FractionalParams) -> Result<f64> {
    let w = apply_spectral(u, params.s)?;
    let grid = u.grid();
    let mut up = vec![0.0; grid.len()];
    clamped_power(u.values(), params.p, &mut up);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let mut pt = vec![0.0; grid.dim()];
    for (flat, &upv) in up.iter().enumerate() {
        grid.node(flat, &mut pt);
        if pt.iter().any(|c| c.abs() > grid.extent() / 2.0) {
            continue;
        }
        num = num.max((w.values()[flat] - upv).abs());
        den = den.max(upv.abs());
    }
    if den == 0.0 {
        return Ok(num);
    }
    Ok(num / den)
}

fn reflection_residual(u: &Field, plane: &Hyperplane) -> f64 {
    let grid = u.grid();
    let mut pt = vec![0.0; grid.dim()];
    let mut refl = vec![0.0; grid.dim()];
    let mut sup = 0.0f64;
    for flat in 0..grid.len() {
        grid.node(flat, &mut pt);
        plane.reflect_into(&pt, &mut refl);
        if let Some(v) = u.interpolate(&refl) {
            sup = sup.max((v - u.values()[flat]).abs());
        }
    }
    sup
}

/// Reflection residuals about the axis and diagonal planes through
/// `center` (default: the argmax node) and the equal-radius lattice
/// deviation.
pub fn symmetry_report(u: &Field, center: Option<&[f64]>) -> Result<SymmetryReport> {
    let grid = u.grid();
    let dim = grid.dim();
    let center: Vec<f64> = match center {
        Some(c) => {
            if c.len() != dim {
                return Err(Error::invalid("center dimension mismatch"));
            }
            if !grid.contains(c) {
                return Err(Error::invalid("center outside the grid box"));
            }
            c.to_vec()
        }
        None => {
            let idx = u.argmax_node();
            (0..dim).map(|a| grid.coord(a, idx[a])).collect()
        }
    };
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("field has non-finite entries"));
    }

    let axis_residuals: Vec<f64> = (0..dim)
        .map(|a| reflection_residual(u, &Hyperplane::axis(a, center[a])))
        .collect();
    let mut diagonal_residuals = Vec::new();
    for i in 0..dim {
        for j in (i + 1)..dim {
            for sign in [DiagonalSign::Plus, DiagonalSign::Minus] {
                let offset = match sign {
                    DiagonalSign::Plus => center[i] + center[j],
                    DiagonalSign::Minus => center[i] - center[j],
                };
                let plane = Hyperplane::diagonal(i, j, sign, offset);
                diagonal_residuals.push(DiagonalResidual {
                    i,
                    j,
                    sign,
                    residual: reflection_residual(u, &plane),
                });
            }
        }
    }

    // group nodes by exact squared distance from the center; a radial
    // field is constant on each class, so the class standard deviation
    // measures deviation from radiality without any interpolation
    let mut classes: std::collections::BTreeMap<u64, Vec<f64>> = std::collections::BTreeMap::new();
    let mut pt = vec![0.0; dim];
    let margin: f64 = (0..dim)
        .map(|a| grid.extent() - center[a].abs())
        .fold(f64::INFINITY, f64::min);
    for flat in 0..grid.len() {
        grid.node(flat, &mut pt);
        let r2: f64 = pt
            .iter()
            .zip(&center)
            .map(|(c, m)| (c - m) * (c - m))
            .sum();
        if r2 > margin * margin {
            continue; // keep classes inside the box so they are complete
        }
        classes.entry(r2.to_bits()).or_default().push(u.values()[flat]);
    }
    let sup = u.sup_norm().max(f64::MIN_POSITIVE);
    let mut radial_deviation = 0.0f64;
    for vals in classes.values() {
        if vals.len() < 2 {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        radial_deviation = radial_deviation.max(var.sqrt() / sup);
    }

    Ok(SymmetryReport {
        center,
        axis_residuals,
        diagonal_residuals,
        radial_deviation,
    })
}

fn min_w_at(u: &Field, kind: HyperplaneKind, lambda: f64) -> Option<f64> {
    let grid = u.grid();
    let plane = Hyperplane {
        kind,
        offset: lambda,
    };
    // nodes within half a spacing of the plane are excluded: reflection
    // interpolation error dominates there
    let excl = match kind {
        HyperplaneKind::Axis { axis } => grid.spacing(axis) / 2.0,
        HyperplaneKind::Diagonal { i, j, .. } => grid.spacing(i).max(grid.spacing(j)) / 2.0,
    };
    let mut pt = vec![0.0; grid.dim()];
    let mut refl = vec![0.0; grid.dim()];
    let mut min: Option<f64> = None;
    for flat in 0..grid.len() {
        grid.node(flat, &mut pt);
        if plane.signed_coordinate(&pt) >= -excl {
            continue;
        }
        plane.reflect_into(&pt, &mut refl);
        if let Some(v) = u.interpolate(&refl) {
            let w = v - u.values()[flat];
            min = Some(min.map_or(w, |m: f64| m.min(w)));
        }
    }
    min
}

/// Sweeps the plane family over `lambdas`, recording
/// `min over the half-space mask of u(reflect(x)) - u(x)` and locating the
/// zero crossing by bisection between bracketing scan values.
pub fn moving_plane_scan(
    u: &Field,
    kind: HyperplaneKind,
    lambdas: &[f64],
) -> Result<PlaneScan> {
    kind.validate(u.grid().dim())?;
    if lambdas.len() < 2 {
        return Err(Error::invalid("scan needs at least two lambda values"));
    }
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("field has non-finite entries"));
    }
    let min_w: Vec<f64> = lambdas
        .par_iter()
        .map(|&l| min_w_at(u, kind, l).unwrap_or(f64::NAN))
        .collect();
    // locate the first transition from positive to negative scan values;
    // exact zeros (the plane sitting on a symmetry plane of the field) are
    // left inside the bracket and resolved by the bisection predicate
    let mut critical_lambda = None;
    let mut last_positive: Option<f64> = None;
    for (k, &v) in min_w.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        if v > 0.0 {
            last_positive = Some(lambdas[k]);
            continue;
        }
        if v < 0.0 {
            if let Some(lo0) = last_positive {
                let (mut lo, mut hi) = (lo0, lambdas[k]);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    match min_w_at(u, kind, mid) {
                        Some(w) if w < 0.0 => hi = mid,
                        Some(_) => lo = mid,
                        None => break,
                    }
                }
                critical_lambda = Some(0.5 * (lo + hi));
            }
            break;
        }
    }
    Ok(PlaneScan {
        direction: kind,
        lambdas: lambdas.to_vec(),
        min_w,
        critical_lambda,
    })
}

/// Least-squares decay exponent `beta` of `u ~ |x|^{-beta}` over the
/// annulus spanning the outer quarter of the box radius.
pub fn decay_fit(u: &Field, params: &FractionalParams) -> Result<f64> {
    let grid = u.grid();
    if grid.dim() != params.dim {
        return Err(Error::invalid("field dimension does not match params"));
    }
    let r_box = grid.extent();
    let (r_lo, r_hi) = (0.75 * r_box, r_box);
    let mut pts = Vec::new();
    let mut pt = vec![0.0; grid.dim()];
    for flat in 0..grid.len() {
        grid.node(flat, &mut pt);
        let r = pt.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r < r_lo || r > r_hi {
            continue;
        }
        let v = u.values()[flat];
        if !(v > 0.0) {
            return Err(Error::invalid(format!(
                "field is not positive in the fit annulus (value {v} at \
                 radius {r:.3})"
            )));
        }
        pts.push((r.ln(), v.ln()));
    }
    if pts.len() < 16 {
        return Err(Error::invalid(format!(
            "only {} annulus nodes; at least 16 required",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(-slope)
}

/// Domain of the nonexistence-rate scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiouvilleDomain {
    WholeSpace,
    HalfSpace,
}

/// Controls for [`liouville_bound_scan`]: the lattice used for the
/// test-constant sup and the mass quadratures, and the box the scan deems
/// available (rows whose test-function support exceeds it are flagged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleConfig {
    pub lattice_n: usize,
    pub box_extent: f64,
}

impl Default for LiouvilleConfig {
    fn default() -> Self {
        LiouvilleConfig {
            lattice_n: 48,
            box_extent: 64.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiouvilleRow {
    pub radius: f64,
    /// `int u^p phi_R dx` (half space: against the lifted, weight-scaled
    /// test function).
    pub mass: f64,
    /// `R^{N - 2sp/(p-1)}`, or `R^{N + s - 2sp/(p-1)}` on the half space.
    pub reference_rate: f64,
    pub ratio: f64,
    /// False when the support of `phi_R` sticks out of the configured box.
    pub within_box: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiouvilleTable {
    pub domain: LiouvilleDomain,
    /// `M = sup (-I phi) / phi` over the support lattice (half space: for
    /// the pair, `sup (-I phi_a0 - I phi_s) / phi_s`).
    pub test_constant: f64,
    pub rows: Vec<LiouvilleRow>,
}

fn bridge(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth radial bump: exactly 1 on the unit ball, exactly 0 outside the
/// ball of radius 2, infinitely smooth in between.
pub fn smooth_bump(x: &[f64]) -> f64 {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    let (up, down) = (bridge(2.0 - r), bridge(r - 1.0));
    if up == 0.0 {
        return 0.0;
    }
    up / (up + down)
}

/// Ball bump lifted off the boundary hyperplane and weighted by the
/// fractional boundary power: `(x_N)_+^alpha` times a smooth bump equal to
/// 1 on the ball of radius 3/4 about `e_N/2` and 0 outside the unit ball
/// about the same center.
pub fn halfspace_bump(x: &[f64], alpha: f64) -> f64 {
    let n = x.len();
    let xn = x[n - 1];
    if xn <= 0.0 {
        return 0.0;
    }
    let mut r2 = 0.0;
    for (k, c) in x.iter().enumerate() {
        let d = if k == n - 1 { c - 0.5 } else { *c };
        r2 += d * d;
    }
    let r = r2.sqrt();
    let (up, down) = (bridge(1.0 - r), bridge(r - 0.75));
    if up == 0.0 {
        return 0.0;
    }
    xn.powf(alpha) * up / (up + down)
}

/// The fixed intermediate exponent used for the half-space pair:
/// 3/4 of the way from `s` to `min(1, 2s)`.
pub fn halfspace_alpha0(s: f64) -> f64 {
    0.75 * 1.0f64.min(2.0 * s) + 0.25 * s
}

fn whole_space_constant(
    params: &FractionalParams,
    cfg_quad: &QuadratureConfig,
    lattice_n: usize,
) -> Result<f64> {
    let nodes: Vec<Vec<f64>> = lattice(params.dim, lattice_n, -2.0, 2.0);
    let vals: Result<Vec<Option<f64>>> = nodes
        .par_iter()
        .map(|x| {
            let phi = smooth_bump(x);
            if phi < 1e-6 {
                return Ok(None);
            }
            let iphi = apply_operator(&smooth_bump, x, params, cfg_quad)?;
            Ok(Some(-iphi / phi))
        })
        .collect();
    let m = vals?
        .into_iter()
        .flatten()
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::numerical("no lattice point inside the bump support"));
    }
    Ok(m)
}

fn half_space_constant(
    params: &FractionalParams,
    cfg_quad: &QuadratureConfig,
    lattice_n: usize,
) -> Result<f64> {
    let dim = params.dim;
    let alpha0 = halfspace_alpha0(params.s);
    let mut nodes = Vec::new();
    // lattice over the bounding box of the lifted ball, positive side only
    let mut idx = vec![0usize; dim];
    loop {
        let mut x = vec![0.0; dim];
        for a in 0..dim {
            let (lo, hi) = if a == dim - 1 { (0.0, 1.5) } else { (-1.0, 1.0) };
            x[a] = lo + (idx[a] as f64 + 0.5) * (hi - lo) / lattice_n as f64;
        }
        nodes.push(x);
        let mut carry = true;
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < lattice_n {
                carry = false;
                break;
            }
            idx[a] = 0;
        }
        if carry {
            break;
        }
    }
    let vals: Result<Vec<Option<f64>>> = nodes
        .par_iter()
        .map(|x| {
            let phi_s = halfspace_bump(x, params.s);
            if phi_s < 1e-6 {
                return Ok(None);
            }
            let mut total = 0.0;
            for axis in 0..dim {
                // the boundary power kinks where the axis line crosses
                // x_N = 0; hand that location to the quadrature
                let breaks: &[f64] = &[x[dim - 1]];
                let breaks = if axis == dim - 1 { breaks } else { &[] };
                let f0 = |y: &[f64]| halfspace_bump(y, alpha0);
                let fs = |y: &[f64]| halfspace_bump(y, params.s);
                total -= apply_1d_fractional_with_breakpoints(&f0, x, axis, breaks, params, cfg_quad)?;
                total -= apply_1d_fractional_with_breakpoints(&fs, x, axis, breaks, params, cfg_quad)?;
            }
            Ok(Some(total / phi_s))
        })
        .collect();
    let m = vals?
        .into_iter()
        .flatten()
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::numerical("no lattice point inside the bump support"));
    }
    Ok(m)
}

fn lattice(dim: usize, n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut nodes = Vec::with_capacity(n.pow(dim as u32));
    let mut idx = vec![0usize; dim];
    loop {
        nodes.push(
            idx.iter()
                .map(|&k| lo + (k as f64 + 0.5) * (hi - lo) / n as f64)
                .collect(),
        );
        let mut carry = true;
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < n {
                carry = false;
                break;
            }
            idx[a] = 0;
        }
        if carry {
            break;
        }
    }
    nodes
}

/// The supersolution test constant of the fixed bump and the mass-to-rate
/// table across the given radii.
///
/// Part (a): `M = sup (-I phi)/phi` over the bump support (half space: the
/// corresponding sup for the pair `(phi_{a0}, phi_s)`), finite and stable
/// under lattice refinement.  Part (b): for each `R`, the mass
/// `int u^p phi_R dx` against the scaled bump and the reference rate
/// `R^{N-2sp/(p-1)}` (half space: weight-scaled bump `R^s phi_s(x/R)` and
/// rate `R^{N+s-2sp/(p-1)}`).
pub fn liouville_bound_scan<F>(
    u: F,
    params: &FractionalParams,
    radii: &[f64],
    domain: LiouvilleDomain,
    cfg: &LiouvilleConfig,
) -> Result<LiouvilleTable>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid("radii must be positive"));
    }
    if cfg.lattice_n < 8 {
        return Err(Error::invalid("lattice_n must be at least 8"));
    }
    let cfg_quad = QuadratureConfig::default();
    let test_constant = match domain {
        LiouvilleDomain::WholeSpace => whole_space_constant(params, &cfg_quad, cfg.lattice_n)?,
        LiouvilleDomain::HalfSpace => half_space_constant(params, &cfg_quad, cfg.lattice_n)?,
    };

    let dim = params.dim;
    let mn = 2 * cfg.lattice_n; // mass lattice: finer than the sup lattice
    let rows: Result<Vec<LiouvilleRow>> = radii
        .iter()
        .map(|&radius| {
            let (nodes, cell): (Vec<Vec<f64>>, f64) = match domain {
                LiouvilleDomain::WholeSpace => {
                    let step = 4.0 * radius / mn as f64;
                    (
                        lattice(dim, mn, -2.0 * radius, 2.0 * radius),
                        step.powi(dim as i32),
                    )
                }
                LiouvilleDomain::HalfSpace => {
                    let mut nodes = Vec::new();
                    let mut idx = vec![0usize; dim];
                    let step = 2.0 * radius / mn as f64;
                    loop {
                        let mut x = vec![0.0; dim];
                        for a in 0..dim {
                            let lo = if a == dim - 1 { 0.0 } else { -radius };
                            x[a] = lo + (idx[a] as f64 + 0.5) * step;
                        }
                        nodes.push(x);
                        let mut carry = true;
                        for a in (0..dim).rev() {
                            idx[a] += 1;
                            if idx[a] < if a == dim - 1 { mn * 3 / 4 } else { mn } {
                                carry = false;
                                break;
                            }
                            idx[a] = 0;
                        }
                        if carry {
                            break;
                        }
                    }
                    (nodes, step.powi(dim as i32))
                }
            };
            let mass: f64 = nodes
                .par_iter()
                .map(|x| {
                    let scaled: Vec<f64> = x.iter().map(|c| c / radius).collect();
                    let phi = match domain {
                        LiouvilleDomain::WholeSpace => smooth_bump(&scaled),
                        LiouvilleDomain::HalfSpace => {
                            radius.powf(params.s) * halfspace_bump(&scaled, params.s)
                        }
                    };
                    if phi == 0.0 {
                        return 0.0;
                    }
                    let uv = u(x);
                    if uv <= 0.0 {
                        0.0
                    } else {
                        uv.powf(params.p) * phi
                    }
                })
                .sum::<f64>()
                * cell;
            let exponent = match domain {
                LiouvilleDomain::WholeSpace => {
                    dim as f64 - 2.0 * params.s * params.p / (params.p - 1.0)
                }
                LiouvilleDomain::HalfSpace => {
                    dim as f64 + params.s - 2.0 * params.s * params.p / (params.p - 1.0)
                }
            };
            let reference_rate = radius.powf(exponent);
            let within_box = match domain {
                LiouvilleDomain::WholeSpace => 2.0 * radius <= cfg.box_extent,
                LiouvilleDomain::HalfSpace => 1.5 * radius <= cfg.box_extent,
            };
            Ok(LiouvilleRow {
                radius,
                mass,
                reference_rate,
                ratio: mass / reference_rate,
                within_box,
            })
        })
        .collect();
    Ok(LiouvilleTable {
        domain,
        test_constant,
        rows: rows?,
    })
}
