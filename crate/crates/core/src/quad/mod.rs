//! Principal-value quadrature for the coordinate-wise fractional operator.
//!
//! The one-dimensional piece along axis `i` is
//! `I_i u(x) = pref * int_R (u(x+t e_i) + u(x-t e_i) - 2 u(x)) / |t|^{1+2s} dt`
//! with `pref = C_s/2` in the probabilistic normalization and `pref = 1`
//! in the plain one; the full operator is the sum over axes.  This module
//! evaluates these integrals pointwise for function inputs, together with
//! the bilinear remainder `I[g,h]`, boundary-power diagnostics on the
//! half-space, integration-by-parts residuals, and a narrow-band kernel
//! tail bound.

pub mod constants;
pub mod field_op;
pub mod rules;

pub use constants::{c_alpha, cs_constant, stable_cosine_integral, TrigKind};
pub use field_op::FieldOperator;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::params::{FractionalParams, Normalization};
use rules::{adaptive_quad, left_singular_quad};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;

/// Discretization parameters for the pointwise principal-value integrals.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Radius `h0` of the graded core around `t = 0` (dyadic panels with
    /// singular-endpoint extrapolation).
    pub inner_cutoff: f64,
    /// Truncation point `T` of the `|t|` integral; beyond it the analytic
    /// tail model takes over.
    pub tail_limit: f64,
    /// Maximum number of dyadic panels spent on the core `(0, h0]`.
    pub nodes_core: usize,
    /// Number of logarithmically spaced panels on `[h0, T]`.
    pub nodes_tail: usize,
    /// Assumed far-field behavior of the input: `u(x + t e_i)` is modeled
    /// as `u(x ± T e_i) · (T/|t|)^beta` for `|t| > T`.  Zero models
    /// approach to a constant, positive values decay, negative values
    /// model polynomial growth; `beta + 2s > 0` is required at apply time.
    pub tail_decay_exponent: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            inner_cutoff: 0.5,
            tail_limit: 64.0,
            nodes_core: 400,
            nodes_tail: 48,
            tail_decay_exponent: 0.0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_cutoff.is_finite() && self.inner_cutoff > 0.0) {
            return Err(Error::invalid("inner_cutoff must be positive and finite"));
        }
        if !(self.tail_limit.is_finite() && self.tail_limit > self.inner_cutoff) {
            return Err(Error::invalid("tail_limit must be finite and exceed inner_cutoff"));
        }
        if self.nodes_core < 8 || self.nodes_tail < 8 {
            return Err(Error::invalid("nodes_core and nodes_tail must both be at least 8"));
        }
        if !self.tail_decay_exponent.is_finite() {
            return Err(Error::invalid("tail_decay_exponent must be finite"));
        }
        Ok(())
    }
}

/// Constant multiplying the raw kernel integral: `C_s / 2` in the
/// probabilistic normalization, `1` in the plain one.
pub fn kernel_prefactor(params: &FractionalParams) -> Result<f64> {
    match params.normalization {
        Normalization::Plain => Ok(1.0),
        Normalization::Probabilistic => Ok(0.5 * cs_constant(params.s)?),
    }
}

fn check_point(x: &[f64], params: &FractionalParams) -> Result<()> {
    if x.len() != params.dim {
        return Err(Error::invalid(format!(
            "point has {} coordinates but dim = {}",
            x.len(),
            params.dim
        )));
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("point has non-finite coordinates"));
    }
    Ok(())
}

/// `int_0^T f(t) dt` for an integrand with an integrable singularity at 0:
/// dyadic panels with geometric extrapolation up to the first breakpoint
/// (or the inner cutoff), then adaptive panels on a logarithmic grading of
/// `[h0, T]` whose edges are augmented by the supplied kink locations.
fn halfline_graded_quad<F: Fn(f64) -> f64>(
    f: &F,
    cfg: &QuadratureConfig,
    breaks: &[f64],
    abs_tol: f64,
) -> f64 {
    let h0 = cfg.inner_cutoff;
    let t_lim = cfg.tail_limit;
    let m = cfg.nodes_tail;
    let ratio = t_lim / h0;
    let mut edges: Vec<f64> = (0..=m)
        .map(|j| h0 * ratio.powf(j as f64 / m as f64))
        .collect();
    for &b in breaks {
        if b > 0.0 && b < t_lim {
            edges.push(b);
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let (mut total, _) = left_singular_quad(f, edges[0], 0.4 * abs_tol, cfg.nodes_core);
    let panel_tol = 0.6 * abs_tol / (edges.len() - 1) as f64;
    for w in edges.windows(2) {
        total += adaptive_quad(f, w[0], w[1], panel_tol, 26).0;
    }
    total
}

/// The one-dimensional fractional piece `I_i u(x)` along `axis`.
///
/// The core `|t| < h0` integrates the symmetric second difference directly
/// (the integrand is `O(|t|^{1-2s})`); `h0 <= |t| <= T` uses graded-node
/// quadrature; beyond `T` the `-2u(x)` part of the kernel integral is
/// exact and the `u(x ± t e_i)` part uses the configured decay model.  A
/// far sample exactly equal to `u(x)` is treated as a constant slice (so
/// constant inputs are annihilated for every decay exponent).
pub fn apply_1d_fractional<F>(
    u: &F,
    x: &[f64],
    axis: usize,
    params: &FractionalParams,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    apply_1d_fractional_with_breakpoints(u, x, axis, &[], params, cfg)
}

/// As [`apply_1d_fractional`], with quadrature panels split at the given
/// positive `|t|` locations where the 1-D slice loses smoothness (kinks of
/// half-space power weights, box edges of sampled fields, and so on).
pub fn apply_1d_fractional_with_breakpoints<F>(
    u: &F,
    x: &[f64],
    axis: usize,
    breaks: &[f64],
    params: &FractionalParams,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    check_point(x, params)?;
    cfg.validate()?;
    if axis >= params.dim {
        return Err(Error::invalid(format!(
            "axis {axis} out of range for dim {}",
            params.dim
        )));
    }
    let s = params.s;
    let beta = cfg.tail_decay_exponent;
    if beta + 2.0 * s <= 0.0 {
        return Err(Error::invalid(format!(
            "tail_decay_exponent = {beta} must satisfy beta + 2s > 0 (s = {s})"
        )));
    }
    let ux = u(x);
    if !ux.is_finite() {
        return Err(Error::numerical(format!("u is not finite at {x:?}")));
    }
    let buf = RefCell::new(x.to_vec());
    let sample = |t: f64| {
        let mut b = buf.borrow_mut();
        b[axis] = x[axis] + t;
        u(&b)
    };
    let f = |t: f64| {
        let d = sample(t) + sample(-t) - 2.0 * ux;
        // exact-zero differences short-circuit so underflowed slices never
        // meet the unbounded kernel weight
        if d == 0.0 {
            0.0
        } else {
            d * t.powf(-1.0 - 2.0 * s)
        }
    };
    let tol = 1e-10 * ux.abs().max(1.0);
    let half = halfline_graded_quad(&f, cfg, breaks, tol);
    let t_lim = cfg.tail_limit;
    let t2s = t_lim.powf(2.0 * s);
    let mut tail = -2.0 * ux / (s * t2s);
    for sigma in [1.0, -1.0] {
        let far = sample(sigma * t_lim);
        if !far.is_finite() {
            return Err(Error::numerical(format!(
                "u is not finite at the tail sample along axis {axis}"
            )));
        }
        tail += if far == ux {
            2.0 * far / (2.0 * s * t2s)
        } else {
            2.0 * far / ((beta + 2.0 * s) * t2s)
        };
    }
    let value = kernel_prefactor(params)? * (2.0 * half + tail);
    if !value.is_finite() {
        return Err(Error::numerical(format!(
            "quadrature produced a non-finite value at {x:?} along axis {axis}"
        )));
    }
    Ok(value)
}

/// The full operator `I u(x) = sum_i I_i u(x)` for a function input.
pub fn apply_operator<F>(
    u: &F,
    x: &[f64],
    params: &FractionalParams,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    (0..params.dim).try_fold(0.0, |acc, axis| {
        Ok(acc + apply_1d_fractional(u, x, axis, params, cfg)?)
    })
}

/// The full operator applied to a sampled field at a point strictly inside
/// the interpolation hull.  Along each axis line the field is evaluated by
/// multilinear interpolation; beyond the hull the slice is extended by the
/// decay model `u(exit) * (d_exit / d)^beta` measured from `x` along the
/// ray, consistent with the tail model of [`apply_1d_fractional`].
pub fn apply_operator_field(
    field: &Field,
    x: &[f64],
    params: &FractionalParams,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let grid = field.grid();
    if grid.dim() != params.dim {
        return Err(Error::invalid(format!(
            "field dim {} does not match params dim {}",
            grid.dim(),
            params.dim
        )));
    }
    check_point(x, params)?;
    if !grid.in_interpolation_hull(x) {
        return Err(Error::invalid(format!(
            "point {x:?} is outside the field's interpolation hull"
        )));
    }
    let beta = cfg.tail_decay_exponent;
    let hull: Vec<(f64, f64)> = (0..grid.dim())
        .map(|i| {
            let h = grid.spacing(i);
            (-grid.extent(), grid.extent() - h)
        })
        .collect();
    let base_x = x.to_vec();
    let u = move |y: &[f64]| -> f64 {
        let mut inside = true;
        for (i, &c) in y.iter().enumerate() {
            if c < hull[i].0 || c > hull[i].1 {
                inside = false;
                break;
            }
        }
        if inside {
            return field.interpolate(y).unwrap_or(f64::NAN);
        }
        // axis-line evaluation beyond the hull: clamp the offending
        // coordinate to the exit point and scale by the decay model
        let mut yc = y.to_vec();
        let mut factor = 1.0;
        for i in 0..yc.len() {
            if yc[i] < hull[i].0 || yc[i] > hull[i].1 {
                let clamped = yc[i].clamp(hull[i].0, hull[i].1);
                let d_out = (y[i] - base_x[i]).abs();
                let d_in = (clamped - base_x[i]).abs().max(1e-300);
                factor *= (d_in / d_out).powf(beta);
                yc[i] = clamped;
            }
        }
        match field.interpolate(&yc) {
            Some(v) => v * factor,
            None => f64::NAN,
        }
    };
    // panels must break at the hull exits, where the extension model kinks
    let mut value = 0.0;
    for axis in 0..params.dim {
        let h = grid.spacing(axis);
        let exits = [
            (grid.extent() - h - x[axis]).abs(),
            (x[axis] + grid.extent()).abs(),
        ];
        value += apply_1d_fractional_with_breakpoints(&u, x, axis, &exits, params, cfg)?;
    }
    Ok(value)
}

/// One axis term `I_i[g, h](x)` of the bilinear product remainder
/// `I(gh) = g I(h) + h I(g) + I[g, h]`, carrying the same normalization
/// prefactor as the operator itself.
pub fn product_remainder_axis<G, H>(
    g: &G,
    h: &H,
    x: &[f64],
    axis: usize,
    params: &FractionalParams,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
    H: Fn(&[f64]) -> f64 + ?Sized,
{
    product_remainder_axis_with_breakpoints(g, h, x, axis, &[], params, cfg)
}

/// As [`product_remainder_axis`] with panel splits at the given kinks.
pub fn product_remainder_axis_with_breakpoints<G, H>(
    g: &G,
    h: &H,
    x: &[f64],
    axis: usize,
    breaks: &[f64],
    params: &FractionalParams,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
    H: Fn(&[f64]) -> f64 + ?Sized,
{
    check_point(x, params)?;
    cfg.validate()?;
    if axis >= params.dim {
        return Err(Error::invalid(format!(
            "axis {axis} out of range for dim {}",
            params.dim
        )));
    }
    let s = params.s;
    let beta = cfg.tail_decay_exponent;
    if beta + 2.0 * s <= 0.0 {
        return Err(Error::invalid(format!(
            "tail_decay_exponent = {beta} must satisfy beta + 2s > 0 (s = {s})"
        )));
    }
    let gx = g(x);
    let hx = h(x);
    if !(gx.is_finite() && hx.is_finite()) {
        return Err(Error::numerical(format!("factor not finite at {x:?}")));
    }
    let buf = RefCell::new(x.to_vec());
    let pair = |t: f64| -> (f64, f64) {
        let mut b = buf.borrow_mut();
        b[axis] = x[axis] + t;
        (g(&b), h(&b))
    };
    let f = |t: f64| {
        let (gp, hp) = pair(t);
        let (gm, hm) = pair(-t);
        let d = (gp - gx) * (hp - hx) + (gm - gx) * (hm - hx);
        if d == 0.0 {
            0.0
        } else {
            d * t.powf(-1.0 - 2.0 * s)
        }
    };
    let tol = 1e-10 * (gx.abs().max(1.0) * hx.abs().max(1.0));
    let half = halfline_graded_quad(&f, cfg, breaks, tol);
    // analytic tail: each factor's far field is modeled by
    // f(x + sigma T e) * (T/t)^beta; a far sample exactly equal to the
    // center value marks a slice that never varies, contributing nothing.
    let t_lim = cfg.tail_limit;
    let t2s = t_lim.powf(2.0 * s);
    let mut tail = 0.0;
    for sigma in [1.0, -1.0] {
        let (ge, he) = pair(sigma * t_lim);
        if !(ge.is_finite() && he.is_finite()) {
            return Err(Error::numerical("factor not finite at the tail sample".to_string()));
        }
        if ge == gx || he == hx {
            continue;
        }
        for (c, gamma) in [
            (ge * he, 2.0 * beta + 2.0 * s),
            (-(ge * hx + gx * he), beta + 2.0 * s),
            (gx * hx, 2.0 * s),
        ] {
            if c != 0.0 {
                if gamma <= 0.0 {
                    return Err(Error::invalid(
                        "modeled far-field product decays slower than the kernel; \
                         increase tail_decay_exponent or tail_limit",
                    ));
                }
                tail += c / (gamma * t2s);
            }
        }
    }
    // the symmetric pair of products is even in t, and the operator
    // integrates over the whole line, hence the factor two on the
    // half-line quadrature and on its tail model
    let value = kernel_prefactor(params)? * 2.0 * (half + tail);
    if !value.is_finite() {
        return Err(Error::numerical(format!(
            "bilinear remainder produced a non-finite value at {x:?}"
        )));
    }
    Ok(value)
}

/// The full bilinear remainder `I[g, h](x) = sum_i I_i[g, h](x)`.
pub fn product_remainder<G, H>(
    g: &G,
    h: &H,
    x: &[f64],
    params: &FractionalParams,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
    H: Fn(&[f64]) -> f64 + ?Sized,
{
    (0..params.dim).try_fold(0.0, |acc, axis| {
        Ok(acc + product_remainder_axis(g, h, x, axis, params, cfg)?)
    })
}

/// Integration domain for [`ibp_residual`].
#[derive(Debug, Clone)]
pub enum IbpMode {
    /// Tensor-trapezoid integrals over a fixed box in all coordinates
    /// (half-width 8/6/4.5/4 with 193/49/25/13 nodes per axis for
    /// dimensions 1/2/3/4+).
    FullSpace,
    /// One-dimensional integrals along the operator axis through the
    /// given base point (range [-8, 8], 321 nodes).
    AxisLine(Vec<f64>),
    /// Upper-half-space integrals against the weighted test function
    /// `(x_N)_+^alpha * phi(x)`; the value is alpha and must lie in
    /// `((2s-1)_+, 2s)`.  The last coordinate integral is graded toward
    /// the boundary; lateral coordinates use a trapezoid box.
    HalfSpaceWeighted(f64),
}

fn trapezoid_weight(k: usize, n: usize) -> f64 {
    if k == 0 || k + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// `|int u I_i(test) dx - int (test) I_i(u) dx|` over the truncated domain
/// selected by `mode`, with the test function being `phi` itself
/// (`FullSpace`, `AxisLine`) or the weighted `(x_N)_+^alpha phi`
/// (`HalfSpaceWeighted`).
pub fn ibp_residual<U, P>(
    u: &U,
    phi: &P,
    axis: usize,
    params: &FractionalParams,
    cfg: &QuadratureConfig,
    mode: &IbpMode,
) -> Result<f64>
where
    U: Fn(&[f64]) -> f64 + Sync,
    P: Fn(&[f64]) -> f64 + Sync,
{
    use rayon::prelude::*;
    cfg.validate()?;
    if axis >= params.dim {
        return Err(Error::invalid(format!(
            "axis {axis} out of range for dim {}",
            params.dim
        )));
    }
    let dim = params.dim;
    match mode {
        IbpMode::FullSpace => {
            let (half, nn) = match dim {
                1 => (8.0, 193usize),
                2 => (6.0, 49),
                3 => (4.5, 25),
                _ => (4.0, 13),
            };
            let step = 2.0 * half / (nn - 1) as f64;
            let count: usize = nn.pow(dim as u32);
            let terms: Result<Vec<f64>> = (0..count)
                .into_par_iter()
                .map(|flat| {
                    let mut rem = flat;
                    let mut pt = vec![0.0; dim];
                    let mut w = step.powi(dim as i32);
                    for i in (0..dim).rev() {
                        let k = rem % nn;
                        rem /= nn;
                        pt[i] = -half + k as f64 * step;
                        w *= trapezoid_weight(k, nn);
                    }
                    let iphi = apply_1d_fractional(phi, &pt, axis, params, cfg)?;
                    let iu = apply_1d_fractional(u, &pt, axis, params, cfg)?;
                    Ok(w * (u(&pt) * iphi - phi(&pt) * iu))
                })
                .collect();
            Ok(terms?.iter().sum::<f64>().abs())
        }
        IbpMode::AxisLine(base) => {
            if base.len() != dim {
                return Err(Error::invalid(format!(
                    "axis-line base point has {} coordinates but dim = {}",
                    base.len(),
                    dim
                )));
            }
            let half = 8.0;
            let nn = 321usize;
            let step = 2.0 * half / (nn - 1) as f64;
            let terms: Result<Vec<f64>> = (0..nn)
                .into_par_iter()
                .map(|k| {
                    let mut pt = base.clone();
                    pt[axis] = -half + k as f64 * step;
                    let w = step * trapezoid_weight(k, nn);
                    let iphi = apply_1d_fractional(phi, &pt, axis, params, cfg)?;
                    let iu = apply_1d_fractional(u, &pt, axis, params, cfg)?;
                    Ok(w * (u(&pt) * iphi - phi(&pt) * iu))
                })
                .collect();
            Ok(terms?.iter().sum::<f64>().abs())
        }
        IbpMode::HalfSpaceWeighted(alpha) => {
            let alpha = *alpha;
            let lower = (2.0 * params.s - 1.0).max(0.0);
            if !(alpha > lower && alpha < 2.0 * params.s) {
                return Err(Error::invalid(format!(
                    "alpha = {alpha} must lie in ({lower}, {})",
                    2.0 * params.s
                )));
            }
            let last = dim - 1;
            let v = move |y: &[f64]| y[last].max(0.0).powf(alpha) * phi(y);
            let (l_lat, n_lat) = (5.0, 33usize);
            let step = 2.0 * l_lat / (n_lat - 1) as f64;
            let lat_count: usize = n_lat.pow((dim - 1) as u32);
            let integrand = |z: f64| -> Result<f64> {
                let terms: Result<Vec<f64>> = (0..lat_count)
                    .into_par_iter()
                    .map(|flat| {
                        let mut rem = flat;
                        let mut pt = vec![0.0; dim];
                        pt[last] = z;
                        let mut w = step.powi((dim - 1) as i32);
                        for i in (0..dim - 1).rev() {
                            let k = rem % n_lat;
                            rem /= n_lat;
                            pt[i] = -l_lat + k as f64 * step;
                            w *= trapezoid_weight(k, n_lat);
                        }
                        let breaks: &[f64] = if axis == last { &[z] } else { &[] };
                        let iv = apply_1d_fractional_with_breakpoints(
                            &v, &pt, axis, breaks, params, cfg,
                        )?;
                        let iu = apply_1d_fractional_with_breakpoints(
                            u, &pt, axis, breaks, params, cfg,
                        )?;
                        Ok(w * (u(&pt) * iv - v(&pt) * iu))
                    })
                    .collect();
                Ok(terms?.iter().sum())
            };
            // graded outer integral in the distance to the boundary; the
            // integrand is smooth for z > 0 but only Hoelder at z = 0
            let err = RefCell::new(None::<Error>);
            let f = |z: f64| match integrand(z) {
                Ok(v) => v,
                Err(e) => {
                    *err.borrow_mut() = Some(e);
                    f64::NAN
                }
            };
            let (value, _) = left_singular_quad(&f, 5.0, 5e-7, 34);
            if let Some(e) = err.into_inner() {
                return Err(e);
            }
            if !value.is_finite() {
                return Err(Error::numerical("half-space residual is not finite".to_string()));
            }
            Ok(value.abs())
        }
    }
}

/// `I(phi_alpha)(x)` for `phi_alpha(y) = (y_N)_+^alpha phi(y)` at a point
/// with `x_N > 0`, computed two independent ways: direct quadrature, and
/// the product decomposition
/// `pref * C_alpha * phi(x) * x_N^{alpha-2s} + x_N^alpha * I(phi)(x)
///  + I_N[omega_alpha, phi](x)`.
/// Returns `(direct, decomposed)` without asserting agreement.
pub fn halfspace_test_pair<P>(
    alpha: f64,
    phi: &P,
    x: &[f64],
    params: &FractionalParams,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)>
where
    P: Fn(&[f64]) -> f64 + ?Sized,
{
    check_point(x, params)?;
    let s = params.s;
    let upper = (2.0 * s).min(1.0);
    if !(alpha >= s && alpha < upper) {
        return Err(Error::invalid(format!(
            "alpha = {alpha} must lie in [s, min(1, 2s)) = [{s}, {upper}) "
        )));
    }
    let last = params.dim - 1;
    let xb = x[last];
    if xb <= 0.0 {
        return Err(Error::invalid(format!(
            "evaluation point must have positive last coordinate, got {xb}"
        )));
    }
    // the power weight grows like t^alpha along the last axis
    let mut cfg_w = cfg.clone();
    cfg_w.tail_decay_exponent = -alpha;
    let omega = move |y: &[f64]| y[last].max(0.0).powf(alpha);
    let phi_alpha = |y: &[f64]| omega(y) * phi(y);
    let mut direct = 0.0;
    for axis in 0..params.dim {
        let breaks: &[f64] = if axis == last { &[xb] } else { &[] };
        direct +=
            apply_1d_fractional_with_breakpoints(&phi_alpha, x, axis, breaks, params, &cfg_w)?;
    }
    let pref = kernel_prefactor(params)?;
    let decomposed = pref * c_alpha(alpha, s)? * phi(x) * xb.powf(alpha - 2.0 * s)
        + xb.powf(alpha) * apply_operator(phi, x, params, &cfg_w)?
        + product_remainder_axis_with_breakpoints(&omega, phi, x, last, &[xb], params, &cfg_w)?;
    Ok((direct, decomposed))
}

/// As [`halfspace_test_pair`], asserting that the two routes agree to
/// relative 1e-4 and returning the direct value.
pub fn halfspace_test_apply<P>(
    alpha: f64,
    phi: &P,
    x: &[f64],
    params: &FractionalParams,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    P: Fn(&[f64]) -> f64 + ?Sized,
{
    let (direct, decomposed) = halfspace_test_pair(alpha, phi, x, params, cfg)?;
    let gap = (direct - decomposed).abs();
    let scale = direct.abs().max(decomposed.abs()).max(1.0);
    if gap > 1e-4 * scale {
        return Err(Error::numerical(format!(
            "half-space decomposition mismatch: direct = {direct}, decomposed = {decomposed}"
        )));
    }
    Ok(direct)
}

/// `int_lambda^infty dt / (t - z1)^{1+2s}` for `z1 < lambda`: adaptive
/// quadrature on a finite head plus the exact analytic remainder.  For
/// `z1` within distance `d` of `lambda` the value is at least
/// `1 / (2s d^{2s})`.
pub fn narrow_band_tail_integral(lambda: f64, z1: f64, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!("s = {s} must lie in (0, 1)")));
    }
    if !(z1.is_finite() && lambda.is_finite() && z1 < lambda) {
        return Err(Error::invalid(format!(
            "need z1 < lambda, got z1 = {z1}, lambda = {lambda}"
        )));
    }
    let cut = lambda + 10.0 * (lambda - z1);
    let (head, _) = adaptive_quad(
        &|t: f64| (t - z1).powf(-1.0 - 2.0 * s),
        lambda,
        cut,
        1e-13,
        48,
    );
    Ok(head + (cut - z1).powf(-2.0 * s) / (2.0 * s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Normalization;
    use approx::assert_abs_diff_eq;

    fn params(dim: usize, s: f64, norm: Normalization) -> FractionalParams {
        FractionalParams::new(dim, s, 2.0, norm).unwrap()
    }

    fn gaussian(y: &[f64]) -> f64 {
        (-y.iter().map(|c| c * c).sum::<f64>()).exp()
    }

    fn plane_wave_cfg() -> QuadratureConfig {
        QuadratureConfig {
            inner_cutoff: 0.5,
            tail_limit: 150.0,
            nodes_core: 400,
            nodes_tail: 96,
            tail_decay_exponent: 1e12,
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let cfg = QuadratureConfig::default();
        for &s in &[0.3, 0.5, 0.75] {
            for norm in [Normalization::Plain, Normalization::Probabilistic] {
                let p = params(2, s, norm);
                let v = apply_operator(&|_: &[f64]| 3.25, &[0.4, -1.0], &p, &cfg).unwrap();
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
            }
        }
        // constants survive even a decaying tail model thanks to the
        // constant-slice guard
        let cfg2 = QuadratureConfig {
            tail_decay_exponent: 1.5,
            ..QuadratureConfig::default()
        };
        let p = params(1, 0.4, Normalization::Plain);
        let v = apply_operator(&|_: &[f64]| -2.0, &[0.0], &p, &cfg2).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn plane_wave_single_axis_matches_symbol() {
        let p = params(2, 0.5, Normalization::Probabilistic);
        let cfg = plane_wave_cfg();
        let u = |y: &[f64]| (2.0 * std::f64::consts::PI * y[0]).cos();
        for &x0 in &[0.3, -0.2, 0.05] {
            let x = [x0, 0.7];
            let v = apply_1d_fractional(&u, &x, 0, &p, &cfg).unwrap();
            let expected = -2.0 * std::f64::consts::PI * u(&x);
            let scale = 2.0 * std::f64::consts::PI;
            assert!(
                (v - expected).abs() / scale < 1e-4,
                "x0 = {x0}: got {v}, expected {expected}"
            );
            // no variation along the other axis
            let v2 = apply_1d_fractional(&u, &x, 1, &p, &cfg).unwrap();
            assert_abs_diff_eq!(v2, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn product_plane_wave_matches_symbol_sum() {
        let p = params(2, 0.5, Normalization::Probabilistic);
        let cfg = plane_wave_cfg();
        let u = |y: &[f64]| {
            (2.0 * std::f64::consts::PI * y[0]).cos() * (2.0 * std::f64::consts::PI * y[1]).cos()
        };
        let x = [0.15, -0.4];
        let v = apply_operator(&u, &x, &p, &cfg).unwrap();
        let expected = -4.0 * std::f64::consts::PI * u(&x);
        assert!(
            (v - expected).abs() / (4.0 * std::f64::consts::PI) < 1e-4,
            "got {v}, expected {expected}"
        );
    }

    #[test]
    fn gaussian_is_negative_at_its_maximum() {
        let cfg = QuadratureConfig::default();
        for &s in &[0.25, 0.5, 0.8] {
            let p = params(2, s, Normalization::Probabilistic);
            let v = apply_operator(&gaussian, &[0.0, 0.0], &p, &cfg).unwrap();
            assert!(v < 0.0, "s = {s}: got {v}");
        }
    }

    #[test]
    fn scaling_law_holds() {
        // I_i phi_R(x) = R^{-2s} I_i phi(x/R) with phi_R(x) = phi(x/R)
        let cfg = QuadratureConfig::default();
        let p = params(2, 0.4, Normalization::Probabilistic);
        let r = 5.0;
        let x = [1.2, -0.6];
        let scaled = |y: &[f64]| gaussian(&[y[0] / r, y[1] / r]);
        let lhs = apply_1d_fractional(&scaled, &x, 0, &p, &cfg).unwrap();
        let inner = [x[0] / r, x[1] / r];
        let rhs = r.powf(-2.0 * p.s) * apply_1d_fractional(&gaussian, &inner, 0, &p, &cfg).unwrap();
        assert!(
            (lhs - rhs).abs() <= 1e-6 * rhs.abs(),
            "lhs = {lhs}, rhs = {rhs}"
        );
    }

    #[test]
    fn power_inequality_holds() {
        // I_i(phi^m) >= m phi^{m-1} I_i(phi) for nonnegative phi
        let cfg = QuadratureConfig::default();
        let p = params(1, 0.6, Normalization::Probabilistic);
        let m = 3.0;
        let phi = |y: &[f64]| gaussian(y);
        let phi_m = |y: &[f64]| gaussian(y).powf(m);
        for &x0 in &[0.0, 0.7, 1.5] {
            let x = [x0];
            let lhs = apply_1d_fractional(&phi_m, &x, 0, &p, &cfg).unwrap();
            let rhs = m * phi(&x).powf(m - 1.0) * apply_1d_fractional(&phi, &x, 0, &p, &cfg).unwrap();
            assert!(lhs >= rhs - 1e-7, "x0 = {x0}: lhs = {lhs}, rhs = {rhs}");
        }
    }

    #[test]
    fn boundary_power_matches_constant() {
        // I omega_alpha(x) = pref * C_alpha * x_N^{alpha-2s}
        let s = 0.5;
        let alpha = 0.7;
        let p = params(1, s, Normalization::Probabilistic);
        // the tail model error scales like T^{alpha-2s-1}, so a wide
        // truncation keeps the relative gap well under 1e-4
        let cfg = QuadratureConfig {
            inner_cutoff: 0.5,
            tail_limit: 5e4,
            nodes_core: 400,
            nodes_tail: 96,
            tail_decay_exponent: -alpha,
        };
        let omega = |y: &[f64]| y[0].max(0.0).powf(alpha);
        let pref = kernel_prefactor(&p).unwrap();
        let c = c_alpha(alpha, s).unwrap();
        for &xb in &[0.5, 1.0, 2.0] {
            let v = apply_1d_fractional_with_breakpoints(&omega, &[xb], 0, &[xb], &p, &cfg).unwrap();
            let expected = pref * c * xb.powf(alpha - 2.0 * s);
            assert!(
                (v - expected).abs() <= 1e-4 * expected.abs(),
                "x = {xb}: got {v}, expected {expected}"
            );
        }
    }

    #[test]
    fn product_remainder_basics() {
        let cfg = QuadratureConfig::default();
        let p = params(2, 0.5, Normalization::Probabilistic);
        // constant first factor: both difference factors vanish
        let c = |_: &[f64]| 2.5;
        let v = product_remainder(&c, &gaussian, &[0.3, 0.1], &p, &cfg).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        // equal factors at the maximum: integrand is a square
        let v = product_remainder(&gaussian, &gaussian, &[0.0, 0.0], &p, &cfg).unwrap();
        assert!(v > 0.0);
    }

    #[test]
    fn product_rule_identity() {
        // I(gh) = g I(h) + h I(g) + I[g,h]
        let cfg = QuadratureConfig::default();
        let p = params(2, 0.6, Normalization::Probabilistic);
        let g = |y: &[f64]| (-((y[0] - 0.3).powi(2) + 0.8 * y[1] * y[1])).exp();
        let h = |y: &[f64]| (-(0.5 * y[0] * y[0] + (y[1] + 0.2).powi(2))).exp() + 0.1;
        let gh = |y: &[f64]| g(y) * h(y);
        let x = [0.25, -0.4];
        let lhs = apply_operator(&gh, &x, &p, &cfg).unwrap();
        let rhs = g(&x) * apply_operator(&h, &x, &p, &cfg).unwrap()
            + h(&x) * apply_operator(&g, &x, &p, &cfg).unwrap()
            + product_remainder(&g, &h, &x, &p, &cfg).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-6);
    }

    #[test]
    fn lateral_cross_terms_vanish() {
        // I_i[omega_alpha, phi] = 0 for i < N: the weight never varies
        let s = 0.6;
        let alpha = 0.7;
        let p = params(2, s, Normalization::Plain);
        let cfg = QuadratureConfig {
            tail_decay_exponent: -alpha,
            ..QuadratureConfig::default()
        };
        let omega = |y: &[f64]| y[1].max(0.0).powf(alpha);
        let x = [0.3, 0.8];
        let v = product_remainder_axis(&omega, &gaussian, &x, 0, &p, &cfg).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn boundary_continuity_of_cross_term() {
        // I_N[omega_alpha, phi](x', z) approaches the boundary value at
        // z = 0 with gaps shrinking like z^alpha; the test checks the
        // geometric decay of the gaps and that the extrapolated limit of
        // the z-sequence meets the directly computed boundary value
        let s = 0.6;
        let alpha = 0.5; // in ((2s-1)_+, min(1, 2s)) = (0.2, 1)
        let p = params(2, s, Normalization::Plain);
        let cfg = QuadratureConfig {
            tail_decay_exponent: -alpha,
            ..QuadratureConfig::default()
        };
        let omega = |y: &[f64]| y[1].max(0.0).powf(alpha);
        let phi = |y: &[f64]| (-(y[0] * y[0] + y[1] * y[1])).exp();
        let at = |z: f64| {
            let x = [0.3, z];
            let breaks: Vec<f64> = if z > 0.0 { vec![z] } else { vec![] };
            product_remainder_axis_with_breakpoints(&omega, &phi, &x, 1, &breaks, &p, &cfg)
                .unwrap()
        };
        let limit = at(0.0);
        let v: Vec<f64> = (10..=14).map(|k| at(2.0f64.powi(-k))).collect();
        let gaps: Vec<f64> = v.iter().map(|vv| (vv - limit).abs()).collect();
        for w in gaps.windows(2) {
            assert!(w[1] < 0.85 * w[0], "gaps not shrinking geometrically: {gaps:?}");
        }
        let r = gaps[4] / gaps[3];
        let extrapolated = v[4] + (v[4] - v[3]) * r / (1.0 - r);
        assert!(
            (extrapolated - limit).abs() < 1e-4 * limit.abs(),
            "extrapolated {extrapolated} vs boundary value {limit}"
        );
    }

    #[test]
    fn ibp_axis_line_gaussians() {
        let p = params(2, 0.45, Normalization::Probabilistic);
        let cfg = QuadratureConfig::default();
        let u = |y: &[f64]| (-((y[0] + 0.2).powi(2) + y[1] * y[1])).exp();
        let phi = |y: &[f64]| (-(2.0 * y[0] * y[0] + 0.5 * y[1] * y[1])).exp();
        let r = ibp_residual(&u, &phi, 0, &p, &cfg, &IbpMode::AxisLine(vec![0.0, 0.3])).unwrap();
        assert!(r < 1e-6, "axis-line residual = {r}");
    }

    #[test]
    fn ibp_full_space_dim1() {
        let p = params(1, 0.5, Normalization::Probabilistic);
        let cfg = QuadratureConfig::default();
        let u = |y: &[f64]| (-(y[0] - 0.4).powi(2)).exp();
        let phi = |y: &[f64]| (-2.0 * y[0] * y[0]).exp();
        let r = ibp_residual(&u, &phi, 0, &p, &cfg, &IbpMode::FullSpace).unwrap();
        assert!(r < 1e-5, "full-space residual = {r}");
        // symmetric expression vanishes identically when u = phi
        let r = ibp_residual(&phi, &phi, 0, &p, &cfg, &IbpMode::FullSpace).unwrap();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn halfspace_decomposition_agrees() {
        let s = 0.6;
        let p = params(2, s, Normalization::Probabilistic);
        let cfg = QuadratureConfig::default();
        let phi = |y: &[f64]| (-(y[0] * y[0] + (y[1] - 0.5).powi(2))).exp();
        let (direct, decomposed) = halfspace_test_pair(s, &phi, &[0.3, 0.8], &p, &cfg).unwrap();
        assert!(
            (direct - decomposed).abs() <= 1e-4 * direct.abs().max(1.0),
            "direct = {direct}, decomposed = {decomposed}"
        );
        let v = halfspace_test_apply(s, &phi, &[0.3, 0.8], &p, &cfg).unwrap();
        assert_abs_diff_eq!(v, direct, epsilon = 0.0);
        // rejects points on the wrong side and inadmissible exponents
        assert!(halfspace_test_apply(s, &phi, &[0.3, -0.1], &p, &cfg).is_err());
        assert!(halfspace_test_apply(0.1, &phi, &[0.3, 0.8], &p, &cfg).is_err());
    }

    #[test]
    fn narrow_band_bound_holds() {
        for &s in &[0.3, 0.5, 0.7] {
            for &d in &[0.1, 1.0] {
                let lambda = 1.5;
                for &frac in &[0.1, 0.5, 0.99] {
                    let z1 = lambda - d * frac;
                    let v = narrow_band_tail_integral(lambda, z1, s).unwrap();
                    let exact = (lambda - z1).powf(-2.0 * s) / (2.0 * s);
                    assert_abs_diff_eq!(v, exact, epsilon = 1e-9 * exact);
                    assert!(v >= 1.0 / (2.0 * s * d.powf(2.0 * s)) - 1e-12);
                }
            }
        }
        assert!(narrow_band_tail_integral(1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn config_validation_and_error_paths() {
        let p = params(1, 0.5, Normalization::Plain);
        let cfg = QuadratureConfig {
            nodes_core: 4,
            ..QuadratureConfig::default()
        };
        assert!(apply_operator(&gaussian, &[0.0], &p, &cfg).is_err());
        let cfg = QuadratureConfig {
            tail_limit: 0.1,
            ..QuadratureConfig::default()
        };
        assert!(apply_operator(&gaussian, &[0.0], &p, &cfg).is_err());
        let cfg = QuadratureConfig {
            tail_decay_exponent: -1.5, // beta + 2s = -0.5
            ..QuadratureConfig::default()
        };
        assert!(apply_operator(&gaussian, &[0.0], &p, &cfg).is_err());
        // NaN from u is reported, not propagated silently
        let cfg = QuadratureConfig::default();
        let bad = |y: &[f64]| if y[0] > 1.0 { f64::NAN } else { 1.0 };
        assert!(apply_1d_fractional(&bad, &[0.0], 0, &p, &cfg).is_err());
        // dimension mismatch
        assert!(apply_operator(&gaussian, &[0.0, 0.0], &p, &cfg).is_err());
    }
}
