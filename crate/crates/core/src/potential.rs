//! Free-space potential kernel of the coordinate-wise fractional operator.
//!
//! The kernel `G_s` inverts the operator on decaying data: it is homogeneous
//! of degree `2s - N`, symmetric under axis reflections and coordinate
//! swaps, and comparable to `|x|_{2s}^{2s-N}` in the anisotropic norm.  Its
//! product representation
//! `G_s(x) = pi^{-N} int_0^inf prod_i y^{-1/(2s)} F_s(|x_i| y^{-1/(2s)}) dy`
//! with the profile `F_s(b) = int_0^inf e^{-t^{2s}} cos(bt) dt` reduces every
//! evaluation to one outer quadrature over tabulated profile values.  Closed
//! forms exist at `s = 1/2` (`N = 2`: `1/(2 pi (|x_1| + |x_2|))`) and at
//! `s = 1` (the Newtonian kernel `Gamma(N/2-1)/(4 pi^{N/2}) |x|^{2-N}`).
//!
//! For `s < 1` the profile has the power tail `F_s(b) ~ C b^{-1-2s}`, so the
//! product representation diverges logarithmically (and the kernel itself is
//! infinite) at points where too many coordinates vanish: with `q` zero
//! coordinates the outer integrand behaves like `y^{N-q-q/(2s)}` at the
//! origin, divergent once `q >= (N+1) * 2s / (2s+1)`.  Evaluation at such
//! points is rejected.

use crate::error::{Error, Result};
use crate::geometry::Hyperplane;
use crate::grid::{Field, Grid};
use crate::quad::rules::gk15;
use crate::quad::{stable_cosine_integral, TrigKind};
use crate::spectral::{aniso_norm, periodic_green};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Evaluation route for the potential kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenMethod {
    /// `s = 1/2` closed forms: exact in two dimensions, one-dimensional
    /// quadrature of the rational product for three and more.
    ClosedHalf,
    /// `s = 1`, `N > 2`: the Newtonian kernel.
    ClosedNewtonian,
    /// General `2s < N`: outer quadrature over the tabulated profile.
    NestedQuadrature,
    /// Values read from a periodic inverse on a torus of the given size;
    /// carries the periodization offset bounded by
    /// [`spectral_inverse_estimate`].
    SpectralInverse { n: usize, extent: f64 },
}

/// Treatment of the origin cell when tabulating on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularCellPolicy {
    /// Store the analytic average of the local homogeneous profile
    /// `c |x|_{2s}^{2s-N}` over the origin cell, with `c` measured from the
    /// neighboring nodes.  Preferred when the table feeds a convolution.
    AnalyticCellAverage,
    /// Store the profile evaluated at half a grid spacing from the origin.
    RadialRegularize,
}

/// A tabulated potential kernel with its provenance.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    field: Field,
    s: f64,
    method: GreenMethod,
    singular_cell_policy: SingularCellPolicy,
}

#[derive(Serialize, Deserialize)]
struct TableSidecar {
    s: f64,
    method: GreenMethod,
    singular_cell_policy: SingularCellPolicy,
}

impl PotentialTable {
    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn method(&self) -> GreenMethod {
        self.method
    }

    pub fn singular_cell_policy(&self) -> SingularCellPolicy {
        self.singular_cell_policy
    }

    /// Writes the values in the binary field format at `path` and the
    /// `{s, method, singular_cell_policy}` sidecar next to it with a
    /// `.json` extension.
    pub fn write(&self, path: &Path) -> Result<()> {
        self.field.write_binary(path)?;
        let sidecar = TableSidecar {
            s: self.s,
            method: self.method,
            singular_cell_policy: self.singular_cell_policy,
        };
        let text = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| Error::Format(format!("sidecar serialization failed: {e}")))?;
        std::fs::write(path.with_extension("json"), text)?;
        Ok(())
    }

    /// Reads a table written by [`PotentialTable::write`].
    pub fn read(path: &Path) -> Result<PotentialTable> {
        let field = Field::read_binary(path)?;
        let text = std::fs::read_to_string(path.with_extension("json"))?;
        let sidecar: TableSidecar = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("sidecar parse failed: {e}")))?;
        if !(sidecar.s > 0.0 && sidecar.s <= 1.0) {
            return Err(Error::Format(format!(
                "sidecar s = {} out of range",
                sidecar.s
            )));
        }
        Ok(PotentialTable {
            field,
            s: sidecar.s,
            method: sidecar.method,
            singular_cell_policy: sidecar.singular_cell_policy,
        })
    }
}

/// The profile `F_s(b) = int_0^inf e^{-t^{2s}} cos(bt) dt`.
///
/// Scaling in the first argument of the underlying integral gives the
/// general inner factor of the product representation as
/// `y^{-1/(2s)} F_s(b y^{-1/(2s)})`.
pub fn f_profile(b: f64, s: f64) -> Result<f64> {
    stable_cosine_integral(1.0, b.abs(), s, TrigKind::Cos)
}

const FS_LOG_NODES: usize = 231; // ln b in [0, ln 256]
const FS_B_MAX: f64 = 256.0;

/// Linear-grid node count keeping the cubic interpolation error of the
/// profile below ~1e-7 relative: the error scales like
/// `h^4 max|F''''| / 43` with `max|F''''| = int t^4 e^{-t^{2s}} dt`,
/// which grows rapidly as `s` decreases.
fn fs_lin_nodes(s: f64) -> usize {
    let f0 = statrs::function::gamma::gamma(1.0 + 1.0 / (2.0 * s));
    let m4 = statrs::function::gamma::gamma(5.0 / (2.0 * s)) / (2.0 * s);
    let n = (m4 / (42.7e-7 * f0)).powf(0.25).ceil() as usize;
    n.clamp(64, 4096) + 1
}

/// Tabulated profile `F_s` with cubic interpolation and a fitted power tail.
///
/// The grid is linear on `[0, 1]` and logarithmic on `(1, 256]`; beyond that
/// the tail is modeled as `C b^{-q}` with the exponent fitted on the last
/// tabulated decade and the coefficient anchored at the last node (the
/// asymptotic decay rate of the profile for general `s` is not available in
/// closed form, so the fit is recorded for inspection).  Profiles that
/// underflow before the end of the table (`s` near 1) get a zero tail.
#[derive(Debug, Clone)]
pub struct FsTable {
    s: f64,
    lin: Vec<f64>,
    log: Vec<f64>,
    log_step: f64,
    /// `(coefficient, exponent)` of the fitted tail, if one was fitted.
    tail: Option<(f64, f64)>,
}

impl FsTable {
    pub fn new(s: f64) -> Result<FsTable> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::invalid(format!("s = {s} must lie in (0, 1]")));
        }
        let lin_nodes = fs_lin_nodes(s);
        let lin: Vec<f64> = (0..lin_nodes)
            .map(|k| f_profile(k as f64 / (lin_nodes - 1) as f64, s))
            .collect::<Result<_>>()?;
        let log_step = FS_B_MAX.ln() / (FS_LOG_NODES - 1) as f64;
        let log: Vec<f64> = (0..FS_LOG_NODES)
            .map(|k| f_profile((k as f64 * log_step).exp(), s))
            .collect::<Result<_>>()?;
        // fit ln F = ln C - q ln b on the last decade, using only nodes
        // safely above the quadrature noise floor
        let from = ((FS_B_MAX / 10.0).ln() / log_step).ceil() as usize;
        let pts: Vec<(f64, f64)> = (from..FS_LOG_NODES)
            .filter(|&k| log[k] > 1e-11)
            .map(|k| (k as f64 * log_step, log[k].ln()))
            .collect();
        let tail = if pts.len() >= 6 {
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            let q = -slope;
            // anchor the coefficient at the last node for continuity
            let coeff = log[FS_LOG_NODES - 1] * FS_B_MAX.powf(q);
            Some((coeff, q))
        } else {
            None
        };
        Ok(FsTable {
            s,
            lin,
            log,
            log_step,
            tail,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Fitted tail decay exponent, when the profile stayed above the noise
    /// floor long enough to fit one.
    pub fn tail_exponent(&self) -> Option<f64> {
        self.tail.map(|(_, q)| q)
    }

    /// Interpolated profile value at `|b|`.
    pub fn value(&self, b: f64) -> f64 {
        let b = b.abs();
        if b <= 1.0 {
            let h = 1.0 / (self.lin.len() - 1) as f64;
            return cubic(&self.lin, b / h);
        }
        if b <= FS_B_MAX {
            return cubic(&self.log, b.ln() / self.log_step);
        }
        match self.tail {
            Some((coeff, q)) => coeff * b.powf(-q),
            None => 0.0,
        }
    }

    /// The potential at `x` computed with this profile tabulation (the
    /// shared-table route behind [`green_value`] with
    /// [`GreenMethod::NestedQuadrature`]).
    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        let dim = x.len();
        validate_point(x, self.s, dim)?;
        if 2.0 * self.s >= dim as f64 {
            return Err(Error::invalid(format!(
                "the product representation needs 2s < N, got s = {}, N = {dim}",
                self.s
            )));
        }
        green_nested(x, self.s, self)
    }
}

/// Four-point Lagrange interpolation on a uniform table, `u` in node units.
fn cubic(table: &[f64], u: f64) -> f64 {
    let n = table.len();
    let j0 = (u.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let d = u - j0 as f64;
    let mut acc = 0.0;
    for (k, &tk) in table[j0..j0 + 4].iter().enumerate() {
        let mut w = 1.0;
        for m in 0..4 {
            if m != k {
                w *= (d - m as f64) / (k as f64 - m as f64);
            }
        }
        acc += w * tk;
    }
    acc
}

fn validate_point(x: &[f64], s: f64, dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::invalid(format!(
            "point has {} coordinates but dim = {dim}",
            x.len()
        )));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("point has non-finite coordinates"));
    }
    check_off_singular_set(x, s, dim)
}

/// Rejects the origin and, for `s < 1`, the codimension sets where the
/// kernel is infinite (see the module docs).
fn check_off_singular_set(x: &[f64], s: f64, dim: usize) -> Result<()> {
    let q = x.iter().filter(|c| **c == 0.0).count();
    if q == dim {
        return Err(Error::invalid(
            "the potential is evaluated away from the origin",
        ));
    }
    if s < 1.0 {
        let threshold = (dim + 1) as f64 * 2.0 * s / (2.0 * s + 1.0);
        if q as f64 >= threshold - 1e-12 {
            return Err(Error::numerical(format!(
                "the potential diverges at points with {q} vanishing \
                 coordinates (s = {s}, dim = {dim}: divergence at \
                 q >= {threshold:.3})"
            )));
        }
    }
    Ok(())
}

/// Scales out the sup norm: returns `(|x_i| / m, m)` with `m = max_i |x_i|`.
fn normalize(x: &[f64]) -> (Vec<f64>, f64) {
    let m = x.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    (x.iter().map(|c| c.abs() / m).collect(), m)
}

/// `s = 1/2` potential by one-dimensional quadrature of the rational
/// product, valid in any dimension `N >= 2`:
/// `G(x) = pi^{-N} int_0^inf prod_i y / (y^2 + x_i^2) dy`.
///
/// The substitution `y = tan(theta)` maps the half-line to `(0, pi/2)`; both
/// endpoints are handled by singular-endpoint quadrature (the integrand is
/// merely algebraic there).  Homogeneity is scaled out first so the
/// integrand stays O(1) at any input scale.
pub fn green_half_quadrature(x: &[f64]) -> Result<f64> {
    let dim = x.len();
    if dim < 2 {
        return Err(Error::invalid(
            "the s = 1/2 potential needs dimension at least 2",
        ));
    }
    validate_point(x, 0.5, dim)?;
    let (a, m) = normalize(x);
    let integrand = |sn: f64, cs: f64| -> f64 {
        let mut denom = 1.0;
        for &ai in &a {
            denom *= sn * sn + ai * ai * cs * cs;
        }
        sn.powi(dim as i32) * cs.powi(dim as i32 - 2) / denom
    };
    let quarter = std::f64::consts::FRAC_PI_4;
    let (lo_half, _) = crate::quad::rules::left_singular_quad(
        &|t: f64| integrand(t.sin(), t.cos()),
        quarter,
        1e-11,
        300,
    );
    let (hi_half, _) = crate::quad::rules::left_singular_quad(
        &|p: f64| integrand(p.cos(), p.sin()),
        quarter,
        1e-11,
        300,
    );
    let value =
        std::f64::consts::PI.powi(-(dim as i32)) * m.powi(1 - dim as i32) * (lo_half + hi_half);
    if !value.is_finite() {
        return Err(Error::numerical(format!(
            "half-order potential quadrature failed at {x:?}"
        )));
    }
    Ok(value)
}

/// General-`s` potential through the tabulated profile.
fn green_nested(x: &[f64], s: f64, fs: &FsTable) -> Result<f64> {
    let dim = x.len();
    let (a, m) = normalize(x);
    let kappa = dim as f64 / (2.0 * s);
    let inv2s = 1.0 / (2.0 * s);
    let integrand = |sn: f64, cs: f64| -> f64 {
        let t = (cs / sn).powf(inv2s);
        let mut prod = 1.0;
        for &ai in &a {
            prod *= fs.value(if ai == 0.0 { 0.0 } else { ai * t });
        }
        if prod == 0.0 {
            return 0.0;
        }
        cs.powf(kappa - 2.0) / sn.powf(kappa) * prod
    };
    let scale = fs.value(0.0).abs().powi(dim as i32).max(1e-6);
    let tol = 1e-11 * scale;
    let quarter = std::f64::consts::FRAC_PI_4;
    let (lo_half, _) = crate::quad::rules::left_singular_quad(
        &|t: f64| integrand(t.sin(), t.cos()),
        quarter,
        tol,
        300,
    );
    let (hi_half, _) = crate::quad::rules::left_singular_quad(
        &|p: f64| integrand(p.cos(), p.sin()),
        quarter,
        tol,
        300,
    );
    let value = std::f64::consts::PI.powi(-(dim as i32))
        * m.powf(2.0 * s - dim as f64)
        * (lo_half + hi_half);
    if !value.is_finite() {
        return Err(Error::numerical(format!(
            "nested potential quadrature failed at {x:?} (s = {s})"
        )));
    }
    Ok(value)
}

/// The free-space potential at `x` by the selected method.
pub fn green_value(x: &[f64], s: f64, dim: usize, method: &GreenMethod) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::invalid(format!("s = {s} must lie in (0, 1]")));
    }
    match *method {
        GreenMethod::ClosedHalf => {
            if s != 0.5 {
                return Err(Error::invalid(format!(
                    "the half-order closed form requires s = 1/2, got {s}"
                )));
            }
            if dim == 2 {
                validate_point(x, s, dim)?;
                Ok(1.0 / (2.0 * std::f64::consts::PI * (x[0].abs() + x[1].abs())))
            } else {
                if x.len() != dim {
                    return Err(Error::invalid(format!(
                        "point has {} coordinates but dim = {dim}",
                        x.len()
                    )));
                }
                green_half_quadrature(x)
            }
        }
        GreenMethod::ClosedNewtonian => {
            if s != 1.0 {
                return Err(Error::invalid(format!(
                    "the Newtonian closed form requires s = 1, got {s}"
                )));
            }
            if dim <= 2 {
                return Err(Error::invalid(
                    "the Newtonian kernel needs dimension at least 3",
                ));
            }
            validate_point(x, s, dim)?;
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            let n = dim as f64;
            Ok(statrs::function::gamma::gamma(0.5 * n - 1.0)
                / (4.0 * std::f64::consts::PI.powf(0.5 * n))
                * r.powf(2.0 - n))
        }
        GreenMethod::NestedQuadrature => {
            if 2.0 * s >= dim as f64 {
                return Err(Error::invalid(format!(
                    "the product representation needs 2s < N, got s = {s}, N = {dim}"
                )));
            }
            validate_point(x, s, dim)?;
            let fs = FsTable::new(s)?;
            green_nested(x, s, &fs)
        }
        GreenMethod::SpectralInverse { n, extent } => {
            if 2.0 * s >= dim as f64 {
                return Err(Error::invalid(format!(
                    "the periodic inverse needs 2s < N, got s = {s}, N = {dim}"
                )));
            }
            validate_point(x, s, dim)?;
            let grid = Grid::new(dim, n, extent)?;
            let table = periodic_green(&grid, s)?;
            table.interpolate(x).ok_or_else(|| {
                Error::invalid(format!(
                    "point {x:?} is outside the periodic table (extent {extent})"
                ))
            })
        }
    }
}

/// Documented accuracy estimate for [`GreenMethod::SpectralInverse`]: the
/// periodic table differs from the free-space kernel by images and by the
/// zero-mode offset, both within `extent^{2s - N}` at interior points well
/// inside the box.
pub fn spectral_inverse_estimate(extent: f64, s: f64, dim: usize) -> f64 {
    extent.powf(2.0 * s - dim as f64)
}

/// One-dimensional factor integral on the positive orthant: plain
/// Gauss-Kronrod away from zero, geometric refinement toward a zero left
/// endpoint where the anisotropic norm has algebraic `t^{2s}` behavior.
fn axis_integral<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        return gk15(f, lo, hi).0;
    }
    let mut total = gk15(f, 0.0, hi * 2.0f64.powi(-12)).0;
    let mut edge = hi * 2.0f64.powi(-12);
    while edge < hi {
        let next = (edge * 2.0).min(hi);
        total += gk15(f, edge, next).0;
        edge = next;
    }
    total
}

/// Tensor product of [`axis_integral`] over a box in the positive orthant.
fn tensor_box<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64]) -> f64 {
    fn rec<F: Fn(&[f64]) -> f64>(
        f: &F,
        lo: &[f64],
        hi: &[f64],
        axis: usize,
        pt: &std::cell::RefCell<Vec<f64>>,
    ) -> f64 {
        if axis == lo.len() {
            let p = pt.borrow();
            return f(&p);
        }
        axis_integral(
            &|t: f64| {
                pt.borrow_mut()[axis] = t;
                rec(f, lo, hi, axis + 1, pt)
            },
            lo[axis],
            hi[axis],
        )
    }
    let pt = std::cell::RefCell::new(vec![0.0; lo.len()]);
    rec(f, lo, hi, 0, &pt)
}

/// Integral of the homogeneous profile `|x|_{2s}^{2s-N}` over the origin
/// cell `prod_i [-h_i/2, h_i/2]`.
///
/// The integrand is even in every coordinate, so the cell integral is
/// `2^N` times the positive-orthant part.  Scaling the orthant box by 1/2
/// scales that part by `2^{-2s}`, so it equals the integral over the frame
/// (box minus half-box) divided by `1 - 2^{-2s}`; the frame avoids the
/// singularity and splits into boxes indexed by the first coordinate that
/// exceeds its quarter-width, on which the integrand is well-behaved.
fn origin_cell_integral(h: &[f64], s: f64) -> f64 {
    let dim = h.len();
    let f = |y: &[f64]| aniso_norm(y, s).powf(2.0 * s - dim as f64);
    let mut frame = 0.0;
    for i in 0..dim {
        let mut lo = vec![0.0; dim];
        let mut hi = vec![0.0; dim];
        for j in 0..dim {
            hi[j] = if j < i { h[j] / 4.0 } else { h[j] / 2.0 };
        }
        lo[i] = h[i] / 4.0;
        frame += tensor_box(&f, &lo, &hi);
    }
    2.0f64.powi(dim as i32) * frame / (1.0 - 2.0f64.powf(-2.0 * s))
}

/// Tabulates the potential on `grid` with the default origin policy
/// ([`SingularCellPolicy::AnalyticCellAverage`]).
pub fn green_table(grid: &Grid, s: f64, method: &GreenMethod) -> Result<PotentialTable> {
    green_table_with_policy(grid, s, method, SingularCellPolicy::AnalyticCellAverage)
}

/// Tabulates the potential on `grid`.
///
/// With [`GreenMethod::SpectralInverse`] the table is the periodic inverse
/// on `grid` itself (the method's `n`/`extent` parameters only steer point
/// queries).  Other methods evaluate [`green_value`] at every node in
/// parallel, sharing one profile tabulation; the origin node, if the grid
/// has one, is filled by `policy`.
pub fn green_table_with_policy(
    grid: &Grid,
    s: f64,
    method: &GreenMethod,
    policy: SingularCellPolicy,
) -> Result<PotentialTable> {
    use rayon::prelude::*;
    let dim = grid.dim();
    if let GreenMethod::SpectralInverse { .. } = method {
        let field = periodic_green(grid, s)?;
        return Ok(PotentialTable {
            field,
            s,
            method: *method,
            singular_cell_policy: policy,
        });
    }
    let fs = match method {
        GreenMethod::NestedQuadrature => Some(FsTable::new(s)?),
        _ => None,
    };
    let values: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let mut pt = vec![0.0; dim];
            grid.node(flat, &mut pt);
            if pt.iter().all(|c| *c == 0.0) {
                return Ok(0.0); // placeholder, filled by the policy below
            }
            match &fs {
                Some(table) => table.potential(&pt),
                None => green_value(&pt, s, dim, method),
            }
        })
        .collect();
    let mut values = values?;

    // locate the origin node, if the grid has one
    let mut origin_idx: Option<Vec<usize>> = None;
    if let Some(idx) = grid.nearest_node(&vec![0.0; dim]) {
        let on_origin = (0..dim).all(|i| grid.coord(i, idx[i]) == 0.0);
        if on_origin {
            origin_idx = Some(idx);
        }
    }
    if let Some(idx) = origin_idx {
        // measured prefactor of the local homogeneous profile, averaged
        // over the finite neighbors of the origin
        let mut csum = 0.0;
        let mut count = 0usize;
        let mut nb = vec![0usize; dim];
        let mut offs = vec![-1isize; dim];
        loop {
            if offs.iter().any(|&o| o != 0) {
                let mut ok = true;
                for i in 0..dim {
                    let k = idx[i] as isize + offs[i];
                    if k < 0 || k as usize >= grid.counts()[i] {
                        ok = false;
                        break;
                    }
                    nb[i] = k as usize;
                }
                if ok {
                    let v = values[grid.flat_index(&nb)];
                    let x: Vec<f64> = (0..dim).map(|i| grid.coord(i, nb[i])).collect();
                    csum += v * aniso_norm(&x, s).powf(dim as f64 - 2.0 * s);
                    count += 1;
                }
            }
            // odometer over {-1, 0, 1}^dim
            let mut carry = true;
            for o in offs.iter_mut() {
                if *o < 1 {
                    *o += 1;
                    carry = false;
                    break;
                }
                *o = -1;
            }
            if carry {
                break;
            }
        }
        if count == 0 {
            return Err(Error::numerical(
                "no finite neighbors available to calibrate the origin cell",
            ));
        }
        let c = csum / count as f64;
        let h: Vec<f64> = (0..dim).map(|i| grid.spacing(i)).collect();
        let origin_value = match policy {
            SingularCellPolicy::AnalyticCellAverage => {
                let volume: f64 = h.iter().product();
                c * origin_cell_integral(&h, s) / volume
            }
            SingularCellPolicy::RadialRegularize => {
                c * (grid.max_spacing() / 2.0).powf(2.0 * s - dim as f64)
            }
        };
        values[grid.flat_index(&idx)] = origin_value;
    }
    let field = Field::from_values(grid.clone(), values)?;
    Ok(PotentialTable {
        field,
        s,
        method: *method,
        singular_cell_policy: policy,
    })
}

/// Both kernel values entering the reflection inequality at `s = 1/2`:
/// `(G(x - y), G(x^lambda - y))` where `x^lambda` is the mirror image of
/// `x` across `plane`.
///
/// Both points must lie strictly on the negative side of the plane (the
/// side swept by a moving plane) and must be distinct; the caller checks
/// `g_direct > g_reflected > 0`.  The inequality is established for
/// `s = 1/2`, so other orders are rejected here; exploratory scans at other
/// `s` can use [`green_value`] directly.
pub fn kernel_reflection_gap(
    x: &[f64],
    y: &[f64],
    plane: &Hyperplane,
    s: f64,
) -> Result<(f64, f64)> {
    if s != 0.5 {
        return Err(Error::invalid(format!(
            "the reflection inequality is available at s = 1/2 only, got {s}"
        )));
    }
    let dim = x.len();
    if y.len() != dim || dim < 2 {
        return Err(Error::invalid(
            "reflection points need matching dimension at least 2",
        ));
    }
    plane.kind.validate(dim)?;
    let (cx, cy) = (plane.signed_coordinate(x), plane.signed_coordinate(y));
    if !(cx < 0.0 && cy < 0.0) {
        return Err(Error::invalid(format!(
            "both points must lie strictly on the negative side of the \
             plane (signed coordinates {cx}, {cy})"
        )));
    }
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if diff.iter().all(|d| *d == 0.0) {
        return Err(Error::invalid("reflection points must be distinct"));
    }
    let reflected = plane.reflect(x);
    let rdiff: Vec<f64> = reflected.iter().zip(y).map(|(a, b)| a - b).collect();
    let g_direct = green_value(&diff, s, dim, &GreenMethod::ClosedHalf)?;
    let g_reflected = green_value(&rdiff, s, dim, &GreenMethod::ClosedHalf)?;
    Ok((g_direct, g_reflected))
}
