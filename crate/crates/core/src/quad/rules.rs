//! Primitive integrators: adaptive Gauss-Kronrod panels, a dyadic scheme
//! for integrable endpoint singularities with geometric tail
//! extrapolation, and an Euler-accelerated scheme for oscillatory
//! integrals partitioned between the zeros of the trigonometric factor.

// The node and weight tables keep the published 33-digit values verbatim.
#![allow(clippy::excessive_precision)]

/// 15-point Kronrod abscissae (positive half, descending), QUADPACK values.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Embedded 7-point Gauss weights (for XGK indices 1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Gauss-Kronrod 7-15 on `[a, b]`; returns the Kronrod value and an error
/// estimate from the embedded Gauss rule.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let x = hw * XGK[k];
        let fsum = f(c - x) + f(c + x);
        kronrod += WGK[k] * fsum;
        if k % 2 == 1 {
            gauss += WG[k / 2] * fsum;
        }
    }
    kronrod *= hw;
    gauss *= hw;
    (kronrod, (kronrod - gauss).abs())
}

/// Kronrod-only 15-point approximation of several integrands evaluated in
/// one pass (no error estimate); meant for smooth integrands on short
/// panels where the rule is essentially exact.
pub fn gk15_multi<const K: usize, F: Fn(f64) -> [f64; K]>(f: &F, a: f64, b: f64) -> [f64; K] {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut acc = [0.0; K];
    for i in 0..K {
        acc[i] = WGK[7] * fc[i];
    }
    for k in 0..7 {
        let x = hw * XGK[k];
        let fm = f(c - x);
        let fp = f(c + x);
        for i in 0..K {
            acc[i] += WGK[k] * (fm[i] + fp[i]);
        }
    }
    for a in acc.iter_mut() {
        *a *= hw;
    }
    acc
}

/// Adaptive bisection on the GK15 error estimate.  Returns the integral and
/// the accumulated error estimate of the accepted panels.
pub fn adaptive_quad<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_depth: u32,
) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    // hard work cap: beyond this many accepted panels further splitting is
    // pointless (the tolerance is unattainable, e.g. noise-limited input)
    const MAX_PANELS: usize = 20_000;
    let mut accepted = 0usize;
    let mut total = 0.0;
    let mut err = 0.0;
    let mut stack: Vec<(f64, f64, f64, u32)> = vec![(a, b, abs_tol.max(1e-300), 0)];
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        let (v, e) = gk15(f, lo, hi);
        let width_floor = (hi - lo).abs() <= 4e-14 * (lo.abs() + hi.abs() + 1e-30);
        if e <= tol || depth >= max_depth || width_floor || accepted >= MAX_PANELS {
            total += v;
            err += e;
            accepted += 1;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tol, depth + 1));
            stack.push((mid, hi, 0.5 * tol, depth + 1));
        }
    }
    (total, err)
}

/// `int_0^a f(t) dt` where `f` may have an integrable singularity at 0
/// (locally `~ t^gamma` with unknown `gamma > -1`).  Dyadic panels toward
/// the origin; once consecutive panel sums settle into a geometric decay,
/// the remaining tail is added by extrapolation.
pub fn left_singular_quad<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    abs_tol: f64,
    max_panels: usize,
) -> (f64, f64) {
    assert!(a > 0.0, "left_singular_quad needs a positive upper limit");
    let mut total = 0.0;
    let mut err = 0.0;
    let mut hi = a;
    let mut panels: Vec<f64> = Vec::new();
    let mut ptol = abs_tol * 0.125;
    // best geometric closure seen so far, by its drift indicator; used when
    // rounding noise stalls the panel sums before the target is reached
    let mut best: Option<(f64, f64)> = None;
    // smallest settled panel magnitude, for noise detection
    let mut pmin = f64::INFINITY;
    for _ in 0..max_panels {
        let lo = 0.5 * hi;
        let (v, e) = adaptive_quad(f, lo, hi, ptol, 24);
        total += v;
        err += e;
        panels.push(v);
        ptol = (0.75 * ptol).max(abs_tol * 1e-3).max(1e-15);
        let m = panels.len();
        if m >= 3 {
            let p2 = panels[m - 1];
            let p1 = panels[m - 2];
            let p0 = panels[m - 3];
            // negligible remainder: the geometric bound with ratio 0.98
            // would still fit in the budget
            if p2.abs().max(p1.abs()) * 50.0 < abs_tol * 0.5 {
                return (total, err + p2.abs());
            }
            if p0 != 0.0 && p1 != 0.0 {
                let r1 = p1 / p0;
                let r2 = p2 / p1;
                if r2 > 0.0 && r2 < 0.98 && r1 > 0.0 && r1 < 1.0 {
                    let tail = p2 * r2 / (1.0 - r2);
                    let drift = (r2 - r1).abs() / (1.0 - r2).powi(2) * p2.abs();
                    if drift < abs_tol * 0.5 {
                        return (total + tail, err + drift);
                    }
                    if best.is_none_or(|(_, be)| err + drift < be) {
                        best = Some((total + tail, err + drift));
                    }
                }
            }
        }
        // a ~ t^gamma integrand with gamma > -1 has panel sums that shrink
        // toward the origin, while rounding noise in cancellation-prone
        // integrands grows like t^{-2s}; a sustained rise from the running
        // minimum is therefore noise takeover, and descending further only
        // accumulates garbage
        if m >= 6 && v.abs() > 4.0 * pmin && panels[m - 2].abs() > 2.0 * pmin {
            if let Some(b) = best {
                return b;
            }
            return (total, err + v.abs());
        }
        pmin = pmin.min(v.abs());
        hi = lo;
    }
    // ran out of panels: the best recorded geometric closure, if any
    if let Some(b) = best {
        return b;
    }
    let m = panels.len();
    if m >= 2 && panels[m - 2] != 0.0 {
        let r = (panels[m - 1] / panels[m - 2]).clamp(0.0, 0.98);
        let tail = panels[m - 1] * r / (1.0 - r);
        return (total + tail, err + tail.abs());
    }
    (total, err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

/// `int_from^infty f(t) trig(b t) dt` for smooth `f >= 0` decreasing to 0,
/// `b > 0`.  Segments between consecutive zeros of the trigonometric factor
/// form an alternating series; partial sums are accelerated by repeated
/// averaging.  `decay_cutoff` is a point beyond which `f` is negligible
/// relative to `abs_tol` (pass `f64::INFINITY` for slowly decaying `f`,
/// e.g. power tails).
pub fn oscillatory_decay_integral<F: Fn(f64) -> f64>(
    f: &F,
    b: f64,
    trig: Trig,
    from: f64,
    decay_cutoff: f64,
    abs_tol: f64,
) -> f64 {
    assert!(b > 0.0);
    let g = |t: f64| {
        f(t) * match trig {
            Trig::Cos => (b * t).cos(),
            Trig::Sin => (b * t).sin(),
        }
    };
    // zero k of the factor
    let zero = |k: usize| -> f64 {
        match trig {
            Trig::Cos => (k as f64 + 0.5) * std::f64::consts::PI / b,
            Trig::Sin => (k as f64 + 1.0) * std::f64::consts::PI / b,
        }
    };
    let mut k = 0usize;
    while zero(k) <= from {
        k += 1;
    }
    let seg_tol = abs_tol / 50.0;
    // head segment up to the first zero past `from`
    let first_hi = zero(k).min(decay_cutoff.max(from));
    let (head, _) = adaptive_quad(&g, from, first_hi.max(from), seg_tol, 40);
    if first_hi >= decay_cutoff {
        return head;
    }
    let mut partial = head;
    let mut diag: Vec<f64> = Vec::new();
    let mut prev_est = f64::NAN;
    const MAX_SEGMENTS: usize = 400;
    for _ in 0..MAX_SEGMENTS {
        let lo = zero(k);
        let hi = zero(k + 1);
        k += 1;
        let (seg, _) = adaptive_quad(&g, lo, hi, seg_tol, 24);
        partial += seg;
        // for a decreasing envelope the segments alternate, so the raw
        // truncation error is bounded by the last segment; the raw sum is
        // also the right answer once the envelope has died out (the
        // accelerated value lags behind it in both situations)
        if seg.abs() <= abs_tol * 0.5 || lo > decay_cutoff {
            return partial;
        }
        // repeated-averaging acceleration of the partial sums, for slowly
        // decaying envelopes where the raw sum converges too slowly
        let mut x = partial;
        for slot in diag.iter_mut() {
            let next = 0.5 * (*slot + x);
            *slot = x;
            x = next;
        }
        diag.push(x);
        let est = x;
        if diag.len() >= 6 && (est - prev_est).abs() < abs_tol * 0.25 {
            return est;
        }
        prev_est = est;
    }
    prev_est
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gk15_exact_on_low_degree() {
        let (v, _) = gk15(&|x: f64| x * x * x - 2.0 * x + 1.0, -1.0, 3.0);
        // antiderivative x^4/4 - x^2 + x
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert_abs_diff_eq!(v, exact, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let f = |x: f64| (-200.0 * (x - 0.5).powi(2)).exp();
        let (v, _) = adaptive_quad(&f, 0.0, 1.0, 1e-12, 40);
        let exact = (std::f64::consts::PI / 200.0).sqrt(); // full line; tails ~ 1e-23
        assert_abs_diff_eq!(v, exact, epsilon = 1e-11);
    }

    #[test]
    fn left_singular_power_law() {
        // int_0^1 t^{-1/2} dt = 2, worst-case slow panel decay
        let (v, _) = left_singular_quad(&|t: f64| t.powf(-0.5), 1.0, 1e-11, 200);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-9);
        // int_0^2 t^{0.3} dt
        let (v, _) = left_singular_quad(&|t: f64| t.powf(0.3), 2.0, 1e-11, 200);
        assert_abs_diff_eq!(v, 2.0f64.powf(1.3) / 1.3, epsilon = 1e-9);
    }

    #[test]
    fn left_singular_strong_singularity() {
        // gamma = -0.9: int_0^1 t^{-0.9} dt = 10
        let (v, _) = left_singular_quad(&|t: f64| t.powf(-0.9), 1.0, 1e-10, 400);
        assert_abs_diff_eq!(v, 10.0, epsilon = 1e-7);
    }

    #[test]
    fn oscillatory_dirichlet_like() {
        // int_0^infty sin(t)/t dt = pi/2; integrand smooth at 0
        let f = |t: f64| if t == 0.0 { 1.0 } else { 1.0 / t };
        // start from 0 with Sin factor folds the 1/t into sinc
        let v = oscillatory_decay_integral(&f, 1.0, Trig::Sin, 1e-12, f64::INFINITY, 1e-12);
        assert_abs_diff_eq!(v, std::f64::consts::FRAC_PI_2, epsilon = 1e-10);
    }

    #[test]
    fn oscillatory_exponential_closed_form() {
        // int_0^infty e^{-t} cos(b t) dt = 1/(1+b^2)
        for &b in &[0.5, 1.0, 3.0] {
            let v = oscillatory_decay_integral(&|t: f64| (-t).exp(), b, Trig::Cos, 0.0, 60.0, 1e-13);
            assert_abs_diff_eq!(v, 1.0 / (1.0 + b * b), epsilon = 1e-11);
        }
    }
}
