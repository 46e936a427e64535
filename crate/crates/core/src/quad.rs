//! Adaptive Gauss-Kronrod quadrature on graded meshes, and the cumulative
//! transform `V(t) = int_0^t v^{1-p'}`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::funcspace::{geometric_nodes, Weight1D, Window};

/// Default tolerance for standalone 1D integrals.
pub const TOL_1D: f64 = 1e-8;
/// Default tolerance for standalone 2D integrals.
pub const TOL_2D: f64 = 1e-6;
/// Maximum number of interval bisections per adaptive integral.
pub const SUBDIVISION_LIMIT: usize = 2000;
/// Default number of knots for `V`.
pub const V_KNOTS: usize = 512;

/// Ratio `hi / lo` above which integration switches to `ln x` variables.
const LOG_SWITCH: f64 = 16.0;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 4-point Gauss-Legendre nodes and weights on `[-1, 1]`.
pub const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
pub const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_8,
];

/// Outcome of an integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Convergence target `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    /// `tol * max(1, |value|)`.
    pub fn mixed(tol: f64) -> Self {
        Tolerance { rel: tol, abs: tol }
    }

    /// Pure relative tolerance.
    pub fn relative(rel: f64) -> Self {
        Tolerance { rel, abs: 0.0 }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One Gauss-Kronrod 7/15 panel with the QUADPACK error heuristic.
/// Fails with the offending value if the integrand is not finite at a node.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> std::result::Result<(f64, f64), f64> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(fc);
    }
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = fc.abs() * WGK[7];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        if !f1.is_finite() {
            return Err(f1);
        }
        if !f2.is_finite() {
            return Err(f2);
        }
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * h;
    res_abs *= h.abs();
    res_asc *= h.abs();
    let mut err = ((res_k - res_g) * h).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

fn adaptive(mut f: impl FnMut(f64) -> f64, breaks: &[f64], tol: Tolerance, limit: usize) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    let mut evaluations = 0usize;
    let non_finite = |x: f64, a: f64, b: f64| -> Error {
        if x.is_nan() {
            Error::Domain(format!("integrand is NaN on [{a}, {b}]"))
        } else {
            Error::Accuracy {
                estimate: f64::INFINITY,
                error: f64::INFINITY,
                evaluations: 0,
            }
        }
    };
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let (value, error) = gk15(&mut f, a, b).map_err(|x| non_finite(x, a, b))?;
        evaluations += 15;
        heap.push(Segment { a, b, value, error });
    }
    let totals = |heap: &BinaryHeap<Segment>, frozen: &[Segment]| -> (f64, f64) {
        let mut v = 0.0;
        let mut e = 0.0;
        for s in heap.iter().chain(frozen.iter()) {
            v += s.value;
            e += s.error;
        }
        (v, e)
    };
    let mut splits = 0usize;
    let (mut value, mut error) = totals(&heap, &frozen);
    loop {
        if error <= tol.target(value) {
            break;
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::Accuracy {
                estimate: value,
                error,
                evaluations,
            });
        };
        let m = 0.5 * (worst.a + worst.b);
        if splits >= limit || !(m > worst.a && m < worst.b) || (worst.b - worst.a) <= 1e-15 * worst.b.abs().max(1e-300)
        {
            if splits >= limit {
                return Err(Error::Accuracy {
                    estimate: value,
                    error,
                    evaluations,
                });
            }
            frozen.push(worst);
            continue;
        }
        let left = gk15(&mut f, worst.a, m).map_err(|x| match non_finite(x, worst.a, m) {
            Error::Accuracy { .. } => Error::Accuracy {
                estimate: value,
                error: f64::INFINITY,
                evaluations,
            },
            e => e,
        })?;
        let right = gk15(&mut f, m, worst.b).map_err(|x| match non_finite(x, m, worst.b) {
            Error::Accuracy { .. } => Error::Accuracy {
                estimate: value,
                error: f64::INFINITY,
                evaluations,
            },
            e => e,
        })?;
        evaluations += 30;
        splits += 1;
        value += left.0 + right.0 - worst.value;
        error += left.1 + right.1 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: m,
            value: left.0,
            error: left.1,
        });
        heap.push(Segment {
            a: m,
            b: worst.b,
            value: right.0,
            error: right.1,
        });
        if splits.is_multiple_of(64) {
            (value, error) = totals(&heap, &frozen);
        }
    }
    (value, error) = totals(&heap, &frozen);
    Ok(QuadResult {
        value,
        error_estimate: error,
        evaluations,
    })
}

/// Adaptive integral of `g` over `[lo, hi]` with interior breakpoints.
/// Long ranges with `lo > 0` are integrated in `ln x`.
pub fn integrate_1d_with(
    g: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    if !(lo <= hi) || lo.is_nan() || hi.is_nan() {
        return invalid(format!("integration bounds out of order: [{lo}, {hi}]"));
    }
    if lo == hi {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let inner: Vec<f64> = {
        let mut v: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    if lo > 0.0 && hi / lo > LOG_SWITCH {
        let mut pts = Vec::with_capacity(inner.len() + 2);
        pts.push(lo.ln());
        pts.extend(inner.iter().map(|x| x.ln()));
        pts.push(hi.ln());
        adaptive(
            |s| {
                let x = s.exp();
                g(x) * x
            },
            &pts,
            tol,
            SUBDIVISION_LIMIT,
        )
    } else {
        let mut pts = Vec::with_capacity(inner.len() + 2);
        pts.push(lo);
        pts.extend(inner);
        pts.push(hi);
        adaptive(g, &pts, tol, SUBDIVISION_LIMIT)
    }
}

/// Adaptive integral with error target `tol * max(1, |value|)`.
pub fn integrate_1d(g: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<QuadResult> {
    integrate_1d_with(g, lo, hi, &[], Tolerance::mixed(tol))
}

/// Integral over `[lo1, hi1] x [lo2, hi2]` by nesting the 1D rule; the inner
/// integrals run at the same tolerance and their error is folded into the total.
pub fn integrate_2d(g: impl Fn(f64, f64) -> f64, rect: [f64; 4], tol: f64) -> Result<QuadResult> {
    integrate_2d_with(g, rect, &[], &[], Tolerance::mixed(tol))
}

pub fn integrate_2d_with(
    g: impl Fn(f64, f64) -> f64,
    rect: [f64; 4],
    breaks1: &[f64],
    breaks2: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    let [lo1, hi1, lo2, hi2] = rect;
    if !(lo1 <= hi1 && lo2 <= hi2) {
        return invalid(format!("degenerate rectangle {rect:?}"));
    }
    let failure = std::cell::RefCell::new(None::<Error>);
    let evals = std::cell::Cell::new(0usize);
    let inner_err = std::cell::Cell::new(0.0f64);
    let outer = integrate_1d_with(
        |x1| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            match integrate_1d_with(|x2| g(x1, x2), lo2, hi2, breaks2, tol) {
                Ok(r) => {
                    evals.set(evals.get() + r.evaluations);
                    inner_err.set(inner_err.get().max(r.error_estimate / r.value.abs().max(1e-300)));
                    r.value
                }
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        lo1,
        hi1,
        breaks1,
        tol,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let outer = outer?;
    Ok(QuadResult {
        value: outer.value,
        error_estimate: outer.error_estimate + inner_err.get().min(1.0) * outer.value.abs(),
        evaluations: evals.get(),
    })
}

/// The cumulative transform `V(t) = int_0^t v^{1-p'}` on a geometric knot set,
/// interpolated by a monotone cubic in `(ln t, ln V)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VFunction {
    p: f64,
    source: Weight1D,
    knots: Vec<f64>,
    cumvals: Vec<f64>,
    ln_knots: Vec<f64>,
    ln_vals: Vec<f64>,
    slopes: Vec<f64>,
}

/// Integrand `v^{1-p'}`; sampled weights are extended beyond their table by
/// the power law of the nearest segment.
fn dual_density(v: &Weight1D, p: f64, x: f64) -> f64 {
    let e = -1.0 / (p - 1.0);
    match v {
        Weight1D::Sampled(t) => {
            let (lo, hi) = t.x_range();
            let w = if x < lo {
                t.ys()[0] * (x / lo).powf(t.head_exponent())
            } else if x > hi {
                let n = t.xs().len();
                let k = (t.ys()[n - 1] / t.ys()[n - 2]).ln() / (t.xs()[n - 1] / t.xs()[n - 2]).ln();
                t.ys()[n - 1] * (x / hi).powf(k)
            } else {
                t.value(x)
            };
            w.powf(e)
        }
        _ => v.value_pow(x, e),
    }
}

/// Builds `V` for weight `v` and exponent `p > 1` on `window` with `knot_count` knots.
pub fn build_v(v: &Weight1D, p: f64, window: Window, knot_count: usize) -> Result<VFunction> {
    if !(p > 1.0 && p.is_finite()) {
        return invalid(format!("p must exceed 1, got {p}"));
    }
    if knot_count < 2 {
        return invalid("V needs at least two knots");
    }
    let e = -1.0 / (p - 1.0);
    let (lo, hi) = (window.lo, window.hi);
    let head = match v {
        Weight1D::Power { alpha } => {
            let sigma = alpha * e;
            if sigma <= -1.0 {
                return Err(Error::Integrability(format!(
                    "v^(1-p') = x^{sigma} is not integrable at 0 (exponent alpha*(1-p') = {sigma} <= -1, alpha = {alpha}, p = {p})"
                )));
            }
            lo.powf(sigma + 1.0) / (sigma + 1.0)
        }
        Weight1D::ExpScaled { alpha, .. } => {
            let sigma = alpha * e;
            if sigma <= -1.0 {
                return Err(Error::Integrability(format!(
                    "v^(1-p') ~ x^{sigma} near 0 is not integrable (exponent alpha*(1-p') = {sigma} <= -1, alpha = {alpha}, p = {p})"
                )));
            }
            integrate_1d_with(|x| dual_density(v, p, x), 0.0, lo, &[], Tolerance::relative(1e-12))
                .map_err(|err| Error::Integrability(format!("head integral of v^(1-p') on (0, {lo}] failed: {err}")))?
                .value
        }
        Weight1D::Sampled(t) => {
            let sigma = t.head_exponent() * e;
            if sigma <= -1.0 {
                return Err(Error::Integrability(format!(
                    "sampled v^(1-p') behaves like x^{sigma} near 0 (exponent {sigma} <= -1)"
                )));
            }
            dual_density(v, p, lo) * lo / (sigma + 1.0)
        }
    };
    let knots = geometric_nodes(lo, hi, knot_count - 1);
    let mut cumvals = Vec::with_capacity(knot_count);
    cumvals.push(head);
    for w in knots.windows(2) {
        let piece = integrate_1d_with(|x| dual_density(v, p, x), w[0], w[1], &[], Tolerance::relative(1e-13))
            .or_else(|_| integrate_1d_with(|x| dual_density(v, p, x), w[0], w[1], &[], Tolerance::relative(1e-10)))?;
        let last = *cumvals.last().unwrap();
        cumvals.push(last + piece.value);
    }
    if let Weight1D::Sampled(_) = v {
        // Mass of the extrapolated head on [lo/4, lo] relative to V(hi).
        let extra = integrate_1d_with(|x| dual_density(v, p, x), lo / 4.0, lo, &[], Tolerance::relative(1e-10))?.value;
        let total = cumvals[knot_count - 1] - head;
        if extra > 0.05 * total {
            return Err(Error::Integrability(format!(
                "sampled v^(1-p') gains {:.1}% of its mass when the window is extended from {lo} to {}; likely not integrable at 0",
                100.0 * extra / total,
                lo / 4.0
            )));
        }
    }
    if cumvals.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::Integrability(
            "V is not finite and positive on the window".into(),
        ));
    }
    let ln_knots: Vec<f64> = knots.iter().map(|k| k.ln()).collect();
    let ln_vals: Vec<f64> = cumvals.iter().map(|c| c.ln()).collect();
    // d ln V / d ln t = t v^{1-p'}(t) / V(t), exact at the knots.
    let mut slopes: Vec<f64> = knots
        .iter()
        .zip(&cumvals)
        .map(|(&t, &c)| t * dual_density(v, p, t) / c)
        .collect();
    // Fritsch-Carlson clamping keeps the interpolant monotone.
    for k in 0..knot_count - 1 {
        let delta = (ln_vals[k + 1] - ln_vals[k]) / (ln_knots[k + 1] - ln_knots[k]);
        if delta <= 0.0 {
            slopes[k] = 0.0;
            slopes[k + 1] = 0.0;
            continue;
        }
        let (al, be) = (slopes[k] / delta, slopes[k + 1] / delta);
        let r = al * al + be * be;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            slopes[k] = tau * al * delta;
            slopes[k + 1] = tau * be * delta;
        }
    }
    Ok(VFunction {
        p,
        source: v.clone(),
        knots,
        cumvals,
        ln_knots,
        ln_vals,
        slopes,
    })
}

impl VFunction {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn source(&self) -> &Weight1D {
        &self.source
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn cumvals(&self) -> &[f64] {
        &self.cumvals
    }

    /// The interval `[lo, hi]` on which `V` is tabulated.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// `v^{1-p'}(x)`.
    pub fn density(&self, x: f64) -> f64 {
        dual_density(&self.source, self.p, x)
    }

    /// `V(t)`; `V(0) = 0`, NaN outside `{0} U [lo, hi]`.
    pub fn value(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            // Knots are built from the window ends, but tolerate rounding.
            if t > lo * (1.0 - 1e-13) && t < lo {
                return self.cumvals[0];
            }
            if t < hi * (1.0 + 1e-13) && t > hi {
                return self.cumvals[self.cumvals.len() - 1];
            }
            return f64::NAN;
        }
        let s = t.ln();
        let n = self.knots.len();
        let k = self.ln_knots.partition_point(|&x| x <= s).clamp(1, n - 1) - 1;
        let h = self.ln_knots[k + 1] - self.ln_knots[k];
        let u = ((s - self.ln_knots[k]) / h).clamp(0.0, 1.0);
        if u == 0.0 {
            return self.cumvals[k];
        }
        if u == 1.0 {
            return self.cumvals[k + 1];
        }
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        (h00 * self.ln_vals[k] + h10 * h * self.slopes[k] + h01 * self.ln_vals[k + 1] + h11 * h * self.slopes[k + 1])
            .exp()
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let v = self.value(t);
        if v.is_nan() {
            let (lo, hi) = self.domain();
            return domain(format!("V evaluated at {t}, outside {{0}} U [{lo}, {hi}]"));
        }
        Ok(v)
    }

    /// `V(d) - V(c)` for `c <= d`.
    pub fn diff(&self, c: f64, d: f64) -> Result<f64> {
        if !(c <= d) {
            return domain(format!("V difference needs c <= d, got c = {c}, d = {d}"));
        }
        if c == d {
            return Ok(0.0);
        }
        Ok((self.eval(d)? - self.eval(c)?).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_d_examples() {
        let r = integrate_1d(|_| 1.0, 0.0, 1.0, TOL_1D).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
        let r = integrate_1d(|x: f64| x.powf(-0.5), 0.0, 1.0, TOL_1D).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
        assert!(r.error_estimate >= 0.0);
        assert!(matches!(
            integrate_1d(|x| 1.0 / x, 0.0, 1.0, TOL_1D),
            Err(Error::Accuracy { .. })
        ));
    }

    #[test]
    fn log_variables_on_long_ranges() {
        let r = integrate_1d(|x: f64| x.powf(-1.5), 1e-2, 1e6, 1e-10).unwrap();
        let exact = 2.0 * (1e-2f64.powf(-0.5) - 1e6f64.powf(-0.5));
        assert!((r.value / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_d_examples() {
        assert!((integrate_2d(|_, _| 1.0, [0.0, 1.0, 0.0, 1.0], TOL_2D).unwrap().value - 1.0).abs() < 1e-12);
        assert!((integrate_2d(|x, y| x * y, [0.0, 1.0, 0.0, 1.0], TOL_2D).unwrap().value - 0.25).abs() < 1e-12);
        let r = integrate_2d(|x: f64, y: f64| (x * y).powf(-0.5), [0.0, 1.0, 0.0, 1.0], TOL_2D).unwrap();
        assert!((r.value - 4.0).abs() < 4e-6, "{}", r.value);
    }

    #[test]
    fn piecewise_constant_with_breaks_is_exact() {
        let g = |x: f64, y: f64| if x < 0.3 { 1.0 } else { 2.0 } * if y < 0.7 { 3.0 } else { 1.0 };
        let r = integrate_2d_with(g, [0.0, 1.0, 0.0, 1.0], &[0.3], &[0.7], Tolerance::mixed(1e-12)).unwrap();
        let exact = (0.3 + 1.4) * (2.1 + 0.3);
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn v_examples() {
        let w = Window::new(1e-6, 1e6).unwrap();
        let v = build_v(&Weight1D::power(0.0), 2.0, w, V_KNOTS).unwrap();
        assert!((v.eval(3.0).unwrap() - 3.0).abs() < 1e-10);
        assert!((v.diff(1.0, 3.0).unwrap() - 2.0).abs() < 1e-10);
        assert_eq!(v.diff(2.5, 2.5).unwrap(), 0.0);
        let v = build_v(&Weight1D::power(0.5), 2.0, w, V_KNOTS).unwrap();
        assert!((v.eval(4.0).unwrap() - 4.0).abs() < 1e-10);
        assert!((v.diff(1.0, 4.0).unwrap() - 2.0).abs() < 1e-10);
        let err = build_v(&Weight1D::power(1.0), 2.0, w, V_KNOTS).unwrap_err();
        assert!(matches!(err, Error::Integrability(ref m) if m.contains("-1")), "{err}");
        assert_eq!(v.eval(0.0).unwrap(), 0.0);
        assert!(matches!(v.diff(1.0, 1e7), Err(Error::Domain(_))));
    }

    #[test]
    fn v_exp_scaled_and_sampled() {
        let w = Window::new(1e-3, 1e2).unwrap();
        // v = e^{-x}, p = 2: V(t) = e^t - 1
        let v = build_v(&Weight1D::ExpScaled { alpha: 0.0, beta: -0.1 }, 2.0, w, V_KNOTS).unwrap();
        for t in [1e-3, 0.5, 3.0, 50.0] {
            let exact = ((0.1 * t as f64).exp() - 1.0) / 0.1;
            assert!((v.eval(t).unwrap() / exact - 1.0).abs() < 1e-8, "{t}");
        }
        let table = crate::funcspace::SampledTable::from_fn(1e-4, 1e3, 200, |x| x.powf(0.5)).unwrap();
        let v = build_v(&Weight1D::Sampled(table), 2.0, w, V_KNOTS).unwrap();
        assert!((v.eval(4.0).unwrap() / 4.0 - 1.0).abs() < 1e-8);
        let table = crate::funcspace::SampledTable::from_fn(1e-4, 1e3, 200, |x| x.powf(0.97)).unwrap();
        assert!(matches!(
            build_v(&Weight1D::Sampled(table), 2.0, w, V_KNOTS),
            Err(Error::Integrability(_))
        ));
    }

    proptest! {
        #[test]
        fn additivity(a in 0.01f64..1.0, w1 in 0.01f64..2.0, w2 in 0.01f64..2.0, k in 0.5f64..3.0) {
            let g = |x: f64| (k * x).sin() + 2.0 + x.sqrt();
            let (b, c) = (a + w1, a + w1 + w2);
            let whole = integrate_1d(g, a, c, TOL_1D).unwrap();
            let l = integrate_1d(g, a, b, TOL_1D).unwrap();
            let r = integrate_1d(g, b, c, TOL_1D).unwrap();
            let slack = 3.0 * (whole.error_estimate + l.error_estimate + r.error_estimate) + 1e-14;
            prop_assert!((whole.value - l.value - r.value).abs() <= slack);
        }

        #[test]
        fn v_telescopes(c in 1e-5f64..1e5, r1 in 1.0f64..100.0, r2 in 1.0f64..100.0, alpha in -0.9f64..0.9) {
            let v = build_v(&Weight1D::power(alpha), 2.0, Window::default(), V_KNOTS).unwrap();
            let (d, e) = (c * r1, (c * r1 * r2).min(1e6));
            let d = d.min(e);
            let lhs = v.diff(c, d).unwrap() + v.diff(d, e).unwrap();
            let rhs = v.diff(c, e).unwrap();
            prop_assert!(v.diff(c, d).unwrap() >= 0.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300) + 4.0 * f64::EPSILON * v.eval(e).unwrap());
        }

        #[test]
        fn separable_2d_is_product(a in -0.6f64..1.0, b in -0.6f64..1.0) {
            let r = integrate_2d(|x: f64, y: f64| x.powf(a) * y.powf(b), [0.0, 2.0, 0.0, 3.0], TOL_2D).unwrap();
            let p1 = integrate_1d(|x: f64| x.powf(a), 0.0, 2.0, TOL_2D).unwrap().value;
            let p2 = integrate_1d(|y: f64| y.powf(b), 0.0, 3.0, TOL_2D).unwrap().value;
            prop_assert!((r.value - p1 * p2).abs() <= 4.0 * TOL_2D * r.value.max(1.0));
        }
    }
}
