//! Weight functions on the half line and on the quarter plane, together with
//! the strictly increasing boundary maps `a`, `b` that define the moving box
//! `[a1(x1), b1(x1)] x [a2(x2), b2(x2)]`.
//!
//! Evaluation comes in two flavors: `value` returns a bare `f64` (NaN outside
//! the domain, for use inside integrands), `eval` returns a `Result`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::charf::PkWeight;
use crate::error::{domain, invalid, Error, Result};

/// Iteration cap for bisection-based inversion.
pub const BISECTION_MAX_ITER: usize = 200;
/// Default absolute/relative tolerance for inverse evaluation.
pub const INVERSE_TOL: f64 = 1e-12;

/// A truncation window `[lo, hi]` on one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window { lo: 1e-6, hi: 1e6 }
    }
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return invalid(format!("window [{lo}, {hi}] must satisfy 0 < lo < hi < inf"));
        }
        Ok(Window { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// The window widened by `factor` on both ends (lo / factor, hi * factor).
    pub fn widened(&self, factor: f64) -> Window {
        Window {
            lo: self.lo / factor,
            hi: self.hi * factor,
        }
    }

    /// `n + 1` geometrically spaced nodes spanning the window.
    pub fn geometric_nodes(&self, n: usize) -> Vec<f64> {
        geometric_nodes(self.lo, self.hi, n)
    }
}

pub(crate) fn geometric_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut out: Vec<f64> = (0..=n)
        .map(|k| (llo + (lhi - llo) * k as f64 / n as f64).exp())
        .collect();
    out[0] = lo;
    out[n] = hi;
    out
}

/// A positive table `(x_k, y_k)` with strictly increasing abscissas,
/// interpolated linearly in `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl SampledTable {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return invalid("sampled table needs at least two (x, y) pairs of equal length");
        }
        if xs[0] <= 0.0 || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("sampled abscissas must be positive and strictly increasing");
        }
        if ys.iter().any(|&y| !(y > 0.0 && y.is_finite())) {
            return invalid("sampled values must be positive and finite");
        }
        Ok(SampledTable { xs, ys })
    }

    /// Tabulates `f` at `n + 1` geometric nodes of `[lo, hi]`.
    pub fn from_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let xs = geometric_nodes(lo, hi, n);
        let ys = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, ys)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn value(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range();
        if !(x >= lo && x <= hi) {
            return f64::NAN;
        }
        let k = self.xs.partition_point(|&xk| xk <= x).clamp(1, self.xs.len() - 1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        if x == x0 {
            return y0;
        }
        if x == x1 {
            return y1;
        }
        let w = (x / x0).ln() / (x1 / x0).ln();
        (y0.ln() + w * (y1 / y0).ln()).exp()
    }

    /// Log-log slope of the first segment; used to extrapolate toward 0.
    pub(crate) fn head_exponent(&self) -> f64 {
        (self.ys[1] / self.ys[0]).ln() / (self.xs[1] / self.xs[0]).ln()
    }
}

/// A positive weight on `(0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight1D {
    /// `x^alpha`
    Power {
        alpha: f64,
    },
    /// `x^alpha * exp(beta * x)`
    ExpScaled {
        alpha: f64,
        beta: f64,
    },
    Sampled(SampledTable),
}

impl Weight1D {
    pub fn unit() -> Self {
        Weight1D::Power { alpha: 0.0 }
    }

    pub fn power(alpha: f64) -> Self {
        Weight1D::Power { alpha }
    }

    pub fn value(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NAN;
        }
        match self {
            Weight1D::Power { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    x.powf(*alpha)
                }
            }
            Weight1D::ExpScaled { alpha, beta } => (alpha * x.ln() + beta * x).exp(),
            Weight1D::Sampled(t) => t.value(x),
        }
    }

    /// `w(x)^e`, computed without overflow for the analytic families.
    pub fn value_pow(&self, x: f64, e: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NAN;
        }
        match self {
            Weight1D::Power { alpha } => {
                let k = alpha * e;
                if k == 0.0 {
                    1.0
                } else {
                    x.powf(k)
                }
            }
            Weight1D::ExpScaled { alpha, beta } => (e * (alpha * x.ln() + beta * x)).exp(),
            Weight1D::Sampled(t) => t.value(x).powf(e),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x.is_finite()) {
            return domain(format!("weight evaluated at non-positive point {x}"));
        }
        let v = self.value(x);
        if v.is_nan() {
            if let Weight1D::Sampled(t) = self {
                let (lo, hi) = t.x_range();
                return domain(format!("x = {x} outside sampled window [{lo}, {hi}]"));
            }
            return domain(format!("weight not finite at {x}"));
        }
        Ok(v)
    }

    /// Natural log of the weight.
    pub fn ln_value(&self, x: f64) -> f64 {
        match self {
            Weight1D::Power { alpha } => alpha * x.ln(),
            Weight1D::ExpScaled { alpha, beta } => alpha * x.ln() + beta * x,
            Weight1D::Sampled(t) => t.value(x).ln(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Weight1D::Power { .. } => "power",
            Weight1D::ExpScaled { .. } => "exp_scaled",
            Weight1D::Sampled(_) => "sampled",
        }
    }
}

/// A positive 2D table on a tensor grid, interpolated bilinearly in log-log-log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledGrid2D {
    grid1: Vec<f64>,
    grid2: Vec<f64>,
    /// Row-major, `values[i * grid2.len() + j] = w(grid1[i], grid2[j])`.
    values: Vec<f64>,
}

impl SampledGrid2D {
    pub fn new(grid1: Vec<f64>, grid2: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        for g in [&grid1, &grid2] {
            if g.len() < 2 || g[0] <= 0.0 || g.windows(2).any(|w| !(w[1] > w[0])) {
                return invalid("sampled 2D grids must be positive, strictly increasing, length >= 2");
            }
        }
        if values.len() != grid1.len() * grid2.len() {
            return invalid("sampled 2D values must have len(grid1) * len(grid2) entries");
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return invalid("sampled 2D values must be positive and finite");
        }
        Ok(SampledGrid2D { grid1, grid2, values })
    }

    fn locate(g: &[f64], x: f64) -> Option<(usize, f64)> {
        if !(x >= g[0] && x <= g[g.len() - 1]) {
            return None;
        }
        let k = g.partition_point(|&gk| gk <= x).clamp(1, g.len() - 1);
        let w = (x / g[k - 1]).ln() / (g[k] / g[k - 1]).ln();
        Some((k - 1, w))
    }

    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        let (Some((i, wi)), Some((j, wj))) = (Self::locate(&self.grid1, x1), Self::locate(&self.grid2, x2)) else {
            return f64::NAN;
        };
        let n2 = self.grid2.len();
        let at = |a: usize, b: usize| self.values[a * n2 + b].ln();
        let l = (1.0 - wi) * (1.0 - wj) * at(i, j)
            + wi * (1.0 - wj) * at(i + 1, j)
            + (1.0 - wi) * wj * at(i, j + 1)
            + wi * wj * at(i + 1, j + 1);
        l.exp()
    }
}

/// A one-variable factor of a separable 2D weight.
pub type AxisFactor = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A positive weight on `(0, inf)^2`.
#[derive(Debug, Clone)]
pub enum Weight2D {
    /// Identically zero; used for vacuous instances.
    Zero,
    Separable(Weight1D, Weight1D),
    /// `x1^beta * x2^gamma`
    PowerPair {
        beta: f64,
        gamma: f64,
    },
    Sampled(SampledGrid2D),
    /// `factor * base`
    Scaled {
        factor: f64,
        base: Box<Weight2D>,
    },
    /// `base(x) * prod_i (b_i(x_i) - a_i(x_i))^exponent`
    BoxWidthScaled {
        base: Box<Weight2D>,
        pairs: Box<[BoundaryPair; 2]>,
        exponent: f64,
    },
    /// The Polya-Knopp weight `w` built from `u` and `v`.
    DerivedPk(Arc<PkWeight>),
}

impl Weight2D {
    pub fn unit() -> Self {
        Weight2D::PowerPair { beta: 0.0, gamma: 0.0 }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Weight2D::Scaled {
            factor,
            base: Box::new(self),
        }
    }

    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        if !(x1 > 0.0 && x2 > 0.0) {
            return f64::NAN;
        }
        match self {
            Weight2D::Zero => 0.0,
            Weight2D::Separable(w1, w2) => w1.value(x1) * w2.value(x2),
            Weight2D::PowerPair { beta, gamma } => pow0(x1, *beta) * pow0(x2, *gamma),
            Weight2D::Sampled(g) => g.value(x1, x2),
            Weight2D::Scaled { factor, base } => {
                if *factor == 0.0 {
                    0.0
                } else {
                    factor * base.value(x1, x2)
                }
            }
            Weight2D::BoxWidthScaled { base, pairs, exponent } => {
                base.value(x1, x2) * pairs[0].width(x1).powf(*exponent) * pairs[1].width(x2).powf(*exponent)
            }
            Weight2D::DerivedPk(w) => w.value(x1, x2),
        }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> Result<f64> {
        let v = self.value(x1, x2);
        if v.is_nan() || v.is_infinite() {
            return domain(format!("2D weight not finite at ({x1}, {x2})"));
        }
        Ok(v)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Weight2D::Zero => true,
            Weight2D::Scaled { factor, base } => *factor == 0.0 || base.is_zero(),
            Weight2D::BoxWidthScaled { base, .. } => base.is_zero(),
            Weight2D::DerivedPk(w) => w.u().is_zero(),
            _ => false,
        }
    }

    /// One-variable factors `(f1, f2)` with `w(x1, x2) = f1(x1) * f2(x2)`,
    /// when the weight is known to be separable.
    pub fn axis_factors(&self) -> Option<[AxisFactor; 2]> {
        match self {
            Weight2D::Zero => Some([Arc::new(|_| 0.0), Arc::new(|_| 0.0)]),
            Weight2D::Separable(w1, w2) => {
                let (w1, w2) = (w1.clone(), w2.clone());
                Some([Arc::new(move |x| w1.value(x)), Arc::new(move |x| w2.value(x))])
            }
            Weight2D::PowerPair { beta, gamma } => {
                let (b, g) = (*beta, *gamma);
                Some([Arc::new(move |x| pow0(x, b)), Arc::new(move |x| pow0(x, g))])
            }
            Weight2D::Sampled(_) => None,
            Weight2D::Scaled { factor, base } => {
                let [f1, f2] = base.axis_factors()?;
                let c = *factor;
                Some([Arc::new(move |x| c * f1(x)), f2])
            }
            Weight2D::BoxWidthScaled { base, pairs, exponent } => {
                let [f1, f2] = base.axis_factors()?;
                let e = *exponent;
                let (p1, p2) = (pairs[0].clone(), pairs[1].clone());
                Some([
                    Arc::new(move |x| f1(x) * p1.width(x).powf(e)),
                    Arc::new(move |x| f2(x) * p2.width(x).powf(e)),
                ])
            }
            Weight2D::DerivedPk(w) => PkWeight::axis_factors(w),
        }
    }

    /// Natural log of the weight, without forming the weight itself for the
    /// analytic families.
    pub fn ln_value(&self, x1: f64, x2: f64) -> f64 {
        match self {
            Weight2D::Separable(w1, w2) => w1.ln_value(x1) + w2.ln_value(x2),
            Weight2D::PowerPair { beta, gamma } => beta * x1.ln() + gamma * x2.ln(),
            Weight2D::Scaled { factor, base } => factor.ln() + base.ln_value(x1, x2),
            _ => self.value(x1, x2).ln(),
        }
    }

    /// Logarithms of the one-variable factors, when separable.
    pub fn ln_axis_factors(&self) -> Option<[AxisFactor; 2]> {
        match self {
            Weight2D::Separable(w1, w2) => {
                let (w1, w2) = (w1.clone(), w2.clone());
                Some([Arc::new(move |x| w1.ln_value(x)), Arc::new(move |x| w2.ln_value(x))])
            }
            Weight2D::PowerPair { beta, gamma } => {
                let (b, g) = (*beta, *gamma);
                Some([Arc::new(move |x: f64| b * x.ln()), Arc::new(move |x: f64| g * x.ln())])
            }
            Weight2D::Scaled { factor, base } => {
                let [f1, f2] = base.ln_axis_factors()?;
                let c = factor.ln();
                Some([Arc::new(move |x| c + f1(x)), f2])
            }
            _ => {
                let [f1, f2] = self.axis_factors()?;
                Some([Arc::new(move |x| f1(x).ln()), Arc::new(move |x| f2(x).ln())])
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Weight2D::Zero => "zero",
            Weight2D::Separable(..) => "separable",
            Weight2D::PowerPair { .. } => "power_pair",
            Weight2D::Sampled(_) => "sampled",
            Weight2D::Scaled { .. } => "scaled",
            Weight2D::BoxWidthScaled { .. } => "box_width_scaled",
            Weight2D::DerivedPk(_) => "derived_pk",
        }
    }
}

#[inline]
pub(crate) fn pow0(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

/// A strictly increasing map of `(0, inf)` onto itself with `f(0+) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Monotone {
    /// `c * x`
    Linear { c: f64 },
    /// `c * x^r`
    Power { c: f64, r: f64 },
    /// Increasing table, interpolated in log-log.
    SampledMonotone(SampledTable),
}

impl Monotone {
    pub fn linear(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return invalid(format!("linear slope must be positive, got {c}"));
        }
        Ok(Monotone::Linear { c })
    }

    pub fn power(c: f64, r: f64) -> Result<Self> {
        if !(c > 0.0 && r > 0.0 && c.is_finite() && r.is_finite()) {
            return invalid(format!("power map needs c > 0 and r > 0, got c={c}, r={r}"));
        }
        Ok(Monotone::Power { c, r })
    }

    pub fn sampled(table: SampledTable) -> Result<Self> {
        if table.ys().windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("sampled monotone map must be strictly increasing");
        }
        Ok(Monotone::SampledMonotone(table))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Monotone::Linear { c } => c * x,
            Monotone::Power { c, r } => c * x.powf(*r),
            Monotone::SampledMonotone(t) => t.value(x),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return domain(format!("boundary map evaluated at non-positive point {x}"));
        }
        let y = self.value(x);
        if y.is_nan() {
            if let Monotone::SampledMonotone(t) = self {
                let (lo, hi) = t.x_range();
                return domain(format!("x = {x} outside sampled window [{lo}, {hi}]"));
            }
        }
        Ok(y)
    }

    /// Solves `f(x) = y`. Closed form for the analytic families, bisection on
    /// the interpolant for sampled maps.
    pub fn inverse(&self, y: f64, tol: f64) -> Result<f64> {
        if !(y > 0.0 && y.is_finite()) {
            return domain(format!("inverse requested at non-positive value {y}"));
        }
        match self {
            Monotone::Linear { c } => Ok(y / c),
            Monotone::Power { c, r } => Ok((y / c).powf(1.0 / r)),
            Monotone::SampledMonotone(t) => {
                let (lo, hi) = t.x_range();
                bisect_increasing(|x| t.value(x), y, lo, hi, tol)
            }
        }
    }

    /// Derivative of the inverse map at `y`.
    pub fn inverse_derivative(&self, y: f64) -> Result<f64> {
        match self {
            Monotone::Linear { c } => Ok(1.0 / c),
            Monotone::Power { c, r } => Ok((y / c).powf(1.0 / r - 1.0) / (r * c)),
            Monotone::SampledMonotone(t) => {
                let h = 1e-6 * y.max(1.0);
                let (ylo, yhi) = (t.ys()[0], t.ys()[t.ys().len() - 1]);
                let lo = (y - h).max(ylo);
                let hi = (y + h).min(yhi);
                if !(hi > lo) {
                    return Err(Error::Range {
                        value: y,
                        lo: ylo,
                        hi: yhi,
                    });
                }
                let xl = self.inverse(lo, INVERSE_TOL)?;
                let xh = self.inverse(hi, INVERSE_TOL)?;
                Ok((xh - xl) / (hi - lo))
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Monotone::Linear { .. } => "linear",
            Monotone::Power { .. } => "power",
            Monotone::SampledMonotone(_) => "sampled",
        }
    }
}

/// Finds `x` in `[lo, hi]` with `|f(x) - y| <= tol * max(1, y)` for an
/// increasing `f`, by bisection capped at [`BISECTION_MAX_ITER`] steps.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, y: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(y >= flo && y <= fhi) {
        return Err(Error::Range {
            value: y,
            lo: flo,
            hi: fhi,
        });
    }
    let target = tol * y.abs().max(1.0);
    let (mut a, mut b) = (lo, hi);
    if (flo - y).abs() <= target {
        return Ok(lo);
    }
    if (fhi - y).abs() <= target {
        return Ok(hi);
    }
    for _ in 0..BISECTION_MAX_ITER {
        // Geometric midpoint keeps the relative resolution uniform over decades.
        let m = if a > 0.0 && b / a > 4.0 {
            (a * b).sqrt()
        } else {
            0.5 * (a + b)
        };
        let fm = f(m);
        if (fm - y).abs() <= target {
            return Ok(m);
        }
        if fm < y {
            a = m;
        } else {
            b = m;
        }
        if b - a <= f64::EPSILON * b {
            return Ok(0.5 * (a + b));
        }
    }
    Ok(0.5 * (a + b))
}

/// The lower and upper limits `(a, b)` of one axis of the moving box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPair {
    pub a: Monotone,
    pub b: Monotone,
    /// Set when `a(x) / b(x)` approaches 1 somewhere on the probe set, i.e.
    /// the admissible region is numerically thin.
    #[serde(default)]
    pub thin: bool,
}

impl BoundaryPair {
    /// Validates `a < b`, the limits at `0` and `inf`, and flags thin pairs.
    /// The probe set is geometric on `[1e-8, 1e8]`, clipped to the domain of
    /// sampled maps.
    pub fn new(a: Monotone, b: Monotone) -> Result<Self> {
        let mut lo: f64 = 1e-8;
        let mut hi: f64 = 1e8;
        for m in [&a, &b] {
            if let Monotone::SampledMonotone(t) = m {
                let (l, h) = t.x_range();
                lo = lo.max(l);
                hi = hi.min(h);
            }
        }
        if !(hi > lo) {
            return invalid("sampled boundary maps have disjoint domains");
        }
        let probes = geometric_nodes(lo, hi, 400);
        let mut max_ratio: f64 = 0.0;
        for &x in &probes {
            let (ax, bx) = (a.value(x), b.value(x));
            if !(ax < bx) {
                return invalid(format!(
                    "boundary pair violates a(x) < b(x) at x = {x}: a = {ax}, b = {bx}"
                ));
            }
            max_ratio = max_ratio.max(ax / bx);
        }
        Ok(BoundaryPair {
            a,
            b,
            thin: max_ratio > 1.0 - 1e-3,
        })
    }

    pub fn linear(ca: f64, cb: f64) -> Result<Self> {
        Self::new(Monotone::linear(ca)?, Monotone::linear(cb)?)
    }

    /// `b(x) - a(x)`.
    pub fn width(&self, x: f64) -> f64 {
        self.b.value(x) - self.a.value(x)
    }

    /// Upper end `a^{-1}(b(t))` of the admissible `x` range for a given `t`.
    pub fn x_limit(&self, t: f64) -> Result<f64> {
        self.a.inverse(self.b.eval(t)?, INVERSE_TOL)
    }
}

/// A candidate `(t1, t2, x1, x2)` for the constrained suprema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub t1: f64,
    pub t2: f64,
    pub x1: f64,
    pub x2: f64,
}

impl SearchPoint {
    pub fn new(t1: f64, t2: f64, x1: f64, x2: f64) -> Self {
        SearchPoint { t1, t2, x1, x2 }
    }

    pub fn t(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.t1
        } else {
            self.t2
        }
    }

    pub fn x(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.x1
        } else {
            self.x2
        }
    }

    /// `0 < t_i < x_i` and `a_i(x_i) < b_i(t_i)` on both axes.
    pub fn is_admissible(&self, pairs: &[BoundaryPair; 2]) -> bool {
        (0..2).all(|i| axis_admissible(&pairs[i], self.t(i), self.x(i)))
    }
}

pub(crate) fn axis_admissible(pair: &BoundaryPair, t: f64, x: f64) -> bool {
    0.0 < t && t < x && pair.a.value(x) < pair.b.value(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weight_examples() {
        assert_eq!(Weight1D::power(0.0).eval(7.3).unwrap(), 1.0);
        assert_eq!(Weight1D::power(2.0).eval(3.0).unwrap(), 9.0);
        assert_eq!(Weight1D::power(-0.5).eval(4.0).unwrap(), 0.5);
    }

    #[test]
    fn sampled_weight_window() {
        let t = SampledTable::from_fn(1e-3, 1e3, 60, |x| x.powf(1.5)).unwrap();
        let w = Weight1D::Sampled(t);
        let x = 2.7;
        assert!((w.eval(x).unwrap() / x.powf(1.5) - 1.0).abs() < 1e-12);
        assert!(matches!(w.eval(1e4), Err(Error::Domain(_))));
        assert!(matches!(w.eval(1e-4), Err(Error::Domain(_))));
    }

    #[test]
    fn sampled_rejects_bad_tables() {
        assert!(SampledTable::new(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(SampledTable::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(SampledTable::new(vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn separable_is_product() {
        let (w1, w2) = (Weight1D::power(-1.3), Weight1D::ExpScaled { alpha: 0.5, beta: -0.1 });
        let w = Weight2D::Separable(w1.clone(), w2.clone());
        for &(x, y) in &[(0.3, 4.0), (2.0, 0.01), (10.0, 10.0)] {
            assert_eq!(w.value(x, y), w1.value(x) * w2.value(y));
            let [f1, f2] = w.axis_factors().unwrap();
            assert_eq!(f1(x) * f2(y), w.value(x, y));
        }
    }

    #[test]
    fn boundary_examples() {
        let l = Monotone::linear(0.5).unwrap();
        assert_eq!(l.eval(3.0).unwrap(), 1.5);
        assert_eq!(Monotone::power(1.0, 2.0).unwrap().eval(3.0).unwrap(), 9.0);
        let id = Monotone::linear(1.0).unwrap();
        for x0 in [1e-5, 0.7, 123.0] {
            assert_eq!(id.eval(x0).unwrap(), x0);
        }
        assert_eq!(l.inverse(3.0, INVERSE_TOL).unwrap(), 6.0);
        assert!((Monotone::power(1.0, 2.0).unwrap().inverse(9.0, INVERSE_TOL).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sampled_inverse_matches_bisection_oracle() {
        let t = SampledTable::from_fn(1e-6, 1e6, 240, |x| x / 2.0).unwrap();
        let m = Monotone::sampled(t).unwrap();
        let x = m.inverse(3.0, INVERSE_TOL).unwrap();
        assert!((m.value(x) - 3.0).abs() <= INVERSE_TOL * 3.0);
        assert!((x - 6.0).abs() < 1e-10);
        assert!(matches!(m.inverse(1e7, INVERSE_TOL), Err(Error::Range { .. })));
    }

    #[test]
    fn inverse_derivatives() {
        let a = Monotone::linear(0.5).unwrap();
        assert_eq!(a.inverse_derivative(3.0).unwrap(), 2.0);
        let p = Monotone::power(2.0, 3.0).unwrap();
        // x = (y/2)^(1/3); dx/dy at y = 16 -> x = 2, dy/dx = 6 x^2 = 24
        assert!((p.inverse_derivative(16.0).unwrap() - 1.0 / 24.0).abs() < 1e-14);
        let s = Monotone::sampled(SampledTable::from_fn(1e-6, 1e6, 240, |x| x / 2.0).unwrap()).unwrap();
        assert!((s.inverse_derivative(3.0).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn pair_validation() {
        assert!(BoundaryPair::linear(1.0, 0.5).is_err());
        assert!(BoundaryPair::linear(0.5, 1.0).is_ok());
        // crossing power maps are rejected
        assert!(BoundaryPair::new(Monotone::power(1.0, 2.0).unwrap(), Monotone::linear(1.0).unwrap()).is_err());
        let thin = BoundaryPair::linear(0.99995, 1.0).unwrap();
        assert!(thin.thin);
        assert!(!BoundaryPair::linear(0.5, 1.0).unwrap().thin);
    }

    #[test]
    fn pair_limits_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs = [
            BoundaryPair::linear(0.5, 1.0).unwrap(),
            BoundaryPair::linear(1.0 / 3.0, 0.5).unwrap(),
            BoundaryPair::new(Monotone::power(0.5, 1.5).unwrap(), Monotone::power(1.0, 1.5).unwrap()).unwrap(),
        ];
        for pair in &pairs {
            // limits along decreasing / increasing sequences
            let mut prev = f64::INFINITY;
            for k in 0..30 {
                let x = 10f64.powi(-k);
                let (a, b) = (pair.a.value(x), pair.b.value(x));
                assert!(a < prev && b > a);
                prev = a;
            }
            assert!(pair.a.value(1e-30) < 1e-20 && pair.b.value(1e-30) < 1e-20);
            assert!(pair.a.value(1e30) > 1e20);
            for _ in 0..1000 {
                let x = 10f64.powf(rng.gen_range(-6.0..6.0));
                let y = 10f64.powf(rng.gen_range(-6.0..6.0));
                assert!(pair.a.value(x) < pair.b.value(x));
                if x < y {
                    assert!(pair.a.value(x) < pair.a.value(y));
                    assert!(pair.b.value(x) < pair.b.value(y));
                }
            }
        }
    }

    #[test]
    fn admissibility_predicate_agrees_with_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs = [
            BoundaryPair::linear(0.5, 1.0).unwrap(),
            BoundaryPair::linear(2.0 / 3.0, 1.0).unwrap(),
        ];
        for _ in 0..2000 {
            let p = SearchPoint::new(
                rng.gen_range(0.1..10.0),
                rng.gen_range(0.1..10.0),
                rng.gen_range(0.1..20.0),
                rng.gen_range(0.1..20.0),
            );
            let direct = p.t1 < p.x1 && p.t2 < p.x2 && 0.5 * p.x1 < p.t1 && (2.0 / 3.0) * p.x2 < p.t2;
            assert_eq!(p.is_admissible(&pairs), direct);
        }
    }
}
