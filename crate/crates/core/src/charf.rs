//! Characterization functionals: the two-dimensional `B(s1, s2)`, the
//! geometric-mean functional `D(s1, s2)`, the four rectangle-corner
//! functionals, and the one-dimensional `B(s)` with its limit `A`.
//!
//! All suprema go through one search engine. Each axis contributes either a
//! pair `(t, x)` constrained by `t < x < a^{-1}(b(t))` or a single corner
//! parameter `t`; the engine scans a coarse grid, then polishes the best
//! candidates by cyclic golden-section search.

use std::fmt;
use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::funcspace::{axis_admissible, AxisFactor, BoundaryPair, SearchPoint, Weight1D, Weight2D, Window};
use crate::quad::{build_v, integrate_1d_with, integrate_2d_with, Tolerance, VFunction, V_KNOTS};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Exponents `p <= q` and the conjugate `p' = p / (p - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub pprime: f64,
}

impl Exponents {
    /// Hardy-side exponents, `1 < p <= q < inf`.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 1.0) {
            return invalid(format!("p must exceed 1, got p = {p}"));
        }
        Self::pk(p, q)
    }

    /// Geometric-mean exponents, `0 < p <= q < inf`.
    pub fn pk(p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return invalid(format!("p must be positive, got p = {p}"));
        }
        if !(q >= p && q.is_finite()) {
            return invalid(format!("need p <= q < inf, got p = {p}, q = {q}"));
        }
        Ok(Exponents {
            p,
            q,
            pprime: p / (p - 1.0),
        })
    }
}

/// A pair `(s1, s2)` of scale parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub s1: f64,
    pub s2: f64,
}

impl ScalePoint {
    pub fn new(s1: f64, s2: f64) -> Self {
        ScalePoint { s1, s2 }
    }

    pub fn get(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.s1
        } else {
            self.s2
        }
    }
}

/// Grid sizes and tolerances of the supremum search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Log-uniform grid points in `t` per axis.
    pub t_grid: usize,
    /// Grid points in the relative position of `x` inside `(t, a^{-1}(b(t)))`.
    pub x_grid: usize,
    /// Coarser per-axis grids used when the weight is not separable.
    pub joint_t_grid: usize,
    pub joint_x_grid: usize,
    /// Number of grid maxima that are polished.
    pub top: usize,
    pub golden_iters: usize,
    pub max_sweeps: usize,
    /// Inner quadrature tolerance during the search.
    pub search_tol: f64,
    /// Inner quadrature tolerance for the reported value.
    pub final_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            t_grid: 24,
            x_grid: 16,
            joint_t_grid: 10,
            joint_x_grid: 6,
            top: 5,
            golden_iters: 40,
            max_sweeps: 30,
            search_tol: 1e-5,
            final_tol: 1e-7,
        }
    }
}

impl SearchOptions {
    /// Doubles the coarse grid densities.
    pub fn refined(&self) -> Self {
        SearchOptions {
            t_grid: 2 * self.t_grid,
            x_grid: 2 * self.x_grid,
            joint_t_grid: 2 * self.joint_t_grid,
            joint_x_grid: 2 * self.joint_x_grid,
            ..*self
        }
    }
}

/// A value of a characterization functional together with where and how it
/// was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationValue {
    /// Nonnegative; `+inf` flags a detected divergence.
    #[serde(with = "crate::nonfinite")]
    pub value: f64,
    pub argmax: SearchPoint,
    pub evaluations: usize,
    pub converged: bool,
    /// Relative quadrature tolerance of the final evaluation.
    pub tolerance: f64,
    pub diagnostics: Vec<String>,
}

impl CharacterizationValue {
    fn zero(reason: &str) -> Self {
        CharacterizationValue {
            value: 0.0,
            argmax: SearchPoint::new(0.0, 0.0, 0.0, 0.0),
            evaluations: 0,
            converged: true,
            tolerance: 0.0,
            diagnostics: vec![reason.to_string()],
        }
    }
}

fn hull(window: Window, pair: &BoundaryPair) -> Result<Window> {
    let lo = window.lo.min(pair.a.eval(window.lo)?);
    let hi = window.hi.max(pair.b.eval(window.hi)?);
    Window::new(lo, hi)
}

/// A complete Hardy-type instance: exponents, weights, boundary pairs and
/// the truncation windows. The transforms `V1`, `V2` are built on
/// construction over the hull of each window and its images under `a`, `b`.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub exps: Exponents,
    pub u: Weight2D,
    pub v: [Weight1D; 2],
    pub pairs: [BoundaryPair; 2],
    pub window: [Window; 2],
    pub search: SearchOptions,
    vfun: [VFunction; 2],
}

impl ProblemConfig {
    pub fn new(
        exps: Exponents,
        u: Weight2D,
        v: [Weight1D; 2],
        pairs: [BoundaryPair; 2],
        window: [Window; 2],
    ) -> Result<Self> {
        Self::with_knots(exps, u, v, pairs, window, V_KNOTS)
    }

    pub fn with_knots(
        exps: Exponents,
        u: Weight2D,
        v: [Weight1D; 2],
        pairs: [BoundaryPair; 2],
        window: [Window; 2],
        knots: usize,
    ) -> Result<Self> {
        if !(exps.p > 1.0) {
            return invalid(format!("p must exceed 1, got p = {}", exps.p));
        }
        let v0 = build_v(&v[0], exps.p, hull(window[0], &pairs[0])?, knots)?;
        let v1 = build_v(&v[1], exps.p, hull(window[1], &pairs[1])?, knots)?;
        Ok(ProblemConfig {
            exps,
            u,
            v,
            pairs,
            window,
            search: SearchOptions::default(),
            vfun: [v0, v1],
        })
    }

    pub fn v_fn(&self, axis: usize) -> &VFunction {
        &self.vfun[axis]
    }

    /// Same instance on different windows.
    pub fn with_window(&self, window: [Window; 2]) -> Result<Self> {
        let mut out = Self::with_knots(
            self.exps,
            self.u.clone(),
            self.v.clone(),
            self.pairs.clone(),
            window,
            self.vfun[0].knots().len(),
        )?;
        out.search = self.search;
        Ok(out)
    }

    /// Same instance with the weight `u` replaced.
    pub fn with_u(&self, u: Weight2D) -> Self {
        let mut out = self.clone();
        out.u = u;
        out
    }

    /// The one-dimensional restriction along `axis`, available when `u` is
    /// separable.
    pub fn restrict(&self, axis: usize) -> Option<ProblemConfig1D> {
        let factors = self.u.axis_factors()?;
        Some(ProblemConfig1D {
            exps: self.exps,
            u: factors[axis].clone(),
            v: self.v[axis].clone(),
            pair: self.pairs[axis].clone(),
            window: self.window[axis],
            search: self.search,
            vfun: self.vfun[axis].clone(),
        })
    }
}

/// A one-dimensional Hardy-type instance.
#[derive(Clone)]
pub struct ProblemConfig1D {
    pub exps: Exponents,
    pub u: AxisFactor,
    pub v: Weight1D,
    pub pair: BoundaryPair,
    pub window: Window,
    pub search: SearchOptions,
    vfun: VFunction,
}

impl fmt::Debug for ProblemConfig1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemConfig1D")
            .field("exps", &self.exps)
            .field("v", &self.v)
            .field("pair", &self.pair)
            .field("window", &self.window)
            .finish_non_exhaustive()
    }
}

impl ProblemConfig1D {
    pub fn new(exps: Exponents, u: Weight1D, v: Weight1D, pair: BoundaryPair, window: Window) -> Result<Self> {
        let vfun = build_v(&v, exps.p, hull(window, &pair)?, V_KNOTS)?;
        Ok(ProblemConfig1D {
            exps,
            u: Arc::new(move |x| u.value(x)),
            v,
            pair,
            window,
            search: SearchOptions::default(),
            vfun,
        })
    }

    /// Replaces the weight `u` by an arbitrary positive function.
    pub fn with_u_fn(mut self, u: AxisFactor) -> Self {
        self.u = u;
        self
    }

    pub fn v_fn(&self) -> &VFunction {
        &self.vfun
    }
}

// ---------------------------------------------------------------------------
// Search engine
// ---------------------------------------------------------------------------

type Kernel<'a> = Box<dyn Fn(f64) -> f64 + Sync + 'a>;
type Prefactor<'a> = Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>;

enum AxisKind {
    /// `t in [lo, hi]`, `x in (t, min(hi, a^{-1}(b(t))))`, integral over `[t, x]`.
    Constrained { pair: BoundaryPair, lo: f64, hi: f64 },
    /// `t in [t_lo, d]`; integral over `[t, d]` when `forward`, else `[c, t]`.
    Corner { c: f64, d: f64, t_lo: f64, forward: bool },
}

struct Axis<'a> {
    kind: AxisKind,
    factor: Option<AxisFactor>,
    kernel: Kernel<'a>,
    pref: Prefactor<'a>,
}

#[derive(Clone, Copy)]
struct AxisPoint {
    t: f64,
    x: f64,
    lo: f64,
    hi: f64,
}

const LAMBDA_EDGE: f64 = 1e-9;

impl Axis<'_> {
    fn ncoords(&self) -> usize {
        match self.kind {
            AxisKind::Constrained { .. } => 2,
            AxisKind::Corner { .. } => 1,
        }
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            AxisKind::Constrained { lo, hi, .. } => vec![(lo.ln(), hi.ln()), (LAMBDA_EDGE, 1.0 - LAMBDA_EDGE)],
            AxisKind::Corner { t_lo, d, .. } => vec![(t_lo.ln(), d.ln())],
        }
    }

    fn grid(&self, nt: usize, nx: usize) -> Vec<Vec<f64>> {
        let b = self.bounds();
        let (l0, l1) = b[0];
        let ts: Vec<f64> = (0..nt).map(|j| l0 + (l1 - l0) * (j as f64 + 0.5) / nt as f64).collect();
        match self.kind {
            AxisKind::Constrained { .. } => {
                let mut out = Vec::with_capacity(nt * nx);
                for &lt in &ts {
                    for k in 0..nx {
                        out.push(vec![lt, (k as f64 + 0.5) / nx as f64]);
                    }
                }
                out
            }
            AxisKind::Corner { .. } => ts.into_iter().map(|lt| vec![lt]).collect(),
        }
    }

    fn spacing(&self, nt: usize, nx: usize) -> Vec<f64> {
        let b = self.bounds();
        let mut out = vec![(b[0].1 - b[0].0) / nt as f64];
        if b.len() == 2 {
            out.push(1.0 / nx as f64);
        }
        out
    }

    fn point(&self, c: &[f64]) -> Option<AxisPoint> {
        match &self.kind {
            AxisKind::Constrained { pair, hi, .. } => {
                let t = c[0].exp();
                let xmax = pair.x_limit(t).ok()?.min(*hi);
                if !(xmax > t) {
                    return None;
                }
                let lam = c[1].clamp(LAMBDA_EDGE, 1.0 - LAMBDA_EDGE);
                let x = t * (xmax / t).powf(lam);
                if !axis_admissible(pair, t, x) {
                    return None;
                }
                Some(AxisPoint { t, x, lo: t, hi: x })
            }
            AxisKind::Corner { c: cc, d, forward, .. } => {
                let t = c[0].exp().min(*d);
                if *forward {
                    Some(AxisPoint {
                        t,
                        x: *d,
                        lo: t,
                        hi: *d,
                    })
                } else {
                    Some(AxisPoint {
                        t,
                        x: *cc,
                        lo: *cc,
                        hi: t,
                    })
                }
            }
        }
    }

    /// `int_lo^hi factor * kernel`.
    fn integral(&self, pt: &AxisPoint, tol: f64) -> Result<f64> {
        let f = self.factor.as_ref().expect("separable axis");
        let r = integrate_1d_with(
            |y| {
                let w = f(y);
                if w == 0.0 {
                    0.0
                } else {
                    w * (self.kernel)(y)
                }
            },
            pt.lo,
            pt.hi,
            &[],
            Tolerance { rel: tol, abs: 1e-300 },
        )?;
        Ok(r.value.max(0.0))
    }
}

struct Engine<'a> {
    axes: Vec<Axis<'a>>,
    /// The weight when it does not factor over the axes.
    joint: Option<&'a Weight2D>,
    q: f64,
    opts: SearchOptions,
}

fn golden_max(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

/// Cyclic coordinate-wise golden-section maximization from `start`, each
/// coordinate searched within one `spacing` of its current value.
pub(crate) fn coordinate_golden(
    f: &mut impl FnMut(&[f64]) -> f64,
    start: Vec<f64>,
    start_val: f64,
    bounds: &[(f64, f64)],
    spacing: &[f64],
    iters: usize,
    max_sweeps: usize,
) -> (Vec<f64>, f64, bool) {
    let mut x = start;
    let mut best = start_val;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let prev = best;
        for k in 0..x.len() {
            let lo = (x[k] - spacing[k]).max(bounds[k].0);
            let hi = (x[k] + spacing[k]).min(bounds[k].1);
            if !(hi > lo) {
                continue;
            }
            let mut probe = x.clone();
            let (yk, val) = golden_max(
                &mut |y| {
                    probe[k] = y;
                    f(&probe)
                },
                lo,
                hi,
                iters,
            );
            if val > best {
                best = val;
                x[k] = yk;
            }
        }
        if best - prev <= 1e-12 * best.abs() {
            converged = true;
            break;
        }
    }
    (x, best, converged)
}

impl<'a> Engine<'a> {
    fn split<'c>(&self, coords: &'c [f64]) -> Vec<&'c [f64]> {
        let mut out = Vec::with_capacity(self.axes.len());
        let mut k = 0;
        for a in &self.axes {
            out.push(&coords[k..k + a.ncoords()]);
            k += a.ncoords();
        }
        out
    }

    fn points(&self, coords: &[f64]) -> Option<Vec<AxisPoint>> {
        self.split(coords)
            .iter()
            .zip(&self.axes)
            .map(|(c, a)| a.point(c))
            .collect()
    }

    fn joint_integral(&self, pts: &[AxisPoint], tol: f64) -> Result<f64> {
        let w = self.joint.expect("joint weight");
        let (k0, k1) = (&self.axes[0].kernel, &self.axes[1].kernel);
        let r = integrate_2d_with(
            |y1, y2| {
                let u = w.value(y1, y2);
                if u == 0.0 {
                    0.0
                } else {
                    u * k0(y1) * k1(y2)
                }
            },
            [pts[0].lo, pts[0].hi, pts[1].lo, pts[1].hi],
            &[],
            &[],
            Tolerance { rel: tol, abs: 1e-300 },
        )?;
        Ok(r.value.max(0.0))
    }

    fn value_at(&self, coords: &[f64], tol: f64) -> Result<f64> {
        let Some(pts) = self.points(coords) else {
            return Ok(0.0);
        };
        let mut pref = 1.0;
        for (a, pt) in self.axes.iter().zip(&pts) {
            pref *= (a.pref)(pt.t, pt.x);
        }
        let inner = if self.joint.is_some() {
            self.joint_integral(&pts, tol)?
        } else {
            let mut prod = 1.0;
            for (a, pt) in self.axes.iter().zip(&pts) {
                prod *= a.integral(pt, tol)?;
                if prod == 0.0 {
                    break;
                }
            }
            prod
        };
        Ok(inner.powf(1.0 / self.q) * pref)
    }

    fn search_point(&self, coords: &[f64]) -> SearchPoint {
        match self.points(coords) {
            Some(p) if p.len() == 2 => SearchPoint::new(p[0].t, p[1].t, p[0].x, p[1].x),
            Some(p) => SearchPoint::new(p[0].t, p[0].t, p[0].x, p[0].x),
            None => SearchPoint::new(0.0, 0.0, 0.0, 0.0),
        }
    }

    fn run(&self) -> Result<CharacterizationValue> {
        let opts = self.opts;
        let (nt, nx) = if self.joint.is_some() {
            (opts.joint_t_grid, opts.joint_x_grid)
        } else {
            (opts.t_grid, opts.x_grid)
        };
        let mut evaluations = 0usize;
        let mut failures = 0usize;
        let mut diagnostics = Vec::new();

        // Coarse grid. Separable weights reuse per-axis factors.
        let axis_grids: Vec<Vec<Vec<f64>>> = self.axes.iter().map(|a| a.grid(nt, nx)).collect();
        let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
        if self.joint.is_none() {
            let mut per_axis: Vec<Vec<f64>> = Vec::with_capacity(self.axes.len());
            for (a, grid) in self.axes.iter().zip(&axis_grids) {
                let vals = grid
                    .iter()
                    .map(|c| {
                        evaluations += 1;
                        match a.point(c) {
                            None => 0.0,
                            Some(pt) => match a.integral(&pt, opts.search_tol) {
                                Ok(i) => i.powf(1.0 / self.q) * (a.pref)(pt.t, pt.x),
                                Err(_) => {
                                    failures += 1;
                                    f64::NAN
                                }
                            },
                        }
                    })
                    .collect();
                per_axis.push(vals);
            }
            if self.axes.len() == 1 {
                for (c, v) in axis_grids[0].iter().zip(&per_axis[0]) {
                    candidates.push((*v, c.clone()));
                }
            } else {
                // Keep only the best few products without materializing all pairs.
                let top = opts.top.max(1);
                for (i, v0) in per_axis[0].iter().enumerate() {
                    for (j, v1) in per_axis[1].iter().enumerate() {
                        let v = v0 * v1;
                        if !v.is_finite() {
                            continue;
                        }
                        if candidates.len() < top || v > candidates[candidates.len() - 1].0 {
                            let mut c = axis_grids[0][i].clone();
                            c.extend_from_slice(&axis_grids[1][j]);
                            let pos = candidates.partition_point(|e| e.0 >= v);
                            candidates.insert(pos, (v, c));
                            candidates.truncate(top);
                        }
                    }
                }
            }
        } else {
            for c0 in &axis_grids[0] {
                for c1 in &axis_grids[1] {
                    let mut c = c0.clone();
                    c.extend_from_slice(c1);
                    evaluations += 1;
                    match self.value_at(&c, opts.search_tol) {
                        Ok(v) => candidates.push((v, c)),
                        Err(_) => failures += 1,
                    }
                }
            }
        }
        if failures > 0 {
            diagnostics.push(format!("{failures} grid evaluations failed and were skipped"));
        }
        candidates.retain(|c| c.0.is_finite());
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        candidates.truncate(opts.top.max(1));
        let Some(first) = candidates.first() else {
            return Err(Error::Accuracy {
                estimate: f64::NAN,
                error: f64::INFINITY,
                evaluations,
            });
        };
        if first.0 == 0.0 {
            let mut cv = CharacterizationValue::zero("supremand vanishes on the whole search grid");
            cv.evaluations = evaluations;
            cv.argmax = self.search_point(&first.1);
            return Ok(cv);
        }

        // Polish.
        let bounds: Vec<(f64, f64)> = self.axes.iter().flat_map(|a| a.bounds()).collect();
        let spacing: Vec<f64> = self.axes.iter().flat_map(|a| a.spacing(nt, nx)).collect();
        let mut best: Option<(f64, Vec<f64>, bool)> = None;
        for (v, c) in candidates {
            let mut evals = 0usize;
            let mut f = |x: &[f64]| {
                evals += 1;
                self.value_at(x, opts.search_tol).unwrap_or(f64::NEG_INFINITY)
            };
            let (x, val, conv) = coordinate_golden(&mut f, c, v, &bounds, &spacing, opts.golden_iters, opts.max_sweeps);
            evaluations += evals;
            if best.as_ref().is_none_or(|b| val > b.0) {
                best = Some((val, x, conv));
            }
        }
        let (_, coords, converged) = best.expect("at least one candidate");
        let value = self.value_at(&coords, opts.final_tol)?;
        evaluations += 1;
        if !converged {
            diagnostics.push("coordinate search hit the sweep limit".into());
        }
        Ok(CharacterizationValue {
            value,
            argmax: self.search_point(&coords),
            evaluations,
            converged,
            tolerance: opts.final_tol,
            diagnostics,
        })
    }
}

fn constrained(pair: &BoundaryPair, w: Window) -> AxisKind {
    AxisKind::Constrained {
        pair: pair.clone(),
        lo: w.lo,
        hi: w.hi,
    }
}

fn check_s(s: f64, p: f64) -> Result<()> {
    if !(s > 1.0 && s < p) {
        return domain(format!("scale parameter s = {s} outside (1, {p})"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Hardy functionals
// ---------------------------------------------------------------------------

fn b_axis<'a>(
    vf: &'a VFunction,
    pair: &'a BoundaryPair,
    window: Window,
    factor: Option<AxisFactor>,
    p: f64,
    q: f64,
    s: f64,
) -> Axis<'a> {
    let ek = q * (p - s) / p;
    let ep = (s - 1.0) / p;
    Axis {
        kind: constrained(pair, window),
        factor,
        kernel: Box::new(move |y| {
            (vf.value(pair.b.value(y)) - vf.value(pair.a.value(y)))
                .max(0.0)
                .powf(ek)
        }),
        pref: Box::new(move |t, x| {
            (vf.value(pair.b.value(t)) - vf.value(pair.a.value(x)))
                .max(0.0)
                .powf(ep)
        }),
    }
}

fn b2_engine<'a>(cfg: &'a ProblemConfig, s: ScalePoint) -> Engine<'a> {
    let factors = cfg.u.axis_factors();
    let (p, q) = (cfg.exps.p, cfg.exps.q);
    let axes = (0..2)
        .map(|i| {
            b_axis(
                &cfg.vfun[i],
                &cfg.pairs[i],
                cfg.window[i],
                factors.as_ref().map(|f| f[i].clone()),
                p,
                q,
                s.get(i),
            )
        })
        .collect();
    Engine {
        axes,
        joint: if factors.is_some() { None } else { Some(&cfg.u) },
        q,
        opts: cfg.search,
    }
}

/// The two-dimensional functional `B(s1, s2)`.
pub fn b2(cfg: &ProblemConfig, s: ScalePoint) -> Result<CharacterizationValue> {
    check_s(s.s1, cfg.exps.p)?;
    check_s(s.s2, cfg.exps.p)?;
    if cfg.u.is_zero() {
        return Ok(CharacterizationValue::zero("u vanishes identically"));
    }
    b2_engine(cfg, s).run()
}

/// The quantity under the supremum of `B(s1, s2)` at a given point, evaluated
/// directly with a 2D integral (no separable shortcut). Zero when the point
/// is not admissible.
pub fn b2_supremand(cfg: &ProblemConfig, s: ScalePoint, pt: &SearchPoint, tol: f64) -> Result<f64> {
    if !pt.is_admissible(&cfg.pairs) {
        return Ok(0.0);
    }
    let mut engine = b2_engine(cfg, s);
    engine.joint = Some(&cfg.u);
    let pts: Vec<AxisPoint> = (0..2)
        .map(|i| AxisPoint {
            t: pt.t(i),
            x: pt.x(i),
            lo: pt.t(i),
            hi: pt.x(i),
        })
        .collect();
    let inner = engine.joint_integral(&pts, tol)?;
    let pref: f64 = (0..2).map(|i| (engine.axes[i].pref)(pt.t(i), pt.x(i))).product();
    Ok(inner.powf(1.0 / cfg.exps.q) * pref)
}

/// The one-dimensional functional `B(s)`.
pub fn b1(cfg: &ProblemConfig1D, s: f64) -> Result<CharacterizationValue> {
    check_s(s, cfg.exps.p)?;
    let axis = b_axis(
        &cfg.vfun,
        &cfg.pair,
        cfg.window,
        Some(cfg.u.clone()),
        cfg.exps.p,
        cfg.exps.q,
        s,
    );
    Engine {
        axes: vec![axis],
        joint: None,
        q: cfg.exps.q,
        opts: cfg.search,
    }
    .run()
}

/// The quantity under the supremum of `B(s)` at `(t, x)`.
pub fn b1_supremand(cfg: &ProblemConfig1D, s: f64, t: f64, x: f64, tol: f64) -> Result<f64> {
    if !axis_admissible(&cfg.pair, t, x) {
        return Ok(0.0);
    }
    let axis = b_axis(
        &cfg.vfun,
        &cfg.pair,
        cfg.window,
        Some(cfg.u.clone()),
        cfg.exps.p,
        cfg.exps.q,
        s,
    );
    let pt = AxisPoint { t, x, lo: t, hi: x };
    Ok(axis.integral(&pt, tol)?.powf(1.0 / cfg.exps.q) * (axis.pref)(t, x))
}

/// Order-one Richardson extrapolation of values sampled at `delta_0 2^{-k}`.
/// Returns the extrapolant and the spread of the last two extrapolants.
pub fn richardson_limit(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Extrapolation {
            reason: "need at least two values".into(),
            values: values.to_vec(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Extrapolation {
            reason: "sequence contains non-finite values".into(),
            values: values.to_vec(),
        });
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let noise = 1e-7 * scale;
    let up = diffs.iter().any(|d| *d > noise);
    let down = diffs.iter().any(|d| *d < -noise);
    if up && down {
        return Err(Error::Extrapolation {
            reason: "sequence is not monotone".into(),
            values: values.to_vec(),
        });
    }
    if diffs.len() >= 2 {
        let (d0, d1) = (diffs[diffs.len() - 2].abs(), diffs[diffs.len() - 1].abs());
        if d1 > noise && d1 > 0.9 * d0 {
            return Err(Error::Extrapolation {
                reason: "increments do not contract; sequence appears to diverge".into(),
                values: values.to_vec(),
            });
        }
    }
    let rich: Vec<f64> = values.windows(2).map(|w| 2.0 * w[1] - w[0]).collect();
    let last = rich[rich.len() - 1];
    let spread = if rich.len() >= 2 {
        (last - rich[rich.len() - 2]).abs()
    } else {
        diffs[0].abs()
    };
    Ok((last, spread))
}

/// The limit `A = lim_{s -> p} B(s)`, extrapolated from `B(p - delta_0 2^{-k})`,
/// `k = 0..levels`. The spread of the last two extrapolants is returned in
/// `tolerance`.
pub fn a_limit(cfg: &ProblemConfig1D, delta0: f64, levels: usize) -> Result<CharacterizationValue> {
    let p = cfg.exps.p;
    if !(delta0 > 0.0 && delta0 < p - 1.0) {
        return invalid(format!("delta_0 must lie in (0, p - 1), got {delta0}"));
    }
    let mut values = Vec::with_capacity(levels + 1);
    let mut last = None;
    let mut evaluations = 0;
    for k in 0..=levels {
        let cv = b1(cfg, p - delta0 * 0.5f64.powi(k as i32))?;
        evaluations += cv.evaluations;
        values.push(cv.value);
        last = Some(cv);
    }
    let (value, spread) = richardson_limit(&values)?;
    let last = last.expect("levels >= 0");
    Ok(CharacterizationValue {
        value,
        argmax: last.argmax,
        evaluations,
        converged: last.converged,
        tolerance: spread,
        diagnostics: vec![format!("raw values {values:?}")],
    })
}

// ---------------------------------------------------------------------------
// Corner functionals
// ---------------------------------------------------------------------------

/// Orientation variants of the rectangle-corner functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerVariant {
    /// Integral over `[t1, d1] x [t2, d2]`.
    AW,
    /// Integral over `[t1, d1] x [c2, t2]`.
    AWstar,
    /// Integral over `[c1, t1] x [c2, t2]`.
    AWtilde,
    /// Integral over `[c1, t1] x [t2, d2]`.
    AWtildeStar,
}

impl CornerVariant {
    /// Per-axis orientation; `true` integrates over `[t, d]`.
    pub fn forward(&self) -> [bool; 2] {
        match self {
            CornerVariant::AW => [true, true],
            CornerVariant::AWstar => [true, false],
            CornerVariant::AWtilde => [false, false],
            CornerVariant::AWtildeStar => [false, true],
        }
    }

    /// Human-readable form of the implemented functional.
    pub fn formula(&self) -> &'static str {
        match self {
            CornerVariant::AW => {
                "sup_t (int_{t1}^{d1} int_{t2}^{d2} u prod (V_i(x_i)-V_i(c_i))^{q(p-s_i)/p})^{1/q} prod (V_i(t_i)-V_i(c_i))^{(s_i-1)/p}"
            }
            CornerVariant::AWstar => {
                "sup_t (int_{t1}^{d1} int_{c2}^{t2} u (V_1(x_1)-V_1(c_1))^{q(p-s_1)/p} (V_2(d_2)-V_2(x_2))^{q(p-s_2)/p})^{1/q} (V_1(t_1)-V_1(c_1))^{(s_1-1)/p} (V_2(d_2)-V_2(t_2))^{(s_2-1)/p}"
            }
            CornerVariant::AWtilde => {
                "sup_t (int_{c1}^{t1} int_{c2}^{t2} u prod (V_i(d_i)-V_i(x_i))^{q(p-s_i)/p})^{1/q} prod (V_i(d_i)-V_i(t_i))^{(s_i-1)/p}"
            }
            CornerVariant::AWtildeStar => {
                "sup_t (int_{c1}^{t1} int_{t2}^{d2} u (V_1(d_1)-V_1(x_1))^{q(p-s_1)/p} (V_2(x_2)-V_2(c_2))^{q(p-s_2)/p})^{1/q} (V_1(d_1)-V_1(t_1))^{(s_1-1)/p} (V_2(t_2)-V_2(c_2))^{(s_2-1)/p}"
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            CornerVariant::AW => "AW",
            CornerVariant::AWstar => "AWstar",
            CornerVariant::AWtilde => "AWtilde",
            CornerVariant::AWtildeStar => "AWtilde_star",
        }
    }
}

/// A rectangle `[c1, d1] x [c2, d2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub c: [f64; 2],
    pub d: [f64; 2],
}

impl Rect {
    pub fn new(c1: f64, d1: f64, c2: f64, d2: f64) -> Self {
        Rect {
            c: [c1, c2],
            d: [d1, d2],
        }
    }
}

/// One of the four rectangle-corner functionals. A lower corner `c_i = 0`
/// is replaced by the lower end of the tabulated `V_i`.
pub fn rect_corner(
    variant: CornerVariant,
    rect: Rect,
    cfg: &ProblemConfig,
    s: ScalePoint,
) -> Result<CharacterizationValue> {
    check_s(s.s1, cfg.exps.p)?;
    check_s(s.s2, cfg.exps.p)?;
    if (0..2).any(|i| !(rect.d[i] > rect.c[i])) {
        return Ok(CharacterizationValue::zero("degenerate rectangle"));
    }
    if cfg.u.is_zero() {
        return Ok(CharacterizationValue::zero("u vanishes identically"));
    }
    let factors = cfg.u.axis_factors();
    let (p, q) = (cfg.exps.p, cfg.exps.q);
    let mut axes = Vec::with_capacity(2);
    for i in 0..2 {
        let vf = &cfg.vfun[i];
        let (vlo, vhi) = vf.domain();
        if rect.d[i] > vhi {
            return domain(format!(
                "rectangle end d{} = {} beyond the tabulated range {vhi}",
                i + 1,
                rect.d[i]
            ));
        }
        let c = rect.c[i].max(vlo);
        let d = rect.d[i];
        if !(d > c) {
            return Ok(CharacterizationValue::zero("rectangle below the tabulated range"));
        }
        let (vc, vd) = (vf.value(c), vf.value(d));
        let si = s.get(i);
        let ek = q * (p - si) / p;
        let ep = (si - 1.0) / p;
        let forward = variant.forward()[i];
        let (kernel, pref): (Kernel<'_>, Prefactor<'_>) = if forward {
            (
                Box::new(move |x| (vf.value(x) - vc).max(0.0).powf(ek)),
                Box::new(move |t, _| (vf.value(t) - vc).max(0.0).powf(ep)),
            )
        } else {
            (
                Box::new(move |x| (vd - vf.value(x)).max(0.0).powf(ek)),
                Box::new(move |t, _| (vd - vf.value(t)).max(0.0).powf(ep)),
            )
        };
        axes.push(Axis {
            kind: AxisKind::Corner { c, d, t_lo: c, forward },
            factor: factors.as_ref().map(|f| f[i].clone()),
            kernel,
            pref,
        });
    }
    Engine {
        axes,
        joint: if factors.is_some() { None } else { Some(&cfg.u) },
        q,
        opts: cfg.search,
    }
    .run()
}

// ---------------------------------------------------------------------------
// Geometric-mean side
// ---------------------------------------------------------------------------

/// The weight `w(x) = exp(box-mean of ln(1/v))^{q/p} u(x)`, with box means
/// memoized per point.
pub struct PkWeight {
    u: Weight2D,
    v: Weight2D,
    ratio: f64,
    pairs: [BoundaryPair; 2],
    /// Per-axis factors of `ln v`, when separable.
    v_factors: Option<[AxisFactor; 2]>,
    axis_cache: [DashMap<u64, f64>; 2],
    joint_cache: DashMap<(u64, u64), f64>,
}

impl fmt::Debug for PkWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PkWeight")
            .field("u", &self.u)
            .field("v", &self.v)
            .field("ratio", &self.ratio)
            .field("pairs", &self.pairs)
            .finish_non_exhaustive()
    }
}

const LN_MEAN_TOL: Tolerance = Tolerance { rel: 1e-11, abs: 1e-13 };

impl PkWeight {
    pub fn u(&self) -> &Weight2D {
        &self.u
    }

    pub fn v(&self) -> &Weight2D {
        &self.v
    }

    fn axis_mean(&self, axis: usize, x: f64) -> f64 {
        let key = x.to_bits();
        if let Some(m) = self.axis_cache[axis].get(&key) {
            return *m;
        }
        let f = &self.v_factors.as_ref().expect("separable v")[axis];
        let pair = &self.pairs[axis];
        let (a, b) = (pair.a.value(x), pair.b.value(x));
        let m = integrate_1d_with(|y| f(y), a, b, &[], LN_MEAN_TOL)
            .map(|r| r.value / (b - a))
            .unwrap_or(f64::NAN);
        self.axis_cache[axis].insert(key, m);
        m
    }

    /// Box mean of `ln v` over `[a1(x1), b1(x1)] x [a2(x2), b2(x2)]`.
    pub fn mean_ln_v(&self, x1: f64, x2: f64) -> f64 {
        if self.v_factors.is_some() {
            return self.axis_mean(0, x1) + self.axis_mean(1, x2);
        }
        let key = (x1.to_bits(), x2.to_bits());
        if let Some(m) = self.joint_cache.get(&key) {
            return *m;
        }
        let (p0, p1) = (&self.pairs[0], &self.pairs[1]);
        let rect = [p0.a.value(x1), p0.b.value(x1), p1.a.value(x2), p1.b.value(x2)];
        let area = (rect[1] - rect[0]) * (rect[3] - rect[2]);
        let m = integrate_2d_with(|y1, y2| self.v.ln_value(y1, y2), rect, &[], &[], LN_MEAN_TOL)
            .map(|r| r.value / area)
            .unwrap_or(f64::NAN);
        self.joint_cache.insert(key, m);
        m
    }

    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        let u = self.u.value(x1, x2);
        if u == 0.0 {
            return 0.0;
        }
        (-self.ratio * self.mean_ln_v(x1, x2)).exp() * u
    }

    pub(crate) fn axis_factors(this: &Arc<PkWeight>) -> Option<[AxisFactor; 2]> {
        this.v_factors.as_ref()?;
        let [u0, u1] = this.u.axis_factors()?;
        let (w0, w1) = (this.clone(), this.clone());
        Some([
            Arc::new(move |x| {
                let u = u0(x);
                if u == 0.0 {
                    0.0
                } else {
                    (-w0.ratio * w0.axis_mean(0, x)).exp() * u
                }
            }),
            Arc::new(move |x| {
                let u = u1(x);
                if u == 0.0 {
                    0.0
                } else {
                    (-w1.ratio * w1.axis_mean(1, x)).exp() * u
                }
            }),
        ])
    }
}

/// Builds the derived weight `w` from `u`, `v` and the boundary pairs.
pub fn pk_weight_w(u: Weight2D, v: Weight2D, exps: Exponents, pairs: [BoundaryPair; 2]) -> Result<Weight2D> {
    let v_factors = v.ln_axis_factors();
    let w = PkWeight {
        u,
        v,
        ratio: exps.q / exps.p,
        pairs,
        v_factors,
        axis_cache: [DashMap::new(), DashMap::new()],
        joint_cache: DashMap::new(),
    };
    for probe in [(1.0, 1.0), (1e-3, 1e3), (1e3, 1e-3)] {
        let m = w.mean_ln_v(probe.0, probe.1);
        if !m.is_finite() {
            return Err(Error::Integrability(format!(
                "ln(1/v) is not integrable on the box at x = ({}, {})",
                probe.0, probe.1
            )));
        }
    }
    Ok(Weight2D::DerivedPk(Arc::new(w)))
}

/// A geometric-mean instance: `0 < p <= q`, weights `u`, `v` on the quarter
/// plane, boundary pairs and windows. The derived weight `w` is built on
/// construction.
#[derive(Debug, Clone)]
pub struct PkConfig {
    pub exps: Exponents,
    pub u: Weight2D,
    pub v: Weight2D,
    pub pairs: [BoundaryPair; 2],
    pub window: [Window; 2],
    pub search: SearchOptions,
    w: Weight2D,
}

impl PkConfig {
    pub fn new(
        exps: Exponents,
        u: Weight2D,
        v: Weight2D,
        pairs: [BoundaryPair; 2],
        window: [Window; 2],
    ) -> Result<Self> {
        let w = pk_weight_w(u.clone(), v.clone(), exps, pairs.clone())?;
        Ok(PkConfig {
            exps,
            u,
            v,
            pairs,
            window,
            search: SearchOptions::default(),
            w,
        })
    }

    pub fn w(&self) -> &Weight2D {
        &self.w
    }

    pub fn with_window(&self, window: [Window; 2]) -> Result<Self> {
        let mut out = Self::new(self.exps, self.u.clone(), self.v.clone(), self.pairs.clone(), window)?;
        out.search = self.search;
        Ok(out)
    }

    /// The Hardy instance with unit `v_i` (so `V_i(t) = t`) and weight
    /// `w prod (b_i - a_i)^{-q}`, whose `B` coincides with this `D`.
    pub fn transformed_hardy(&self) -> Result<ProblemConfig> {
        let exps = Exponents::new(self.exps.p, self.exps.q)?;
        let u = Weight2D::BoxWidthScaled {
            base: Box::new(self.w.clone()),
            pairs: Box::new(self.pairs.clone()),
            exponent: -self.exps.q,
        };
        let mut cfg = ProblemConfig::new(
            exps,
            u,
            [Weight1D::unit(), Weight1D::unit()],
            self.pairs.clone(),
            self.window,
        )?;
        cfg.search = self.search;
        Ok(cfg)
    }
}

fn d_engine<'a>(cfg: &'a PkConfig, s: ScalePoint) -> Engine<'a> {
    let factors = cfg.w.axis_factors();
    let (p, q) = (cfg.exps.p, cfg.exps.q);
    let axes = (0..2)
        .map(|i| {
            let pair = &cfg.pairs[i];
            let si = s.get(i);
            let ek = -q * si / p;
            let ep = (si - 1.0) / p;
            Axis {
                kind: constrained(pair, cfg.window[i]),
                factor: factors.as_ref().map(|f| f[i].clone()),
                kernel: Box::new(move |y| (pair.b.value(y) - pair.a.value(y)).powf(ek)),
                pref: Box::new(move |t, x| (pair.b.value(t) - pair.a.value(x)).max(0.0).powf(ep)),
            }
        })
        .collect();
    Engine {
        axes,
        joint: if factors.is_some() { None } else { Some(&cfg.w) },
        q,
        opts: cfg.search,
    }
}

/// The geometric-mean functional `D(s1, s2)`, `s_i > 1`.
pub fn d2(cfg: &PkConfig, s: ScalePoint) -> Result<CharacterizationValue> {
    for si in [s.s1, s.s2] {
        if !(si > 1.0 && si.is_finite()) {
            return domain(format!("scale parameter s = {si} must exceed 1"));
        }
    }
    if cfg.w.is_zero() {
        return Ok(CharacterizationValue::zero("w vanishes identically"));
    }
    d_engine(cfg, s).run()
}

/// The quantity under the supremum of `D(s1, s2)` at a given point.
pub fn d2_supremand(cfg: &PkConfig, s: ScalePoint, pt: &SearchPoint, tol: f64) -> Result<f64> {
    if !pt.is_admissible(&cfg.pairs) {
        return Ok(0.0);
    }
    let mut engine = d_engine(cfg, s);
    engine.joint = Some(&cfg.w);
    let pts: Vec<AxisPoint> = (0..2)
        .map(|i| AxisPoint {
            t: pt.t(i),
            x: pt.x(i),
            lo: pt.t(i),
            hi: pt.x(i),
        })
        .collect();
    let inner = engine.joint_integral(&pts, tol)?;
    let pref: f64 = (0..2).map(|i| (engine.axes[i].pref)(pt.t(i), pt.x(i))).product();
    Ok(inner.powf(1.0 / cfg.exps.q) * pref)
}

// ---------------------------------------------------------------------------
// Divergence sentinel
// ---------------------------------------------------------------------------

/// Growth factor between successive window doublings that counts as growth.
pub const DIVERGENCE_GROWTH: f64 = 1.10;

/// Evaluates `f` on the windows `W`, `2W`, `4W` (each end pushed out by the
/// factor). Two consecutive relative increases above 10% yield `+inf` with
/// the raw values in the diagnostics; otherwise the value on `W` is returned.
pub fn with_divergence_check<C>(
    base: &C,
    widen: impl Fn(&C, f64) -> Result<C>,
    f: impl Fn(&C) -> Result<CharacterizationValue>,
) -> Result<CharacterizationValue> {
    let v0 = f(base)?;
    let v1 = f(&widen(base, 2.0)?)?;
    let v2 = f(&widen(base, 4.0)?)?;
    let raw = [v0.value, v1.value, v2.value];
    if v1.value > DIVERGENCE_GROWTH * v0.value && v2.value > DIVERGENCE_GROWTH * v1.value {
        let mut out = v0;
        out.value = f64::INFINITY;
        out.converged = false;
        out.diagnostics
            .push(format!("window doubling growth detected; values on W, 2W, 4W: {raw:?}"));
        return Ok(out);
    }
    let mut out = v0;
    out.diagnostics
        .push(format!("window doubling values on W, 2W, 4W: {raw:?}"));
    Ok(out)
}

/// Widens both windows of a Hardy instance.
pub fn widen_hardy(cfg: &ProblemConfig, factor: f64) -> Result<ProblemConfig> {
    cfg.with_window([cfg.window[0].widened(factor), cfg.window[1].widened(factor)])
}

/// Widens both windows of a geometric-mean instance.
pub fn widen_pk(cfg: &PkConfig, factor: f64) -> Result<PkConfig> {
    cfg.with_window([cfg.window[0].widened(factor), cfg.window[1].widened(factor)])
}
