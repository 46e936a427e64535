//! Piecewise-constant grid functions, exact evaluation of `H2` and `G2` on
//! them, weighted norms, the Rayleigh-type ratio and a discretized estimate
//! of the best constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charf::{ProblemConfig, ScalePoint};
use crate::error::{domain, invalid, Error, Result};
use crate::funcspace::{BoundaryPair, Monotone, Weight1D, Weight2D, INVERSE_TOL};
use crate::quad::{integrate_1d, integrate_2d, GL4_NODES, GL4_WEIGHTS, TOL_1D, TOL_2D};
use crate::witness::{default_anchors, thm1_witness_at, WitnessKind, WitnessSpec};

/// A nonnegative function, constant on the cells of a tensor grid and zero
/// outside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFn {
    grid1: Vec<f64>,
    grid2: Vec<f64>,
    /// Row-major cell values, `values[i * (grid2.len() - 1) + j]`.
    values: Vec<f64>,
}

fn check_grid(g: &[f64], name: &str) -> Result<()> {
    if g.len() < 2 {
        return invalid(format!("{name} needs at least two nodes"));
    }
    if !(g[0] >= 0.0) || g.iter().any(|x| !x.is_finite()) {
        return invalid(format!("{name} must be finite and nonnegative"));
    }
    if g.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid(format!("{name} must be strictly increasing"));
    }
    Ok(())
}

impl GridFn {
    pub fn new(grid1: Vec<f64>, grid2: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&grid1, "grid1")?;
        check_grid(&grid2, "grid2")?;
        if values.len() != (grid1.len() - 1) * (grid2.len() - 1) {
            return invalid(format!(
                "expected {} cell values, got {}",
                (grid1.len() - 1) * (grid2.len() - 1),
                values.len()
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("grid function values must be finite and nonnegative");
        }
        Ok(GridFn { grid1, grid2, values })
    }

    pub fn constant(grid1: Vec<f64>, grid2: Vec<f64>, c: f64) -> Result<Self> {
        let n = grid1.len().saturating_sub(1) * grid2.len().saturating_sub(1);
        Self::new(grid1, grid2, vec![c; n])
    }

    /// Samples `f` at cell midpoints.
    pub fn from_fn(grid1: Vec<f64>, grid2: Vec<f64>, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        check_grid(&grid1, "grid1")?;
        check_grid(&grid2, "grid2")?;
        let mut values = Vec::with_capacity((grid1.len() - 1) * (grid2.len() - 1));
        for w1 in grid1.windows(2) {
            let m1 = 0.5 * (w1[0] + w1[1]);
            for w2 in grid2.windows(2) {
                values.push(f(m1, 0.5 * (w2[0] + w2[1])));
            }
        }
        Self::new(grid1, grid2, values)
    }

    /// The tensor product of two per-axis cell value vectors.
    pub fn separable(grid1: Vec<f64>, grid2: Vec<f64>, c1: &[f64], c2: &[f64]) -> Result<Self> {
        let values = c1.iter().flat_map(|&a| c2.iter().map(move |&b| a * b)).collect();
        Self::new(grid1, grid2, values)
    }

    pub fn grid1(&self) -> &[f64] {
        &self.grid1
    }

    pub fn grid2(&self) -> &[f64] {
        &self.grid2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grid1.len() - 1, self.grid2.len() - 1)
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.grid2.len() - 1) + j]
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.grid1.clone(),
            self.grid2.clone(),
            self.values.iter().map(|v| v * lambda).collect(),
        )
    }

    /// Pointwise value; cells are closed on the left.
    pub fn value_at(&self, x1: f64, x2: f64) -> f64 {
        match (locate(&self.grid1, x1), locate(&self.grid2, x2)) {
            (Some(i), Some(j)) => self.cell(i, j),
            _ => 0.0,
        }
    }

    /// Bounding rectangle `[lo1, hi1, lo2, hi2]` of the positive cells.
    pub fn support(&self) -> Option<[f64; 4]> {
        let (n1, n2) = self.shape();
        let mut r: Option<[usize; 4]> = None;
        for i in 0..n1 {
            for j in 0..n2 {
                if self.cell(i, j) > 0.0 {
                    r = Some(match r {
                        None => [i, i, j, j],
                        Some(b) => [b[0].min(i), b[1].max(i), b[2].min(j), b[3].max(j)],
                    });
                }
            }
        }
        r.map(|b| {
            [
                self.grid1[b[0]],
                self.grid1[b[1] + 1],
                self.grid2[b[2]],
                self.grid2[b[3] + 1],
            ]
        })
    }

    /// Resamples onto another grid at cell midpoints. Exact when the target
    /// grid refines this one.
    pub fn resample(&self, grid1: Vec<f64>, grid2: Vec<f64>) -> Result<Self> {
        Self::from_fn(grid1, grid2, |a, b| self.value_at(a, b))
    }
}

fn locate(g: &[f64], x: f64) -> Option<usize> {
    if !(x >= g[0] && x < g[g.len() - 1]) {
        return None;
    }
    Some(g.partition_point(|&v| v <= x) - 1)
}

/// Cell overlap lengths of `[lo, hi]` with the grid, from cell `start` on.
#[derive(Debug, Clone, Default, PartialEq)]
struct SparseRow {
    start: usize,
    vals: Vec<f64>,
}

fn overlaps(g: &[f64], lo: f64, hi: f64) -> SparseRow {
    let n = g.len() - 1;
    if !(hi > g[0] && lo < g[n] && hi > lo) {
        return SparseRow::default();
    }
    let start = g.partition_point(|&v| v <= lo).saturating_sub(1).min(n - 1);
    let mut vals = Vec::new();
    let mut c = start;
    while c < n && g[c] < hi {
        vals.push((g[c + 1].min(hi) - g[c].max(lo)).max(0.0));
        c += 1;
    }
    SparseRow { start, vals }
}

fn box_rows(f: &GridFn, pairs: &[BoundaryPair; 2], x1: f64, x2: f64) -> Result<[SparseRow; 2]> {
    let (a1, b1) = (pairs[0].a.eval(x1)?, pairs[0].b.eval(x1)?);
    let (a2, b2) = (pairs[1].a.eval(x2)?, pairs[1].b.eval(x2)?);
    if !(b1 > a1 && b2 > a2) {
        return domain(format!("degenerate box at ({x1}, {x2})"));
    }
    Ok([overlaps(&f.grid1, a1, b1), overlaps(&f.grid2, a2, b2)])
}

/// `H2 f(x1, x2)`: the exact integral of `f` over the moving box.
pub fn apply_h2(f: &GridFn, pairs: &[BoundaryPair; 2], x1: f64, x2: f64) -> Result<f64> {
    let [r1, r2] = box_rows(f, pairs, x1, x2)?;
    let mut s = 0.0;
    for (di, l1) in r1.vals.iter().enumerate() {
        for (dj, l2) in r2.vals.iter().enumerate() {
            s += l1 * l2 * f.cell(r1.start + di, r2.start + dj);
        }
    }
    Ok(s)
}

/// Value of `G2 f` together with the zero-set flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricMean {
    pub value: f64,
    /// `f` vanishes on a set of positive measure inside the box; the value
    /// is the limit `0`.
    pub vanishing: bool,
}

/// `G2 f(x1, x2)`: the exponential of the box mean of `ln f`.
pub fn apply_g2(f: &GridFn, pairs: &[BoundaryPair; 2], x1: f64, x2: f64) -> Result<GeometricMean> {
    let [r1, r2] = box_rows(f, pairs, x1, x2)?;
    let area = pairs[0].width(x1) * pairs[1].width(x2);
    let covered = r1.vals.iter().sum::<f64>() * r2.vals.iter().sum::<f64>();
    let zero = GeometricMean {
        value: 0.0,
        vanishing: true,
    };
    if covered < area * (1.0 - 1e-12) {
        return Ok(zero);
    }
    let mut s = 0.0;
    for (di, l1) in r1.vals.iter().enumerate() {
        for (dj, l2) in r2.vals.iter().enumerate() {
            let w = l1 * l2;
            if w > 0.0 {
                let v = f.cell(r1.start + di, r2.start + dj);
                if v == 0.0 {
                    return Ok(zero);
                }
                s += w * v.ln();
            }
        }
    }
    Ok(GeometricMean {
        value: (s / covered).exp(),
        vanishing: false,
    })
}

fn axis_cell_masses(g: &[f64], w: &dyn Fn(f64, f64) -> Result<f64>) -> Result<Vec<f64>> {
    g.windows(2).map(|c| w(c[0], c[1])).collect()
}

/// `int_lo^hi v` for a one-variable weight.
pub fn weight1d_mass(v: &Weight1D, lo: f64, hi: f64) -> Result<f64> {
    if let Weight1D::Power { alpha } = *v {
        if alpha == -1.0 {
            if lo > 0.0 {
                return Ok((hi / lo).ln());
            }
        } else if alpha > -1.0 || lo > 0.0 {
            return Ok(
                (crate::funcspace::pow0(hi, alpha + 1.0) - crate::funcspace::pow0(lo, alpha + 1.0)) / (alpha + 1.0),
            );
        }
        return Err(Error::Integrability(format!("x^{alpha} is not integrable at 0")));
    }
    Ok(integrate_1d(|x| v.value(x), lo, hi, TOL_1D)?.value)
}

/// `(int int f^r w)^{1/r}` over `dom = [lo1, hi1, lo2, hi2]`.
pub fn weighted_norm(f: &GridFn, w: &Weight2D, r: f64, dom: [f64; 4]) -> Result<f64> {
    if !(r > 0.0) {
        return domain(format!("norm exponent must be positive, got {r}"));
    }
    if w.is_zero() {
        return Ok(0.0);
    }
    let clip = |g: &[f64], lo: f64, hi: f64| -> Vec<(f64, f64)> {
        g.windows(2).map(|c| (c[0].max(lo), c[1].min(hi))).collect()
    };
    let c1 = clip(&f.grid1, dom[0], dom[1]);
    let c2 = clip(&f.grid2, dom[2], dom[3]);
    let (n1, n2) = f.shape();
    let factors = w.axis_factors();
    let mut total = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            let v = f.cell(i, j);
            let ((l1, h1), (l2, h2)) = (c1[i], c2[j]);
            if v == 0.0 || !(h1 > l1 && h2 > l2) {
                continue;
            }
            let m = match &factors {
                Some([fa, fb]) => {
                    integrate_1d(|x| fa(x), l1, h1, TOL_1D)?.value * integrate_1d(|x| fb(x), l2, h2, TOL_1D)?.value
                }
                None => integrate_2d(|a, b| w.value(a, b), [l1, h1, l2, h2], TOL_2D)?.value,
            };
            total += v.powf(r) * m;
        }
    }
    Ok(total.powf(1.0 / r))
}

/// Gauss-Legendre nodes on the pieces between consecutive breakpoints,
/// each with the grid overlap row of its inner integration range.
#[derive(Debug, Clone)]
pub(crate) struct AxisQuadrature {
    pub(crate) xs: Vec<f64>,
    pub(crate) ws: Vec<f64>,
    rows: Vec<SparseRow>,
}

impl AxisQuadrature {
    pub(crate) fn new(grid: &[f64], mut brk: Vec<f64>, range: impl Fn(f64) -> Result<(f64, f64)>) -> Result<Self> {
        brk.sort_by(f64::total_cmp);
        brk.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
        let mut xs = Vec::with_capacity(4 * brk.len());
        let mut ws = Vec::with_capacity(4 * brk.len());
        for s in brk.windows(2) {
            let (c, h) = (0.5 * (s[0] + s[1]), 0.5 * (s[1] - s[0]));
            for k in 0..4 {
                xs.push(c + h * GL4_NODES[k]);
                ws.push(h * GL4_WEIGHTS[k]);
            }
        }
        let rows = xs
            .iter()
            .map(|&x| {
                let (lo, hi) = range(x)?;
                Ok(overlaps(grid, lo, hi))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AxisQuadrature { xs, ws, rows })
    }

    pub(crate) fn len(&self) -> usize {
        self.xs.len()
    }

    pub(crate) fn concat(parts: Vec<AxisQuadrature>) -> Self {
        let mut out = AxisQuadrature {
            xs: Vec::new(),
            ws: Vec::new(),
            rows: Vec::new(),
        };
        for p in parts {
            out.xs.extend(p.xs);
            out.ws.extend(p.ws);
            out.rows.extend(p.rows);
        }
        out
    }
}

/// Outer nodes for `H2`: the exact set where the box meets the grid, split
/// where a box edge crosses a grid node.
fn outer_nodes(pair: &BoundaryPair, g: &[f64]) -> Result<AxisQuadrature> {
    let inv = |m: &Monotone, y: f64| if y == 0.0 { Ok(0.0) } else { m.inverse(y, INVERSE_TOL) };
    let lo = inv(&pair.b, g[0])?;
    let hi = inv(&pair.a, g[g.len() - 1])?;
    let mut brk = vec![lo, hi];
    for &y in g {
        for m in [&pair.a, &pair.b] {
            if let Ok(x) = m.inverse(y, INVERSE_TOL) {
                if x > lo && x < hi {
                    brk.push(x);
                }
            }
        }
    }
    AxisQuadrature::new(g, brk, |x| Ok((pair.a.eval(x)?, pair.b.eval(x)?)))
}

/// Integrals of `f` over the inner rectangles of all node pairs, row-major
/// `m1 x m2`.
pub(crate) fn box_integrals(axes: [&AxisQuadrature; 2], n: [usize; 2], f: &[f64]) -> Vec<f64> {
    let [n1, n2] = n;
    let (m1, m2) = (axes[0].len(), axes[1].len());
    // t[c][k] = sum_d f[c][d] L2[k][d]
    let mut t = vec![0.0; n1 * m2];
    t.par_chunks_mut(m2.max(1)).enumerate().for_each(|(c, trow)| {
        let frow = &f[c * n2..(c + 1) * n2];
        for (k, r) in axes[1].rows.iter().enumerate() {
            trow[k] = r.vals.iter().enumerate().map(|(dd, l)| l * frow[r.start + dd]).sum();
        }
    });
    let mut h = vec![0.0; m1 * m2];
    h.par_chunks_mut(m2.max(1)).enumerate().for_each(|(j, hrow)| {
        let r = &axes[0].rows[j];
        for (dc, l) in r.vals.iter().enumerate() {
            let trow = &t[(r.start + dc) * m2..(r.start + dc + 1) * m2];
            for k in 0..m2 {
                hrow[k] += l * trow[k];
            }
        }
    });
    h
}

/// Quadrature plan for `||H2 f||_{q,u}` and `||f||_{p, v1 v2}` on a fixed
/// grid. The outer integral runs over the exact set where the box meets the
/// grid, split at every point where a box edge crosses a grid node, with
/// 4-point Gauss-Legendre on each piece.
#[derive(Debug, Clone)]
pub struct RatioPlan {
    p: f64,
    q: f64,
    n: [usize; 2],
    axes: [AxisQuadrature; 2],
    /// Quadrature weight times `u` at the node pairs, row-major `m1 x m2`.
    weights: Vec<f64>,
    /// `int_cell v1 v2`, row-major `n1 x n2`.
    mass: Vec<f64>,
    zero_u: bool,
}

/// Quadrature weights times `u` on all node pairs.
pub(crate) fn node_weights(axes: [&AxisQuadrature; 2], u: impl Fn(usize, usize) -> f64 + Sync) -> Result<Vec<f64>> {
    let m2 = axes[1].len();
    let mut weights = vec![0.0; axes[0].len() * m2];
    weights.par_chunks_mut(m2.max(1)).enumerate().for_each(|(j, row)| {
        for (k, out) in row.iter_mut().enumerate() {
            *out = axes[0].ws[j] * axes[1].ws[k] * u(j, k);
        }
    });
    if let Some(bad) = weights.iter().position(|w| !w.is_finite()) {
        let (j, k) = (bad / m2, bad % m2);
        return domain(format!(
            "weight is not finite at ({}, {})",
            axes[0].xs[j], axes[1].xs[k]
        ));
    }
    Ok(weights)
}

impl RatioPlan {
    pub fn new(cfg: &ProblemConfig, grid1: &[f64], grid2: &[f64]) -> Result<Self> {
        check_grid(grid1, "grid1")?;
        check_grid(grid2, "grid2")?;
        let ax1 = outer_nodes(&cfg.pairs[0], grid1)?;
        let ax2 = outer_nodes(&cfg.pairs[1], grid2)?;
        let zero_u = cfg.u.is_zero();
        let weights = if zero_u {
            Vec::new()
        } else {
            let factors = cfg.u.axis_factors();
            let (x1, x2) = (&ax1.xs, &ax2.xs);
            node_weights([&ax1, &ax2], |j, k| match &factors {
                Some([a, b]) => a(x1[j]) * b(x2[k]),
                None => cfg.u.value(x1[j], x2[k]),
            })?
        };
        let m1 = axis_cell_masses(grid1, &|a, b| weight1d_mass(&cfg.v[0], a, b))?;
        let m2 = axis_cell_masses(grid2, &|a, b| weight1d_mass(&cfg.v[1], a, b))?;
        let mass = m1.iter().flat_map(|&a| m2.iter().map(move |&b| a * b)).collect();
        Ok(RatioPlan {
            p: cfg.exps.p,
            q: cfg.exps.q,
            n: [grid1.len() - 1, grid2.len() - 1],
            axes: [ax1, ax2],
            weights,
            mass,
            zero_u,
        })
    }

    /// `(sum W H^q, H)`.
    fn lhs_q(&self, f: &[f64]) -> (f64, Vec<f64>) {
        if self.zero_u {
            return (0.0, Vec::new());
        }
        let h = box_integrals([&self.axes[0], &self.axes[1]], self.n, f);
        let q = self.q;
        let m2 = self.axes[1].len().max(1);
        let rows: Vec<f64> = h
            .par_chunks(m2)
            .zip(self.weights.par_chunks(m2))
            .map(|(h, w)| h.iter().zip(w).map(|(h, w)| w * h.powf(q)).sum())
            .collect();
        let s = rows.iter().sum();
        (s, h)
    }

    /// `||H2 f||_{q,u}`.
    pub fn lhs(&self, f: &GridFn) -> f64 {
        self.lhs_q(&f.values).0.powf(1.0 / self.q)
    }

    /// `||f||_{p, v1 v2}`.
    pub fn rhs(&self, f: &GridFn) -> f64 {
        self.rhs_p(&f.values).powf(1.0 / self.p)
    }

    fn rhs_p(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.mass).map(|(v, m)| m * v.powf(self.p)).sum()
    }

    /// `||H2 f||_{q,u} / ||f||_{p, v1 v2}`.
    pub fn ratio(&self, f: &GridFn) -> Result<f64> {
        if f.values.len() != self.n[0] * self.n[1] {
            return invalid("grid function does not match the plan");
        }
        self.ratio_raw(&f.values)
    }

    fn ratio_raw(&self, f: &[f64]) -> Result<f64> {
        let d = self.rhs_p(f);
        if !(d > 0.0) {
            return domain("zero denominator in the Rayleigh ratio");
        }
        Ok(self.lhs_q(f).0.powf(1.0 / self.q) / d.powf(1.0 / self.p))
    }

    /// `sum_{j,k} W H^{q-1} L1[j][c] L2[k][d]`, the cell sensitivity of
    /// `sum W H^q / q`.
    fn sensitivity(&self, h: &[f64]) -> Vec<f64> {
        let [n1, n2] = self.n;
        let (m1, m2) = (self.axes[0].len(), self.axes[1].len());
        let q = self.q;
        let y: Vec<f64> = h
            .iter()
            .zip(&self.weights)
            .map(|(h, w)| if *h > 0.0 { w * h.powf(q - 1.0) } else { 0.0 })
            .collect();
        // s[c][k] = sum_j L1[j][c] y[j][k]
        let mut s = vec![0.0; n1 * m2];
        for j in 0..m1 {
            let r = &self.axes[0].rows[j];
            let yrow = &y[j * m2..(j + 1) * m2];
            for (dc, l) in r.vals.iter().enumerate() {
                let srow = &mut s[(r.start + dc) * m2..(r.start + dc + 1) * m2];
                for k in 0..m2 {
                    srow[k] += l * yrow[k];
                }
            }
        }
        let mut g = vec![0.0; n1 * n2];
        g.par_chunks_mut(n2).enumerate().for_each(|(c, grow)| {
            let srow = &s[c * m2..(c + 1) * m2];
            for (k, r) in self.axes[1].rows.iter().enumerate() {
                for (dd, l) in r.vals.iter().enumerate() {
                    grow[r.start + dd] += l * srow[k];
                }
            }
        });
        g
    }
}

/// `||H2 f||_{q,u} / ||f||_{p, v1 v2}`; every value is a lower bound on the
/// best constant.
pub fn rayleigh_ratio(f: &GridFn, cfg: &ProblemConfig) -> Result<f64> {
    RatioPlan::new(cfg, &f.grid1, &f.grid2)?.ratio(f)
}

/// Settings of [`estimate_norm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    /// Cells per axis of the geometric grid over the window.
    pub resolution: usize,
    /// Number of random positive starts.
    pub random_starts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Extra start, resampled onto the grid.
    #[serde(skip)]
    pub warm_start: Option<GridFn>,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            resolution: 32,
            random_starts: 2,
            max_iters: 200,
            seed: 0,
            warm_start: None,
        }
    }
}

/// Result of [`estimate_norm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub best_f: GridFn,
    pub converged: bool,
    /// Label and final ratio of every start.
    pub starts: Vec<(String, f64)>,
    pub diagnostics: Vec<String>,
}

const STAGNATION_LIMIT: usize = 50;

struct Ascent {
    value: f64,
    f: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn normalize(plan: &RatioPlan, f: &mut [f64]) -> bool {
    let d = plan.rhs_p(f).powf(1.0 / plan.p);
    if !(d > 0.0 && d.is_finite()) {
        return false;
    }
    f.iter_mut().for_each(|v| *v /= d);
    true
}

/// Normalized multiplicative ascent. A full step replaces `f` by
/// `(sensitivity / mass)^{1/(p-1)}`; a damped step takes the geometric
/// interpolation with exponent `eta`, halved on every non-improving step.
fn ascend(plan: &RatioPlan, mut f: Vec<f64>, max_iters: usize) -> Ascent {
    if !normalize(plan, &mut f) {
        return Ascent {
            value: 0.0,
            f,
            iterations: 0,
            converged: false,
        };
    }
    let (mut num, mut h) = plan.lhs_q(&f);
    let mut value = num.powf(1.0 / plan.q);
    let mut eta: f64 = 1.0;
    let mut stagnant = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        if num == 0.0 {
            converged = true;
            break;
        }
        let g = plan.sensitivity(&h);
        let e = 1.0 / (plan.p - 1.0);
        let mut cand: Vec<f64> = f
            .iter()
            .zip(&g)
            .zip(&plan.mass)
            .map(|((&fc, &gc), &mc)| {
                let target = if mc > 0.0 && gc > 0.0 { (gc / mc).powf(e) } else { 0.0 };
                if eta >= 1.0 {
                    target
                } else if fc == 0.0 || target == 0.0 {
                    0.0
                } else {
                    fc.powf(1.0 - eta) * target.powf(eta)
                }
            })
            .collect();
        if !normalize(plan, &mut cand) {
            eta *= 0.5;
            stagnant += 1;
        } else {
            let (cnum, ch) = plan.lhs_q(&cand);
            let cval = cnum.powf(1.0 / plan.q);
            if cval > value * (1.0 + 1e-12) {
                let gain = cval / value - 1.0;
                f = cand;
                h = ch;
                num = cnum;
                value = cval;
                eta = (2.0 * eta).min(1.0);
                stagnant = if gain < 1e-10 { stagnant + 1 } else { 0 };
            } else {
                eta *= 0.5;
                stagnant += 1;
            }
        }
        if stagnant >= STAGNATION_LIMIT {
            converged = true;
            break;
        }
    }
    Ascent {
        value,
        f,
        iterations,
        converged,
    }
}

/// Lower estimate of the best constant on a geometric grid over the window:
/// the best Rayleigh ratio found by multiplicative ascent from a uniform
/// start, four witness starts and seeded random starts.
pub fn estimate_norm(cfg: &ProblemConfig, opts: &NormOptions) -> Result<NormEstimate> {
    if opts.resolution < 8 {
        return invalid(format!("resolution must be at least 8, got {}", opts.resolution));
    }
    let g1 = cfg.window[0].geometric_nodes(opts.resolution);
    let g2 = cfg.window[1].geometric_nodes(opts.resolution);
    let plan = RatioPlan::new(cfg, &g1, &g2)?;
    let n = opts.resolution * opts.resolution;

    let mut starts: Vec<(String, Vec<f64>)> = vec![("uniform".into(), vec![1.0; n])];
    let s_mid = 0.5 * (1.0 + cfg.exps.p);
    let centre = [0, 1].map(|i| (cfg.window[i].lo * cfg.window[i].hi).sqrt());
    for (k, anchor) in default_anchors(&cfg.pairs, centre).into_iter().enumerate() {
        let spec = WitnessSpec {
            kind: WitnessKind::Thm1Hardy,
            s: ScalePoint::new(s_mid, s_mid),
            anchor,
            rect: None,
        };
        if let Ok(w) = thm1_witness_at(cfg, &spec) {
            let gf = GridFn::from_fn(g1.clone(), g2.clone(), |a, b| w.value(a, b))?;
            starts.push((format!("witness{k}"), gf.values));
        }
    }
    for r in 0..opts.random_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64));
        starts.push((format!("random{r}"), (0..n).map(|_| rng.gen_range(0.05..1.0)).collect()));
    }
    if let Some(w) = &opts.warm_start {
        starts.push(("warm".into(), w.resample(g1.clone(), g2.clone())?.values));
    }

    let runs: Vec<(String, Ascent)> = starts
        .into_par_iter()
        .map(|(label, f)| (label, ascend(&plan, f, opts.max_iters)))
        .collect();
    let mut best = 0;
    for (k, (_, a)) in runs.iter().enumerate() {
        if a.value > runs[best].1.value {
            best = k;
        }
    }
    let iterations = runs.iter().map(|(_, a)| a.iterations).sum();
    let starts_out: Vec<(String, f64)> = runs.iter().map(|(l, a)| (l.clone(), a.value)).collect();
    let (label, a) = &runs[best];
    let mut diagnostics = vec![format!("best start: {label}")];
    if !a.converged {
        diagnostics.push(format!(
            "iteration limit {} reached while still improving",
            opts.max_iters
        ));
    }
    Ok(NormEstimate {
        value: a.value,
        iterations,
        best_f: GridFn::new(g1, g2, a.f.clone())?,
        converged: a.converged,
        starts: starts_out,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charf::Exponents;
    use crate::funcspace::Window;
    use crate::quad::{integrate_2d_with, Tolerance};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn lin() -> [BoundaryPair; 2] {
        [
            BoundaryPair::linear(0.5, 1.0).unwrap(),
            BoundaryPair::linear(0.5, 1.0).unwrap(),
        ]
    }

    fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
    }

    fn unit_cfg(p: f64, q: f64, window: Window) -> ProblemConfig {
        ProblemConfig::new(
            Exponents::new(p, q).unwrap(),
            Weight2D::unit(),
            [Weight1D::unit(), Weight1D::unit()],
            lin(),
            [window, window],
        )
        .unwrap()
    }

    #[test]
    fn h2_examples() {
        let g = uniform_grid(0.0, 8.0, 16);
        let one = GridFn::constant(g.clone(), g.clone(), 1.0).unwrap();
        assert!((apply_h2(&one, &lin(), 2.0, 4.0).unwrap() - 2.0).abs() < 1e-14);
        let zero = GridFn::constant(g.clone(), g.clone(), 0.0).unwrap();
        assert_eq!(apply_h2(&zero, &lin(), 2.0, 4.0).unwrap(), 0.0);
        let ind = GridFn::from_fn(g.clone(), g, |a, b| {
            if (1.0..2.0).contains(&a) && (1.0..2.0).contains(&b) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!((apply_h2(&ind, &lin(), 3.0, 3.0).unwrap() - 0.25).abs() < 1e-14);
        assert_eq!(ind.support(), Some([1.0, 2.0, 1.0, 2.0]));
    }

    #[test]
    fn g2_examples() {
        let g = uniform_grid(0.0, 8.0, 32);
        let c = GridFn::constant(g.clone(), g.clone(), 3.0).unwrap();
        let v = apply_g2(&c, &lin(), 2.0, 3.0).unwrap();
        assert!((v.value - 3.0).abs() < 1e-13 && !v.vanishing);
        // e on the left half of the box [1, 2] x [1, 2], 1/e on the right half.
        let h = GridFn::from_fn(
            g.clone(),
            g.clone(),
            |a, _| if a < 1.5 { 1f64.exp() } else { (-1f64).exp() },
        )
        .unwrap();
        assert!((apply_g2(&h, &lin(), 2.0, 2.0).unwrap().value - 1.0).abs() < 1e-13);
        let fine = geometric(0.5, 4.0, 800);
        let e = GridFn::from_fn(fine.clone(), fine, |a, b| (a + b).exp()).unwrap();
        let got = apply_g2(&e, &lin(), 2.0, 2.0).unwrap().value;
        assert!((got / 3f64.exp() - 1.0).abs() < 1e-4, "{got}");
        let ind = GridFn::from_fn(g.clone(), g, |a, _| if a < 1.5 { 1.0 } else { 0.0 }).unwrap();
        let z = apply_g2(&ind, &lin(), 2.0, 2.0).unwrap();
        assert_eq!(z.value, 0.0);
        assert!(z.vanishing);
    }

    fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        Window::new(lo, hi).unwrap().geometric_nodes(n)
    }

    #[test]
    fn weighted_norm_examples() {
        let g = uniform_grid(0.0, 1.0, 4);
        let one = GridFn::constant(g.clone(), g.clone(), 1.0).unwrap();
        assert!((weighted_norm(&one, &Weight2D::unit(), 2.0, [0.0, 1.0, 0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        let w = Weight2D::PowerPair { beta: 1.0, gamma: 1.0 };
        assert!((weighted_norm(&one, &w, 1.0, [0.0, 1.0, 0.0, 1.0]).unwrap() - 0.25).abs() < 1e-12);
        let f = GridFn::from_fn(g.clone(), g, |a, b| 1.0 + a * b).unwrap();
        let n1 = weighted_norm(&f, &w, 3.0, [0.0, 1.0, 0.0, 1.0]).unwrap();
        let n2 = weighted_norm(&f.scaled(7.0).unwrap(), &w, 3.0, [0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!((n2 / n1 - 7.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_unit_square() {
        // H2 1_{[1,2]^2} per axis is x - 1 on [1, 2] and 2 - x/2 on [2, 4];
        // its squared L2 norm is 1/3 + 2/3 = 1.
        let cfg = unit_cfg(2.0, 2.0, Window::new(0.5, 8.0).unwrap());
        let g = uniform_grid(1.0, 2.0, 4);
        let f = GridFn::constant(g.clone(), g, 1.0).unwrap();
        let plan = RatioPlan::new(&cfg, f.grid1(), f.grid2()).unwrap();
        assert!((plan.lhs(&f) - 1.0).abs() < 1e-12);
        assert!((plan.rhs(&f) - 1.0).abs() < 1e-12);
        assert!((rayleigh_ratio(&f, &cfg).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_zero_denominator() {
        let cfg = unit_cfg(2.0, 2.0, Window::new(0.5, 8.0).unwrap());
        let g = uniform_grid(1.0, 2.0, 4);
        let f = GridFn::constant(g.clone(), g, 0.0).unwrap();
        assert!(matches!(rayleigh_ratio(&f, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn sensitivity_is_gradient() {
        let cfg = unit_cfg(2.0, 3.0, Window::new(0.5, 8.0).unwrap());
        let g = geometric(1.0, 4.0, 6);
        let f = GridFn::from_fn(g.clone(), g.clone(), |a, b| 1.0 + (a * b).sin().abs()).unwrap();
        let plan = RatioPlan::new(&cfg, &g, &g).unwrap();
        let (_, h) = plan.lhs_q(&f.values);
        let sens = plan.sensitivity(&h);
        for c in [0, 7, 20, 35] {
            let eps = 1e-6;
            let mut up = f.values.clone();
            up[c] += eps;
            let mut dn = f.values.clone();
            dn[c] -= eps;
            let fd = (plan.lhs_q(&up).0 - plan.lhs_q(&dn).0) / (2.0 * eps) / cfg.exps.q;
            assert!(
                (fd - sens[c]).abs() < 1e-6 * sens[c].abs().max(1.0),
                "{fd} vs {}",
                sens[c]
            );
        }
    }

    #[test]
    fn estimate_norm_zero_weight() {
        let cfg = unit_cfg(2.0, 2.0, Window::new(0.1, 10.0).unwrap()).with_u(Weight2D::Zero);
        let est = estimate_norm(
            &cfg,
            &NormOptions {
                resolution: 8,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn estimate_norm_refines() {
        let mut cfg = unit_cfg(2.0, 2.0, Window::new(0.1, 10.0).unwrap());
        cfg.u = Weight2D::PowerPair {
            beta: -2.0,
            gamma: -2.0,
        };
        let coarse = estimate_norm(
            &cfg,
            &NormOptions {
                resolution: 8,
                ..Default::default()
            },
        )
        .unwrap();
        let fine = estimate_norm(
            &cfg,
            &NormOptions {
                resolution: 16,
                warm_start: Some(coarse.best_f.clone()),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(coarse.value > 0.0);
        assert!(
            fine.value >= coarse.value * (1.0 - 1e-9),
            "{} < {}",
            fine.value,
            coarse.value
        );
        assert!((rayleigh_ratio(&fine.best_f, &cfg).unwrap() / fine.value - 1.0).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn jensen(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = geometric(0.1, 20.0, 24);
            let f = GridFn::from_fn(g.clone(), g, |_, _| rng.gen_range(0.01..5.0)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
            for _ in 0..100 {
                let (x1, x2) = (rng.gen_range(0.3..15.0), rng.gen_range(0.3..15.0));
                let pairs = lin();
                let g2 = apply_g2(&f, &pairs, x1, x2).unwrap().value;
                let mean = apply_h2(&f, &pairs, x1, x2).unwrap() / (pairs[0].width(x1) * pairs[1].width(x2));
                prop_assert!(g2 <= mean + 1e-12);
            }
        }

        #[test]
        fn h2_matches_quadrature(seed in 0u64..1_000_000, x1 in 0.6f64..9.0, x2 in 0.6f64..9.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = geometric(0.3, 10.0, 10);
            let f = GridFn::from_fn(g.clone(), g.clone(), |_, _| rng.gen_range(0.0..3.0)).unwrap();
            let pairs = lin();
            let exact = apply_h2(&f, &pairs, x1, x2).unwrap();
            let (a1, b1, a2, b2) = (x1 / 2.0, x1, x2 / 2.0, x2);
            let br1: Vec<f64> = g.iter().copied().filter(|&v| v > a1 && v < b1).collect();
            let br2: Vec<f64> = g.iter().copied().filter(|&v| v > a2 && v < b2).collect();
            let q = integrate_2d_with(|a, b| f.value_at(a, b), [a1, b1, a2, b2], &br1, &br2, Tolerance::mixed(1e-12)).unwrap().value;
            prop_assert!((exact - q).abs() <= 1e-10 * exact.max(1.0));
        }

        #[test]
        fn h2_monotone(seed in 0u64..1_000_000, x1 in 0.6f64..9.0, x2 in 0.6f64..9.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = geometric(0.3, 10.0, 10);
            let f = GridFn::from_fn(g.clone(), g.clone(), |_, _| rng.gen_range(0.0..3.0)).unwrap();
            let h = GridFn::new(g.clone(), g, f.values().iter().map(|v| v + rng.gen_range(0.0..1.0)).collect()).unwrap();
            prop_assert!(apply_h2(&f, &lin(), x1, x2).unwrap() <= apply_h2(&h, &lin(), x1, x2).unwrap());
        }

        #[test]
        fn ratio_homogeneous(seed in 0u64..1_000_000) {
            let cfg = unit_cfg(2.0, 3.0, Window::new(0.5, 8.0).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = geometric(1.0, 4.0, 8);
            let f = GridFn::from_fn(g.clone(), g, |_, _| rng.gen_range(0.0..2.0)).unwrap();
            let r = rayleigh_ratio(&f, &cfg).unwrap();
            for lambda in [1e-3, 1.0, 1e3] {
                let rl = rayleigh_ratio(&f.scaled(lambda).unwrap(), &cfg).unwrap();
                prop_assert!((rl / r - 1.0).abs() < 1e-12);
            }
        }
    }
}
