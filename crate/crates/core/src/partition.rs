//! The sequence `m^{k+1} = a^{-1}(b(m^k))` that tiles the half line into
//! intervals `[a(m^k), b(m^k)]`, the weights transported along the boundary
//! maps, and the four-piece splitting of `||H2 g||_{q,u}` built on them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charf::ProblemConfig;
use crate::error::{domain, invalid, Error, Result};
use crate::funcspace::{BoundaryPair, Monotone, Weight2D, Window, INVERSE_TOL};
use crate::ops::{box_integrals, node_weights, AxisQuadrature, GridFn, RatioPlan};

/// Step cap when extending a sequence until it covers a range.
pub const MAX_SEQUENCE_STEPS: usize = 4096;

/// `m^k` for `k` in `[k_min, k_max]` together with `a^k = a(m^k)` and
/// `b^k = b(m^k)`. Consecutive intervals abut: `b^k = a^{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSequence {
    pub axis: usize,
    pub m0: f64,
    pub k_min: i64,
    pub k_max: i64,
    pub m: Vec<f64>,
    pub a_k: Vec<f64>,
    pub b_k: Vec<f64>,
    /// The requested range was cut short because the recursion left the
    /// limit window or stopped increasing.
    pub truncated: bool,
}

impl LimitSequence {
    fn index(&self, k: i64) -> Option<usize> {
        (self.k_min..=self.k_max)
            .contains(&k)
            .then(|| (k - self.k_min) as usize)
    }

    pub fn m_at(&self, k: i64) -> Option<f64> {
        self.index(k).map(|i| self.m[i])
    }

    pub fn a_at(&self, k: i64) -> Option<f64> {
        self.index(k).map(|i| self.a_k[i])
    }

    pub fn b_at(&self, k: i64) -> Option<f64> {
        self.index(k).map(|i| self.b_k[i])
    }

    /// `max_k |a(m^{k+1}) - b(m^k)| / max(1, b(m^k))`.
    pub fn abutment_residual(&self) -> f64 {
        self.a_k[1..]
            .iter()
            .zip(&self.b_k)
            .map(|(a, b)| (a - b).abs() / b.max(1.0))
            .fold(0.0, f64::max)
    }

    /// Whether the tiles with `x` in `[m^{k_min}, m^{k_max}]` reach every box
    /// that meets `[lo, hi]`.
    pub fn covers(&self, pair: &BoundaryPair, lo: f64, hi: f64) -> Result<bool> {
        let need_lo = if lo > 0.0 {
            pair.b.inverse(lo, INVERSE_TOL)?
        } else {
            0.0
        };
        let need_hi = pair.a.inverse(hi, INVERSE_TOL)?;
        Ok(self.m[0] <= need_lo && self.m[self.m.len() - 1] >= need_hi)
    }
}

fn forward(pair: &BoundaryPair, m: f64) -> Result<f64> {
    pair.a.inverse(pair.b.eval(m)?, INVERSE_TOL)
}

fn backward(pair: &BoundaryPair, m: f64) -> Result<f64> {
    pair.b.inverse(pair.a.eval(m)?, INVERSE_TOL)
}

fn assemble(
    axis: usize,
    pair: &BoundaryPair,
    m0: f64,
    back: Vec<f64>,
    fwd: Vec<f64>,
    truncated: bool,
) -> Result<LimitSequence> {
    let k_min = -(back.len() as i64);
    let k_max = fwd.len() as i64;
    let m: Vec<f64> = back.into_iter().rev().chain(std::iter::once(m0)).chain(fwd).collect();
    let a_k = m.iter().map(|&x| pair.a.eval(x)).collect::<Result<Vec<_>>>()?;
    let b_k = m.iter().map(|&x| pair.b.eval(x)).collect::<Result<Vec<_>>>()?;
    Ok(LimitSequence {
        axis,
        m0,
        k_min,
        k_max,
        m,
        a_k,
        b_k,
        truncated,
    })
}

/// Forward recursion for `k >= 0`, backward for `k <= 0`, over
/// `[k_min, k_max]`. Steps that leave `limit` or fail to increase truncate
/// the range and set the flag.
pub fn build_sequence(
    pair: &BoundaryPair,
    axis: usize,
    m0: f64,
    k_min: i64,
    k_max: i64,
    limit: Window,
) -> Result<LimitSequence> {
    if !(k_min <= 0 && k_max >= 0) {
        return invalid(format!("k range [{k_min}, {k_max}] must contain 0"));
    }
    if !limit.contains(m0) {
        return Err(Error::Range {
            value: m0,
            lo: limit.lo,
            hi: limit.hi,
        });
    }
    let mut truncated = false;
    let mut fwd = Vec::new();
    let mut m = m0;
    for _ in 0..k_max {
        match forward(pair, m) {
            Ok(n) if n > m && limit.contains(n) => {
                fwd.push(n);
                m = n;
            }
            _ => {
                truncated = true;
                break;
            }
        }
    }
    let mut back = Vec::new();
    m = m0;
    for _ in 0..(-k_min) {
        match backward(pair, m) {
            Ok(n) if n < m && limit.contains(n) => {
                back.push(n);
                m = n;
            }
            _ => {
                truncated = true;
                break;
            }
        }
    }
    assemble(axis, pair, m0, back, fwd, truncated)
}

/// The smallest `k` range around `m0` whose tiles reach every box meeting
/// `[lo, hi]`.
pub fn covering_sequence(pair: &BoundaryPair, axis: usize, m0: f64, lo: f64, hi: f64) -> Result<LimitSequence> {
    if !(lo > 0.0 && hi > lo) {
        return domain(format!("cannot cover [{lo}, {hi}] with a sequence on (0, inf)"));
    }
    let need_lo = pair.b.inverse(lo, INVERSE_TOL)?;
    let need_hi = pair.a.inverse(hi, INVERSE_TOL)?;
    let mut fwd = Vec::new();
    let mut m = m0;
    while m < need_hi {
        let n = forward(pair, m)?;
        if !(n > m) || fwd.len() >= MAX_SEQUENCE_STEPS {
            return Err(Error::Coverage(format!(
                "axis {}: forward sequence stalls at {m} before reaching {need_hi}",
                axis + 1
            )));
        }
        fwd.push(n);
        m = n;
    }
    let mut back = Vec::new();
    m = m0;
    while m > need_lo {
        let n = backward(pair, m)?;
        if !(n < m) || back.len() >= MAX_SEQUENCE_STEPS {
            return Err(Error::Coverage(format!(
                "axis {}: backward sequence stalls at {m} before reaching {need_lo}",
                axis + 1
            )));
        }
        back.push(n);
        m = n;
    }
    assemble(axis, pair, m0, back, fwd, false)
}

/// Which boundary map each axis is transported along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrant {
    Aa,
    Ab,
    Ba,
    Bb,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Aa, Quadrant::Ab, Quadrant::Ba, Quadrant::Bb];

    /// `true` where the axis uses `b`.
    pub fn sides(self) -> [bool; 2] {
        match self {
            Quadrant::Aa => [false, false],
            Quadrant::Ab => [false, true],
            Quadrant::Ba => [true, false],
            Quadrant::Bb => [true, true],
        }
    }
}

fn side_map(pair: &BoundaryPair, b: bool) -> &Monotone {
    if b {
        &pair.b
    } else {
        &pair.a
    }
}

/// `u` composed with the inverse boundary maps, times their derivatives.
#[derive(Debug, Clone)]
pub struct TransformedWeights {
    pub u: Weight2D,
    pub pairs: [BoundaryPair; 2],
}

impl TransformedWeights {
    pub fn new(u: Weight2D, pairs: [BoundaryPair; 2]) -> Self {
        TransformedWeights { u, pairs }
    }

    pub fn value(&self, which: Quadrant, y1: f64, y2: f64) -> Result<f64> {
        transformed_weight(&self.u, &self.pairs, which, y1, y2)
    }
}

/// `(x, (m^{-1})'(y))` with `x = m^{-1}(y)`.
fn pullback(m: &Monotone, y: f64) -> Result<(f64, f64)> {
    Ok((m.inverse(y, INVERSE_TOL)?, m.inverse_derivative(y)?))
}

pub fn transformed_weight(u: &Weight2D, pairs: &[BoundaryPair; 2], which: Quadrant, y1: f64, y2: f64) -> Result<f64> {
    let [s1, s2] = which.sides();
    let (x1, d1) = pullback(side_map(&pairs[0], s1), y1)?;
    let (x2, d2) = pullback(side_map(&pairs[1], s2), y2)?;
    let w = u.value(x1, x2) * d1 * d2;
    if !(w >= 0.0) {
        return domain(format!("transformed weight is undefined at ({y1}, {y2})"));
    }
    Ok(w)
}

/// One `(k1, k2)` summand of a piece, before the outer `1/q` power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrantTerm {
    pub quadrant: Quadrant,
    pub k1: i64,
    pub k2: i64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// The four pieces in the order aa, ab, ba, bb.
    pub ii: [f64; 4],
    /// `||H2 g||_{q,u}` with `g = f v1^{1-p'} v2^{1-p'}`.
    pub total_lhs: f64,
    /// `sum ii - total_lhs`.
    pub margin: f64,
    pub terms: Vec<QuadrantTerm>,
}

impl Decomposition {
    pub fn sum(&self) -> f64 {
        self.ii.iter().sum()
    }

    fn zero() -> Self {
        Decomposition {
            ii: [0.0; 4],
            total_lhs: 0.0,
            margin: 0.0,
            terms: Vec::new(),
        }
    }
}

/// Outer nodes of one axis for one side, and the tile index `j` of each.
/// Side `a` integrates `[y, b^j]` for `y` in tile `j`; side `b` integrates
/// `[a^j, y]`. Tiles are clipped to where the inner range meets `[lo, hi]`.
fn side_quadrature(
    seq: &LimitSequence,
    grid: &[f64],
    b_side: bool,
    lo: f64,
    hi: f64,
) -> Result<(AxisQuadrature, Vec<i64>)> {
    let js = if b_side {
        seq.k_min + 1..=seq.k_max
    } else {
        seq.k_min..=seq.k_max - 1
    };
    let mut parts = Vec::new();
    let mut tags = Vec::new();
    for j in js {
        let (aj, bj) = (seq.a_at(j).unwrap(), seq.b_at(j).unwrap());
        let (ylo, yhi) = if b_side {
            if aj >= hi {
                continue;
            }
            (aj.max(lo), bj)
        } else {
            if bj <= lo {
                continue;
            }
            (aj, bj.min(hi))
        };
        if !(yhi > ylo) {
            continue;
        }
        let mut brk = vec![ylo, yhi];
        brk.extend(grid.iter().copied().filter(|&g| g > ylo && g < yhi));
        let quad = if b_side {
            AxisQuadrature::new(grid, brk, |y| Ok((aj, y)))?
        } else {
            AxisQuadrature::new(grid, brk, |y| Ok((y, bj)))?
        };
        tags.extend(std::iter::repeat_n(j, quad.len()));
        parts.push(quad);
    }
    Ok((AxisQuadrature::concat(parts), tags))
}

/// Cell means of `v^{1-p'}`, i.e. `(V(d) - V(c)) / (d - c)`.
fn cell_means(cfg: &ProblemConfig, axis: usize, grid: &[f64]) -> Result<Vec<f64>> {
    let v = cfg.v_fn(axis);
    grid.windows(2)
        .map(|c| Ok(v.diff(c[0], c[1])? / (c[1] - c[0])))
        .collect()
}

/// Sequences centred on the support of `f` that cover it.
pub fn default_sequences(f: &GridFn, cfg: &ProblemConfig) -> Result<Option<[LimitSequence; 2]>> {
    let Some(s) = f.support() else {
        return Ok(None);
    };
    let seq = |i: usize| {
        let (lo, hi) = (s[2 * i], s[2 * i + 1]);
        covering_sequence(&cfg.pairs[i], i, (lo.max(1e-300) * hi).sqrt(), lo, hi)
    };
    Ok(Some([seq(0)?, seq(1)?]))
}

/// Splits `||H2 g||_{q,u}` over the tiles of the two sequences into the
/// four transported pieces and evaluates each, together with the
/// undecomposed norm.
pub fn quadrant_decompose(f: &GridFn, cfg: &ProblemConfig, seqs: &[LimitSequence; 2]) -> Result<Decomposition> {
    let Some(support) = f.support() else {
        return Ok(Decomposition::zero());
    };
    if cfg.u.is_zero() {
        return Ok(Decomposition::zero());
    }
    let mut gaps = Vec::new();
    for i in 0..2 {
        let (lo, hi) = (support[2 * i], support[2 * i + 1]);
        if !(lo > 0.0) || !seqs[i].covers(&cfg.pairs[i], lo, hi)? {
            gaps.push(format!(
                "axis {}: cells in [{lo}, {hi}] not covered by tiles over x in [{}, {}]",
                i + 1,
                seqs[i].m[0],
                seqs[i].m[seqs[i].m.len() - 1]
            ));
        }
    }
    if !gaps.is_empty() {
        return Err(Error::Coverage(gaps.join("; ")));
    }
    let (grid1, grid2) = (f.grid1(), f.grid2());
    let (c1, c2) = (cell_means(cfg, 0, grid1)?, cell_means(cfg, 1, grid2)?);
    let n2 = c2.len();
    let g: Vec<f64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v * c1[i / n2] * c2[i % n2])
        .collect();
    let g_fn = GridFn::new(grid1.to_vec(), grid2.to_vec(), g.clone())?;
    let total_lhs = RatioPlan::new(cfg, grid1, grid2)?.lhs(&g_fn);

    let q = cfg.exps.q;
    let mut ii = [0.0; 4];
    let mut terms = Vec::new();
    for (slot, quadrant) in Quadrant::ALL.into_iter().enumerate() {
        let sides = quadrant.sides();
        let (ax1, j1) = side_quadrature(&seqs[0], grid1, sides[0], support[0], support[1])?;
        let (ax2, j2) = side_quadrature(&seqs[1], grid2, sides[1], support[2], support[3])?;
        if ax1.len() == 0 || ax2.len() == 0 {
            continue;
        }
        let pb1 = ax1
            .xs
            .iter()
            .map(|&y| pullback(side_map(&cfg.pairs[0], sides[0]), y))
            .collect::<Result<Vec<_>>>()?;
        let pb2 = ax2
            .xs
            .iter()
            .map(|&y| pullback(side_map(&cfg.pairs[1], sides[1]), y))
            .collect::<Result<Vec<_>>>()?;
        let w = node_weights([&ax1, &ax2], |j, k| {
            cfg.u.value(pb1[j].0, pb2[k].0) * pb1[j].1 * pb2[k].1
        })?;
        let h = box_integrals([&ax1, &ax2], [c1.len(), n2], &g);
        let m2 = ax2.len();
        // Row partials in parallel, merged in a fixed order.
        let rows: Vec<Vec<((i64, i64), f64)>> = h
            .par_chunks(m2)
            .zip(w.par_chunks(m2))
            .enumerate()
            .map(|(j, (hrow, wrow))| {
                let mut acc: Vec<((i64, i64), f64)> = Vec::new();
                for k in 0..m2 {
                    let t = wrow[k] * hrow[k].powf(q);
                    if t > 0.0 {
                        match acc.last_mut() {
                            Some((key, v)) if *key == (j1[j], j2[k]) => *v += t,
                            _ => acc.push(((j1[j], j2[k]), t)),
                        }
                    }
                }
                acc
            })
            .collect();
        let mut cells: BTreeMap<(i64, i64), f64> = BTreeMap::new();
        for (key, v) in rows.into_iter().flatten() {
            *cells.entry(key).or_insert(0.0) += v;
        }
        ii[slot] = cells.values().sum::<f64>().powf(1.0 / q);
        // Pieces on `b` carry the tile index `k + 1`.
        terms.extend(cells.into_iter().map(|((a, b), value)| QuadrantTerm {
            quadrant,
            k1: a - sides[0] as i64,
            k2: b - sides[1] as i64,
            value,
        }));
    }
    let sum: f64 = ii.iter().sum();
    Ok(Decomposition {
        ii,
        total_lhs,
        margin: sum - total_lhs,
        terms,
    })
}
