//! Constant factors of the two-sided estimates and the optimization over
//! `(s1, s2)` that turns a characterization functional into lower and upper
//! bounds on the best constant.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charf::{CharacterizationValue, ScalePoint};
use crate::error::{domain, Error, Result};

/// Which two-sided estimate a report certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "hardy_thm1")]
    HardyThm1,
    #[serde(rename = "pk_thm2")]
    PkThm2,
    #[serde(rename = "lemmaA")]
    LemmaA,
    #[serde(rename = "lemma2")]
    Lemma2,
    #[serde(rename = "lemma3")]
    Lemma3,
    #[serde(rename = "lemma4")]
    Lemma4,
    #[serde(rename = "hardy_1d")]
    Hardy1d,
}

impl Theorem {
    pub fn multiplier(&self) -> f64 {
        match self {
            Theorem::HardyThm1 | Theorem::PkThm2 => 4.0,
            Theorem::Hardy1d => 2.0,
            _ => 1.0,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Theorem::HardyThm1 => "hardy_thm1",
            Theorem::PkThm2 => "pk_thm2",
            Theorem::LemmaA => "lemmaA",
            Theorem::Lemma2 => "lemma2",
            Theorem::Lemma3 => "lemma3",
            Theorem::Lemma4 => "lemma4",
            Theorem::Hardy1d => "hardy_1d",
        }
    }

    pub fn parse(tag: &str) -> Option<Self> {
        [
            Theorem::HardyThm1,
            Theorem::PkThm2,
            Theorem::LemmaA,
            Theorem::Lemma2,
            Theorem::Lemma3,
            Theorem::Lemma4,
            Theorem::Hardy1d,
        ]
        .into_iter()
        .find(|t| t.tag().eq_ignore_ascii_case(tag))
    }

    fn dims(&self) -> usize {
        if *self == Theorem::Hardy1d {
            1
        } else {
            2
        }
    }
}

fn check_hardy_s(p: f64, s: f64) -> Result<()> {
    if !(p > 1.0 && s > 1.0 && s <= p) {
        return domain(format!("scale parameter s = {s} outside (1, {p})"));
    }
    Ok(())
}

/// `((p/(p-s))^p / ((p/(p-s))^p + 1/(s-1)))^{1/p}` for one axis.
pub fn lower_factor_1d(p: f64, s: f64) -> Result<f64> {
    check_hardy_s(p, s)?;
    if s == p {
        return domain(format!("scale parameter s = {s} outside (1, {p})"));
    }
    let r = (p / (p - s)).powf(p);
    Ok((r / (r + 1.0 / (s - 1.0))).powf(1.0 / p))
}

/// `((p - 1)/(p - s))^{1/p'}` for one axis; `+inf` at `s = p`.
pub fn upper_factor_1d(p: f64, s: f64) -> Result<f64> {
    check_hardy_s(p, s)?;
    if s == p {
        return Ok(f64::INFINITY);
    }
    let pprime = p / (p - 1.0);
    Ok(((p - 1.0) / (p - s)).powf(1.0 / pprime))
}

/// `(e^s (s-1) / (e^s (s-1) + 1))^{1/p}` for one axis.
pub fn pk_lower_factor_1d(p: f64, s: f64) -> Result<f64> {
    if !(p > 0.0) {
        return domain(format!("p must be positive, got {p}"));
    }
    if !(s > 1.0) {
        return domain(format!("scale parameter s = {s} must exceed 1"));
    }
    if s.is_infinite() {
        return Ok(1.0);
    }
    // e^s (s-1) / (e^s (s-1) + 1) = 1 / (1 + e^{-s}/(s-1))
    Ok((1.0 / (1.0 + (-s).exp() / (s - 1.0))).powf(1.0 / p))
}

pub fn lower_factor(p: f64, s: ScalePoint) -> Result<f64> {
    Ok(lower_factor_1d(p, s.s1)? * lower_factor_1d(p, s.s2)?)
}

pub fn upper_factor(p: f64, s: ScalePoint) -> Result<f64> {
    Ok(upper_factor_1d(p, s.s1)? * upper_factor_1d(p, s.s2)?)
}

pub fn pk_lower_factor(p: f64, s: ScalePoint) -> Result<f64> {
    Ok(pk_lower_factor_1d(p, s.s1)? * pk_lower_factor_1d(p, s.s2)?)
}

/// One evaluated point of the functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub s: ScalePoint,
    pub value: CharacterizationValue,
}

/// Two-sided bounds `lower <= C <= upper` obtained from a functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub theorem: Theorem,
    pub multiplier: f64,
    #[serde(with = "crate::nonfinite")]
    pub lower_bound: f64,
    #[serde(with = "crate::nonfinite")]
    pub upper_bound: f64,
    pub s_at_lower: ScalePoint,
    pub s_at_upper: ScalePoint,
    /// Lower bound with `s_i` restricted to `(1, p)`; reported for the
    /// geometric-mean estimate whose lower bound ranges over `s_i > 1`.
    pub lower_bound_restricted: Option<f64>,
    pub lower_s_range: (f64, f64),
    pub upper_s_range: (f64, f64),
    pub s_grid: usize,
    pub unbounded: bool,
    pub functional_values: Vec<FunctionalSample>,
    pub diagnostics: Vec<String>,
}

/// Grid and polish settings of [`optimize_sandwich`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichOptions {
    pub s_grid: usize,
    pub polish_iters: usize,
    pub polish_sweeps: usize,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        SandwichOptions {
            s_grid: 9,
            polish_iters: 12,
            polish_sweeps: 2,
        }
    }
}

/// Upper end of the `s` range used for the geometric-mean lower bound.
pub fn pk_lower_s_max(p: f64) -> f64 {
    if p > 1.0 {
        1.0 + 10.0 * (p - 1.0)
    } else {
        11.0
    }
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

type Cache = BTreeMap<(u64, u64), CharacterizationValue>;

struct Evaluator<'f> {
    functional: &'f (dyn Fn(ScalePoint) -> Result<CharacterizationValue> + Sync),
    dims: usize,
    cache: Cache,
    failures: Vec<String>,
}

impl Evaluator<'_> {
    fn key(&self, s: ScalePoint) -> (u64, u64) {
        let s2 = if self.dims == 1 { s.s1 } else { s.s2 };
        (s.s1.to_bits(), s2.to_bits())
    }

    fn point(&self, s: ScalePoint) -> ScalePoint {
        if self.dims == 1 {
            ScalePoint::new(s.s1, s.s1)
        } else {
            s
        }
    }

    fn batch(&mut self, pts: &[ScalePoint]) {
        let todo: Vec<ScalePoint> = pts
            .iter()
            .map(|&s| self.point(s))
            .filter(|s| !self.cache.contains_key(&self.key(*s)))
            .collect();
        let f = self.functional;
        let results: Vec<(ScalePoint, Result<CharacterizationValue>)> = todo.par_iter().map(|&s| (s, f(s))).collect();
        for (s, r) in results {
            match r {
                Ok(cv) => {
                    self.cache.insert(self.key(s), cv);
                }
                Err(e) => self.failures.push(format!("s = ({}, {}): {e}", s.s1, s.s2)),
            }
        }
    }

    fn get(&mut self, s: ScalePoint) -> Option<f64> {
        let s = self.point(s);
        if !self.cache.contains_key(&self.key(s)) {
            self.batch(&[s]);
        }
        self.cache.get(&self.key(s)).map(|cv| cv.value)
    }
}

fn factor_product(dims: usize, s: ScalePoint, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if dims == 1 {
        f(s.s1)
    } else {
        Ok(f(s.s1)? * f(s.s2)?)
    }
}

/// Golden-section polish of `objective` (maximized) around `start` in a box.
fn polish(
    ev: &mut Evaluator<'_>,
    objective: &dyn Fn(&mut Evaluator<'_>, ScalePoint) -> f64,
    start: ScalePoint,
    start_val: f64,
    range: (f64, f64),
    step: f64,
    opts: SandwichOptions,
) -> (ScalePoint, f64) {
    let dims = ev.dims;
    let bounds = vec![range; dims];
    let spacing = vec![step; dims];
    let init = if dims == 1 {
        vec![start.s1]
    } else {
        vec![start.s1, start.s2]
    };
    let mut f = |c: &[f64]| {
        let s = if dims == 1 {
            ScalePoint::new(c[0], c[0])
        } else {
            ScalePoint::new(c[0], c[1])
        };
        objective(ev, s)
    };
    let (x, v, _) = crate::charf::coordinate_golden(
        &mut f,
        init,
        start_val,
        &bounds,
        &spacing,
        opts.polish_iters,
        opts.polish_sweeps,
    );
    let s = if dims == 1 {
        ScalePoint::new(x[0], x[0])
    } else {
        ScalePoint::new(x[0], x[1])
    };
    (s, v)
}

/// Optimizes the lower product `functional(s) * lower factor` and the upper
/// product `multiplier * functional(s) * upper factor` over a uniform grid
/// in each `s_i`, then polishes both optima by golden-section search.
pub fn optimize_sandwich(
    functional: &(dyn Fn(ScalePoint) -> Result<CharacterizationValue> + Sync),
    p: f64,
    theorem: Theorem,
    opts: SandwichOptions,
) -> Result<SandwichReport> {
    let dims = theorem.dims();
    let n = opts.s_grid.max(1);
    let mut ev = Evaluator {
        functional,
        dims,
        cache: BTreeMap::new(),
        failures: Vec::new(),
    };
    let mut diagnostics = Vec::new();

    let pk = theorem == Theorem::PkThm2;
    let upper_range = if p > 1.0 {
        let h = (p - 1.0) / 40.0;
        Some((1.0 + h, p - h))
    } else {
        diagnostics.push(format!(
            "p = {p} <= 1: the upper estimate needs s in (1, p), which is empty"
        ));
        None
    };
    let lower_range = if pk {
        let smax = pk_lower_s_max(p);
        let h = (smax - 1.0) / 400.0;
        (1.0 + h, smax)
    } else {
        upper_range.ok_or_else(|| Error::Invalid(format!("p must exceed 1, got {p}")))?
    };

    let grid = |r: (f64, f64)| -> Vec<ScalePoint> {
        let g = uniform(r.0, r.1, n);
        if dims == 1 {
            g.iter().map(|&s| ScalePoint::new(s, s)).collect()
        } else {
            g.iter()
                .flat_map(|&a| g.iter().map(move |&b| ScalePoint::new(a, b)))
                .collect()
        }
    };

    let lower_obj = move |ev: &mut Evaluator<'_>, s: ScalePoint| -> f64 {
        let Some(v) = ev.get(s) else { return f64::NEG_INFINITY };
        let fac = if pk {
            factor_product(dims, s, |x| pk_lower_factor_1d(p, x))
        } else {
            factor_product(dims, s, |x| lower_factor_1d(p, x))
        };
        match fac {
            Ok(f) if v == 0.0 => 0.0 * f,
            Ok(f) => v * f,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let upper_obj = move |ev: &mut Evaluator<'_>, s: ScalePoint| -> f64 {
        let Some(v) = ev.get(s) else { return f64::NEG_INFINITY };
        match factor_product(dims, s, |x| upper_factor_1d(p, x)) {
            Ok(_) if v == 0.0 => 0.0,
            Ok(f) => -(v * f),
            Err(_) => f64::NEG_INFINITY,
        }
    };

    // Lower side.
    let lgrid = grid(lower_range);
    ev.batch(&lgrid);
    let mut best_l: Option<(ScalePoint, f64)> = None;
    for &s in &lgrid {
        let v = lower_obj(&mut ev, s);
        if v > f64::NEG_INFINITY && best_l.is_none_or(|b| v > b.1) {
            best_l = Some((s, v));
        }
    }
    let Some((mut s_lo, mut lower)) = best_l else {
        return Err(Error::Accuracy {
            estimate: f64::NAN,
            error: f64::INFINITY,
            evaluations: ev.failures.len(),
        });
    };
    if lower.is_finite() && lower > 0.0 {
        let step = (lower_range.1 - lower_range.0) / (n.max(2) - 1) as f64;
        let (s, v) = polish(&mut ev, &lower_obj, s_lo, lower, lower_range, step, opts);
        if v > lower {
            s_lo = s;
            lower = v;
        }
    }

    // Restricted lower bound for the geometric-mean estimate.
    let mut lower_restricted = None;
    if pk {
        if let Some(r) = upper_range {
            let g = grid(r);
            ev.batch(&g);
            let best = g
                .iter()
                .map(|&s| lower_obj(&mut ev, s))
                .fold(f64::NEG_INFINITY, f64::max);
            if best > f64::NEG_INFINITY {
                lower_restricted = Some(best);
            }
        }
    }

    // Upper side.
    let mut s_up = s_lo;
    let mut upper = f64::INFINITY;
    if let Some(r) = upper_range {
        let ugrid = grid(r);
        ev.batch(&ugrid);
        let mut best_u: Option<(ScalePoint, f64)> = None;
        for &s in &ugrid {
            let v = upper_obj(&mut ev, s);
            if v > f64::NEG_INFINITY && best_u.is_none_or(|b| v > b.1) {
                best_u = Some((s, v));
            }
        }
        if let Some((s, v)) = best_u {
            s_up = s;
            let mut val = v;
            if val.is_finite() && val < 0.0 {
                let step = (r.1 - r.0) / (n.max(2) - 1) as f64;
                let (s2, v2) = polish(&mut ev, &upper_obj, s, val, r, step, opts);
                if v2 > val {
                    s_up = s2;
                    val = v2;
                }
            }
            upper = theorem.multiplier() * (-val).max(0.0);
            if val == f64::NEG_INFINITY {
                upper = f64::INFINITY;
            }
        }
    }

    let unbounded = ev.cache.values().any(|cv| cv.value.is_infinite());
    if unbounded {
        diagnostics.push("functional is infinite at some s; the operator is unbounded on this instance".into());
    }
    if lower > upper {
        diagnostics.push(format!("inconsistent sandwich: lower {lower} exceeds upper {upper}"));
    }
    diagnostics.extend(
        ev.failures
            .iter()
            .map(|f| format!("functional evaluation failed at {f}")),
    );
    let functional_values = ev
        .cache
        .iter()
        .map(|(k, cv)| FunctionalSample {
            s: ScalePoint::new(f64::from_bits(k.0), f64::from_bits(k.1)),
            value: cv.clone(),
        })
        .collect();
    Ok(SandwichReport {
        theorem,
        multiplier: theorem.multiplier(),
        lower_bound: lower,
        upper_bound: upper,
        s_at_lower: s_lo,
        s_at_upper: s_up,
        lower_bound_restricted: lower_restricted,
        lower_s_range: lower_range,
        upper_s_range: upper_range.unwrap_or((f64::NAN, f64::NAN)),
        s_grid: n,
        unbounded,
        functional_values,
        diagnostics,
    })
}
