//! The five verbs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use vlhardy_core::bounds::{optimize_sandwich, pk_lower_s_max, SandwichOptions, SandwichReport, Theorem};
use vlhardy_core::charf::{
    b1, b2, d2, rect_corner, widen_hardy, widen_pk, with_divergence_check, CharacterizationValue, CornerVariant,
    ProblemConfig, ScalePoint,
};
use vlhardy_core::funcspace::Window;
use vlhardy_core::ops::{estimate_norm, GridFn, NormOptions};
use vlhardy_core::oracle::{oracle_b2, oracle_ratio_search, OracleConfig};
use vlhardy_core::partition::{default_sequences, quadrant_decompose};
use vlhardy_core::quad::{TOL_1D, TOL_2D};
use vlhardy_core::witness::{
    default_anchors, pk_witness_bound_check, witness_bound_check, CheckLine, WitnessKind, WitnessSpec, WITNESS_CELLS,
    WITNESS_TOL,
};
use vlhardy_core::Result as CoreResult;

use crate::config::{sweep_values, Instance, Problem, RawConfig};
use crate::error::CliError;
use crate::report::{CharacterizeSection, GridValue, NormSummary, PartitionSummary, RunReport, Timings, Verdict};

/// Relative budget of the containment check `estimate <= upper`.
pub const CONTAINMENT_BUDGET: f64 = 1e-2;
/// Relative budget of the splitting inequality.
pub const DECOMPOSITION_BUDGET: f64 = 1e-3;

/// Test hooks that are not part of the documented interface.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hooks {
    /// Scales the upper bound by 0.01 before the containment check.
    pub corrupt_upper: bool,
}

/// `big * (1 + budget) >= small`, reported relative to `small`.
fn budget_line(name: &str, big: f64, small: f64, budget: f64) -> CheckLine {
    CheckLine::new(name, big, small, budget / (1.0 + budget))
}

type Functional<'a> = Box<dyn Fn(ScalePoint) -> CoreResult<CharacterizationValue> + Sync + 'a>;

fn corner_variant(t: Theorem) -> Option<CornerVariant> {
    match t {
        Theorem::LemmaA => Some(CornerVariant::AW),
        Theorem::Lemma2 => Some(CornerVariant::AWstar),
        Theorem::Lemma3 => Some(CornerVariant::AWtilde),
        Theorem::Lemma4 => Some(CornerVariant::AWtildeStar),
        _ => None,
    }
}

fn hardy_cfg(inst: &Instance) -> Result<&ProblemConfig, CliError> {
    inst.hardy()
        .ok_or_else(|| CliError::Config(format!("theorem {} needs a Hardy-type instance", inst.theorem.tag())))
}

/// The functional behind the theorem of the instance. With `sentinel`, the
/// unbounded-domain functionals run with the window-doubling divergence check.
fn functional(inst: &Instance, sentinel: bool) -> Result<Functional<'_>, CliError> {
    Ok(match (&inst.problem, inst.theorem) {
        (Problem::Pk(c), Theorem::PkThm2) => {
            if sentinel {
                Box::new(move |s| with_divergence_check(c, widen_pk, |c| d2(c, s)))
            } else {
                Box::new(move |s| d2(c, s))
            }
        }
        (Problem::Hardy(c), Theorem::HardyThm1) => {
            if sentinel {
                Box::new(move |s| with_divergence_check(c, widen_hardy, |c| b2(c, s)))
            } else {
                Box::new(move |s| b2(c, s))
            }
        }
        (Problem::Hardy(c), Theorem::Hardy1d) => {
            let c1 = c
                .restrict(0)
                .ok_or_else(|| CliError::Config("hardy_1d needs a separable weight u".into()))?;
            Box::new(move |s| b1(&c1, s.s1))
        }
        (Problem::Hardy(c), t) => {
            let variant = corner_variant(t).expect("remaining theorems are the corner lemmas");
            let rect = inst.rect.expect("validated with the instance");
            Box::new(move |s| rect_corner(variant, rect, c, s))
        }
        (Problem::Pk(_), t) => {
            return Err(CliError::Config(format!(
                "theorem {} needs a Hardy-type instance",
                t.tag()
            )))
        }
    })
}

fn base_report(command: &str, inst: &Instance) -> RunReport {
    let mut r = RunReport::new(command, inst.theorem, inst.seed, inst.raw.echo());
    r.tolerances.insert("quadrature_1d".into(), TOL_1D);
    r.tolerances.insert("quadrature_2d".into(), TOL_2D);
    if let Some(c) = inst.hardy() {
        r.tolerances.insert("functional_search".into(), c.search.search_tol);
        r.tolerances.insert("functional_final".into(), c.search.final_tol);
    }
    r
}

fn sandwich_options(inst: &Instance) -> SandwichOptions {
    SandwichOptions {
        s_grid: inst.s_grid,
        ..SandwichOptions::default()
    }
}

fn run_sandwich(inst: &Instance) -> Result<SandwichReport, CliError> {
    let f = functional(inst, false)?;
    Ok(optimize_sandwich(&*f, inst.p(), inst.theorem, sandwich_options(inst))?)
}

/// The `s` values of the characterization table.
fn s_axis(inst: &Instance) -> Vec<f64> {
    let p = inst.p();
    let (lo, hi) = if inst.theorem == Theorem::PkThm2 {
        let smax = pk_lower_s_max(p);
        (1.0 + (smax - 1.0) / 400.0, smax)
    } else {
        let h = (p - 1.0) / 40.0;
        (1.0 + h, p - h)
    };
    let n = inst.s_grid;
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

pub fn characterize(inst: &Instance) -> Result<(RunReport, Timings), CliError> {
    let mut timings = Timings::default();
    let mut report = base_report("characterize", inst);
    let f = functional(inst, true)?;
    let axis = s_axis(inst);
    let points: Vec<ScalePoint> = if inst.theorem == Theorem::Hardy1d {
        axis.iter().map(|&s| ScalePoint::new(s, s)).collect()
    } else {
        axis.iter()
            .flat_map(|&a| axis.iter().map(move |&b| ScalePoint::new(a, b)))
            .collect()
    };
    let values = timings.time("characterize", || {
        points
            .par_iter()
            .map(|&s| f(s).map(|value| GridValue { s, value }))
            .collect::<CoreResult<Vec<_>>>()
    })?;
    let (name, formula) = match corner_variant(inst.theorem) {
        Some(v) => (v.tag().to_string(), Some(v.formula().to_string())),
        None => (
            match inst.theorem {
                Theorem::PkThm2 => "D2",
                Theorem::Hardy1d => "B1",
                _ => "B2",
            }
            .to_string(),
            None,
        ),
    };
    if values.iter().any(|v| v.value.value.is_infinite()) {
        report
            .notes
            .push("some values diverge under window doubling and are reported as +inf".into());
    }
    report.characterize = Some(CharacterizeSection {
        functional: name,
        formula,
        s_grid: inst.s_grid,
        values,
    });
    Ok((report, timings))
}

pub fn sandwich(inst: &Instance) -> Result<(RunReport, Timings), CliError> {
    let mut timings = Timings::default();
    let mut report = base_report("sandwich", inst);
    let s = timings.time("sandwich", || run_sandwich(inst))?;
    report
        .checks
        .push(CheckLine::new("sandwich_order", s.upper_bound, s.lower_bound, 0.0));
    report.sandwich = Some(s);
    report.conclude();
    Ok((report, timings))
}

fn norm_options(inst: &Instance) -> NormOptions {
    NormOptions {
        resolution: inst.resolution,
        random_starts: inst.random_starts,
        max_iters: inst.max_iters,
        seed: inst.seed,
        ..NormOptions::default()
    }
}

fn mid_s(p: f64) -> f64 {
    if p > 1.0 {
        0.5 * (1.0 + p)
    } else {
        1.5
    }
}

fn centre(w: &[Window; 2]) -> [f64; 2] {
    [0, 1].map(|i| (w[i].lo * w[i].hi).sqrt())
}

fn partition_summaries(cfg: &ProblemConfig, fns: &[(&str, &GridFn)]) -> Result<Vec<PartitionSummary>, CliError> {
    let mut out = Vec::new();
    for (label, f) in fns {
        let Some(seqs) = default_sequences(f, cfg)? else {
            continue;
        };
        let d = quadrant_decompose(f, cfg, &seqs)?;
        let k = [0, 1].map(|i| (seqs[i].k_min, seqs[i].k_max));
        let tr = [0, 1].map(|i| seqs[i].truncated);
        out.push(PartitionSummary::new(label, &d, k, tr));
    }
    Ok(out)
}

pub fn verify(inst: &Instance, hooks: Hooks) -> Result<(RunReport, Timings), CliError> {
    let mut timings = Timings::default();
    let mut report = base_report("verify", inst);
    report.tolerances.insert("containment".into(), CONTAINMENT_BUDGET);
    report.tolerances.insert("witness".into(), WITNESS_TOL);
    report.tolerances.insert("decomposition".into(), DECOMPOSITION_BUDGET);

    let s = timings.time("sandwich", || run_sandwich(inst))?;
    let mut upper = s.upper_bound;
    if hooks.corrupt_upper {
        upper *= 0.01;
        report.notes.push("test hook: upper bound scaled by 0.01".into());
    }
    report
        .checks
        .push(CheckLine::new("sandwich_order", upper, s.lower_bound, 0.0));

    match (&inst.problem, inst.theorem) {
        (Problem::Hardy(cfg), Theorem::HardyThm1) => {
            let est = timings.time("norm_estimate", || estimate_norm(cfg, &norm_options(inst)))?;
            report
                .checks
                .push(budget_line("containment", upper, est.value, CONTAINMENT_BUDGET));
            let sm = mid_s(cfg.exps.p);
            let checks = timings.time("witness", || {
                default_anchors(&cfg.pairs, centre(&cfg.window))
                    .into_par_iter()
                    .map(|anchor| {
                        let spec = WitnessSpec {
                            kind: WitnessKind::Thm1Hardy,
                            s: ScalePoint::new(sm, sm),
                            anchor,
                            rect: None,
                        };
                        witness_bound_check(cfg, &spec, WITNESS_CELLS, WITNESS_TOL)
                    })
                    .collect::<CoreResult<Vec<_>>>()
            })?;
            report.witness_checks = checks;
            let uniform = GridFn::constant(est.best_f.grid1().to_vec(), est.best_f.grid2().to_vec(), 1.0)?;
            let parts = timings.time("partition", || {
                partition_summaries(cfg, &[("norm_estimate_optimum", &est.best_f), ("uniform", &uniform)])
            })?;
            for p in &parts {
                report.checks.push(budget_line(
                    &format!("decomposition[{}]", p.function),
                    p.sum,
                    p.total_lhs,
                    DECOMPOSITION_BUDGET,
                ));
            }
            report.partition = parts;
            report.norm_estimate = Some(NormSummary {
                value: est.value,
                resolution: inst.resolution,
                iterations: est.iterations,
                converged: est.converged,
                starts: est.starts,
                diagnostics: est.diagnostics,
            });
        }
        (Problem::Pk(cfg), _) => {
            let sm = mid_s(cfg.exps.p);
            let checks = timings.time("witness", || {
                default_anchors(&cfg.pairs, centre(&cfg.window))
                    .into_iter()
                    .map(|anchor| {
                        let spec = WitnessSpec {
                            kind: WitnessKind::Thm2Pk,
                            s: ScalePoint::new(sm, sm),
                            anchor,
                            rect: None,
                        };
                        pk_witness_bound_check(cfg, &spec, WITNESS_CELLS, WITNESS_TOL)
                    })
                    .collect::<CoreResult<Vec<_>>>()
            })?;
            report.witness_checks = checks;
            report.notes.push(
                "no norm estimate for the geometric-mean operator; containment is checked between the bounds".into(),
            );
        }
        (Problem::Hardy(cfg), Theorem::Lemma2) => {
            let rect = inst.rect.expect("validated with the instance");
            let t = [0, 1].map(|i| {
                if rect.c[i] > 0.0 {
                    (rect.c[i] * rect.d[i]).sqrt()
                } else {
                    0.5 * rect.d[i]
                }
            });
            let sm = mid_s(cfg.exps.p);
            let spec = WitnessSpec {
                kind: WitnessKind::Lemma2Corner,
                s: ScalePoint::new(sm, sm),
                anchor: vlhardy_core::funcspace::SearchPoint::new(t[0], t[1], t[0], t[1]),
                rect: Some(rect),
            };
            let check = timings.time("witness", || {
                witness_bound_check(cfg, &spec, WITNESS_CELLS, WITNESS_TOL)
            })?;
            report.witness_checks.push(check);
        }
        (Problem::Hardy(_), _) => {
            report
                .notes
                .push("no norm estimate for this operator; containment is checked between the bounds".into());
        }
    }
    report.sandwich = Some(s);
    report.conclude();
    Ok((report, timings))
}

/// One row of the sweep aggregate.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub norm_estimate: Option<f64>,
    pub gap_ratio: f64,
    pub verdict: String,
}

pub const SWEEP_COLUMNS: [&str; 7] = [
    "param",
    "value",
    "lower",
    "upper",
    "norm_estimate",
    "gap_ratio",
    "verdict",
];

pub struct SweepOutput {
    pub samples: Vec<(String, RunReport)>,
    pub rows: Vec<SweepRow>,
    pub timings: Timings,
}

fn sweep_sample(raw: &RawConfig, param: &str, value: f64) -> Result<(RunReport, Timings, SweepRow), CliError> {
    let mut raw = raw.clone();
    raw.set(param, format!("{value}"))?;
    let inst = Instance::from_raw(raw)?;
    let mut timings = Timings::default();
    let mut report = base_report("sweep", &inst);
    report.tolerances.insert("containment".into(), CONTAINMENT_BUDGET);
    let s = timings.time("sandwich", || run_sandwich(&inst))?;
    report
        .checks
        .push(CheckLine::new("sandwich_order", s.upper_bound, s.lower_bound, 0.0));
    let mut estimate = None;
    if let (Problem::Hardy(cfg), Theorem::HardyThm1) = (&inst.problem, inst.theorem) {
        let est = timings.time("norm_estimate", || estimate_norm(cfg, &norm_options(&inst)))?;
        report
            .checks
            .push(budget_line("containment", s.upper_bound, est.value, CONTAINMENT_BUDGET));
        estimate = Some(est.value);
        report.norm_estimate = Some(NormSummary {
            value: est.value,
            resolution: inst.resolution,
            iterations: est.iterations,
            converged: est.converged,
            starts: est.starts,
            diagnostics: est.diagnostics,
        });
    }
    let row = SweepRow {
        param: param.to_string(),
        value,
        lower: s.lower_bound,
        upper: s.upper_bound,
        norm_estimate: estimate,
        gap_ratio: s.upper_bound / s.lower_bound,
        verdict: String::new(),
    };
    report.sandwich = Some(s);
    report.conclude();
    let verdict = report.verdict.unwrap_or(Verdict::Fail).as_str().to_string();
    Ok((report, timings, SweepRow { verdict, ..row }))
}

pub fn sweep(raw: &RawConfig) -> Result<SweepOutput, CliError> {
    let (param, values) = sweep_values(raw)?;
    let results: Vec<(RunReport, Timings, SweepRow)> = values
        .par_iter()
        .map(|&v| sweep_sample(raw, &param, v))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut timings = Timings::default();
    let mut samples = Vec::new();
    let mut rows = Vec::new();
    for (k, (report, t, row)) in results.into_iter().enumerate() {
        timings.extend(&format!("sample_{k:03}/"), t);
        samples.push((format!("sample_{k:03}.json"), report));
        rows.push(row);
    }
    Ok(SweepOutput { samples, rows, timings })
}

fn csv_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "+inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

/// The aggregate CSV; the header is written even without rows.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.param.clone(),
            csv_float(r.value),
            csv_float(r.lower),
            csv_float(r.upper),
            r.norm_estimate.map(csv_float).unwrap_or_default(),
            csv_float(r.gap_ratio),
            r.verdict.clone(),
        ])
        .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reference values from the brute-force implementations.
#[derive(Debug, Clone, Serialize)]
pub struct GoldenEntry {
    pub s: ScalePoint,
    pub oracle: f64,
    pub production: f64,
    pub relative_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GoldenFile {
    pub schema_version: u32,
    pub config: BTreeMap<String, String>,
    pub oracle: OracleConfig,
    pub b2: Vec<GoldenEntry>,
    pub ratio_search_resolution: usize,
    pub ratio_search: f64,
}

pub fn oracle_regen(inst: &Instance) -> Result<(GoldenFile, Timings), CliError> {
    let cfg = hardy_cfg(inst)?;
    let oc = OracleConfig {
        seed: inst.seed,
        ..OracleConfig::default()
    };
    let reduced = cfg.with_window([oc.window, oc.window])?;
    let p = cfg.exps.p;
    let h = (p - 1.0) / 4.0;
    let axis = [1.0 + h, 1.0 + 2.0 * h, 1.0 + 3.0 * h];
    let mut timings = Timings::default();
    let mut b2_entries = Vec::new();
    timings.time("oracle_b2", || -> Result<(), CliError> {
        for &a in &axis {
            for &b in &axis {
                let s = ScalePoint::new(a, b);
                let oracle = oracle_b2(&reduced, s, &oc);
                let production = b2(&reduced, s)?.value;
                let relative_difference = if production != 0.0 {
                    (oracle - production).abs() / production
                } else {
                    0.0
                };
                b2_entries.push(GoldenEntry {
                    s,
                    oracle,
                    production,
                    relative_difference,
                });
            }
        }
        Ok(())
    })?;
    let res = inst.resolution.min(32);
    let ratio = timings.time("oracle_ratio", || oracle_ratio_search(cfg, res, &oc));
    let golden = GoldenFile {
        schema_version: crate::report::SCHEMA_VERSION,
        config: inst.raw.echo(),
        oracle: oc,
        b2: b2_entries,
        ratio_search_resolution: res,
        ratio_search: ratio,
    };
    Ok((golden, timings))
}
