//! Plain-text `key = value` configuration with dotted keys and optional
//! `[section]` headers that prefix the keys below them.

use std::collections::BTreeMap;
use std::path::Path;

use vlhardy_core::bounds::Theorem;
use vlhardy_core::charf::{Exponents, PkConfig, ProblemConfig, ProblemConfig1D, Rect};
use vlhardy_core::funcspace::{BoundaryPair, Monotone, Weight1D, Weight2D, Window};
use vlhardy_core::Error as CoreError;

use crate::error::CliError;

/// Every key the parser understands.
pub const KNOWN_KEYS: &[&str] = &[
    "theorem",
    "exponents.p",
    "exponents.q",
    "weights.u.kind",
    "weights.u.beta",
    "weights.u.gamma",
    "weights.u.scale",
    "weights.v1.kind",
    "weights.v1.alpha",
    "weights.v2.kind",
    "weights.v2.alpha",
    "boundaries.axis1.a",
    "boundaries.axis1.b",
    "boundaries.axis2.a",
    "boundaries.axis2.b",
    "window.eps",
    "window.X",
    "rect.c1",
    "rect.d1",
    "rect.c2",
    "rect.d2",
    "search.s_grid",
    "search.resolution",
    "search.random_starts",
    "search.max_iters",
    "seed",
    "sweep.param",
    "sweep.values",
    "sweep.from",
    "sweep.to",
    "sweep.samples",
];

/// Key/value pairs with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = strip_comment(raw).trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(CliError::parse(line, "unterminated section header"));
                };
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(CliError::parse(line, format!("expected `key = value`, got `{body}`")));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::parse(line, "empty key"));
            }
            let key = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::parse(line, format!("unknown key `{key}`")));
            }
            let value = unquote(value.trim());
            if entries.insert(key.clone(), (value, line)).is_some() {
                return Err(CliError::parse(line, format!("duplicate key `{key}`")));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn parse_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Sets or replaces a key; used for command-line overrides and sweeps.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Usage(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), (value.into(), 0));
        Ok(())
    }

    /// Sorted key/value echo for reports.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect()
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> CliError {
        match self.entries.get(key) {
            Some((_, line)) if *line > 0 => CliError::parse(*line, format!("{key}: {}", msg.into())),
            _ => CliError::Config(format!("{key}: {}", msg.into())),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| self.err(key, format!("expected a number, got `{v}`"))),
        }
    }

    fn f64_req(&self, key: &str) -> Result<f64, CliError> {
        match self.get(key) {
            None => Err(CliError::Config(format!("missing required key `{key}`"))),
            Some(_) => self.f64_or(key, 0.0),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| self.err(key, format!("expected a nonnegative integer, got `{v}`"))),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> String {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
        .to_string()
}

/// The instance the commands run on.
#[derive(Debug, Clone)]
pub enum Problem {
    Hardy(ProblemConfig),
    Pk(PkConfig),
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Instance {
    pub raw: RawConfig,
    pub theorem: Theorem,
    pub problem: Problem,
    pub rect: Option<Rect>,
    pub s_grid: usize,
    pub resolution: usize,
    pub random_starts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Instance {
    pub fn hardy(&self) -> Option<&ProblemConfig> {
        match &self.problem {
            Problem::Hardy(c) => Some(c),
            Problem::Pk(_) => None,
        }
    }

    pub fn p(&self) -> f64 {
        match &self.problem {
            Problem::Hardy(c) => c.exps.p,
            Problem::Pk(c) => c.exps.p,
        }
    }
}

fn parse_monotone(raw: &RawConfig, key: &str, default: &str) -> Result<Monotone, CliError> {
    let spec = raw.get(key).unwrap_or(default);
    let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
    let nums: Vec<f64> = args
        .split(',')
        .filter(|a| !a.trim().is_empty())
        .map(|a| a.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| raw.err(key, format!("cannot parse parameters of `{spec}`")))?;
    let built = match (kind.trim(), nums.as_slice()) {
        ("linear", [c]) => Monotone::linear(*c),
        ("power", [c, r]) => Monotone::power(*c, *r),
        _ => return Err(raw.err(key, format!("expected `linear:c` or `power:c,r`, got `{spec}`"))),
    };
    built.map_err(|e| raw.err(key, e.to_string()))
}

fn parse_v(raw: &RawConfig, axis: usize) -> Result<Weight1D, CliError> {
    let kind_key = format!("weights.v{axis}.kind");
    match raw.get(&kind_key).unwrap_or("unit") {
        "unit" => Ok(Weight1D::unit()),
        "power" => Ok(Weight1D::power(raw.f64_req(&format!("weights.v{axis}.alpha"))?)),
        other => Err(raw.err(&kind_key, format!("expected `unit` or `power`, got `{other}`"))),
    }
}

fn parse_u(raw: &RawConfig) -> Result<Weight2D, CliError> {
    let u = match raw.get("weights.u.kind").unwrap_or("unit") {
        "zero" => Weight2D::Zero,
        "unit" => Weight2D::unit(),
        "power" => Weight2D::PowerPair {
            beta: raw.f64_req("weights.u.beta")?,
            gamma: raw.f64_req("weights.u.gamma")?,
        },
        other => {
            return Err(raw.err(
                "weights.u.kind",
                format!("expected `zero`, `unit` or `power`, got `{other}`"),
            ))
        }
    };
    match raw.get("weights.u.scale") {
        None => Ok(u),
        Some(_) => {
            let c = raw.f64_req("weights.u.scale")?;
            if !(c > 0.0 && c.is_finite()) {
                return Err(raw.err("weights.u.scale", "must be positive"));
            }
            Ok(u.scaled(c))
        }
    }
}

fn config_error(e: CoreError) -> CliError {
    CliError::Config(e.to_string())
}

impl Instance {
    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let theorem = match raw.get("theorem") {
            None => Theorem::HardyThm1,
            Some(t) => Theorem::parse(t).ok_or_else(|| raw.err("theorem", format!("unknown theorem `{t}`")))?,
        };
        let p = raw.f64_req("exponents.p")?;
        let q = raw.f64_or("exponents.q", p)?;
        let exps = if theorem == Theorem::PkThm2 {
            Exponents::pk(p, q)
        } else {
            Exponents::new(p, q)
        }
        .map_err(|e| raw.err("exponents.p", e.to_string()))?;
        let eps = raw.f64_or("window.eps", 1e-3)?;
        let big = raw.f64_or("window.X", 1e3)?;
        let window = Window::new(eps, big).map_err(|e| raw.err("window.eps", e.to_string()))?;
        let mut pairs = Vec::new();
        for axis in 1..=2 {
            let a = parse_monotone(&raw, &format!("boundaries.axis{axis}.a"), "linear:0.5")?;
            let b = parse_monotone(&raw, &format!("boundaries.axis{axis}.b"), "linear:1")?;
            pairs.push(BoundaryPair::new(a, b).map_err(|e| CliError::Config(format!("boundaries.axis{axis}: {e}")))?);
        }
        let pairs: [BoundaryPair; 2] = [pairs[0].clone(), pairs[1].clone()];
        let v = [parse_v(&raw, 1)?, parse_v(&raw, 2)?];
        let u = parse_u(&raw)?;
        let problem = if theorem == Theorem::PkThm2 {
            let vv = Weight2D::Separable(v[0].clone(), v[1].clone());
            Problem::Pk(PkConfig::new(exps, u, vv, pairs, [window, window]).map_err(config_error)?)
        } else {
            for i in 0..2 {
                if let Err(e) = ProblemConfig1D::new(exps, Weight1D::unit(), v[i].clone(), pairs[i].clone(), window) {
                    return Err(match e {
                        CoreError::Integrability(m) => {
                            CliError::Config(format!("v{} not integrable at 0 for p={p}: {m}", i + 1))
                        }
                        other => CliError::Config(format!("v{}: {other}", i + 1)),
                    });
                }
            }
            Problem::Hardy(ProblemConfig::new(exps, u, v, pairs, [window, window]).map_err(config_error)?)
        };
        let rect = match (
            raw.get("rect.c1"),
            raw.get("rect.d1"),
            raw.get("rect.c2"),
            raw.get("rect.d2"),
        ) {
            (None, None, None, None) => None,
            _ => {
                let r = Rect::new(
                    raw.f64_req("rect.c1")?,
                    raw.f64_req("rect.d1")?,
                    raw.f64_req("rect.c2")?,
                    raw.f64_req("rect.d2")?,
                );
                if (0..2).any(|i| !(r.c[i] >= 0.0 && r.d[i] > r.c[i] && r.d[i].is_finite())) {
                    return Err(CliError::Config("rect: need 0 <= c < d < inf on both axes".into()));
                }
                Some(r)
            }
        };
        let is_lemma = matches!(
            theorem,
            Theorem::LemmaA | Theorem::Lemma2 | Theorem::Lemma3 | Theorem::Lemma4
        );
        if is_lemma && rect.is_none() {
            return Err(CliError::Config(format!(
                "theorem {} needs rect.c1, rect.d1, rect.c2, rect.d2",
                theorem.tag()
            )));
        }
        let s_grid = raw.usize_or("search.s_grid", 9)?;
        if s_grid == 0 {
            return Err(raw.err("search.s_grid", "must be positive"));
        }
        let resolution = raw.usize_or("search.resolution", 32)?;
        let random_starts = raw.usize_or("search.random_starts", 2)?;
        let max_iters = raw.usize_or("search.max_iters", 200)?;
        let seed = raw.usize_or("seed", 0)? as u64;
        Ok(Instance {
            raw,
            theorem,
            problem,
            rect,
            s_grid,
            resolution,
            random_starts,
            max_iters,
            seed,
        })
    }
}

/// Parameter values of a sweep.
pub fn sweep_values(raw: &RawConfig) -> Result<(String, Vec<f64>), CliError> {
    let param = raw
        .get("sweep.param")
        .ok_or_else(|| CliError::Config("sweep needs `sweep.param`".into()))?
        .to_string();
    if !KNOWN_KEYS.contains(&param.as_str()) || param.starts_with("sweep.") {
        return Err(raw.err("sweep.param", format!("cannot sweep over `{param}`")));
    }
    if let Some(list) = raw.get("sweep.values") {
        let values = list
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| {
                raw.err(
                    "sweep.values",
                    format!("expected a comma-separated list of numbers, got `{list}`"),
                )
            })?;
        return Ok((param, values));
    }
    let n = raw.usize_or("sweep.samples", 0)?;
    if n == 0 {
        return Ok((param, Vec::new()));
    }
    let from = raw.f64_req("sweep.from")?;
    let to = raw.f64_req("sweep.to")?;
    let values = if n == 1 {
        vec![from]
    } else {
        (0..n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect()
    };
    Ok((param, values))
}
