//! Brute-force reference implementations for small instances. Everything
//! here is single-threaded, uses fixed trapezoid meshes and exhaustive grids,
//! and shares no quadrature or search code with the production path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charf::{ProblemConfig, ProblemConfig1D, ScalePoint};
use crate::funcspace::{BoundaryPair, Weight1D, Window};

/// Mesh densities for the reference computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Window of the supremum.
    pub window: Window,
    /// Search density in `t`, points per decade.
    pub t_per_decade: usize,
    /// Quadrature mesh density, points per decade. Every mesh node inside
    /// `(t, a^{-1}(b(t)))` is a candidate `x`.
    pub quad_per_decade: usize,
    /// Nodes of the table for `V`.
    pub v_nodes: usize,
    /// Full enumeration of all grid combinations. Otherwise the two axes
    /// are scanned alternately from the best diagonal point.
    pub exhaustive: bool,
    /// Outer trapezoid nodes per axis for the ratio search.
    pub ratio_outer_nodes: usize,
    pub restarts: usize,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            window: Window { lo: 1e-2, hi: 1e2 },
            t_per_decade: 50,
            quad_per_decade: 400,
            v_nodes: 4096,
            exhaustive: true,
            ratio_outer_nodes: 192,
            restarts: 2,
            max_sweeps: 60,
            seed: 0,
        }
    }
}

/// `V(t) = int_0^t v^{1-p'}` tabulated by the trapezoid rule in `ln t`, with
/// a power-law head on `(0, t_0)`.
struct DenseV {
    ln_x: Vec<f64>,
    ln_v: Vec<f64>,
}

impl DenseV {
    fn new(v: &Weight1D, pprime: f64, lo: f64, hi: f64, n: usize) -> Self {
        let (l0, l1) = ((lo / 10.0).ln(), (hi * 10.0).ln());
        let h = (l1 - l0) / (n - 1) as f64;
        let ln_x: Vec<f64> = (0..n).map(|k| l0 + h * k as f64).collect();
        let g: Vec<f64> = ln_x
            .iter()
            .map(|&s| v.value_pow(s.exp(), 1.0 - pprime) * s.exp())
            .collect();
        let e = (g[1] / g[0]).ln() / h;
        let mut acc = if e > 0.0 { g[0] / e } else { f64::INFINITY };
        let mut ln_v = Vec::with_capacity(n);
        ln_v.push(acc.ln());
        for k in 1..n {
            acc += 0.5 * h * (g[k - 1] + g[k]);
            ln_v.push(acc.ln());
        }
        DenseV { ln_x, ln_v }
    }

    fn value(&self, y: f64) -> f64 {
        let s = y.ln();
        let n = self.ln_x.len();
        let h = self.ln_x[1] - self.ln_x[0];
        let k = (((s - self.ln_x[0]) / h).floor().max(0.0) as usize).min(n - 2);
        let w = (s - self.ln_x[k]) / h;
        (self.ln_v[k] * (1.0 - w) + self.ln_v[k + 1] * w).exp()
    }
}

fn log_mesh(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..=n).map(|k| (l0 + (l1 - l0) * k as f64 / n as f64).exp()).collect()
}

fn v_table(v: &Weight1D, pprime: f64, pair: &BoundaryPair, w: Window, n: usize) -> DenseV {
    DenseV::new(v, pprime, pair.a.value(w.lo).min(w.lo), pair.b.value(w.hi).max(w.hi), n)
}

/// The pieces of one axis: the mesh, the kernel `(V(b) - V(a))^{q(p-s)/p}`
/// on it and the admissible `(t, x)` index pairs with `prefactor^q`.
struct AxisTable {
    mesh: Vec<f64>,
    kernel: Vec<f64>,
    pairs: Vec<(usize, usize, f64)>,
}

fn axis_table(vt: &DenseV, pair: &BoundaryPair, p: f64, q: f64, s: f64, oc: &OracleConfig) -> AxisTable {
    let mesh = log_mesh(oc.window.lo, oc.window.hi, oc.quad_per_decade);
    let ek = q * (p - s) / p;
    let ep = (s - 1.0) / p;
    let kernel = mesh
        .iter()
        .map(|&z| {
            (vt.value(pair.b.value(z)) - vt.value(pair.a.value(z)))
                .max(0.0)
                .powf(ek)
        })
        .collect();
    let stride = (oc.quad_per_decade / oc.t_per_decade.max(1)).max(1);
    let mut pairs = Vec::new();
    for jt in (0..mesh.len()).step_by(stride) {
        let bt = pair.b.value(mesh[jt]);
        for jx in jt + 1..mesh.len() {
            let ax = pair.a.value(mesh[jx]);
            if !(ax < bt) {
                break;
            }
            pairs.push((jt, jx, (vt.value(bt) - vt.value(ax)).max(0.0).powf(ep * q)));
        }
    }
    AxisTable { mesh, kernel, pairs }
}

/// Trapezoid weights in `ln z` times the Jacobian `z`, as cumulative sums
/// over mesh cells.
fn cell_weights(mesh: &[f64]) -> Vec<f64> {
    let h = (mesh[mesh.len() - 1] / mesh[0]).ln() / (mesh.len() - 1) as f64;
    mesh.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).collect()
}

/// Dense-grid supremum of `B(s1, s2)` on `oc.window`.
pub fn oracle_b2(cfg: &ProblemConfig, s: ScalePoint, oc: &OracleConfig) -> f64 {
    if cfg.u.is_zero() {
        return 0.0;
    }
    let (p, q, pp) = (cfg.exps.p, cfg.exps.q, cfg.exps.pprime);
    let ax: Vec<AxisTable> = (0..2)
        .map(|i| {
            let vt = v_table(&cfg.v[i], pp, &cfg.pairs[i], oc.window, oc.v_nodes);
            axis_table(&vt, &cfg.pairs[i], p, q, s.get(i), oc)
        })
        .collect();
    let (m1, m2) = (&ax[0].mesh, &ax[1].mesh);
    let (n1, n2) = (m1.len(), m2.len());
    // Node values of u K1 K2 z1 z2, then cell averages and the 2D prefix sum.
    let node: Vec<f64> = (0..n1 * n2)
        .map(|k| {
            let (i, j) = (k / n2, k % n2);
            cfg.u.value(m1[i], m2[j]) * ax[0].kernel[i] * ax[1].kernel[j] * m1[i] * m2[j]
        })
        .collect();
    let (h1, h2) = (
        (m1[n1 - 1] / m1[0]).ln() / (n1 - 1) as f64,
        (m2[n2 - 1] / m2[0]).ln() / (n2 - 1) as f64,
    );
    let mut c = vec![0.0; n1 * n2];
    for i in 1..n1 {
        let mut row = 0.0;
        for j in 1..n2 {
            let cell = 0.25
                * h1
                * h2
                * (node[(i - 1) * n2 + j - 1] + node[(i - 1) * n2 + j] + node[i * n2 + j - 1] + node[i * n2 + j]);
            row += cell;
            c[i * n2 + j] = c[(i - 1) * n2 + j] + row;
        }
    }
    let rect = |a: &(usize, usize, f64), b: &(usize, usize, f64)| {
        let v = c[a.1 * n2 + b.1] - c[a.0 * n2 + b.1] - c[a.1 * n2 + b.0] + c[a.0 * n2 + b.0];
        v.max(0.0) * a.2 * b.2
    };
    let best = if oc.exhaustive {
        let mut best = 0.0f64;
        for a in &ax[0].pairs {
            for b in &ax[1].pairs {
                best = best.max(rect(a, b));
            }
        }
        best
    } else {
        let (pa, pb) = (&ax[0].pairs, &ax[1].pairs);
        let mut ia = 0;
        let mut ib = 0;
        let mut best = 0.0f64;
        for (k, a) in pa.iter().enumerate() {
            for (l, b) in pb.iter().enumerate() {
                if a.0 == b.0 && a.1 == b.1 {
                    let v = rect(a, b);
                    if v > best {
                        best = v;
                        ia = k;
                        ib = l;
                    }
                }
            }
        }
        loop {
            let prev = best;
            for (k, a) in pa.iter().enumerate() {
                let v = rect(a, &pb[ib]);
                if v > best {
                    best = v;
                    ia = k;
                }
            }
            for (l, b) in pb.iter().enumerate() {
                let v = rect(&pa[ia], b);
                if v > best {
                    best = v;
                    ib = l;
                }
            }
            if !(best > prev) {
                break;
            }
        }
        best
    };
    best.powf(1.0 / q)
}

/// Dense-grid supremum of the one-dimensional `B(s)` on `oc.window`.
pub fn oracle_b1(cfg: &ProblemConfig1D, s: f64, oc: &OracleConfig) -> f64 {
    let (p, q, pp) = (cfg.exps.p, cfg.exps.q, cfg.exps.pprime);
    let vt = v_table(&cfg.v, pp, &cfg.pair, oc.window, oc.v_nodes);
    let ax = axis_table(&vt, &cfg.pair, p, q, s, oc);
    let w = cell_weights(&ax.mesh);
    let mut cum = vec![0.0; ax.mesh.len()];
    for j in 1..ax.mesh.len() {
        let g = |k: usize| (cfg.u)(ax.mesh[k]) * ax.kernel[k];
        cum[j] =
            cum[j - 1] + w[j - 1] / (ax.mesh[j - 1] + ax.mesh[j]) * (g(j - 1) * ax.mesh[j - 1] + g(j) * ax.mesh[j]);
    }
    ax.pairs
        .iter()
        .map(|&(jt, jx, pq)| (cum[jx] - cum[jt]).max(0.0) * pq)
        .fold(0.0, f64::max)
        .powf(1.0 / q)
}

/// Rayleigh quotient of piecewise-constant `f` by brute force: the box
/// integral from per-axis overlap lengths and a trapezoid rule in `ln x` for
/// the outer integral.
struct DenseRatio {
    p: f64,
    q: f64,
    n: [usize; 2],
    /// Overlap lengths, `outer x cells` per axis.
    l: [Vec<f64>; 2],
    no: [usize; 2],
    /// Outer weights times `u`, `no1 x no2`.
    w: Vec<f64>,
    mass: Vec<f64>,
}

fn trapezoid_mass(v: &Weight1D, lo: f64, hi: f64) -> f64 {
    let n = 64;
    let h = (hi / lo).ln() / n as f64;
    let g = |k: usize| {
        let x = lo * (h * k as f64).exp();
        v.value(x) * x
    };
    h * (0.5 * (g(0) + g(n)) + (1..n).map(g).sum::<f64>())
}

impl DenseRatio {
    fn new(cfg: &ProblemConfig, g: [&[f64]; 2], outer: usize) -> Option<Self> {
        let mut l: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut xs: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut tw: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for i in 0..2 {
            let (grid, pair) = (g[i], &cfg.pairs[i]);
            let lo = pair.b.inverse(grid[0], 1e-14).ok()?;
            let hi = pair.a.inverse(grid[grid.len() - 1], 1e-14).ok()?;
            let h = (hi / lo).ln() / (outer - 1) as f64;
            for k in 0..outer {
                let x = lo * (h * k as f64).exp();
                let end = if k == 0 || k == outer - 1 { 0.5 } else { 1.0 };
                xs[i].push(x);
                tw[i].push(end * h * x);
                let (a, b) = (pair.a.value(x), pair.b.value(x));
                for c in grid.windows(2) {
                    l[i].push((b.min(c[1]) - a.max(c[0])).max(0.0));
                }
            }
        }
        let w = (0..outer * outer)
            .map(|k| {
                let (j, m) = (k / outer, k % outer);
                tw[0][j] * tw[1][m] * cfg.u.value(xs[0][j], xs[1][m])
            })
            .collect();
        let m1: Vec<f64> = g[0].windows(2).map(|c| trapezoid_mass(&cfg.v[0], c[0], c[1])).collect();
        let m2: Vec<f64> = g[1].windows(2).map(|c| trapezoid_mass(&cfg.v[1], c[0], c[1])).collect();
        let mass = m1.iter().flat_map(|a| m2.iter().map(move |b| a * b)).collect();
        Some(DenseRatio {
            p: cfg.exps.p,
            q: cfg.exps.q,
            n: [g[0].len() - 1, g[1].len() - 1],
            l,
            no: [outer, outer],
            w,
            mass,
        })
    }

    fn h(&self, f: &[f64]) -> Vec<f64> {
        let [n1, n2] = self.n;
        let [o1, o2] = self.no;
        // t[c][m] = sum_d f[c][d] L2[m][d]
        let mut t = vec![0.0; n1 * o2];
        for c in 0..n1 {
            for m in 0..o2 {
                t[c * o2 + m] = (0..n2).map(|d| f[c * n2 + d] * self.l[1][m * n2 + d]).sum();
            }
        }
        let mut h = vec![0.0; o1 * o2];
        for j in 0..o1 {
            for c in 0..n1 {
                let lj = self.l[0][j * n1 + c];
                if lj > 0.0 {
                    for m in 0..o2 {
                        h[j * o2 + m] += lj * t[c * o2 + m];
                    }
                }
            }
        }
        h
    }

    fn num(&self, h: &[f64]) -> f64 {
        h.iter().zip(&self.w).map(|(h, w)| w * h.powf(self.q)).sum()
    }

    fn den(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.mass).map(|(f, m)| m * f.powf(self.p)).sum()
    }

    fn ratio(&self, num: f64, den: f64) -> f64 {
        if den > 0.0 {
            num.powf(1.0 / self.q) / den.powf(1.0 / self.p)
        } else {
            0.0
        }
    }
}

/// Hill climbing on the Rayleigh quotient over piecewise-constant functions
/// on a `resolution x resolution` geometric grid over the window. Each sweep
/// tries scaling every single cell up and down and keeps improvements; the
/// step shrinks when a sweep gains nothing. Returns the best ratio over a
/// uniform start and `oc.restarts` seeded random starts.
pub fn oracle_ratio_search(cfg: &ProblemConfig, resolution: usize, oc: &OracleConfig) -> f64 {
    let resolution = resolution.clamp(1, 32);
    if cfg.u.is_zero() {
        return 0.0;
    }
    let g1 = cfg.window[0].geometric_nodes(resolution);
    let g2 = cfg.window[1].geometric_nodes(resolution);
    let Some(dr) = DenseRatio::new(cfg, [&g1, &g2], oc.ratio_outer_nodes.max(2)) else {
        return f64::NAN;
    };
    let [n1, n2] = dr.n;
    let [o1, o2] = dr.no;
    let n = n1 * n2;
    let mut starts = vec![vec![1.0; n]];
    for r in 0..oc.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(oc.seed.wrapping_add(r as u64));
        starts.push((0..n).map(|_| rng.gen_range(0.05..1.0)).collect());
    }
    let mut best = 0.0f64;
    for mut f in starts {
        let mut h = dr.h(&f);
        let mut den = dr.den(&f);
        let mut value = dr.ratio(dr.num(&h), den);
        let mut gamma = 2.0f64;
        let mut trial = vec![0.0; o1 * o2];
        for _ in 0..oc.max_sweeps {
            let mut improved = false;
            for c in 0..n {
                let (c1, c2) = (c / n2, c % n2);
                for factor in [gamma, 1.0 / gamma] {
                    let delta = f[c] * (factor - 1.0);
                    for j in 0..o1 {
                        let l1 = dr.l[0][j * n1 + c1] * delta;
                        for m in 0..o2 {
                            trial[j * o2 + m] = h[j * o2 + m] + l1 * dr.l[1][m * n2 + c2];
                        }
                    }
                    let tden = den + dr.mass[c] * ((f[c] * factor).powf(dr.p) - f[c].powf(dr.p));
                    let tval = dr.ratio(dr.num(&trial), tden);
                    if tval > value * (1.0 + 1e-12) {
                        f[c] *= factor;
                        std::mem::swap(&mut h, &mut trial);
                        den = tden;
                        value = tval;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                gamma = gamma.sqrt();
                if gamma < 1.001 {
                    break;
                }
            }
        }
        best = best.max(value);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charf::{b1, b2, Exponents};
    use crate::funcspace::Weight2D;

    fn cfg(u: Weight2D, v: Weight1D, ca: f64, p: f64, q: f64) -> ProblemConfig {
        let w = Window::new(1e-2, 1e2).unwrap();
        let pair = BoundaryPair::linear(ca, 1.0).unwrap();
        ProblemConfig::new(
            Exponents::new(p, q).unwrap(),
            u,
            [v.clone(), v],
            [pair.clone(), pair],
            [w, w],
        )
        .unwrap()
    }

    #[test]
    fn dense_v_is_exact_for_powers() {
        let t = DenseV::new(&Weight1D::power(0.5), 2.0, 1e-3, 1e3, 4096);
        for &y in &[0.01, 0.3, 1.0, 17.0, 500.0] {
            assert!((t.value(y) / (2.0 * y.sqrt()) - 1.0).abs() < 1e-5, "{y}");
        }
    }

    #[test]
    fn zero_weight() {
        let c = cfg(Weight2D::Zero, Weight1D::unit(), 0.5, 2.0, 2.0);
        let oc = OracleConfig::default();
        assert_eq!(oracle_b2(&c, ScalePoint::new(1.5, 1.5), &oc), 0.0);
        assert_eq!(oracle_ratio_search(&c, 8, &oc), 0.0);
    }

    #[test]
    fn b2_agrees_with_production() {
        let c = cfg(
            Weight2D::PowerPair {
                beta: -2.0,
                gamma: -2.0,
            },
            Weight1D::unit(),
            0.5,
            2.0,
            2.0,
        );
        let s = ScalePoint::new(1.5, 1.5);
        let o = oracle_b2(&c, s, &OracleConfig::default());
        let b = b2(&c, s).unwrap().value;
        assert!((o / b - 1.0).abs() < 1e-2, "oracle {o} vs production {b}");
    }

    #[test]
    fn separable_is_product_of_1d() {
        let c = cfg(
            Weight2D::PowerPair {
                beta: -1.5,
                gamma: -1.75,
            },
            Weight1D::power(0.5),
            0.5,
            2.0,
            2.0,
        );
        let s = ScalePoint::new(1.4, 1.6);
        let oc = OracleConfig::default();
        let two = oracle_b2(&c, s, &oc);
        let one: f64 = (0..2)
            .map(|i| oracle_b1(&c.restrict(i).unwrap(), s.get(i), &oc))
            .product();
        assert!((two / one - 1.0).abs() < 1e-2, "{two} vs {one}");
        let prod: f64 = (0..2)
            .map(|i| b1(&c.restrict(i).unwrap(), s.get(i)).unwrap().value)
            .product();
        assert!((one / prod - 1.0).abs() < 1e-2, "{one} vs {prod}");
    }

    #[test]
    fn alternating_scan_is_below_exhaustive() {
        let c = cfg(
            Weight2D::PowerPair {
                beta: -2.0,
                gamma: -2.0,
            },
            Weight1D::unit(),
            0.5,
            2.0,
            2.0,
        );
        let s = ScalePoint::new(1.5, 1.5);
        let mut oc = OracleConfig {
            quad_per_decade: 100,
            ..OracleConfig::default()
        };
        let full = oracle_b2(&c, s, &oc);
        oc.exhaustive = false;
        let scan = oracle_b2(&c, s, &oc);
        assert!(scan <= full * (1.0 + 1e-12) && scan > 0.9 * full);
    }

    #[test]
    fn ratio_search_is_deterministic_and_positive() {
        let c = cfg(
            Weight2D::PowerPair {
                beta: -2.0,
                gamma: -2.0,
            },
            Weight1D::unit(),
            0.5,
            2.0,
            2.0,
        );
        let oc = OracleConfig {
            max_sweeps: 8,
            ..OracleConfig::default()
        };
        let a = oracle_ratio_search(&c, 8, &oc);
        let b = oracle_ratio_search(&c, 8, &oc);
        assert_eq!(a, b);
        assert!(a > 0.0 && a.is_finite());
    }
}
