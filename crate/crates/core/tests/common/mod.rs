//! Independent reference implementations used as test oracles. Nothing here
//! calls the library's equation-of-state code; only constants and k_ij values
//! are shared.
#![allow(dead_code)]

use phasefit::eos::Component;
use phasefit::flash::Mixture;
use phasefit::mixing::{build_kij_matrix, GroupInteractionTable, KijMatrix};
use phasefit::workbench::library;

pub const R: f64 = 8.314472;
const S2: f64 = std::f64::consts::SQRT_2;

pub fn comp(name: &str) -> Component {
    library::component(name).unwrap_or_else(|| panic!("library lacks {name}"))
}

pub fn mixture(names: &[&str], z: &[f64]) -> Mixture {
    Mixture::new(names.iter().map(|n| comp(n)).collect(), z.to_vec()).unwrap()
}

pub fn gc_kij(mix: &Mixture, t: f64) -> KijMatrix {
    build_kij_matrix(&mix.components, t, &GroupInteractionTable::bundled(), &[]).unwrap()
}

/// Peng-Robinson 1978 written out from its textbook definition.
pub struct Oracle {
    pub t: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub kij: Vec<Vec<f64>>,
}

impl Oracle {
    pub fn new(mix: &Mixture, t: f64, kij: &KijMatrix) -> Self {
        let n = mix.len();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for c in &mix.components {
            let w = c.omega;
            let m = if w <= 0.491 {
                0.37464 + 1.54226 * w - 0.26992 * w * w
            } else {
                0.374642 + 1.48503 * w - 0.164423 * w * w + 0.016666 * w * w * w
            };
            let alpha = (1.0 + m * (1.0 - (t / c.tc).sqrt())).powi(2);
            a.push(0.457235529 * R * R * c.tc * c.tc / c.pc * alpha);
            b.push(0.0777960739 * R * c.tc / c.pc);
        }
        let kij = (0..n).map(|i| (0..n).map(|j| kij.get(i, j)).collect()).collect();
        Oracle { t, a, b, kij }
    }

    fn ab(&self, n: &[f64]) -> (f64, f64) {
        let mut d = 0.0;
        for i in 0..n.len() {
            for j in 0..n.len() {
                d += n[i] * n[j] * (self.a[i] * self.a[j]).sqrt() * (1.0 - self.kij[i][j]);
            }
        }
        let bt = n.iter().zip(&self.b).map(|(x, b)| x * b).sum();
        (d, bt)
    }

    /// Residual Helmholtz energy A_res / RT for mole numbers `n` in volume `v`.
    pub fn helmholtz(&self, n: &[f64], v: f64) -> f64 {
        let (d, bt) = self.ab(n);
        let nt: f64 = n.iter().sum();
        -nt * (1.0 - bt / v).ln()
            - d / (2.0 * S2 * R * self.t * bt) * ((v + (1.0 + S2) * bt) / (v + (1.0 - S2) * bt)).ln()
    }

    pub fn pressure(&self, x: &[f64], v: f64) -> f64 {
        let (d, bt) = self.ab(x);
        R * self.t / (v - bt) - d / (v * v + 2.0 * bt * v - bt * bt)
    }

    /// Every molar volume at which P(V) = p, from a log-spaced scan plus bisection.
    pub fn volumes(&self, x: &[f64], p: f64) -> Vec<f64> {
        let (_, bt) = self.ab(x);
        let lo = bt * (1.0 + 1e-10);
        let hi = 1e3 * R * self.t / p + bt;
        let steps = 3000;
        let f = |v: f64| self.pressure(x, v) - p;
        let mut roots = Vec::new();
        let mut v0 = lo;
        let mut f0 = f(v0);
        for k in 1..=steps {
            let v1 = lo * (hi / lo).powf(k as f64 / steps as f64);
            let f1 = f(v1);
            if f0.signum() != f1.signum() {
                let (mut a, mut b) = (v0, v1);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if f(m).signum() == f0.signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                    if b - a <= 1e-15 * b {
                        break;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            v0 = v1;
            f0 = f1;
        }
        roots
    }

    /// Residual molar Gibbs energy g_res / RT at volume `v`.
    pub fn g_res_at(&self, x: &[f64], v: f64, p: f64) -> f64 {
        let z = p * v / (R * self.t);
        self.helmholtz(x, v) + z - 1.0 - z.ln()
    }

    /// Molar Gibbs energy of mixing / RT on the lowest-g volume root.
    pub fn g_mix(&self, x: &[f64], p: f64) -> f64 {
        let ideal: f64 = x.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum();
        let res = self
            .volumes(x, p)
            .into_iter()
            .map(|v| self.g_res_at(x, v, p))
            .fold(f64::INFINITY, f64::min);
        ideal + res
    }

    /// ln φ_i = ∂(n A_res/RT)/∂n_i at fixed T, V, minus ln Z, by central
    /// differences with one Richardson step, at the volume root `v`.
    pub fn ln_phi_fd(&self, x: &[f64], v: f64, p: f64) -> Vec<f64> {
        let z = p * v / (R * self.t);
        // Total volume V = v * n held fixed.
        let central = |i: usize, h: f64| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (self.helmholtz(&up, v) - self.helmholtz(&dn, v)) / (2.0 * h)
        };
        (0..x.len())
            .map(|i| {
                let h = 1e-4;
                (4.0 * central(i, 0.5 * h) - central(i, h)) / 3.0 - z.ln()
            })
            .collect()
    }
}

/// Lower convex hull of points sorted by x.
pub fn lower_hull(pts: &[(f64, f64)]) -> Vec<usize> {
    let mut h: Vec<usize> = Vec::new();
    for i in 0..pts.len() {
        while h.len() >= 2 {
            let (a, b) = (pts[h[h.len() - 2]], pts[h[h.len() - 1]]);
            let c = pts[i];
            let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            if cross <= 0.0 {
                h.pop();
            } else {
                break;
            }
        }
        h.push(i);
    }
    h
}

/// Equilibrium of a binary from the convex hull of g_mix on `grid` points:
/// `None` for one phase, else the two compositions (first component),
/// lighter-in-component-one first.
pub fn binary_gibbs_split(o: &Oracle, z1: f64, p: f64, grid: usize) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = (1..grid)
        .map(|k| {
            let x = k as f64 / grid as f64;
            (x, o.g_mix(&[x, 1.0 - x], p))
        })
        .collect();
    let hull = lower_hull(&pts);
    for w in hull.windows(2) {
        let (a, b) = (pts[w[0]].0, pts[w[1]].0);
        if a <= z1 && z1 <= b {
            // Adjacent grid points mean the hull follows g itself.
            if w[1] - w[0] <= 2 {
                return None;
            }
            return Some((a, b));
        }
    }
    None
}

/// Minimum reduced tangent-plane distance of a binary feed over a uniform grid.
pub fn binary_tpd_scan(o: &Oracle, z1: f64, p: f64, grid: usize) -> f64 {
    let g = |x: f64| o.g_mix(&[x, 1.0 - x], p);
    // Chemical potentials of the feed from the tangent of g at z1.
    let h = 1e-6;
    let slope = (g(z1 + h) - g(z1 - h)) / (2.0 * h);
    let gz = g(z1);
    (1..grid)
        .map(|k| {
            let w = k as f64 / grid as f64;
            g(w) - (gz + (w - z1) * slope)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Pure-component saturation pressure where both volume roots have equal g,
/// searched on a log grid over [lo, hi] and refined by bisection.
pub fn pure_psat(o: &Oracle, lo: f64, hi: f64) -> f64 {
    let x = [1.0];
    let diff = |p: f64| -> Option<f64> {
        let v = o.volumes(&x, p);
        (v.len() == 3).then(|| o.g_res_at(&x, v[0], p) - o.g_res_at(&x, v[2], p))
    };
    let grid: Vec<f64> = (0..=200).map(|k| lo * (hi / lo).powf(k as f64 / 200.0)).collect();
    let (mut a, mut b) = grid
        .windows(2)
        .find_map(|w| match (diff(w[0]), diff(w[1])) {
            (Some(d0), Some(d1)) if d0.signum() != d1.signum() => Some((w[0], w[1])),
            _ => None,
        })
        .expect("no saturation pressure in range");
    let s_a = diff(a).unwrap().signum();
    while b - a > 1e-9 * b {
        let m = 0.5 * (a + b);
        if diff(m).unwrap().signum() == s_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Saturation pressures predicted at `k_star` for the CO2:CH4 pair, with
/// uniform noise of half-width `noise` MPa from a seeded generator.
pub fn synthetic_dataset(
    base: &Mixture,
    t: f64,
    loadings: &[f64],
    k_star: f64,
    noise: f64,
    seed: u64,
) -> phasefit::ExperimentalDataset {
    use phasefit::optimizer::{CalibrationConfig, ExperimentalRecord};
    use rand::{Rng, SeedableRng};
    let config = CalibrationConfig::new(base.clone(), std::sync::Arc::new(GroupInteractionTable::bundled()));
    let requests: Vec<_> = loadings.iter().map(|z| (*z, phasefit::SaturationKind::Bubble)).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let records = config
        .predict(Some(k_star), t, &requests)
        .unwrap()
        .into_iter()
        .map(|pt| {
            let pt = pt.unwrap();
            assert!(pt.converged, "synthetic point at z = {} failed", pt.z_co2);
            let e = if noise > 0.0 { rng.gen_range(-noise..=noise) } else { 0.0 };
            ExperimentalRecord {
                temperature: t,
                z_co2: pt.z_co2,
                kind: pt.kind,
                p_exp: pt.pressure / 1e6 + e,
            }
        })
        .collect();
    phasefit::ExperimentalDataset::new("synthetic", records).unwrap()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (a * (n - 1 - i) as f64 + b * i as f64) / (n - 1) as f64).collect()
}
