//! PR78 pure-component parameters, the cubic in Z, and mixture fugacity
//! coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Universal gas constant, J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.314472;

const OMEGA_A: f64 = 0.457235529;
const OMEGA_B: f64 = 0.0777960739;
/// Acentric factor above which the PR78 high-omega polynomial is used.
pub const OMEGA_BRANCH: f64 = 0.491;

const SQRT2: f64 = std::f64::consts::SQRT_2;
/// Roots must satisfy Z > B + ROOT_MARGIN.
const ROOT_MARGIN: f64 = 1e-12;

/// A chemical species with its critical constants and group decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    /// Critical temperature, K.
    pub tc: f64,
    /// Critical pressure, Pa.
    pub pc: f64,
    pub omega: f64,
    /// (group name, occurrence count) pairs.
    pub groups: Vec<(String, u32)>,
}

impl Component {
    pub fn new(
        name: impl Into<String>,
        tc: f64,
        pc: f64,
        omega: f64,
        groups: Vec<(String, u32)>,
    ) -> Result<Self> {
        let c = Component {
            name: name.into(),
            tc,
            pc,
            omega,
            groups,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tc.is_finite() && self.tc > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{}: critical temperature must be positive, got {}",
                self.name, self.tc
            )));
        }
        if !(self.pc.is_finite() && self.pc > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{}: critical pressure must be positive, got {}",
                self.name, self.pc
            )));
        }
        if !self.omega.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{}: acentric factor must be finite",
                self.name
            )));
        }
        if let Some((g, _)) = self.groups.iter().find(|(_, n)| *n == 0) {
            return Err(Error::InvalidInput(format!(
                "{}: group {g} has zero occurrences",
                self.name
            )));
        }
        Ok(())
    }
}

/// PR78 energy and co-volume parameters of one component at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureParams {
    /// Energy parameter, Pa·m⁶/mol².
    pub a: f64,
    /// Co-volume, m³/mol.
    pub b: f64,
    pub m: f64,
    pub alpha: f64,
}

/// PR78 slope factor of the Soave alpha function.
pub fn m_factor(omega: f64) -> Result<f64> {
    if !omega.is_finite() {
        return Err(Error::InvalidInput(format!(
            "acentric factor must be finite, got {omega}"
        )));
    }
    let w = omega;
    Ok(if w <= OMEGA_BRANCH {
        0.37464 + 1.54226 * w - 0.26992 * w * w
    } else {
        0.374642 + 1.48503 * w - 0.164423 * w * w + 0.016666 * w * w * w
    })
}

pub fn pure_params(c: &Component, t: f64) -> Result<PureParams> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {t}")));
    }
    let m = m_factor(c.omega)?;
    let s = 1.0 + m * (1.0 - (t / c.tc).sqrt());
    let alpha = s * s;
    let a = OMEGA_A * GAS_CONSTANT * GAS_CONSTANT * c.tc * c.tc / c.pc * alpha;
    let b = OMEGA_B * GAS_CONSTANT * c.tc / c.pc;
    Ok(PureParams { a, b, m, alpha })
}

/// Which compressibility root a phase takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseRoot {
    LiquidLike,
    VaporLike,
    /// The root with the lower Gibbs energy.
    MinGibbs,
}

/// Physical real roots of the PR cubic in Z, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicRoots {
    pub roots: Vec<f64>,
}

impl CubicRoots {
    pub fn liquid_like(&self) -> f64 {
        self.roots[0]
    }

    pub fn vapor_like(&self) -> f64 {
        self.roots[self.roots.len() - 1]
    }

    /// True when the liquid-like and vapor-like roots are distinct.
    pub fn has_two_branches(&self) -> bool {
        self.roots.len() > 1
    }
}

/// Coefficients (c2, c1, c0) of the monic PR cubic Z³ + c2 Z² + c1 Z + c0.
pub fn pr_cubic_coefficients(a_red: f64, b_red: f64) -> (f64, f64, f64) {
    let (a, b) = (a_red, b_red);
    (-(1.0 - b), a - 3.0 * b * b - 2.0 * b, -(a * b - b * b - b * b * b))
}

/// All real roots of Z³ + c2 Z² + c1 Z + c0 (with multiplicity for the
/// three-root case), sorted ascending. Each root gets one Newton polish.
pub fn cubic_real_roots(c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);

    let mut roots: Vec<f64> = if disc > 0.0 {
        let sd = disc.sqrt();
        let t = (-q / 2.0 + sd).cbrt() + (-q / 2.0 - sd).cbrt();
        vec![t - shift]
    } else if p == 0.0 {
        vec![-shift; 3]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos();
        (0..3)
            .map(|k| {
                r * (phi / 3.0 - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift
            })
            .collect()
    };

    let f = |z: f64| ((z + c2) * z + c1) * z + c0;
    let df = |z: f64| (3.0 * z + 2.0 * c2) * z + c1;
    for z in roots.iter_mut() {
        let d = df(*z);
        if d.abs() > 1e-300 {
            let polished = *z - f(*z) / d;
            if polished.is_finite() && f(polished).abs() <= f(*z).abs() {
                *z = polished;
            }
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

/// Solve the PR cubic for the physical compressibility roots.
///
/// With three real roots the middle (unstable) one is dropped.
pub fn solve_cubic_z(a_red: f64, b_red: f64) -> Result<CubicRoots> {
    if !(b_red >= 0.0) || !a_red.is_finite() || !b_red.is_finite() {
        return Err(Error::InvalidInput(format!(
            "reduced parameters must be finite with B >= 0 (A = {a_red}, B = {b_red})"
        )));
    }
    let (c2, c1, c0) = pr_cubic_coefficients(a_red, b_red);
    let all = cubic_real_roots(c2, c1, c0);
    let mut roots: Vec<f64> = if all.len() == 3 {
        vec![all[0], all[2]]
    } else {
        all
    };
    roots.retain(|&z| z > b_red + ROOT_MARGIN);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(1.0));
    if roots.is_empty() {
        return Err(Error::Degenerate(format!(
            "no physical compressibility root (A = {a_red}, B = {b_red})"
        )));
    }
    Ok(CubicRoots { roots })
}

/// Per-pair cross energies a_ij = √(a_i a_j)(1 − k_ij) and co-volumes b_i of
/// a mixture at a fixed temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossEnergyTable {
    n: usize,
    a_ij: Vec<f64>,
    b_i: Vec<f64>,
}

impl CrossEnergyTable {
    pub fn new(a_ij: Vec<f64>, b_i: Vec<f64>) -> Result<Self> {
        let n = b_i.len();
        if a_ij.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "cross-energy table must be {n}x{n}, got {} entries",
                a_ij.len()
            )));
        }
        Ok(CrossEnergyTable { n, a_ij, b_i })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn a_ij(&self, i: usize, j: usize) -> f64 {
        self.a_ij[i * self.n + j]
    }

    pub fn b_i(&self) -> &[f64] {
        &self.b_i
    }

    /// Mixture (a, b) at composition `x`.
    pub fn mix(&self, x: &[f64]) -> (f64, f64) {
        let a_dot = self.a_dot(x);
        let a = x.iter().zip(&a_dot).map(|(xi, ai)| xi * ai).sum();
        let b = x.iter().zip(&self.b_i).map(|(xi, bi)| xi * bi).sum();
        (a, b)
    }

    /// Σ_j x_j a_ij for every i.
    pub fn a_dot(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.a_ij[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, xj)| a * xj)
                    .sum()
            })
            .collect()
    }

    /// Restrict to the components listed in `keep`.
    pub fn subset(&self, keep: &[usize]) -> CrossEnergyTable {
        let n = keep.len();
        let mut a_ij = Vec::with_capacity(n * n);
        for &i in keep {
            for &j in keep {
                a_ij.push(self.a_ij(i, j));
            }
        }
        CrossEnergyTable {
            n,
            a_ij,
            b_i: keep.iter().map(|&i| self.b_i[i]).collect(),
        }
    }
}

/// Compressibility and fugacity coefficients of one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub z: f64,
    pub ln_phi: Vec<f64>,
    /// Residual molar Gibbs energy over RT, Σ x_i ln φ_i.
    pub g_res: f64,
}

/// ln((Z + (1+√2)B) / (Z + (1−√2)B)), accurate for small B.
fn pr_log_term(z: f64, b_red: f64) -> f64 {
    (2.0 * SQRT2 * b_red / (z + (1.0 - SQRT2) * b_red)).ln_1p()
}

/// Residual Gibbs energy over RT of a phase at root `z`.
fn residual_gibbs(z: f64, a_red: f64, b_red: f64) -> f64 {
    let attractive = if b_red > 0.0 {
        a_red / (2.0 * SQRT2 * b_red) * pr_log_term(z, b_red)
    } else {
        0.0
    };
    z - 1.0 - (z - b_red).ln() - attractive
}

/// Pick the root for `root` among `roots`; MinGibbs compares residual Gibbs
/// energies of the two branches.
fn select_root(roots: &CubicRoots, root: PhaseRoot, a_red: f64, b_red: f64) -> f64 {
    match root {
        PhaseRoot::LiquidLike => roots.liquid_like(),
        PhaseRoot::VaporLike => roots.vapor_like(),
        PhaseRoot::MinGibbs => {
            let (zl, zv) = (roots.liquid_like(), roots.vapor_like());
            if residual_gibbs(zl, a_red, b_red) < residual_gibbs(zv, a_red, b_red) {
                zl
            } else {
                zv
            }
        }
    }
}

/// Full phase state (Z, ln φ_i, g_res) at composition `x`.
pub fn phase_state(
    table: &CrossEnergyTable,
    x: &[f64],
    t: f64,
    p: f64,
    root: PhaseRoot,
) -> Result<PhaseState> {
    if x.len() != table.len() {
        return Err(Error::InvalidInput(format!(
            "composition has {} entries, mixture has {}",
            x.len(),
            table.len()
        )));
    }
    if !(p > 0.0 && p.is_finite()) || !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!(
            "temperature and pressure must be positive (T = {t}, P = {p})"
        )));
    }
    let a_dot = table.a_dot(x);
    let a: f64 = x.iter().zip(&a_dot).map(|(xi, ai)| xi * ai).sum();
    let b: f64 = x.iter().zip(table.b_i()).map(|(xi, bi)| xi * bi).sum();
    let rt = GAS_CONSTANT * t;
    let a_red = a * p / (rt * rt);
    let b_red = b * p / rt;
    let roots = solve_cubic_z(a_red, b_red)?;
    let z = select_root(&roots, root, a_red, b_red);
    if !(z > b_red) {
        return Err(Error::Degenerate(format!(
            "selected root Z = {z} is not above B = {b_red}"
        )));
    }

    let log_term = pr_log_term(z, b_red);
    let ln_z_b = (z - b_red).ln();
    let ln_phi: Vec<f64> = a_dot
        .iter()
        .zip(table.b_i())
        .map(|(&ai_dot, &bi)| {
            let b_ratio = bi / b;
            let attractive = if a > 0.0 && b_red > 0.0 {
                a_red / (2.0 * SQRT2 * b_red) * (2.0 * ai_dot / a - b_ratio) * log_term
            } else {
                0.0
            };
            b_ratio * (z - 1.0) - ln_z_b - attractive
        })
        .collect();
    if let Some(i) = ln_phi.iter().position(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!(
            "non-finite fugacity coefficient for component {i} (Z = {z}, B = {b_red})"
        )));
    }
    let g_res = residual_gibbs(z, a_red, b_red);
    Ok(PhaseState { z, ln_phi, g_res })
}

/// ln φ_i of every component in a phase of composition `x`.
pub fn fugacity_coefficients(
    table: &CrossEnergyTable,
    x: &[f64],
    t: f64,
    p: f64,
    root: PhaseRoot,
) -> Result<Vec<f64>> {
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "phase composition sums to {sum}, expected 1"
        )));
    }
    phase_state(table, x, t, p, root).map(|s| s.ln_phi)
}
