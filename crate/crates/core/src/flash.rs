//! Isothermal two-phase PT flash: tangent-plane stability analysis,
//! Rachford-Rice, and successive substitution on the K-values.

use serde::{Deserialize, Serialize};

use crate::eos::{
    phase_state, pure_params, solve_cubic_z, Component, CrossEnergyTable, PhaseRoot, PhaseState,
    GAS_CONSTANT,
};
use crate::error::{Error, Result};
use crate::mixing::{cross_energy_table, KijMatrix};

/// v/b of the PR78 critical point (Zc / Bc). Single roots with a smaller
/// reduced volume are called liquid-like.
const PR_CRITICAL_VOLUME_RATIO: f64 = 3.951;

/// A set of components with global mole fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub components: Vec<Component>,
    pub z: Vec<f64>,
}

impl Mixture {
    pub fn new(components: Vec<Component>, z: Vec<f64>) -> Result<Self> {
        let m = Mixture { components, z };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidInput("mixture has no components".into()));
        }
        if self.components.len() != self.z.len() {
            return Err(Error::InvalidInput(format!(
                "{} components but {} mole fractions",
                self.components.len(),
                self.z.len()
            )));
        }
        for (c, &zi) in self.components.iter().zip(&self.z) {
            c.validate()?;
            if !(zi.is_finite() && zi >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "mole fraction of {} is {zi}, must be non-negative",
                    c.name
                )));
            }
        }
        let sum: f64 = self.z.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("mole fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.components.iter().map(|c| c.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    /// Same components at a new composition.
    pub fn with_composition(&self, z: Vec<f64>) -> Result<Self> {
        Mixture::new(self.components.clone(), z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlashOptions {
    pub stability_max_iter: usize,
    /// ∞-norm on successive ln W updates.
    pub stability_tol: f64,
    /// Trial phases with tpd below this prove instability.
    pub tpd_threshold: f64,
    pub flash_max_iter: usize,
    /// Required fugacity equality, max_i |ln(φ_i^L x_i) − ln(φ_i^V y_i)|.
    pub fugacity_tol: f64,
    /// Iteration continues to this tighter residual when the budget allows.
    pub polish_tol: f64,
    /// Componentwise |x − y| below which a split counts as trivial.
    pub trivial_tol: f64,
}

impl Default for FlashOptions {
    fn default() -> Self {
        FlashOptions {
            stability_max_iter: 500,
            stability_tol: 1e-10,
            tpd_threshold: -1e-8,
            flash_max_iter: 2000,
            fugacity_tol: 1e-8,
            polish_tol: 1e-11,
            trivial_tol: 1e-7,
        }
    }
}

/// Equilibrium state from a PT flash.
///
/// Single-phase results carry `beta` of 0 (liquid-like) or 1 (vapor-like)
/// and x = y = z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlashResult {
    pub phase_count: usize,
    pub beta: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z_liquid: f64,
    pub z_vapor: f64,
    /// Stability plus phase-split iterations.
    pub iterations: usize,
    pub converged: bool,
}

impl FlashResult {
    pub fn is_two_phase(&self) -> bool {
        self.phase_count == 2
    }

    pub fn warm_start(&self) -> Option<WarmStart> {
        self.is_two_phase().then(|| WarmStart {
            x: self.x.clone(),
            y: self.y.clone(),
            beta: self.beta,
        })
    }

    /// Short label used in diagnostics.
    pub fn state_label(&self) -> &'static str {
        match (self.phase_count, self.beta >= 0.5) {
            (2, _) => "two-phase",
            (_, true) => "vapor",
            (_, false) => "liquid",
        }
    }
}

/// Previous equilibrium used to seed a flash in place of Wilson K-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub tpd_min: f64,
    pub trial_composition: Vec<f64>,
    pub stable: bool,
    pub iterations: usize,
}

/// Wilson K-value estimate.
pub fn wilson_k(c: &Component, t: f64, p: f64) -> f64 {
    c.pc / p * (5.373 * (1.0 + c.omega) * (1.0 - c.tc / t)).exp()
}

/// Outcome of the Rachford-Rice solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RachfordRice {
    /// Root of the objective; may lie outside [0, 1] during iteration.
    Root(f64),
    /// No K_i straddles 1, so no split exists.
    SinglePhase,
}

fn rr_objective(z: &[f64], k: &[f64], beta: f64) -> (f64, f64) {
    z.iter().zip(k).fold((0.0, 0.0), |(f, df), (&zi, &ki)| {
        if zi == 0.0 {
            return (f, df);
        }
        let d = ki - 1.0;
        let den = 1.0 + beta * d;
        (f + zi * d / den, df - zi * d * d / (den * den))
    })
}

/// Vapor fraction from the Rachford-Rice equation on the open interval
/// (1/(1−K_max), 1/(1−K_min)).
pub fn rachford_rice(z: &[f64], k: &[f64]) -> RachfordRice {
    let active = || z.iter().zip(k).filter(|(zi, _)| **zi > 0.0).map(|(_, ki)| *ki);
    let k_max = active().fold(f64::NEG_INFINITY, f64::max);
    let k_min = active().fold(f64::INFINITY, f64::min);
    if !(k_max > 1.0 && k_min < 1.0) {
        return RachfordRice::SinglePhase;
    }
    let mut lo = 1.0 / (1.0 - k_max);
    let mut hi = 1.0 / (1.0 - k_min);
    let mut beta = 0.5f64.clamp(lo + 0.5 * (hi - lo) * 1e-3, hi - 0.5 * (hi - lo) * 1e-3);
    if !(beta > lo && beta < hi) {
        beta = 0.5 * (lo + hi);
    }
    for _ in 0..500 {
        let (f, df) = rr_objective(z, k, beta);
        if f.abs() < 1e-14 {
            break;
        }
        // f is strictly decreasing in beta
        if f > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let newton = beta - f / df;
        beta = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-16 * beta.abs().max(1.0) {
            break;
        }
    }
    RachfordRice::Root(beta)
}

/// EOS parameters of a fixed component set at one temperature.
#[derive(Debug, Clone)]
pub(crate) struct EosModel {
    t: f64,
    table: CrossEnergyTable,
    components: Vec<Component>,
}

impl EosModel {
    pub(crate) fn new(components: &[Component], t: f64, kij: &KijMatrix) -> Result<Self> {
        if kij.len() != components.len() {
            return Err(Error::InvalidInput(format!(
                "k_ij matrix has {} components, mixture has {}",
                kij.len(),
                components.len()
            )));
        }
        let pure = components
            .iter()
            .map(|c| pure_params(c, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(EosModel {
            t,
            table: cross_energy_table(&pure, kij)?,
            components: components.to_vec(),
        })
    }

    fn subset(&self, keep: &[usize]) -> EosModel {
        EosModel {
            t: self.t,
            table: self.table.subset(keep),
            components: keep.iter().map(|&i| self.components[i].clone()).collect(),
        }
    }

    fn state(&self, x: &[f64], p: f64, root: PhaseRoot) -> Result<PhaseState> {
        phase_state(&self.table, x, self.t, p, root)
    }

    /// Liquid-like (false) or vapor-like (true) identity of a single phase.
    fn is_vapor_like(&self, x: &[f64], p: f64) -> Result<bool> {
        let (a, b) = self.table.mix(x);
        let rt = GAS_CONSTANT * self.t;
        let (a_red, b_red) = (a * p / (rt * rt), b * p / rt);
        let roots = solve_cubic_z(a_red, b_red)?;
        let z = self.state(x, p, PhaseRoot::MinGibbs)?.z;
        Ok(if roots.has_two_branches() {
            z == roots.vapor_like()
        } else {
            z / b_red > PR_CRITICAL_VOLUME_RATIO
        })
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn reduced_tpd(w: &[f64], ln_phi: &[f64], d: &[f64]) -> f64 {
    w.iter()
        .zip(ln_phi)
        .zip(d)
        .filter(|((wi, _), _)| **wi > 0.0)
        .map(|((wi, lp), di)| wi * (wi.ln() + lp - di))
        .sum()
}

struct TrialOutcome {
    tpd_min: f64,
    composition: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// Trial-composition distance from the feed below which a trial is taken
/// to be collapsing onto the trivial solution.
const TRIVIAL_TRIAL_TOL: f64 = 1e-6;

/// Looser distance accepted as a trivial collapse once the iteration budget
/// is spent; near a critical point the collapse is too slow for the tight one.
const NEAR_TRIVIAL_TOL: f64 = 1e-4;

/// Cap on the dominant-eigenvalue extrapolation factor 1/(1 - lambda).
const MAX_DEM_FACTOR: f64 = 20.0;

/// Modified tangent-plane function of unnormalized trial amounts exp(ln_w).
fn modified_tpd(model: &EosModel, ln_w: &[f64], d: &[f64], p: f64) -> Result<f64> {
    let big_w: Vec<f64> = ln_w.iter().map(|l| l.exp()).collect();
    let st = model.state(&normalized(&big_w), p, PhaseRoot::MinGibbs)?;
    Ok(1.0
        + big_w
            .iter()
            .zip(ln_w)
            .zip(&st.ln_phi)
            .zip(d)
            .map(|(((wi, lw), lp), di)| wi * (lw + lp - di - 1.0))
            .sum::<f64>())
}

/// Successive substitution on ln W from the initial trial `init`, with a
/// dominant-eigenvalue extrapolation every fifth step when it lowers the
/// modified tangent-plane function.
fn run_trial(
    model: &EosModel,
    z: &[f64],
    d: &[f64],
    p: f64,
    init: Vec<f64>,
    opts: &FlashOptions,
) -> Result<TrialOutcome> {
    let mut ln_w: Vec<f64> = init.iter().map(|w| w.ln()).collect();
    let mut prev_delta: Option<Vec<f64>> = None;
    let mut best = TrialOutcome {
        tpd_min: f64::INFINITY,
        composition: z.to_vec(),
        converged: false,
        iterations: 0,
    };
    let mut last_w = z.to_vec();
    for iter in 1..=opts.stability_max_iter {
        let big_w: Vec<f64> = ln_w.iter().map(|l| l.exp()).collect();
        let w = normalized(&big_w);
        last_w.clone_from(&w);
        let st = model.state(&w, p, PhaseRoot::MinGibbs)?;
        let tpd = reduced_tpd(&w, &st.ln_phi, d);
        if tpd < best.tpd_min {
            best.tpd_min = tpd;
            best.composition = w.clone();
        }
        best.iterations = iter;
        let next: Vec<f64> = d.iter().zip(&st.ln_phi).map(|(di, lp)| di - lp).collect();
        let delta: Vec<f64> = next.iter().zip(&ln_w).map(|(a, b)| a - b).collect();
        let step = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if step < opts.stability_tol {
            best.converged = true;
            break;
        }
        let trivial = w.iter().zip(z).all(|(a, b)| (a - b).abs() < TRIVIAL_TRIAL_TOL)
            && (big_w.iter().sum::<f64>() - 1.0).abs() < TRIVIAL_TRIAL_TOL;
        if trivial {
            best.converged = true;
            break;
        }
        let mut candidate = next;
        if let (true, Some(prev)) = (iter % 5 == 0, &prev_delta) {
            let num: f64 = delta.iter().zip(prev).map(|(a, b)| a * b).sum();
            let den: f64 = prev.iter().map(|b| b * b).sum();
            let lambda = num / den;
            if lambda > 0.0 && lambda < 1.0 {
                let factor = (1.0 / (1.0 - lambda)).min(MAX_DEM_FACTOR);
                let jump: Vec<f64> = ln_w.iter().zip(&delta).map(|(l, dl)| l + dl * factor).collect();
                let tm_jump = modified_tpd(model, &jump, d, p).ok().filter(|v| v.is_finite());
                let tm_ss = modified_tpd(model, &candidate, d, p).ok();
                if let (Some(a), Some(b)) = (tm_jump, tm_ss) {
                    if a < b {
                        candidate = jump;
                    }
                }
            }
        }
        prev_delta = Some(delta);
        ln_w = candidate;
    }
    if !best.converged
        && best.tpd_min >= 0.0
        && last_w.iter().zip(z).all(|(a, b)| (a - b).abs() < NEAR_TRIVIAL_TOL)
    {
        best.converged = true;
    }
    // A trial that converged onto the feed carries no instability information.
    if best.tpd_min.abs() < 1e-12 {
        best.tpd_min = best.tpd_min.max(0.0);
    }
    Ok(best)
}

fn stability_on_model(
    model: &EosModel,
    z: &[f64],
    p: f64,
    seed_k: Option<&[f64]>,
    opts: &FlashOptions,
) -> Result<StabilityReport> {
    let feed = model.state(z, p, PhaseRoot::MinGibbs)?;
    let d: Vec<f64> = z.iter().zip(&feed.ln_phi).map(|(zi, lp)| zi.ln() + lp).collect();
    let k: Vec<f64> = match seed_k {
        Some(k) => k.to_vec(),
        None => model
            .components
            .iter()
            .map(|c| wilson_k(c, model.t, p))
            .collect(),
    };
    let vapor_init: Vec<f64> = z.iter().zip(&k).map(|(zi, ki)| zi * ki).collect();
    let liquid_init: Vec<f64> = z.iter().zip(&k).map(|(zi, ki)| zi / ki).collect();

    let mut iterations = 0;
    let mut best: Option<TrialOutcome> = None;
    let mut any_converged = false;
    for init in [vapor_init, liquid_init] {
        let out = run_trial(model, z, &d, p, init, opts)?;
        iterations += out.iterations;
        any_converged |= out.converged;
        let proven = out.tpd_min < opts.tpd_threshold;
        if best.as_ref().is_none_or(|b| out.tpd_min < b.tpd_min) {
            best = Some(out);
        }
        if proven {
            break;
        }
    }
    let best = best.expect("two trials were run");
    let stable = best.tpd_min >= opts.tpd_threshold;
    if stable && !any_converged {
        return Err(Error::IndeterminateStability(format!(
            "neither trial converged in {} iterations at P = {p} Pa (best tpd {:.3e} at {:?})",
            opts.stability_max_iter, best.tpd_min, best.composition
        )));
    }
    Ok(StabilityReport {
        tpd_min: best.tpd_min,
        trial_composition: best.composition,
        stable,
        iterations,
    })
}

/// Active (non-zero) component indices.
fn active_indices(z: &[f64]) -> Vec<usize> {
    z.iter()
        .enumerate()
        .filter(|(_, zi)| **zi > 0.0)
        .map(|(i, _)| i)
        .collect()
}

fn expand(v: &[f64], keep: &[usize], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (val, &i) in v.iter().zip(keep) {
        out[i] = *val;
    }
    out
}

/// Tangent-plane stability of the feed at (T, P).
pub fn stability_test(mix: &Mixture, t: f64, p: f64, kij: &KijMatrix) -> Result<StabilityReport> {
    stability_test_with(mix, t, p, kij, &FlashOptions::default())
}

pub fn stability_test_with(
    mix: &Mixture,
    t: f64,
    p: f64,
    kij: &KijMatrix,
    opts: &FlashOptions,
) -> Result<StabilityReport> {
    mix.validate()?;
    check_tp(t, p)?;
    let model = EosModel::new(&mix.components, t, kij)?;
    let keep = active_indices(&mix.z);
    let sub = model.subset(&keep);
    let z: Vec<f64> = normalized(&keep.iter().map(|&i| mix.z[i]).collect::<Vec<_>>());
    let mut report = stability_on_model(&sub, &z, p, None, opts)?;
    report.trial_composition = expand(&report.trial_composition, &keep, mix.len());
    Ok(report)
}

fn check_tp(t: f64, p: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0 && p.is_finite() && p > 0.0) {
        return Err(Error::Domain(format!(
            "temperature and pressure must be positive (T = {t}, P = {p})"
        )));
    }
    Ok(())
}

/// Two-phase PT flash with default options.
pub fn pt_flash(
    mix: &Mixture,
    t: f64,
    p: f64,
    kij: &KijMatrix,
    warm_start: Option<&WarmStart>,
) -> Result<FlashResult> {
    pt_flash_with(mix, t, p, kij, warm_start, &FlashOptions::default())
}

pub fn pt_flash_with(
    mix: &Mixture,
    t: f64,
    p: f64,
    kij: &KijMatrix,
    warm_start: Option<&WarmStart>,
    opts: &FlashOptions,
) -> Result<FlashResult> {
    mix.validate()?;
    check_tp(t, p)?;
    let model = EosModel::new(&mix.components, t, kij)?;
    flash_on_model(&model, &mix.z, p, warm_start, opts)
}

/// The feed as one phase on its minimum-Gibbs root; `z` may contain zeros.
pub(crate) fn single_phase_on_model(
    model: &EosModel,
    z_full: &[f64],
    p: f64,
    iterations: usize,
) -> Result<FlashResult> {
    let keep = active_indices(z_full);
    let sub = model.subset(&keep);
    let z = normalized(&keep.iter().map(|&i| z_full[i]).collect::<Vec<_>>());
    let st = sub.state(&z, p, PhaseRoot::MinGibbs)?;
    let vapor = sub.is_vapor_like(&z, p)?;
    let full = expand(&z, &keep, z_full.len());
    Ok(FlashResult {
        phase_count: 1,
        beta: if vapor { 1.0 } else { 0.0 },
        x: full.clone(),
        y: full,
        z_liquid: st.z,
        z_vapor: st.z,
        iterations,
        converged: true,
    })
}

/// Flash on a prebuilt model; `z` may contain zeros.
pub(crate) fn flash_on_model(
    model: &EosModel,
    z_full: &[f64],
    p: f64,
    warm_start: Option<&WarmStart>,
    opts: &FlashOptions,
) -> Result<FlashResult> {
    let n = z_full.len();
    let keep = active_indices(z_full);
    let sub = model.subset(&keep);
    let z = normalized(&keep.iter().map(|&i| z_full[i]).collect::<Vec<_>>());

    let single = |iterations: usize| single_phase_on_model(model, z_full, p, iterations);

    if keep.len() == 1 {
        return single(0);
    }

    let warm_k: Option<Vec<f64>> = warm_start.and_then(|ws| {
        let k: Vec<f64> = keep.iter().map(|&i| ws.y[i] / ws.x[i]).collect();
        k.iter().all(|v| v.is_finite() && *v > 0.0).then_some(k)
    });

    let stability = stability_on_model(&sub, &z, p, warm_k.as_deref(), opts)?;
    let mut iterations = stability.iterations;
    if stability.stable {
        return single(iterations);
    }

    // K-values implied by the unstable trial phase, used when the primary
    // initialization fails.
    let trial_k: Vec<f64> = {
        let w = &stability.trial_composition;
        let w: Vec<f64> = keep.iter().map(|&i| w[i]).collect();
        let w = if w.iter().sum::<f64>() > 0.0 { w } else { z.clone() };
        let vapor_trial = sub.is_vapor_like(&w, p)?;
        w.iter()
            .zip(&z)
            .map(|(wi, zi)| {
                let r = (wi / zi).max(1e-300);
                if vapor_trial {
                    r
                } else {
                    1.0 / r
                }
            })
            .collect()
    };
    let primary_k: Vec<f64> = warm_k.unwrap_or_else(|| {
        sub.components
            .iter()
            .map(|c| wilson_k(c, sub.t, p))
            .collect()
    });

    let mut attempt_inits = vec![primary_k, trial_k];
    let mut last_err = None;
    while !attempt_inits.is_empty() {
        let k0 = attempt_inits.remove(0);
        match split(&sub, &z, p, k0, opts) {
            Ok(mut s) => {
                iterations += s.iterations;
                if s.beta <= 0.0 || s.beta >= 1.0 {
                    log::debug!("split converged to beta = {} outside (0, 1); single phase", s.beta);
                    return single(iterations);
                }
                s.iterations = iterations;
                s.x = expand(&s.x, &keep, n);
                s.y = expand(&s.y, &keep, n);
                return Ok(s);
            }
            Err(SplitFailure::Trivial(it)) => {
                iterations += it;
                last_err = Some(Error::Degenerate(format!(
                    "phase split collapsed to the trivial solution at P = {p} Pa"
                )));
            }
            Err(SplitFailure::Error(e, it)) => {
                iterations += it;
                last_err = Some(e);
            }
        }
    }
    Err(last_err.expect("at least one split attempt"))
}

enum SplitFailure {
    Trivial(usize),
    Error(Error, usize),
}

/// Successive substitution from initial K-values `k0`.
/// Reduced Gibbs energy of the split implied by `ln_k`; `None` when the
/// K-values give no two-phase Rachford-Rice root or a state fails.
fn split_gibbs(model: &EosModel, z: &[f64], p: f64, ln_k: &[f64]) -> Option<f64> {
    let k: Vec<f64> = ln_k.iter().map(|l| l.exp()).collect();
    let RachfordRice::Root(beta) = rachford_rice(z, &k) else {
        return None;
    };
    let x = normalized(&z.iter().zip(&k).map(|(zi, ki)| zi / (1.0 + beta * (ki - 1.0))).collect::<Vec<_>>());
    let y = normalized(&x.iter().zip(&k).map(|(xi, ki)| xi * ki).collect::<Vec<_>>());
    let g = |w: &[f64]| -> Option<f64> {
        let st = model.state(w, p, PhaseRoot::MinGibbs).ok()?;
        Some(
            w.iter()
                .zip(&st.ln_phi)
                .filter(|(wi, _)| **wi > 0.0)
                .map(|(wi, lp)| wi * (wi.ln() + lp))
                .sum(),
        )
    };
    Some((1.0 - beta) * g(&x)? + beta * g(&y)?)
}

fn split(
    model: &EosModel,
    z: &[f64],
    p: f64,
    k0: Vec<f64>,
    opts: &FlashOptions,
) -> std::result::Result<FlashResult, SplitFailure> {
    let mut ln_k: Vec<f64> = k0.iter().map(|k| k.ln()).collect();
    let mut best_residual = f64::INFINITY;
    let mut last: Option<FlashResult> = None;
    let mut prev_delta: Option<Vec<f64>> = None;
    for iter in 1..=opts.flash_max_iter {
        let k: Vec<f64> = ln_k.iter().map(|l| l.exp()).collect();
        let beta = match rachford_rice(z, &k) {
            RachfordRice::Root(b) => b,
            RachfordRice::SinglePhase => return Err(SplitFailure::Trivial(iter)),
        };
        let x = normalized(
            &z.iter()
                .zip(&k)
                .map(|(zi, ki)| zi / (1.0 + beta * (ki - 1.0)))
                .collect::<Vec<_>>(),
        );
        let y = normalized(&x.iter().zip(&k).map(|(xi, ki)| xi * ki).collect::<Vec<_>>());
        if x.iter().zip(&y).all(|(a, b)| (a - b).abs() < opts.trivial_tol) {
            return Err(SplitFailure::Trivial(iter));
        }
        let liq = model
            .state(&x, p, PhaseRoot::MinGibbs)
            .map_err(|e| SplitFailure::Error(e, iter))?;
        let vap = model
            .state(&y, p, PhaseRoot::MinGibbs)
            .map_err(|e| SplitFailure::Error(e, iter))?;
        let residual = x
            .iter()
            .zip(&y)
            .zip(liq.ln_phi.iter().zip(&vap.ln_phi))
            .map(|((xi, yi), (pl, pv))| (xi.ln() + pl - yi.ln() - pv).abs())
            .fold(0.0, f64::max);
        best_residual = best_residual.min(residual);
        let state = FlashResult {
            phase_count: 2,
            beta,
            x,
            y,
            z_liquid: liq.z,
            z_vapor: vap.z,
            iterations: iter,
            converged: residual < opts.fugacity_tol,
        };
        if residual < opts.polish_tol {
            return Ok(state);
        }
        let next: Vec<f64> = liq.ln_phi.iter().zip(&vap.ln_phi).map(|(pl, pv)| pl - pv).collect();
        let delta: Vec<f64> = next.iter().zip(&ln_k).map(|(a, b)| a - b).collect();
        let mut candidate = next;
        if let (true, Some(prev)) = (iter % 5 == 0, &prev_delta) {
            let num: f64 = delta.iter().zip(prev).map(|(a, b)| a * b).sum();
            let den: f64 = prev.iter().map(|b| b * b).sum();
            let lambda = num / den;
            if lambda > 0.0 && lambda < 1.0 {
                let factor = (1.0 / (1.0 - lambda)).min(MAX_DEM_FACTOR);
                let jump: Vec<f64> = ln_k.iter().zip(&delta).map(|(l, dl)| l + dl * factor).collect();
                if let (Some(gj), Some(gs)) = (split_gibbs(model, z, p, &jump), split_gibbs(model, z, p, &candidate)) {
                    if gj.is_finite() && gj < gs {
                        candidate = jump;
                    }
                }
            }
        }
        prev_delta = Some(delta);
        ln_k = candidate;
        last = Some(state);
    }
    match last {
        Some(s) if s.converged => Ok(s),
        _ => Err(SplitFailure::Error(
            Error::NonConvergence {
                iterations: opts.flash_max_iter,
                context: format!(
                    "phase split at P = {p} Pa (best fugacity residual {best_residual:.3e}, last iterate {:?})",
                    last.map(|s| (s.beta, s.x, s.y))
                ),
            },
            opts.flash_max_iter,
        )),
    }
}
