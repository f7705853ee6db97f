//! Bubble- and dew-point pressures by bisection on the flash phase state,
//! and CO2-loading sweeps with optional warm starts.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flash::{flash_on_model, single_phase_on_model, EosModel, FlashOptions, FlashResult, Mixture, WarmStart};
use crate::mixing::KijMatrix;

/// Default pressure bracket, Pa.
pub const DEFAULT_BRACKET: (f64, f64) = (0.1e6, 40e6);
/// Bisection stops once the bracket is narrower than this, Pa.
pub const PRESSURE_TOL: f64 = 1e3;
/// Initial half-width of the warm-start bracket around the previous point, Pa.
const WARM_HALF_WIDTH: f64 = 1e6;

pub const CO2: &str = "CO2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaturationKind {
    Bubble,
    Dew,
}

impl SaturationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SaturationKind::Bubble => "bubble",
            SaturationKind::Dew => "dew",
        }
    }
}

impl fmt::Display for SaturationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SaturationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bubble" => Ok(SaturationKind::Bubble),
            "dew" => Ok(SaturationKind::Dew),
            _ => Err(Error::InvalidInput(format!(
                "unknown saturation kind {s:?} (expected bubble or dew)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Cold,
    Warm,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cold" => Ok(Strategy::Cold),
            "warm" => Ok(Strategy::Warm),
            _ => Err(Error::InvalidInput(format!("unknown strategy {s:?} (expected cold or warm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationPoint {
    pub temperature: f64,
    pub z_co2: f64,
    /// Detected kind of the crossing.
    pub kind: SaturationKind,
    /// Saturation pressure, Pa. NaN when not converged.
    pub pressure: f64,
    pub converged: bool,
    /// Flash iterations spent on this point.
    pub iterations: usize,
    /// Vapor fraction of the two-phase state nearest the boundary.
    pub edge_beta: Option<f64>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationCurve {
    pub temperature: f64,
    pub strategy: Strategy,
    pub points: Vec<SaturationPoint>,
}

impl SaturationCurve {
    pub fn total_iterations(&self) -> usize {
        self.points.iter().map(|p| p.iterations).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PhaseLabel {
    Liquid,
    Vapor,
    TwoPhase(f64),
}

impl PhaseLabel {
    fn of(f: &FlashResult) -> Self {
        match (f.phase_count, f.beta >= 0.5) {
            (2, _) => PhaseLabel::TwoPhase(f.beta),
            (_, true) => PhaseLabel::Vapor,
            (_, false) => PhaseLabel::Liquid,
        }
    }

    fn name(self) -> &'static str {
        match self {
            PhaseLabel::Liquid => "single-phase liquid",
            PhaseLabel::Vapor => "single-phase vapor",
            PhaseLabel::TwoPhase(_) => "two-phase",
        }
    }

    fn is_two_phase(self) -> bool {
        matches!(self, PhaseLabel::TwoPhase(_))
    }
}

struct Probe {
    label: PhaseLabel,
    warm: Option<WarmStart>,
    iterations: usize,
}

/// Fugacity tolerance for a split retried as a phase indicator. Only the
/// phase count matters there; stability has already proven the split.
const PROBE_FUGACITY_TOL: f64 = 1e-6;

/// Flash used as a phase indicator. A split that collapses onto the feed is
/// read as single phase; one that stalls near a critical point is retried
/// with a looser fugacity tolerance.
fn probe(
    model: &EosModel,
    z: &[f64],
    p: f64,
    warm: Option<&WarmStart>,
    opts: &FlashOptions,
) -> Result<Probe> {
    match flash_on_model(model, z, p, warm, opts) {
        Ok(f) => Ok(Probe {
            label: PhaseLabel::of(&f),
            warm: f.warm_start(),
            iterations: f.iterations,
        }),
        Err(Error::Degenerate(msg)) => {
            log::debug!("treating collapsed split at {p} Pa as single phase: {msg}");
            single_probe(model, z, p)
        }
        Err(Error::IndeterminateStability(msg)) => {
            // Raised only when no trial proved instability.
            log::debug!("treating unsettled stability at {p} Pa as single phase: {msg}");
            single_probe(model, z, p)
        }
        Err(Error::NonConvergence { .. }) if opts.fugacity_tol < PROBE_FUGACITY_TOL => {
            log::debug!("retrying stalled split at {p} Pa with a looser tolerance");
            probe(model, z, p, warm, &FlashOptions {
                fugacity_tol: PROBE_FUGACITY_TOL,
                ..*opts
            })
        }
        Err(e) => Err(Error::FlashAt {
            pressure: p,
            source: Box::new(e),
        }),
    }
}

fn single_probe(model: &EosModel, z: &[f64], p: f64) -> Result<Probe> {
    let single = single_phase_on_model(model, z, p, 0)?;
    Ok(Probe {
        label: PhaseLabel::of(&single),
        warm: None,
        iterations: single.iterations,
    })
}

fn co2_fraction(names: &[String], z: &[f64]) -> f64 {
    names
        .iter()
        .position(|n| n == CO2)
        .map_or(0.0, |i| z[i])
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    PhaseCount,
    Identity,
}

struct Bisection {
    pressure: f64,
    kind: SaturationKind,
    edge_beta: Option<f64>,
    iterations: usize,
    warm: Option<WarmStart>,
}

#[allow(clippy::too_many_arguments)]
fn bisect(
    model: &EosModel,
    z: &[f64],
    kind: SaturationKind,
    (mut p_lo, mut p_hi): (f64, f64),
    lo: Probe,
    hi: Probe,
    opts: &FlashOptions,
) -> Result<Bisection> {
    let active = z.iter().filter(|v| **v > 0.0).count();
    let mode = if lo.label.is_two_phase() != hi.label.is_two_phase() {
        Mode::PhaseCount
    } else if active == 1 && lo.label != hi.label {
        Mode::Identity
    } else {
        return Err(Error::Bracket {
            p_lo,
            p_hi,
            lo_state: lo.label.name().into(),
            hi_state: hi.label.name().into(),
        });
    };
    let lo_side = |l: PhaseLabel| -> bool {
        match mode {
            Mode::PhaseCount => l.is_two_phase() == lo.label.is_two_phase(),
            Mode::Identity => l == lo.label,
        }
    };
    let mut iterations = lo.iterations + hi.iterations;
    let mut warm = lo.warm.clone().or(hi.warm.clone());
    let mut edge_beta = match (lo.label, hi.label) {
        (PhaseLabel::TwoPhase(b), _) | (_, PhaseLabel::TwoPhase(b)) => Some(b),
        _ => None,
    };
    while p_hi - p_lo >= PRESSURE_TOL {
        let mid = 0.5 * (p_lo + p_hi);
        let pr = probe(model, z, mid, warm.as_ref(), opts)?;
        iterations += pr.iterations;
        if let PhaseLabel::TwoPhase(b) = pr.label {
            edge_beta = Some(b);
        }
        if pr.warm.is_some() {
            warm = pr.warm;
        }
        if lo_side(pr.label) {
            p_lo = mid;
        } else {
            p_hi = mid;
        }
    }
    let detected = match (mode, edge_beta) {
        (Mode::PhaseCount, Some(b)) if b > 0.5 => SaturationKind::Dew,
        (Mode::PhaseCount, Some(_)) => SaturationKind::Bubble,
        _ => kind,
    };
    Ok(Bisection {
        pressure: 0.5 * (p_lo + p_hi),
        kind: detected,
        edge_beta,
        iterations,
        warm,
    })
}

/// Downward scan points used when both bracket ends are single phase.
const SCAN_POINTS: usize = 40;

/// The highest-pressure phase boundary inside `bracket`.
///
/// Both ends single phase is common: below the lower dew point the feed is
/// vapor again. The two-phase band is then located by a logarithmic scan
/// down from the top.
fn upper_boundary(
    model: &EosModel,
    z: &[f64],
    kind: SaturationKind,
    (p_lo, p_hi): (f64, f64),
    warm: Option<&WarmStart>,
    opts: &FlashOptions,
) -> Result<Bisection> {
    let hi = probe(model, z, p_hi, warm, opts)?;
    let lo = probe(model, z, p_lo, warm, opts)?;
    let active = z.iter().filter(|v| **v > 0.0).count();
    if hi.label.is_two_phase() || lo.label.is_two_phase() || active == 1 {
        return bisect(model, z, kind, (p_lo, p_hi), lo, hi, opts);
    }
    let mut spent = lo.iterations + hi.iterations;
    let hi_label = hi.label;
    let mut upper = (p_hi, hi);
    for k in 1..SCAN_POINTS {
        let p = p_hi * (p_lo / p_hi).powf(k as f64 / SCAN_POINTS as f64);
        let seed = upper.1.warm.as_ref().or(warm);
        let pr = probe(model, z, p, seed, opts)?;
        spent += pr.iterations;
        if pr.label.is_two_phase() {
            let used = pr.iterations + upper.1.iterations;
            let mut b = bisect(model, z, kind, (p, upper.0), pr, upper.1, opts)?;
            b.iterations += spent - used;
            return Ok(b);
        }
        upper = (p, pr);
    }
    Err(Error::Bracket {
        p_lo,
        p_hi,
        lo_state: lo.label.name().into(),
        hi_state: hi_label.name().into(),
    })
}

fn check_bracket(bracket: (f64, f64)) -> Result<()> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "pressure bracket must satisfy 0 < p_lo < p_hi, got ({lo}, {hi})"
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn saturation_on_model(
    model: &EosModel,
    names: &[String],
    z: &[f64],
    t: f64,
    kind: SaturationKind,
    bracket: (f64, f64),
    warm: Option<&WarmStart>,
    opts: &FlashOptions,
) -> Result<(SaturationPoint, Option<WarmStart>)> {
    check_bracket(bracket)?;
    let b = upper_boundary(model, z, kind, bracket, warm, opts)?;
    let diagnostic = (b.kind != kind).then(|| {
        format!("requested {kind} point, crossing detected as {}", b.kind)
    });
    Ok((
        SaturationPoint {
            temperature: t,
            z_co2: co2_fraction(names, z),
            kind: b.kind,
            pressure: b.pressure,
            converged: true,
            iterations: b.iterations,
            edge_beta: b.edge_beta,
            diagnostic,
        },
        b.warm,
    ))
}

/// Saturation pressure of `mix` at temperature `t` inside `bracket` (Pa).
///
/// The bracket must put the mixture in different phase states at its two
/// ends. Inner flashes are seeded from the last accepted two-phase iterate,
/// starting from `warm_start` when given.
pub fn saturation_pressure(
    mix: &Mixture,
    t: f64,
    kind: SaturationKind,
    kij: &KijMatrix,
    bracket: (f64, f64),
    warm_start: Option<&FlashResult>,
) -> Result<SaturationPoint> {
    mix.validate()?;
    let model = EosModel::new(&mix.components, t, kij)?;
    let warm = warm_start.and_then(|f| f.warm_start());
    saturation_on_model(
        &model,
        &mix.names(),
        &mix.z,
        t,
        kind,
        bracket,
        warm.as_ref(),
        &FlashOptions::default(),
    )
    .map(|(p, _)| p)
}

/// Composition of the base oil diluted to (1 − z_co2) with CO2 at z_co2.
pub fn loaded_composition(base: &Mixture, co2_index: usize, z_co2: f64) -> Vec<f64> {
    let rest: f64 = base
        .z
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != co2_index)
        .map(|(_, v)| v)
        .sum();
    base.z
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i == co2_index {
                z_co2
            } else {
                v / rest * (1.0 - z_co2)
            }
        })
        .collect()
}

/// Sweeps saturation points along increasing CO2 loading.
///
/// Under [`Strategy::Warm`] every point starts from the previous converged
/// point: flashes are seeded with its phase compositions and the pressure
/// bracket is centered on its pressure. Failed points are recorded and the
/// sweep continues.
pub fn envelope_sweep(
    base_oil: &Mixture,
    co2_fractions: &[f64],
    t: f64,
    kij: &KijMatrix,
    strategy: Strategy,
) -> Result<SaturationCurve> {
    envelope_sweep_with(
        base_oil,
        co2_fractions,
        t,
        kij,
        strategy,
        DEFAULT_BRACKET,
        &FlashOptions::default(),
    )
}

pub fn envelope_sweep_with(
    base_oil: &Mixture,
    co2_fractions: &[f64],
    t: f64,
    kij: &KijMatrix,
    strategy: Strategy,
    bracket: (f64, f64),
    opts: &FlashOptions,
) -> Result<SaturationCurve> {
    base_oil.validate()?;
    check_bracket(bracket)?;
    let co2_index = base_oil.index_of(CO2).ok_or_else(|| {
        Error::InvalidInput("base oil must list a CO2 component (its fraction may be zero)".into())
    })?;
    if base_oil.z.iter().enumerate().all(|(i, v)| i == co2_index || *v == 0.0) {
        return Err(Error::InvalidInput("base oil has no non-CO2 component".into()));
    }
    for w in co2_fractions.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidInput("CO2 fractions must be strictly increasing".into()));
        }
    }
    if let Some(v) = co2_fractions.iter().find(|v| !(**v >= 0.0 && **v < 1.0)) {
        return Err(Error::InvalidInput(format!("CO2 fraction {v} outside [0, 1)")));
    }
    let model = EosModel::new(&base_oil.components, t, kij)?;
    let names = base_oil.names();

    let failed = |z_co2: f64, kind: SaturationKind, e: &Error| SaturationPoint {
        temperature: t,
        z_co2,
        kind,
        pressure: f64::NAN,
        converged: false,
        iterations: 0,
        edge_beta: None,
        diagnostic: Some(e.to_string()),
    };

    let points = match strategy {
        Strategy::Cold => co2_fractions
            .par_iter()
            .map(|&zc| {
                let z = loaded_composition(base_oil, co2_index, zc);
                saturation_on_model(&model, &names, &z, t, SaturationKind::Bubble, bracket, None, opts)
                    .map(|(p, _)| p)
                    .unwrap_or_else(|e| failed(zc, SaturationKind::Bubble, &e))
            })
            .collect(),
        Strategy::Warm => {
            let mut points = Vec::with_capacity(co2_fractions.len());
            let mut seed: Option<(f64, Option<WarmStart>)> = None;
            let mut kind = SaturationKind::Bubble;
            for &zc in co2_fractions {
                let z = loaded_composition(base_oil, co2_index, zc);
                let res = match &seed {
                    Some((p_prev, warm)) => warm_point(
                        &model, &names, &z, t, kind, bracket, *p_prev, warm.as_ref(), opts,
                    ),
                    None => saturation_on_model(&model, &names, &z, t, kind, bracket, None, opts),
                };
                match res {
                    Ok((pt, warm)) => {
                        kind = pt.kind;
                        seed = Some((pt.pressure, warm));
                        points.push(pt);
                    }
                    Err(e) => points.push(failed(zc, kind, &e)),
                }
            }
            points
        }
    };
    Ok(SaturationCurve {
        temperature: t,
        strategy,
        points,
    })
}

/// Saturation point searched in a bracket grown around `p_prev`.
#[allow(clippy::too_many_arguments)]
fn warm_point(
    model: &EosModel,
    names: &[String],
    z: &[f64],
    t: f64,
    kind: SaturationKind,
    bracket: (f64, f64),
    p_prev: f64,
    warm: Option<&WarmStart>,
    opts: &FlashOptions,
) -> Result<(SaturationPoint, Option<WarmStart>)> {
    let mut half = WARM_HALF_WIDTH;
    let mut spent = 0;
    loop {
        let lo_p = (p_prev - half).max(bracket.0);
        let hi_p = (p_prev + half).min(bracket.1);
        if lo_p <= bracket.0 && hi_p >= bracket.1 {
            let (mut pt, w) = saturation_on_model(model, names, z, t, kind, bracket, warm, opts)?;
            pt.iterations += spent;
            return Ok((pt, w));
        }
        let lo = probe(model, z, lo_p, warm, opts)?;
        let hi = probe(model, z, hi_p, lo.warm.as_ref().or(warm), opts)?;
        spent += lo.iterations + hi.iterations;
        if lo.label.is_two_phase() && !hi.label.is_two_phase() {
            let (lo_iter, hi_iter) = (lo.iterations, hi.iterations);
            let mut b = bisect(model, z, kind, (lo_p, hi_p), lo, hi, opts)?;
            b.iterations += spent - lo_iter - hi_iter;
            let diagnostic = (b.kind != kind)
                .then(|| format!("crossing changed from {kind} to {}", b.kind));
            return Ok((
                SaturationPoint {
                    temperature: t,
                    z_co2: co2_fraction(names, z),
                    kind: b.kind,
                    pressure: b.pressure,
                    converged: true,
                    iterations: b.iterations,
                    edge_beta: b.edge_beta,
                    diagnostic,
                },
                b.warm,
            ));
        }
        half *= 4.0;
    }
}
