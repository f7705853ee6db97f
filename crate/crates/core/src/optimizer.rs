//! Calibration of the CO2-CH4 interaction parameter against measured
//! saturation pressures.
//!
//! The cost of a candidate k is a metric over (model, experiment) pressure
//! pairs in MPa. Two minimizers are provided: a two-stage grid (step 0.01
//! over [-0.2, 0.2], then step 0.001 within ±0.01 of the coarse argmin) and
//! golden-section search for costs known to be unimodal.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flash::{EosModel, FlashOptions, Mixture, WarmStart};
use crate::metrics::{evaluate, MetricKind, MetricReport, PairedSeries};
use crate::mixing::{build_kij_matrix, GroupInteractionTable, KijOverride};
use crate::saturation::{
    loaded_composition, saturation_on_model, SaturationKind, SaturationPoint, Strategy, CO2,
    DEFAULT_BRACKET,
};

/// Search interval of the grid, in thousandths.
const GRID_MIN_MILLI: i64 = -200;
const GRID_MAX_MILLI: i64 = 200;
const COARSE_STEP_MILLI: i64 = 10;
const REFINE_HALF_WIDTH_MILLI: i64 = 10;

/// Temperatures closer than this are one isotherm, K.
const ISOTHERM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalRecord {
    /// K.
    pub temperature: f64,
    pub z_co2: f64,
    pub kind: SaturationKind,
    /// MPa.
    pub p_exp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalDataset {
    pub fluid: String,
    pub records: Vec<ExperimentalRecord>,
}

impl ExperimentalDataset {
    pub fn new(fluid: impl Into<String>, records: Vec<ExperimentalRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !(r.p_exp.is_finite() && r.p_exp > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "record {}: pressure must be positive, got {}",
                    i + 1,
                    r.p_exp
                )));
            }
            if !(r.z_co2 >= 0.0 && r.z_co2 < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "record {}: z_CO2 {} outside [0, 1)",
                    i + 1,
                    r.z_co2
                )));
            }
            if !(r.temperature.is_finite() && r.temperature > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "record {}: temperature must be positive",
                    i + 1
                )));
            }
        }
        Ok(ExperimentalDataset {
            fluid: fluid.into(),
            records,
        })
    }

    /// Distinct temperatures, ascending.
    pub fn isotherms(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = Vec::new();
        for r in &self.records {
            if !ts.iter().any(|t| (t - r.temperature).abs() < ISOTHERM_TOL) {
                ts.push(r.temperature);
            }
        }
        ts.sort_by(f64::total_cmp);
        ts
    }

    /// Records at temperature `t`, sorted by CO2 loading.
    pub fn at(&self, t: f64) -> Vec<&ExperimentalRecord> {
        let mut v: Vec<_> = self
            .records
            .iter()
            .filter(|r| (r.temperature - t).abs() < ISOTHERM_TOL)
            .collect();
        v.sort_by(|a, b| a.z_co2.total_cmp(&b.z_co2));
        v
    }
}

/// Everything besides k that the cost depends on.
#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    /// Base oil including a CO2 entry (fraction ignored).
    pub base_oil: Mixture,
    pub table: Arc<GroupInteractionTable>,
    /// The pair whose k_ij is optimized.
    pub pair: (String, String),
    /// Other fixed overrides.
    pub overrides: Vec<KijOverride>,
    pub metric: MetricKind,
    pub strategy: Strategy,
    pub bracket: (f64, f64),
    pub flash: FlashOptions,
}

impl CalibrationConfig {
    pub fn new(base_oil: Mixture, table: Arc<GroupInteractionTable>) -> Self {
        CalibrationConfig {
            base_oil,
            table,
            pair: (CO2.to_string(), "CH4".to_string()),
            overrides: Vec::new(),
            metric: MetricKind::Mse,
            strategy: Strategy::Warm,
            bracket: DEFAULT_BRACKET,
            flash: FlashOptions::default(),
        }
    }

    fn co2_index(&self) -> Result<usize> {
        self.base_oil
            .index_of(CO2)
            .ok_or_else(|| Error::InvalidInput("base oil must list a CO2 component".into()))
    }

    /// k of the optimized pair at `t` before any candidate is applied.
    pub fn baseline_kij(&self, t: f64) -> Result<f64> {
        let kij = build_kij_matrix(&self.base_oil.components, t, &self.table, &self.overrides)?;
        let (a, b) = &self.pair;
        match (kij.index_of(a), kij.index_of(b)) {
            (Some(i), Some(j)) if i != j => Ok(kij.get(i, j)),
            _ => Err(Error::InvalidInput(format!("optimized pair {a}:{b} is not in the base oil"))),
        }
    }

    /// Model saturation points at `k`, one per (z_CO2, kind) request,
    /// in request order. Requests must be sorted by loading for warm starts
    /// to help.
    pub fn predict(
        &self,
        k: Option<f64>,
        t: f64,
        requests: &[(f64, SaturationKind)],
    ) -> Result<Vec<Result<SaturationPoint>>> {
        let co2 = self.co2_index()?;
        let mut overrides = self.overrides.clone();
        if let Some(k) = k {
            if !k.is_finite() {
                return Err(Error::InvalidInput(format!("candidate k must be finite, got {k}")));
            }
            overrides.push(KijOverride::new(self.pair.0.clone(), self.pair.1.clone(), k));
        }
        let kij = build_kij_matrix(&self.base_oil.components, t, &self.table, &overrides)?;
        let model = EosModel::new(&self.base_oil.components, t, &kij)?;
        let names = self.base_oil.names();
        let mut warm: Option<WarmStart> = None;
        let mut out = Vec::with_capacity(requests.len());
        for &(zc, kind) in requests {
            let z = loaded_composition(&self.base_oil, co2, zc);
            let seed = match self.strategy {
                Strategy::Warm => warm.as_ref(),
                Strategy::Cold => None,
            };
            let res = saturation_on_model(&model, &names, &z, t, kind, self.bracket, seed, &self.flash);
            out.push(res.map(|(pt, w)| {
                if w.is_some() {
                    warm = w;
                }
                pt
            }));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub z_co2: f64,
    pub kind: SaturationKind,
    pub p_exp: f64,
    pub p_model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub z_co2: f64,
    pub kind: SaturationKind,
    pub reason: String,
}

/// Cost of one candidate k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEvaluation {
    pub k: f64,
    pub metric: MetricKind,
    pub cost: f64,
    pub residuals: Vec<PointResidual>,
    pub failures: Vec<PointFailure>,
    pub report: Option<MetricReport>,
}

impl CostEvaluation {
    /// An evaluation carrying only a scalar cost.
    pub fn scalar(k: f64, metric: MetricKind, cost: f64) -> Self {
        CostEvaluation {
            k,
            metric,
            cost,
            residuals: Vec::new(),
            failures: Vec::new(),
            report: None,
        }
    }
}

/// Cost of `k` on the records of `data` at temperature `t`.
///
/// Points whose saturation pressure cannot be computed are left out of the
/// metric and listed in `failures`.
pub fn cost(k: f64, data: &ExperimentalDataset, t: f64, config: &CalibrationConfig) -> Result<CostEvaluation> {
    cost_inner(Some(k), k, data, t, config)
}

/// Cost with the optimized pair left at its group-contribution value.
pub fn baseline_cost(data: &ExperimentalDataset, t: f64, config: &CalibrationConfig) -> Result<CostEvaluation> {
    let k = config.baseline_kij(t)?;
    cost_inner(None, k, data, t, config)
}

fn cost_inner(
    candidate: Option<f64>,
    k: f64,
    data: &ExperimentalDataset,
    t: f64,
    config: &CalibrationConfig,
) -> Result<CostEvaluation> {
    let records = data.at(t);
    if records.is_empty() {
        return Err(Error::InvalidInput(format!("dataset has no records at {t} K")));
    }
    let requests: Vec<(f64, SaturationKind)> = records.iter().map(|r| (r.z_co2, r.kind)).collect();
    let predicted = config.predict(candidate, t, &requests)?;
    let mut residuals = Vec::new();
    let mut failures = Vec::new();
    for (r, p) in records.iter().zip(predicted) {
        match p {
            Ok(pt) if pt.converged && pt.pressure.is_finite() => residuals.push(PointResidual {
                z_co2: r.z_co2,
                kind: r.kind,
                p_exp: r.p_exp,
                p_model: pt.pressure / 1e6,
            }),
            Ok(pt) => failures.push(PointFailure {
                z_co2: r.z_co2,
                kind: r.kind,
                reason: pt.diagnostic.unwrap_or_else(|| "not converged".into()),
            }),
            Err(e) => failures.push(PointFailure {
                z_co2: r.z_co2,
                kind: r.kind,
                reason: e.to_string(),
            }),
        }
    }
    if residuals.is_empty() {
        return Err(Error::CostUndefined {
            k,
            failures: failures.len(),
        });
    }
    let series = PairedSeries::new(
        residuals.iter().map(|r| r.p_model).collect(),
        residuals.iter().map(|r| r.p_exp).collect(),
    )?;
    let report = evaluate(&series)?;
    Ok(CostEvaluation {
        k,
        metric: config.metric,
        cost: report.get(config.metric),
        residuals,
        failures,
        report: Some(report),
    })
}

/// A scalar cost over candidate k values.
pub trait Objective: Sync {
    fn evaluate(&self, k: f64) -> Result<CostEvaluation>;
}

impl<F> Objective for F
where
    F: Fn(f64) -> Result<CostEvaluation> + Sync,
{
    fn evaluate(&self, k: f64) -> Result<CostEvaluation> {
        self(k)
    }
}

/// The model cost bound to a dataset and isotherm.
pub struct DatasetObjective<'a> {
    pub data: &'a ExperimentalDataset,
    pub temperature: f64,
    pub config: &'a CalibrationConfig,
}

impl Objective for DatasetObjective<'_> {
    fn evaluate(&self, k: f64) -> Result<CostEvaluation> {
        cost(k, self.data, self.temperature, self.config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Coarse,
    Refined,
    Golden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Grid,
    Golden,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "grid" => Ok(Method::Grid),
            "golden" => Ok(Method::Golden),
            _ => Err(Error::InvalidInput(format!("unknown method {s:?} (expected grid or golden)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: Stage,
    /// Taken from an earlier stage instead of re-evaluated.
    pub reused: bool,
    pub evaluation: CostEvaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub method: Method,
    pub k_opt: f64,
    pub cost_opt: f64,
    pub stage: Stage,
    pub trace: Vec<TraceEntry>,
    /// Distinct cost evaluations performed.
    pub evaluation_count: usize,
    pub warnings: Vec<String>,
    /// Golden section detected a non-unimodal cost and reran as a grid.
    pub fell_back_to_grid: bool,
}

impl OptimizationResult {
    /// The trace sorted by k with duplicates removed.
    pub fn cost_curve(&self) -> Vec<(f64, f64)> {
        let mut m: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
        for e in &self.trace {
            let key = (e.evaluation.k * 1e9).round() as i64;
            m.insert(key, (e.evaluation.k, e.evaluation.cost));
        }
        m.into_values().collect()
    }

    pub fn best(&self) -> Option<&CostEvaluation> {
        self.trace
            .iter()
            .map(|e| &e.evaluation)
            .find(|e| e.k == self.k_opt && e.cost == self.cost_opt)
    }
}

/// Lower cost wins; ties go to the smaller k.
fn better(a: &CostEvaluation, b: &CostEvaluation) -> bool {
    a.cost < b.cost || (a.cost == b.cost && a.k < b.k)
}

/// Evaluate, turning an undefined cost into +∞ so one bad candidate does not
/// abort a scan.
fn evaluate_or_inf<O: Objective + ?Sized>(obj: &O, k: f64, metric: MetricKind) -> Result<CostEvaluation> {
    match obj.evaluate(k) {
        Ok(e) => Ok(e),
        Err(Error::CostUndefined { failures, .. }) => {
            let mut e = CostEvaluation::scalar(k, metric, f64::INFINITY);
            e.failures.push(PointFailure {
                z_co2: f64::NAN,
                kind: SaturationKind::Bubble,
                reason: format!("cost undefined: all {failures} points failed"),
            });
            Ok(e)
        }
        Err(e) => Err(e),
    }
}

fn milli_to_k(m: i64) -> f64 {
    m as f64 / 1000.0
}

/// Two-stage grid search over k ∈ [-0.2, 0.2].
pub fn grid_search<O: Objective + ?Sized>(obj: &O) -> Result<OptimizationResult> {
    grid_search_with_metric(obj, MetricKind::Mse)
}

pub fn grid_search_with_metric<O: Objective + ?Sized>(
    obj: &O,
    metric: MetricKind,
) -> Result<OptimizationResult> {
    let coarse_milli: Vec<i64> = (GRID_MIN_MILLI / COARSE_STEP_MILLI..=GRID_MAX_MILLI / COARSE_STEP_MILLI)
        .map(|i| i * COARSE_STEP_MILLI)
        .collect();
    let coarse: Vec<CostEvaluation> = coarse_milli
        .par_iter()
        .map(|&m| evaluate_or_inf(obj, milli_to_k(m), metric))
        .collect::<Result<_>>()?;
    let mut evaluation_count = coarse.len();

    let mut best_idx = 0;
    for (i, e) in coarse.iter().enumerate() {
        if better(e, &coarse[best_idx]) {
            best_idx = i;
        }
    }
    if !coarse[best_idx].cost.is_finite() {
        return Err(Error::CostUndefined {
            k: coarse[best_idx].k,
            failures: coarse.len(),
        });
    }
    let center = coarse_milli[best_idx];
    let mut warnings = Vec::new();
    if center == GRID_MIN_MILLI || center == GRID_MAX_MILLI {
        warnings.push(format!(
            "coarse minimum at the interval edge k = {}; the true minimum may lie outside [-0.2, 0.2]",
            milli_to_k(center)
        ));
    }

    let cached: BTreeMap<i64, &CostEvaluation> =
        coarse_milli.iter().copied().zip(coarse.iter()).collect();
    let refine_milli: Vec<i64> = (center - REFINE_HALF_WIDTH_MILLI..=center + REFINE_HALF_WIDTH_MILLI)
        .filter(|m| (GRID_MIN_MILLI..=GRID_MAX_MILLI).contains(m))
        .collect();
    let fresh: Vec<i64> = refine_milli.iter().copied().filter(|m| !cached.contains_key(m)).collect();
    let fresh_evals: Vec<CostEvaluation> = fresh
        .par_iter()
        .map(|&m| evaluate_or_inf(obj, milli_to_k(m), metric))
        .collect::<Result<_>>()?;
    evaluation_count += fresh_evals.len();
    let fresh_map: BTreeMap<i64, CostEvaluation> = fresh.into_iter().zip(fresh_evals).collect();

    let mut trace: Vec<TraceEntry> = coarse
        .iter()
        .map(|e| TraceEntry {
            stage: Stage::Coarse,
            reused: false,
            evaluation: e.clone(),
        })
        .collect();
    for m in &refine_milli {
        let (evaluation, reused) = match cached.get(m) {
            Some(e) => ((*e).clone(), true),
            None => (fresh_map[m].clone(), false),
        };
        trace.push(TraceEntry {
            stage: Stage::Refined,
            reused,
            evaluation,
        });
    }

    let best = trace
        .iter()
        .map(|t| &t.evaluation)
        .fold(None::<&CostEvaluation>, |acc, e| match acc {
            Some(b) if !better(e, b) => Some(b),
            _ => Some(e),
        })
        .expect("trace is non-empty");
    Ok(OptimizationResult {
        method: Method::Grid,
        k_opt: best.k,
        cost_opt: best.cost,
        stage: Stage::Refined,
        evaluation_count,
        trace,
        warnings,
        fell_back_to_grid: false,
    })
}

/// True when some sampled point lies above a sample on each side of it,
/// which no unimodal function allows. Excesses below a thousandth of the
/// sampled cost spread are treated as solver noise.
fn breaks_unimodality(trace: &[TraceEntry]) -> bool {
    let mut pts: Vec<(f64, f64)> = trace.iter().map(|t| (t.evaluation.k, t.evaluation.cost)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let finite = pts.iter().map(|p| p.1).filter(|c| c.is_finite());
    let spread = finite.clone().fold(f64::NEG_INFINITY, f64::max) - finite.fold(f64::INFINITY, f64::min);
    let margin = if spread.is_finite() { 1e-3 * spread } else { 0.0 };
    let n = pts.len();
    let mut right_min = vec![f64::INFINITY; n + 1];
    for i in (0..n).rev() {
        right_min[i] = right_min[i + 1].min(pts[i].1);
    }
    let mut left_min = f64::INFINITY;
    for i in 0..n {
        if pts[i].1 - left_min > margin && pts[i].1 - right_min[i + 1] > margin {
            return true;
        }
        left_min = left_min.min(pts[i].1);
    }
    false
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on `bracket` until its width is below `tol`.
///
/// The edges are evaluated too, so a monotone cost returns the better edge.
/// A sample lying above samples on both of its sides proves the cost is not
/// unimodal; the search then falls back to [`grid_search`].
pub fn golden_section<O: Objective + ?Sized>(
    obj: &O,
    bracket: (f64, f64),
    tol: f64,
) -> Result<OptimizationResult> {
    golden_section_with_metric(obj, bracket, tol, MetricKind::Mse)
}

pub fn golden_section_with_metric<O: Objective + ?Sized>(
    obj: &O,
    bracket: (f64, f64),
    tol: f64,
    metric: MetricKind,
) -> Result<OptimizationResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "golden section needs lo < hi and tol > 0, got ({lo}, {hi}), tol {tol}"
        )));
    }
    let mut trace: Vec<TraceEntry> = Vec::new();
    let eval = |k: f64, trace: &mut Vec<TraceEntry>| -> Result<f64> {
        let e = evaluate_or_inf(obj, k, metric)?;
        let c = e.cost;
        trace.push(TraceEntry {
            stage: Stage::Golden,
            reused: false,
            evaluation: e,
        });
        Ok(c)
    };

    eval(lo, &mut trace)?;
    eval(hi, &mut trace)?;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1, &mut trace)?;
    let mut f2 = eval(x2, &mut trace)?;
    let mut non_unimodal = breaks_unimodality(&trace);

    while !non_unimodal && hi - lo >= tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            if hi - lo < tol {
                break;
            }
            f1 = eval(x1, &mut trace)?;
            non_unimodal = breaks_unimodality(&trace);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            if hi - lo < tol {
                break;
            }
            f2 = eval(x2, &mut trace)?;
            non_unimodal = breaks_unimodality(&trace);
        }
    }

    if non_unimodal {
        let mut grid = grid_search_with_metric(obj, metric)?;
        grid.evaluation_count += trace.len();
        grid.fell_back_to_grid = true;
        grid.warnings.push(format!(
            "cost is not unimodal on [{}, {}]; fell back to grid search",
            bracket.0, bracket.1
        ));
        return Ok(grid);
    }

    let best = trace
        .iter()
        .map(|t| &t.evaluation)
        .fold(None::<&CostEvaluation>, |acc, e| match acc {
            Some(b) if !better(e, b) => Some(b),
            _ => Some(e),
        })
        .expect("trace is non-empty");
    if !best.cost.is_finite() {
        return Err(Error::CostUndefined {
            k: best.k,
            failures: trace.len(),
        });
    }
    Ok(OptimizationResult {
        method: Method::Golden,
        k_opt: best.k,
        cost_opt: best.cost,
        stage: Stage::Golden,
        evaluation_count: trace.len(),
        trace,
        warnings: Vec::new(),
        fell_back_to_grid: false,
    })
}

/// Grid search of the model cost on one isotherm.
pub fn grid_search_dataset(
    data: &ExperimentalDataset,
    t: f64,
    config: &CalibrationConfig,
) -> Result<OptimizationResult> {
    let obj = DatasetObjective {
        data,
        temperature: t,
        config,
    };
    grid_search_with_metric(&obj, config.metric)
}

pub fn golden_section_dataset(
    data: &ExperimentalDataset,
    t: f64,
    config: &CalibrationConfig,
    bracket: (f64, f64),
    tol: f64,
) -> Result<OptimizationResult> {
    let obj = DatasetObjective {
        data,
        temperature: t,
        config,
    };
    golden_section_with_metric(&obj, bracket, tol, config.metric)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub(target: f64) -> impl Fn(f64) -> Result<CostEvaluation> + Sync {
        move |k| Ok(CostEvaluation::scalar(k, MetricKind::Mse, (k - target).powi(2)))
    }

    #[test]
    fn grid_hits_on_grid_minimum_exactly() {
        let r = grid_search(&stub(0.107)).unwrap();
        assert_eq!(r.k_opt, 0.107);
        let coarse = r.trace.iter().filter(|t| t.stage == Stage::Coarse).count();
        let refined = r.trace.iter().filter(|t| t.stage == Stage::Refined).count();
        assert_eq!((coarse, refined), (41, 21));
        assert_eq!(r.evaluation_count, 41 + 18);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn grid_off_grid_minimum_within_half_step() {
        let r = grid_search(&stub(0.1074)).unwrap();
        assert_eq!(r.k_opt, 0.107);
        assert!((r.k_opt - 0.1074).abs() <= 0.0005);
    }

    #[test]
    fn grid_ties_go_to_smaller_k() {
        let r = grid_search(&stub(0.1075)).unwrap();
        // 0.107 and 0.108 are equidistant up to rounding; force an exact tie
        let tie = |k: f64| Ok(CostEvaluation::scalar(k, MetricKind::Mse, if (0.1..=0.11).contains(&k) { 0.0 } else { 1.0 }));
        let t = grid_search(&tie).unwrap();
        assert_eq!(t.k_opt, 0.1);
        assert!((r.k_opt - 0.1075).abs() <= 0.0005 + 1e-12);
    }

    #[test]
    fn grid_boundary_warning() {
        let r = grid_search(&stub(0.5)).unwrap();
        assert_eq!(r.k_opt, 0.2);
        assert_eq!(r.warnings.len(), 1);
        assert!(r.k_opt.abs() <= 0.2);
    }

    #[test]
    fn golden_quadratic() {
        let r = golden_section(&stub(0.107), (-0.2, 0.2), 0.001).unwrap();
        assert!((r.k_opt - 0.107).abs() < 0.001);
        // log(0.4/0.001)/log(1/0.618) = 12.45 reductions, plus the four seeds
        assert!(r.evaluation_count <= 30);
        assert!(r.evaluation_count < 62);
        let g = grid_search(&stub(0.107)).unwrap();
        assert!((g.k_opt - r.k_opt).abs() <= 0.001);
    }

    #[test]
    fn golden_monotone_returns_edge() {
        let r = golden_section(&|k: f64| Ok(CostEvaluation::scalar(k, MetricKind::Mse, k)), (-0.2, 0.2), 0.001)
            .unwrap();
        assert_eq!(r.k_opt, -0.2);
        let r = golden_section(&|k: f64| Ok(CostEvaluation::scalar(k, MetricKind::Mse, -k)), (-0.2, 0.2), 0.001)
            .unwrap();
        assert_eq!(r.k_opt, 0.2);
    }

    #[test]
    fn golden_falls_back_on_bimodal_cost() {
        let bimodal = |k: f64| {
            Ok(CostEvaluation::scalar(
                k,
                MetricKind::Mse,
                ((k + 0.1).powi(2)).min((k - 0.15).powi(2) - 0.001) + 0.01 * (k * 40.0).sin().abs(),
            ))
        };
        let r = golden_section(&bimodal, (-0.2, 0.2), 0.001).unwrap();
        assert!(r.fell_back_to_grid);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn undefined_costs_are_skipped() {
        let partial = |k: f64| {
            if k < 0.0 {
                Err(Error::CostUndefined { k, failures: 3 })
            } else {
                Ok(CostEvaluation::scalar(k, MetricKind::Mse, (k - 0.05).powi(2)))
            }
        };
        let r = grid_search(&partial).unwrap();
        assert_eq!(r.k_opt, 0.05);
        let none = |k: f64| Err(Error::CostUndefined { k, failures: 3 });
        assert!(grid_search(&none).is_err());
    }

    #[test]
    fn dataset_validation() {
        let rec = |p: f64, z: f64| ExperimentalRecord {
            temperature: 323.15,
            z_co2: z,
            kind: SaturationKind::Bubble,
            p_exp: p,
        };
        assert!(ExperimentalDataset::new("x", vec![rec(15.3, 0.2)]).is_ok());
        assert!(ExperimentalDataset::new("x", vec![rec(-1.0, 0.2)]).is_err());
        assert!(ExperimentalDataset::new("x", vec![rec(1.0, 1.0)]).is_err());
        let d = ExperimentalDataset::new("x", vec![rec(2.0, 0.4), rec(1.0, 0.2)]).unwrap();
        assert_eq!(d.isotherms(), vec![323.15]);
        assert_eq!(d.at(323.15)[0].z_co2, 0.2);
    }
}
