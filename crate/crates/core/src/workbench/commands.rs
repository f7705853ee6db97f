//! Command implementations. Each returns its artifacts as text so the CLI can
//! print or persist them; nothing here touches the filesystem.

use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::flash::{pt_flash, stability_test, FlashResult, Mixture, StabilityReport};
use crate::metrics::{evaluate, MetricKind, MetricReport, PairedSeries};
use crate::mixing::{build_kij_matrix, GroupInteractionTable, KijMatrix, KijOverride, Provenance};
use crate::optimizer::{
    baseline_cost, golden_section_dataset, grid_search_dataset, CalibrationConfig, CostEvaluation,
    ExperimentalDataset, Method, OptimizationResult,
};
use crate::saturation::{envelope_sweep, SaturationCurve, Strategy};

/// Bracket and tolerance of golden-section fits.
pub const GOLDEN_BRACKET: (f64, f64) = (-0.2, 0.2);
pub const GOLDEN_TOL: f64 = 5e-4;

/// A named text file produced by a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: impl Into<String>, contents: String) -> Self {
        Artifact {
            name: name.into(),
            contents,
        }
    }
}

/// How much of a command's work succeeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Complete,
    Partial,
    Failed,
}

/// Interaction data shared by all commands.
#[derive(Debug, Clone)]
pub struct ModelContext {
    pub table: Arc<GroupInteractionTable>,
    pub overrides: Vec<KijOverride>,
}

impl ModelContext {
    pub fn bundled() -> Self {
        ModelContext {
            table: Arc::new(GroupInteractionTable::bundled()),
            overrides: Vec::new(),
        }
    }

    pub fn kij(&self, mix: &Mixture, t: f64) -> Result<KijMatrix> {
        build_kij_matrix(&mix.components, t, &self.table, &self.overrides)
    }
}

fn csv_text(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

fn json_text<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

/// Pressure as a field, empty when unknown.
fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

/// Full k_ij matrices at each temperature, plus their provenance.
pub fn cmd_kij(fluid: &Mixture, temperatures: &[f64], ctx: &ModelContext) -> Result<Vec<Artifact>> {
    if temperatures.is_empty() {
        return Err(Error::InvalidInput("no temperatures given".into()));
    }
    let names = fluid.names();
    let mut header = vec!["T_K".to_string(), "component".to_string()];
    header.extend(names.iter().cloned());
    let mut values = vec![header.clone()];
    let mut prov = vec![header];
    for &t in temperatures {
        let k = ctx.kij(fluid, t)?;
        for (i, name) in names.iter().enumerate() {
            let mut v = vec![t.to_string(), name.clone()];
            let mut p = v.clone();
            for j in 0..names.len() {
                v.push(k.get(i, j).to_string());
                p.push(k.provenance(i, j).as_str().to_string());
            }
            values.push(v);
            prov.push(p);
        }
    }
    Ok(vec![
        Artifact::new("kij.csv", csv_text(values)),
        Artifact::new("kij_provenance.csv", csv_text(prov)),
    ])
}

#[derive(Serialize)]
struct FlashReport<'a> {
    temperature_k: f64,
    pressure_mpa: f64,
    components: Vec<String>,
    z: &'a [f64],
    state: &'static str,
    stability: &'a StabilityReport,
    result: &'a FlashResult,
}

/// Stability test and PT flash at one state; the primary artifact is JSON.
pub fn cmd_flash(fluid: &Mixture, t: f64, p_mpa: f64, ctx: &ModelContext) -> Result<Vec<Artifact>> {
    if !(p_mpa.is_finite() && p_mpa > 0.0) {
        return Err(Error::InvalidInput(format!("pressure must be positive, got {p_mpa}")));
    }
    let kij = ctx.kij(fluid, t)?;
    let p = p_mpa * 1e6;
    let stability = stability_test(fluid, t, p, &kij)?;
    let result = pt_flash(fluid, t, p, &kij, None)?;
    let report = FlashReport {
        temperature_k: t,
        pressure_mpa: p_mpa,
        components: fluid.names(),
        z: &fluid.z,
        state: result.state_label(),
        stability: &stability,
        result: &result,
    };
    Ok(vec![Artifact::new("flash.json", json_text(&report))])
}

#[derive(Debug, Clone)]
pub struct EnvelopeArtifacts {
    pub curve: SaturationCurve,
    pub outcome: Outcome,
    pub artifacts: Vec<Artifact>,
}

/// Overridden pairs involving CO2, or `gc` when every such pair is predicted.
fn co2_provenance(kij: &KijMatrix) -> String {
    let Some(c) = kij.index_of(crate::saturation::CO2) else {
        return Provenance::GcPredicted.as_str().to_string();
    };
    let over: Vec<String> = (0..kij.len())
        .filter(|&j| j != c && kij.provenance(c, j) == Provenance::Overridden)
        .map(|j| format!("{}:{}={}", kij.names()[c], kij.names()[j], kij.get(c, j)))
        .collect();
    if over.is_empty() {
        Provenance::GcPredicted.as_str().to_string()
    } else {
        format!("{} {}", Provenance::Overridden.as_str(), over.join(" "))
    }
}

/// Saturation curve over CO2 loading: CSV data, a plot manifest, and a
/// run summary.
pub fn cmd_envelope(
    fluid: &Mixture,
    t: f64,
    z_co2: &[f64],
    strategy: Strategy,
    ctx: &ModelContext,
) -> Result<EnvelopeArtifacts> {
    if z_co2.is_empty() {
        return Err(Error::InvalidInput("empty CO2 grid".into()));
    }
    let kij = ctx.kij(fluid, t)?;
    let curve = envelope_sweep(fluid, z_co2, t, &kij, strategy)?;
    let provenance = co2_provenance(&kij);

    let mut rows = vec![["z_CO2", "kind", "p_MPa", "converged", "kij_provenance"]
        .map(String::from)
        .to_vec()];
    for p in &curve.points {
        rows.push(vec![
            p.z_co2.to_string(),
            p.kind.as_str().to_string(),
            num(p.pressure / 1e6),
            p.converged.to_string(),
            provenance.clone(),
        ]);
    }
    let converged = curve.points.iter().filter(|p| p.converged).count();
    let outcome = match converged {
        0 => Outcome::Failed,
        n if n == curve.points.len() => Outcome::Complete,
        _ => Outcome::Partial,
    };
    let manifest = json!({
        "kind": "saturation_envelope",
        "data": "envelope.csv",
        "x": {"column": "z_CO2", "label": "CO2 mole fraction", "unit": "1"},
        "y": {"column": "p_MPa", "label": "saturation pressure", "unit": "MPa"},
        "series": [
            {"name": "bubble", "filter": {"column": "kind", "equals": "bubble"}},
            {"name": "dew", "filter": {"column": "kind", "equals": "dew"}}
        ],
        "temperature_K": t,
    });
    let failures: Vec<_> = curve
        .points
        .iter()
        .filter(|p| !p.converged)
        .map(|p| json!({"z_CO2": p.z_co2, "diagnostic": p.diagnostic}))
        .collect();
    let summary = json!({
        "temperature_K": t,
        "strategy": strategy,
        "components": fluid.names(),
        "base_z": fluid.z,
        "points": curve.points.len(),
        "converged": converged,
        "outcome": outcome,
        "total_iterations": curve.total_iterations(),
        "kij_provenance": provenance,
        "failures": failures,
    });
    Ok(EnvelopeArtifacts {
        artifacts: vec![
            Artifact::new("envelope.csv", csv_text(rows)),
            Artifact::new("envelope_manifest.json", json_text(&manifest)),
            Artifact::new("envelope_summary.json", json_text(&summary)),
        ],
        curve,
        outcome,
    })
}

#[derive(Debug, Clone)]
pub struct FitArtifacts {
    pub temperature: f64,
    pub result: OptimizationResult,
    pub baseline: CostEvaluation,
    pub artifacts: Vec<Artifact>,
}

fn metric_row(t: f64, model: &str, k: f64, r: Option<&MetricReport>) -> Vec<String> {
    let mut row = vec![t.to_string(), model.to_string(), k.to_string()];
    for m in MetricKind::ALL {
        row.push(r.map(|r| r.get(m).to_string()).unwrap_or_default());
    }
    row
}

/// Calibrates the k of `pair` on one isotherm and reports the optimum next
/// to the group-contribution baseline.
pub fn cmd_fit(
    fluid: &Mixture,
    data: &ExperimentalDataset,
    t: f64,
    method: Method,
    metric: MetricKind,
    pair: (String, String),
    ctx: &ModelContext,
) -> Result<FitArtifacts> {
    let mut config = CalibrationConfig::new(fluid.clone(), ctx.table.clone());
    config.overrides = ctx.overrides.clone();
    config.metric = metric;
    config.pair = pair;
    let baseline = baseline_cost(data, t, &config)?;
    let result = match method {
        Method::Grid => grid_search_dataset(data, t, &config)?,
        Method::Golden => golden_section_dataset(data, t, &config, GOLDEN_BRACKET, GOLDEN_TOL)?,
    };
    let best = result.best().ok_or_else(|| Error::CostUndefined {
        k: f64::NAN,
        failures: data.at(t).len(),
    })?;
    let tag = format!("{t}K");

    let mut rows = vec![["T_K", "model", "k", "MAE", "MSE", "RMSE", "RMSLE", "MAXE"]
        .map(String::from)
        .to_vec()];
    rows.push(metric_row(t, "group_contribution", baseline.k, baseline.report.as_ref()));
    rows.push(metric_row(t, "optimized", result.k_opt, best.report.as_ref()));

    let mut trace = vec![["stage", "k", "cost", "reused", "points", "failures"]
        .map(String::from)
        .to_vec()];
    for e in &result.trace {
        let stage = serde_json::to_value(e.stage).expect("stage serializes");
        trace.push(vec![
            stage.as_str().unwrap_or_default().to_string(),
            e.evaluation.k.to_string(),
            num(e.evaluation.cost),
            e.reused.to_string(),
            e.evaluation.residuals.len().to_string(),
            e.evaluation.failures.len().to_string(),
        ]);
    }
    let manifest = json!({
        "kind": "cost_curve",
        "data": format!("fit_{tag}_trace.csv"),
        "x": {"column": "k", "label": "k_ij", "unit": "1"},
        "y": {"column": "cost", "label": metric.as_str(), "unit": if metric == MetricKind::Mse { "MPa^2" } else if metric == MetricKind::Rmsle { "1" } else { "MPa" }},
        "series": [
            {"name": "coarse", "filter": {"column": "stage", "equals": "coarse"}},
            {"name": "refined", "filter": {"column": "stage", "equals": "refined"}},
            {"name": "golden", "filter": {"column": "stage", "equals": "golden"}}
        ],
        "temperature_K": t,
    });
    let summary = json!({
        "temperature_K": t,
        "fluid": data.fluid,
        "pair": [config.pair.0, config.pair.1],
        "method": result.method,
        "metric": metric,
        "k_opt": result.k_opt,
        "cost_opt": result.cost_opt,
        "evaluation_count": result.evaluation_count,
        "fell_back_to_grid": result.fell_back_to_grid,
        "warnings": result.warnings,
        "report_at_k_opt": best.report,
        "residuals_at_k_opt": best.residuals,
        "failures_at_k_opt": best.failures,
        "baseline": {"k": baseline.k, "report": baseline.report, "failures": baseline.failures},
    });
    Ok(FitArtifacts {
        temperature: t,
        artifacts: vec![
            Artifact::new(format!("fit_{tag}.json"), json_text(&summary)),
            Artifact::new(format!("fit_{tag}_table.csv"), csv_text(rows)),
            Artifact::new(format!("fit_{tag}_trace.csv"), csv_text(trace)),
            Artifact::new(format!("fit_{tag}_manifest.json"), json_text(&manifest)),
        ],
        result,
        baseline,
    })
}

/// Numbers from a one-column text file. A non-numeric first line is a header.
pub fn parse_series(text: &str, file: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        match s.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if out.is_empty() && i == text.lines().position(|l| !l.trim().is_empty()).unwrap_or(0) => {}
            Err(_) => {
                return Err(Error::Parse {
                    file: file.into(),
                    line: i + 1,
                    column: 1,
                    message: format!("{s:?} is not a number"),
                })
            }
        }
    }
    Ok(out)
}

/// All five metrics; with `spider`, also the radar-chart export in which MSE
/// is divided by 10 and RMSLE multiplied by 10.
pub fn cmd_metrics(predicted: &[f64], actual: &[f64], spider: bool) -> Result<(MetricReport, Vec<Artifact>)> {
    let report = evaluate(&PairedSeries::new(predicted.to_vec(), actual.to_vec())?)?;
    let mut artifacts = vec![Artifact::new("metrics.json", json_text(&report))];
    if spider {
        let mut rows = vec![["metric", "value", "scale", "plotted"].map(String::from).to_vec()];
        for (m, scaled) in report.spider_scaled() {
            let scale = match m {
                MetricKind::Mse => "divided_by_10",
                MetricKind::Rmsle => "multiplied_by_10",
                _ => "unscaled",
            };
            rows.push(vec![m.as_str().into(), report.get(m).to_string(), scale.into(), scaled.to_string()]);
        }
        artifacts.push(Artifact::new("spider.csv", csv_text(rows)));
    }
    Ok((report, artifacts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbench::library;

    fn binary(zc: f64) -> Mixture {
        Mixture::new(
            vec![library::component("CH4").unwrap(), library::component("CO2").unwrap()],
            vec![1.0 - zc, zc],
        )
        .unwrap()
    }

    #[test]
    fn kij_table_layout() {
        let a = cmd_kij(&binary(0.4), &[323.15, 373.15], &ModelContext::bundled()).unwrap();
        let lines: Vec<&str> = a[0].contents.lines().collect();
        assert_eq!(lines[0], "T_K,component,CH4,CO2");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("323.15,CH4,0,0.11"));
        let p: Vec<&str> = a[1].contents.lines().collect();
        assert_eq!(p[2], "323.15,CO2,gc-predicted,diagonal");
    }

    #[test]
    fn metrics_and_spider() {
        let (r, a) = cmd_metrics(&[3.0, 5.0], &[1.0, 2.0], true).unwrap();
        assert_eq!((r.mae, r.mse, r.maxe), (2.5, 6.5, 3.0));
        assert!(a[1].contents.contains("mse,6.5,divided_by_10,0.65"));
        assert!(cmd_metrics(&[1.0], &[1.0, 2.0], false).is_err());
    }

    #[test]
    fn series_files() {
        assert_eq!(parse_series("p_MPa\n1.5\n\n2\n", "f").unwrap(), vec![1.5, 2.0]);
        assert!(parse_series("1\nx\n", "f").is_err());
    }
}
