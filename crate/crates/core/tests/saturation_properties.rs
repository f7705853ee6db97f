mod common;

use common::*;
use phasefit::flash::pt_flash;
use phasefit::saturation::{envelope_sweep, saturation_pressure, DEFAULT_BRACKET};
use phasefit::{SaturationCurve, SaturationKind, Strategy};

fn sweep(names: &[&str], z: &[f64], t: f64, fractions: &[f64], s: Strategy) -> SaturationCurve {
    let base = mixture(names, z);
    envelope_sweep(&base, fractions, t, &gc_kij(&base, t), s).unwrap()
}


#[test]
fn pure_component_matches_oracle_psat() {
    for (name, t) in [("CO2", 250.0), ("C3H8", 300.0)] {
        let mix = mixture(&[name], &[1.0]);
        let kij = gc_kij(&mix, t);
        let psat = pure_psat(&Oracle::new(&mix, t, &kij), 0.1e6, 6e6);
        let pt = saturation_pressure(&mix, t, SaturationKind::Bubble, &kij, DEFAULT_BRACKET, None).unwrap();
        assert!(pt.converged);
        assert!((pt.pressure - psat).abs() < 2e3, "{name}: {} vs oracle {psat}", pt.pressure);
    }
}

#[test]
fn saturation_lies_within_one_scan_step() {
    // CO2-rich: a CH4-rich feed has no two-phase region at 230 K.
    let mix = mixture(&["CH4", "CO2"], &[0.1, 0.9]);
    let t = 230.0;
    let kij = gc_kij(&mix, t);
    let grid = linspace(0.1e6, 6e6, 500);
    let two: Vec<bool> = grid.iter().map(|p| pt_flash(&mix, t, *p, &kij, None).unwrap().is_two_phase()).collect();
    let top = two.iter().rposition(|v| *v).expect("scan finds a two-phase region");
    assert!(top + 1 < grid.len());
    let pt = saturation_pressure(&mix, t, SaturationKind::Bubble, &kij, DEFAULT_BRACKET, None).unwrap();
    assert!(pt.converged);
    assert_eq!(pt.kind, SaturationKind::Bubble);
    assert!(
        grid[top] - 1e3 <= pt.pressure && pt.pressure <= grid[top + 1] + 1e3,
        "{} outside [{}, {}]",
        pt.pressure,
        grid[top],
        grid[top + 1]
    );
}

#[test]
fn boundary_separates_phase_counts() {
    let mix = mixture(&["CH4", "CO2", "nC10"], &[0.35, 0.3, 0.35]);
    let t = 350.0;
    let kij = gc_kij(&mix, t);
    let pt = saturation_pressure(&mix, t, SaturationKind::Bubble, &kij, DEFAULT_BRACKET, None).unwrap();
    assert!(pt.converged);
    assert_eq!(pt.kind, SaturationKind::Bubble);
    let below = pt_flash(&mix, t, pt.pressure - 5e3, &kij, None).unwrap();
    let above = pt_flash(&mix, t, pt.pressure + 5e3, &kij, None).unwrap();
    assert_ne!(below.phase_count, above.phase_count);
    assert!(below.is_two_phase());
}

const OIL: [&str; 3] = ["CH4", "nC10", "CO2"];

#[test]
fn warm_matches_cold_and_costs_no_more() {
    let z = linspace(0.0, 0.6, 20);
    let cold = sweep(&OIL, &[0.3, 0.7, 0.0], 373.15, &z, Strategy::Cold);
    let warm = sweep(&OIL, &[0.3, 0.7, 0.0], 373.15, &z, Strategy::Warm);
    for (c, w) in cold.points.iter().zip(&warm.points) {
        assert!(c.converged && w.converged, "z = {}", c.z_co2);
        assert_eq!(c.kind, w.kind);
        assert!((c.pressure - w.pressure).abs() < 2e3, "z = {}: {} vs {}", c.z_co2, c.pressure, w.pressure);
    }
    assert!(
        warm.total_iterations() <= cold.total_iterations(),
        "warm {} > cold {}",
        warm.total_iterations(),
        cold.total_iterations()
    );
}

#[test]
fn kind_crosses_over_once() {
    let z = linspace(0.0, 0.7, 29);
    let curve = sweep(&OIL, &[0.75, 0.25, 0.0], 373.15, &z, Strategy::Warm);
    for p in &curve.points {
        assert!(p.converged, "z = {}: {:?}", p.z_co2, p.diagnostic);
    }
    let kinds: Vec<SaturationKind> = curve.points.iter().map(|p| p.kind).collect();
    let switches = kinds.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(switches <= 1, "{kinds:?}");
    assert_eq!(kinds[0], SaturationKind::Bubble);
    if switches == 1 {
        assert_eq!(*kinds.last().unwrap(), SaturationKind::Dew);
    }
}

#[test]
fn ch4_rich_feed_at_230k_has_no_boundary() {
    let mix = mixture(&["CH4", "CO2"], &[0.9, 0.1]);
    let kij = gc_kij(&mix, 230.0);
    let r = saturation_pressure(&mix, 230.0, SaturationKind::Bubble, &kij, DEFAULT_BRACKET, None);
    assert!(matches!(r, Err(phasefit::Error::Bracket { .. })), "{r:?}");
}

#[test]
fn empty_sweep_is_empty() {
    let curve = sweep(&OIL, &[0.3, 0.7, 0.0], 373.15, &[], Strategy::Warm);
    assert!(curve.points.is_empty());
}

#[test]
fn sweeps_are_bitwise_reproducible() {
    let z = linspace(0.1, 0.6, 8);
    let bits = |c: &SaturationCurve| c.points.iter().map(|p| (p.pressure.to_bits(), p.iterations)).collect::<Vec<_>>();
    let a = sweep(&OIL, &[0.4, 0.6, 0.0], 373.15, &z, Strategy::Warm);
    let b = sweep(&OIL, &[0.4, 0.6, 0.0], 373.15, &z, Strategy::Warm);
    assert_eq!(bits(&a), bits(&b));
}
