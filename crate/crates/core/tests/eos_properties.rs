mod common;

use common::*;
use phasefit::eos::{
    cubic_real_roots, fugacity_coefficients, m_factor, pr_cubic_coefficients, pure_params, solve_cubic_z, PhaseRoot,
};
use phasefit::mixing::cross_energy_table;
use proptest::prelude::*;

fn table(mix: &phasefit::Mixture, t: f64) -> phasefit::eos::CrossEnergyTable {
    let kij = gc_kij(mix, t);
    let pure: Vec<_> = mix.components.iter().map(|c| pure_params(c, t).unwrap()).collect();
    cross_energy_table(&pure, &kij).unwrap()
}

#[test]
fn fugacity_matches_helmholtz_finite_differences() {
    let mix = mixture(&["CH4", "CO2"], &[0.5, 0.5]);
    let (t, p) = (300.0, 5e6);
    let o = Oracle::new(&mix, t, &gc_kij(&mix, t));
    let v = o.volumes(&mix.z, p);
    assert_eq!(v.len(), 1, "supercritical state has one volume root");
    let fd = o.ln_phi_fd(&mix.z, v[0], p);
    let lib = fugacity_coefficients(&table(&mix, t), &mix.z, t, p, PhaseRoot::MinGibbs).unwrap();
    for (a, b) in lib.iter().zip(&fd) {
        assert!((a - b).abs() < 1e-6, "library {a} vs finite difference {b}");
    }
}

#[test]
fn fugacity_matches_finite_differences_on_both_branches() {
    let mix = mixture(&["CH4", "nC4"], &[0.3, 0.7]);
    let (t, p) = (300.0, 1.5e6);
    let o = Oracle::new(&mix, t, &gc_kij(&mix, t));
    let v = o.volumes(&mix.z, p);
    let tab = table(&mix, t);
    for (root, vol) in [(PhaseRoot::LiquidLike, v[0]), (PhaseRoot::VaporLike, *v.last().unwrap())] {
        let fd = o.ln_phi_fd(&mix.z, vol, p);
        let lib = fugacity_coefficients(&tab, &mix.z, t, p, root).unwrap();
        for (a, b) in lib.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6, "{root:?}: {a} vs {b}");
        }
    }
}

#[test]
fn alpha_is_one_at_critical_temperature() {
    for e in phasefit::workbench::library::entries() {
        let c = e.component();
        assert_eq!(pure_params(&c, c.tc).unwrap().alpha, 1.0, "{}", c.name);
    }
}

#[test]
fn m_factor_branches() {
    let low = |w: f64| 0.37464 + 1.54226 * w - 0.26992 * w * w;
    let high = |w: f64| 0.374642 + 1.48503 * w - 0.164423 * w * w + 0.016666 * w * w * w;
    for w in [0.2, 0.4, 0.491] {
        assert_eq!(m_factor(w).unwrap(), low(w));
    }
    for w in [0.4911, 0.7] {
        assert_eq!(m_factor(w).unwrap(), high(w));
    }
}

#[test]
fn dense_scan_roots() {
    let (a, b) = (0.5, 0.05);
    let (c2, c1, c0) = pr_cubic_coefficients(a, b);
    let f = |z: f64| ((z + c2) * z + c1) * z + c0;
    let mut oracle = Vec::new();
    let n = 200_000;
    for k in 0..n {
        let (z0, z1) = (-1.0 + 3.0 * k as f64 / n as f64, -1.0 + 3.0 * (k + 1) as f64 / n as f64);
        if f(z0).signum() != f(z1).signum() {
            let (mut lo, mut hi) = (z0, z1);
            for _ in 0..100 {
                let m = 0.5 * (lo + hi);
                if f(m).signum() == f(lo).signum() {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            oracle.push(0.5 * (lo + hi));
        }
    }
    let mut roots = cubic_real_roots(c2, c1, c0);
    roots.sort_by(f64::total_cmp);
    assert_eq!(roots.len(), oracle.len());
    for (r, o) in roots.iter().zip(&oracle) {
        assert!((r - o).abs() < 1e-10, "{r} vs {o}");
    }
}

fn gibbs_duhem_residual(names: [&str; 2], x1: f64, t: f64, p: f64) -> f64 {
    let mix = mixture(&names, &[x1, 1.0 - x1]);
    let tab = table(&mix, t);
    let lp = |x: f64| fugacity_coefficients(&tab, &[x, 1.0 - x], t, p, PhaseRoot::VaporLike).unwrap();
    let h = 1e-6;
    let (up, dn) = (lp(x1 + h), lp(x1 - h));
    let d: Vec<f64> = up.iter().zip(&dn).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    x1 * d[0] + (1.0 - x1) * d[1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cubic_roots_satisfy_polynomial(a in 0.0f64..20.0, b in 0.0f64..1.5) {
        let (c2, c1, c0) = pr_cubic_coefficients(a, b);
        let scale = 1f64.max(c2.abs()).max(c1.abs()).max(c0.abs());
        if let Ok(r) = solve_cubic_z(a, b) {
            prop_assert!(!r.roots.is_empty());
            for z in &r.roots {
                let res = ((z + c2) * z + c1) * z + c0;
                prop_assert!(res.abs() < 1e-9 * scale, "Z = {z}, residual {res}");
                prop_assert!(*z > b);
            }
        }
    }

    #[test]
    fn gibbs_duhem_holds(x1 in 0.05f64..0.95, t in 280.0f64..400.0, p in 0.2e6f64..3e6) {
        let r = gibbs_duhem_residual(["CH4", "CO2"], x1, t, p);
        prop_assert!(r.abs() < 1e-5, "residual {r}");
    }
}
