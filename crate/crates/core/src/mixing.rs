//! Van der Waals one-fluid mixing and the group-contribution k_ij(T).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::eos::{pure_params, Component, CrossEnergyTable, PureParams};
use crate::error::{Error, Result};

/// Reference temperature of the group-contribution exponent, K.
pub const T_REF: f64 = 298.15;

const BUNDLED_TABLE: &str = include_str!("../data/ppr78_groups.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Group {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupTableFile {
    version: Option<String>,
    groups: Vec<Group>,
    #[serde(rename = "A_MPa")]
    a_mpa: Vec<toml::Spanned<Vec<f64>>>,
    #[serde(rename = "B_MPa")]
    b_mpa: Vec<toml::Spanned<Vec<f64>>>,
}

/// Symmetric group-pair parameters A_kl and B_kl, stored in MPa.
///
/// A NaN entry marks a pair with no published parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupInteractionTable {
    pub version: Option<String>,
    groups: Vec<Group>,
    index: HashMap<String, usize>,
    a_mpa: Vec<f64>,
    b_mpa: Vec<f64>,
}

/// Converts a byte offset into 1-based (line, column).
pub(crate) fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

impl GroupInteractionTable {
    /// The table shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE, "ppr78_groups.toml").expect("bundled group table is valid")
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let raw: GroupTableFile = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            Error::Parse {
                file: file.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        let n = raw.groups.len();
        for (label, rows) in [("A_MPa", &raw.a_mpa), ("B_MPa", &raw.b_mpa)] {
            for (k, row) in rows.iter().enumerate() {
                let expected = n.saturating_sub(1 + k);
                if row.get_ref().len() != expected {
                    let (line, column) = line_col(text, row.span().start);
                    return Err(Error::Parse {
                        file: file.to_string(),
                        line,
                        column,
                        message: format!(
                            "{label} row {} has {} entries, expected {expected}",
                            k + 1,
                            row.get_ref().len()
                        ),
                    });
                }
            }
        }
        let plain = |rows: Vec<toml::Spanned<Vec<f64>>>| -> Vec<Vec<f64>> {
            rows.into_iter().map(|r| r.into_inner()).collect()
        };
        let (a_rows, b_rows) = (plain(raw.a_mpa), plain(raw.b_mpa));
        Self::from_upper_triangles(raw.version, raw.groups, &a_rows, &b_rows).map_err(|e| match e {
            Error::Configuration(message) => Error::Parse {
                file: file.to_string(),
                line: 1,
                column: 1,
                message,
            },
            other => other,
        })
    }

    pub fn from_upper_triangles(
        version: Option<String>,
        groups: Vec<Group>,
        a_rows: &[Vec<f64>],
        b_rows: &[Vec<f64>],
    ) -> Result<Self> {
        let n = groups.len();
        let mut index = HashMap::new();
        for (k, g) in groups.iter().enumerate() {
            if index.insert(g.name.clone(), k).is_some() {
                return Err(Error::Configuration(format!("duplicate group name {}", g.name)));
            }
        }
        let fill = |rows: &[Vec<f64>], label: &str| -> Result<Vec<f64>> {
            let expected_rows = n.saturating_sub(1);
            let usable = match rows.len() {
                r if r == expected_rows => rows,
                r if r == n && rows.last().is_some_and(|l| l.is_empty()) => &rows[..expected_rows],
                r => {
                    return Err(Error::Configuration(format!(
                        "{label}: expected {expected_rows} upper-triangle rows for {n} groups, got {r}"
                    )))
                }
            };
            let mut m = vec![0.0; n * n];
            for (k, row) in usable.iter().enumerate() {
                if row.len() != n - 1 - k {
                    return Err(Error::Configuration(format!(
                        "{label}: row {} ({}) has {} entries, expected {}",
                        k + 1,
                        groups[k].name,
                        row.len(),
                        n - 1 - k
                    )));
                }
                for (off, &v) in row.iter().enumerate() {
                    if v.is_infinite() {
                        return Err(Error::Configuration(format!(
                            "{label}: infinite entry for {}-{}",
                            groups[k].name,
                            groups[k + 1 + off].name
                        )));
                    }
                    let l = k + 1 + off;
                    m[k * n + l] = v;
                    m[l * n + k] = v;
                }
            }
            Ok(m)
        };
        let a_mpa = fill(a_rows, "A_MPa")?;
        let b_mpa = fill(b_rows, "B_MPa")?;
        Ok(GroupInteractionTable {
            version,
            groups,
            index,
            a_mpa,
            b_mpa,
        })
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// A_kl in MPa (NaN when unavailable).
    pub fn a_mpa(&self, k: usize, l: usize) -> f64 {
        self.a_mpa[k * self.groups.len() + l]
    }

    /// B_kl in MPa (NaN when unavailable).
    pub fn b_mpa(&self, k: usize, l: usize) -> f64 {
        self.b_mpa[k * self.groups.len() + l]
    }
}

/// Fraction of a molecule occupied by each group of the active table.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDecomposition {
    pub fractions: Vec<f64>,
}

impl GroupDecomposition {
    pub fn of(c: &Component, table: &GroupInteractionTable) -> Result<Self> {
        if c.groups.is_empty() {
            return Err(Error::Configuration(format!(
                "{} has no group decomposition",
                c.name
            )));
        }
        let total: u32 = c.groups.iter().map(|(_, n)| n).sum();
        let mut fractions = vec![0.0; table.groups().len()];
        for (name, count) in &c.groups {
            let k = table.group_index(name).ok_or_else(|| {
                Error::Configuration(format!("{}: unknown group {name}", c.name))
            })?;
            fractions[k] += *count as f64 / total as f64;
        }
        Ok(GroupDecomposition { fractions })
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {t}")));
    }
    Ok(())
}

/// −½ ΣΣ (α_ik−α_jk)(α_il−α_jl) A_kl (T_ref/T)^(B_kl/A_kl − 1), in Pa.
fn group_double_sum(
    di: &GroupDecomposition,
    dj: &GroupDecomposition,
    t: f64,
    table: &GroupInteractionTable,
    names: (&str, &str),
) -> Result<f64> {
    let delta: Vec<f64> = di
        .fractions
        .iter()
        .zip(&dj.fractions)
        .map(|(a, b)| a - b)
        .collect();
    let ln_ratio = (T_REF / t).ln();
    let mut sum = 0.0;
    for (k, &dk) in delta.iter().enumerate() {
        if dk == 0.0 {
            continue;
        }
        for (l, &dl) in delta.iter().enumerate() {
            if l == k || dl == 0.0 {
                continue;
            }
            let (a, b) = (table.a_mpa(k, l), table.b_mpa(k, l));
            let gk = &table.groups()[k].name;
            let gl = &table.groups()[l].name;
            if a.is_nan() || b.is_nan() {
                return Err(Error::Configuration(format!(
                    "no group parameters for {gk}-{gl} (needed by {}-{})",
                    names.0, names.1
                )));
            }
            if a == 0.0 {
                if b == 0.0 {
                    continue;
                }
                return Err(Error::Configuration(format!(
                    "A = 0 with B = {b} for {gk}-{gl}: exponent undefined"
                )));
            }
            sum += dk * dl * a * ((b / a - 1.0) * ln_ratio).exp();
        }
    }
    Ok(-0.5 * sum * 1e6)
}

fn kij_from_parts(double_sum: f64, pi: &PureParams, pj: &PureParams) -> f64 {
    let di = pi.a.sqrt() / pi.b;
    let dj = pj.a.sqrt() / pj.b;
    let k = (double_sum - (di - dj).powi(2)) / (2.0 * (pi.a * pj.a).sqrt() / (pi.b * pj.b));
    // normalize -0.0
    k + 0.0
}

/// Group-contribution binary interaction parameter k_ij(T).
pub fn gc_kij(ci: &Component, cj: &Component, t: f64, table: &GroupInteractionTable) -> Result<f64> {
    check_temperature(t)?;
    let di = GroupDecomposition::of(ci, table)?;
    let dj = GroupDecomposition::of(cj, table)?;
    let pi = pure_params(ci, t)?;
    let pj = pure_params(cj, t)?;
    let s = group_double_sum(&di, &dj, t, table, (&ci.name, &cj.name))?;
    Ok(kij_from_parts(s, &pi, &pj))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Diagonal,
    GcPredicted,
    Overridden,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Diagonal => "diagonal",
            Provenance::GcPredicted => "gc-predicted",
            Provenance::Overridden => "overridden",
        }
    }
}

/// A user-imposed k_ij for a named component pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KijOverride {
    pub first: String,
    pub second: String,
    pub value: f64,
}

impl KijOverride {
    pub fn new(first: impl Into<String>, second: impl Into<String>, value: f64) -> Self {
        KijOverride {
            first: first.into(),
            second: second.into(),
            value,
        }
    }
}

impl std::str::FromStr for KijOverride {
    type Err = Error;

    /// Parses `A:B=VALUE`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("k_ij override {s:?} is not of the form A:B=VALUE"));
        let (pair, value) = s.split_once('=').ok_or_else(bad)?;
        let (a, b) = pair.split_once(':').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        if !value.is_finite() || a.trim().is_empty() || b.trim().is_empty() {
            return Err(bad());
        }
        Ok(KijOverride::new(a.trim(), b.trim(), value))
    }
}

/// Binary interaction parameters of a mixture at one temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct KijMatrix {
    pub temperature: f64,
    names: Vec<String>,
    values: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl KijMatrix {
    /// All-zero matrix (no interaction corrections).
    pub fn zeros(names: Vec<String>, temperature: f64) -> Self {
        let n = names.len();
        let provenance = (0..n * n)
            .map(|idx| {
                if idx / n == idx % n {
                    Provenance::Diagonal
                } else {
                    Provenance::Overridden
                }
            })
            .collect();
        KijMatrix {
            temperature,
            names,
            values: vec![0.0; n * n],
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn provenance(&self, i: usize, j: usize) -> Provenance {
        self.provenance[i * self.len() + j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// A copy with (i, j) and (j, i) set to `value`.
    pub fn with_value(&self, i: usize, j: usize, value: f64) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidInput(format!(
                "cannot override diagonal k_ij of {}",
                self.names[i]
            )));
        }
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("k_ij override must be finite, got {value}")));
        }
        let n = self.len();
        let mut out = self.clone();
        for idx in [i * n + j, j * n + i] {
            out.values[idx] = value;
            out.provenance[idx] = Provenance::Overridden;
        }
        Ok(out)
    }

    pub fn apply_overrides(&self, overrides: &[KijOverride]) -> Result<Self> {
        let mut out = self.clone();
        for o in overrides {
            let i = self.index_of(&o.first).ok_or_else(|| {
                Error::InvalidInput(format!("k_ij override names unknown component {}", o.first))
            })?;
            let j = self.index_of(&o.second).ok_or_else(|| {
                Error::InvalidInput(format!("k_ij override names unknown component {}", o.second))
            })?;
            out = out.with_value(i, j, o.value)?;
        }
        Ok(out)
    }
}

/// Group-contribution k_ij for every pair of `components`, with overrides
/// applied symmetrically on top.
pub fn build_kij_matrix(
    components: &[Component],
    t: f64,
    table: &GroupInteractionTable,
    overrides: &[KijOverride],
) -> Result<KijMatrix> {
    check_temperature(t)?;
    let n = components.len();
    let decomps = components
        .iter()
        .map(|c| GroupDecomposition::of(c, table))
        .collect::<Result<Vec<_>>>()?;
    let pures = components
        .iter()
        .map(|c| pure_params(c, t))
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; n * n];
    let mut provenance = vec![Provenance::Diagonal; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = group_double_sum(
                &decomps[i],
                &decomps[j],
                t,
                table,
                (&components[i].name, &components[j].name),
            )?;
            let k = kij_from_parts(s, &pures[i], &pures[j]);
            values[i * n + j] = k;
            values[j * n + i] = k;
            provenance[i * n + j] = Provenance::GcPredicted;
            provenance[j * n + i] = Provenance::GcPredicted;
        }
    }
    let base = KijMatrix {
        temperature: t,
        names: components.iter().map(|c| c.name.clone()).collect(),
        values,
        provenance,
    };
    base.apply_overrides(overrides)
}

/// Cross-energy table a_ij = √(a_i a_j)(1 − k_ij) for the given pure parameters.
pub fn cross_energy_table(pure: &[PureParams], kij: &KijMatrix) -> Result<CrossEnergyTable> {
    let n = pure.len();
    if kij.len() != n {
        return Err(Error::InvalidInput(format!(
            "k_ij matrix is {}x{}, mixture has {n} components",
            kij.len(),
            kij.len()
        )));
    }
    if let Some(i) = pure.iter().position(|p| p.a < 0.0 || !p.a.is_finite()) {
        return Err(Error::Domain(format!(
            "energy parameter of component {i} is {}, must be non-negative",
            pure[i].a
        )));
    }
    let mut a_ij = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            a_ij.push((pure[i].a * pure[j].a).sqrt() * (1.0 - kij.get(i, j)));
        }
    }
    CrossEnergyTable::new(a_ij, pure.iter().map(|p| p.b).collect())
}

/// Mixture a and b at composition `z`, with the cross-energy table kept for
/// fugacity derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct VdwMix {
    pub a: f64,
    pub b: f64,
    pub table: CrossEnergyTable,
}

pub fn vdw_mix(z: &[f64], pure: &[PureParams], kij: &KijMatrix) -> Result<VdwMix> {
    if z.len() != pure.len() {
        return Err(Error::InvalidInput(format!(
            "{} mole fractions for {} components",
            z.len(),
            pure.len()
        )));
    }
    let sum: f64 = z.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("mole fractions sum to {sum}, expected 1")));
    }
    let table = cross_energy_table(pure, kij)?;
    let (a, b) = table.mix(z);
    Ok(VdwMix { a, b, table })
}
