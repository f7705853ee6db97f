//! Fluid definition files.
//!
//! ```toml
//! name = "synthetic oil"
//! source = "lab sheet 12"
//!
//! [[component]]
//! name = "CH4"
//! fraction = 0.4
//!
//! [[component]]
//! name = "pseudo"
//! fraction = 0.6
//! tc_k = 600.0
//! pc_mpa = 2.5
//! omega = 0.4
//! groups = { CH3 = 2, CH2 = 7 }
//! ```
//!
//! A component without explicit constants is taken from the built-in library,
//! by `library` if given and by `name` otherwise. Explicit fields override
//! library values one by one.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use super::library;
use crate::eos::Component;
use crate::error::{Error, Result};
use crate::flash::Mixture;
use crate::mixing::{line_col, GroupInteractionTable};

/// Deviations of Σz from 1 up to this are accepted silently.
pub const SILENT_TOL: f64 = 1e-10;
/// Deviations up to this are renormalized with a warning; larger ones are rejected.
pub const RENORMALIZE_TOL: f64 = 1e-3;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluidFile {
    name: Option<String>,
    source: Option<String>,
    component: Vec<Spanned<ComponentEntry>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentEntry {
    name: Spanned<String>,
    fraction: Spanned<f64>,
    library: Option<Spanned<String>>,
    tc_k: Option<f64>,
    pc_mpa: Option<f64>,
    omega: Option<f64>,
    groups: Option<Spanned<BTreeMap<String, u32>>>,
}

/// A parsed fluid together with any warnings raised while loading it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedFluid {
    pub name: String,
    pub source: Option<String>,
    pub mixture: Mixture,
    pub warnings: Vec<String>,
}

pub fn load_fluid(path: &Path, table: &GroupInteractionTable) -> Result<LoadedFluid> {
    let text = std::fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "fluid".into());
    let mut f = parse_fluid(&text, &path.display().to_string(), table)?;
    if f.name.is_empty() {
        f.name = stem;
    }
    Ok(f)
}

pub fn parse_fluid(text: &str, file: &str, table: &GroupInteractionTable) -> Result<LoadedFluid> {
    let at = |offset: usize, message: String| {
        let (line, column) = line_col(text, offset);
        Error::Parse {
            file: file.to_string(),
            line,
            column,
            message,
        }
    };
    let raw: FluidFile = toml::from_str(text).map_err(|e| {
        let offset = e.span().map(|s| s.start).unwrap_or(0);
        at(offset, e.message().to_string())
    })?;
    if raw.component.is_empty() {
        return Err(at(0, "fluid lists no components".into()));
    }

    let mut seen = HashSet::new();
    let mut components = Vec::new();
    let mut z = Vec::new();
    for entry in &raw.component {
        let e = entry.get_ref();
        let name = e.name.get_ref().trim().to_string();
        if name.is_empty() {
            return Err(at(e.name.span().start, "component name is empty".into()));
        }
        if !seen.insert(name.to_ascii_lowercase()) {
            return Err(at(e.name.span().start, format!("duplicate component {name:?}")));
        }
        let frac = *e.fraction.get_ref();
        if !frac.is_finite() || frac < 0.0 {
            return Err(at(
                e.fraction.span().start,
                format!("component {name:?} has invalid fraction {frac}"),
            ));
        }
        let lib_name = e.library.as_ref().map(|s| s.get_ref().as_str()).unwrap_or(&name);
        let lib = library::lookup(lib_name);
        if let (Some(l), None) = (&e.library, lib) {
            return Err(at(l.span().start, format!("unknown library component {:?}", l.get_ref())));
        }
        let missing = |field: &str| {
            at(
                entry.span().start,
                format!("component {name:?} is not in the library and lacks {field}"),
            )
        };
        let tc = e.tc_k.or(lib.map(|l| l.tc_k)).ok_or_else(|| missing("tc_k"))?;
        let pc_mpa = e.pc_mpa.or(lib.map(|l| l.pc_mpa)).ok_or_else(|| missing("pc_mpa"))?;
        let omega = e.omega.or(lib.map(|l| l.omega)).ok_or_else(|| missing("omega"))?;
        let groups: Vec<(String, u32)> = match (&e.groups, lib) {
            (Some(g), _) => {
                for key in g.get_ref().keys() {
                    if table.group_index(key).is_none() {
                        return Err(at(
                            g.span().start,
                            format!("component {name:?} uses unknown group {key:?}"),
                        ));
                    }
                }
                g.get_ref().iter().map(|(k, v)| (k.clone(), *v)).collect()
            }
            (None, Some(l)) => l.groups.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            (None, None) => return Err(missing("groups")),
        };
        let c = Component {
            name: name.clone(),
            tc,
            pc: pc_mpa * 1e6,
            omega,
            groups,
        };
        c.validate()
            .map_err(|err| at(entry.span().start, format!("component {name:?}: {err}")))?;
        components.push(c);
        z.push(frac);
    }

    let mut warnings = Vec::new();
    let sum: f64 = z.iter().sum();
    let dev = (sum - 1.0).abs();
    if dev > RENORMALIZE_TOL || sum <= 0.0 {
        return Err(at(0, format!("mole fractions sum to {sum}, not 1")));
    }
    if dev > SILENT_TOL {
        let msg = format!("mole fractions sum to {sum}; renormalized");
        log::warn!("{file}: {msg}");
        warnings.push(msg);
        z.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(LoadedFluid {
        name: raw.name.unwrap_or_default(),
        source: raw.source,
        mixture: Mixture::new(components, z)?,
        warnings,
    })
}

#[derive(Serialize)]
struct EmittedFile<'a> {
    name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<&'a str>,
    component: Vec<EmittedComponent<'a>>,
}

#[derive(Serialize)]
struct EmittedComponent<'a> {
    name: &'a str,
    fraction: f64,
    tc_k: f64,
    pc_mpa: f64,
    omega: f64,
    groups: BTreeMap<&'a str, u32>,
}

/// Fully explicit fluid file text; every constant is written out.
pub fn emit_fluid(f: &LoadedFluid) -> String {
    let file = EmittedFile {
        name: &f.name,
        source: f.source.as_deref(),
        component: f
            .mixture
            .components
            .iter()
            .zip(&f.mixture.z)
            .map(|(c, z)| EmittedComponent {
                name: &c.name,
                fraction: *z,
                tc_k: c.tc,
                pc_mpa: c.pc / 1e6,
                omega: c.omega,
                groups: c.groups.iter().map(|(g, n)| (g.as_str(), *n)).collect(),
            })
            .collect(),
    };
    toml::to_string(&file).expect("fluid serializes")
}
