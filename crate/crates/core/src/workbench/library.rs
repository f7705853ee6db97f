//! Built-in pure-component constants.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::eos::Component;

const LIBRARY: &str = include_str!("../../data/components.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryEntry {
    pub name: String,
    pub tc_k: f64,
    pub pc_mpa: f64,
    pub omega: f64,
    pub groups: BTreeMap<String, u32>,
    pub source: String,
}

impl LibraryEntry {
    pub fn component(&self) -> Component {
        Component {
            name: self.name.clone(),
            tc: self.tc_k,
            pc: self.pc_mpa * 1e6,
            omega: self.omega,
            groups: self.groups.iter().map(|(g, n)| (g.clone(), *n)).collect(),
        }
    }
}

#[derive(Deserialize)]
struct LibraryFile {
    component: Vec<LibraryEntry>,
}

pub fn entries() -> &'static [LibraryEntry] {
    static ENTRIES: OnceLock<Vec<LibraryEntry>> = OnceLock::new();
    ENTRIES.get_or_init(|| {
        toml::from_str::<LibraryFile>(LIBRARY)
            .expect("bundled component library is valid")
            .component
    })
}

pub fn lookup(name: &str) -> Option<&'static LibraryEntry> {
    entries().iter().find(|e| e.name.eq_ignore_ascii_case(name))
}

/// Library component by name.
pub fn component(name: &str) -> Option<Component> {
    lookup(name).map(LibraryEntry::component)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::GroupInteractionTable;

    #[test]
    fn every_entry_is_valid_and_resolvable() {
        let table = GroupInteractionTable::bundled();
        assert!(entries().len() >= 13);
        for e in entries() {
            let c = e.component();
            c.validate().unwrap();
            assert!(!e.source.is_empty());
            for (g, _) in &c.groups {
                assert!(table.group_index(g).is_some(), "{}: {g}", e.name);
            }
        }
        assert!(component("co2").is_some());
        assert!(component("unobtainium").is_none());
    }
}
