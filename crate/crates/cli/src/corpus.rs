//! The bundled example programs with their configs and expected verdicts.
//!
//! Everything under `corpus/` is compiled into the binary, so
//! `dipcheck corpus --run` needs no files at run time.

use serde::{Deserialize, Serialize};

use crate::config::CheckConfig;

macro_rules! embed {
    ($($f:literal),* $(,)?) => {
        &[$(($f, include_str!(concat!("../corpus/", $f)))),*]
    };
}

static FILES: &[(&str, &str)] = embed!(
    "index.json",
    "svt1.dip", "svt2.dip", "svt3.dip", "svt4.dip", "svt5.dip", "svt6.dip",
    "nmax1.dip", "nmax2.dip", "nmax3.dip", "nmax4.dip",
    "hist1.dip", "hist2.dip", "rand1.dip", "rand2.dip", "sparse.dip",
    "svt1.json", "svt2.json", "svt3.json", "svt4.json", "svt5.json", "svt6.json",
    "nmax1.json", "nmax2.json", "nmax3.json", "nmax4.json",
    "hist1.json", "hist2.json", "rand1.json", "rand2.json",
    "sparse.json", "sparse_tight.json", "sparse_pure.json", "svt3_three.json", "svt5_minimize.json",
);

/// Contents of a bundled file.
pub fn embedded_program(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(f, _)| *f == name).map(|(_, t)| *t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Private,
    Violation,
}

#[derive(Clone, Debug, Deserialize)]
struct IndexEntry {
    name: String,
    config: String,
    expected: Expected,
    note: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry {
    pub name: String,
    pub expected: Expected,
    pub note: String,
    pub config_file: String,
    pub config: CheckConfig,
    pub program_text: &'static str,
}

/// All bundled (program, config, expected verdict) entries in index order.
pub fn corpus() -> Vec<CorpusEntry> {
    let index: Vec<IndexEntry> = serde_json::from_str(embedded_program("index.json").expect("bundled index")).expect("valid index");
    index
        .into_iter()
        .map(|e| {
            let text = embedded_program(&e.config).unwrap_or_else(|| panic!("{} is not bundled", e.config));
            let config = CheckConfig::from_json(text).unwrap_or_else(|err| panic!("{}: {err}", e.config));
            let program_text = embedded_program(&config.program).unwrap_or_else(|| panic!("{} is not bundled", config.program));
            CorpusEntry { name: e.name, expected: e.expected, note: e.note, config_file: e.config, config, program_text }
        })
        .collect()
}
