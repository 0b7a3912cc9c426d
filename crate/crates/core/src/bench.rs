//! Bundled benchmark sources and the expected-verdict suite.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commute::{verify_condition, Scope, Verdict, VerdictKind};
use crate::dsl::{parse_adt, parse_formula, AdtDef};
use crate::error::{Error, Result};
use crate::ir::Model;
use crate::semantics::DomainBounds;

pub const BUNDLED: [&str; 9] =
    ["memory", "counter", "accumulator", "simpleset", "simpleset_nf", "arraystack", "queue", "list", "hashtable"];

const SOURCES: [&str; 9] = [
    include_str!("../bench/memory.adt"),
    include_str!("../bench/counter.adt"),
    include_str!("../bench/accumulator.adt"),
    include_str!("../bench/simpleset.adt"),
    include_str!("../bench/simpleset_nf.adt"),
    include_str!("../bench/arraystack.adt"),
    include_str!("../bench/queue.adt"),
    include_str!("../bench/list.adt"),
    include_str!("../bench/hashtable.adt"),
];

pub const SUITE_TOML: &str = include_str!("../bench/suite.toml");

/// SimpleSet states agree up to the order of the two slots.
pub const I_SS: &str = "((s1.a == s2.a && s1.b == s2.b) || (s1.a == s2.b && s1.b == s2.a)) && s1.sz == s2.sz";
/// ArrayStack states agree on height and on every live cell.
pub const I_AS: &str = "s1.top == s2.top && forall i in 0..s1.top : s1.a[i] == s2.a[i]";

/// Env var naming a directory that replaces the bundled suite.
pub const SUITE_DIR_VAR: &str = "CITYBENCH_DIR";

pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().position(|n| *n == name).map(|i| SOURCES[i])
}

pub fn bundled_adt(name: &str) -> Result<AdtDef> {
    let src = bundled_source(name).ok_or_else(|| Error::Invalid(format!("no bundled ADT named `{name}`")))?;
    Ok(parse_adt(src)?)
}

pub fn bundled_model(name: &str) -> Result<Model> {
    Model::new(&bundled_adt(name)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Fig5,
    Fig6,
}

impl std::fmt::Display for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Table::Fig5 => "fig5",
            Table::Fig6 => "fig6",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expected {
    Valid,
    Invalid,
}

impl Expected {
    pub fn kind(self) -> VerdictKind {
        match self {
            Expected::Valid => VerdictKind::Valid,
            Expected::Invalid => VerdictKind::Invalid,
        }
    }

    pub fn mark(self) -> &'static str {
        match self {
            Expected::Valid => "✓",
            Expected::Invalid => "χ",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct Defaults {
    lo: i64,
    hi: i64,
    client_depth: usize,
    suffix_depth: usize,
    state_budget: usize,
    fuel: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdtEntry {
    file: String,
    inv: Option<String>,
    lo: Option<i64>,
    hi: Option<i64>,
    #[serde(default)]
    consts: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowEntry {
    table: Table,
    adt: String,
    m: String,
    n: String,
    phi: String,
    expected: Expected,
    inv: Option<String>,
    lo: Option<i64>,
    hi: Option<i64>,
    #[serde(default)]
    consts: BTreeMap<String, i64>,
    skip: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    defaults: Defaults,
    adts: BTreeMap<String, AdtEntry>,
    row: Vec<RowEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub table: Table,
    /// 1-based position within its table.
    pub number: usize,
    pub adt: String,
    pub m: String,
    pub n: String,
    pub phi: String,
    pub expected: Expected,
    pub bounds: DomainBounds,
    pub consts: Vec<(String, i64)>,
    pub inv: Option<String>,
    pub skip: Option<String>,
}

impl BenchRow {
    pub fn label(&self) -> String {
        format!("{} #{:<2} {} {}⋈{} [{}]", self.table, self.number, self.adt, self.m, self.n, self.phi)
    }
}

#[derive(Debug, Clone)]
pub struct Suite {
    sources: BTreeMap<String, String>,
    pub rows: Vec<BenchRow>,
}

impl Suite {
    pub fn bundled() -> Result<Suite> {
        Suite::from_text(SUITE_TOML, |file| {
            let name = file.strip_suffix(".adt").unwrap_or(file);
            bundled_source(name)
                .map(str::to_string)
                .ok_or_else(|| Error::Invalid(format!("suite refers to unknown bundled file `{file}`")))
        })
    }

    /// Loads `suite.toml` and the `.adt` files it names from `dir`.
    pub fn load(dir: &Path) -> Result<Suite> {
        let suite_path = dir.join("suite.toml");
        let text = read_file(&suite_path)?;
        Suite::from_text(&text, |file| read_file(&dir.join(file)))
    }

    /// The directory named by [`SUITE_DIR_VAR`] if set, else the bundled suite.
    pub fn from_env() -> Result<Suite> {
        match std::env::var_os(SUITE_DIR_VAR) {
            Some(dir) if !dir.is_empty() => Suite::load(&PathBuf::from(dir)),
            _ => Suite::bundled(),
        }
    }

    fn from_text(text: &str, mut read: impl FnMut(&str) -> Result<String>) -> Result<Suite> {
        let file: SuiteFile =
            toml::from_str(text).map_err(|e| Error::Invalid(format!("suite.toml: {}", e.message())))?;
        let mut sources = BTreeMap::new();
        for (name, entry) in &file.adts {
            sources.insert(name.clone(), read(&entry.file)?);
        }
        let d = &file.defaults;
        let mut counters: BTreeMap<Table, usize> = BTreeMap::new();
        let mut rows = Vec::new();
        for r in file.row {
            let entry = file
                .adts
                .get(&r.adt)
                .ok_or_else(|| Error::Invalid(format!("row refers to undeclared ADT `{}`", r.adt)))?;
            let number = counters.entry(r.table).or_insert(0);
            *number += 1;
            let mut consts = entry.consts.clone();
            consts.extend(r.consts);
            let bounds = DomainBounds {
                lo: r.lo.or(entry.lo).unwrap_or(d.lo),
                hi: r.hi.or(entry.hi).unwrap_or(d.hi),
                client_depth: d.client_depth,
                suffix_depth: d.suffix_depth,
                state_budget: d.state_budget,
                fuel: d.fuel,
            };
            bounds.validate()?;
            rows.push(BenchRow {
                table: r.table,
                number: *number,
                adt: r.adt,
                m: r.m,
                n: r.n,
                phi: r.phi,
                expected: r.expected,
                bounds,
                consts: consts.into_iter().collect(),
                inv: r.inv.or_else(|| entry.inv.clone()),
                skip: r.skip,
            });
        }
        Ok(Suite { sources, rows })
    }

    /// The row's ADT with its capacity bindings applied.
    pub fn adt(&self, row: &BenchRow) -> Result<AdtDef> {
        let src = self
            .sources
            .get(&row.adt)
            .ok_or_else(|| Error::Invalid(format!("no source for ADT `{}`", row.adt)))?;
        let mut adt = parse_adt(src)?;
        for (name, value) in &row.consts {
            adt = adt.with_const(name, *value);
        }
        Ok(adt)
    }

    pub fn model(&self, row: &BenchRow) -> Result<Model> {
        Model::new(&self.adt(row)?)
    }

    pub fn select(&self, table: Option<Table>) -> Vec<&BenchRow> {
        self.rows.iter().filter(|r| table.is_none_or(|t| r.table == t)).collect()
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", tag = "status")]
pub enum RowStatus {
    Match,
    Mismatch,
    Skipped { reason: String },
    Error { message: String },
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RowResult {
    pub row: BenchRow,
    pub status: RowStatus,
    pub verdict: Option<Verdict>,
}

pub fn run_row(suite: &Suite, row: &BenchRow, scope: Scope) -> RowResult {
    if let Some(reason) = &row.skip {
        return RowResult { row: row.clone(), status: RowStatus::Skipped { reason: reason.clone() }, verdict: None };
    }
    let run = || -> Result<Verdict> {
        let model = suite.model(row)?;
        let phi = parse_formula(&row.phi, &model.adt, &row.m, &row.n)?;
        verify_condition(&model, &phi, &row.bounds, scope)
    };
    match run() {
        Ok(v) => {
            let status = if v.kind == row.expected.kind() { RowStatus::Match } else { RowStatus::Mismatch };
            RowResult { row: row.clone(), status, verdict: Some(v) }
        }
        Err(e) => RowResult { row: row.clone(), status: RowStatus::Error { message: e.to_string() }, verdict: None },
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteRun {
    pub results: Vec<RowResult>,
    pub wall_ms: u64,
}

impl SuiteRun {
    pub fn count(&self, pred: impl Fn(&RowStatus) -> bool) -> usize {
        self.results.iter().filter(|r| pred(&r.status)).count()
    }

    pub fn matched(&self) -> usize {
        self.count(|s| matches!(s, RowStatus::Match))
    }

    pub fn skipped(&self) -> usize {
        self.count(|s| matches!(s, RowStatus::Skipped { .. }))
    }

    /// Rows that ran and did not match, including errors.
    pub fn failed(&self) -> usize {
        self.results.len() - self.matched() - self.skipped()
    }

    pub fn ran(&self) -> usize {
        self.results.len() - self.skipped()
    }
}

/// Runs the selected rows on `jobs` threads (0 = one per core). Results
/// keep suite order regardless of scheduling.
pub fn run_suite(suite: &Suite, table: Option<Table>, jobs: usize, scope: Scope) -> Result<SuiteRun> {
    let start = Instant::now();
    let rows = suite.select(table);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let results = pool.install(|| rows.par_iter().map(|r| run_row(suite, r, scope)).collect());
    Ok(SuiteRun { results, wall_ms: start.elapsed().as_millis() as u64 })
}
