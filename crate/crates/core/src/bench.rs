//! Experiment harness: sweeps `(K, L)`, measures the evaluation error, the
//! incremental error and the work of the fast evaluation, and tabulates the
//! transfer parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::discretization::{build_input, l2_error, reference_solution, sample_u};
use crate::error::{Error, Result};
use crate::fast_eval::{evaluate_fast, CorrectionStrategy, EvalReport};
use crate::grid::{mesh_of_level, GridFunction, GridSpec, MAX_LEVEL};
use crate::softening::SofteningParams;
use crate::transfer_params::{select_params, ParamConfig, TransferSchedule};

/// Finest level for which the error against the extrapolated reference is
/// computed. Finer levels only get incremental errors and work.
pub const REFERENCE_K_MAX: u32 = 8;

/// Deepest coarsening `K - L` that is tabulated.
pub const MAX_DEPTH: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TableKind {
    Params,
    Err,
    Inc,
    Work,
}

impl TableKind {
    pub const ALL: [TableKind; 4] = [Self::Params, Self::Err, Self::Inc, Self::Work];

    pub fn name(self) -> &'static str {
        match self {
            Self::Params => "params",
            Self::Err => "err",
            Self::Inc => "inc",
            Self::Work => "work",
        }
    }

    /// Whether the table has an `L = K` column.
    fn has_top_column(self) -> bool {
        matches!(self, Self::Err | Self::Work)
    }
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown table '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Markdown,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Markdown => "md",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            _ => Err(Error::InvalidParams(format!("unknown format '{s}'"))),
        }
    }
}

/// Which coarse levels `L < K` are run for each `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LPolicy {
    /// `K-1` down to `max(K-6, 2)`, together with the half-level cells.
    #[default]
    All,
    /// Only the half-level cells `⌊K/2⌋` and `⌈K/2⌉`.
    Half,
}

impl LPolicy {
    pub fn levels(self, k: u32) -> Vec<u32> {
        let mut out: Vec<u32> = match self {
            Self::All => (k.saturating_sub(MAX_DEPTH).max(2)..k).collect(),
            Self::Half => Vec::new(),
        };
        out.extend(half_levels(k).into_iter().filter(|&l| l >= 2 && l < k));
        out.sort_unstable_by(|a, b| b.cmp(a));
        out.dedup();
        out
    }
}

impl FromStr for LPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Self::All),
            "half" => Ok(Self::Half),
            _ => Err(Error::InvalidParams(format!("unknown L policy '{s}'"))),
        }
    }
}

/// `⌊K/2⌋` and `⌈K/2⌉`.
pub fn half_levels(k: u32) -> [u32; 2] {
    [k / 2, k.div_ceil(2)]
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub k_min: u32,
    pub k_max: u32,
    pub l_policy: LPolicy,
    pub params: ParamConfig,
    pub strategy: CorrectionStrategy,
    pub format: OutputFormat,
    pub out_dir: PathBuf,
    pub tables: Vec<TableKind>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k_min: 5,
            k_max: 8,
            l_policy: LPolicy::All,
            params: ParamConfig::default(),
            strategy: CorrectionStrategy::Multilevel,
            format: OutputFormat::Csv,
            out_dir: PathBuf::from("."),
            tables: TableKind::ALL.to_vec(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_min < 3 || self.k_min > self.k_max || self.k_max > MAX_LEVEL {
            return Err(Error::InvalidParams(format!(
                "K range {}..={} outside 3..={MAX_LEVEL}",
                self.k_min, self.k_max
            )));
        }
        if !self.params.c_a.is_finite() {
            return Err(Error::InvalidParams(format!("c_a = {}", self.params.c_a)));
        }
        Ok(())
    }

    fn wants(&self, t: TableKind) -> bool {
        self.tables.contains(&t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellValue {
    Params(usize, u32),
    Error(f64),
    Ops(f64),
}

impl CellValue {
    fn render(&self) -> String {
        match *self {
            Self::Params(p, m) => format!("{p},{m}"),
            Self::Error(e) => format!("{e:.2e}"),
            Self::Ops(w) => format!("{}", w.round() as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub kind: TableKind,
    /// Keyed by `(K, L)`.
    pub cells: BTreeMap<(u32, u32), CellValue>,
}

impl BenchTable {
    pub fn new(kind: TableKind) -> Self {
        Self {
            kind,
            cells: BTreeMap::new(),
        }
    }

    pub fn get(&self, k: u32, l: u32) -> Option<CellValue> {
        self.cells.get(&(k, l)).copied()
    }
}

/// A `(K, L)` cell that was not run, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub k: u32,
    pub l: u32,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub tables: Vec<BenchTable>,
    pub skipped: Vec<Skipped>,
}

impl BenchReport {
    pub fn table(&self, kind: TableKind) -> Option<&BenchTable> {
        self.tables.iter().find(|t| t.kind == kind)
    }
}

pub fn emit_table(table: &BenchTable, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => emit_csv(table),
        OutputFormat::Markdown => emit_markdown(table),
    }
}

fn emit_csv(table: &BenchTable) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["K", "L", "value"]).expect("in-memory write");
    for (&(k, l), v) in &table.cells {
        w.write_record([k.to_string(), l.to_string(), v.render()])
            .expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    let mut text = String::from_utf8(bytes).expect("ascii output");
    if text.ends_with('\n') {
        text.pop();
    }
    text
}

fn emit_markdown(table: &BenchTable) -> String {
    let first = if table.kind.has_top_column() { 0 } else { 1 };
    let depths: Vec<u32> = (first..=MAX_DEPTH).collect();
    let mut out = String::from("| K |");
    for &d in &depths {
        match d {
            0 => out.push_str(" L=K |"),
            _ if d == first => out.push_str(&format!(" L=K-{d} |")),
            _ => out.push_str(&format!(" K-{d} |")),
        }
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(depths.len()));
    let ks: Vec<u32> = {
        let mut ks: Vec<u32> = table.cells.keys().map(|&(k, _)| k).collect();
        ks.dedup();
        ks
    };
    for k in ks {
        out.push_str(&format!("\n| {k} |"));
        for &d in &depths {
            let cell = k
                .checked_sub(d)
                .and_then(|l| table.get(k, l).map(|v| (l, v)));
            match cell {
                Some((l, v)) => {
                    let star = if l < k && half_levels(k).contains(&l) { "*" } else { "" };
                    out.push_str(&format!(" {star}{} |", v.render()));
                }
                None => out.push_str(" |"),
            }
        }
    }
    out
}

fn model_input(k: u32) -> Result<crate::discretization::DiscreteTransformInput> {
    Ok(build_input(&sample_u(GridSpec::new(k)?)))
}

/// Errors from schedules that cannot be built for a cell. These cells are
/// skipped; anything else aborts the run.
fn is_unrunnable(e: &Error) -> bool {
    matches!(e, Error::InvalidParams(_) | Error::InvalidOrder(_))
}

fn run_level(
    k: u32,
    levels: &[u32],
    cfg: &BenchConfig,
    report: &mut BenchReport,
) -> Result<()> {
    let input = model_input(k)?;
    // Fast runs needed: every listed L, its L + 1 for the increments, and K.
    let mut needed: Vec<u32> = levels.to_vec();
    needed.push(k);
    if cfg.wants(TableKind::Inc) {
        needed.extend(levels.iter().map(|l| l + 1));
    }
    needed.sort_unstable();
    needed.dedup();

    let mut runs: BTreeMap<u32, EvalReport> = BTreeMap::new();
    let run_needed = cfg.wants(TableKind::Err) || cfg.wants(TableKind::Inc) || cfg.wants(TableKind::Work);
    if run_needed {
        for &l in needed.iter().rev() {
            let schedule = match TransferSchedule::optimal(k, l, &cfg.params) {
                Ok(s) => s,
                Err(e) if is_unrunnable(&e) => {
                    report.skipped.push(Skipped { k, l, reason: e.to_string() });
                    continue;
                }
                Err(e) => return Err(e),
            };
            runs.insert(l, evaluate_fast(&input, &schedule, cfg.strategy)?);
        }
    }

    let mut tables: BTreeMap<TableKind, BenchTable> = cfg
        .tables
        .iter()
        .map(|&t| (t, BenchTable::new(t)))
        .collect();

    if let Some(t) = tables.get_mut(&TableKind::Params) {
        for &l in levels {
            let step = select_params(k, l, &cfg.params).and_then(|(p, m)| {
                if m > 0 {
                    SofteningParams::new(p, m, mesh_of_level(l))?;
                }
                Ok((p, m))
            });
            match step {
                Ok((p, m)) => {
                    t.cells.insert((k, l), CellValue::Params(p, m));
                }
                Err(e) if is_unrunnable(&e) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if let Some(t) = tables.get_mut(&TableKind::Work) {
        for (&l, r) in &runs {
            if l == k || levels.contains(&l) {
                t.cells.insert((k, l), CellValue::Ops(r.ops_per_node()));
            }
        }
    }
    if let Some(t) = tables.get_mut(&TableKind::Inc) {
        for &l in levels {
            if let (Some(a), Some(b)) = (runs.get(&(l + 1)), runs.get(&l)) {
                t.cells.insert((k, l), CellValue::Error(l2_error(&a.values, &b.values)?));
            }
        }
    }
    if let Some(t) = tables.get_mut(&TableKind::Err) {
        if k <= REFERENCE_K_MAX {
            let reference: GridFunction = reference_solution(k)?;
            for (&l, r) in &runs {
                if l == k || levels.contains(&l) {
                    t.cells.insert((k, l), CellValue::Error(l2_error(&r.values, &reference)?));
                }
            }
        }
    }

    for t in tables.into_values() {
        match report.tables.iter_mut().find(|x| x.kind == t.kind) {
            Some(x) => x.cells.extend(t.cells),
            None => report.tables.push(t),
        }
    }
    Ok(())
}

/// Runs every configured table over the K range. Fails on a reference that
/// does not pass its consistency check.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut report = BenchReport {
        tables: Vec::new(),
        skipped: Vec::new(),
    };
    for k in cfg.k_min..=cfg.k_max {
        let levels = cfg.l_policy.levels(k);
        run_level(k, &levels, cfg, &mut report)?;
    }
    report.tables.sort_by_key(|t| t.kind);
    Ok(report)
}

/// Writes each table to `<dir>/<name>.<ext>`, replacing any previous file in
/// one rename.
pub fn write_report(report: &BenchReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in &report.tables {
        let path = dir.join(format!("{}.{}", t.kind.name(), format.extension()));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(emit_table(t, format).as_bytes())?;
        tmp.write_all(b"\n")?;
        tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
        written.push(path);
    }
    Ok(written)
}
