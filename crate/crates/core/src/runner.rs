//! Experiment configuration, artifact writing and the drivers behind each
//! command-line subcommand.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyticity::{self, AnalyticityReport, RegionInput, SparseGridConstants};
use crate::domain_map::{AssumptionReport, SquareParams};
use crate::error::{Error, Result};
use crate::linalg::SolverOptions;
use crate::sparse_grid::{Density, IndexRule, RuleKind, SparseGrid};
use crate::uq::{
    self, loglog_slope, BoundCheck, CollocationContext, ConvergenceCurve, CurveKind, CurveRow,
    PdeQoi, QoiEstimate,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QoiKind {
    /// `int g(x1) g(2 x2) u` over the lower half.
    LowerBump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Vertices per side.
    pub n: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { n: 129 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QoiConfig {
    pub kind: QoiKind,
    /// Divide samples by the QoI of the undeformed domain.
    pub normalize: bool,
}

impl Default for QoiConfig {
    fn default() -> Self {
        Self {
            kind: QoiKind::LowerBump,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub rule: RuleKind,
    pub w: usize,
    pub n_s: usize,
    pub w_list: Vec<usize>,
    pub n_s_list: Vec<usize>,
    /// Levels with more knots than this are skipped in studies.
    pub max_knots: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rule: RuleKind::SM,
            w: 3,
            n_s: 6,
            w_list: (0..=7).collect(),
            n_s_list: (2..=6).collect(),
            max_knots: 1500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    pub n_s: usize,
    pub w: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { n_s: 15, w: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    pub n_s_list: Vec<usize>,
    pub w: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            n_s_list: (1..=10).collect(),
            w: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FemConfig {
    pub mesh_list: Vec<usize>,
    pub n_s: usize,
    pub w: usize,
}

impl Default for FemConfig {
    fn default() -> Self {
        Self {
            mesh_list: vec![17, 33, 65, 129],
            n_s: 2,
            w: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub out: PathBuf,
    /// Worker threads for node solves; 0 uses all cores.
    pub jobs: usize,
    /// Skip the deformation assumption gate.
    pub force_unsafe: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            jobs: 0,
            force_unsafe: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub deformation: SquareParams,
    pub mesh: MeshConfig,
    pub qoi: QoiConfig,
    pub grid: GridConfig,
    pub reference: ReferenceConfig,
    pub truncation: TruncationConfig,
    pub fem: FemConfig,
    pub solver: SolverOptions,
    pub run: RunConfig,
}


impl ExperimentConfig {
    /// Square experiment on the 129 x 129 mesh.
    pub fn desk() -> Self {
        Self::default()
    }

    /// Square experiment on the 257 x 257 mesh.
    pub fn paper_scale() -> Self {
        let mut c = Self::default();
        c.mesh.n = 257;
        c.fem.mesh_list = vec![33, 65, 129, 257];
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.deformation.n_total == 0 {
            return fail("deformation.N must be at least 1".into());
        }
        if self.mesh.n < 3 {
            return fail(format!("mesh.n = {} is below 3", self.mesh.n));
        }
        if let Some(m) = self.fem.mesh_list.iter().find(|&&m| m < 3) {
            return fail(format!("fem.mesh_list entry {m} is below 3"));
        }
        if !(self.solver.rtol > 0.0) {
            return fail("solver.rtol must be positive".into());
        }
        Ok(())
    }

    /// Checks the sections read by `command`.
    pub fn validate_for(&self, command: &str) -> Result<()> {
        self.validate()?;
        let n_total = self.deformation.n_total;
        let uses_reference = matches!(command, "sg-study" | "truncation-study" | "reproduce-paper");
        let mut scalars = Vec::new();
        let mut lists = Vec::new();
        match command {
            "solve" => scalars.push(("grid.n_s", self.grid.n_s)),
            "fem-study" => scalars.push(("fem.n_s", self.fem.n_s)),
            _ => {}
        }
        if uses_reference {
            scalars.push(("reference.n_s", self.reference.n_s));
        }
        if matches!(command, "sg-study" | "reproduce-paper") {
            lists.push(("grid.n_s_list", &self.grid.n_s_list));
        }
        if matches!(command, "truncation-study" | "reproduce-paper") {
            lists.push(("truncation.n_s_list", &self.truncation.n_s_list));
        }
        for (key, v) in scalars {
            if v == 0 || v > n_total {
                return Err(Error::Config(format!("{key} = {v} must lie in 1..={n_total}")));
            }
        }
        for (key, list) in lists {
            if let Some(v) = list.iter().find(|&&v| v == 0 || v > n_total) {
                return Err(Error::Config(format!("{key} entry {v} must lie in 1..={n_total}")));
            }
            if uses_reference {
                if let Some(v) = list.iter().find(|&&v| v > self.reference.n_s) {
                    return Err(Error::Config(format!(
                        "{key} entry {v} exceeds reference.n_s = {}",
                        self.reference.n_s
                    )));
                }
            }
        }
        if command == "fem-study" && self.fem.mesh_list.len() < 2 {
            return Err(Error::Config("fem.mesh_list needs at least two meshes".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, without the `run` section.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.run = RunConfig::default();
        let text = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// One sparse-grid evaluation in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub label: String,
    pub rule: RuleKind,
    pub n_s: usize,
    pub w: usize,
    pub eta: usize,
    pub new_solves: usize,
    pub mean: f64,
    pub variance: f64,
    pub wall_time_s: f64,
}

impl LevelRecord {
    fn from_estimate(label: &str, e: &QoiEstimate) -> Self {
        Self {
            label: label.into(),
            rule: e.rule.kind,
            n_s: e.n_s,
            w: e.rule.w,
            eta: e.eta,
            new_solves: e.new_solves,
            mean: e.mean,
            variance: e.variance,
            wall_time_s: e.wall_time_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub fingerprint: String,
    pub config: ExperimentConfig,
    pub delta_tilde: Option<f64>,
    pub assumptions: Option<AssumptionReport>,
    pub levels: Vec<LevelRecord>,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
    pub total_time_s: f64,
}

impl Manifest {
    fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            fingerprint: cfg.fingerprint(),
            config: cfg.clone(),
            delta_tilde: None,
            assumptions: None,
            levels: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
            total_time_s: 0.0,
        }
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

/// Column layout of a curve file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvSchema {
    /// `knots,mean_error,var_error`
    SparseGrid,
    /// `N_s,mean_error,var_error`
    Truncation,
    /// `h,qoi_error`
    Fem,
}

impl CsvSchema {
    pub fn header(&self) -> &'static [&'static str] {
        match self {
            CsvSchema::SparseGrid => &["knots", "mean_error", "var_error"],
            CsvSchema::Truncation => &["N_s", "mean_error", "var_error"],
            CsvSchema::Fem => &["h", "qoi_error"],
        }
    }

    pub fn for_curve(kind: CurveKind) -> Self {
        match kind {
            CurveKind::SparseGrid => CsvSchema::SparseGrid,
            CurveKind::Truncation => CsvSchema::Truncation,
            CurveKind::Fem => CsvSchema::Fem,
        }
    }
}

/// Writes a header row and then `rows`, already formatted.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Emits a curve under the schema of its kind.
pub fn emit_curve(curve: &ConvergenceCurve, path: &Path) -> Result<()> {
    let schema = CsvSchema::for_curve(curve.kind);
    let rows: Vec<Vec<String>> = curve
        .rows
        .iter()
        .map(|r| match schema {
            CsvSchema::SparseGrid | CsvSchema::Truncation => vec![
                format!("{}", r.x.round() as u64),
                fmt_num(r.mean_error),
                fmt_num(r.var_error),
            ],
            CsvSchema::Fem => vec![fmt_num(r.x), fmt_num(r.mean_error)],
        })
        .collect();
    write_csv(path, schema.header(), &rows)
}

/// Reads a curve file written by [`emit_curve`].
pub fn read_curve(path: &Path, schema: CsvSchema) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != schema.header() {
        return Err(Error::Config(format!(
            "{}: header {header:?} does not match {:?}",
            path.display(),
            schema.header()
        )));
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::Config(format!("{}: bad number {s:?}: {e}", path.display())))
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let x = parse(&rec[0])?;
        let m = parse(&rec[1])?;
        let v = if schema == CsvSchema::Fem { 0.0 } else { parse(&rec[2])? };
        out.push(CurveRow {
            x,
            mean_error: m,
            var_error: v,
        });
    }
    Ok(out)
}

/// Outcome of a subcommand: the manifest plus a short human summary.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub summary: String,
}

struct Session {
    cfg: ExperimentConfig,
    out: PathBuf,
    manifest: Manifest,
    start: Instant,
}

impl Session {
    fn new(command: &str, cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate_for(command)?;
        fs::create_dir_all(&cfg.run.out)?;
        Ok(Self {
            cfg: cfg.clone(),
            out: cfg.run.out.clone(),
            manifest: Manifest::new(command, cfg),
            start: Instant::now(),
        })
    }

    fn problem(&mut self, n: usize) -> Result<CollocationContext<PdeQoi>> {
        let model = std::sync::Arc::new(self.cfg.deformation.build()?);
        let problem = PdeQoi::new(model, n, self.cfg.solver, self.cfg.qoi.normalize)?;
        let report = if self.cfg.run.force_unsafe {
            let r = problem.assumptions()?;
            if r.delta_tilde <= 0.0 {
                log::warn!("assumption gate skipped: delta_tilde = {}", r.delta_tilde);
                self.manifest
                    .notes
                    .push(format!("assumption gate forced with delta_tilde = {}", r.delta_tilde));
            }
            r
        } else {
            problem.verify()?
        };
        self.manifest.delta_tilde = Some(report.delta_tilde);
        self.manifest.assumptions = Some(report);
        Ok(CollocationContext::new(problem, self.cfg.run.jobs))
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.into());
        self.out.join(name)
    }

    fn record(&mut self, label: &str, e: &QoiEstimate) {
        self.manifest.levels.push(LevelRecord::from_estimate(label, e));
    }

    fn finish(mut self, summary: String) -> Result<RunOutcome> {
        self.manifest.total_time_s = self.start.elapsed().as_secs_f64();
        let path = self.out.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(RunOutcome {
            manifest: self.manifest,
            summary,
        })
    }
}

/// Estimate written by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub eta: usize,
    pub n_s: usize,
    pub rule: IndexRule,
    pub fingerprint: String,
}

pub fn run_solve(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut s = Session::new("solve", cfg)?;
    let ctx = s.problem(cfg.mesh.n)?;
    let e = ctx.estimate(IndexRule::new(cfg.grid.rule, cfg.grid.w), cfg.grid.n_s)?;
    s.record("solve", &e);
    let res = SolveResult {
        mean: e.mean,
        variance: e.variance,
        std_dev: e.variance.sqrt(),
        eta: e.eta,
        n_s: e.n_s,
        rule: e.rule,
        fingerprint: cfg.fingerprint(),
    };
    let p = s.path("estimate.json");
    fs::write(p, serde_json::to_string_pretty(&res)?)?;
    let summary = format!(
        "mean={:.10} var={:.10e} std={:.6} eta={}",
        res.mean, res.variance, res.std_dev, res.eta
    );
    s.finish(summary)
}

/// Levels of `w_list` whose grid stays within `max_knots`.
fn levels_within_budget(rule: RuleKind, n_s: usize, w_list: &[usize], max_knots: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut sorted = w_list.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for w in sorted {
        let eta = SparseGrid::build(IndexRule::new(rule, w), n_s, Density::Uniform)?.eta();
        if eta > max_knots {
            break;
        }
        out.push(w);
    }
    Ok(out)
}

fn sg_curves(
    s: &mut Session,
    ctx: &CollocationContext<PdeQoi>,
    reference: &QoiEstimate,
) -> Result<Vec<ConvergenceCurve>> {
    let cfg = s.cfg.clone();
    let mut list = if cfg.grid.n_s_list.is_empty() {
        vec![cfg.grid.n_s]
    } else {
        cfg.grid.n_s_list.clone()
    };
    list.sort_unstable();
    list.dedup();
    let mut curves = Vec::new();
    for n_s in list {
        let ws = levels_within_budget(cfg.grid.rule, n_s, &cfg.grid.w_list, cfg.grid.max_knots)?;
        let curve = ctx.sparse_grid_study(cfg.grid.rule, n_s, &ws, reference)?;
        for w in &ws {
            let e = ctx.estimate(IndexRule::new(cfg.grid.rule, *w), n_s)?;
            s.record(&format!("sg N_s={n_s}"), &e);
        }
        curves.push(curve);
    }
    Ok(curves)
}

pub fn run_sg_study(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut s = Session::new("sg-study", cfg)?;
    let ctx = s.problem(cfg.mesh.n)?;
    let reference = ctx.reference_estimate(cfg.reference.n_s, cfg.reference.w)?;
    s.record("reference", &reference);
    let curves = sg_curves(&mut s, &ctx, &reference)?;
    let mut summary = Vec::new();
    for c in &curves {
        let n_s = c.n_s.unwrap_or(0);
        let p = s.path(&format!("sg_study_ns{n_s}.csv"));
        emit_curve(c, &p)?;
        summary.push(format!(
            "N_s={n_s}: {} levels, final mean error {:.3e}",
            c.rows.len(),
            c.rows.last().map_or(f64::NAN, |r| r.mean_error)
        ));
    }
    s.finish(summary.join("\n"))
}

/// Truncation curve with its bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationResult {
    pub slope: Option<f64>,
    pub bound_check: Vec<BoundCheck>,
}

fn truncation_curve(
    s: &mut Session,
    ctx: &CollocationContext<PdeQoi>,
    reference: &QoiEstimate,
) -> Result<(ConvergenceCurve, TruncationResult)> {
    let cfg = s.cfg.clone();
    let curve = ctx.truncation_study(&cfg.truncation.n_s_list, cfg.truncation.w, reference)?;
    let fit: Vec<&CurveRow> = curve.rows.iter().filter(|r| r.x >= 2.0).collect();
    let slope = loglog_slope(
        &fit.iter().map(|r| r.x).collect::<Vec<_>>(),
        &fit.iter().map(|r| r.mean_error).collect::<Vec<_>>(),
    );
    let bound_check = uq::truncation_bound_check(ctx.function(), &curve)?;
    Ok((curve, TruncationResult { slope, bound_check }))
}

pub fn run_truncation_study(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut s = Session::new("truncation-study", cfg)?;
    let ctx = s.problem(cfg.mesh.n)?;
    let reference = ctx.reference_estimate(cfg.reference.n_s, cfg.reference.w)?;
    s.record("reference", &reference);
    let (curve, res) = truncation_curve(&mut s, &ctx, &reference)?;
    let p = s.path("truncation_study.csv");
    emit_curve(&curve, &p)?;
    let p = s.path("truncation_bound.json");
    fs::write(p, serde_json::to_string_pretty(&res)?)?;
    let held = res.bound_check.iter().filter(|b| b.holds).count();
    s.finish(format!(
        "slope {:?}; bound holds for {held}/{} N_s values",
        res.slope,
        res.bound_check.len()
    ))
}

pub fn run_fem_study(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut s = Session::new("fem-study", cfg)?;
    // the gate is evaluated on the finest mesh
    let finest = *cfg.fem.mesh_list.iter().max().ok_or_else(|| Error::Config("fem.mesh_list is empty".into()))?;
    drop(s.problem(finest)?);
    let study = uq::fem_study(&cfg.deformation, &cfg.fem.mesh_list, cfg.fem.n_s, cfg.fem.w, cfg.run.jobs)?;
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|(h, e)| vec![fmt_num(*h), fmt_num(*e)])
        .collect();
    let p = s.path("fem_study.csv");
    write_csv(&p, CsvSchema::Fem.header(), &rows)?;
    if let Some(w) = &study.slope_warning {
        log::warn!("{w}");
        s.manifest.notes.push(w.clone());
    }
    s.manifest.notes.push(format!("fem slope {:?}", study.slope));
    s.finish(format!("fitted slope {:?}", study.slope))
}

pub fn analyze_region(input: &RegionInput, consts: &SparseGridConstants) -> Result<AnalyticityReport> {
    analyticity::analyze(input, consts)
}

/// Statistics printed by `reproduce-paper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareStatistics {
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub eta: usize,
    pub mesh_n: usize,
    pub truncation_slope: Option<f64>,
}

pub fn run_reproduce_paper(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut s = Session::new("reproduce-paper", cfg)?;
    let ctx = s.problem(cfg.mesh.n)?;
    let reference = ctx.reference_estimate(cfg.reference.n_s, cfg.reference.w)?;
    s.record("reference", &reference);
    let curves = sg_curves(&mut s, &ctx, &reference)?;
    let mut mean_rows = Vec::new();
    let mut var_rows = Vec::new();
    for c in &curves {
        let n_s = c.n_s.unwrap_or(0).to_string();
        for r in &c.rows {
            let knots = (r.x.round() as u64).to_string();
            mean_rows.push(vec![n_s.clone(), knots.clone(), fmt_num(r.mean_error)]);
            var_rows.push(vec![n_s.clone(), knots, fmt_num(r.var_error)]);
        }
    }
    let p = s.path("fig2a.csv");
    write_csv(&p, &["N_s", "knots", "mean_error"], &mean_rows)?;
    let p = s.path("fig2b.csv");
    write_csv(&p, &["N_s", "knots", "var_error"], &var_rows)?;
    let (tcurve, tres) = truncation_curve(&mut s, &ctx, &reference)?;
    let rows_a: Vec<Vec<String>> = tcurve
        .rows
        .iter()
        .map(|r| vec![(r.x.round() as u64).to_string(), fmt_num(r.mean_error)])
        .collect();
    let rows_b: Vec<Vec<String>> = tcurve
        .rows
        .iter()
        .map(|r| vec![(r.x.round() as u64).to_string(), fmt_num(r.var_error)])
        .collect();
    let p = s.path("fig4a.csv");
    write_csv(&p, &["N_s", "mean_error"], &rows_a)?;
    let p = s.path("fig4b.csv");
    write_csv(&p, &["N_s", "var_error"], &rows_b)?;
    let p = s.path("truncation_bound.json");
    fs::write(p, serde_json::to_string_pretty(&tres)?)?;
    let stats = SquareStatistics {
        mean: reference.mean,
        variance: reference.variance,
        std_dev: reference.variance.sqrt(),
        eta: reference.eta,
        mesh_n: cfg.mesh.n,
        truncation_slope: tres.slope,
    };
    let p = s.path("statistics.json");
    fs::write(p, serde_json::to_string_pretty(&stats)?)?;
    s.finish(format!(
        "mean={:.6} variance={:.6} std={:.4} (eta={}, mesh {}x{}), truncation slope {:?}",
        stats.mean, stats.variance, stats.std_dev, stats.eta, cfg.mesh.n, cfg.mesh.n, stats.truncation_slope
    ))
}
