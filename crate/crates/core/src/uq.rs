//! Collocation driver: samples the quantity of interest at sparse-grid nodes,
//! forms mean and variance, and runs the convergence studies.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain_map::{
    build_square_testcase, verify_assumptions, AssumptionReport, CoefficientField,
    DeformationModel, Point, TabulatedCoefficient,
};
use crate::error::{param_err, Error, Result};
use crate::fem::{build_mesh, bump, side, FemSpace, QoiFunctional};
use crate::linalg::SolverOptions;
use crate::sparse_grid::{Density, IndexRule, RuleKind, SparseGrid};

/// A scalar function of the parameter vector, sampled at grid nodes.
pub trait SampleFunction: Send + Sync {
    /// Length of the full parameter vector; shorter points are zero-padded.
    fn dim(&self) -> usize;

    fn evaluate(&self, y: &[f64]) -> Result<f64>;

    /// Stable text identifying the function, used for fingerprints.
    fn describe(&self) -> String;
}

/// Closed-form sample function, mainly for tests.
pub struct FnSample<F> {
    dim: usize,
    name: String,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnSample<F> {
    pub fn new(dim: usize, name: impl Into<String>, f: F) -> Self {
        Self {
            dim,
            name: name.into(),
            f,
        }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> SampleFunction for FnSample<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        Ok((self.f)(y))
    }

    fn describe(&self) -> String {
        format!("fn:{}:{}", self.name, self.dim)
    }
}

/// The square-domain experiment: unit diffusion, zero source, bump data on
/// the top edge and the lower-half bump functional.
pub struct PdeQoi {
    model: Arc<DeformationModel>,
    space: FemSpace,
    coeff: TabulatedCoefficient,
    lift: Vec<f64>,
    qoi: QoiFunctional,
    solver: SolverOptions,
    scale: f64,
    label: String,
}

impl PdeQoi {
    /// Builds the problem on an `n x n` vertex mesh. With `normalize`, every
    /// sample is divided by the QoI of the undeformed domain.
    pub fn new(
        model: Arc<DeformationModel>,
        n: usize,
        solver: SolverOptions,
        normalize: bool,
    ) -> Result<Self> {
        let space = FemSpace::new(build_mesh(n)?);
        let coeff = CoefficientField::unit_diffusion(model.clone()).tabulate(&space.quadrature_points());
        let lift = space.nodal_lift(|p, f| if f & side::TOP != 0 { bump(p[0]) } else { 0.0 });
        let qoi = QoiFunctional::lower_bump(&space);
        let label = format!(
            "pde:n={n}:model={:?}:sqrt_mu={:?}:rtol={:e}:pre={:?}",
            model.square_params(),
            model.sqrt_mu(),
            solver.rtol,
            solver.preconditioner
        );
        let mut out = Self {
            model,
            space,
            coeff,
            lift,
            qoi,
            solver,
            scale: 1.0,
            label,
        };
        if normalize {
            let q0 = out.evaluate(&[])?;
            if q0 == 0.0 {
                return param_err("reference QoI is zero; cannot normalize");
            }
            out.scale = 1.0 / q0;
            out.label.push_str(":normalized");
        }
        Ok(out)
    }

    pub fn square(params: &crate::domain_map::SquareParams, n: usize, normalize: bool) -> Result<Self> {
        let model = Arc::new(build_square_testcase(params.c, params.l, params.l_p, params.n_total)?);
        Self::new(model, n, SolverOptions::default(), normalize)
    }

    pub fn model(&self) -> &Arc<DeformationModel> {
        &self.model
    }

    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    pub fn qoi(&self) -> &QoiFunctional {
        &self.qoi
    }

    /// Factor applied to raw QoI values (one unless normalized).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Nodal solution at `y`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let sys = self.space.assemble(&self.coeff, y, None, &self.lift)?;
        Ok(sys.solve_primal(&self.solver)?.field)
    }

    /// `(direct, adjoint)` QoI values, both scaled.
    pub fn evaluate_both(&self, y: &[f64]) -> Result<(f64, f64)> {
        let sys = self.space.assemble(&self.coeff, y, None, &self.lift)?;
        let u = sys.solve_primal(&self.solver)?;
        let phi = sys.solve_adjoint(&self.qoi, &self.solver)?;
        Ok((
            self.scale * self.qoi.evaluate(&u.field),
            self.scale * sys.qoi_by_duality(&self.qoi, &phi),
        ))
    }

    /// Sampled assumption check over the mesh.
    pub fn assumptions(&self) -> Result<AssumptionReport> {
        self.model.assess_assumptions(&self.space.mesh().assumption_samples())
    }

    pub fn verify(&self) -> Result<AssumptionReport> {
        verify_assumptions(&self.model, &self.space.mesh().assumption_samples())
    }

    /// `L^2` norm of the QoI density.
    pub fn qoi_density_l2(&self) -> f64 {
        let zero = vec![0.0; self.space.n_vertices()];
        self.space
            .integrate_field(&zero, |x: &Point, _, _| (bump(x[0]) * bump(2.0 * x[1])).powi(2))
            .sqrt()
    }

    /// `H^1` norm of the discrete solution at `y`.
    pub fn solution_h1_norm(&self, y: &[f64]) -> Result<f64> {
        let u = self.solve(y)?;
        Ok(self
            .space
            .integrate_field(&u, |_, v, g| v * v + g.norm_squared())
            .sqrt())
    }
}

impl SampleFunction for PdeQoi {
    fn dim(&self) -> usize {
        self.model.n_total()
    }

    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        let sys = self.space.assemble(&self.coeff, y, None, &self.lift)?;
        let u = sys.solve_primal(&self.solver)?;
        Ok(self.scale * self.qoi.evaluate(&u.field))
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiEstimate {
    pub rule: IndexRule,
    pub n_s: usize,
    pub mean: f64,
    pub variance: f64,
    pub eta: usize,
    /// Sampled values in grid node order.
    pub samples: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
    /// Nodes that were not already cached.
    pub new_solves: usize,
    pub wall_time_s: f64,
    pub fingerprint: String,
}

fn node_key(y: &[f64], dim: usize) -> Vec<i64> {
    let mut k: Vec<i64> = y.iter().map(|v| (v * 1e13).round() as i64).collect();
    k.resize(dim, 0);
    k
}

/// Sample function plus a cache of evaluated nodes keyed by the zero-padded
/// coordinates, so nested grids and lower-dimensional grids reuse samples.
pub struct CollocationContext<F: SampleFunction> {
    f: F,
    jobs: usize,
    cache: Mutex<HashMap<Vec<i64>, f64>>,
}

impl<F: SampleFunction> CollocationContext<F> {
    /// `jobs = 0` uses every available core.
    pub fn new(f: F, jobs: usize) -> Self {
        Self {
            f,
            jobs,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn function(&self) -> &F {
        &self.f
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn fingerprint(&self, rule: &IndexRule, n_s: usize) -> String {
        let mut h = Sha256::new();
        h.update(self.f.describe().as_bytes());
        h.update(format!(":{:?}:{}:{}", rule.kind, rule.w, n_s).as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Values at `nodes`, evaluating only the ones not cached yet.
    pub fn sample(&self, nodes: &[Vec<f64>]) -> Result<(Vec<f64>, usize)> {
        let dim = self.f.dim();
        if let Some(y) = nodes.iter().find(|y| y.len() > dim) {
            return param_err(format!("node has {} coordinates, function has {dim}", y.len()));
        }
        let keys: Vec<Vec<i64>> = nodes.iter().map(|y| node_key(y, dim)).collect();
        let mut out = vec![f64::NAN; nodes.len()];
        let mut missing = Vec::new();
        {
            let cache = self.cache.lock().expect("cache lock");
            let mut seen = HashMap::new();
            for (k, key) in keys.iter().enumerate() {
                match cache.get(key) {
                    Some(v) => out[k] = *v,
                    None => {
                        if seen.insert(key.clone(), k).is_none() {
                            missing.push(k);
                        }
                    }
                }
            }
        }
        let eval = |&k: &usize| -> Result<f64> {
            self.f.evaluate(&nodes[k]).map_err(|e| Error::Node {
                node: k,
                y: nodes[k].clone(),
                source: Box::new(e),
            })
        };
        let values: Vec<Result<f64>> = if self.jobs == 1 || missing.len() < 2 {
            missing.iter().map(eval).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.jobs)
                .build()
                .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
            pool.install(|| missing.par_iter().map(eval).collect())
        };
        let mut cache = self.cache.lock().expect("cache lock");
        for (&k, v) in missing.iter().zip(values) {
            let v = v?;
            cache.insert(keys[k].clone(), v);
        }
        for (k, key) in keys.iter().enumerate() {
            if out[k].is_nan() {
                out[k] = *cache.get(key).ok_or(Error::MissingSample(k))?;
            }
        }
        Ok((out, missing.len()))
    }

    pub fn estimate(&self, rule: IndexRule, n_s: usize) -> Result<QoiEstimate> {
        if n_s > self.f.dim() {
            return param_err(format!("N_s = {n_s} exceeds the model dimension {}", self.f.dim()));
        }
        let start = Instant::now();
        let grid = SparseGrid::build(rule, n_s, Density::Uniform)?;
        let (samples, new_solves) = self.sample(grid.nodes())?;
        let (mean, variance) = moments(&grid, &samples)?;
        log::info!(
            "{:?} w={} N_s={n_s}: eta={} new={new_solves} mean={mean:.10} var={variance:.6e}",
            rule.kind,
            rule.w,
            grid.eta()
        );
        Ok(QoiEstimate {
            rule,
            n_s,
            mean,
            variance,
            eta: grid.eta(),
            samples,
            nodes: grid.nodes().to_vec(),
            new_solves,
            wall_time_s: start.elapsed().as_secs_f64(),
            fingerprint: self.fingerprint(&rule, n_s),
        })
    }

    /// High-level isotropic Smolyak estimate used as ground truth.
    pub fn reference_estimate(&self, n_s_ref: usize, w_ref: usize) -> Result<QoiEstimate> {
        self.estimate(IndexRule::smolyak(w_ref), n_s_ref)
    }

    /// Errors against `reference` for each level in `w_list` at fixed `n_s`.
    pub fn sparse_grid_study(
        &self,
        kind: RuleKind,
        n_s: usize,
        w_list: &[usize],
        reference: &QoiEstimate,
    ) -> Result<ConvergenceCurve> {
        let mut rows = Vec::with_capacity(w_list.len());
        let mut w_sorted = w_list.to_vec();
        w_sorted.sort_unstable();
        w_sorted.dedup();
        for w in w_sorted {
            let e = self.estimate(IndexRule::new(kind, w), n_s)?;
            rows.push(CurveRow::against(e.eta as f64, &e, reference));
        }
        Ok(ConvergenceCurve::new(CurveKind::SparseGrid, rows, reference, Some(n_s)))
    }

    /// Errors against `reference` of level-`w` Smolyak estimates for each `N_s`.
    pub fn truncation_study(
        &self,
        n_s_list: &[usize],
        w: usize,
        reference: &QoiEstimate,
    ) -> Result<ConvergenceCurve> {
        let mut list = n_s_list.to_vec();
        list.sort_unstable();
        list.dedup();
        let mut rows = Vec::with_capacity(list.len());
        for n_s in list {
            let e = self.estimate(IndexRule::smolyak(w), n_s)?;
            rows.push(CurveRow::against(n_s as f64, &e, reference));
        }
        Ok(ConvergenceCurve::new(CurveKind::Truncation, rows, reference, None))
    }
}

/// `E = sum w_k q_k` and `var = sum w_k q_k^2 - E^2`, the latter evaluated
/// in the centered form `sum w_k (q_k - E)^2` (equal since the weights sum to one).
pub fn moments(grid: &SparseGrid, samples: &[f64]) -> Result<(f64, f64)> {
    let mean = grid.quadrature(samples)?;
    let sq: Vec<f64> = samples.iter().map(|q| (q - mean) * (q - mean)).collect();
    let mut variance = grid.quadrature(&sq)?;
    if !mean.is_finite() {
        return Err(Error::Parameter(format!("non-finite mean {mean}")));
    }
    if variance < 0.0 {
        if variance >= -1e-12 * mean.abs().max(1.0).powi(2) {
            variance = 0.0;
        } else {
            log::warn!("negative variance estimate {variance:e}");
        }
    }
    Ok((mean, variance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    SparseGrid,
    Truncation,
    Fem,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    /// Knots, `N_s` or `h`.
    pub x: f64,
    pub mean_error: f64,
    pub var_error: f64,
}

impl CurveRow {
    fn against(x: f64, e: &QoiEstimate, reference: &QoiEstimate) -> Self {
        Self {
            x,
            mean_error: (e.mean - reference.mean).abs(),
            var_error: (e.variance - reference.variance).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub kind: CurveKind,
    pub rows: Vec<CurveRow>,
    pub reference_mean: f64,
    pub reference_variance: f64,
    pub reference_fingerprint: String,
    /// Dimension of a sparse-grid curve.
    pub n_s: Option<usize>,
}

impl ConvergenceCurve {
    pub fn new(
        kind: CurveKind,
        mut rows: Vec<CurveRow>,
        reference: &QoiEstimate,
        n_s: Option<usize>,
    ) -> Self {
        rows.sort_by(|a, b| a.x.total_cmp(&b.x));
        Self {
            kind,
            rows,
            reference_mean: reference.mean,
            reference_variance: reference.variance,
            reference_fingerprint: reference.fingerprint.clone(),
            n_s,
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x).collect()
    }

    pub fn mean_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_error).collect()
    }

    pub fn var_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.var_error).collect()
    }
}

/// Least-squares slope of `y` against `x` over pairs with positive finite values.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Slope of `log y` against `log x`, ignoring non-positive entries.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly).map(|f| f.0)
}

/// Slope of `log err` against `eta^mu2`.
pub fn subexponential_slope(eta: &[f64], err: &[f64], mu2: f64) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = eta
        .iter()
        .zip(err)
        .filter(|(_, e)| **e > 0.0)
        .map(|(n, e)| (n.powf(mu2), e.ln()))
        .unzip();
    linear_fit(&lx, &ly).map(|f| f.0)
}

/// Result of the finite element study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemStudy {
    /// `(h, |E_h - E_ref|)` with the finest mesh as reference, coarse to fine.
    pub rows: Vec<(f64, f64)>,
    /// `(h, |var_h - var_ref|)`.
    pub var_rows: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    /// Set when the fitted slope falls outside `[1.7, 2.3]`.
    pub slope_warning: Option<String>,
}

/// Mean QoI error against the finest mesh at fixed `(N_s, w)`.
pub fn fem_study(
    params: &crate::domain_map::SquareParams,
    mesh_list: &[usize],
    n_s: usize,
    w: usize,
    jobs: usize,
) -> Result<FemStudy> {
    let mut meshes = mesh_list.to_vec();
    meshes.sort_unstable();
    meshes.dedup();
    if meshes.len() < 2 {
        return param_err("finite element study needs at least two meshes");
    }
    let mut estimates = Vec::with_capacity(meshes.len());
    for &n in &meshes {
        let ctx = CollocationContext::new(PdeQoi::square(params, n, true)?, jobs);
        estimates.push((n, ctx.estimate(IndexRule::smolyak(w), n_s)?));
    }
    let (_, finest) = estimates.last().expect("two meshes");
    let mut rows = Vec::new();
    let mut var_rows = Vec::new();
    for (n, e) in &estimates[..estimates.len() - 1] {
        let h = 1.0 / (*n - 1) as f64;
        rows.push((h, (e.mean - finest.mean).abs()));
        var_rows.push((h, (e.variance - finest.variance).abs()));
    }
    let (h, err): (Vec<f64>, Vec<f64>) = rows.iter().cloned().unzip();
    let slope = loglog_slope(&h, &err);
    let slope_warning = match slope {
        Some(s) if (1.7..=2.3).contains(&s) => None,
        Some(s) => Some(format!(
            "fitted slope {s:.3} outside [1.7, 2.3]; coarsest mesh h = {} may be pre-asymptotic",
            h.iter().cloned().fold(0.0, f64::max)
        )),
        None => Some("not enough non-zero errors to fit a slope".into()),
    };
    rows.reverse();
    var_rows.reverse();
    Ok(FemStudy {
        rows,
        var_rows,
        slope,
        slope_warning,
    })
}

/// One line of the truncation bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub n_s: usize,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Compares measured truncation errors with the truncation estimate.
///
/// Solution norms in the constants are replaced by the `H^1` norm of the
/// computed solution at `y = 0`, so the check is heuristic.
pub fn truncation_bound_check(
    problem: &PdeQoi,
    curve: &ConvergenceCurve,
) -> Result<Vec<BoundCheck>> {
    let report = problem.assumptions()?;
    let consts = crate::analyticity::truncation_constants(
        report.delta_tilde,
        2,
        1.0,
        1.0,
        problem.qoi_density_l2(),
    )?;
    let u_norm = problem.solution_h1_norm(&[])?;
    let scale = problem.scale().abs();
    curve
        .rows
        .iter()
        .map(|row| {
            let n_s = row.x.round() as usize;
            let b_t = *report
                .bt_tails
                .get(n_s)
                .ok_or_else(|| Error::Parameter(format!("N_s = {n_s} beyond model")))?;
            let bound = scale * consts.qoi_bound(1.0, u_norm, u_norm, b_t);
            Ok(BoundCheck {
                n_s,
                measured: row.mean_error,
                bound,
                holds: row.mean_error <= bound,
            })
        })
        .collect()
}
