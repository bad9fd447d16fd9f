//! Random domain mapping `F(x, y) = x + e(x, y) v(x)` and the pulled-back
//! coefficient matrix it induces on the fixed reference square.
//!
//! The perturbation is `e(x, y) = sum_l sqrt_mu[l] * b_l(x) * y_l` with every
//! `y_l` in `[-1, 1]`. Its Jacobian is affine in `y`:
//!
//! ```text
//! dF(x, y) = I + sum_l sqrt_mu[l] * B_l(x) * y_l,
//! B_l(x)   = b_l(x) dv(x) + v(x) grad b_l(x)^T
//! ```
//!
//! Fields may be only piecewise smooth (the shipped test case kinks across
//! `x2 = 1/2`). Every derivative evaluation therefore takes a `probe` point
//! lying in the same smooth piece as `x`; finite-element code passes the
//! element centroid so coefficients are never sampled across an interface.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

pub type Point = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Slack allowed on `|y_l| <= 1`.
pub const PARAM_SLACK: f64 = 1e-12;

/// Jacobian determinants at or below this are treated as a folded map.
pub const DEGENERATE_DET: f64 = 1e-14;

/// Scalar field on the reference domain together with its gradient.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
}

/// Vector field `v(x)` with its Jacobian `dv(x)`, evaluated on the smooth
/// piece that contains `probe`.
pub trait DirectionField: Send + Sync {
    fn value(&self, x: &Point) -> Point;
    fn jacobian(&self, x: &Point, probe: &Point) -> Mat2;
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub f64);

impl ScalarField for ConstantField {
    fn value(&self, _x: &Point) -> f64 {
        self.0
    }
    fn gradient(&self, _x: &Point) -> Point {
        Point::zeros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

/// `amplitude * trig(frequency * x1)`, constant in `x2`.
#[derive(Debug, Clone, Copy)]
pub struct TrigMode {
    pub amplitude: f64,
    pub frequency: f64,
    pub kind: Trig,
}

impl ScalarField for TrigMode {
    fn value(&self, x: &Point) -> f64 {
        let t = self.frequency * x[0];
        match self.kind {
            Trig::Sin => self.amplitude * t.sin(),
            Trig::Cos => self.amplitude * t.cos(),
        }
    }

    fn gradient(&self, x: &Point) -> Point {
        let t = self.frequency * x[0];
        let d = match self.kind {
            Trig::Sin => self.amplitude * self.frequency * t.cos(),
            Trig::Cos => -self.amplitude * self.frequency * t.sin(),
        };
        Point::new(d, 0.0)
    }
}

/// Scalar field built from closures, mostly for tests and ad-hoc models.
pub struct FnScalarField {
    value: Box<dyn Fn(&Point) -> f64 + Send + Sync>,
    gradient: Box<dyn Fn(&Point) -> Point + Send + Sync>,
}

impl FnScalarField {
    pub fn new(
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Box::new(gradient),
        }
    }
}

impl ScalarField for FnScalarField {
    fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &Point) -> Point {
        (self.gradient)(x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantDirection(pub Point);

impl DirectionField for ConstantDirection {
    fn value(&self, _x: &Point) -> Point {
        self.0
    }
    fn jacobian(&self, _x: &Point, _probe: &Point) -> Mat2 {
        Mat2::zeros()
    }
}

/// Vector field built from closures. The closure Jacobian ignores the probe,
/// so it must be smooth on the whole domain.
pub struct FnDirectionField {
    value: Box<dyn Fn(&Point) -> Point + Send + Sync>,
    jacobian: Box<dyn Fn(&Point) -> Mat2 + Send + Sync>,
}

impl FnDirectionField {
    pub fn new(
        value: impl Fn(&Point) -> Point + Send + Sync + 'static,
        jacobian: impl Fn(&Point) -> Mat2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            jacobian: Box::new(jacobian),
        }
    }
}

impl DirectionField for FnDirectionField {
    fn value(&self, x: &Point) -> Point {
        (self.value)(x)
    }
    fn jacobian(&self, x: &Point, _probe: &Point) -> Mat2 {
        (self.jacobian)(x)
    }
}

/// `v(x) = (0, x2 - h)` above the line `x2 = h`, zero below it.
#[derive(Debug, Clone, Copy)]
pub struct UpperHalfStretch {
    pub interface: f64,
}

impl DirectionField for UpperHalfStretch {
    fn value(&self, x: &Point) -> Point {
        if x[1] > self.interface {
            Point::new(0.0, x[1] - self.interface)
        } else {
            Point::zeros()
        }
    }

    fn jacobian(&self, _x: &Point, probe: &Point) -> Mat2 {
        if probe[1] > self.interface {
            Mat2::new(0.0, 0.0, 0.0, 1.0)
        } else {
            Mat2::zeros()
        }
    }
}

/// Decay law of the shipped square test case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decay {
    Linear,
}

/// Parameters of the square-domain experiment, as they appear in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SquareParams {
    pub c: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "L_p")]
    pub l_p: f64,
    #[serde(rename = "N")]
    pub n_total: usize,
    pub decay: Decay,
}

impl Default for SquareParams {
    fn default() -> Self {
        Self {
            c: 0.1533,
            l: 0.5,
            l_p: 1.0,
            n_total: 15,
            decay: Decay::Linear,
        }
    }
}

/// Parameter point `y` in `[-1, 1]^{N_s}`. Trailing dimensions of the model
/// that are not present are treated as zero (truncation).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if let Some(bad) = y
            .iter()
            .find(|v| !v.is_finite() || v.abs() > 1.0 + PARAM_SLACK)
        {
            return param_err(format!("parameter component {bad} outside [-1, 1]"));
        }
        Ok(Self(y))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A point where the model is sampled, with the probe selecting its smooth piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub x: Point,
    pub probe: Point,
}

impl SamplePoint {
    pub fn at(x: Point) -> Self {
        Self { x, probe: x }
    }
}

/// The separable deformation model `F(x, y) = x + e(x, y) v(x)`.
#[derive(Clone)]
pub struct DeformationModel {
    sqrt_mu: Vec<f64>,
    basis: Vec<Arc<dyn ScalarField>>,
    direction: Arc<dyn DirectionField>,
    square: Option<SquareParams>,
}

impl fmt::Debug for DeformationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeformationModel")
            .field("sqrt_mu", &self.sqrt_mu)
            .field("square", &self.square)
            .finish_non_exhaustive()
    }
}

impl DeformationModel {
    pub fn new(
        sqrt_mu: Vec<f64>,
        basis: Vec<Arc<dyn ScalarField>>,
        direction: Arc<dyn DirectionField>,
    ) -> Result<Self> {
        if sqrt_mu.len() != basis.len() {
            return param_err(format!(
                "{} amplitudes but {} basis functions",
                sqrt_mu.len(),
                basis.len()
            ));
        }
        if sqrt_mu.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return param_err("amplitudes must be finite and non-negative");
        }
        if sqrt_mu.windows(2).any(|w| w[1] > w[0]) {
            return param_err("amplitudes must be non-increasing in l");
        }
        Ok(Self {
            sqrt_mu,
            basis,
            direction,
            square: None,
        })
    }

    /// The undeformed map `F(x, y) = x` with `n` inert dimensions.
    pub fn identity(n: usize) -> Self {
        Self {
            sqrt_mu: vec![0.0; n],
            basis: (0..n)
                .map(|_| Arc::new(ConstantField(1.0)) as Arc<dyn ScalarField>)
                .collect(),
            direction: Arc::new(ConstantDirection(Point::zeros())),
            square: None,
        }
    }

    pub fn n_total(&self) -> usize {
        self.sqrt_mu.len()
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn sqrt_mu(&self) -> &[f64] {
        &self.sqrt_mu
    }

    pub fn square_params(&self) -> Option<&SquareParams> {
        self.square.as_ref()
    }

    pub fn basis(&self, l: usize) -> &dyn ScalarField {
        self.basis[l].as_ref()
    }

    pub fn direction(&self) -> &dyn DirectionField {
        self.direction.as_ref()
    }

    /// Same model with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor < 0.0 {
            return param_err("scale factor must be finite and non-negative");
        }
        let mut out = self.clone();
        out.sqrt_mu.iter_mut().for_each(|m| *m *= factor);
        out.square = None;
        Ok(out)
    }

    /// Same model with amplitudes beyond `n_s` set to zero.
    pub fn truncated(&self, n_s: usize) -> Self {
        let mut out = self.clone();
        for m in out.sqrt_mu.iter_mut().skip(n_s) {
            *m = 0.0;
        }
        out
    }

    fn check_y(&self, y: &ParamPoint) -> Result<()> {
        if y.len() > self.n_total() {
            return param_err(format!(
                "parameter point has {} components, model has {}",
                y.len(),
                self.n_total()
            ));
        }
        Ok(())
    }

    /// `B_l(x)` for the one-based term index `l`.
    pub fn perturbation_matrix(&self, l: usize, x: &Point) -> Result<Mat2> {
        self.perturbation_matrix_near(l, x, x)
    }

    pub fn perturbation_matrix_near(&self, l: usize, x: &Point, probe: &Point) -> Result<Mat2> {
        if l == 0 || l > self.n_total() {
            return param_err(format!(
                "term index {l} outside 1..={}",
                self.n_total()
            ));
        }
        Ok(self.b_matrix(l - 1, x, probe))
    }

    fn b_matrix(&self, idx: usize, x: &Point, probe: &Point) -> Mat2 {
        let b = &self.basis[idx];
        let v = self.direction.value(x);
        let dv = self.direction.jacobian(x, probe);
        dv * b.value(x) + v * b.gradient(x).transpose()
    }

    /// `e(x, y)`.
    pub fn perturbation(&self, x: &Point, y: &ParamPoint) -> Result<f64> {
        self.check_y(y)?;
        Ok(y
            .as_slice()
            .iter()
            .zip(&self.sqrt_mu)
            .zip(&self.basis)
            .map(|((yl, m), b)| m * yl * b.value(x))
            .sum())
    }

    /// `F(x, y)`.
    pub fn map_point(&self, x: &Point, y: &ParamPoint) -> Result<Point> {
        let e = self.perturbation(x, y)?;
        Ok(x + self.direction.value(x) * e)
    }

    /// `dF(x, y) = I + sum_l sqrt_mu[l] B_l(x) y_l`.
    pub fn jacobian(&self, x: &Point, y: &ParamPoint) -> Result<Mat2> {
        self.jacobian_near(x, x, y)
    }

    pub fn jacobian_near(&self, x: &Point, probe: &Point, y: &ParamPoint) -> Result<Mat2> {
        self.check_y(y)?;
        let mut jac = Mat2::identity();
        for (idx, (yl, m)) in y.as_slice().iter().zip(&self.sqrt_mu).enumerate() {
            if *yl != 0.0 && *m != 0.0 {
                jac += self.b_matrix(idx, x, probe) * (m * yl);
            }
        }
        Ok(jac)
    }

    /// Sampling-based check of `sum_l sqrt_mu[l] |B_l(x)|_2 <= 1 - delta`.
    /// Always returns the report; see [`verify_assumptions`] for the gate.
    pub fn assess_assumptions(&self, samples: &[SamplePoint]) -> Result<AssumptionReport> {
        if samples.is_empty() {
            return param_err("assumption check needs at least one sample point");
        }
        let n = self.n_total();
        let mut bt_tails = vec![0.0_f64; n + 1];
        let mut term_sup = vec![0.0_f64; n];
        let mut b_abs_sup = vec![0.0_f64; n];
        let mut worst = (f64::NEG_INFINITY, samples[0].x);
        let mut contrib = vec![0.0; n];
        for s in samples {
            for l in 0..n {
                let sv = sigma_max(&self.b_matrix(l, &s.x, &s.probe));
                term_sup[l] = term_sup[l].max(sv);
                b_abs_sup[l] = b_abs_sup[l].max(self.basis[l].value(&s.x).abs());
                contrib[l] = self.sqrt_mu[l] * sv;
            }
            let mut tail = 0.0;
            for k in (0..n).rev() {
                tail += contrib[k];
                bt_tails[k] = bt_tails[k].max(tail);
            }
            if tail > worst.0 {
                worst = (tail, s.x);
            }
        }
        let ct_tails = (0..=n)
            .map(|k| {
                (k..n)
                    .map(|l| self.sqrt_mu[l] * b_abs_sup[l])
                    .sum::<f64>()
            })
            .collect();
        Ok(AssumptionReport {
            delta_tilde: 1.0 - bt_tails[0],
            worst_x: [worst.1[0], worst.1[1]],
            b_sup: b_abs_sup.iter().cloned().fold(0.0, f64::max),
            term_sup,
            bt_tails,
            ct_tails,
            n_samples: samples.len(),
        })
    }
}

/// Result of the sampled assumption check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `1 - max_x sum_l sqrt_mu[l] |B_l(x)|_2`.
    pub delta_tilde: f64,
    pub worst_x: [f64; 2],
    /// `max_l max_x |b_l(x)|`.
    pub b_sup: f64,
    /// `max_x |B_l(x)|_2` per term.
    pub term_sup: Vec<f64>,
    /// `B_T(N_s) = max_x sum_{l > N_s} sqrt_mu[l] |B_l(x)|_2` for `N_s = 0..=N`.
    pub bt_tails: Vec<f64>,
    /// `C_T(N_s) = sum_{l > N_s} sqrt_mu[l] max_x |b_l(x)|` for `N_s = 0..=N`.
    pub ct_tails: Vec<f64>,
    pub n_samples: usize,
}

/// Gate version of [`DeformationModel::assess_assumptions`]: fails when `delta_tilde <= 0`.
pub fn verify_assumptions(
    model: &DeformationModel,
    samples: &[SamplePoint],
) -> Result<AssumptionReport> {
    let report = model.assess_assumptions(samples)?;
    if report.delta_tilde <= 0.0 {
        return Err(Error::AssumptionViolated {
            delta_tilde: report.delta_tilde,
            x0: report.worst_x[0],
            x1: report.worst_x[1],
        });
    }
    Ok(report)
}

/// Largest singular value of a 2x2 matrix.
pub fn sigma_max(m: &Mat2) -> f64 {
    let (smax, _) = singular_values(m);
    smax
}

/// `(sigma_max, sigma_min)` of a 2x2 matrix in closed form.
pub fn singular_values(m: &Mat2) -> (f64, f64) {
    let frob2 = m.iter().map(|v| v * v).sum::<f64>();
    let det = m.determinant();
    let disc = (frob2 * frob2 - 4.0 * det * det).max(0.0).sqrt();
    let smax2 = 0.5 * (frob2 + disc);
    let smin2 = if smax2 > 0.0 { det * det / smax2 } else { 0.0 };
    (smax2.sqrt(), smin2.sqrt())
}

/// Pulled-back coefficient at one point: `G = a det(dF) dF^{-1} dF^{-T}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSample {
    pub g: Mat2,
    pub det: f64,
    /// `F(x, y)`, needed to remap the source term.
    pub mapped: Point,
}

fn coefficient_from_jacobian(
    a: f64,
    jac: &Mat2,
    x: &Point,
    mapped: Point,
    y: &[f64],
) -> Result<CoefficientSample> {
    let det = jac.determinant();
    if !(det > DEGENERATE_DET) {
        return Err(Error::DegenerateMap {
            x0: x[0],
            x1: x[1],
            y: y.to_vec(),
            reason: format!("det dF = {det:e}"),
        });
    }
    // dF^{-1} for a 2x2 matrix written out to keep the identity case exact.
    let inv = Mat2::new(jac[(1, 1)], -jac[(0, 1)], -jac[(1, 0)], jac[(0, 0)]) / det;
    let mut g = inv * inv.transpose() * (a * det);
    let off = 0.5 * (g[(0, 1)] + g[(1, 0)]);
    g[(0, 1)] = off;
    g[(1, 0)] = off;
    Ok(CoefficientSample { g, det, mapped })
}

/// Diffusion field bound to a deformation model.
#[derive(Clone)]
pub struct CoefficientField {
    pub model: Arc<DeformationModel>,
    pub diffusion: Arc<dyn ScalarField>,
}

impl CoefficientField {
    pub fn new(model: Arc<DeformationModel>, diffusion: Arc<dyn ScalarField>) -> Self {
        Self { model, diffusion }
    }

    pub fn unit_diffusion(model: Arc<DeformationModel>) -> Self {
        Self::new(model, Arc::new(ConstantField(1.0)))
    }

    pub fn coefficient_matrix(&self, x: &Point, y: &ParamPoint) -> Result<CoefficientSample> {
        self.coefficient_matrix_near(x, x, y)
    }

    pub fn coefficient_matrix_near(
        &self,
        x: &Point,
        probe: &Point,
        y: &ParamPoint,
    ) -> Result<CoefficientSample> {
        let jac = self.model.jacobian_near(x, probe, y)?;
        let mapped = self.model.map_point(x, y)?;
        coefficient_from_jacobian(self.diffusion.value(x), &jac, x, mapped, y.as_slice())
    }

    /// Pre-evaluates every `y`-independent quantity at the given points.
    pub fn tabulate(&self, points: &[SamplePoint]) -> TabulatedCoefficient {
        let n = self.model.n_total();
        let mut basis = Vec::with_capacity(points.len() * n);
        let mut basis_grad = Vec::with_capacity(points.len() * n);
        let mut dir = Vec::with_capacity(points.len());
        let mut dir_jac = Vec::with_capacity(points.len());
        let mut diffusion = Vec::with_capacity(points.len());
        for p in points {
            for l in 0..n {
                let b = self.model.basis(l);
                basis.push(b.value(&p.x));
                basis_grad.push(b.gradient(&p.x));
            }
            dir.push(self.model.direction().value(&p.x));
            dir_jac.push(self.model.direction().jacobian(&p.x, &p.probe));
            diffusion.push(self.diffusion.value(&p.x));
        }
        TabulatedCoefficient {
            n_terms: n,
            sqrt_mu: self.model.sqrt_mu().to_vec(),
            points: points.iter().map(|p| p.x).collect(),
            basis,
            basis_grad,
            dir,
            dir_jac,
            diffusion,
        }
    }
}

/// Coefficient evaluator with all spatial fields cached at fixed points.
///
/// Uses `dF = I + e dv + v (grad e)^T`, which equals the term-by-term sum of
/// `B_l` up to rounding.
#[derive(Debug, Clone)]
pub struct TabulatedCoefficient {
    n_terms: usize,
    sqrt_mu: Vec<f64>,
    points: Vec<Point>,
    basis: Vec<f64>,
    basis_grad: Vec<Point>,
    dir: Vec<Point>,
    dir_jac: Vec<Mat2>,
    diffusion: Vec<f64>,
}

impl TabulatedCoefficient {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn point(&self, q: usize) -> &Point {
        &self.points[q]
    }

    pub fn coefficient(&self, q: usize, y: &[f64]) -> Result<CoefficientSample> {
        if y.len() > self.n_terms {
            return param_err(format!(
                "parameter point has {} components, model has {}",
                y.len(),
                self.n_terms
            ));
        }
        let row = q * self.n_terms;
        let mut e = 0.0;
        let mut grad_e = Point::zeros();
        for (l, yl) in y.iter().enumerate() {
            let s = self.sqrt_mu[l] * yl;
            e += s * self.basis[row + l];
            grad_e += self.basis_grad[row + l] * s;
        }
        let v = self.dir[q];
        let jac = Mat2::identity() + self.dir_jac[q] * e + v * grad_e.transpose();
        let x = self.points[q];
        coefficient_from_jacobian(self.diffusion[q], &jac, &x, x + v * e, y)
    }
}

/// The square-domain experiment: `v = (0, x2 - 1/2)` on the upper half,
/// `b_1 = 1` and `b_n = phi_n(x1)` for `n >= 2`, uniform `Y_n` on
/// `(-sqrt 3, sqrt 3)` rescaled to `[-1, 1]` with `sqrt 3` and `c` folded into
/// the amplitudes.
pub fn build_square_testcase(c: f64, l: f64, l_p: f64, n_total: usize) -> Result<DeformationModel> {
    if !(c >= 0.0 && c.is_finite()) {
        return param_err(format!("c must be non-negative, got {c}"));
    }
    if !(l > 0.0 && l.is_finite()) {
        return param_err(format!("L must be positive, got {l}"));
    }
    if !(l_p > 0.0 && l_p.is_finite()) {
        return param_err(format!("L_p must be positive, got {l_p}"));
    }
    if n_total == 0 {
        return param_err("N must be at least 1");
    }
    let scale = c * 3f64.sqrt();
    let root = (PI.sqrt() * l).sqrt();
    let mut sqrt_mu = Vec::with_capacity(n_total);
    let mut basis: Vec<Arc<dyn ScalarField>> = Vec::with_capacity(n_total);
    sqrt_mu.push(scale * (PI.sqrt() * l / 2.0).sqrt());
    basis.push(Arc::new(ConstantField(1.0)));
    for n in 2..=n_total {
        sqrt_mu.push(scale * root / n as f64);
        basis.push(Arc::new(square_mode(n, l_p)));
    }
    let mut model = DeformationModel::new(
        sqrt_mu,
        basis,
        Arc::new(UpperHalfStretch { interface: 0.5 }),
    )?;
    model.square = Some(SquareParams {
        c,
        l,
        l_p,
        n_total,
        decay: Decay::Linear,
    });
    Ok(model)
}

/// `phi_n(x1) = n^{-1} sin(floor(n/2) pi x1 / L_p)` for even `n`, cosine for odd `n`.
pub fn square_mode(n: usize, l_p: f64) -> TrigMode {
    TrigMode {
        amplitude: 1.0 / n as f64,
        frequency: (n / 2) as f64 * PI / l_p,
        kind: if n.is_multiple_of(2) { Trig::Sin } else { Trig::Cos },
    }
}

impl SquareParams {
    pub fn build(&self) -> Result<DeformationModel> {
        build_square_testcase(self.c, self.l, self.l_p, self.n_total)
    }
}
