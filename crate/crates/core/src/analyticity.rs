//! Size of the complex region in which the solution extends analytically,
//! and the convergence and work constants that follow from it.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

/// Both published upper bounds on the region half-width `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBounds {
    pub gamma: f64,
    /// `min(d~ log(gamma) / (d + log(gamma)), sqrt(1 + d~^2/2) - 1)`.
    pub beta_lemma: f64,
    /// `min(d~ log(2 - gamma) / (d + log(2 - gamma)), sqrt(1 + d~^2/2) - 1)`.
    pub beta_theorem: f64,
}

impl BetaBounds {
    /// Largest admissible `beta`: the lemma form, since the theorem form is
    /// negative whenever `gamma > 1`.
    pub fn beta_max(&self) -> f64 {
        self.beta_lemma
    }
}

fn check_delta(delta_tilde: f64) -> Result<()> {
    if !(delta_tilde > 0.0 && delta_tilde < 1.0) {
        return param_err(format!("delta_tilde must lie in (0, 1), got {delta_tilde}"));
    }
    Ok(())
}

/// `gamma = (2 d~^d + (2 - d~)^d) / (d~^d + (2 - d~)^d)`.
pub fn gamma(delta_tilde: f64, d: u32) -> f64 {
    let a = delta_tilde.powi(d as i32);
    let b = (2.0 - delta_tilde).powi(d as i32);
    (2.0 * a + b) / (a + b)
}

pub fn beta_bound(delta_tilde: f64, d: u32) -> Result<BetaBounds> {
    check_delta(delta_tilde)?;
    if d == 0 {
        return param_err("spatial dimension must be at least 1");
    }
    let g = gamma(delta_tilde, d);
    let df = d as f64;
    let cap = (1.0 + 0.5 * delta_tilde * delta_tilde).sqrt() - 1.0;
    let lg = g.ln();
    let lt = (2.0 - g).ln();
    Ok(BetaBounds {
        gamma: g,
        beta_lemma: (delta_tilde * lg / (df + lg)).min(cap),
        beta_theorem: (delta_tilde * lt / (df + lt)).min(cap),
    })
}

/// `alpha = 2 - exp(d beta / (d~ - beta))`.
pub fn alpha(beta: f64, delta_tilde: f64, d: u32) -> Result<f64> {
    if !(beta >= 0.0 && beta < delta_tilde) {
        return param_err(format!("beta must lie in [0, {delta_tilde}), got {beta}"));
    }
    Ok(2.0 - (d as f64 * beta / (delta_tilde - beta)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    pub alpha: f64,
    /// Lower bound on `lambda_min(Re G^{-1})`.
    pub b: f64,
    /// Upper bound on `sigma_max(Im G^{-1})`.
    pub c: f64,
    /// Upper bound on `lambda_max(Re G^{-1})`.
    pub d: f64,
    /// Coercivity of `Re G` over the region.
    pub epsilon: f64,
}

pub fn lemma_constants(
    beta: f64,
    delta_tilde: f64,
    d: u32,
    a_min: f64,
    a_max: f64,
) -> Result<LemmaConstants> {
    check_delta(delta_tilde)?;
    if !(a_min > 0.0 && a_max >= a_min) {
        return param_err(format!("need 0 < a_min <= a_max, got {a_min}, {a_max}"));
    }
    let al = alpha(beta, delta_tilde, d)?;
    let dt = delta_tilde;
    let di = d as i32;
    let two_m = 2.0 - dt;
    let s = beta * (2.0 + (beta - dt));
    let b = (dt.powi(di + 1) * al * (dt - 2.0 * beta)
        - 2.0 * s * (1.0 - al) * two_m.powi(di))
        / (a_max * two_m.powi(2 * di) * (2.0 - al).powi(2));
    let denom = a_min * dt.powi(2 * di) * al * al;
    let dd = (two_m.powi(di) * (2.0 - al) * (two_m + beta).powi(2)
        + 2.0 * (1.0 - dt).powi(di) * (2.0 - al) * s)
        / denom;
    let c = (two_m.powi(di) * (2.0 - al) * 2.0 * s
        + two_m.powi(di) * (1.0 - al) * ((two_m + beta).powi(2) + beta * beta))
        / denom;
    if !(b > 0.0) || !(al > 0.0) {
        return Err(Error::InfeasibleRegion(format!(
            "beta = {beta} gives B = {b:e}, alpha = {al}; choose a smaller beta"
        )));
    }
    let epsilon = 1.0 / ((1.0 + (c / b).powi(2)) * dd);
    Ok(LemmaConstants {
        alpha: al,
        b,
        c,
        d: dd,
        epsilon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParameters {
    pub tau: f64,
    pub sigma_hat: f64,
    pub sigma: f64,
    pub mu2: f64,
    pub mu3: f64,
}

/// Constants of the nested Clenshaw-Curtis sparse-grid estimate that are
/// defined outside this crate; they are inputs with placeholder defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseGridConstants {
    pub c1: f64,
    /// `None` selects `1 + sqrt(pi / (2 sigma)) / log 2`.
    pub c2_tilde: Option<f64>,
    /// `None` selects `(e log 2 - 1) / c2_tilde`.
    pub delta_star: Option<f64>,
}

impl Default for SparseGridConstants {
    fn default() -> Self {
        Self {
            c1: 2.0,
            c2_tilde: None,
            delta_star: None,
        }
    }
}

impl SparseGridConstants {
    pub fn c2_tilde(&self, sigma: f64) -> f64 {
        self.c2_tilde.unwrap_or_else(|| {
            1.0 + (std::f64::consts::PI / (2.0 * sigma)).sqrt() / std::f64::consts::LN_2
        })
    }

    pub fn delta_star(&self, sigma: f64) -> f64 {
        self.delta_star.unwrap_or_else(|| {
            (std::f64::consts::E * std::f64::consts::LN_2 - 1.0) / self.c2_tilde(sigma)
        })
    }
}

/// `sigma_hat = asinh(tau) = log(sqrt(tau^2 + 1) + tau)`.
pub fn sigma_hat(tau: f64) -> f64 {
    ((tau * tau + 1.0).sqrt() + tau).ln()
}

/// `mu2 = log 2 / (N_s (1 + log(2 N_s)))`.
pub fn mu2(n_s: usize) -> f64 {
    let n = n_s as f64;
    std::f64::consts::LN_2 / (n * (1.0 + (2.0 * n).ln()))
}

pub fn rate_parameters(
    beta: f64,
    delta_tilde: f64,
    n_s: usize,
    consts: &SparseGridConstants,
) -> Result<RateParameters> {
    if !(delta_tilde < 1.0) {
        return param_err("tau is undefined for delta_tilde >= 1");
    }
    if n_s == 0 {
        return param_err("N_s must be at least 1");
    }
    if !(beta >= 0.0) {
        return param_err(format!("beta must be non-negative, got {beta}"));
    }
    let tau = beta / (1.0 - delta_tilde);
    let sh = sigma_hat(tau);
    let sigma = 0.5 * sh;
    let (c2, ds) = if sigma > 0.0 {
        (consts.c2_tilde(sigma), consts.delta_star(sigma))
    } else {
        (f64::INFINITY, 0.0)
    };
    let mu3 = if sigma > 0.0 {
        sigma * ds * c2 / (1.0 + (2.0 * n_s as f64).ln())
    } else {
        0.0
    };
    Ok(RateParameters {
        tau,
        sigma_hat: sh,
        sigma,
        mu2: mu2(n_s),
        mu3,
    })
}

/// Full set of region and rate constants for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticityReport {
    pub delta_tilde: f64,
    pub d: u32,
    pub a_min: f64,
    pub a_max: f64,
    pub n_s: usize,
    pub gamma: f64,
    pub beta_lemma: f64,
    pub beta_theorem: f64,
    pub beta_max: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(rename = "B_const")]
    pub b_const: f64,
    #[serde(rename = "C_const")]
    pub c_const: f64,
    #[serde(rename = "D_const")]
    pub d_const: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub sigma_hat: f64,
    pub sigma: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub c1: f64,
    pub c2_tilde: f64,
    pub delta_star: f64,
    /// `eta_required(tol)` is [`work_model`] with these rates.
    pub eta_required: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionInput {
    pub delta_tilde: f64,
    pub d: u32,
    pub a_min: f64,
    pub a_max: f64,
    pub n_s: usize,
    /// `beta = beta_fraction * beta_max`.
    pub beta_fraction: f64,
}

impl Default for RegionInput {
    fn default() -> Self {
        Self {
            delta_tilde: 0.5,
            d: 2,
            a_min: 1.0,
            a_max: 1.0,
            n_s: 1,
            beta_fraction: 0.9,
        }
    }
}

pub fn analyze(input: &RegionInput, consts: &SparseGridConstants) -> Result<AnalyticityReport> {
    if !(input.beta_fraction > 0.0 && input.beta_fraction < 1.0) {
        return param_err(format!("beta fraction must lie in (0, 1), got {}", input.beta_fraction));
    }
    let bounds = beta_bound(input.delta_tilde, input.d)?;
    let beta = input.beta_fraction * bounds.beta_max();
    let lc = lemma_constants(beta, input.delta_tilde, input.d, input.a_min, input.a_max)?;
    let rates = rate_parameters(beta, input.delta_tilde, input.n_s, consts)?;
    Ok(AnalyticityReport {
        delta_tilde: input.delta_tilde,
        d: input.d,
        a_min: input.a_min,
        a_max: input.a_max,
        n_s: input.n_s,
        gamma: bounds.gamma,
        beta_lemma: bounds.beta_lemma,
        beta_theorem: bounds.beta_theorem,
        beta_max: bounds.beta_max(),
        beta,
        alpha: lc.alpha,
        b_const: lc.b,
        c_const: lc.c,
        d_const: lc.d,
        epsilon: lc.epsilon,
        tau: rates.tau,
        sigma_hat: rates.sigma_hat,
        sigma: rates.sigma,
        mu2: rates.mu2,
        mu3: rates.mu3,
        c1: consts.c1,
        c2_tilde: consts.c2_tilde(rates.sigma),
        delta_star: consts.delta_star(rates.sigma),
        eta_required: "ceil((3 |rho/rho_hat| C_SG C_T C_F F^N_s e^sigma / tol)^((1 + log(2 N_s)) / sigma))"
            .into(),
    })
}

impl AnalyticityReport {
    /// Aligned `name value` lines.
    pub fn to_text(&self) -> String {
        let v = serde_json::to_value(self).expect("serializable report");
        let mut out = String::new();
        if let serde_json::Value::Object(map) = v {
            let width = map.keys().map(|k| k.len()).max().unwrap_or(0);
            for (k, val) in map {
                out.push_str(&format!("{k:<width$}  {val}\n"));
            }
        }
        out
    }

    /// Sparse-grid error bound at `eta` knots, scaled by `q_scale`.
    pub fn predicted_error(&self, eta: f64, q_scale: f64) -> Result<f64> {
        predicted_error(
            eta,
            self.n_s,
            self.sigma,
            q_scale,
            self.delta_star,
            self.c1,
            self.c2_tilde,
        )
    }
}

/// `Q eta^mu3 exp(-N_s sigma / 2^(1/N_s) eta^mu2)` with
/// `Q = q_scale C1 / exp(sigma delta* C2~) max(1, C1)^N_s / |1 - C1|`.
pub fn predicted_error(
    eta: f64,
    n_s: usize,
    sigma: f64,
    q_scale: f64,
    delta_star: f64,
    c1: f64,
    c2_tilde: f64,
) -> Result<f64> {
    if !(eta >= 1.0) {
        return param_err(format!("eta must be at least 1, got {eta}"));
    }
    if c1 == 1.0 {
        return param_err("C1 = 1 makes the prefactor singular");
    }
    let n = n_s as f64;
    let q = q_scale * c1 / (sigma * delta_star * c2_tilde).exp() * c1.max(1.0).powf(n)
        / (1.0 - c1).abs();
    let mu3 = sigma * delta_star * c2_tilde / (1.0 + (2.0 * n).ln());
    Ok(q * eta.powf(mu3) * (-n * sigma / 2f64.powf(1.0 / n) * eta.powf(mu2(n_s))).exp())
}

/// Model constants of the work estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkParams {
    pub c_d: f64,
    pub d2: f64,
    /// Algebraic decay exponent of the truncation tail.
    pub l: f64,
    pub c_fe: f64,
    pub a_min: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub c_gamma: f64,
    pub d_gamma: f64,
    /// Finite element order.
    pub r: f64,
    pub d: u32,
    pub d3: f64,
    pub rho_ratio: f64,
    pub c_sg: f64,
    pub c_t: f64,
    pub c1: f64,
    pub sigma: f64,
    pub d1: f64,
    /// Solver complexity exponent.
    pub q: f64,
}

impl Default for WorkParams {
    fn default() -> Self {
        Self {
            c_d: 1.0,
            d2: 1.0,
            l: 1.0,
            c_fe: 1.0,
            a_min: 1.0,
            f_min: 0.5,
            f_max: 1.5,
            c_gamma: 1.0,
            d_gamma: 1.0,
            r: 1.0,
            d: 2,
            d3: 1.0,
            rho_ratio: 1.0,
            c_sg: 1.0,
            c_t: 1.0,
            c1: 2.0,
            sigma: 0.5,
            d1: 1.0,
            q: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkEstimate {
    pub n_s_required: usize,
    pub h_required: f64,
    pub n_h_required: f64,
    pub eta_required: f64,
    pub w_total: f64,
}

/// Ceiling that ignores round-off just above an integer.
fn ceil_rounded(x: f64) -> f64 {
    (x * (1.0 - 1e-12)).ceil()
}

pub fn work_model(tol: f64, p: &WorkParams) -> Result<WorkEstimate> {
    if !(tol > 0.0) {
        return param_err(format!("tolerance must be positive, got {tol}"));
    }
    if !(p.sigma > 0.0 && p.l > 0.0 && p.r > 0.0) {
        return param_err("sigma, l and r must be positive");
    }
    if p.c1 == 1.0 {
        return param_err("C1 = 1 makes C_F singular");
    }
    let n_s = ceil_rounded((p.d2 * tol / p.c_d).powf(-1.0 / p.l)).max(1.0) as usize;
    let fe = tol
        / (3.0
            * p.c_fe
            * p.a_min
            * p.f_min.powi(p.d as i32)
            * p.f_max.powi(-2)
            * p.c_gamma
            * p.d_gamma);
    let h = fe.powf(1.0 / (2.0 * p.r));
    let n_h = ceil_rounded(p.d3 * fe.powf(-(p.d as f64) / (2.0 * p.r)));
    let c_f = p.c1 / (1.0 - p.c1).abs();
    let f = p.c1.max(1.0);
    let base = 3.0 * p.rho_ratio * p.c_sg * p.c_t * c_f * f.powf(n_s as f64) * p.sigma.exp() / tol;
    let eta = ceil_rounded(base.powf((1.0 + (2.0 * n_s as f64).ln()) / p.sigma)).max(1.0);
    Ok(WorkEstimate {
        n_s_required: n_s,
        h_required: h,
        n_h_required: n_h,
        eta_required: eta,
        w_total: p.d1 * n_h.powf(p.q) * eta,
    })
}

/// Constants of the truncation estimate on the unit square with zero source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConstants {
    /// Poincare constant of the unit square, `1 / (pi sqrt 2)`.
    pub c_p: f64,
    pub f_max: f64,
    pub f_min: f64,
    pub h: f64,
    /// `C_P^2 / (a_min F_min^d F_max^-2)`.
    pub script_c: f64,
    /// Factor turning the solution bound into a QoI bound.
    pub c_qoi: f64,
}

/// `q_l2` is the `L^2` norm of the QoI density.
pub fn truncation_constants(
    delta_tilde: f64,
    d: u32,
    a_min: f64,
    a_max: f64,
    q_l2: f64,
) -> Result<TruncationConstants> {
    check_delta(delta_tilde)?;
    let di = d as i32;
    let df = d as f64;
    let c_p = 1.0 / (std::f64::consts::PI * std::f64::consts::SQRT_2);
    let f_max = 2.0 - delta_tilde;
    let f_min = delta_tilde;
    let h = f_max.powi(di - 1)
        * f_min.powi(-3)
        * (f_max * (2.0 + (1.0 - delta_tilde) / f_min) + df / f_min);
    let script_c = c_p * c_p / (a_min * f_min.powi(di) * f_max.powi(-2));
    let c_qoi = a_max / a_min * f_max.powi(2 * di + 2) * f_min.powi(-di - 2) * q_l2 * c_p;
    Ok(TruncationConstants {
        c_p,
        f_max,
        f_min,
        h,
        script_c,
        c_qoi,
    })
}

impl TruncationConstants {
    /// `C1 B_T + C2 C_T` for zero source, mapped to the QoI. `w_norm` and
    /// `u_norm` are `H^1` norms of the lift and the solution.
    pub fn qoi_bound(&self, a_max: f64, w_norm: f64, u_norm: f64, b_t: f64) -> f64 {
        let c1 = self.script_c * (a_max * a_max * self.h * w_norm + a_max * self.h * u_norm);
        self.c_qoi * c1 * b_t
    }
}
