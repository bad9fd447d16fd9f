//! Generalized Smolyak interpolation and quadrature on `[-1, 1]^N` with
//! Clenshaw-Curtis abscissas.
//!
//! A grid is stored in combination form: every multi-index `i` with a
//! non-zero coefficient `c(i)` contributes the full tensor interpolant on the
//! nodes `cc_nodes(m(i_1)) x ... x cc_nodes(m(i_N))`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

pub type MultiIndex = Vec<usize>;

/// Rounding used to merge coinciding nodes.
const NODE_QUANTUM: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RuleKind {
    /// Tensor product, `max(i_n - 1) <= w`, `m(i) = i`.
    TP,
    /// Total degree, `sum(i_n - 1) <= w`, `m(i) = i`.
    TD,
    /// Hyperbolic cross, `prod(i_n) <= w + 1`, `m(i) = i`.
    HC,
    /// Smolyak, `sum(i_n - 1) <= w`, `m(i) = 2^(i-1) + 1`.
    SM,
}

impl std::str::FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TP" => Ok(RuleKind::TP),
            "TD" => Ok(RuleKind::TD),
            "HC" => Ok(RuleKind::HC),
            "SM" => Ok(RuleKind::SM),
            _ => param_err(format!("unknown index rule {s:?} (expected TP, TD, HC or SM)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexRule {
    pub kind: RuleKind,
    pub w: usize,
}

impl IndexRule {
    pub fn new(kind: RuleKind, w: usize) -> Self {
        Self { kind, w }
    }

    pub fn smolyak(w: usize) -> Self {
        Self::new(RuleKind::SM, w)
    }

    /// Number of 1D nodes at level `i >= 1`; `m(0) = 0`.
    pub fn growth(&self, i: usize) -> usize {
        match self.kind {
            RuleKind::SM => growth(i),
            _ => i,
        }
    }

    /// `g(i)`; the rule admits `i` when `g(i) <= w`.
    pub fn g(&self, i: &[usize]) -> usize {
        debug_assert!(i.iter().all(|&k| k >= 1));
        match self.kind {
            RuleKind::TP => i.iter().map(|k| k - 1).max().unwrap_or(0),
            RuleKind::TD | RuleKind::SM => i.iter().map(|k| k - 1).sum(),
            RuleKind::HC => i
                .iter()
                .try_fold(1usize, |acc, &k| acc.checked_mul(k))
                .unwrap_or(usize::MAX)
                - 1,
        }
    }

    pub fn admits(&self, i: &[usize]) -> bool {
        self.g(i) <= self.w
    }

    /// Membership of the multi-degree `p` in the polynomial space on which
    /// the rule is exact.
    pub fn polynomial_space_contains(&self, p: &[usize]) -> bool {
        let w = self.w;
        match self.kind {
            RuleKind::TP => p.iter().all(|&d| d <= w),
            RuleKind::TD => p.iter().sum::<usize>() <= w,
            RuleKind::HC => {
                p.iter()
                    .try_fold(1usize, |acc, &d| acc.checked_mul(d + 1))
                    .is_some_and(|v| v <= w + 1)
            }
            RuleKind::SM => p.iter().map(|&d| smolyak_degree_cost(d)).sum::<usize>() <= w,
        }
    }
}

fn smolyak_degree_cost(p: usize) -> usize {
    match p {
        0 => 0,
        1 => 1,
        _ => (usize::BITS - (p - 1).leading_zeros()) as usize,
    }
}

/// Nested growth `m(1) = 1`, `m(i) = 2^(i-1) + 1`; `m(0) = 0`.
pub fn growth(i: usize) -> usize {
    match i {
        0 => 0,
        1 => 1,
        _ => (1usize << (i - 1)) + 1,
    }
}

/// Clenshaw-Curtis abscissas `-cos(pi (k - 1) / (m - 1))`, ascending.
///
/// Evaluated as `sin(pi (2k - m + 1) / (2 (m - 1)))`, which is odd-symmetric
/// and bit-identical for the nodes shared by nested levels.
pub fn cc_nodes(m: usize) -> Result<Vec<f64>> {
    match m {
        0 => param_err("Clenshaw-Curtis rule needs at least one node"),
        1 => Ok(vec![0.0]),
        _ => {
            let n = (m - 1) as f64;
            Ok((0..m)
                .map(|k| {
                    let num = 2.0 * k as f64 - n;
                    if num == 0.0 {
                        0.0
                    } else {
                        (PI * num / (2.0 * n)).sin()
                    }
                })
                .collect())
        }
    }
}

/// Interpolatory Clenshaw-Curtis weights for the uniform density on
/// `[-1, 1]` (they sum to one).
pub fn cc_weights(m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return param_err("Clenshaw-Curtis rule needs at least one node");
    }
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let n = m - 1;
    let nf = n as f64;
    let mut w = vec![0.0; m];
    let theta = |k: usize| PI * k as f64 / nf;
    if n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
    }
    for (k, wk) in w.iter_mut().enumerate().take(n).skip(1) {
        let mut v = 1.0;
        if n.is_multiple_of(2) {
            for j in 1..n / 2 {
                let jf = j as f64;
                v -= 2.0 * (2.0 * jf * theta(k)).cos() / (4.0 * jf * jf - 1.0);
            }
            v -= (nf * theta(k)).cos() / (nf * nf - 1.0);
        } else {
            for j in 1..=(n - 1) / 2 {
                let jf = j as f64;
                v -= 2.0 * (2.0 * jf * theta(k)).cos() / (4.0 * jf * jf - 1.0);
            }
        }
        *wk = 2.0 * v / nf;
    }
    // the formula integrates over [-1, 1]; divide by its length
    Ok(w.into_iter().map(|v| 0.5 * v).collect())
}

/// One-dimensional rule: nodes, quadrature weights and barycentric weights.
#[derive(Debug, Clone)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    bary: Vec<f64>,
}

impl Rule1d {
    pub fn new(m: usize) -> Result<Self> {
        let nodes = cc_nodes(m)?;
        let weights = cc_weights(m)?;
        let bary = (0..m)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == m - 1 {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        Ok(Self {
            nodes,
            weights,
            bary,
        })
    }

    /// Lagrange basis values `l_k(t)` for all `k`.
    pub fn basis(&self, t: f64, out: &mut Vec<f64>) {
        out.clear();
        let m = self.nodes.len();
        if m == 1 {
            out.push(1.0);
            return;
        }
        if let Some(hit) = self.nodes.iter().position(|&x| x == t) {
            out.resize(m, 0.0);
            out[hit] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for (x, b) in self.nodes.iter().zip(&self.bary) {
            let v = b / (t - x);
            out.push(v);
            denom += v;
        }
        for v in out.iter_mut() {
            *v /= denom;
        }
    }
}

/// All multi-indices admitted by `rule` in `n_s` dimensions, in
/// lexicographic order.
pub fn index_set(rule: &IndexRule, n_s: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![1; n_s];
    fn rec(rule: &IndexRule, dim: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if dim == cur.len() {
            out.push(cur.clone());
            return;
        }
        // trailing entries are 1, so admissibility of `cur` is monotone in cur[dim]
        loop {
            if !rule.admits(cur) {
                break;
            }
            rec(rule, dim + 1, cur, out);
            cur[dim] += 1;
        }
        cur[dim] = 1;
    }
    if n_s == 0 {
        return vec![Vec::new()];
    }
    rec(rule, 0, &mut cur, &mut out);
    out
}

/// `c(i) = sum over j in {0,1}^N with g(i + j) <= w of (-1)^|j|`, non-zero
/// entries only.
pub fn combination_coefficients(rule: &IndexRule, n_s: usize) -> Vec<(MultiIndex, i64)> {
    fn rec(rule: &IndexRule, dim: usize, cur: &mut Vec<usize>, parity: i64) -> i64 {
        if dim == cur.len() {
            return parity;
        }
        let mut total = rec(rule, dim + 1, cur, parity);
        cur[dim] += 1;
        if rule.admits(cur) {
            total += rec(rule, dim + 1, cur, -parity);
        }
        cur[dim] -= 1;
        total
    }
    index_set(rule, n_s)
        .into_iter()
        .filter_map(|i| {
            let mut cur = i.clone();
            let c = rec(rule, 0, &mut cur, 1);
            (c != 0).then_some((i, c))
        })
        .collect()
}

/// Density of the parameters on `[-1, 1]^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    #[default]
    Uniform,
}

/// One tensor grid of the combination formula.
#[derive(Debug, Clone)]
pub struct Component {
    pub index: MultiIndex,
    pub coeff: i64,
    /// Node ids in tensor order, first dimension fastest.
    pub node_ids: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SparseGrid {
    rule: IndexRule,
    n_s: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    components: Vec<Component>,
    contributions: Vec<usize>,
    rules_1d: BTreeMap<usize, Rule1d>,
}

fn node_key(y: &[f64]) -> Vec<i64> {
    y.iter().map(|v| (v / NODE_QUANTUM).round() as i64).collect()
}

impl SparseGrid {
    pub fn build(rule: IndexRule, n_s: usize, density: Density) -> Result<Self> {
        match density {
            Density::Uniform => {}
        }
        if n_s == 0 {
            return param_err("sparse grid needs at least one dimension");
        }
        let coeffs = combination_coefficients(&rule, n_s);
        let mut rules_1d: BTreeMap<usize, Rule1d> = BTreeMap::new();
        for (i, _) in &coeffs {
            for &k in i {
                let m = rule.growth(k);
                if let std::collections::btree_map::Entry::Vacant(e) = rules_1d.entry(m) {
                    e.insert(Rule1d::new(m)?);
                }
            }
        }
        let mut lookup: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
        let mut nodes: Vec<Vec<f64>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut contributions: Vec<usize> = Vec::new();
        let mut components = Vec::with_capacity(coeffs.len());
        for (index, coeff) in coeffs {
            let r: Vec<&Rule1d> = index.iter().map(|&k| &rules_1d[&rule.growth(k)]).collect();
            let size: usize = r.iter().map(|r| r.nodes.len()).product();
            let mut node_ids = Vec::with_capacity(size);
            let mut digits = vec![0usize; n_s];
            let mut y = vec![0.0; n_s];
            for _ in 0..size {
                let mut wprod = coeff as f64;
                for d in 0..n_s {
                    y[d] = r[d].nodes[digits[d]];
                    wprod *= r[d].weights[digits[d]];
                }
                let key = node_key(&y);
                let id = *lookup.entry(key).or_insert_with(|| {
                    nodes.push(y.clone());
                    weights.push(0.0);
                    contributions.push(0);
                    nodes.len() - 1
                });
                weights[id] += wprod;
                contributions[id] += 1;
                node_ids.push(id);
                for d in 0..n_s {
                    digits[d] += 1;
                    if digits[d] < r[d].nodes.len() {
                        break;
                    }
                    digits[d] = 0;
                }
            }
            components.push(Component {
                index,
                coeff,
                node_ids,
            });
        }
        Ok(Self {
            rule,
            n_s,
            nodes,
            weights,
            components,
            contributions,
            rules_1d,
        })
    }

    pub fn rule(&self) -> IndexRule {
        self.rule
    }

    pub fn dim(&self) -> usize {
        self.n_s
    }

    /// Number of distinct nodes.
    pub fn eta(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Number of tensor grids each node belongs to.
    pub fn contributions(&self) -> &[usize] {
        &self.contributions
    }

    pub fn rule_1d(&self, m: usize) -> Option<&Rule1d> {
        self.rules_1d.get(&m)
    }

    pub fn find_node(&self, y: &[f64]) -> Option<usize> {
        if y.len() != self.n_s {
            return None;
        }
        let key = node_key(y);
        self.nodes.iter().position(|n| node_key(n) == key)
    }

    fn check_samples(&self, values: &[f64]) -> Result<()> {
        if values.len() < self.nodes.len() {
            return Err(Error::MissingSample(values.len()));
        }
        Ok(())
    }

    /// `sum_k w_k v_k`, the integral of the sparse interpolant.
    pub fn quadrature(&self, values: &[f64]) -> Result<f64> {
        self.check_samples(values)?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    /// Evaluates the sparse interpolant of the node values at `y`.
    pub fn interpolate(&self, values: &[f64], y: &[f64]) -> Result<f64> {
        self.check_samples(values)?;
        if y.len() != self.n_s {
            return param_err(format!("point has {} coordinates, grid has {}", y.len(), self.n_s));
        }
        let mut basis: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        let mut total = 0.0;
        for comp in &self.components {
            let mut per_dim: Vec<&Vec<f64>> = Vec::with_capacity(self.n_s);
            for (d, &k) in comp.index.iter().enumerate() {
                let m = self.rule.growth(k);
                basis.entry((d, m)).or_insert_with(|| {
                    let mut b = Vec::new();
                    self.rules_1d[&m].basis(y[d], &mut b);
                    b
                });
            }
            for (d, &k) in comp.index.iter().enumerate() {
                per_dim.push(&basis[&(d, self.rule.growth(k))]);
            }
            total += comp.coeff as f64 * tensor_contract(&per_dim, |pos| values[comp.node_ids[pos]]);
        }
        Ok(total)
    }

    /// Writes one line per node: coordinates, weight, number of tensor grids.
    pub fn write_dump(&self, out: &mut impl Write) -> Result<()> {
        let head: Vec<String> = (1..=self.n_s).map(|d| format!("y{d}")).collect();
        writeln!(out, "{} weight components", head.join(" "))?;
        for ((y, w), c) in self.nodes.iter().zip(&self.weights).zip(&self.contributions) {
            let coords: Vec<String> = y.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{} {w:.16e} {c}", coords.join(" "))?;
        }
        Ok(())
    }
}

/// `sum over tensor positions of prod_d basis[d][k_d] * value(pos)`, first
/// dimension fastest.
fn tensor_contract(basis: &[&Vec<f64>], value: impl Fn(usize) -> f64) -> f64 {
    let n = basis.len();
    let size: usize = basis.iter().map(|b| b.len()).product();
    let mut digits = vec![0usize; n];
    let mut total = 0.0;
    for pos in 0..size {
        let mut p = 1.0;
        for d in 0..n {
            p *= basis[d][digits[d]];
            if p == 0.0 {
                break;
            }
        }
        if p != 0.0 {
            total += p * value(pos);
        }
        for d in 0..n {
            digits[d] += 1;
            if digits[d] < basis[d].len() {
                break;
            }
            digits[d] = 0;
        }
    }
    total
}

/// Evaluates the sparse interpolant of `f` at `y` through the hierarchical
/// form `sum over admissible i of (Delta^{m(i_1)} x ... x Delta^{m(i_N)}) f`,
/// sampling `f` on each full tensor grid directly.
pub fn evaluate_difference_form(
    rule: &IndexRule,
    n_s: usize,
    f: impl Fn(&[f64]) -> f64,
    y: &[f64],
) -> Result<f64> {
    let mut rules: BTreeMap<usize, Rule1d> = BTreeMap::new();
    let mut total = 0.0;
    for i in index_set(rule, n_s) {
        for mask in 0u64..(1u64 << n_s) {
            let lower: Vec<usize> = (0..n_s)
                .map(|d| i[d] - ((mask >> d) & 1) as usize)
                .collect();
            if lower.contains(&0) {
                continue;
            }
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let ms: Vec<usize> = lower.iter().map(|&k| rule.growth(k)).collect();
            for &m in &ms {
                if let std::collections::btree_map::Entry::Vacant(e) = rules.entry(m) {
                    e.insert(Rule1d::new(m)?);
                }
            }
            let r: Vec<&Rule1d> = ms.iter().map(|m| &rules[m]).collect();
            let basis: Vec<Vec<f64>> = r
                .iter()
                .zip(y)
                .map(|(r, &t)| {
                    let mut b = Vec::new();
                    r.basis(t, &mut b);
                    b
                })
                .collect();
            let refs: Vec<&Vec<f64>> = basis.iter().collect();
            let sizes: Vec<usize> = r.iter().map(|r| r.nodes.len()).collect();
            let value = tensor_contract(&refs, |pos| {
                let mut rem = pos;
                let pt: Vec<f64> = (0..n_s)
                    .map(|d| {
                        let k = rem % sizes[d];
                        rem /= sizes[d];
                        r[d].nodes[k]
                    })
                    .collect();
                f(&pt)
            });
            total += sign * value;
        }
    }
    Ok(total)
}
