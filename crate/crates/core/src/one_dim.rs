//! One-dimensional limit problem on an interval `(a, b)`.
//!
//! Fields vanish on an interior sub-interval (the hole) and minimize
//!
//! ```text
//!   int rho (|v'|^p + |v|^p)  /  ( int beta |v|^q )^{p/q}
//! ```
//!
//! with nodal weights `rho` and `beta`. Unit weights give the plain interval
//! problem, for which the optimal constant is known in closed form.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::minimize_quotient;
use crate::error::{Error, Result};
use crate::fem::{chain_precondition, field_scale, signed_pow, Evaluation, ProblemConfig, QuotientFunctional};
use crate::trace_solver::descent_options;

/// `(2 pi)^p (p - 1) / (2 alpha L p sin(pi / p))^p + 1`.
pub fn closed_form_limit_constant(p: f64, alpha: f64, length: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidConfig(format!("closed form needs p > 1, got {p}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::InvalidDomain(format!(
            "interval length must be positive, got {length}"
        )));
    }
    let denom = 2.0 * alpha * length * p * (PI / p).sin();
    Ok((2.0 * PI).powf(p) * (p - 1.0) / denom.powf(p) + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Weight {
    Unit,
    /// One value per node of the grid.
    Nodal(Vec<f64>),
}

impl Weight {
    pub fn from_fn(a: f64, b: f64, n_cells: usize, f: impl Fn(f64) -> f64) -> Weight {
        let h = (b - a) / n_cells as f64;
        Weight::Nodal((0..=n_cells).map(|i| f(a + i as f64 * h)).collect())
    }

    fn sample(&self, n_nodes: usize) -> Result<Vec<f64>> {
        match self {
            Weight::Unit => Ok(vec![1.0; n_nodes]),
            Weight::Nodal(v) if v.len() == n_nodes => {
                if v.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    Err(Error::InvalidConfig("weights must be finite and nonnegative".into()))
                } else {
                    Ok(v.clone())
                }
            }
            Weight::Nodal(v) => Err(Error::InvalidConfig(format!(
                "weight has {} samples, grid has {n_nodes} nodes",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OneDimProblem {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub cfg: ProblemConfig,
    pub rho: Weight,
    pub beta: Weight,
}

impl OneDimProblem {
    pub fn new(a: f64, b: f64, alpha: f64, cfg: ProblemConfig) -> Self {
        OneDimProblem {
            a,
            b,
            alpha,
            cfg,
            rho: Weight::Unit,
            beta: Weight::Unit,
        }
    }

    pub fn with_weights(mut self, rho: Weight, beta: Weight) -> Self {
        self.rho = rho;
        self.beta = beta;
        self
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    fn validate(&self, n_cells: usize) -> Result<()> {
        if !(self.a < self.b) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "need a < b, got ({}, {})",
                self.a, self.b
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if n_cells < 16 {
            return Err(Error::ResolutionTooCoarse {
                resolution: self.length() / n_cells as f64,
                detail: "the limit problem needs at least 16 cells".into(),
            });
        }
        self.cfg.validate(1)
    }

    /// Hole length in cells.
    pub fn hole_cells(&self, n_cells: usize) -> usize {
        ((self.alpha * n_cells as f64).round() as usize).clamp(1, n_cells - 1)
    }
}

struct LimitFunctional {
    h: f64,
    p: f64,
    q: f64,
    epsilon: f64,
    rho: Vec<f64>,
    beta: Vec<f64>,
}

impl LimitFunctional {
    fn node_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.rho.len() {
            0.5 * self.h
        } else {
            self.h
        }
    }
}

impl QuotientFunctional for LimitFunctional {
    fn n_dofs(&self) -> usize {
        self.rho.len()
    }

    fn exponents(&self) -> (f64, f64) {
        (self.p, self.q)
    }

    fn evaluate(&self, v: &[f64]) -> Evaluation {
        let n = v.len();
        let (p, q) = (self.p, self.q);
        let eps = self.epsilon * field_scale(v);
        let mut energy = 0.0;
        let mut boundary = 0.0;
        let mut d_energy = vec![0.0; n];
        let mut d_boundary = vec![0.0; n];
        for c in 0..n - 1 {
            let r = 0.5 * (self.rho[c] + self.rho[c + 1]);
            let d = (v[c + 1] - v[c]) / self.h;
            let s2 = eps * eps + d * d;
            energy += self.h * r * s2.powf(0.5 * p);
            let g = r * p * s2.powf(0.5 * p - 1.0) * d;
            d_energy[c + 1] += g;
            d_energy[c] -= g;
        }
        for i in 0..n {
            let w = self.node_weight(i);
            energy += w * self.rho[i] * v[i].abs().powf(p);
            d_energy[i] += w * self.rho[i] * p * signed_pow(v[i], p - 1.0);
            boundary += w * self.beta[i] * v[i].abs().powf(q);
            d_boundary[i] = w * self.beta[i] * q * signed_pow(v[i], q - 1.0);
        }
        Evaluation {
            energy,
            boundary,
            d_energy,
            d_boundary,
        }
    }

    fn precondition(&self, v: &[f64], g: &[f64], free: &[bool]) -> Option<Vec<f64>> {
        let n = v.len();
        let lengths = vec![self.h; n - 1];
        let cell_weight: Vec<f64> = (0..n - 1).map(|c| 0.5 * (self.rho[c] + self.rho[c + 1])).collect();
        let node_mass: Vec<f64> = (0..n).map(|i| self.node_weight(i) * self.rho[i]).collect();
        Some(chain_precondition(
            self.p,
            &lengths,
            &cell_weight,
            &node_mass,
            v,
            g,
            free,
        ))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitResult {
    pub value: f64,
    pub hole: (f64, f64),
    pub nodes: Vec<f64>,
    /// Nonnegative minimizer with `int beta |v|^q = 1`.
    pub extremal: Vec<f64>,
    pub lambda: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize the limit quotient over nodal fields vanishing on the closed
/// hole `[lo, hi]`, snapped to grid nodes.
pub fn solve_limit_problem(problem: &OneDimProblem, hole: (f64, f64), n_cells: usize) -> Result<LimitResult> {
    problem.validate(n_cells)?;
    let h = problem.length() / n_cells as f64;
    let (lo, hi) = hole;
    if !(lo <= hi) || lo < problem.a - 1e-12 || hi > problem.b + 1e-12 {
        return Err(Error::InvalidHole(format!(
            "hole ({lo}, {hi}) is not inside ({}, {})",
            problem.a, problem.b
        )));
    }
    let i0 = ((lo - problem.a) / h).round() as usize;
    let i1 = ((hi - problem.a) / h).round() as usize;
    let measure = (i1 - i0) as f64 * h;
    if (measure - problem.alpha * problem.length()).abs() > h * (1.0 + 1e-9) {
        return Err(Error::InvalidHole(format!(
            "hole measure {measure} differs from alpha (b - a) = {} by more than one cell",
            problem.alpha * problem.length()
        )));
    }
    solve_on_cells(problem, n_cells, i0, i1)
}

fn solve_on_cells(problem: &OneDimProblem, n_cells: usize, i0: usize, i1: usize) -> Result<LimitResult> {
    let n = n_cells + 1;
    let h = problem.length() / n_cells as f64;
    let functional = LimitFunctional {
        h,
        p: problem.cfg.p,
        q: problem.cfg.q,
        epsilon: problem.cfg.epsilon,
        rho: problem.rho.sample(n)?,
        beta: problem.beta.sample(n)?,
    };
    if functional.rho[..n - 1]
        .iter()
        .zip(&functional.rho[1..])
        .any(|(r0, r1)| r0 + r1 <= 0.0)
    {
        return Err(Error::InvalidConfig("rho must be positive on every cell".into()));
    }
    let free: Vec<bool> = (0..n).map(|i| i < i0 || i > i1).collect();
    if !(0..n).any(|i| free[i] && functional.beta[i] > 0.0) {
        return Err(Error::EmptyAdmissibleClass);
    }
    let init: Vec<f64> = free.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    let opts = descent_options(&problem.cfg);
    let out = minimize_quotient(&functional, &free, &init, &opts).ok_or(Error::EmptyAdmissibleClass)?;

    let (p, q) = (problem.cfg.p, problem.cfg.q);
    let ev = &out.evaluation;
    let (mut ab, mut bb) = (0.0, 0.0);
    for i in (0..n).filter(|&i| free[i]) {
        let (a, b) = (ev.d_energy[i] / p, ev.d_boundary[i] / q);
        ab += a * b;
        bb += b * b;
    }
    let lambda = if bb > 0.0 { ab / bb } else { 0.0 };
    let el_residual = (0..n)
        .filter(|&i| free[i])
        .map(|i| (ev.d_energy[i] / p - lambda * ev.d_boundary[i] / q).abs())
        .fold(0.0, f64::max);
    Ok(LimitResult {
        value: out.value,
        hole: (problem.a + i0 as f64 * h, problem.a + i1 as f64 * h),
        nodes: (0..n).map(|i| problem.a + i as f64 * h).collect(),
        extremal: out.u,
        lambda,
        el_residual,
        iterations: out.iterations,
        converged: out.converged,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitSweep {
    pub best: LimitResult,
    /// `(hole_start, value)` for every cell-aligned candidate.
    pub candidates: Vec<(f64, f64)>,
}

/// Exhaustive sweep over cell-aligned holes of measure `alpha (b - a)`.
/// Ties go to the leftmost start.
pub fn optimize_limit_hole(problem: &OneDimProblem, n_cells: usize) -> Result<LimitSweep> {
    problem.validate(n_cells)?;
    let m = problem.hole_cells(n_cells);
    let results: Vec<LimitResult> = (0..=n_cells - m)
        .into_par_iter()
        .map(|k| solve_on_cells(problem, n_cells, k, k + m))
        .collect::<Result<_>>()?;
    let candidates = results.iter().map(|r| (r.hole.0, r.value)).collect();
    let best = results
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .unwrap();
    Ok(LimitSweep { best, candidates })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verify1d {
    pub p: f64,
    pub alpha: f64,
    pub n_cells: usize,
    pub closed_form: f64,
    /// Endpoint hole `(b - alpha (b - a), b)`.
    pub fem_value: f64,
    pub relative_error: f64,
    /// Centered hole of the same measure.
    pub centered_value: f64,
    /// Endpoint hole of measure `(1 - alpha)(b - a)`.
    pub complementary_value: f64,
    pub complementary_error: f64,
    pub converged: bool,
}

/// Compare the FEM value of the endpoint hole with the closed form
/// (`q = p`, unit weights).
pub fn verify_1d(a: f64, b: f64, p: f64, alpha: f64, n_cells: usize, cfg: &ProblemConfig) -> Result<Verify1d> {
    let cfg = ProblemConfig { p, q: p, ..*cfg };
    let problem = OneDimProblem::new(a, b, alpha, cfg);
    let closed_form = closed_form_limit_constant(p, alpha, b - a)?;
    let len = b - a;
    let end = solve_limit_problem(&problem, (b - alpha * len, b), n_cells)?;
    let mid = 0.5 * (a + b);
    let centered = solve_limit_problem(&problem, (mid - 0.5 * alpha * len, mid + 0.5 * alpha * len), n_cells)?;
    let comp_problem = OneDimProblem::new(a, b, 1.0 - alpha, cfg);
    let comp = solve_limit_problem(&comp_problem, (a + alpha * len, b), n_cells)?;
    Ok(Verify1d {
        p,
        alpha,
        n_cells,
        closed_form,
        fem_value: end.value,
        relative_error: (end.value - closed_form).abs() / closed_form,
        centered_value: centered.value,
        complementary_value: comp.value,
        complementary_error: (comp.value - closed_form).abs() / closed_form,
        converged: end.converged && centered.converged && comp.converged,
    })
}
