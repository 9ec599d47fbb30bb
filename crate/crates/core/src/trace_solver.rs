//! Best trace constant `S(Gamma)` for a fixed boundary hole.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descent::{minimize_quotient, DescentOptions};
use crate::error::{Error, Result};
use crate::fem::{evaluate, Field, ProblemConfig, TraceFunctional};
use crate::geometry::{BoundaryHole, Mesh};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceResult {
    pub s_value: f64,
    /// Nonnegative extremal with unit boundary q-norm.
    pub extremal: Field,
    /// Least-squares Euler-Lagrange multiplier.
    pub lambda: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Free-DOF mask of the discrete space `X_Gamma`.
pub fn free_dofs(mesh: &Mesh, hole: &BoundaryHole) -> Vec<bool> {
    hole.vertex_mask(mesh).into_iter().map(|c| !c).collect()
}

pub(crate) fn descent_options(cfg: &ProblemConfig) -> DescentOptions {
    DescentOptions {
        grad_tolerance: cfg.dof_tolerance,
        rel_tolerance: cfg.rel_tolerance,
        max_iterations: cfg.max_inner_iterations,
    }
}

/// Minimize the discrete quotient over fields vanishing on the hole.
///
/// Starts from `init` when given (made nonnegative, zeroed on the hole),
/// otherwise from `1` on the free vertices.
pub fn solve_trace_constant(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    hole: &BoundaryHole,
    init: Option<&Field>,
) -> Result<TraceResult> {
    cfg.validate(mesh.dim())?;
    let free = free_dofs(mesh, hole);
    let any_free_boundary = (0..mesh.n_vertices()).any(|v| free[v] && mesh.is_boundary_vertex(v));
    if !any_free_boundary {
        return Err(Error::EmptyAdmissibleClass);
    }
    let ones: Vec<f64> = free.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    let functional = TraceFunctional { mesh, cfg };
    let opts = descent_options(cfg);

    let outcome = init
        .and_then(|u0| {
            assert_eq!(u0.len(), mesh.n_vertices());
            minimize_quotient(&functional, &free, &u0.0, &opts)
        })
        .or_else(|| minimize_quotient(&functional, &free, &ones, &opts))
        .expect("unit start always has positive boundary norm");

    let extremal = Field(outcome.u);
    let (lambda, el_residual) = multiplier_and_residual(mesh, cfg, &extremal, &free);
    Ok(TraceResult {
        s_value: outcome.value,
        extremal,
        lambda,
        el_residual,
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// Least-squares multiplier `lambda` of `a(u, phi) = lambda b(u, phi)` over
/// the free nodal test functions, and the sup-norm of the residual
/// `a(u, phi_i) - lambda b(u, phi_i)`.
fn multiplier_and_residual(mesh: &Mesh, cfg: &ProblemConfig, u: &Field, free: &[bool]) -> (f64, f64) {
    let ev = evaluate(mesh, cfg, &u.0);
    let (mut ab, mut bb) = (0.0, 0.0);
    for i in (0..free.len()).filter(|&i| free[i]) {
        let a = ev.d_energy[i] / cfg.p;
        let b = ev.d_boundary[i] / cfg.q;
        ab += a * b;
        bb += b * b;
    }
    let lambda = if bb > 0.0 { ab / bb } else { 0.0 };
    let residual = (0..free.len())
        .filter(|&i| free[i])
        .map(|i| (ev.d_energy[i] / cfg.p - lambda * ev.d_boundary[i] / cfg.q).abs())
        .fold(0.0, f64::max);
    (lambda, residual)
}

/// Weak Euler-Lagrange residual of `result` over the free test functions,
/// recomputed from the extremal. At a normalized stationary point this is
/// the free-DOF quotient gradient divided by `p`.
pub fn el_residual(mesh: &Mesh, cfg: &ProblemConfig, result: &TraceResult, hole: &BoundaryHole) -> f64 {
    multiplier_and_residual(mesh, cfg, &result.extremal, &free_dofs(mesh, hole)).1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivityReport {
    /// Minimum over vertices that are neither on nor adjacent to the hole.
    pub min_off_hole: f64,
    pub n_checked: usize,
    /// Maximum absolute value on hole vertices (exactly zero when honored).
    pub max_on_hole: f64,
    pub violation: bool,
}

pub fn positivity_check(mesh: &Mesh, result: &TraceResult, hole: &BoundaryHole) -> PositivityReport {
    let on_hole = hole.vertex_mask(mesh);
    let mut near = on_hole.clone();
    for (c, cell) in mesh.cells.iter().enumerate() {
        if cell.iter().any(|&v| on_hole[v]) {
            for &v in &mesh.cells[c] {
                near[v] = true;
            }
        }
    }
    let u = &result.extremal.0;
    let checked: Vec<f64> = (0..u.len()).filter(|&v| !near[v]).map(|v| u[v]).collect();
    let min_off_hole = checked.iter().copied().fold(f64::INFINITY, f64::min);
    let max_on_hole = (0..u.len())
        .filter(|&v| on_hole[v])
        .map(|v| u[v].abs())
        .fold(0.0, f64::max);
    PositivityReport {
        min_off_hole,
        n_checked: checked.len(),
        max_on_hole,
        violation: !(min_off_hole > 0.0) && !checked.is_empty(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartReport {
    pub best: TraceResult,
    pub values: Vec<f64>,
    /// `(max - min) / min` over all starts.
    pub relative_spread: f64,
}

/// Solve from the default start plus `restarts` random positive starts and
/// report the spread of the converged values.
pub fn solve_with_restarts(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    hole: &BoundaryHole,
    restarts: usize,
    seed: u64,
) -> Result<RestartReport> {
    let mut results = vec![solve_trace_constant(mesh, cfg, hole, None)?];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        let init = Field((0..mesh.n_vertices()).map(|_| rng.gen_range(0.1..1.0)).collect());
        results.push(solve_trace_constant(mesh, cfg, hole, Some(&init))?);
    }
    let values: Vec<f64> = results.iter().map(|r| r.s_value).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = results
        .into_iter()
        .min_by(|a, b| a.s_value.partial_cmp(&b.s_value).unwrap())
        .unwrap();
    Ok(RestartReport {
        best,
        values,
        relative_spread: (max - min) / min,
    })
}
