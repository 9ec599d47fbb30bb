//! Thin rectangles `(a, b) x (0, mu)` and their one-dimensional limit.
//!
//! For `k = 1` the rescaled constant `S_mu / mu^{(k(q-p)+p)/q} = S_mu / mu`
//! is compared with `2^{-p/q}` times the optimal constant of the interval
//! problem. The interval base has dimension one, so `p < n` never holds and
//! the comparison extrapolates the scaling law beyond its hypothesis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::ProblemConfig;
use crate::geometry::{generate_mesh, BoundaryHole, Domain, Mesh};
use crate::hole_optimizer::{optimize_hole_alternating, select_to_target, OptimizerOptions};
use crate::one_dim::{closed_form_limit_constant, optimize_limit_hole, solve_limit_problem, OneDimProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MuSweepOptions {
    /// Mesh resolution as a fraction of `mu`; at most 1/2.
    pub resolution_fraction: f64,
    /// Sweep stops before a mesh with more vertices than this.
    pub max_vertices: usize,
    pub optimizer: OptimizerOptions,
    /// Cells of the one-dimensional reference problem.
    pub limit_cells: usize,
}

impl Default for MuSweepOptions {
    fn default() -> Self {
        MuSweepOptions {
            resolution_fraction: 0.25,
            max_vertices: 200_000,
            optimizer: OptimizerOptions::default(),
            limit_cells: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuRecord {
    pub mu: f64,
    pub resolution: f64,
    pub n_vertices: usize,
    pub s_mu: f64,
    pub rescaled: f64,
    pub alpha_effective: f64,
    pub converged: bool,
    pub hole_side: Side,
    /// Long-edge hole facets lie in the predicted end segment (one facet slack).
    pub hole_matches_prediction: bool,
    /// Largest fiber standard deviation over the largest fiber mean.
    pub fiber_spread: f64,
    /// L2 distance between normalized fiber means and the 1D extremal.
    pub l2_to_limit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuSweep {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub cfg: ProblemConfig,
    pub mu_values: Vec<f64>,
    pub exponent: f64,
    pub records: Vec<MuRecord>,
    /// Least-squares slope of `log S_mu` against `log mu`.
    pub slope: f64,
    /// Polynomial extrapolation of the rescaled values to `mu = 0` through the last three points.
    pub richardson_limit: Option<f64>,
    /// `2^{-p/q}` times the closed-form interval constant (only for `q = p`).
    pub target_closed_form: Option<f64>,
    /// `2^{-p/q}` times the interval constant from the exhaustive 1D sweep.
    pub target_fem: f64,
    pub relative_gap: f64,
    pub richardson_gap: Option<f64>,
    /// The interval base violates `p < n`; the limit is used by analogy.
    pub limit_by_analogy: bool,
    pub warnings: Vec<String>,
}

/// `(k(q - p) + p) / q` for thickness dimension `k`.
pub fn scaling_exponent(p: f64, q: f64, k: usize) -> f64 {
    (k as f64 * (q - p) + p) / q
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberProjection {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Average nodal values over each vertical fiber (vertices sharing an x coordinate).
pub fn project_to_limit(mesh: &Mesh, u: &[f64]) -> FiberProjection {
    let mut order: Vec<usize> = (0..mesh.n_vertices()).collect();
    order.sort_by(|&i, &j| mesh.vertices[i][0].partial_cmp(&mesh.vertices[j][0]).unwrap());
    let span = mesh.vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max)
        - mesh.vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * span.max(1.0);
    let (mut x, mut mean, mut std) = (Vec::new(), Vec::new(), Vec::new());
    let mut k = 0;
    while k < order.len() {
        let x0 = mesh.vertices[order[k]][0];
        let mut end = k;
        while end < order.len() && mesh.vertices[order[end]][0] - x0 <= tol {
            end += 1;
        }
        let vals: Vec<f64> = order[k..end].iter().map(|&v| u[v]).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
        x.push(x0);
        mean.push(m);
        std.push(var.sqrt());
        k = end;
    }
    FiberProjection { x, mean, std }
}

fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xs, fs)| 0.5 * (xs[1] - xs[0]) * (fs[0] + fs[1]))
        .sum()
}

fn interpolate(xs: &[f64], fs: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&t| t <= x).clamp(1, xs.len() - 1);
    let t = ((x - xs[k - 1]) / (xs[k] - xs[k - 1])).clamp(0.0, 1.0);
    (1.0 - t) * fs[k - 1] + t * fs[k]
}

fn is_long_edge(mesh: &Mesh, f: usize, mu: f64) -> bool {
    let fv = &mesh.boundary_facets[f].vertices;
    let (y0, y1) = (mesh.vertices[fv[0]][1], mesh.vertices[fv[1]][1]);
    let on = |y: f64| y.abs() < 1e-12 || (y - mu).abs() < 1e-12;
    on(y0) && on(y1)
}

fn facet_mid_x(mesh: &Mesh, f: usize) -> f64 {
    let fv = &mesh.boundary_facets[f].vertices;
    0.5 * (mesh.vertices[fv[0]][0] + mesh.vertices[fv[1]][0])
}

/// Hole on both long edges at one end plus that short edge, trimmed to the
/// target measure.
pub fn predicted_hole(mesh: &Mesh, a: f64, b: f64, side: Side, target: f64) -> BoundaryHole {
    let dist = |f: usize| match side {
        Side::Left => facet_mid_x(mesh, f) - a,
        Side::Right => b - facet_mid_x(mesh, f),
    };
    let mut order: Vec<usize> = (0..mesh.n_facets()).collect();
    order.sort_by(|&i, &j| dist(i).partial_cmp(&dist(j)).unwrap().then(i.cmp(&j)));
    select_to_target(mesh, &order, target)
}

fn hole_side(mesh: &Mesh, hole: &BoundaryHole, a: f64, b: f64) -> Side {
    let n = hole.len().max(1) as f64;
    let mean = hole.facets().iter().map(|&f| facet_mid_x(mesh, f)).sum::<f64>() / n;
    if mean <= 0.5 * (a + b) {
        Side::Left
    } else {
        Side::Right
    }
}

fn matches_prediction(mesh: &Mesh, hole: &BoundaryHole, a: f64, b: f64, alpha: f64, side: Side, mu: f64) -> bool {
    let slack = mesh.max_facet_length() * (1.0 + 1e-9);
    let (lo, hi) = match side {
        Side::Left => (a, a + alpha * (b - a)),
        Side::Right => (b - alpha * (b - a), b),
    };
    hole.facets().iter().filter(|&&f| is_long_edge(mesh, f, mu)).all(|&f| {
        let fv = &mesh.boundary_facets[f].vertices;
        fv.iter().all(|&v| {
            let x = mesh.vertices[v][0];
            x >= lo - slack && x <= hi + slack
        })
    })
}

/// Value at zero of the polynomial through `(x_i, y_i)` (Neville).
fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i]);
        }
    }
    p[0]
}

fn log_slope(mus: &[f64], values: &[f64]) -> f64 {
    let n = mus.len() as f64;
    let lx: Vec<f64> = mus.iter().map(|m| m.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn vertex_estimate(a: f64, b: f64, mu: f64, res: f64) -> usize {
    let nx = ((b - a) / res).ceil() as usize;
    let ny = ((mu / res).ceil() as usize).max(2);
    (nx + 1) * (ny + 1)
}

/// Optimal holes on `(a, b) x (0, mu)` for decreasing `mu`.
pub fn run_mu_sweep(
    a: f64,
    b: f64,
    alpha: f64,
    cfg: &ProblemConfig,
    mu_values: &[f64],
    opts: &MuSweepOptions,
) -> Result<MuSweep> {
    if mu_values.is_empty() {
        return Err(Error::InvalidConfig("empty mu sweep".into()));
    }
    if mu_values.iter().any(|&m| !(m > 0.0 && m < 1.0)) {
        return Err(Error::InvalidConfig("mu values must lie in (0, 1)".into()));
    }
    if mu_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidConfig("mu values must be strictly decreasing".into()));
    }
    if !(opts.resolution_fraction > 0.0 && opts.resolution_fraction <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "resolution fraction must lie in (0, 1/2] for two layers across the thickness, got {}",
            opts.resolution_fraction
        )));
    }
    cfg.validate(2)?;
    let mut warnings = Vec::new();
    let mut mus = Vec::new();
    for &mu in mu_values {
        let n = vertex_estimate(a, b, mu, opts.resolution_fraction * mu);
        if n > opts.max_vertices {
            warnings.push(format!(
                "sweep truncated at mu = {mu}: about {n} vertices exceeds the limit of {}",
                opts.max_vertices
            ));
            break;
        }
        mus.push(mu);
    }
    if mus.is_empty() {
        return Err(Error::ResolutionTooCoarse {
            resolution: opts.resolution_fraction * mu_values[0],
            detail: "first mesh of the sweep exceeds the vertex limit".into(),
        });
    }

    let exponent = scaling_exponent(cfg.p, cfg.q, 1);
    let limit_problem = OneDimProblem::new(a, b, alpha, *cfg);
    let limit_sweep = optimize_limit_hole(&limit_problem, opts.limit_cells.min(400))?;
    let fiber_factor = 2f64.powf(-cfg.p / cfg.q);
    let target_fem = fiber_factor * limit_sweep.best.value;
    let target_closed_form = if cfg.q == cfg.p {
        Some(fiber_factor * closed_form_limit_constant(cfg.p, alpha, b - a)?)
    } else {
        None
    };
    let reference = |side: Side| {
        let len = alpha * (b - a);
        let hole = match side {
            Side::Left => (a, a + len),
            Side::Right => (b - len, b),
        };
        solve_limit_problem(&limit_problem, hole, opts.limit_cells)
    };
    let limits = [reference(Side::Left)?, reference(Side::Right)?];

    let records: Vec<MuRecord> = mus
        .par_iter()
        .map(|&mu| {
            let res = opts.resolution_fraction * mu;
            let mesh = generate_mesh(Domain::ThinRectangle { a, b, mu }, res)?;
            let target = alpha * mesh.boundary_length();
            let mut o = opts.optimizer.clone();
            o.initial_holes.push(predicted_hole(&mesh, a, b, Side::Left, target));
            o.initial_holes.push(predicted_hole(&mesh, a, b, Side::Right, target));
            let run = optimize_hole_alternating(&mesh, cfg, alpha, None, &o)?;
            let side = hole_side(&mesh, &run.best_hole, a, b);
            let proj = project_to_limit(&mesh, &run.extremal.0);
            let scale = proj.mean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let fiber_spread = proj.std.iter().fold(0.0f64, |m, v| m.max(*v)) / scale;
            let lim = &limits[side as usize];
            let reference: Vec<f64> = proj
                .x
                .iter()
                .map(|&x| interpolate(&lim.nodes, &lim.extremal, x))
                .collect();
            let norm = |f: &[f64]| trapezoid(&proj.x, &f.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
            let (nm, nr) = (norm(&proj.mean), norm(&reference));
            let diff: Vec<f64> = proj.mean.iter().zip(&reference).map(|(m, r)| m / nm - r / nr).collect();
            Ok(MuRecord {
                mu,
                resolution: res,
                n_vertices: mesh.n_vertices(),
                s_mu: run.best_value,
                rescaled: run.best_value / mu.powf(exponent),
                alpha_effective: run.alpha_effective,
                converged: run.converged,
                hole_side: side,
                hole_matches_prediction: matches_prediction(&mesh, &run.best_hole, a, b, alpha, side, mu),
                fiber_spread,
                l2_to_limit: norm(&diff),
            })
        })
        .collect::<Result<_>>()?;

    let values: Vec<f64> = records.iter().map(|r| r.s_mu).collect();
    let slope = if mus.len() >= 2 {
        log_slope(&mus, &values)
    } else {
        f64::NAN
    };
    let richardson_limit = (records.len() >= 3).then(|| {
        let tail = &records[records.len() - 3..];
        let xs: Vec<f64> = tail.iter().map(|r| r.mu).collect();
        let ys: Vec<f64> = tail.iter().map(|r| r.rescaled).collect();
        extrapolate_to_zero(&xs, &ys)
    });
    let target = target_closed_form.unwrap_or(target_fem);
    let last = records.last().unwrap().rescaled;
    Ok(MuSweep {
        a,
        b,
        alpha,
        cfg: *cfg,
        mu_values: mus,
        exponent,
        records,
        slope,
        richardson_limit,
        target_closed_form,
        target_fem,
        relative_gap: (last - target).abs() / target,
        richardson_gap: richardson_limit.map(|r| (r - target).abs() / target),
        limit_by_analogy: true,
        warnings,
    })
}
