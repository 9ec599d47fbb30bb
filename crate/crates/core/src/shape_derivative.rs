//! First-order sensitivity of `s(t) = S(Phi_t(Gamma))` for tangential flows.
//!
//! For a normalized extremal `u`,
//!
//! ```text
//!   ds/dt(0) = -(p/q) S(Gamma) int_{dOmega} |u|^q div_tau V
//!              + int_Omega (|u|^p + |grad u|^p) div V
//!              - p int_Omega |grad u|^{p-2} <grad u, DV^T grad u>
//! ```
//!
//! `div V`, `DV` and `div_tau V` are taken from the P1 interpolant of the
//! nodal velocities, so the expression equals the derivative of the discrete
//! quotient under the vertex motion `x -> x + t V(x)` at fixed nodal values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{cell_gradient, evaluate, Field, ProblemConfig};
use crate::geometry::{make_hole_from_arc, BoundaryHole, Mesh, TangentialField, GAUSS2};
use crate::trace_solver::{solve_trace_constant, TraceResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeDerivativeResult {
    pub ds_dt: f64,
    pub boundary_term: f64,
    pub volume_term: f64,
    pub fd_estimates: Vec<(f64, f64)>,
}

/// Normalization tolerance on `int |u|^q` for the extremal.
const NORMALIZATION_TOL: f64 = 1e-8;

pub fn evaluate_shape_derivative(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    hole: &BoundaryHole,
    field: &TangentialField,
    trace: &TraceResult,
) -> Result<ShapeDerivativeResult> {
    let u = &trace.extremal.0;
    if u.len() != mesh.n_vertices() {
        return Err(Error::InvalidField("extremal does not match the mesh".into()));
    }
    let b = evaluate(mesh, cfg, u).boundary;
    if (b - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(b));
    }
    field.validate(mesh)?;
    if field.velocities().len() != mesh.n_vertices() {
        return Err(Error::InvalidField("field does not match the mesh".into()));
    }
    if hole.facets().iter().any(|&f| f >= mesh.n_facets()) {
        return Err(Error::InvalidHole("hole does not match the mesh".into()));
    }
    if field.is_zero() {
        return Ok(ShapeDerivativeResult {
            ds_dt: 0.0,
            boundary_term: 0.0,
            volume_term: 0.0,
            fd_estimates: Vec::new(),
        });
    }

    let vel = field.velocities();
    let (p, q, eps2) = (cfg.p, cfg.q, cfg.epsilon * cfg.epsilon);
    let mut volume_term = 0.0;
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let area = mesh.cell_measure(ci);
        let grads = mesh.cell_gradients(ci);
        // DV[i][j] = d V_i / d x_j
        let mut dv = [[0.0; 2]; 2];
        for (a, &v) in cell.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    dv[i][j] += vel[v][i] * grads[a][j];
                }
            }
        }
        let div = dv[0][0] + dv[1][1];
        let g = cell_gradient(mesh, ci, u);
        let s2 = eps2 + g[0] * g[0] + g[1] * g[1];
        let mass: f64 = cell.iter().map(|&v| u[v].abs().powf(p)).sum::<f64>() / cell.len() as f64;
        volume_term += area * (mass + s2.powf(0.5 * p)) * div;
        if s2 > 0.0 {
            // <grad u, DV^T grad u> = g^T DV g
            let shear = g[0] * (dv[0][0] * g[0] + dv[0][1] * g[1]) + g[1] * (dv[1][0] * g[0] + dv[1][1] * g[1]);
            volume_term -= area * p * s2.powf(0.5 * p - 1.0) * shear;
        }
    }

    let mut surface = 0.0;
    for f in &mesh.boundary_facets {
        let (v0, v1) = (f.vertices[0], f.vertices[1]);
        let (x0, x1) = (mesh.vertices[v0], mesh.vertices[v1]);
        let dvx = [vel[v1][0] - vel[v0][0], vel[v1][1] - vel[v0][1]];
        let div_tau = (dvx[0] * (x1[0] - x0[0]) + dvx[1] * (x1[1] - x0[1])) / (f.length * f.length);
        if div_tau == 0.0 {
            continue;
        }
        let integral: f64 = GAUSS2
            .iter()
            .map(|&xi| 0.5 * f.length * ((1.0 - xi) * u[v0] + xi * u[v1]).abs().powf(q))
            .sum();
        surface += integral * div_tau;
    }
    let boundary_term = -(p / q) * trace.s_value * surface;
    Ok(ShapeDerivativeResult {
        ds_dt: boundary_term + volume_term,
        boundary_term,
        volume_term,
        fd_estimates: Vec::new(),
    })
}

/// Slide every arc endpoint of the hole by `t * speed` and re-snap to facets.
pub fn transport_hole(mesh: &Mesh, hole: &BoundaryHole, field: &TangentialField, t: f64) -> Result<BoundaryHole> {
    if !mesh.boundary_is_loop() {
        return Err(Error::Transport(
            "holes can only be transported along a 2D boundary".into(),
        ));
    }
    if t == 0.0 {
        return Ok(hole.clone());
    }
    let total = mesh.boundary_length();
    let mut moved = Vec::new();
    for arc in hole.arcs(mesh) {
        let s0 = arc.start;
        let s1 = arc.start + arc.length;
        let n0 = s0 + t * field.speed_at(mesh, s0);
        let n1 = s1 + t * field.speed_at(mesh, s1);
        if n1 < n0 || n1 - n0 > total {
            return Err(Error::Transport(format!(
                "arc starting at {s0} collapses or wraps at t = {t}"
            )));
        }
        moved.push((n0, n1));
    }
    // arcs must keep their cyclic order without overlapping
    if moved.len() > 1 {
        for k in 0..moved.len() {
            let (_, end) = moved[k];
            let (next_start, _) = moved[(k + 1) % moved.len()];
            let next_start = if k + 1 == moved.len() {
                next_start + total
            } else {
                next_start
            };
            if end > next_start {
                return Err(Error::Transport(format!("arcs collide at t = {t}")));
            }
        }
    }
    let mut result = BoundaryHole::empty();
    for (n0, n1) in moved {
        let arc = make_hole_from_arc(mesh, n0, n1 - n0)?;
        result = result.union(mesh, &arc);
    }
    Ok(result)
}

/// How `Gamma_t` is realized for finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdTransport {
    /// Move the mesh vertices by `t V(x)`; the hole keeps its facets.
    MeshMotion,
    /// Keep the mesh and re-snap transported arc endpoints to facets.
    Snap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FdRecord {
    pub h: f64,
    pub fd_value: f64,
    pub analytic: f64,
    pub relative_error: f64,
    pub s_plus: f64,
    pub s_minus: f64,
}

/// Solve `S` for the hole transported by `t`.
pub fn transported_value(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    hole: &BoundaryHole,
    field: &TangentialField,
    t: f64,
    transport: FdTransport,
    warm: Option<&Field>,
) -> Result<TraceResult> {
    let r = match transport {
        FdTransport::MeshMotion => {
            let disp: Vec<[f64; 2]> = field.velocities().iter().map(|v| [t * v[0], t * v[1]]).collect();
            let moved = mesh
                .deformed(&disp)
                .map_err(|e| Error::Transport(format!("t = {t}: {e}")))?;
            solve_trace_constant(&moved, cfg, hole, warm)?
        }
        FdTransport::Snap => {
            let moved = transport_hole(mesh, hole, field, t)?;
            solve_trace_constant(mesh, cfg, &moved, warm)?
        }
    };
    if !r.converged {
        return Err(Error::NotConverged { step: Some(t) });
    }
    Ok(r)
}

/// Central differences `(s(h) - s(-h)) / 2h` against the analytic derivative.
pub fn fd_check(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    hole: &BoundaryHole,
    field: &TangentialField,
    steps: &[f64],
    transport: FdTransport,
) -> Result<(ShapeDerivativeResult, Vec<FdRecord>)> {
    let base = solve_trace_constant(mesh, cfg, hole, None)?;
    if !base.converged {
        return Err(Error::NotConverged { step: Some(0.0) });
    }
    let mut analytic = evaluate_shape_derivative(mesh, cfg, hole, field, &base)?;
    let records: Vec<FdRecord> = steps
        .par_iter()
        .map(|&h| {
            let plus = transported_value(mesh, cfg, hole, field, h, transport, Some(&base.extremal))?;
            let minus = transported_value(mesh, cfg, hole, field, -h, transport, Some(&base.extremal))?;
            let fd_value = (plus.s_value - minus.s_value) / (2.0 * h);
            let relative_error = if analytic.ds_dt != 0.0 {
                (fd_value - analytic.ds_dt).abs() / analytic.ds_dt.abs()
            } else {
                fd_value.abs()
            };
            Ok(FdRecord {
                h,
                fd_value,
                analytic: analytic.ds_dt,
                relative_error,
                s_plus: plus.s_value,
                s_minus: minus.s_value,
            })
        })
        .collect::<Result<_>>()?;
    analytic.fd_estimates = records.iter().map(|r| (r.h, r.fd_value)).collect();
    Ok((analytic, records))
}
