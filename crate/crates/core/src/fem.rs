//! P1 discretization of the trace quotient
//!
//! ```text
//!   Q(u) = ( sum_T |T| (eps^2 + |grad u|^2)^{p/2} + sum_v m_v |u_v|^p )
//!          / ( sum_F |F| gauss2(|u|^q) )^{p/q}
//! ```
//!
//! where `eps` is `ProblemConfig::epsilon` times `max |u|` (times 1 for the
//! zero field), so the quotient stays exactly 0-homogeneous. The scale is
//! held fixed when differentiating.
//!
//! with vertex-lumped mass `m_v` and the two-point Gauss rule on every
//! boundary facet (the endpoint value in 1D).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mesh, GAUSS2};

/// Exponents, regularization and solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub p: f64,
    pub q: f64,
    /// Gradient regularization `(eps^2 + |grad u|^2)^{p/2}`, relative to `max |u|`.
    pub epsilon: f64,
    /// Sup-norm bound on the free-DOF quotient gradient.
    pub dof_tolerance: f64,
    /// Bound on the relative quotient decrease over the last five iterations.
    pub rel_tolerance: f64,
    pub max_inner_iterations: usize,
}

impl ProblemConfig {
    /// Defaults: `eps = 1e-8` for `p < 2`, `eps = 0` otherwise.
    pub fn new(p: f64, q: f64) -> Self {
        ProblemConfig {
            p,
            q,
            epsilon: if p < 2.0 { 1e-8 } else { 0.0 },
            dof_tolerance: 1e-9,
            rel_tolerance: 1e-11,
            max_inner_iterations: 50_000,
        }
    }

    pub fn with_tolerance(mut self, dof_tolerance: f64) -> Self {
        self.dof_tolerance = dof_tolerance;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Validate exponents against the critical trace exponent in dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let finite = [self.p, self.q, self.epsilon, self.dof_tolerance, self.rel_tolerance]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("non-finite parameter".into()));
        }
        if !(self.p > 1.0) {
            return Err(Error::InvalidConfig(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.q >= 1.0) {
            return Err(Error::InvalidConfig(format!("q must be at least 1, got {}", self.q)));
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidConfig("epsilon must be non-negative".into()));
        }
        if !(self.dof_tolerance > 0.0) || self.max_inner_iterations == 0 {
            return Err(Error::InvalidConfig(
                "tolerance and iteration cap must be positive".into(),
            ));
        }
        let critical = critical_exponent(self.p, dim);
        if self.q >= critical {
            return Err(Error::SupercriticalExponent {
                p: self.p,
                q: self.q,
                dim,
                critical,
            });
        }
        Ok(())
    }
}

/// Critical trace exponent `p(N-1)/(N-p)` for `p < N`, infinite otherwise.
pub fn critical_exponent(p: f64, dim: usize) -> f64 {
    let n = dim as f64;
    if p < n {
        p * (n - 1.0) / (n - p)
    } else {
        f64::INFINITY
    }
}

/// Nodal values of a P1 function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn constant(n: usize, c: f64) -> Self {
        Field(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field(self.0.iter().map(|x| c * x).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[inline]
pub(crate) fn signed_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(e)
    }
}

/// Energy, boundary integral, and their nodal derivatives.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub energy: f64,
    pub boundary: f64,
    pub d_energy: Vec<f64>,
    pub d_boundary: Vec<f64>,
}

impl Evaluation {
    pub fn quotient(&self, p: f64, q: f64) -> f64 {
        self.energy / self.boundary.powf(p / q)
    }

    /// Nodal gradient of `E / B^{p/q}` by the quotient rule.
    pub fn quotient_gradient(&self, p: f64, q: f64) -> Vec<f64> {
        let bpq = self.boundary.powf(p / q);
        let c = (p / q) * self.energy / self.boundary;
        self.d_energy
            .iter()
            .zip(&self.d_boundary)
            .map(|(de, db)| (de - c * db) / bpq)
            .collect()
    }
}

/// A 0-homogeneous quotient `E(u) / B(u)^{p/q}` over nodal vectors.
pub trait QuotientFunctional {
    fn n_dofs(&self) -> usize;
    fn exponents(&self) -> (f64, f64);
    fn evaluate(&self, u: &[f64]) -> Evaluation;

    /// Optional preconditioner at the iterate `u` applied to a free-DOF vector.
    fn precondition(&self, _u: &[f64], _g: &[f64], _free: &[bool]) -> Option<Vec<f64>> {
        None
    }
}

/// The trace quotient on a mesh.
pub struct TraceFunctional<'a> {
    pub mesh: &'a Mesh,
    pub cfg: &'a ProblemConfig,
}

impl QuotientFunctional for TraceFunctional<'_> {
    fn n_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    fn exponents(&self) -> (f64, f64) {
        (self.cfg.p, self.cfg.q)
    }

    fn evaluate(&self, u: &[f64]) -> Evaluation {
        evaluate(self.mesh, self.cfg, u)
    }

    fn precondition(&self, u: &[f64], g: &[f64], free: &[bool]) -> Option<Vec<f64>> {
        let mesh = self.mesh;
        if mesh.dim() != 1 {
            return None;
        }
        let chain = mesh
            .cells
            .iter()
            .enumerate()
            .all(|(c, cell)| (cell[0] == c && cell[1] == c + 1) || (cell[1] == c && cell[0] == c + 1));
        if !chain {
            return None;
        }
        let lengths: Vec<f64> = (0..mesh.cells.len()).map(|c| mesh.cell_measure(c)).collect();
        let cell_weight = vec![1.0; lengths.len()];
        Some(chain_precondition(
            self.cfg.p,
            &lengths,
            &cell_weight,
            mesh.lumped_mass(),
            u,
            g,
            free,
        ))
    }
}

const PRECONDITIONER_FLOOR: f64 = 1e-6;

/// Solve with the stiffness plus lumped mass matrix of a chain of nodes
/// (cell `c` joins nodes `c` and `c + 1`), linearized at `v` with weights
/// `|v'|^{p-2}` and `|v|^{p-2}` (floored relative to their maxima).
/// Constrained nodes get identity rows.
pub(crate) fn chain_precondition(
    p: f64,
    lengths: &[f64],
    cell_weight: &[f64],
    node_mass: &[f64],
    v: &[f64],
    g: &[f64],
    free: &[bool],
) -> Vec<f64> {
    let n = g.len();
    let e = p - 2.0;
    let slopes: Vec<f64> = (0..n - 1).map(|c| ((v[c + 1] - v[c]) / lengths[c]).abs()).collect();
    let dmax = slopes.iter().copied().fold(0.0, f64::max);
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let lin = |x: f64, scale: f64| {
        if e == 0.0 || scale == 0.0 {
            1.0
        } else {
            (x / scale).max(PRECONDITIONER_FLOOR).powf(e)
        }
    };
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for c in 0..n - 1 {
        let k = cell_weight[c] * lin(slopes[c], dmax) / lengths[c];
        diag[c] += k;
        diag[c + 1] += k;
        if free[c] && free[c + 1] {
            off[c] = -k;
        }
    }
    for i in 0..n {
        diag[i] = if free[i] {
            diag[i] + node_mass[i] * lin(v[i].abs(), vmax)
        } else {
            1.0
        };
    }
    // Thomas algorithm
    let mut c_prime = vec![0.0; n];
    let mut x = vec![0.0; n];
    c_prime[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
    x[0] = g[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off[i - 1] * c_prime[i - 1];
        c_prime[i] = if i + 1 < n { off[i] / m } else { 0.0 };
        x[i] = (g[i] - off[i - 1] * x[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
    x
}

fn check_len(mesh: &Mesh, u: &Field) {
    assert_eq!(u.len(), mesh.n_vertices(), "field length must match vertex count");
}

/// Per-cell gradient of a P1 field.
#[inline]
pub(crate) fn cell_gradient(mesh: &Mesh, cell: usize, u: &[f64]) -> [f64; 2] {
    let grads = mesh.cell_gradients(cell);
    let mut g = [0.0; 2];
    for (a, &v) in mesh.cells[cell].iter().enumerate() {
        g[0] += u[v] * grads[a][0];
        g[1] += u[v] * grads[a][1];
    }
    g
}

/// `max |u|`, or 1 for the zero field.
pub(crate) fn field_scale(u: &[f64]) -> f64 {
    let m = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

pub(crate) fn evaluate(mesh: &Mesh, cfg: &ProblemConfig, u: &[f64]) -> Evaluation {
    let eps = cfg.epsilon * field_scale(u);
    let (p, q, eps2) = (cfg.p, cfg.q, eps * eps);
    let n = mesh.n_vertices();
    let mut d_energy = vec![0.0; n];
    let mut energy = 0.0;
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let area = mesh.cell_measure(ci);
        let g = cell_gradient(mesh, ci, u);
        let s2 = eps2 + g[0] * g[0] + g[1] * g[1];
        energy += area * s2.powf(0.5 * p);
        if s2 > 0.0 {
            let coef = area * p * s2.powf(0.5 * p - 1.0);
            let grads = mesh.cell_gradients(ci);
            for (a, &v) in cell.iter().enumerate() {
                d_energy[v] += coef * (g[0] * grads[a][0] + g[1] * grads[a][1]);
            }
        }
    }
    for (v, &m) in mesh.lumped_mass().iter().enumerate() {
        energy += m * u[v].abs().powf(p);
        d_energy[v] += m * p * signed_pow(u[v], p - 1.0);
    }

    let mut d_boundary = vec![0.0; n];
    let mut boundary = 0.0;
    for f in &mesh.boundary_facets {
        if f.vertices.len() == 1 {
            let v = f.vertices[0];
            boundary += f.length * u[v].abs().powf(q);
            d_boundary[v] += f.length * q * signed_pow(u[v], q - 1.0);
            continue;
        }
        let (v0, v1) = (f.vertices[0], f.vertices[1]);
        for xi in GAUSS2 {
            let ux = (1.0 - xi) * u[v0] + xi * u[v1];
            let w = 0.5 * f.length;
            boundary += w * ux.abs().powf(q);
            let d = w * q * signed_pow(ux, q - 1.0);
            d_boundary[v0] += d * (1.0 - xi);
            d_boundary[v1] += d * xi;
        }
    }
    Evaluation {
        energy,
        boundary,
        d_energy,
        d_boundary,
    }
}

pub fn energy(mesh: &Mesh, cfg: &ProblemConfig, u: &Field) -> f64 {
    check_len(mesh, u);
    evaluate(mesh, cfg, &u.0).energy
}

pub fn boundary_norm_q(mesh: &Mesh, cfg: &ProblemConfig, u: &Field) -> f64 {
    check_len(mesh, u);
    evaluate(mesh, cfg, &u.0).boundary
}

fn admissible(mesh: &Mesh, cfg: &ProblemConfig, u: &Field, b: f64) -> Result<()> {
    let vanishes = mesh
        .boundary_facets
        .iter()
        .flat_map(|f| f.vertices.iter())
        .all(|&v| u.0[v].abs() <= cfg.dof_tolerance);
    if vanishes || !(b > 0.0) {
        return Err(Error::NotAdmissible(
            "field vanishes on the whole boundary (W^{1,p}_0 is excluded)".into(),
        ));
    }
    Ok(())
}

pub fn rayleigh_quotient(mesh: &Mesh, cfg: &ProblemConfig, u: &Field) -> Result<f64> {
    check_len(mesh, u);
    let ev = evaluate(mesh, cfg, &u.0);
    admissible(mesh, cfg, u, ev.boundary)?;
    Ok(ev.quotient(cfg.p, cfg.q))
}

pub fn quotient_gradient(mesh: &Mesh, cfg: &ProblemConfig, u: &Field) -> Result<Field> {
    check_len(mesh, u);
    let ev = evaluate(mesh, cfg, &u.0);
    admissible(mesh, cfg, u, ev.boundary)?;
    Ok(Field(ev.quotient_gradient(cfg.p, cfg.q)))
}

/// Compressed sparse row matrix, only as much as the quadratic forms need.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&k| self.cols[k] == j)
            .map_or(0.0, |k| self.vals[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.vals[k] * x[self.cols[k]])
                    .sum()
            })
            .collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Bilinear forms of the quadratic case `p = q = 2`, `eps = 0`:
/// stiffness plus lumped mass, and the boundary mass.
pub fn assemble_quadratic_forms(mesh: &Mesh) -> (CsrMatrix, CsrMatrix) {
    let n = mesh.n_vertices();
    let mut a = Vec::new();
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let area = mesh.cell_measure(ci);
        let grads = mesh.cell_gradients(ci);
        for (i, &vi) in cell.iter().enumerate() {
            for (j, &vj) in cell.iter().enumerate() {
                let k = grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
                a.push((vi, vj, area * k));
            }
        }
    }
    for (v, &m) in mesh.lumped_mass().iter().enumerate() {
        a.push((v, v, m));
    }
    let mut b = Vec::new();
    for f in &mesh.boundary_facets {
        if let [v] = f.vertices[..] {
            b.push((v, v, f.length));
        } else {
            let (v0, v1) = (f.vertices[0], f.vertices[1]);
            b.push((v0, v0, f.length / 3.0));
            b.push((v1, v1, f.length / 3.0));
            b.push((v0, v1, f.length / 6.0));
            b.push((v1, v0, f.length / 6.0));
        }
    }
    (CsrMatrix::from_triplets(n, a), CsrMatrix::from_triplets(n, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_mesh, Domain};

    #[test]
    fn linear_field_on_unit_interval() {
        let mesh = generate_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 0.25).unwrap();
        let cfg = ProblemConfig::new(2.0, 2.0);
        let u = Field(mesh.vertices.iter().map(|x| x[0]).collect());
        // lumped mass integrates x^2 by the trapezoid rule: 1/3 + h^2/6
        let h = 0.25;
        let expected = 1.0 + 1.0 / 3.0 + h * h / 6.0;
        assert!((energy(&mesh, &cfg, &u) - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_and_constant_fields() {
        let mesh = generate_mesh(
            Domain::Rectangle {
                width: 1.0,
                height: 1.0,
            },
            0.25,
        )
        .unwrap();
        let cfg = ProblemConfig::new(2.0, 2.0);
        let n = mesh.n_vertices();
        assert_eq!(energy(&mesh, &cfg, &Field::constant(n, 0.0)), 0.0);
        assert!((energy(&mesh, &cfg, &Field::constant(n, 1.0)) - 1.0).abs() < 1e-12);
        assert!((boundary_norm_q(&mesh, &cfg, &Field::constant(n, 1.0)) - 4.0).abs() < 1e-12);
        assert_eq!(boundary_norm_q(&mesh, &cfg, &Field::constant(n, 0.0)), 0.0);

        let cfg_eps = ProblemConfig::new(1.5, 2.0).with_epsilon(0.1);
        let e0 = energy(&mesh, &cfg_eps, &Field::constant(n, 0.0));
        assert!((e0 - 0.1f64.powf(1.5)).abs() < 1e-14);
    }

    #[test]
    fn constant_field_homogeneity_of_boundary_norm() {
        let mesh = generate_mesh(Domain::Disk { radius: 1.0 }, 0.2).unwrap();
        let cfg = ProblemConfig::new(2.0, 2.5);
        let c: f64 = -1.7;
        let b = boundary_norm_q(&mesh, &cfg, &Field::constant(mesh.n_vertices(), c));
        let expected = c.abs().powf(2.5) * mesh.boundary_length();
        assert!((b - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn vanishing_trace_is_not_admissible() {
        let mesh = generate_mesh(Domain::Disk { radius: 1.0 }, 0.3).unwrap();
        let cfg = ProblemConfig::new(2.0, 2.0);
        let mut u = Field::constant(mesh.n_vertices(), 0.0);
        u.0[0] = 1.0; // center only
        assert!(matches!(
            rayleigh_quotient(&mesh, &cfg, &u),
            Err(Error::NotAdmissible(_))
        ));
        assert!(quotient_gradient(&mesh, &cfg, &u).is_err());
    }

    #[test]
    fn critical_exponent_rule() {
        assert_eq!(critical_exponent(2.0, 2), f64::INFINITY);
        assert!((critical_exponent(1.5, 2) - 3.0).abs() < 1e-15);
        assert!(ProblemConfig::new(2.0, 7.0).validate(2).is_ok());
        assert!(matches!(
            ProblemConfig::new(1.5, 3.5).validate(2),
            Err(Error::SupercriticalExponent { .. })
        ));
        assert!(ProblemConfig::new(1.0, 2.0).validate(2).is_err());
        assert!(ProblemConfig::new(3.0, 0.5).validate(2).is_err());
    }
}
