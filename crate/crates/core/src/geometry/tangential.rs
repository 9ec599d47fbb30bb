use serde::{Deserialize, Serialize};

use super::{Domain, Mesh};
use crate::error::{Error, Result};

/// Rule used to extend the boundary tangential speed into the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Extension {
    /// `V(x) = chi(dist(x, boundary) / delta) * speed(s(x)) * tau(s(x))` with the
    /// C^1 cutoff `chi(s) = (1 - s)^2 (1 + 2 s)` on `[0, 1]`, transported along
    /// the inward normal.
    HatCutoff { delta: f64 },
    /// Rigid rotation of a disk; only valid for constant speed.
    RigidRotation,
}

impl Extension {
    /// Cutoff with `delta = 3 * resolution`.
    pub fn default_for(mesh: &Mesh) -> Self {
        Extension::HatCutoff {
            delta: 3.0 * mesh.resolution,
        }
    }
}

pub fn cutoff(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        (1.0 - s) * (1.0 - s) * (1.0 + 2.0 * s)
    }
}

/// Tangential velocity field with zero normal component on the boundary.
///
/// The field is stored as its nodal samples; all derivative quantities are
/// taken from the P1 interpolant of those samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentialField {
    /// Signed arclength speed at each boundary-loop vertex, in facet order.
    speeds: Vec<f64>,
    extension: Extension,
    velocities: Vec<[f64; 2]>,
}

impl TangentialField {
    pub fn zero(mesh: &Mesh) -> Self {
        TangentialField {
            speeds: vec![0.0; mesh.n_facets()],
            extension: Extension::default_for(mesh),
            velocities: vec![[0.0; 2]; mesh.n_vertices()],
        }
    }

    /// Sample `speed(s)` at the boundary vertices (arclength `s`) and extend.
    pub fn from_speed_fn(mesh: &Mesh, speed: impl Fn(f64) -> f64, extension: Extension) -> Result<Self> {
        let speeds = mesh.boundary_facets.iter().map(|f| speed(f.arc_start)).collect();
        Self::from_boundary_speeds(mesh, speeds, extension)
    }

    pub fn from_boundary_speeds(mesh: &Mesh, speeds: Vec<f64>, extension: Extension) -> Result<Self> {
        if !mesh.boundary_is_loop() {
            return Err(Error::InvalidField("tangential fields need a 2D boundary".into()));
        }
        if speeds.len() != mesh.n_facets() {
            return Err(Error::InvalidField(format!(
                "expected {} boundary speeds, got {}",
                mesh.n_facets(),
                speeds.len()
            )));
        }
        if speeds.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidField("non-finite speed".into()));
        }
        let tangents = vertex_tangents(mesh);
        for (k, (&s, t)) in speeds.iter().zip(&tangents).enumerate() {
            if t.is_none() && s != 0.0 {
                let v = mesh.boundary_facets[k].vertices[0];
                return Err(Error::InvalidField(format!(
                    "nonzero speed {s} at corner vertex {v} would have a normal component"
                )));
            }
        }
        let velocities = match extension {
            Extension::HatCutoff { delta } => {
                if !(delta > 0.0) {
                    return Err(Error::InvalidField("cutoff width must be positive".into()));
                }
                extend_with_cutoff(mesh, &speeds, &tangents, delta)
            }
            Extension::RigidRotation => {
                let Domain::Disk { radius } = mesh.domain else {
                    return Err(Error::InvalidField("rigid rotation needs a disk".into()));
                };
                let c = speeds[0];
                if speeds.iter().any(|&s| s != c) {
                    return Err(Error::InvalidField("rigid rotation needs a constant speed".into()));
                }
                let omega = c / radius;
                mesh.vertices.iter().map(|x| [-omega * x[1], omega * x[0]]).collect()
            }
        };
        let field = TangentialField {
            speeds,
            extension,
            velocities,
        };
        field.validate(mesh)?;
        Ok(field)
    }

    /// Constant-speed rotation of a disk extended rigidly.
    pub fn rotation(mesh: &Mesh, speed: f64) -> Result<Self> {
        Self::from_boundary_speeds(mesh, vec![speed; mesh.n_facets()], Extension::RigidRotation)
    }

    /// Unit speed at one boundary-loop vertex (hat of one facet on each side),
    /// with `sign` choosing the direction along the loop.
    pub fn vertex_bump(mesh: &Mesh, loop_vertex: usize, sign: f64, extension: Extension) -> Result<Self> {
        let mut speeds = vec![0.0; mesh.n_facets()];
        speeds[loop_vertex % mesh.n_facets()] = sign;
        Self::from_boundary_speeds(mesh, speeds, extension)
    }

    /// Field given directly by nodal velocities, validated against the
    /// tangency and support requirements.
    pub fn from_velocities(mesh: &Mesh, velocities: Vec<[f64; 2]>, extension: Extension) -> Result<Self> {
        if velocities.len() != mesh.n_vertices() {
            return Err(Error::InvalidField("one velocity per vertex required".into()));
        }
        let tangents = vertex_tangents(mesh);
        let speeds = mesh
            .boundary_vertex_loop()
            .iter()
            .zip(&tangents)
            .map(|(&v, t)| t.map_or(0.0, |t| velocities[v][0] * t[0] + velocities[v][1] * t[1]))
            .collect();
        let field = TangentialField {
            speeds,
            extension,
            velocities,
        };
        field.validate(mesh)?;
        Ok(field)
    }

    /// `a * self + b * other`; both fields must share the extension rule.
    pub fn combine(&self, a: f64, other: &TangentialField, b: f64) -> Result<Self> {
        if self.extension != other.extension || self.velocities.len() != other.velocities.len() {
            return Err(Error::InvalidField("fields use different extensions".into()));
        }
        Ok(TangentialField {
            speeds: self
                .speeds
                .iter()
                .zip(&other.speeds)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            extension: self.extension,
            velocities: self
                .velocities
                .iter()
                .zip(&other.velocities)
                .map(|(x, y)| [a * x[0] + b * y[0], a * x[1] + b * y[1]])
                .collect(),
        })
    }

    pub fn velocities(&self) -> &[[f64; 2]] {
        &self.velocities
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn is_zero(&self) -> bool {
        self.velocities.iter().all(|v| v[0] == 0.0 && v[1] == 0.0)
    }

    /// Tangential speed at arclength `s`, linear between boundary vertices.
    pub fn speed_at(&self, mesh: &Mesh, s: f64) -> f64 {
        interpolate_speed(mesh, &self.speeds, s)
    }

    /// Checks zero normal component on the boundary and support inside the
    /// delta-tube (cutoff extension only).
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let scale = self
            .velocities
            .iter()
            .map(|v| v[0].hypot(v[1]))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for (v, vel) in self.velocities.iter().enumerate() {
            if !mesh.is_boundary_vertex(v) {
                continue;
            }
            for &f in mesh.vertex_facets(v) {
                let n = mesh.boundary_facets[f].normal;
                let vn = vel[0] * n[0] + vel[1] * n[1];
                // on the disk the vertex normal is radial, not the chord normal
                let vn = match mesh.domain {
                    Domain::Disk { radius } => {
                        let x = mesh.vertices[v];
                        (vel[0] * x[0] + vel[1] * x[1]) / radius
                    }
                    _ => vn,
                };
                if vn.abs() > 1e-12 * scale {
                    return Err(Error::InvalidField(format!(
                        "normal component {vn:e} at boundary vertex {v}"
                    )));
                }
            }
        }
        if let Extension::HatCutoff { delta } = self.extension {
            for (v, vel) in self.velocities.iter().enumerate() {
                if (vel[0] != 0.0 || vel[1] != 0.0) && mesh.domain.distance_to_boundary(mesh.vertices[v]) >= delta {
                    return Err(Error::InvalidField(format!(
                        "support leaves the delta-tube at vertex {v} (delta = {delta})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Unit tangent at each boundary-loop vertex, `None` at polygon corners.
fn vertex_tangents(mesh: &Mesh) -> Vec<Option<[f64; 2]>> {
    let nf = mesh.n_facets();
    (0..nf)
        .map(|k| {
            let v = mesh.boundary_facets[k].vertices[0];
            if let Domain::Disk { radius } = mesh.domain {
                let x = mesh.vertices[v];
                return Some([-x[1] / radius, x[0] / radius]);
            }
            let incoming = facet_direction(mesh, (k + nf - 1) % nf);
            let outgoing = facet_direction(mesh, k);
            let cross = incoming[0] * outgoing[1] - incoming[1] * outgoing[0];
            let dot = incoming[0] * outgoing[0] + incoming[1] * outgoing[1];
            (cross.abs() < 1e-12 && dot > 0.0).then_some(outgoing)
        })
        .collect()
}

fn facet_direction(mesh: &Mesh, f: usize) -> [f64; 2] {
    let facet = &mesh.boundary_facets[f];
    let (p, q) = (mesh.vertices[facet.vertices[0]], mesh.vertices[facet.vertices[1]]);
    [(q[0] - p[0]) / facet.length, (q[1] - p[1]) / facet.length]
}

pub(crate) fn interpolate_speed(mesh: &Mesh, speeds: &[f64], s: f64) -> f64 {
    let nf = mesh.n_facets();
    let s = s.rem_euclid(mesh.boundary_length());
    let k = mesh
        .boundary_facets
        .partition_point(|f| f.arc_start <= s)
        .saturating_sub(1)
        .min(nf - 1);
    let f = &mesh.boundary_facets[k];
    let t = ((s - f.arc_start) / f.length).clamp(0.0, 1.0);
    (1.0 - t) * speeds[k] + t * speeds[(k + 1) % nf]
}

fn extend_with_cutoff(mesh: &Mesh, speeds: &[f64], tangents: &[Option<[f64; 2]>], delta: f64) -> Vec<[f64; 2]> {
    let mut vel = vec![[0.0; 2]; mesh.n_vertices()];
    for (k, &v) in mesh.boundary_vertex_loop().iter().enumerate() {
        if let Some(t) = tangents[k] {
            vel[v] = [speeds[k] * t[0], speeds[k] * t[1]];
        }
    }
    let total = mesh.boundary_length();
    for (v, x) in mesh.vertices.iter().enumerate() {
        if mesh.is_boundary_vertex(v) {
            continue;
        }
        let d = mesh.domain.distance_to_boundary(*x);
        let chi = cutoff(d / delta);
        if chi == 0.0 {
            continue;
        }
        let (s, tau) = match mesh.domain {
            Domain::Disk { .. } => {
                let theta = x[1].atan2(x[0]).rem_euclid(2.0 * std::f64::consts::PI);
                let (sn, cs) = theta.sin_cos();
                (theta / (2.0 * std::f64::consts::PI) * total, [-sn, cs])
            }
            _ => {
                let [x0, x1, y0, y1] = mesh.domain.box_bounds().unwrap();
                let (w, h) = (x1 - x0, y1 - y0);
                let sides = [
                    (x[1] - y0, x[0] - x0, [1.0, 0.0]),
                    (x1 - x[0], w + (x[1] - y0), [0.0, 1.0]),
                    (y1 - x[1], w + h + (x1 - x[0]), [-1.0, 0.0]),
                    (x[0] - x0, 2.0 * w + h + (y1 - x[1]), [0.0, -1.0]),
                ];
                let near = sides.iter().min_by(|a, b| a.0.partial_cmp(&b.0).unwrap()).unwrap();
                (near.1, near.2)
            }
        };
        let sp = chi * interpolate_speed(mesh, speeds, s);
        vel[v] = [sp * tau[0], sp * tau[1]];
    }
    vel
}
