use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Domain;
use crate::error::{Error, Result};

/// Abscissae of the two-point Gauss rule on the unit facet parameter `[0, 1]`.
pub(crate) const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// A boundary facet: a segment in 2D, an endpoint in 1D.
///
/// Facets are stored in arclength order along the boundary, counterclockwise
/// from the domain's declared origin. In 1D the endpoints carry unit mass
/// (counting measure) and occupy the parameter ranges `[0, 1)` and `[1, 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFacet {
    pub vertices: Vec<usize>,
    pub length: f64,
    pub normal: [f64; 2],
    pub cell: usize,
    pub arc_start: f64,
}

/// Simplicial P1 mesh with precomputed cell geometry.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Domain,
    pub resolution: f64,
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<Vec<usize>>,
    pub boundary_facets: Vec<BoundaryFacet>,
    cell_measure: Vec<f64>,
    cell_grads: Vec<[[f64; 2]; 3]>,
    lumped_mass: Vec<f64>,
    vertex_cells: Vec<Vec<usize>>,
    vertex_facets: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    total_boundary: f64,
}

/// Plot-ready mesh export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshExport {
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<Vec<usize>>,
    pub boundary: Vec<Vec<usize>>,
}

pub fn generate_mesh(domain: Domain, resolution: f64) -> Result<Mesh> {
    domain.validate()?;
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::ResolutionTooCoarse {
            resolution,
            detail: "resolution must be positive and finite".into(),
        });
    }
    let (vertices, cells, facets) = match domain {
        Domain::Interval { a, b } => interval_mesh(a, b, resolution)?,
        Domain::Rectangle { width, height } => rect_mesh([0.0, width, 0.0, height], resolution, 1)?,
        Domain::ThinRectangle { a, b, mu } => rect_mesh([a, b, 0.0, mu], resolution, 2)?,
        Domain::Disk { radius } => disk_mesh(radius, resolution)?,
    };
    Mesh::from_parts(domain, resolution, vertices, cells, facets)
}

fn cell_count(length: f64, resolution: f64) -> usize {
    ((length / resolution) - 1e-9).ceil().max(1.0) as usize
}

type Parts = (Vec<[f64; 2]>, Vec<Vec<usize>>, Vec<Vec<usize>>);

fn interval_mesh(a: f64, b: f64, resolution: f64) -> Result<Parts> {
    let n = cell_count(b - a, resolution);
    if n < 4 {
        return Err(Error::ResolutionTooCoarse {
            resolution,
            detail: format!("{n} cells on the interval (need at least 4)"),
        });
    }
    let h = (b - a) / n as f64;
    let vertices = (0..=n)
        .map(|i| [if i == n { b } else { a + i as f64 * h }, 0.0])
        .collect();
    let cells = (0..n).map(|i| vec![i, i + 1]).collect();
    Ok((vertices, cells, vec![vec![0], vec![n]]))
}

fn rect_mesh(bounds: [f64; 4], resolution: f64, min_layers: usize) -> Result<Parts> {
    let [x0, x1, y0, y1] = bounds;
    let nx = cell_count(x1 - x0, resolution);
    let ny = cell_count(y1 - y0, resolution).max(min_layers);
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny {
            y1
        } else {
            y0 + (y1 - y0) * j as f64 / ny as f64
        };
        for i in 0..=nx {
            let x = if i == nx {
                x1
            } else {
                x0 + (x1 - x0) * i as f64 / nx as f64
            };
            vertices.push([x, y]);
        }
    }
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                cells.push(vec![v00, v10, v11]);
                cells.push(vec![v00, v11, v01]);
            } else {
                cells.push(vec![v00, v10, v01]);
                cells.push(vec![v10, v11, v01]);
            }
        }
    }
    let mut facets = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        facets.push(vec![idx(i, 0), idx(i + 1, 0)]);
    }
    for j in 0..ny {
        facets.push(vec![idx(nx, j), idx(nx, j + 1)]);
    }
    for i in (0..nx).rev() {
        facets.push(vec![idx(i + 1, ny), idx(i, ny)]);
    }
    for j in (0..ny).rev() {
        facets.push(vec![idx(0, j + 1), idx(0, j)]);
    }
    Ok((vertices, cells, facets))
}

/// Concentric-ring triangulation; the outer ring lies exactly on the circle
/// and starts at angle 0.
fn disk_mesh(radius: f64, resolution: f64) -> Result<Parts> {
    let m_boundary = cell_count(2.0 * PI * radius, resolution);
    if m_boundary < 4 {
        return Err(Error::ResolutionTooCoarse {
            resolution,
            detail: format!("{m_boundary} boundary facets (need at least 4)"),
        });
    }
    let n_rings = cell_count(radius, resolution);
    let mut vertices = vec![[0.0, 0.0]];
    // (first vertex index, count, angular offset)
    let mut rings: Vec<(usize, usize, f64)> = Vec::with_capacity(n_rings);
    let mut prev_count = 0;
    for k in 1..=n_rings {
        let r = radius * k as f64 / n_rings as f64;
        let count = if k == n_rings {
            m_boundary
        } else {
            cell_count(2.0 * PI * r, resolution)
                .max(6)
                .max(prev_count)
                .min(m_boundary)
        };
        prev_count = count;
        let offset = if (n_rings - k) % 2 == 1 { PI / count as f64 } else { 0.0 };
        let first = vertices.len();
        for j in 0..count {
            let theta = offset + 2.0 * PI * j as f64 / count as f64;
            let (s, c) = theta.sin_cos();
            vertices.push([r * c, r * s]);
        }
        rings.push((first, count, offset));
    }

    let mut cells = Vec::new();
    let (f1, m1, _) = rings[0];
    for j in 0..m1 {
        cells.push(vec![0, f1 + j, f1 + (j + 1) % m1]);
    }
    for w in rings.windows(2) {
        stitch_rings(w[0], w[1], &mut cells);
    }

    let (fb, mb, _) = *rings.last().unwrap();
    let facets = (0..mb).map(|j| vec![fb + j, fb + (j + 1) % mb]).collect();
    Ok((vertices, cells, facets))
}

fn stitch_rings(inner: (usize, usize, f64), outer: (usize, usize, f64), cells: &mut Vec<Vec<usize>>) {
    let (fa, ma, oa) = inner;
    let (fb, mb, ob) = outer;
    let step_a = 2.0 * PI / ma as f64;
    let step_b = 2.0 * PI / mb as f64;
    // Inner-ring vertex whose angle is closest to the first outer vertex.
    let wrap = |x: f64| (x + PI).rem_euclid(2.0 * PI) - PI;
    let i0 = (0..ma)
        .min_by(|&i, &j| {
            let di = wrap(oa + step_a * i as f64 - ob).abs();
            let dj = wrap(oa + step_a * j as f64 - ob).abs();
            di.partial_cmp(&dj).unwrap()
        })
        .unwrap();
    let a_start = ob + wrap(oa + step_a * i0 as f64 - ob);
    let a_vertex = |c: usize| fa + (i0 + c) % ma;
    let b_vertex = |c: usize| fb + c % mb;
    let (mut ca, mut cb) = (0usize, 0usize);
    while ca < ma || cb < mb {
        let next_a = a_start + step_a * (ca + 1) as f64;
        let next_b = ob + step_b * (cb + 1) as f64;
        let advance_a = cb == mb || (ca < ma && next_a < next_b);
        if advance_a {
            cells.push(vec![a_vertex(ca), a_vertex(ca + 1), b_vertex(cb)]);
            ca += 1;
        } else {
            cells.push(vec![a_vertex(ca), b_vertex(cb + 1), b_vertex(cb)]);
            cb += 1;
        }
    }
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Assemble a mesh from raw connectivity, fixing cell orientation and
    /// computing all derived geometry. Boundary facets must be listed in
    /// arclength order.
    pub fn from_parts(
        domain: Domain,
        resolution: f64,
        vertices: Vec<[f64; 2]>,
        mut cells: Vec<Vec<usize>>,
        facet_vertices: Vec<Vec<usize>>,
    ) -> Result<Mesh> {
        let dim = domain.dim();
        for c in cells.iter_mut() {
            if c.len() != dim + 1 || c.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidDomain(format!("malformed cell {c:?}")));
            }
            if dim == 2 && signed_area(vertices[c[0]], vertices[c[1]], vertices[c[2]]) < 0.0 {
                c.swap(1, 2);
            }
        }

        let mut facet_cell: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (ci, c) in cells.iter().enumerate() {
            if dim == 1 {
                for &v in c {
                    facet_cell.entry(vec![v]).or_default().push(ci);
                }
            } else {
                for k in 0..3 {
                    let mut e = vec![c[k], c[(k + 1) % 3]];
                    e.sort_unstable();
                    facet_cell.entry(e).or_default().push(ci);
                }
            }
        }

        let mut boundary_facets = Vec::with_capacity(facet_vertices.len());
        for fv in facet_vertices {
            let mut key = fv.clone();
            key.sort_unstable();
            let owners = facet_cell.get(&key).cloned().unwrap_or_default();
            if owners.len() != 1 {
                return Err(Error::InvalidDomain(format!(
                    "boundary facet {fv:?} belongs to {} cells",
                    owners.len()
                )));
            }
            boundary_facets.push(BoundaryFacet {
                vertices: fv,
                length: 0.0,
                normal: [0.0, 0.0],
                cell: owners[0],
                arc_start: 0.0,
            });
        }
        if let Some((e, owners)) = facet_cell.iter().find(|(_, o)| o.len() > 2) {
            return Err(Error::InvalidDomain(format!(
                "non-conforming mesh: facet {e:?} shared by {} cells",
                owners.len()
            )));
        }

        let n = vertices.len();
        let mut vertex_cells = vec![Vec::new(); n];
        for (ci, c) in cells.iter().enumerate() {
            for &v in c {
                vertex_cells[v].push(ci);
            }
        }
        let mut vertex_facets = vec![Vec::new(); n];
        let mut boundary_vertex = vec![false; n];
        for (fi, f) in boundary_facets.iter().enumerate() {
            for &v in &f.vertices {
                vertex_facets[v].push(fi);
                boundary_vertex[v] = true;
            }
        }

        let mut mesh = Mesh {
            domain,
            resolution,
            vertices,
            cells,
            boundary_facets,
            cell_measure: Vec::new(),
            cell_grads: Vec::new(),
            lumped_mass: Vec::new(),
            vertex_cells,
            vertex_facets,
            boundary_vertex,
            total_boundary: 0.0,
        };
        mesh.update_geometry()?;
        Ok(mesh)
    }

    fn update_geometry(&mut self) -> Result<()> {
        let dim = self.dim();
        let n = self.vertices.len();
        self.cell_measure.clear();
        self.cell_grads.clear();
        self.lumped_mass = vec![0.0; n];
        for c in &self.cells {
            let (measure, grads) = if dim == 1 {
                let h = self.vertices[c[1]][0] - self.vertices[c[0]][0];
                (h, [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]])
            } else {
                let [a, b, cc] = [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]];
                let area = signed_area(a, b, cc);
                let inv = 1.0 / (2.0 * area);
                (
                    area,
                    [
                        [(b[1] - cc[1]) * inv, (cc[0] - b[0]) * inv],
                        [(cc[1] - a[1]) * inv, (a[0] - cc[0]) * inv],
                        [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
                    ],
                )
            };
            if !(measure > 0.0) {
                return Err(Error::InvalidDomain(format!("degenerate or inverted cell {c:?}")));
            }
            let share = measure / c.len() as f64;
            for &v in c {
                self.lumped_mass[v] += share;
            }
            self.cell_measure.push(measure);
            self.cell_grads.push(grads);
        }

        let mut arc = 0.0;
        for f in self.boundary_facets.iter_mut() {
            f.arc_start = arc;
            if dim == 1 {
                f.length = 1.0;
                let x = self.vertices[f.vertices[0]][0];
                let mid = 0.5 * (self.vertices[0][0] + self.vertices[n - 1][0]);
                f.normal = [if x < mid { -1.0 } else { 1.0 }, 0.0];
            } else {
                let (p, q) = (self.vertices[f.vertices[0]], self.vertices[f.vertices[1]]);
                let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
                let len = dx.hypot(dy);
                f.length = len;
                f.normal = [dy / len, -dx / len];
            }
            arc += f.length;
        }
        self.total_boundary = arc;
        Ok(())
    }

    /// Copy of the mesh with every vertex displaced; connectivity, boundary
    /// labels and the hole facet numbering are preserved.
    pub fn deformed(&self, displacement: &[[f64; 2]]) -> Result<Mesh> {
        assert_eq!(displacement.len(), self.vertices.len());
        let mut m = self.clone();
        for (x, d) in m.vertices.iter_mut().zip(displacement) {
            x[0] += d[0];
            x[1] += d[1];
        }
        m.update_geometry()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_facets(&self) -> usize {
        self.boundary_facets.len()
    }

    pub fn cell_measure(&self, cell: usize) -> f64 {
        self.cell_measure[cell]
    }

    /// Gradients of the P1 basis functions of `cell`, one row per local node.
    pub fn cell_gradients(&self, cell: usize) -> &[[f64; 2]; 3] {
        &self.cell_grads[cell]
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    pub fn vertex_facets(&self, v: usize) -> &[usize] {
        &self.vertex_facets[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Discrete H^{N-1}(boundary).
    pub fn boundary_length(&self) -> f64 {
        self.total_boundary
    }

    /// Discrete H^N(domain).
    pub fn volume(&self) -> f64 {
        self.cell_measure.iter().sum()
    }

    pub fn max_facet_length(&self) -> f64 {
        self.boundary_facets.iter().map(|f| f.length).fold(0.0, f64::max)
    }

    /// Whether the boundary forms a closed loop parameterized by arclength.
    pub fn boundary_is_loop(&self) -> bool {
        self.dim() == 2
    }

    /// First vertex of each facet, in arclength order.
    pub fn boundary_vertex_loop(&self) -> Vec<usize> {
        self.boundary_facets.iter().map(|f| f.vertices[0]).collect()
    }

    pub fn export(&self) -> MeshExport {
        MeshExport {
            vertices: self.vertices.clone(),
            cells: self.cells.clone(),
            boundary: self.boundary_facets.iter().map(|f| f.vertices.clone()).collect(),
        }
    }

    /// Structural checks: orientation, conformity, facet ownership and the
    /// boundary facet chain.
    pub fn check_invariants(&self) -> Result<()> {
        if self.cell_measure.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidDomain("non-positive cell measure".into()));
        }
        if self.dim() == 2 {
            let nf = self.n_facets();
            for (i, f) in self.boundary_facets.iter().enumerate() {
                let next = &self.boundary_facets[(i + 1) % nf];
                if f.vertices[1] != next.vertices[0] {
                    return Err(Error::InvalidDomain(format!("boundary chain broken at facet {i}")));
                }
            }
        }
        Ok(())
    }
}
