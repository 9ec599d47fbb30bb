//! Independent reference computations shared by the integration suites.
//!
//! Nothing here calls the crate's assembly or solvers: matrices are built
//! from raw mesh geometry and solved densely, ODEs are shot with RK4, and
//! gradients are differenced.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use tracehole::{make_hole_from_arc, solve_trace_constant, BoundaryHole, Mesh, ProblemConfig};

/// Dense stiffness plus lumped mass, and consistent boundary mass, assembled
/// from the mesh geometry.
pub fn dense_forms(mesh: &Mesh) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = mesh.vertices.len();
    let mut k = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for cell in &mesh.cells {
        if cell.len() == 2 {
            let (i, j) = (cell[0], cell[1]);
            let h = (mesh.vertices[j][0] - mesh.vertices[i][0]).abs();
            k[(i, i)] += 1.0 / h + h / 2.0;
            k[(j, j)] += 1.0 / h + h / 2.0;
            k[(i, j)] -= 1.0 / h;
            k[(j, i)] -= 1.0 / h;
        } else {
            let p: Vec<[f64; 2]> = cell.iter().map(|&v| mesh.vertices[v]).collect();
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let area = 0.5 * det.abs();
            // gradient of the barycentric of vertex a: perpendicular of the opposite edge
            let grad = |a: usize| {
                let (q1, q2) = (p[(a + 1) % 3], p[(a + 2) % 3]);
                [(q1[1] - q2[1]) / det, (q2[0] - q1[0]) / det]
            };
            for a in 0..3 {
                for c in 0..3 {
                    let (ga, gc) = (grad(a), grad(c));
                    k[(cell[a], cell[c])] += area * (ga[0] * gc[0] + ga[1] * gc[1]);
                }
                k[(cell[a], cell[a])] += area / 3.0;
            }
        }
    }
    for f in &mesh.boundary_facets {
        if f.vertices.len() == 1 {
            let v = f.vertices[0];
            b[(v, v)] += 1.0;
        } else {
            let (i, j) = (f.vertices[0], f.vertices[1]);
            let len = (mesh.vertices[j][0] - mesh.vertices[i][0]).hypot(mesh.vertices[j][1] - mesh.vertices[i][1]);
            b[(i, i)] += len / 3.0;
            b[(j, j)] += len / 3.0;
            b[(i, j)] += len / 6.0;
            b[(j, i)] += len / 6.0;
        }
    }
    (k, b)
}

/// Smallest eigenvalue of `K v = lambda B v` over fields vanishing on the
/// hole vertices: interior unknowns are condensed out and the boundary
/// pencil is reduced with a Cholesky factor of `B`.
pub fn steklov_eigen_oracle(mesh: &Mesh, hole: &BoundaryHole) -> f64 {
    let n = mesh.vertices.len();
    let mut constrained = vec![false; n];
    let mut on_boundary = vec![false; n];
    for (idx, f) in mesh.boundary_facets.iter().enumerate() {
        for &v in &f.vertices {
            on_boundary[v] = true;
            if hole.contains(idx) {
                constrained[v] = true;
            }
        }
    }
    let bnd: Vec<usize> = (0..n).filter(|&v| on_boundary[v] && !constrained[v]).collect();
    let int: Vec<usize> = (0..n).filter(|&v| !on_boundary[v]).collect();
    let (k, b) = dense_forms(mesh);
    let sub = |m: &DMatrix<f64>, r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| m[(r[i], c[j])]);
    let kbb = sub(&k, &bnd, &bnd);
    let schur = if int.is_empty() {
        kbb
    } else {
        let kbi = sub(&k, &bnd, &int);
        let kii = sub(&k, &int, &int);
        let x = kii.cholesky().expect("interior block is SPD").solve(&kbi.transpose());
        kbb - &kbi * x
    };
    let bbb = sub(&b, &bnd, &bnd);
    let l = bbb.cholesky().expect("boundary mass is SPD").l();
    let linv = l.clone().try_inverse().unwrap();
    let c = &linv * schur * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    SymmetricEigen::new(c)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `S` on `(0, 1)` with `u(0) = 0` and the trace taken at `x = 1`, by RK4
/// shooting of the flux form `w = |u'|^{p-2} u'`, `w' = |u|^{p-2} u`.
/// At the free end the natural condition gives `S = w(1) / u(1)^{p-1}`.
pub fn shoot_interval(p: f64, steps: usize) -> f64 {
    let rhs = |u: f64, w: f64| {
        let du = w.signum() * w.abs().powf(1.0 / (p - 1.0));
        let dw = u.signum() * u.abs().powf(p - 1.0);
        (du, dw)
    };
    let h = 1.0 / steps as f64;
    let (mut u, mut w) = (0.0f64, 1.0f64);
    for _ in 0..steps {
        let (k1u, k1w) = rhs(u, w);
        let (k2u, k2w) = rhs(u + 0.5 * h * k1u, w + 0.5 * h * k1w);
        let (k3u, k3w) = rhs(u + 0.5 * h * k2u, w + 0.5 * h * k2w);
        let (k4u, k4w) = rhs(u + h * k3u, w + h * k3w);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    }
    w / u.powf(p - 1.0)
}

/// Central differences of `f` at `x` with step `h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Best single arc of length `alpha * P` over `positions` equally spaced starts.
pub fn arc_sweep(mesh: &Mesh, cfg: &ProblemConfig, alpha: f64, positions: usize) -> (f64, f64) {
    let per = mesh.boundary_length();
    (0..positions)
        .map(|k| {
            let start = k as f64 * per / positions as f64;
            let hole = make_hole_from_arc(mesh, start, alpha * per).unwrap();
            (start, solve_trace_constant(mesh, cfg, &hole, None).unwrap().s_value)
        })
        .fold((0.0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Whether a facet set forms one cyclic run on an `n`-facet loop.
pub fn is_single_cyclic_run(facets: &[usize], n: usize) -> bool {
    let set: std::collections::BTreeSet<usize> = facets.iter().copied().collect();
    let starts = set.iter().filter(|&&f| !set.contains(&((f + n - 1) % n))).count();
    starts == 1 || set.len() == n
}
