use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::error::{Error, Result};

/// A boundary hole: a union of whole boundary facets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryHole {
    facets: BTreeSet<usize>,
    measure: f64,
}

/// A maximal run of consecutive hole facets along the boundary loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleArc {
    pub first_facet: usize,
    pub n_facets: usize,
    /// Arclength of the arc's start point.
    pub start: f64,
    pub length: f64,
}

impl BoundaryHole {
    pub fn empty() -> Self {
        BoundaryHole {
            facets: BTreeSet::new(),
            measure: 0.0,
        }
    }

    pub fn from_facets(mesh: &Mesh, facets: impl IntoIterator<Item = usize>) -> Result<Self> {
        let facets: BTreeSet<usize> = facets.into_iter().collect();
        if let Some(&bad) = facets.iter().find(|&&f| f >= mesh.n_facets()) {
            return Err(Error::InvalidHole(format!(
                "facet index {bad} out of range ({} boundary facets)",
                mesh.n_facets()
            )));
        }
        let measure = measure_of(mesh, &facets);
        Ok(BoundaryHole { facets, measure })
    }

    pub fn full(mesh: &Mesh) -> Self {
        Self::from_facets(mesh, 0..mesh.n_facets()).unwrap()
    }

    pub fn facets(&self) -> &BTreeSet<usize> {
        &self.facets
    }

    pub fn contains(&self, facet: usize) -> bool {
        self.facets.contains(&facet)
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn union(&self, mesh: &Mesh, other: &BoundaryHole) -> BoundaryHole {
        Self::from_facets(mesh, self.facets.union(&other.facets).copied()).unwrap()
    }

    pub fn intersection(&self, mesh: &Mesh, other: &BoundaryHole) -> BoundaryHole {
        Self::from_facets(mesh, self.facets.intersection(&other.facets).copied()).unwrap()
    }

    pub fn complement(&self, mesh: &Mesh) -> BoundaryHole {
        Self::from_facets(mesh, (0..mesh.n_facets()).filter(|f| !self.facets.contains(f))).unwrap()
    }

    pub fn is_subset(&self, other: &BoundaryHole) -> bool {
        self.facets.is_subset(&other.facets)
    }

    /// Vertex mask of the discrete constraint `u = 0` on the hole.
    pub fn vertex_mask(&self, mesh: &Mesh) -> Vec<bool> {
        let mut mask = vec![false; mesh.n_vertices()];
        for &f in &self.facets {
            for &v in &mesh.boundary_facets[f].vertices {
                mask[v] = true;
            }
        }
        mask
    }

    /// Maximal runs of consecutive facets. On a closed boundary loop runs wrap
    /// around the origin; in 1D each endpoint is its own arc.
    pub fn arcs(&self, mesh: &Mesh) -> Vec<HoleArc> {
        let nf = mesh.n_facets();
        if self.facets.is_empty() {
            return Vec::new();
        }
        let facet_arc = |first: usize, n: usize| HoleArc {
            first_facet: first,
            n_facets: n,
            start: mesh.boundary_facets[first].arc_start,
            length: (0..n).map(|k| mesh.boundary_facets[(first + k) % nf].length).sum(),
        };
        if !mesh.boundary_is_loop() {
            return self.facets.iter().map(|&f| facet_arc(f, 1)).collect();
        }
        if self.facets.len() == nf {
            return vec![facet_arc(0, nf)];
        }
        // Start scanning just after a gap so no run is split at the origin.
        let gap = (0..nf).find(|f| !self.facets.contains(f)).unwrap();
        let mut arcs = Vec::new();
        let mut k = 0;
        while k < nf {
            let f = (gap + 1 + k) % nf;
            if self.facets.contains(&f) {
                let mut n = 0;
                while n < nf && self.facets.contains(&((f + n) % nf)) {
                    n += 1;
                }
                arcs.push(facet_arc(f, n));
                k += n;
            } else {
                k += 1;
            }
        }
        arcs.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
        arcs
    }

    /// Arclength intervals `(start, end)` of the hole, for export.
    pub fn intervals(&self, mesh: &Mesh) -> Vec<(f64, f64)> {
        self.arcs(mesh).iter().map(|a| (a.start, a.start + a.length)).collect()
    }

    /// Stable 64-bit fingerprint of the facet set.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the sorted facet list
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &f in &self.facets {
            for b in (f as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

fn measure_of(mesh: &Mesh, facets: &BTreeSet<usize>) -> f64 {
    facets.iter().map(|&f| mesh.boundary_facets[f].length).sum()
}

/// Exact measure of the hole, recomputed from its member facets.
pub fn boundary_measure(mesh: &Mesh, hole: &BoundaryHole) -> f64 {
    measure_of(mesh, &hole.facets)
}

/// Snap the arclength arc `[start, start + length]` to whole facets.
///
/// Facets fully inside the arc are always taken; each of the (at most two)
/// partially covered end facets is added when doing so brings the measure
/// closer to `length`.
pub fn make_hole_from_arc(mesh: &Mesh, start: f64, length: f64) -> Result<BoundaryHole> {
    if !(length >= 0.0) || !start.is_finite() {
        return Err(Error::InvalidHole(format!(
            "arc length must be non-negative, got {length}"
        )));
    }
    let total = mesh.boundary_length();
    if length > total * (1.0 + 1e-12) {
        return Err(Error::InvalidHole(format!(
            "arc length {length} exceeds boundary measure {total}"
        )));
    }
    if length == 0.0 {
        return Ok(BoundaryHole::empty());
    }
    if length >= total * (1.0 - 1e-12) {
        return Ok(BoundaryHole::full(mesh));
    }
    let start = start.rem_euclid(total);
    let end = start + length;
    let tol = 1e-12 * total;
    let mut inside = Vec::new();
    let mut partial: Vec<(usize, f64)> = Vec::new();
    for (i, f) in mesh.boundary_facets.iter().enumerate() {
        let (fs, fe) = (f.arc_start, f.arc_start + f.length);
        // the arc may wrap past the origin
        let overlap: f64 = [0.0, total]
            .iter()
            .map(|shift| (fe.min(end - shift) - fs.max(start - shift)).max(0.0))
            .sum();
        if overlap >= f.length - tol {
            inside.push(i);
        } else if overlap > tol {
            partial.push((i, overlap));
        }
    }
    let base: f64 = inside.iter().map(|&i| mesh.boundary_facets[i].length).sum();
    let mut best: (f64, Vec<usize>) = ((base - length).abs(), Vec::new());
    for mask in 1..(1usize << partial.len()) {
        let extra: Vec<usize> = (0..partial.len())
            .filter(|k| mask & (1 << k) != 0)
            .map(|k| partial[k].0)
            .collect();
        let m = base + extra.iter().map(|&i| mesh.boundary_facets[i].length).sum::<f64>();
        if (m - length).abs() < best.0 - tol {
            best = ((m - length).abs(), extra);
        }
    }
    inside.extend(best.1);
    BoundaryHole::from_facets(mesh, inside)
}
