//! Optimal boundary holes of prescribed measure.
//!
//! Two strategies share the facet representation of holes:
//!
//! * an alternating scheme that solves for the extremal on the current hole
//!   and re-selects the facets carrying the least boundary mass `int |u|^q`;
//! * a shape-gradient descent that moves arc endpoints one facet at a time,
//!   guided by the shape derivative of localized endpoint fields.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{cell_gradient, Field, ProblemConfig};
use crate::geometry::{BoundaryHole, Extension, Mesh, TangentialField, GAUSS2};
use crate::shape_derivative::evaluate_shape_derivative;
use crate::trace_solver::{solve_trace_constant, TraceResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Alternating,
    ShapeGradient,
    Combined,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    /// Random initial holes for the alternating scheme.
    pub n_starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Additional deterministic starting holes.
    pub initial_holes: Vec<BoundaryHole>,
    /// Shape-gradient stop: predicted one-facet gain below this fraction of S.
    pub stationarity_tolerance: f64,
    /// Relative decrease a one-facet move must achieve from a stationary point.
    pub saddle_tolerance: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            n_starts: 5,
            seed: 0,
            max_iterations: 200,
            initial_holes: Vec::new(),
            stationarity_tolerance: 1e-4,
            saddle_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub measure: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationRun {
    pub alpha: f64,
    /// Measure fraction actually realized by the facet union.
    pub alpha_effective: f64,
    pub best_hole: BoundaryHole,
    pub best_value: f64,
    pub history: Vec<HistoryEntry>,
    pub strategy: Strategy,
    pub converged: bool,
    pub extremal: Field,
    /// Final value of every start (alternating / combined only).
    pub start_values: Vec<f64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn within_one_facet(mesh: &Mesh, hole: &BoundaryHole, target: f64) -> bool {
    (hole.measure() - target).abs() <= mesh.max_facet_length() * (1.0 + 1e-12)
}

/// Take facets in `order` while doing so brings the measure closer to `target`.
pub fn select_to_target(mesh: &Mesh, order: &[usize], target: f64) -> BoundaryHole {
    let mut chosen = Vec::new();
    let mut m = 0.0;
    for &f in order {
        let len = mesh.boundary_facets[f].length;
        if (m + len - target).abs() < (m - target).abs() {
            chosen.push(f);
            m += len;
        } else {
            break;
        }
    }
    BoundaryHole::from_facets(mesh, chosen).unwrap()
}

/// Random facet subset of (approximately) the target measure.
pub fn random_hole(mesh: &Mesh, target: f64, seed: u64) -> BoundaryHole {
    let mut order: Vec<usize> = (0..mesh.n_facets()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    select_to_target(mesh, &order, target)
}

/// Measure of the facets on which the extremal vanishes (both endpoint values
/// at most `threshold`, default `1e-8 * max u`).
pub fn zero_set_measure(mesh: &Mesh, result: &TraceResult, threshold: Option<f64>) -> f64 {
    let u = &result.extremal.0;
    let thr = threshold.unwrap_or(1e-8 * result.extremal.max_abs());
    mesh.boundary_facets
        .iter()
        .filter(|f| f.vertices.iter().all(|&v| u[v].abs() <= thr))
        .map(|f| f.length)
        .sum()
}

/// Value each constrained vertex would take if it alone were released,
/// minimizing the quotient over that nodal value with everything else fixed.
/// Unconstrained vertices keep their value.
pub fn released_values(mesh: &Mesh, cfg: &ProblemConfig, result: &TraceResult, hole: &BoundaryHole) -> Vec<f64> {
    let u = &result.extremal.0;
    let mask = hole.vertex_mask(mesh);
    let ev = crate::fem::evaluate(mesh, cfg, u);
    let (p, q) = (cfg.p, cfg.q);
    let upper = 2.0 * result.extremal.max_abs();
    let mut out = u.clone();
    let mut work = u.clone();
    for v in 0..mesh.n_vertices() {
        if !mask[v] {
            continue;
        }
        let base_e = ev.energy - local_energy(mesh, cfg, &work, v);
        let base_b = ev.boundary - local_boundary(mesh, q, &work, v);
        let mut quotient = |t: f64| {
            work[v] = t;
            let e = base_e + local_energy(mesh, cfg, &work, v);
            let b = base_b + local_boundary(mesh, q, &work, v);
            work[v] = u[v];
            if b > 0.0 {
                e / b.powf(p / q)
            } else {
                f64::INFINITY
            }
        };
        out[v] = golden_section(&mut quotient, 0.0, upper, 60);
    }
    out
}

fn local_energy(mesh: &Mesh, cfg: &ProblemConfig, u: &[f64], v: usize) -> f64 {
    let eps2 = cfg.epsilon * cfg.epsilon;
    let cells: f64 = mesh
        .vertex_cells(v)
        .iter()
        .map(|&c| {
            let g = cell_gradient(mesh, c, u);
            mesh.cell_measure(c) * (eps2 + g[0] * g[0] + g[1] * g[1]).powf(0.5 * cfg.p)
        })
        .sum();
    cells + mesh.lumped_mass()[v] * u[v].abs().powf(cfg.p)
}

fn facet_mass(mesh: &Mesh, q: f64, u: &[f64], f: usize) -> f64 {
    let facet = &mesh.boundary_facets[f];
    match facet.vertices[..] {
        [v] => facet.length * u[v].abs().powf(q),
        [v0, v1] => GAUSS2
            .iter()
            .map(|&xi| 0.5 * facet.length * ((1.0 - xi) * u[v0] + xi * u[v1]).abs().powf(q))
            .sum(),
        _ => unreachable!(),
    }
}

fn local_boundary(mesh: &Mesh, q: f64, u: &[f64], v: usize) -> f64 {
    mesh.vertex_facets(v).iter().map(|&f| facet_mass(mesh, q, u, f)).sum()
}

fn golden_section(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    if f(0.0) <= f(mid) {
        0.0
    } else {
        mid
    }
}

/// Facet scores `int_F |u~|^q` with `u~` the released field.
pub fn facet_scores(mesh: &Mesh, cfg: &ProblemConfig, result: &TraceResult, hole: &BoundaryHole) -> Vec<f64> {
    let released = released_values(mesh, cfg, result, hole);
    (0..mesh.n_facets())
        .map(|f| facet_mass(mesh, cfg.q, &released, f))
        .collect()
}

fn sorted_by_score(facets: impl Iterator<Item = usize>, scores: &[f64], descending: bool) -> Vec<usize> {
    let mut v: Vec<usize> = facets.collect();
    v.sort_by(|&a, &b| {
        let o = scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b));
        if descending {
            o.reverse().then(a.cmp(&b))
        } else {
            o
        }
    });
    v
}

struct RunState {
    hole: BoundaryHole,
    result: TraceResult,
    history: Vec<HistoryEntry>,
    converged: bool,
}

/// `None` when the hole leaves no free boundary vertex.
fn solve_checked(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    hole: &BoundaryHole,
    warm: Option<&Field>,
) -> Result<Option<TraceResult>> {
    match solve_trace_constant(mesh, cfg, hole, warm) {
        Ok(r) => Ok(Some(r)),
        Err(Error::EmptyAdmissibleClass) => Ok(None),
        Err(e) => Err(e),
    }
}

fn improves(new: f64, old: f64) -> bool {
    new < old * (1.0 - 1e-12)
}

fn alternating_run(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    target: f64,
    init: BoundaryHole,
    max_iterations: usize,
) -> Result<Option<RunState>> {
    let Some(result) = solve_checked(mesh, cfg, &init, None)? else {
        return Ok(None);
    };
    let mut st = RunState {
        history: vec![HistoryEntry {
            iteration: 0,
            measure: init.measure(),
            value: result.s_value,
        }],
        hole: init,
        result,
        converged: false,
    };
    let mut visited: HashSet<u64> = HashSet::new();
    visited.insert(st.hole.fingerprint());
    for k in 1..=max_iterations {
        let scores = facet_scores(mesh, cfg, &st.result, &st.hole);
        let order = sorted_by_score(0..mesh.n_facets(), &scores, false);
        let candidate = select_to_target(mesh, &order, target);
        if candidate == st.hole {
            st.converged = true;
            break;
        }
        let removed = sorted_by_score(st.hole.facets().difference(candidate.facets()).copied(), &scores, true);
        let added = sorted_by_score(candidate.facets().difference(st.hole.facets()).copied(), &scores, false);
        let mut m = removed.len().max(added.len());
        let mut accepted = false;
        while m >= 1 {
            let out = &removed[..m.min(removed.len())];
            let inn = &added[..m.min(added.len())];
            let trial = BoundaryHole::from_facets(
                mesh,
                st.hole
                    .facets()
                    .iter()
                    .filter(|f| !out.contains(f))
                    .chain(inn.iter())
                    .copied(),
            )?;
            m /= 2;
            if !within_one_facet(mesh, &trial, target) || !visited.insert(trial.fingerprint()) {
                continue;
            }
            let Some(r) = solve_checked(mesh, cfg, &trial, Some(&st.result.extremal))? else {
                continue;
            };
            if improves(r.s_value, st.result.s_value) {
                st.history.push(HistoryEntry {
                    iteration: k,
                    measure: trial.measure(),
                    value: r.s_value,
                });
                st.hole = trial;
                st.result = r;
                accepted = true;
                break;
            }
        }
        if !accepted {
            st.converged = true;
            break;
        }
    }
    Ok(Some(st))
}

fn finish(mesh: &Mesh, alpha: f64, strategy: Strategy, st: RunState, start_values: Vec<f64>) -> OptimizationRun {
    OptimizationRun {
        alpha,
        alpha_effective: st.hole.measure() / mesh.boundary_length(),
        best_value: st.result.s_value,
        best_hole: st.hole,
        history: st.history,
        strategy,
        converged: st.converged && st.result.converged,
        extremal: st.result.extremal,
        start_values,
    }
}

fn starting_holes(mesh: &Mesh, target: f64, init: Option<&BoundaryHole>, opts: &OptimizerOptions) -> Vec<BoundaryHole> {
    init.into_iter()
        .cloned()
        .chain(opts.initial_holes.iter().cloned())
        .chain((0..opts.n_starts as u64).map(|k| random_hole(mesh, target, opts.seed.wrapping_add(k))))
        .collect()
}

fn multi_start(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    alpha: f64,
    init: Option<&BoundaryHole>,
    opts: &OptimizerOptions,
) -> Result<(RunState, Vec<f64>)> {
    cfg.validate(mesh.dim())?;
    check_alpha(alpha)?;
    let target = alpha * mesh.boundary_length();
    let starts = starting_holes(mesh, target, init, opts);
    if starts.is_empty() {
        return Err(Error::InvalidConfig("no starting holes".into()));
    }
    for s in &starts {
        if !within_one_facet(mesh, s, target) {
            return Err(Error::InvalidHole(format!(
                "initial hole measure {} is not within one facet of the target {target}",
                s.measure()
            )));
        }
    }
    let runs: Vec<Option<RunState>> = starts
        .into_par_iter()
        .map(|s| alternating_run(mesh, cfg, target, s, opts.max_iterations))
        .collect::<Result<_>>()?;
    let start_values = runs
        .iter()
        .map(|r| r.as_ref().map_or(f64::INFINITY, |r| r.result.s_value))
        .collect();
    let runs: Vec<RunState> = runs.into_iter().flatten().collect();
    if runs.is_empty() {
        return Err(Error::EmptyAdmissibleClass);
    }
    // ties go to the earliest start
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.result.s_value < a.result.s_value { b } else { a })
        .unwrap();
    Ok((best, start_values))
}

/// Alternating scheme from `init` (if given), the extra holes in `opts` and
/// `opts.n_starts` random holes; the best run is returned.
pub fn optimize_hole_alternating(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    alpha: f64,
    init: Option<&BoundaryHole>,
    opts: &OptimizerOptions,
) -> Result<OptimizationRun> {
    let (best, start_values) = multi_start(mesh, cfg, alpha, init, opts)?;
    Ok(finish(mesh, alpha, Strategy::Alternating, best, start_values))
}

/// An arc endpoint with its outward direction and the facets a one-facet
/// move would add or remove.
#[derive(Debug, Clone, Copy)]
struct Endpoint {
    loop_vertex: usize,
    outward: f64,
    grow_facet: usize,
    shrink_facet: usize,
}

fn endpoints(mesh: &Mesh, hole: &BoundaryHole) -> Vec<Endpoint> {
    let nf = mesh.n_facets();
    let mut out = Vec::new();
    for arc in hole.arcs(mesh) {
        if arc.n_facets == nf {
            continue;
        }
        let last = (arc.first_facet + arc.n_facets - 1) % nf;
        out.push(Endpoint {
            loop_vertex: arc.first_facet,
            outward: -1.0,
            grow_facet: (arc.first_facet + nf - 1) % nf,
            shrink_facet: arc.first_facet,
        });
        out.push(Endpoint {
            loop_vertex: (last + 1) % nf,
            outward: 1.0,
            grow_facet: (last + 1) % nf,
            shrink_facet: last,
        });
    }
    out
}

/// Derivative of S for unit outward motion of one endpoint vertex; `None`
/// where no tangential field exists (polygon corners).
fn endpoint_derivative(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    hole: &BoundaryHole,
    result: &TraceResult,
    e: &Endpoint,
) -> Result<Option<f64>> {
    let ext = Extension::default_for(mesh);
    match TangentialField::vertex_bump(mesh, e.loop_vertex, e.outward, ext) {
        Ok(field) => Ok(Some(evaluate_shape_derivative(mesh, cfg, hole, &field, result)?.ds_dt)),
        Err(Error::InvalidField(_)) => Ok(None),
        Err(err) => Err(err),
    }
}

fn shape_gradient_from(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    target: f64,
    st: &mut RunState,
    opts: &OptimizerOptions,
) -> Result<()> {
    if !mesh.boundary_is_loop() {
        return Err(Error::InvalidHole("shape-gradient descent needs a 2D boundary".into()));
    }
    let start_iter = st.history.last().map_or(0, |h| h.iteration);
    let mut visited: HashSet<u64> = HashSet::new();
    visited.insert(st.hole.fingerprint());
    st.converged = false;
    for k in 1..=opts.max_iterations {
        let ends = endpoints(mesh, &st.hole);
        if ends.is_empty() {
            st.converged = true;
            break;
        }
        let derivs: Vec<Option<f64>> = ends
            .iter()
            .map(|e| endpoint_derivative(mesh, cfg, &st.hole, &st.result, e))
            .collect::<Result<_>>()?;
        // predicted change of S for growing at `g` and shrinking at `s`
        let mut moves: Vec<(f64, usize, usize)> = Vec::new();
        for (gi, g) in ends.iter().enumerate() {
            for (si, s) in ends.iter().enumerate() {
                if gi == si || st.hole.contains(g.grow_facet) || g.grow_facet == s.shrink_facet {
                    continue;
                }
                let predicted = match (derivs[gi], derivs[si]) {
                    (Some(dg), Some(ds)) => {
                        dg * mesh.boundary_facets[g.grow_facet].length
                            - ds * mesh.boundary_facets[s.shrink_facet].length
                    }
                    _ => f64::INFINITY,
                };
                moves.push((predicted, gi, si));
            }
        }
        moves.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let best_predicted = moves.first().map_or(f64::INFINITY, |m| m.0);
        // at a balanced point only a clear decrease is taken (leaves saddles, ignores mesh noise)
        let stationary =
            best_predicted.is_finite() && -best_predicted <= opts.stationarity_tolerance * st.result.s_value;
        let required = if stationary { opts.saddle_tolerance } else { 0.0 };
        let mut accepted = false;
        for &(_, gi, si) in &moves {
            let (g, s) = (ends[gi], ends[si]);
            let trial = BoundaryHole::from_facets(
                mesh,
                st.hole
                    .facets()
                    .iter()
                    .copied()
                    .filter(|&f| f != s.shrink_facet)
                    .chain(std::iter::once(g.grow_facet)),
            )?;
            if !within_one_facet(mesh, &trial, target) || !visited.insert(trial.fingerprint()) {
                continue;
            }
            let Some(r) = solve_checked(mesh, cfg, &trial, Some(&st.result.extremal))? else {
                continue;
            };
            if improves(r.s_value, st.result.s_value * (1.0 - required)) {
                st.history.push(HistoryEntry {
                    iteration: start_iter + k,
                    measure: trial.measure(),
                    value: r.s_value,
                });
                st.hole = trial;
                st.result = r;
                accepted = true;
                break;
            }
        }
        if !accepted {
            st.converged = true;
            break;
        }
    }
    Ok(())
}

/// Descent on arc endpoints at fixed measure, one facet per step.
pub fn optimize_hole_shape_gradient(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    alpha: f64,
    init: &BoundaryHole,
    opts: &OptimizerOptions,
) -> Result<OptimizationRun> {
    cfg.validate(mesh.dim())?;
    check_alpha(alpha)?;
    let target = alpha * mesh.boundary_length();
    if !within_one_facet(mesh, init, target) {
        return Err(Error::InvalidHole(format!(
            "initial hole measure {} is not within one facet of the target {target}",
            init.measure()
        )));
    }
    let result = solve_checked(mesh, cfg, init, None)?.ok_or(Error::EmptyAdmissibleClass)?;
    let mut st = RunState {
        history: vec![HistoryEntry {
            iteration: 0,
            measure: init.measure(),
            value: result.s_value,
        }],
        hole: init.clone(),
        result,
        converged: false,
    };
    shape_gradient_from(mesh, cfg, target, &mut st, opts)?;
    let v = st.result.s_value;
    Ok(finish(mesh, alpha, Strategy::ShapeGradient, st, vec![v]))
}

/// Try every single arc of whole facets whose measure is within one facet of
/// the target; keep the best if it improves on the current hole.
fn arc_position_scan(mesh: &Mesh, cfg: &ProblemConfig, target: f64, st: &mut RunState) -> Result<()> {
    let nf = mesh.n_facets();
    let mut candidates = Vec::new();
    for first in 0..nf {
        let mut m = 0.0;
        for n in 1..nf {
            m += mesh.boundary_facets[(first + n - 1) % nf].length;
            if m > target + mesh.max_facet_length() * (1.0 + 1e-12) {
                break;
            }
            if (m - target).abs() <= mesh.max_facet_length() * (1.0 + 1e-12) {
                candidates.push((first, n));
            }
        }
    }
    let warm = st.result.extremal.clone();
    let results: Vec<Option<(BoundaryHole, TraceResult)>> = candidates
        .into_par_iter()
        .map(|(first, n)| {
            let hole = BoundaryHole::from_facets(mesh, (0..n).map(|k| (first + k) % nf))?;
            Ok(solve_checked(mesh, cfg, &hole, Some(&warm))?.map(|r| (hole, r)))
        })
        .collect::<Result<_>>()?;
    let iteration = st.history.last().map_or(0, |h| h.iteration) + 1;
    if let Some((hole, r)) = results
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.1.s_value < a.1.s_value { b } else { a })
    {
        if improves(r.s_value, st.result.s_value) {
            st.history.push(HistoryEntry {
                iteration,
                measure: hole.measure(),
                value: r.s_value,
            });
            st.hole = hole;
            st.result = r;
        }
    }
    Ok(())
}

/// Alternating multi-start, a scan over single-arc positions, then
/// shape-gradient refinement of the best hole.
pub fn optimize_hole_combined(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    alpha: f64,
    init: Option<&BoundaryHole>,
    opts: &OptimizerOptions,
) -> Result<OptimizationRun> {
    let (mut best, start_values) = multi_start(mesh, cfg, alpha, init, opts)?;
    if mesh.boundary_is_loop() {
        let target = alpha * mesh.boundary_length();
        arc_position_scan(mesh, cfg, target, &mut best)?;
        shape_gradient_from(mesh, cfg, target, &mut best, opts)?;
    }
    Ok(finish(mesh, alpha, Strategy::Combined, best, start_values))
}

pub fn optimize_hole(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    alpha: f64,
    strategy: Strategy,
    init: Option<&BoundaryHole>,
    opts: &OptimizerOptions,
) -> Result<OptimizationRun> {
    match strategy {
        Strategy::Alternating => optimize_hole_alternating(mesh, cfg, alpha, init, opts),
        Strategy::Combined => optimize_hole_combined(mesh, cfg, alpha, init, opts),
        Strategy::ShapeGradient => {
            let target = alpha * mesh.boundary_length();
            let start = match init {
                Some(h) => h.clone(),
                None => crate::geometry::make_hole_from_arc(mesh, 0.0, target)?,
            };
            optimize_hole_shape_gradient(mesh, cfg, alpha, &start, opts)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub alpha_effective: f64,
    pub value: f64,
    pub converged: bool,
    pub n_arcs: usize,
}

/// Optimal values over a grid of measure fractions.
pub fn sweep_alpha(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    alphas: &[f64],
    strategy: Strategy,
    opts: &OptimizerOptions,
) -> Result<Vec<AlphaPoint>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let run = optimize_hole(mesh, cfg, alpha, strategy, None, opts)?;
            Ok(AlphaPoint {
                alpha,
                alpha_effective: run.alpha_effective,
                value: run.best_value,
                converged: run.converged,
                n_arcs: run.best_hole.arcs(mesh).len(),
            })
        })
        .collect()
}
