//! `tracehole`: batch front end for trace-constant, hole-optimization,
//! shape-derivative and thin-domain experiments.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Serialize};
use serde_json::json;

use tracehole::geometry::{Extension, TangentialField};
use tracehole::hole_optimizer::{optimize_hole, sweep_alpha, zero_set_measure, OptimizerOptions, Strategy};
use tracehole::one_dim::{optimize_limit_hole, verify_1d, OneDimProblem};
use tracehole::shape_derivative::{fd_check, FdTransport};
use tracehole::thin_domain::{run_mu_sweep, MuSweepOptions};
use tracehole::trace_solver::{positivity_check, solve_with_restarts};
use tracehole::{generate_mesh, make_hole_from_arc, solve_trace_constant, BoundaryHole, Error, Mesh};

use config::{parse_arc, parse_domain, parse_list, FieldBlock, HoleBlock, RunSpec};
use output::{run_id, RunDir};

#[derive(Parser)]
#[command(
    version,
    about = "Best Sobolev trace constants for functions vanishing on a boundary hole"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON run configuration; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output root; results go to <out>/<run-id>/.
    #[arg(long, global = true, env = "TRACEHOLE_RESULTS", default_value = "results")]
    out: PathBuf,
    /// Run directory name (default: derived from the command and configuration).
    #[arg(long, global = true)]
    run_id: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps and multi-starts.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Domain as kind:params, e.g. disk:1, rectangle:2,1, interval:0,1, thin:0,1,0.0625.
    #[arg(long, global = true)]
    domain: Option<String>,
    #[arg(long, global = true)]
    resolution: Option<f64>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    dof_tolerance: Option<f64>,
    #[arg(long, global = true)]
    rel_tolerance: Option<f64>,
    #[arg(long, global = true)]
    max_inner_iterations: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve S for a fixed hole.
    Solve {
        /// Hole arc START:LENGTH in arclength (repeatable).
        #[arg(long = "hole-arc")]
        hole_arc: Vec<String>,
        /// Extra random restarts for a multi-start report.
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Optimal hole of measure alpha times the boundary length.
    Optimize {
        /// alternating, shape-gradient or combined.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        n_starts: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        stationarity_tolerance: Option<f64>,
        /// Initial hole arc START:LENGTH (repeatable).
        #[arg(long = "hole-arc")]
        hole_arc: Vec<String>,
    },
    /// Analytic shape derivative against central finite differences.
    ShapeGradCheck {
        #[arg(long = "hole-arc")]
        hole_arc: Vec<String>,
        /// bump or rotation.
        #[arg(long)]
        field: Option<String>,
        /// Steps as fractions of the boundary length, comma separated.
        #[arg(long)]
        steps: Option<String>,
        /// mesh-motion or snap.
        #[arg(long)]
        transport: Option<String>,
    },
    /// Optimal value over a grid of alphas.
    SweepAlpha {
        /// Comma-separated alphas (default 0.1,...,0.9).
        #[arg(long)]
        alphas: Option<String>,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        n_starts: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Thin rectangles (a,b) x (0,mu) for decreasing mu.
    SweepMu {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Comma-separated decreasing mu values.
        #[arg(long)]
        mu: Option<String>,
        #[arg(long)]
        resolution_fraction: Option<f64>,
        #[arg(long)]
        max_vertices: Option<usize>,
        #[arg(long)]
        n_starts: Option<usize>,
    },
    /// Interval limit problem against the closed-form constant.
    #[command(name = "verify-1d")]
    Verify1d {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        n_cells: Option<usize>,
        /// Cells for the exhaustive hole sweep (default: n-cells).
        #[arg(long)]
        sweep_cells: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Optimize { .. } => "optimize",
            Command::ShapeGradCheck { .. } => "shape-grad-check",
            Command::SweepAlpha { .. } => "sweep-alpha",
            Command::SweepMu { .. } => "sweep-mu",
            Command::Verify1d { .. } => "verify-1d",
        }
    }
}

/// Parse a snake_case serde enum from a flag value (dashes allowed).
fn parse_enum<T: DeserializeOwned>(s: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .with_context(|| format!("unknown {what} `{s}`"))
}

fn merged_spec(common: &Common, command: &Command) -> Result<RunSpec> {
    let mut spec = match &common.config {
        Some(path) => RunSpec::load(path)?,
        None => RunSpec::default(),
    };
    if let Some(d) = &common.domain {
        spec.domain = Some(parse_domain(d)?);
    }
    macro_rules! set {
        ($($dst:expr => $src:expr),* $(,)?) => { $( if let Some(v) = $src.clone() { $dst = Some(v); } )* };
    }
    set!(
        spec.resolution => common.resolution,
        spec.seed => common.seed,
        spec.alpha => common.alpha,
        spec.cfg.p => common.p,
        spec.cfg.q => common.q,
        spec.cfg.epsilon => common.epsilon,
        spec.cfg.dof_tolerance => common.dof_tolerance,
        spec.cfg.rel_tolerance => common.rel_tolerance,
        spec.cfg.max_inner_iterations => common.max_inner_iterations,
    );
    let arcs_override = |spec: &mut RunSpec, arcs: &[String]| -> Result<()> {
        if !arcs.is_empty() {
            let arcs = arcs.iter().map(|a| parse_arc(a)).collect::<Result<_>>()?;
            spec.hole = Some(HoleBlock {
                arcs,
                facets: Vec::new(),
            });
        }
        Ok(())
    };
    match command {
        Command::Solve { hole_arc, restarts } => {
            arcs_override(&mut spec, hole_arc)?;
            set!(spec.restarts => restarts);
        }
        Command::Optimize {
            strategy,
            n_starts,
            max_iterations,
            stationarity_tolerance,
            hole_arc,
        } => {
            arcs_override(&mut spec, hole_arc)?;
            if let Some(s) = strategy {
                spec.optimizer.strategy = Some(parse_enum(s, "strategy")?);
            }
            set!(
                spec.optimizer.n_starts => n_starts,
                spec.optimizer.max_iterations => max_iterations,
                spec.optimizer.stationarity_tolerance => stationarity_tolerance,
            );
        }
        Command::ShapeGradCheck {
            hole_arc,
            field,
            steps,
            transport,
        } => {
            arcs_override(&mut spec, hole_arc)?;
            match field.as_deref() {
                None => {}
                Some("bump") => {
                    spec.field = Some(FieldBlock::Bump {
                        center: None,
                        half_width: None,
                        amplitude: 1.0,
                    })
                }
                Some("rotation") => spec.field = Some(FieldBlock::Rotation { speed: 1.0 }),
                Some(other) => bail!("unknown field `{other}`; expected bump or rotation"),
            }
            if let Some(s) = steps {
                spec.steps = Some(parse_list(s)?);
            }
            if let Some(t) = transport {
                spec.transport = Some(parse_enum(t, "transport")?);
            }
        }
        Command::SweepAlpha {
            alphas,
            strategy,
            n_starts,
            max_iterations,
        } => {
            if let Some(a) = alphas {
                spec.alphas = Some(parse_list(a)?);
            }
            if let Some(s) = strategy {
                spec.optimizer.strategy = Some(parse_enum(s, "strategy")?);
            }
            set!(spec.optimizer.n_starts => n_starts, spec.optimizer.max_iterations => max_iterations);
        }
        Command::SweepMu {
            a,
            b,
            mu,
            resolution_fraction,
            max_vertices,
            n_starts,
        } => {
            set!(
                spec.thin.a => a,
                spec.thin.b => b,
                spec.thin.resolution_fraction => resolution_fraction,
                spec.thin.max_vertices => max_vertices,
                spec.optimizer.n_starts => n_starts,
            );
            if let Some(m) = mu {
                spec.thin.mu_values = Some(parse_list(m)?);
            }
        }
        Command::Verify1d {
            a,
            b,
            n_cells,
            sweep_cells,
        } => {
            set!(
                spec.one_dim.a => a,
                spec.one_dim.b => b,
                spec.one_dim.n_cells => n_cells,
                spec.one_dim.sweep_cells => sweep_cells,
            );
        }
    }
    Ok(spec)
}

fn optimizer_options(spec: &RunSpec) -> OptimizerOptions {
    let d = OptimizerOptions::default();
    OptimizerOptions {
        n_starts: spec.optimizer.n_starts.unwrap_or(d.n_starts),
        seed: spec.seed(),
        max_iterations: spec.optimizer.max_iterations.unwrap_or(d.max_iterations),
        initial_holes: Vec::new(),
        stationarity_tolerance: spec
            .optimizer
            .stationarity_tolerance
            .unwrap_or(d.stationarity_tolerance),
        saddle_tolerance: spec.optimizer.saddle_tolerance.unwrap_or(d.saddle_tolerance),
    }
}

fn build_hole(mesh: &Mesh, block: Option<&HoleBlock>) -> Result<BoundaryHole> {
    let Some(block) = block else {
        return Ok(BoundaryHole::empty());
    };
    let mut hole = BoundaryHole::from_facets(mesh, block.facets.iter().copied())?;
    for &(start, length) in &block.arcs {
        hole = hole.union(mesh, &make_hole_from_arc(mesh, start, length)?);
    }
    Ok(hole)
}

/// Boundary trace rows for plotting.
#[derive(Serialize)]
struct BoundaryRow {
    arc_start: f64,
    x: f64,
    y: f64,
    u: f64,
    in_hole: bool,
}

fn boundary_rows(mesh: &Mesh, hole: &BoundaryHole, u: &[f64]) -> Vec<BoundaryRow> {
    mesh.boundary_facets
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let v = f.vertices[0];
            BoundaryRow {
                arc_start: f.arc_start,
                x: mesh.vertices[v][0],
                y: mesh.vertices[v][1],
                u: u[v],
                in_hole: hole.contains(k),
            }
        })
        .collect()
}

struct Outcome {
    converged: bool,
}

fn cmd_solve(spec: &RunSpec, dir: &RunDir) -> Result<Outcome> {
    let mesh = generate_mesh(spec.domain()?, spec.resolution()?)?;
    let cfg = spec.cfg.resolve();
    let hole = build_hole(&mesh, spec.hole.as_ref())?;
    let restarts = spec.restarts.unwrap_or(0);
    let (result, spread) = if restarts > 0 {
        let r = solve_with_restarts(&mesh, &cfg, &hole, restarts, spec.seed())?;
        (r.best, Some((r.values, r.relative_spread)))
    } else {
        (solve_trace_constant(&mesh, &cfg, &hole, None)?, None)
    };
    let positivity = positivity_check(&mesh, &result, &hole);
    dir.summary(&json!({
        "command": "solve",
        "spec": spec,
        "n_vertices": mesh.n_vertices(),
        "n_facets": mesh.n_facets(),
        "boundary_length": mesh.boundary_length(),
        "hole_intervals": hole.intervals(&mesh),
        "hole_measure": hole.measure(),
        "s_value": result.s_value,
        "lambda": result.lambda,
        "el_residual": result.el_residual,
        "iterations": result.iterations,
        "converged": result.converged,
        "zero_set_measure": zero_set_measure(&mesh, &result, None),
        "positivity": positivity,
        "restart_values": spread.as_ref().map(|s| &s.0),
        "restart_relative_spread": spread.as_ref().map(|s| s.1),
    }))?;
    dir.data(boundary_rows(&mesh, &hole, &result.extremal.0))?;
    dir.mesh(&mesh)?;
    dir.extremal(&mesh.vertices, &result.extremal.0)?;
    println!("S = {:.12} (converged: {})", result.s_value, result.converged);
    Ok(Outcome {
        converged: result.converged,
    })
}

fn cmd_optimize(spec: &RunSpec, dir: &RunDir) -> Result<Outcome> {
    let mesh = generate_mesh(spec.domain()?, spec.resolution()?)?;
    let cfg = spec.cfg.resolve();
    let alpha = spec.alpha()?;
    let strategy = spec.optimizer.strategy.unwrap_or(Strategy::Alternating);
    let init = spec.hole.as_ref().map(|h| build_hole(&mesh, Some(h))).transpose()?;
    let opts = optimizer_options(spec);
    let run = optimize_hole(&mesh, &cfg, alpha, strategy, init.as_ref(), &opts)?;
    let trace = solve_trace_constant(&mesh, &cfg, &run.best_hole, Some(&run.extremal))?;
    dir.summary(&json!({
        "command": "optimize",
        "spec": spec,
        "alpha": run.alpha,
        "alpha_effective": run.alpha_effective,
        "target_measure": alpha * mesh.boundary_length(),
        "best_value": run.best_value,
        "hole_intervals": run.best_hole.intervals(&mesh),
        "hole_facets": run.best_hole.facets(),
        "n_arcs": run.best_hole.arcs(&mesh).len(),
        "zero_set_measure": zero_set_measure(&mesh, &trace, None),
        "strategy": run.strategy,
        "converged": run.converged,
        "start_values": run.start_values,
        "history": run.history,
    }))?;
    dir.data(&run.history)?;
    dir.mesh(&mesh)?;
    dir.extremal(&mesh.vertices, &run.extremal.0)?;
    println!(
        "S(alpha = {alpha}) = {:.12} with {} arc(s), alpha_effective = {:.6} (converged: {})",
        run.best_value,
        run.best_hole.arcs(&mesh).len(),
        run.alpha_effective,
        run.converged
    );
    Ok(Outcome {
        converged: run.converged,
    })
}

fn bump_field(
    mesh: &Mesh,
    hole: &BoundaryHole,
    center: Option<f64>,
    half_width: Option<f64>,
    amplitude: f64,
) -> Result<TangentialField> {
    let per = mesh.boundary_length();
    let first = hole.arcs(mesh).into_iter().next();
    let center = center.or(first.map(|a| a.start + 0.5 * a.length)).unwrap_or(0.0);
    let w = half_width.or(first.map(|a| a.length)).unwrap_or(0.25 * per);
    let speed = move |s: f64| {
        let mut d = (s - center).rem_euclid(per);
        if d > 0.5 * per {
            d -= per;
        }
        let x = d / w;
        if x.abs() < 1.0 {
            amplitude * (0.5 * std::f64::consts::PI * x).cos().powi(2)
        } else {
            0.0
        }
    };
    Ok(TangentialField::from_speed_fn(
        mesh,
        speed,
        Extension::default_for(mesh),
    )?)
}

#[derive(Serialize)]
struct FdRow {
    h: f64,
    h_fraction: f64,
    fd_value: f64,
    analytic: f64,
    relative_error: f64,
    s_plus: f64,
    s_minus: f64,
}

fn cmd_shape_grad_check(spec: &RunSpec, dir: &RunDir) -> Result<Outcome> {
    let mesh = generate_mesh(spec.domain()?, spec.resolution()?)?;
    let cfg = spec.cfg.resolve();
    let hole = build_hole(&mesh, spec.hole.as_ref())?;
    if hole.is_empty() {
        bail!("shape-grad-check needs a hole (config [hole] or --hole-arc)");
    }
    let field_spec = spec.field.clone().unwrap_or(FieldBlock::Bump {
        center: None,
        half_width: None,
        amplitude: 1.0,
    });
    let field = match &field_spec {
        FieldBlock::Bump {
            center,
            half_width,
            amplitude,
        } => bump_field(&mesh, &hole, *center, *half_width, *amplitude)?,
        FieldBlock::Rotation { speed } => TangentialField::rotation(&mesh, *speed)?,
    };
    let per = mesh.boundary_length();
    let fractions = spec.steps.clone().unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]);
    let steps: Vec<f64> = fractions.iter().map(|f| f * per).collect();
    let transport = spec.transport.unwrap_or(FdTransport::MeshMotion);
    let (analytic, records) = fd_check(&mesh, &cfg, &hole, &field, &steps, transport)?;
    let best = records.iter().map(|r| r.relative_error).fold(f64::INFINITY, f64::min);
    dir.summary(&json!({
        "command": "shape-grad-check",
        "spec": spec,
        "field": field_spec,
        "transport": transport,
        "ds_dt": analytic.ds_dt,
        "boundary_term": analytic.boundary_term,
        "volume_term": analytic.volume_term,
        "best_relative_error": best,
        "records": records,
    }))?;
    dir.data(records.iter().zip(&fractions).map(|(r, f)| FdRow {
        h: r.h,
        h_fraction: *f,
        fd_value: r.fd_value,
        analytic: r.analytic,
        relative_error: r.relative_error,
        s_plus: r.s_plus,
        s_minus: r.s_minus,
    }))?;
    dir.mesh(&mesh)?;
    let base = solve_trace_constant(&mesh, &cfg, &hole, None)?;
    dir.extremal(&mesh.vertices, &base.extremal.0)?;
    println!("ds/dt = {:.6e}, best relative FD error = {:.3e}", analytic.ds_dt, best);
    Ok(Outcome { converged: true })
}

fn cmd_sweep_alpha(spec: &RunSpec, dir: &RunDir) -> Result<Outcome> {
    let mesh = generate_mesh(spec.domain()?, spec.resolution()?)?;
    let cfg = spec.cfg.resolve();
    let alphas = spec
        .alphas
        .clone()
        .unwrap_or_else(|| (1..=9).map(|k| k as f64 / 10.0).collect());
    let strategy = spec.optimizer.strategy.unwrap_or(Strategy::Alternating);
    let points = sweep_alpha(&mesh, &cfg, &alphas, strategy, &optimizer_options(spec))?;
    let increasing = points.windows(2).all(|w| w[1].value > w[0].value);
    let converged = points.iter().all(|p| p.converged);
    dir.summary(&json!({
        "command": "sweep-alpha",
        "spec": spec,
        "strategy": strategy,
        "points": points,
        "strictly_increasing": increasing,
        "converged": converged,
    }))?;
    dir.data(&points)?;
    dir.mesh(&mesh)?;
    for p in &points {
        println!("alpha {:.4}  S {:.10}  arcs {}", p.alpha, p.value, p.n_arcs);
    }
    Ok(Outcome { converged })
}

#[derive(Serialize)]
struct MuRow {
    mu: f64,
    s_mu: f64,
    rescaled: f64,
    slope_estimate: Option<f64>,
}

fn cmd_sweep_mu(spec: &RunSpec, dir: &RunDir) -> Result<Outcome> {
    let cfg = spec.cfg.resolve();
    let (a, b) = (spec.thin.a.unwrap_or(0.0), spec.thin.b.unwrap_or(1.0));
    let alpha = spec.alpha.unwrap_or(0.5);
    let mus = spec
        .thin
        .mu_values
        .clone()
        .unwrap_or_else(|| vec![0.5, 0.25, 0.125, 0.0625]);
    let d = MuSweepOptions::default();
    let opts = MuSweepOptions {
        resolution_fraction: spec.thin.resolution_fraction.unwrap_or(d.resolution_fraction),
        max_vertices: spec.thin.max_vertices.unwrap_or(d.max_vertices),
        optimizer: optimizer_options(spec),
        limit_cells: d.limit_cells,
    };
    let sweep = run_mu_sweep(a, b, alpha, &cfg, &mus, &opts)?;
    for w in &sweep.warnings {
        eprintln!("warning: {w}");
    }
    let converged = sweep.records.iter().all(|r| r.converged);
    dir.summary(&json!({
        "command": "sweep-mu",
        "spec": spec,
        "sweep": sweep,
        "converged": converged,
    }))?;
    let rows: Vec<MuRow> = sweep
        .records
        .iter()
        .enumerate()
        .map(|(k, r)| MuRow {
            mu: r.mu,
            s_mu: r.s_mu,
            rescaled: r.rescaled,
            slope_estimate: (k > 0).then(|| {
                let prev = &sweep.records[k - 1];
                (r.s_mu.ln() - prev.s_mu.ln()) / (r.mu.ln() - prev.mu.ln())
            }),
        })
        .collect();
    dir.data(rows)?;
    let last = sweep.records.last().unwrap();
    let mesh = generate_mesh(tracehole::Domain::ThinRectangle { a, b, mu: last.mu }, last.resolution)?;
    dir.mesh(&mesh)?;
    let target = sweep.target_closed_form.unwrap_or(sweep.target_fem);
    println!(
        "rescaled S/mu at mu = {}: {:.6} (target {:.6}, gap {:.2}%), slope {:.4}, extrapolated {:?}",
        last.mu,
        last.rescaled,
        target,
        100.0 * sweep.relative_gap,
        sweep.slope,
        sweep.richardson_limit
    );
    Ok(Outcome { converged })
}

#[derive(Serialize)]
struct SweepRow {
    hole_start: f64,
    value: f64,
}

fn cmd_verify_1d(spec: &RunSpec, dir: &RunDir) -> Result<Outcome> {
    let cfg = spec.cfg.resolve();
    let (a, b) = (spec.one_dim.a.unwrap_or(0.0), spec.one_dim.b.unwrap_or(1.0));
    let alpha = spec.alpha()?;
    let n_cells = spec.one_dim.n_cells.unwrap_or(1000);
    let sweep_cells = spec.one_dim.sweep_cells.unwrap_or(n_cells);
    let v = verify_1d(a, b, cfg.p, alpha, n_cells, &cfg)?;
    let problem = OneDimProblem::new(a, b, alpha, tracehole::ProblemConfig { q: cfg.p, ..cfg });
    let sweep = optimize_limit_hole(&problem, sweep_cells)?;
    let h = (b - a) / sweep_cells as f64;
    let abuts = sweep.best.hole.0 <= a + 0.5 * h || sweep.best.hole.1 >= b - 0.5 * h;
    let converged = v.converged && sweep.best.converged;
    dir.summary(&json!({
        "command": "verify-1d",
        "spec": spec,
        "p": v.p,
        "alpha": v.alpha,
        "n_cells": v.n_cells,
        "closed_form": v.closed_form,
        "fem_value": v.fem_value,
        "relative_error": v.relative_error,
        "centered_value": v.centered_value,
        "complementary_value": v.complementary_value,
        "complementary_error": v.complementary_error,
        "sweep_cells": sweep_cells,
        "sweep_best_hole": sweep.best.hole,
        "sweep_best_value": sweep.best.value,
        "sweep_argmin_abuts_endpoint": abuts,
        "converged": converged,
    }))?;
    dir.data(
        sweep
            .candidates
            .iter()
            .map(|&(hole_start, value)| SweepRow { hole_start, value }),
    )?;
    let pts: Vec<[f64; 2]> = sweep.best.nodes.iter().map(|&x| [x, 0.0]).collect();
    dir.extremal(&pts, &sweep.best.extremal)?;
    println!(
        "closed form {:.6}, FEM {:.6} (relative error {:.2e}); sweep argmin {:?}",
        v.closed_form, v.fem_value, v.relative_error, sweep.best.hole
    );
    Ok(Outcome { converged })
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let spec = merged_spec(&cli.common, &cli.command)?;
    if let Some(domain) = &spec.domain {
        domain.validate()?;
        spec.cfg.resolve().validate(domain.dim())?;
    }
    let name = cli.command.name();
    let id = cli
        .common
        .run_id
        .clone()
        .unwrap_or_else(|| run_id(name, &serde_json::to_string(&spec).unwrap()));
    let dir = RunDir::create(&cli.common.out, &id)?;
    let outcome = match cli.command {
        Command::Solve { .. } => cmd_solve(&spec, &dir),
        Command::Optimize { .. } => cmd_optimize(&spec, &dir),
        Command::ShapeGradCheck { .. } => cmd_shape_grad_check(&spec, &dir),
        Command::SweepAlpha { .. } => cmd_sweep_alpha(&spec, &dir),
        Command::SweepMu { .. } => cmd_sweep_mu(&spec, &dir),
        Command::Verify1d { .. } => cmd_verify_1d(&spec, &dir),
    }?;
    println!("results: {}", dir.path.display());
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Outcome { converged: true }) => ExitCode::SUCCESS,
        Ok(Outcome { converged: false }) => {
            eprintln!("warning: not all solves converged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::NotConverged { .. }) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
