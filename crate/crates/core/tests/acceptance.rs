//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured numbers; the binary exits non-zero if any criterion fails.
//!
//! Run alone with `cargo test -p tracehole --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{fd_gradient, is_single_cyclic_run, steklov_eigen_oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracehole::fem::{quotient_gradient, rayleigh_quotient};
use tracehole::geometry::{Extension, TangentialField};
use tracehole::hole_optimizer::{
    optimize_hole_alternating, random_hole, sweep_alpha, zero_set_measure, OptimizerOptions, Strategy,
};
use tracehole::one_dim::{optimize_limit_hole, solve_limit_problem, verify_1d, OneDimProblem};
use tracehole::shape_derivative::{evaluate_shape_derivative, fd_check, FdTransport};
use tracehole::thin_domain::{run_mu_sweep, MuSweepOptions};
use tracehole::trace_solver::positivity_check;
use tracehole::{generate_mesh, make_hole_from_arc, solve_trace_constant, BoundaryHole, Domain, Field, ProblemConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Closed-form 1D constant at 1000 cells, 0.5% relative.
fn closed_form_1d() -> Outcome {
    let cfg = ProblemConfig::new(2.0, 2.0);
    let mut pass = true;
    let mut lines = Vec::new();
    for p in [2.0, 3.0] {
        for alpha in [0.25, 0.5] {
            let v = verify_1d(0.0, 1.0, p, alpha, 1000, &cfg).unwrap();
            let ok = v.converged && v.relative_error <= 5e-3;
            pass &= ok;
            lines.push(format!(
                "    p={p} alpha={alpha}: closed form {:.6} fem {:.6} rel err {:.2e} [{}]; hole of measure 1-alpha gives {:.6} (rel err {:.2e})",
                v.closed_form,
                v.fem_value,
                v.relative_error,
                if ok { "ok" } else { "FAIL" },
                v.complementary_value,
                v.complementary_error
            ));
        }
    }
    outcome(pass, format!("tolerance 0.5% at 1000 cells\n{}", lines.join("\n")))
}

/// Exhaustive 1D sweep: endpoint argmin, centered hole worse by at least 1%.
fn endpoint_optimality_1d() -> Outcome {
    let n = 400;
    let mut pass = true;
    let mut lines = Vec::new();
    for p in [2.0, 3.0] {
        for alpha in [0.25, 0.5] {
            let problem = OneDimProblem::new(0.0, 1.0, alpha, ProblemConfig::new(p, p));
            let sweep = optimize_limit_hole(&problem, n).unwrap();
            let (lo, hi) = sweep.best.hole;
            let at_end = lo.abs() < 1e-12 || (hi - 1.0).abs() < 1e-12;
            let centered = solve_limit_problem(&problem, (0.5 - alpha / 2.0, 0.5 + alpha / 2.0), n).unwrap();
            let margin = centered.value / sweep.best.value - 1.0;
            let ok = at_end && margin >= 0.01;
            pass &= ok;
            lines.push(format!(
                "    p={p} alpha={alpha}: argmin ({lo:.4}, {hi:.4}) value {:.6}, centered {:.6} (+{:.1}%) [{}]",
                sweep.best.value,
                centered.value,
                100.0 * margin,
                if ok { "ok" } else { "FAIL" }
            ));
        }
    }
    outcome(pass, format!("{n} cells\n{}", lines.join("\n")))
}

/// Disk at resolution 0.05: alternating scheme from 5 random starts ends on one arc,
/// and one arc beats two antipodal half arcs.
fn disk_cap() -> Outcome {
    let mesh = generate_mesh(Domain::Disk { radius: 1.0 }, 0.05).unwrap();
    let cfg = ProblemConfig::new(2.0, 2.0);
    let alpha = 0.25;
    let per = mesh.boundary_length();
    let target = alpha * per;
    let opts = OptimizerOptions {
        n_starts: 0,
        ..OptimizerOptions::default()
    };
    let mut pass = true;
    let mut lines = Vec::new();
    for k in 0..5 {
        let start = random_hole(&mesh, target, k);
        let run = optimize_hole_alternating(&mesh, &cfg, alpha, Some(&start), &opts).unwrap();
        let facets: Vec<usize> = run.best_hole.facets().iter().copied().collect();
        let single = is_single_cyclic_run(&facets, mesh.n_facets());
        pass &= single && run.converged;
        lines.push(format!(
            "    start {k}: {} arcs -> {} arc(s), S {:.6}, {} steps, converged {}",
            start.arcs(&mesh).len(),
            run.best_hole.arcs(&mesh).len(),
            run.best_value,
            run.history.len() - 1,
            run.converged
        ));
    }
    let one = make_hole_from_arc(&mesh, 0.0, target).unwrap();
    let two = make_hole_from_arc(&mesh, 0.0, 0.5 * target)
        .unwrap()
        .union(&mesh, &make_hole_from_arc(&mesh, 0.5 * per, 0.5 * target).unwrap());
    let s1 = solve_trace_constant(&mesh, &cfg, &one, None).unwrap().s_value;
    let s2 = solve_trace_constant(&mesh, &cfg, &two, None).unwrap().s_value;
    pass &= s1 < s2;
    lines.push(format!(
        "    single arc {s1:.6} (measure {:.4}) vs two antipodal arcs {s2:.6} (measure {:.4}), margin {:.4}",
        one.measure(),
        two.measure(),
        s2 - s1
    ));
    outcome(
        pass,
        format!("{} boundary facets\n{}", mesh.n_facets(), lines.join("\n")),
    )
}

/// Shape derivative against mesh-motion central differences (2% at the best step);
/// rotation exactly stationary.
fn shape_derivative() -> Outcome {
    let mesh = generate_mesh(Domain::Disk { radius: 1.0 }, 0.05).unwrap();
    let cfg = ProblemConfig::new(2.0, 2.0);
    let per = mesh.boundary_length();
    let hole = make_hole_from_arc(&mesh, 0.0, 0.25 * per).unwrap();
    let (_, end) = hole.intervals(&mesh)[0];
    let half_width = 0.4;
    let field = TangentialField::from_speed_fn(
        &mesh,
        |s| {
            let d = (s - end).rem_euclid(per);
            let d = d.min(per - d);
            if d < half_width {
                (std::f64::consts::FRAC_PI_2 * d / half_width).cos().powi(2)
            } else {
                0.0
            }
        },
        Extension::default_for(&mesh),
    )
    .unwrap();
    let steps = [1e-2 * per, 1e-3 * per, 1e-4 * per];
    let (analytic, records) = fd_check(&mesh, &cfg, &hole, &field, &steps, FdTransport::MeshMotion).unwrap();
    let best = records.iter().map(|r| r.relative_error).fold(f64::INFINITY, f64::min);
    let base = solve_trace_constant(&mesh, &cfg, &hole, None).unwrap();
    let rot = TangentialField::rotation(&mesh, 1.0).unwrap();
    let d_rot = evaluate_shape_derivative(&mesh, &cfg, &hole, &rot, &base)
        .unwrap()
        .ds_dt;
    let pass = best <= 0.02 && d_rot.abs() <= 1e-12;
    let mut lines: Vec<String> = records
        .iter()
        .map(|r| {
            format!(
                "    h {:.3e}: fd {:.9} rel err {:.2e}",
                r.h, r.fd_value, r.relative_error
            )
        })
        .collect();
    lines.push(format!("    rotation: ds/dt = {d_rot:.3e}"));
    outcome(
        pass,
        format!(
            "bump at the arc end, analytic {:.9}, best rel err {best:.2e} (tol 2e-2)\n{}",
            analytic.ds_dt,
            lines.join("\n")
        ),
    )
}

/// Thin rectangles: S_mu / mu within 5% of half the interval constant at mu = 1/16,
/// log-log slope 1 +- 0.05.
fn thin_domain() -> Outcome {
    let cfg = ProblemConfig::new(2.0, 2.0);
    let mus = [0.5, 0.25, 0.125, 0.0625];
    let sweep = run_mu_sweep(0.0, 1.0, 0.5, &cfg, &mus, &MuSweepOptions::default()).unwrap();
    let target = sweep.target_closed_form.unwrap();
    let last = sweep.records.last().unwrap();
    let gap = (last.rescaled - target).abs() / target;
    let slope_ok = (sweep.slope - 1.0).abs() <= 0.05;
    let pass = sweep.records.len() == mus.len() && gap <= 0.05 && slope_ok;
    let mut lines: Vec<String> = sweep
        .records
        .iter()
        .map(|r| {
            format!(
                "    mu {:.4}: S {:.6} S/mu {:.6} hole at {:?} end (predicted {}) vertices {}",
                r.mu, r.s_mu, r.rescaled, r.hole_side, r.hole_matches_prediction, r.n_vertices
            )
        })
        .collect();
    if let (Some(lim), Some(g)) = (sweep.richardson_limit, sweep.richardson_gap) {
        lines.push(format!("    extrapolated to mu = 0: {lim:.6} (gap {:.2}%)", 100.0 * g));
    }
    outcome(
        pass,
        format!(
            "target {target:.6}, S/mu at mu=1/16 gap {:.2}% (tol 5%), slope {:.4} (tol 1 +- 0.05)\n{}",
            100.0 * gap,
            sweep.slope,
            lines.join("\n")
        ),
    )
}

/// Property suites.
fn properties() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        pass &= ok;
        lines.push(format!("    {name}: {detail} [{}]", if ok { "ok" } else { "FAIL" }));
    };
    let disk = generate_mesh(Domain::Disk { radius: 1.0 }, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let positive = |rng: &mut ChaCha8Rng| Field((0..disk.n_vertices()).map(|_| rng.gen_range(0.5..1.5)).collect());

    let mut worst = 0.0f64;
    for p in [1.5, 2.0, 3.0] {
        let cfg = ProblemConfig::new(p, 2.0);
        for c in [1e-3, 0.37, 250.0] {
            let u = positive(&mut rng);
            let a = rayleigh_quotient(&disk, &cfg, &u).unwrap();
            let b = rayleigh_quotient(&disk, &cfg, &u.scaled(c)).unwrap();
            worst = worst.max((a - b).abs() / a);
        }
    }
    check(
        "0-homogeneity",
        worst <= 1e-12,
        format!("max rel {worst:.1e} (tol 1e-12)"),
    );

    let coarse = generate_mesh(Domain::Disk { radius: 1.0 }, 0.35).unwrap();
    let mut worst = 0.0f64;
    for p in [1.5, 2.0, 3.0] {
        for q in [1.0, 2.0, 2.5] {
            let cfg = ProblemConfig::new(p, q);
            let u = Field((0..coarse.n_vertices()).map(|_| rng.gen_range(0.5..1.5)).collect());
            let g = quotient_gradient(&coarse, &cfg, &u).unwrap();
            let fd = fd_gradient(
                |x| rayleigh_quotient(&coarse, &cfg, &Field(x.to_vec())).unwrap(),
                &u.0,
                1e-6,
            );
            let scale = g.0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let err = g.0.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(err / scale);
        }
    }
    check(
        "gradient vs FD",
        worst <= 1e-5,
        format!("max rel {worst:.1e} (tol 1e-5)"),
    );

    let mut worst = 0.0f64;
    let mut positivity_ok = true;
    let mut zero_set_ok = true;
    let mut min_off = f64::INFINITY;
    let mut zero_gap = 0.0f64;
    let mesh = generate_mesh(Domain::Disk { radius: 1.0 }, 0.1).unwrap();
    for (p, q) in [(2.0, 2.0), (1.5, 2.0), (3.0, 2.5), (2.0, 1.5)] {
        let cfg = ProblemConfig::new(p, q);
        let hole = make_hole_from_arc(&mesh, 0.4, 0.3 * mesh.boundary_length()).unwrap();
        let r = solve_trace_constant(&mesh, &cfg, &hole, None).unwrap();
        if r.converged {
            worst = worst.max((r.lambda - r.s_value).abs() / r.s_value);
        }
        let rep = positivity_check(&mesh, &r, &hole);
        positivity_ok &= !rep.violation && rep.max_on_hole == 0.0;
        min_off = min_off.min(rep.min_off_hole);
        let z = zero_set_measure(&mesh, &r, None);
        zero_gap = zero_gap.max((z - hole.measure()).abs());
        zero_set_ok &= (z - hole.measure()).abs() <= mesh.max_facet_length();
    }
    check("lambda = S", worst <= 1e-6, format!("max rel {worst:.1e} (tol 1e-6)"));
    check(
        "positivity off the hole",
        positivity_ok,
        format!("min off-hole value {min_off:.3e}"),
    );
    check(
        "zero set = hole",
        zero_set_ok,
        format!("max gap {zero_gap:.2e}, facet {:.3e}", mesh.max_facet_length()),
    );

    let cfg = ProblemConfig::new(2.0, 2.0);
    let n = disk.n_facets();
    let mut pairs = 0;
    let mut violations = 0;
    while pairs < 20 {
        let small = BoundaryHole::from_facets(&disk, (0..n).filter(|_| rng.gen_bool(0.2))).unwrap();
        let big = small.union(
            &disk,
            &BoundaryHole::from_facets(&disk, (0..n).filter(|_| rng.gen_bool(0.2))).unwrap(),
        );
        let (Ok(s), Ok(b)) = (
            solve_trace_constant(&disk, &cfg, &small, None),
            solve_trace_constant(&disk, &cfg, &big, None),
        ) else {
            continue;
        };
        pairs += 1;
        if s.s_value > b.s_value * (1.0 + 1e-9) {
            violations += 1;
        }
    }
    check(
        "inclusion monotonicity",
        violations == 0,
        format!("{violations} violations in {pairs} nested pairs"),
    );

    let alphas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let points = sweep_alpha(&mesh, &cfg, &alphas, Strategy::Combined, &OptimizerOptions::default()).unwrap();
    let strict = points.windows(2).all(|w| w[1].value > w[0].value);
    let values: Vec<String> = points.iter().map(|p| format!("{:.4}", p.value)).collect();
    check("strict alpha monotonicity", strict, format!("[{}]", values.join(", ")));

    outcome(pass, lines.join("\n"))
}

/// Dense generalized eigenproblem oracle on meshes with at most 30 vertices.
fn eigen_oracle() -> Outcome {
    let cfg = ProblemConfig::new(2.0, 2.0);
    let meshes = [
        generate_mesh(
            Domain::Rectangle {
                width: 2.0,
                height: 1.0,
            },
            0.5,
        )
        .unwrap(),
        generate_mesh(Domain::Disk { radius: 1.0 }, 0.6).unwrap(),
        generate_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 1.0 / 12.0).unwrap(),
    ];
    let mut worst = 0.0f64;
    let mut small = true;
    let mut lines = Vec::new();
    for mesh in &meshes {
        small &= mesh.n_vertices() <= 30;
        let per = mesh.boundary_length();
        for hole in [
            BoundaryHole::empty(),
            BoundaryHole::from_facets(mesh, [0]).unwrap(),
            make_hole_from_arc(mesh, 0.3 * per, 0.3 * per).unwrap(),
        ] {
            let oracle = steklov_eigen_oracle(mesh, &hole);
            let r = solve_trace_constant(mesh, &cfg, &hole, None).unwrap();
            let rel = (r.s_value - oracle).abs() / oracle;
            worst = worst.max(rel);
            lines.push(format!(
                "    {:?} ({} dofs, {} hole facets): {:.12} vs {:.12}",
                mesh.domain,
                mesh.n_vertices(),
                hole.len(),
                r.s_value,
                oracle
            ));
        }
    }
    outcome(
        small && worst <= 1e-8,
        format!("max rel {worst:.1e} (tol 1e-8)\n{}", lines.join("\n")),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 closed-form 1D constant", closed_form_1d),
        ("2 1D endpoint optimality", endpoint_optimality_1d),
        ("3 disk cap optimality", disk_cap),
        ("4 shape derivative", shape_derivative),
        ("5 thin-domain scaling", thin_domain),
        ("6 property suites", properties),
        ("7 eigen oracle", eigen_oracle),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(o) => {
                if !o.pass {
                    failed += 1;
                }
                println!(
                    "[{}] {name} ({secs:.1}s): {}",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.detail
                );
            }
            Err(_) => {
                failed += 1;
                println!("[FAIL] {name} ({secs:.1}s): panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
