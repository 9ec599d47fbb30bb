use tracehole::geometry::{Extension, TangentialField};
use tracehole::shape_derivative::{evaluate_shape_derivative, fd_check, FdTransport};
use tracehole::{generate_mesh, make_hole_from_arc, solve_trace_constant, Domain, Mesh, ProblemConfig};

fn bump(mesh: &Mesh, center: f64, half_width: f64) -> TangentialField {
    let per = mesh.boundary_length();
    TangentialField::from_speed_fn(
        mesh,
        move |s| {
            let d = (s - center).rem_euclid(per);
            let d = d.min(per - d);
            if d < half_width {
                (std::f64::consts::FRAC_PI_2 * d / half_width).cos().powi(2)
            } else {
                0.0
            }
        },
        Extension::default_for(mesh),
    )
    .unwrap()
}

#[test]
fn derivative_is_linear_in_the_field() {
    let mesh = generate_mesh(Domain::Disk { radius: 1.0 }, 0.15).unwrap();
    let cfg = ProblemConfig::new(2.0, 2.0);
    let hole = make_hole_from_arc(&mesh, 0.0, 1.5).unwrap();
    let r = solve_trace_constant(&mesh, &cfg, &hole, None).unwrap();
    let v1 = bump(&mesh, 0.0, 0.4);
    let v2 = bump(&mesh, 1.5, 0.3);
    let d = |f: &TangentialField| evaluate_shape_derivative(&mesh, &cfg, &hole, f, &r).unwrap().ds_dt;
    let combo = v1.combine(2.0, &v2, -0.5).unwrap();
    let expected = 2.0 * d(&v1) - 0.5 * d(&v2);
    assert!((d(&combo) - expected).abs() <= 1e-10 * expected.abs().max(1.0));
    assert_eq!(d(&TangentialField::zero(&mesh)), 0.0);
}

#[test]
fn rotation_leaves_the_disk_value_fixed() {
    let mesh = generate_mesh(Domain::Disk { radius: 1.0 }, 0.1).unwrap();
    for (p, q) in [(2.0, 2.0), (1.5, 2.0), (3.0, 2.5)] {
        let cfg = ProblemConfig::new(p, q);
        let hole = make_hole_from_arc(&mesh, 0.7, 1.2).unwrap();
        let r = solve_trace_constant(&mesh, &cfg, &hole, None).unwrap();
        let rot = TangentialField::rotation(&mesh, 1.0).unwrap();
        let d = evaluate_shape_derivative(&mesh, &cfg, &hole, &rot, &r).unwrap();
        assert!(d.ds_dt.abs() <= 1e-12, "p {p}: {}", d.ds_dt);
    }
}

#[test]
fn endpoint_stretch_matches_mesh_motion_differences() {
    let mesh = generate_mesh(
        Domain::Rectangle {
            width: 2.0,
            height: 1.0,
        },
        0.1,
    )
    .unwrap();
    let per = mesh.boundary_length();
    for p in [2.0, 3.0] {
        let cfg = ProblemConfig::new(p, 2.0);
        let hole = make_hole_from_arc(&mesh, 0.5, 0.2 * per).unwrap();
        let end = hole.intervals(&mesh)[0].1;
        let field = bump(&mesh, end, 0.3);
        let steps = [1e-3 * per, 1e-4 * per];
        let (analytic, records) = fd_check(&mesh, &cfg, &hole, &field, &steps, FdTransport::MeshMotion).unwrap();
        assert!(
            analytic.ds_dt > 0.0,
            "pushing the end outward enlarges the hole, got {}",
            analytic.ds_dt
        );
        let best = records.iter().map(|r| r.relative_error).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-3, "p {p}: {records:?}");
    }
}
