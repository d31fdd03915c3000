use planar_flow::flow::{boundary_curve_at, BoundaryOptions};
use planar_flow::{
    boundary_curve, check_flow_property, closed_form_power_flow, flow_map, flow_point, integrate, Atom, Complex64,
    DriverPath, Error, HalfPlaneField, IntegratorOptions, Warning,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn opts() -> IntegratorOptions {
    IntegratorOptions::default()
}

fn test_grid() -> Vec<Complex64> {
    let mut zs: Vec<Complex64> = (0..21).map(|k| c(-1.0 + 0.1 * k as f64, 0.0)).collect();
    zs.push(c(0.0, 0.25));
    zs.push(c(0.0, 1.0));
    zs
}

fn max_rel_error(alpha: f64, n: usize) -> f64 {
    let f = HalfPlaneField::power(alpha).unwrap();
    let zero = DriverPath::zero(0.0, 1.0, n).unwrap();
    let zs = test_grid();
    let (vals, _) = flow_map(&f, &zero, 0.0, 1.0, &zs, &opts()).unwrap();
    zs.iter()
        .zip(vals)
        .map(|(&z, v)| {
            let exact = closed_form_power_flow(alpha, 0.0, 1.0, z).unwrap();
            (v.unwrap() - exact).norm() / exact.norm()
        })
        .fold(0.0, f64::max)
}

#[test]
fn constant_field_is_exact() {
    let path = DriverPath::sample_brownian(9, 0.0, 2.0, 2000, 1.0).unwrap();
    let f = HalfPlaneField::constant(c(0.0, 1.0)).unwrap();
    let z = c(0.3, 0.2);
    let traj = integrate(&f, &path, 0.5, 1.5, z).unwrap();
    assert_eq!(traj.states[0], z);
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let exact = z + c(0.0, t - 0.5) + (path.value_at(*t).unwrap() - path.value_at(0.5).unwrap());
        assert!((state - exact).norm() < 1e-12, "{t}: {state} vs {exact}");
    }
}

#[test]
fn power_from_the_origin() {
    let f = HalfPlaneField::power(0.5).unwrap();
    let zero = DriverPath::zero(0.0, 1.0, 1000).unwrap();
    let v = flow_point(&f, &zero, 0.0, 1.0, c(0.0, 0.0), &opts()).unwrap();
    assert!((v - c(0.25, 0.0)).norm() < 1e-3, "{v}");
}

#[test]
fn inversion_on_the_imaginary_axis() {
    let f = HalfPlaneField::inversion(2.0).unwrap();
    let zero = DriverPath::zero(0.0, 1.0, 1000).unwrap();
    let traj = integrate(&f, &zero, 0.0, 1.0, c(0.0, 2.0)).unwrap();
    for (t, z) in traj.times.iter().zip(&traj.states) {
        let exact = c(0.0, (4.0 + 2.0 * t).sqrt());
        assert!((z - exact).norm() < 1e-6, "{t}: {z}");
    }
    assert!((traj.last().im - 6f64.sqrt()).abs() < 1e-6);
}

#[test]
fn power_oracle_converges_at_first_order() {
    for alpha in [0.25, 0.5, 0.75] {
        let e1 = max_rel_error(alpha, 1000);
        let e2 = max_rel_error(alpha, 2000);
        assert!(e1 <= 5e-3, "alpha {alpha}: {e1}");
        let order = (e1 / e2).log2();
        assert!(order >= 0.9, "alpha {alpha}: order {order}");
    }
}

#[test]
fn flow_map_translates_a_vertical_segment() {
    let path = DriverPath::sample_brownian(3, 0.0, 1.0, 500, 1.0).unwrap();
    let f = HalfPlaneField::constant(c(1.0, 0.5)).unwrap();
    let zs: Vec<Complex64> = (0..11).map(|k| c(0.5, 0.1 * k as f64)).collect();
    let (vals, _) = flow_map(&f, &path, 0.0, 1.0, &zs, &opts()).unwrap();
    let shift = vals[0].clone().unwrap() - zs[0];
    for (z, v) in zs.iter().zip(vals) {
        assert!((v.unwrap() - z - shift).norm() < 1e-12);
    }
}

#[test]
fn flow_map_at_equal_times_is_the_identity() {
    let path = DriverPath::sample_brownian(3, 0.0, 1.0, 500, 1.0).unwrap();
    let f = HalfPlaneField::herglotz(
        0.0,
        1.0,
        vec![Atom {
            location: 0.5,
            weight: 1.0,
        }],
    )
    .unwrap();
    let zs = vec![c(0.1, 0.0), c(-3.0, 2.0), c(1e-300, 1e300)];
    let (vals, _) = flow_map(&f, &path, 0.4, 0.4, &zs, &opts()).unwrap();
    for (z, v) in zs.iter().zip(vals) {
        let v = v.unwrap();
        assert_eq!((v.re.to_bits(), v.im.to_bits()), (z.re.to_bits(), z.im.to_bits()));
    }
}

#[test]
fn flow_map_reports_errors_per_point() {
    let zero = DriverPath::zero(0.0, 1.0, 10).unwrap();
    let f = HalfPlaneField::inversion(1.0).unwrap();
    let (vals, _) = flow_map(&f, &zero, 0.0, 1.0, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, -1.0)], &opts()).unwrap();
    assert!(vals[0].is_ok());
    assert!(matches!(vals[1], Err(Error::SingularPoint { .. })));
    assert!(matches!(vals[2], Err(Error::Domain { .. })));
}

#[test]
fn explosion_and_singular_steps() {
    let linear = HalfPlaneField::herglotz(0.0, 20.0, vec![]).unwrap();
    let zero = DriverPath::zero(0.0, 1.0, 1000).unwrap();
    let err = flow_point(&linear, &zero, 0.0, 1.0, c(1.0, 1.0), &opts()).unwrap_err();
    assert!(matches!(err, Error::Explosion { .. }), "{err}");
    assert!(err.is_numerical());

    // the predictor from x = 1 under F = −1/z lands exactly on the pole
    let inv = HalfPlaneField::inversion(2.0).unwrap();
    let path = DriverPath::custom(0.0, 0.5, vec![0.0, -0.5]).unwrap();
    let err = flow_point(&inv, &path, 0.0, 0.5, c(1.0, 0.0), &opts()).unwrap_err();
    assert!(matches!(err, Error::SingularStep { .. }), "{err}");
}

#[test]
fn imaginary_part_is_nondecreasing_for_interior_starts() {
    let path = DriverPath::sample_brownian(77, 0.0, 1.0, 2000, 1.0).unwrap();
    let fields = vec![
        HalfPlaneField::power(0.5).unwrap(),
        HalfPlaneField::inversion(4.0).unwrap(),
        HalfPlaneField::constant(c(0.0, 0.5)).unwrap(),
        HalfPlaneField::herglotz(
            0.5,
            0.2,
            vec![Atom {
                location: -0.5,
                weight: 0.5,
            }],
        )
        .unwrap(),
    ];
    for f in &fields {
        for z in [c(0.0, 0.5), c(-1.0, 0.1), c(2.0, 1.0)] {
            let traj = integrate(f, &path, 0.0, 1.0, z).unwrap();
            let tol: Vec<f64> = traj
                .states
                .iter()
                .map(|s| path.dt() * f.eval(*s).unwrap().norm())
                .collect();
            for k in 1..traj.states.len() {
                assert!(
                    traj.states[k].im >= traj.states[k - 1].im - tol[k - 1],
                    "{f:?} {z} step {k}"
                );
                assert!(traj.states[k].im >= 0.0);
            }
        }
    }
}

#[test]
fn shared_noise_keeps_real_points_apart() {
    let f = HalfPlaneField::power(0.5).unwrap();
    for n in [250, 1000, 4000] {
        let path = DriverPath::sample_brownian(5, 0.0, 1.0, n, 1.0).unwrap();
        let xs: Vec<f64> = (0..41).map(|k| -1.0 + 0.05 * k as f64).collect();
        let curve = boundary_curve_at(&f, &path, 0.0, 1.0, &xs, &opts()).unwrap();
        assert!(curve.min_separation() > 0.0, "n = {n}");
    }
}

#[test]
fn boundary_examples() {
    let path = DriverPath::sample_brownian(1, 0.0, 1.0, 100, 1.0).unwrap();
    let f = HalfPlaneField::power(0.5).unwrap();
    let id = boundary_curve(&f, &path, 0.3, 0.3, -1.0, 1.0, 50, &BoundaryOptions::default()).unwrap();
    for (x, p) in id.params.iter().zip(&id.points) {
        assert_eq!(*p, c(*x, 0.0));
    }

    let zero = DriverPath::zero(0.0, 1.0, 100).unwrap();
    let k = HalfPlaneField::constant(c(0.0, 1.0)).unwrap();
    let lifted = boundary_curve(&k, &zero, 0.0, 1.0, -1.0, 1.0, 101, &BoundaryOptions::default()).unwrap();
    for (x, p) in lifted.params.iter().zip(&lifted.points) {
        assert!((p - c(*x, 1.0)).norm() < 1e-12);
    }
}

#[test]
fn boundary_refinement_meets_the_spacing() {
    let path = DriverPath::sample_brownian(12, 0.0, 1.0, 1000, 1.0).unwrap();
    let f = HalfPlaneField::power(0.5).unwrap();
    let opts = BoundaryOptions {
        delta: Some(0.01),
        ..Default::default()
    };
    let curve = boundary_curve(&f, &path, 0.0, 1.0, -2.0, 2.0, 11, &opts).unwrap();
    assert!(curve.params.windows(2).all(|w| w[0] < w[1]));
    let widest = curve
        .points
        .windows(2)
        .map(|w| (w[1] - w[0]).norm())
        .fold(0.0, f64::max);
    assert!(widest <= 0.01, "{widest}");
    assert!(curve.warnings.is_empty());

    let capped = BoundaryOptions {
        delta: Some(1e-6),
        max_points: 200,
        ..Default::default()
    };
    let curve = boundary_curve(&f, &path, 0.0, 1.0, -2.0, 2.0, 11, &capped).unwrap();
    assert!(curve.len() <= 200);
    assert!(curve
        .warnings
        .iter()
        .any(|w| matches!(w, Warning::SubdivisionCap { .. })));
}

#[test]
fn boundary_csv_header_and_precision() {
    let zero = DriverPath::zero(0.0, 1.0, 10).unwrap();
    let k = HalfPlaneField::constant(c(0.0, 1.0)).unwrap();
    let curve = boundary_curve(&k, &zero, 0.0, 1.0, 0.0, 1.0, 3, &BoundaryOptions::default()).unwrap();
    let mut out = Vec::new();
    curve.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next(), Some("x,re,im"));
    assert_eq!(text.lines().count(), curve.len() + 1);
    assert!(text.lines().nth(1).unwrap().starts_with("0.0000000000000000e0,"));
}

#[test]
fn flow_property_examples() {
    let path = DriverPath::sample_brownian(6, 0.0, 1.0, 1000, 1.0).unwrap();
    let p = HalfPlaneField::power(0.5).unwrap();
    let z = c(-0.5, 0.0);
    assert_eq!(check_flow_property(&p, &path, 0.1, 0.1, 0.9, z, &opts()).unwrap(), 0.0);
    assert_eq!(check_flow_property(&p, &path, 0.1, 0.9, 0.9, z, &opts()).unwrap(), 0.0);
    // composition over grid points replays the same steps
    assert_eq!(check_flow_property(&p, &path, 0.0, 0.5, 1.0, z, &opts()).unwrap(), 0.0);

    let k = HalfPlaneField::constant(c(2.0, 1.0)).unwrap();
    for u in [0.2, 0.5, 0.7] {
        assert_eq!(
            check_flow_property(&k, &path, 0.0, u, 1.0, c(1.0, 1.0), &opts()).unwrap(),
            0.0
        );
    }
    assert!(check_flow_property(&p, &path, 0.5, 0.2, 1.0, z, &opts()).is_err());
}

#[test]
fn composition_error_against_the_oracle_halves() {
    // φ(u, t, φ(s, u, z)) built from exact inner values and numerical outer steps
    let f = HalfPlaneField::power(0.5).unwrap();
    let err = |n: usize| {
        let zero = DriverPath::zero(0.0, 1.0, n).unwrap();
        let z = c(0.3, 0.0);
        let mid = closed_form_power_flow(0.5, 0.0, 0.5, z).unwrap();
        let composed = flow_point(&f, &zero, 0.5, 1.0, mid, &opts()).unwrap();
        (composed - closed_form_power_flow(0.5, 0.0, 1.0, z).unwrap()).norm()
    };
    let ratio = err(1000) / err(2000);
    assert!(ratio > 1.8, "{ratio}");
}

#[test]
fn closed_form_examples() {
    assert!((closed_form_power_flow(0.5, 0.0, 1.0, c(0.0, 0.0)).unwrap() - 0.25).norm() < 1e-15);
    assert!((closed_form_power_flow(0.5, 0.0, 1.0, c(1.0, 0.0)).unwrap() - 2.25).norm() < 1e-15);
    assert_eq!(
        closed_form_power_flow(0.3, 2.0, 2.0, c(-1.0, 3.0)).unwrap(),
        c(-1.0, 3.0)
    );
    assert!(closed_form_power_flow(0.5, 1.0, 0.0, c(1.0, 0.0)).is_err());
    assert!(closed_form_power_flow(1.5, 0.0, 1.0, c(1.0, 0.0)).is_err());
}

#[test]
fn trajectory_metadata() {
    let path = DriverPath::sample_brownian(31, 0.0, 1.0, 100, 1.0).unwrap();
    let f = HalfPlaneField::power(0.5).unwrap();
    let traj = integrate(&f, &path, 0.105, 0.5, c(0.0, 1.0)).unwrap();
    assert_eq!(traj.path_seed, Some(31));
    assert_eq!(traj.step, 0.01);
    assert_eq!(traj.times.len(), traj.states.len());
    assert!(traj.warnings.iter().any(|w| matches!(w, Warning::SnapToGrid { .. })));
}
