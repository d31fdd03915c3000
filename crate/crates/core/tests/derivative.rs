use planar_flow::derivative::{
    compute_v, derivative, derivative_field, finite_difference_check, finite_difference_derivative, identity_residual,
    j_series, DEFAULT_THETA_NODES,
};
use planar_flow::{iterate_field, shift_field, Complex64, DriverPath, Error, HalfPlaneField, HolomorphicField, Result};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The same field with `G` shifted by a constant.
struct Offset {
    inner: HalfPlaneField,
    k: Complex64,
}

impl HolomorphicField for Offset {
    fn value(&self, z: Complex64) -> Result<Complex64> {
        self.inner.value(z)
    }
    fn antiderivative(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.inner.antiderivative(z)? + self.k)
    }
    fn derivative(&self, z: Complex64) -> Result<Complex64> {
        self.inner.derivative(z)
    }
    fn singularities(&self) -> Vec<Complex64> {
        self.inner.singularities()
    }
    fn critical_points(&self) -> Vec<Complex64> {
        self.inner.critical_points()
    }
    fn boundary_escape(&self, z: Complex64, dt: f64) -> Option<Complex64> {
        self.inner.boundary_escape(z, dt)
    }
}

#[test]
fn equal_times_give_zero() {
    let path = DriverPath::sample_brownian(1, 0.0, 1.0, 100, 1.0).unwrap();
    let f = HalfPlaneField::power(0.5).unwrap();
    let rep = compute_v(&f, &path, 0.4, 0.4, c(1.0, 0.0), c(1.0, 0.0), 16).unwrap();
    assert_eq!(rep.v_val, c(0.0, 0.0));
    assert_eq!(rep.i_val, c(0.0, 0.0));
    assert_eq!(rep.j_val, c(0.0, 0.0));
    assert_eq!(rep.phi_prime, Some(c(1.0, 0.0)));
    assert_eq!(
        identity_residual(&f, &path, 0.4, 0.4, c(-1.0, 0.0), c(1.0, 0.0), 16).unwrap(),
        0.0
    );
    assert_eq!(
        finite_difference_check(&f, &path, 0.4, 0.4, c(1.0, 0.0), 1e-4).unwrap(),
        0.0
    );
}

#[test]
fn constant_field_has_unit_derivative() {
    let path = DriverPath::sample_brownian(2, 0.0, 1.0, 1000, 1.0).unwrap();
    let f = HalfPlaneField::constant(c(0.7, 1.3)).unwrap();
    let rep = compute_v(&f, &path, 0.0, 1.0, c(-1.0, 0.0), c(1.0, 2.0), 16).unwrap();
    assert!(rep.v_val.norm() < 1e-12, "{}", rep.v_val);
    assert!(rep.phi_prime.is_none());
    assert!((derivative(&f, &path, 0.2, 0.9, c(0.5, 0.5), 16).unwrap() - 1.0).norm() < 1e-12);
    assert!(identity_residual(&f, &path, 0.0, 1.0, c(-1.0, 0.0), c(1.0, 0.0), 16).unwrap() < 1e-12);
    assert!(finite_difference_check(&f, &path, 0.0, 1.0, c(0.0, 1.0), 1e-4).unwrap() < 1e-10);
}

#[test]
fn power_derivative_on_zero_path() {
    let zero = DriverPath::zero(0.0, 1.0, 10_000).unwrap();
    let f = HalfPlaneField::power(0.5).unwrap();
    let d = derivative(&f, &zero, 0.0, 1.0, c(1.0, 0.0), 16).unwrap();
    assert!((d - 1.5).norm() < 1e-3, "{d}");
    let fd = finite_difference_derivative(&f, &zero, 0.0, 1.0, c(1.0, 0.0), 1e-4).unwrap();
    assert!((fd - 1.5).norm() < 1e-3, "{fd}");
    assert!(finite_difference_check(&f, &zero, 0.0, 1.0, c(1.0, 0.0), 1e-4).unwrap() <= 1e-3);
}

#[test]
fn derivative_is_real_and_positive_on_the_positive_axis() {
    let zero = DriverPath::zero(0.0, 1.0, 1000).unwrap();
    let f = HalfPlaneField::power(0.5).unwrap();
    for x in [0.01, 0.1, 0.5, 1.0, 3.0] {
        let d = derivative(&f, &zero, 0.0, 1.0, c(x, 0.0), 16).unwrap();
        assert!(d.re > 0.0 && d.im.abs() < 1e-12, "{x}: {d}");
        let exact = (0.5 + x.sqrt()) / x.sqrt();
        assert!((d.re - exact).abs() < 5e-3 * exact, "{x}: {d} vs {exact}");
    }
}

#[test]
fn antiderivative_offset_leaves_v_unchanged() {
    let path = DriverPath::sample_brownian(3, 0.0, 1.0, 1000, 1.0).unwrap();
    for inner in [
        HalfPlaneField::power(0.5).unwrap(),
        HalfPlaneField::inversion(2.0).unwrap(),
        HalfPlaneField::herglotz(
            0.2,
            0.5,
            vec![planar_flow::Atom {
                location: 0.5,
                weight: 1.0,
            }],
        )
        .unwrap(),
    ] {
        let shifted = Offset {
            inner: inner.clone(),
            k: c(123.0, -45.0),
        };
        for (z, w) in [(c(-1.0, 1.0), c(1.0, 1.0)), (c(0.0, 2.0), c(0.0, 2.0))] {
            let a = compute_v(&inner, &path, 0.0, 1.0, z, w, 16).unwrap();
            let b = compute_v(&shifted, &path, 0.0, 1.0, z, w, 16).unwrap();
            assert!(
                (a.v_val - b.v_val).norm() <= 1e-12 * a.v_val.norm().max(1.0),
                "{inner:?}"
            );
        }
    }
}

#[test]
fn theta_quadrature_converges() {
    let path = DriverPath::sample_brownian(4, 0.0, 1.0, 1000, 1.0).unwrap();
    let fields = [
        HalfPlaneField::herglotz(
            0.0,
            1.0,
            vec![planar_flow::Atom {
                location: 0.0,
                weight: 1.0,
            }],
        )
        .unwrap(),
        HalfPlaneField::power(0.5).unwrap(),
    ];
    for f in &fields {
        let (z, w) = (c(-1.0, 1.0), c(1.0, 2.0));
        let a = compute_v(f, &path, 0.0, 1.0, z, w, 16).unwrap();
        let b = compute_v(f, &path, 0.0, 1.0, z, w, 32).unwrap();
        assert!((a.v_val - b.v_val).norm() < 1e-6, "{f:?}: {} vs {}", a.v_val, b.v_val);
    }
}

#[test]
fn identity_residual_on_a_brownian_driver() {
    let f = HalfPlaneField::power(0.5).unwrap();
    let path = DriverPath::sample_brownian(42, 0.0, 1.0, 10_000, 1.0).unwrap();
    for (z, w) in [(c(-1.0, 0.0), c(1.0, 0.0)), (c(0.0, 1.0), c(1.0, 1.0))] {
        let r = identity_residual(&f, &path, 0.0, 1.0, z, w, 16).unwrap();
        assert!(r < 1e-3, "{z}, {w}: {r}");
    }
}

#[test]
fn identity_residual_decays_with_the_step() {
    let f = HalfPlaneField::power(0.5).unwrap();
    let coarse = DriverPath::sample_brownian(42, 0.0, 1.0, 2000, 1.0).unwrap();
    let fine = coarse.refine(2).unwrap();
    let (z, w) = (c(0.0, 1.0), c(1.0, 1.0));
    let r1 = identity_residual(&f, &coarse, 0.0, 1.0, z, w, 16).unwrap();
    let r2 = identity_residual(&f, &fine, 0.0, 1.0, z, w, 16).unwrap();
    let order = (r1 / r2).log2();
    assert!(order > 0.6 && order < 1.5, "{r1} -> {r2}, order {order}");
}

#[test]
fn mollified_fields_approach_the_boundary_value() {
    let zero = DriverPath::zero(0.0, 1.0, 1000).unwrap();
    let f = HalfPlaneField::power(0.5).unwrap();
    let z = c(1.0, 0.0);
    let v = compute_v(&f, &zero, 0.0, 1.0, z, z, 16).unwrap().v_val;
    let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&y| {
            let fy = shift_field(&f, y).unwrap();
            (compute_v(&fy, &zero, 0.0, 1.0, z, z, 16).unwrap().v_val - v).norm()
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 1e-2);
}

#[test]
fn j_series_of_a_constant_field_is_the_scaled_driver() {
    let path = DriverPath::sample_brownian(5, 0.0, 1.0, 500, 1.0).unwrap();
    let cst = c(0.5, 2.0);
    let f = HalfPlaneField::constant(cst).unwrap();
    let js = j_series(&f, &path, 0.2, 0.8, c(0.0, 1.0), c(1.0, 1.0), 4).unwrap();
    assert_eq!(js.len(), 301);
    assert_eq!(js[0], c(0.0, 0.0));
    for (k, j) in js.iter().enumerate() {
        let du = path.values()[100 + k] - path.values()[100];
        assert!((j - cst * du).norm() < 1e-12, "{k}");
    }
}

#[test]
fn iterated_fields_fall_back_to_differences() {
    let path = DriverPath::sample_brownian(6, 0.0, 1.0, 100, 1.0).unwrap();
    let it = iterate_field(&HalfPlaneField::power(0.5).unwrap(), &path, 1, 0.01).unwrap();
    let err = compute_v(&it, &path, 0.0, 0.1, c(0.0, 1.0), c(0.0, 1.0), 4).unwrap_err();
    assert!(matches!(err, Error::Unsupported { .. }), "{err}");
    let fd = finite_difference_derivative(&it, &path, 0.0, 0.1, c(0.0, 1.0), 1e-5).unwrap();
    assert!(fd.re.is_finite() && fd.norm() > 0.0);
}

#[test]
fn parameter_validation() {
    let path = DriverPath::zero(0.0, 1.0, 10).unwrap();
    let f = HalfPlaneField::power(0.5).unwrap();
    assert!(compute_v(&f, &path, 0.0, 1.0, c(1.0, 0.0), c(1.0, 0.0), 0).is_err());
    assert!(compute_v(&f, &path, 0.8, 0.2, c(1.0, 0.0), c(1.0, 0.0), 4).is_err());
    assert!(identity_residual(&f, &path, 0.0, 1.0, c(1.0, 0.0), c(1.0, 0.0), 4).is_err());
    assert!(finite_difference_derivative(&f, &path, 0.0, 1.0, c(1.0, 0.0), 0.0).is_err());
    assert_eq!(DEFAULT_THETA_NODES, 16);
}

#[test]
fn derivative_field_csv() {
    let zero = DriverPath::zero(0.0, 1.0, 100).unwrap();
    let f = HalfPlaneField::constant(c(0.0, 1.0)).unwrap();
    let df = derivative_field(&f, &zero, 0.0, 1.0, &[-1.0, 0.0, 1.0]).unwrap();
    assert!(df.values.iter().all(|v| (v - 1.0).norm() < 1e-12));
    let mut out = Vec::new();
    df.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next(), Some("x,re_dphi,im_dphi"));
    assert_eq!(text.lines().count(), 4);
}
