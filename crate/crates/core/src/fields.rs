//! Holomorphic vector fields `F: ℍ → ℍ` and their antiderivatives.
//!
//! Every field is evaluated on the closed upper half-plane. Branches are fixed
//! once here so that the flow, the derivative machinery and the Loewner code
//! all see the same continuous determinations:
//!
//! - powers and `log z` use `arg z ∈ [0, π]`;
//! - the Herglotz term `log(x_j − z)` uses `arg ∈ [−π, 0]`, since `x_j − z`
//!   lies in the closed lower half-plane.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{self, IntegratorOptions};
use crate::paths::DriverPath;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Maps `-0.0` and negatives to `+0.0` so `atan2` never reports `-π`.
#[inline]
fn nonneg(v: f64) -> f64 {
    v.max(0.0) + 0.0
}

/// Argument of `z` in `[0, π]`, for `z` in the closed upper half-plane.
#[inline]
pub(crate) fn arg_upper(z: Complex64) -> f64 {
    nonneg(z.im).atan2(z.re)
}

/// `z^p` with `arg z ∈ [0, π]`; `0^p = 0` for every `p`.
#[inline]
pub(crate) fn pow_upper(z: Complex64, p: f64) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::from_polar(z.norm().powf(p), p * arg_upper(z))
}

#[inline]
pub(crate) fn log_upper(z: Complex64) -> Complex64 {
    Complex64::new(z.norm().ln(), arg_upper(z))
}

/// `log u` with `arg u ∈ [−π, 0]`, for `u` in the closed lower half-plane.
#[inline]
fn log_lower(u: Complex64) -> Complex64 {
    Complex64::new(u.norm().ln(), -nonneg(-u.im).atan2(u.re))
}

fn check_domain(z: Complex64) -> Result<()> {
    if z.im < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain { z });
    }
    Ok(())
}

/// The operations the integrators need from a field.
///
/// `antiderivative` and `derivative` may be unavailable (iterated fields);
/// the flow only needs `value`.
pub trait HolomorphicField: Send + Sync {
    fn value(&self, z: Complex64) -> Result<Complex64>;

    /// `G` with `G′ = F`.
    fn antiderivative(&self, z: Complex64) -> Result<Complex64>;

    /// `F′`.
    fn derivative(&self, z: Complex64) -> Result<Complex64>;

    /// Poles on the closed half-plane; integration steps landing near one fail.
    fn singularities(&self) -> Vec<Complex64> {
        Vec::new()
    }

    /// Points near which `F` fails to be smooth (poles and branch points),
    /// including ones just below the real axis.
    fn critical_points(&self) -> Vec<Complex64> {
        self.singularities()
    }

    /// Drift displacement over `dt` for a state sitting exactly on a boundary
    /// zero of `F` where `F` is not Lipschitz. The autonomous equation then has
    /// several solutions; this returns the one continuous with interior starts.
    fn boundary_escape(&self, _z: Complex64, _dt: f64) -> Option<Complex64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// `F(z) = C + Dz + Σ_j w_j (1/(x_j − z) − x_j/(1 + x_j²))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Herglotz {
    pub c: f64,
    pub d: f64,
    pub atoms: Vec<Atom>,
}

#[derive(Clone)]
pub enum HalfPlaneField {
    Herglotz(Herglotz),
    /// `F(z) = z^α`, `α ∈ (0, 1)`.
    Power {
        alpha: f64,
    },
    /// `F(z) = (−2/κ)/z`.
    Inversion {
        kappa: f64,
    },
    /// `F(z) ≡ c` with `Im c ≥ 0`.
    Constant {
        c: Complex64,
    },
    Iterated(Arc<IteratedField>),
    /// `z ↦ F(z + iy)`.
    Shifted {
        base: Box<HalfPlaneField>,
        y: f64,
    },
}

impl fmt::Debug for HalfPlaneField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl HalfPlaneField {
    pub fn herglotz(c: f64, d: f64, atoms: Vec<Atom>) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::invalid("c", "must be finite"));
        }
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::invalid("d", format!("must be finite and >= 0, got {d}")));
        }
        for a in &atoms {
            if !a.location.is_finite() {
                return Err(Error::invalid("atoms", "atom locations must be finite"));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::invalid(
                    "atoms",
                    format!("atom weights must be finite and > 0, got {}", a.weight),
                ));
            }
        }
        Ok(HalfPlaneField::Herglotz(Herglotz { c, d, atoms }))
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        Ok(HalfPlaneField::Power { alpha })
    }

    pub fn inversion(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::invalid("kappa", format!("must be finite and > 0, got {kappa}")));
        }
        Ok(HalfPlaneField::Inversion { kappa })
    }

    pub fn constant(c: Complex64) -> Result<Self> {
        if !(c.im >= 0.0) || !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::invalid("c", format!("must be finite with Im c >= 0, got {c}")));
        }
        Ok(HalfPlaneField::Constant { c })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            HalfPlaneField::Herglotz(_) => "herglotz",
            HalfPlaneField::Power { .. } => "power",
            HalfPlaneField::Inversion { .. } => "inversion",
            HalfPlaneField::Constant { .. } => "constant",
            HalfPlaneField::Iterated(_) => "iterated",
            HalfPlaneField::Shifted { .. } => "shifted",
        }
    }

    /// Stable human-readable description, used in reports and manifests.
    pub fn describe(&self) -> String {
        match self {
            HalfPlaneField::Herglotz(h) => {
                let atoms: Vec<String> = h.atoms.iter().map(|a| format!("{}:{}", a.location, a.weight)).collect();
                format!("herglotz(c={}, d={}, atoms=[{}])", h.c, h.d, atoms.join(", "))
            }
            HalfPlaneField::Power { alpha } => format!("power(alpha={alpha})"),
            HalfPlaneField::Inversion { kappa } => format!("inversion(kappa={kappa})"),
            HalfPlaneField::Constant { c } => format!("constant(c={}{:+}i)", c.re, c.im),
            HalfPlaneField::Iterated(it) => format!(
                "iterated(base={}, depth={}, step={})",
                it.base_description(),
                it.depth,
                it.step
            ),
            HalfPlaneField::Shifted { base, y } => format!("shifted({}, y={y})", base.describe()),
        }
    }

    /// Hölder exponent of `F` on the closed half-plane, used for the moment
    /// threshold `p ≥ 2/α`. Fields that are not globally Hölder report 1.
    pub fn holder_exponent(&self) -> f64 {
        match self {
            HalfPlaneField::Power { alpha } => *alpha,
            HalfPlaneField::Shifted { .. } => 1.0,
            HalfPlaneField::Iterated(it) => it.inner.holder_exponent(),
            _ => 1.0,
        }
    }

    /// `sup |F|` on the closed half-plane when known in closed form.
    pub fn sup_bound(&self) -> Option<f64> {
        match self {
            HalfPlaneField::Constant { c } => Some(c.norm()),
            HalfPlaneField::Shifted { base, y } => match base.as_ref() {
                HalfPlaneField::Inversion { kappa } => Some(2.0 / (kappa * y)),
                HalfPlaneField::Constant { c } => Some(c.norm()),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        check_domain(z)?;
        match self {
            HalfPlaneField::Herglotz(h) => {
                let mut acc = Complex64::new(h.c, 0.0) + h.d * z;
                for a in &h.atoms {
                    let u = Complex64::new(a.location, 0.0) - z;
                    if u.re == 0.0 && u.im == 0.0 {
                        return Err(Error::SingularPoint { z });
                    }
                    acc += a.weight * (u.inv() - a.location / (1.0 + a.location * a.location));
                }
                Ok(acc)
            }
            HalfPlaneField::Power { alpha } => Ok(pow_upper(z, *alpha)),
            HalfPlaneField::Inversion { kappa } => {
                if z.re == 0.0 && z.im == 0.0 {
                    return Err(Error::SingularPoint { z });
                }
                Ok((-2.0 / kappa) / z)
            }
            HalfPlaneField::Constant { c } => Ok(*c),
            HalfPlaneField::Iterated(it) => it.eval(z),
            HalfPlaneField::Shifted { base, y } => base.eval(z + I * *y),
        }
    }

    pub fn eval_antiderivative(&self, z: Complex64) -> Result<Complex64> {
        check_domain(z)?;
        match self {
            HalfPlaneField::Herglotz(h) => {
                let mut acc = h.c * z + 0.5 * h.d * z * z;
                for a in &h.atoms {
                    let u = Complex64::new(a.location, 0.0) - z;
                    if u.re == 0.0 && u.im == 0.0 {
                        return Err(Error::SingularPoint { z });
                    }
                    let x = a.location;
                    acc += a.weight * (-log_lower(u) - x * z / (1.0 + x * x));
                }
                Ok(acc)
            }
            HalfPlaneField::Power { alpha } => Ok(pow_upper(z, 1.0 + alpha) / (1.0 + alpha)),
            HalfPlaneField::Inversion { kappa } => {
                if z.re == 0.0 && z.im == 0.0 {
                    return Err(Error::SingularPoint { z });
                }
                Ok((-2.0 / kappa) * log_upper(z))
            }
            HalfPlaneField::Constant { c } => Ok(c * z),
            HalfPlaneField::Iterated(_) => Err(Error::Unsupported {
                operation: "antiderivative",
                kind: "iterated",
            }),
            HalfPlaneField::Shifted { base, y } => base.eval_antiderivative(z + I * *y),
        }
    }

    pub fn eval_derivative(&self, z: Complex64) -> Result<Complex64> {
        check_domain(z)?;
        match self {
            HalfPlaneField::Herglotz(h) => {
                let mut acc = Complex64::new(h.d, 0.0);
                for a in &h.atoms {
                    let u = Complex64::new(a.location, 0.0) - z;
                    if u.re == 0.0 && u.im == 0.0 {
                        return Err(Error::SingularPoint { z });
                    }
                    acc += a.weight / (u * u);
                }
                Ok(acc)
            }
            HalfPlaneField::Power { alpha } => {
                if z.re == 0.0 && z.im == 0.0 {
                    return Err(Error::SingularPoint { z });
                }
                Ok(*alpha * pow_upper(z, alpha - 1.0))
            }
            HalfPlaneField::Inversion { kappa } => {
                if z.re == 0.0 && z.im == 0.0 {
                    return Err(Error::SingularPoint { z });
                }
                Ok((2.0 / kappa) / (z * z))
            }
            HalfPlaneField::Constant { .. } => Ok(Complex64::new(0.0, 0.0)),
            HalfPlaneField::Iterated(_) => Err(Error::Unsupported {
                operation: "derivative",
                kind: "iterated",
            }),
            HalfPlaneField::Shifted { base, y } => base.eval_derivative(z + I * *y),
        }
    }
}

impl HolomorphicField for HalfPlaneField {
    fn value(&self, z: Complex64) -> Result<Complex64> {
        self.eval(z)
    }

    fn antiderivative(&self, z: Complex64) -> Result<Complex64> {
        self.eval_antiderivative(z)
    }

    fn derivative(&self, z: Complex64) -> Result<Complex64> {
        self.eval_derivative(z)
    }

    fn singularities(&self) -> Vec<Complex64> {
        match self {
            HalfPlaneField::Herglotz(h) => h.atoms.iter().map(|a| Complex64::new(a.location, 0.0)).collect(),
            HalfPlaneField::Inversion { .. } => vec![Complex64::new(0.0, 0.0)],
            _ => Vec::new(),
        }
    }

    fn critical_points(&self) -> Vec<Complex64> {
        match self {
            HalfPlaneField::Power { .. } => vec![Complex64::new(0.0, 0.0)],
            HalfPlaneField::Shifted { base, y } => base.critical_points().into_iter().map(|p| p - I * *y).collect(),
            _ => self.singularities(),
        }
    }

    fn boundary_escape(&self, z: Complex64, dt: f64) -> Option<Complex64> {
        match self {
            HalfPlaneField::Power { alpha } if z.re == 0.0 && z.im == 0.0 => {
                // maximal solution of ż = z^α from 0: ((1−α)t)^{1/(1−α)}
                Some(Complex64::new(((1.0 - alpha) * dt).powf(1.0 / (1.0 - alpha)), 0.0))
            }
            _ => None,
        }
    }
}

/// `F(z + iy)`; nonsingular on the closed half-plane for `y > 0`.
pub fn shift_field(field: &HalfPlaneField, y: f64) -> Result<HalfPlaneField> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::invalid("y", format!("must be finite and > 0, got {y}")));
    }
    Ok(match field {
        HalfPlaneField::Constant { .. } => field.clone(),
        other => HalfPlaneField::Shifted {
            base: Box::new(other.clone()),
            y,
        },
    })
}

/// One level of the pathwise iteration `F_{n+1}(z) = φ^{F_n}(0, 1, z)`.
///
/// Evaluations are cached per query point; the cache never changes a value,
/// only avoids recomputing it.
pub struct IteratedField {
    inner: HalfPlaneField,
    path: DriverPath,
    depth: usize,
    step: f64,
    cache: Mutex<HashMap<(u64, u64), Complex64>>,
}

impl IteratedField {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn path(&self) -> &DriverPath {
        &self.path
    }

    fn base_description(&self) -> String {
        match &self.inner {
            HalfPlaneField::Iterated(it) => it.base_description(),
            other => other.describe(),
        }
    }

    fn eval(&self, z: Complex64) -> Result<Complex64> {
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(v) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(*v);
        }
        let v = flow::flow_point(&self.inner, &self.path, 0.0, 1.0, z, &IntegratorOptions::default())?;
        self.cache.lock().expect("cache poisoned").insert(key, v);
        Ok(v)
    }
}

/// Builds `F_n` from `F_0 = base` by integrating against one shared driver
/// on `[0, 1]` with the given step.
pub fn iterate_field(base: &HalfPlaneField, path: &DriverPath, n: usize, step: f64) -> Result<HalfPlaneField> {
    if n < 1 {
        return Err(Error::invalid("n", "iteration depth must be >= 1"));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid("step", format!("must lie in (0, 1], got {step}")));
    }
    let span_tol = 1e-12 * (path.t1() - path.t0()).abs().max(1.0);
    if path.t0() > span_tol || path.t1() < 1.0 - span_tol {
        let t = if path.t0() > span_tol { 0.0 } else { 1.0 };
        return Err(Error::OutOfSpan {
            t,
            t0: path.t0(),
            t1: path.t1(),
        });
    }
    let n_steps = (1.0 / step).round().max(1.0) as usize;
    let unit = path.resample(0.0, 1.0, n_steps)?;
    let mut field = base.clone();
    for depth in 1..=n {
        field = HalfPlaneField::Iterated(Arc::new(IteratedField {
            inner: field,
            path: unit.clone(),
            depth,
            step: 1.0 / n_steps as f64,
            cache: Mutex::new(HashMap::new()),
        }));
    }
    Ok(field)
}
