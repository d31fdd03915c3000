//! Pathwise integration of `dZ = F(Z)dt + dU` and the flow map `φ(s, t, ·)`.
//!
//! The scheme is stochastic Heun for additive noise on the driver grid:
//!
//! ```text
//! P       = Z_k + F(Z_k)Δt + ΔU_k
//! Z_{k+1} = Z_k + ½(F(Z_k) + F(P))Δt + ΔU_k
//! ```
//!
//! followed by projection onto the closed half-plane. For constant fields it
//! reduces to Euler–Maruyama and is exact. A state sitting exactly on a
//! non-Lipschitz boundary zero of `F` (the origin for `z^α`) takes the
//! field's exact escape step instead, see [`HolomorphicField::boundary_escape`].

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result, Warning};
use crate::fields::{pow_upper, HolomorphicField};
use crate::paths::DriverPath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    /// Explosion guard on `|Z|`.
    pub r_max: f64,
    /// A step landing this close to a pole is an error.
    pub singular_tol: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            r_max: 1e6,
            singular_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Start time after snapping to the grid.
    pub s: f64,
    pub times: Vec<f64>,
    pub states: Vec<Complex64>,
    pub field: String,
    pub path_seed: Option<u64>,
    pub step: f64,
    pub warnings: Vec<Warning>,
}

impl Trajectory {
    pub fn last(&self) -> Complex64 {
        *self.states.last().expect("trajectory has at least one state")
    }
}

/// Grid indices of `[s, t]`, with any snapping warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpan {
    pub start: usize,
    pub end: usize,
    pub warnings: Vec<Warning>,
}

pub fn grid_span(path: &DriverPath, s: f64, t: f64) -> Result<GridSpan> {
    if !(s <= t) {
        return Err(Error::invalid("s/t", format!("need s <= t, got s = {s}, t = {t}")));
    }
    let (start, w0) = path.snap(s)?;
    let (end, w1) = path.snap(t)?;
    Ok(GridSpan {
        start,
        end,
        warnings: w0.into_iter().chain(w1).collect(),
    })
}

#[inline]
fn project(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        Complex64::new(z.re, 0.0)
    } else {
        z
    }
}

fn check_start(z: Complex64) -> Result<()> {
    if z.im < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain { z });
    }
    Ok(())
}

fn guard<F: HolomorphicField + ?Sized>(
    field: &F,
    z: Complex64,
    time: f64,
    opts: &IntegratorOptions,
) -> Result<Complex64> {
    let modulus = z.norm();
    if !(modulus <= opts.r_max) {
        return Err(Error::Explosion {
            time,
            modulus,
            bound: opts.r_max,
        });
    }
    for p in field.singularities() {
        if (z - p).norm() < opts.singular_tol {
            return Err(Error::SingularStep {
                time,
                z,
                singularity: p,
                tolerance: opts.singular_tol,
            });
        }
    }
    Ok(z)
}

/// One step of the scheme from `z` over `dt` with driver increment `du`;
/// `time` is the end of the step (for error reports).
pub fn step<F: HolomorphicField + ?Sized>(
    field: &F,
    z: Complex64,
    dt: f64,
    du: f64,
    time: f64,
    opts: &IntegratorOptions,
) -> Result<Complex64> {
    let next = if let Some(d) = field.boundary_escape(z, dt) {
        z + d + du
    } else {
        let f0 = field.value(z)?;
        let pred = guard(field, project(z + f0 * dt + du), time, opts)?;
        let f1 = field.value(pred)?;
        z + 0.5 * (f0 + f1) * dt + du
    };
    guard(field, project(next), time, opts)
}

/// `φ(s, t, z)` without storing the trajectory. `s` and `t` snap to the grid.
pub fn flow_point<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    z: Complex64,
    opts: &IntegratorOptions,
) -> Result<Complex64> {
    let span = grid_span(path, s, t)?;
    flow_between(field, path, span.start, span.end, z, opts)
}

/// `φ` between grid indices `k0 ≤ k1`.
pub fn flow_between<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    k0: usize,
    k1: usize,
    z: Complex64,
    opts: &IntegratorOptions,
) -> Result<Complex64> {
    check_start(z)?;
    let dt = path.dt();
    let mut state = z;
    for k in k0..k1 {
        state = step(field, state, dt, path.increment(k), path.time(k + 1), opts)?;
    }
    Ok(state)
}

/// States on every grid point between `k0` and `k1`, both included.
pub fn states_between<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    k0: usize,
    k1: usize,
    z: Complex64,
    opts: &IntegratorOptions,
) -> Result<Vec<Complex64>> {
    check_start(z)?;
    let dt = path.dt();
    let mut states = Vec::with_capacity(k1 - k0 + 1);
    let mut state = z;
    states.push(state);
    for k in k0..k1 {
        state = step(field, state, dt, path.increment(k), path.time(k + 1), opts)?;
        states.push(state);
    }
    Ok(states)
}

pub fn integrate<F: HolomorphicField + ?Sized + std::fmt::Debug>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    z: Complex64,
) -> Result<Trajectory> {
    integrate_with(field, path, s, t, z, &IntegratorOptions::default())
}

pub fn integrate_with<F: HolomorphicField + ?Sized + std::fmt::Debug>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    z: Complex64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let span = grid_span(path, s, t)?;
    let states = states_between(field, path, span.start, span.end, z, opts)?;
    Ok(Trajectory {
        s: path.time(span.start),
        times: (span.start..=span.end).map(|k| path.time(k)).collect(),
        states,
        field: format!("{field:?}"),
        path_seed: path.seed(),
        step: path.dt(),
        warnings: span.warnings,
    })
}

/// Flow map over many starting points sharing one driver. Errors are per
/// point; output order follows `zs` whatever the worker count.
pub fn flow_map<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    zs: &[Complex64],
    opts: &IntegratorOptions,
) -> Result<(Vec<Result<Complex64>>, Vec<Warning>)> {
    let span = grid_span(path, s, t)?;
    let values = zs
        .par_iter()
        .map(|&z| flow_between(field, path, span.start, span.end, z, opts))
        .collect();
    Ok((values, span.warnings))
}

/// Image `φ(s, t, ℝ ∩ [a, b])` sampled at increasing parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryCurve {
    pub s: f64,
    pub t: f64,
    pub params: Vec<f64>,
    pub points: Vec<Complex64>,
    pub warnings: Vec<Warning>,
}

impl BoundaryCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Samples whose parameters lie in `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> BoundaryCurve {
        let keep: Vec<usize> = (0..self.params.len())
            .filter(|&i| self.params[i] >= a && self.params[i] <= b)
            .collect();
        BoundaryCurve {
            s: self.s,
            t: self.t,
            params: keep.iter().map(|&i| self.params[i]).collect(),
            points: keep.iter().map(|&i| self.points[i]).collect(),
            warnings: self.warnings.clone(),
        }
    }

    /// Smallest distance between any two samples (0 means a collision).
    pub fn min_separation(&self) -> f64 {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&i, &j| self.points[i].re.total_cmp(&self.points[j].re));
        let mut best = f64::INFINITY;
        for (a, &i) in order.iter().enumerate() {
            for &j in &order[a + 1..] {
                let dx = self.points[j].re - self.points[i].re;
                if dx >= best {
                    break;
                }
                best = best.min((self.points[j] - self.points[i]).norm());
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,re,im")?;
        for (x, p) in self.params.iter().zip(&self.points) {
            writeln!(out, "{x:.16e},{:.16e},{:.16e}", p.re, p.im)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryOptions {
    /// Largest allowed distance between adjacent images; `None` means
    /// `10⁻²·(b − a)`.
    pub delta: Option<f64>,
    pub max_points: usize,
    pub integrator: IntegratorOptions,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions {
            delta: None,
            max_points: 20_000,
            integrator: IntegratorOptions::default(),
        }
    }
}

/// `n` equally spaced parameters on `[a, b]` mapped by `φ(s, t, ·)`, then
/// bisected wherever adjacent images are further apart than `delta`.
#[allow(clippy::too_many_arguments)]
pub fn boundary_curve<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    a: f64,
    b: f64,
    n: usize,
    opts: &BoundaryOptions,
) -> Result<BoundaryCurve> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(
            "a/b",
            format!("need a finite interval a < b, got [{a}, {b}]"),
        ));
    }
    if n < 2 {
        return Err(Error::invalid("n", "need at least two samples"));
    }
    let delta = opts.delta.unwrap_or(1e-2 * (b - a));
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", "must be > 0"));
    }
    let params: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let mut curve = boundary_curve_at(field, path, s, t, &params, &opts.integrator)?;

    // parameters closer than this cannot be split further in f64
    let min_gap = 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
    loop {
        let splits: Vec<usize> = (0..curve.len() - 1)
            .filter(|&i| {
                (curve.points[i + 1] - curve.points[i]).norm() > delta
                    && curve.params[i + 1] - curve.params[i] > min_gap
            })
            .collect();
        if splits.is_empty() {
            break;
        }
        if curve.len() + splits.len() > opts.max_points {
            curve.warnings.push(Warning::SubdivisionCap {
                points: curve.len(),
                cap: opts.max_points,
            });
            break;
        }
        let mids: Vec<f64> = splits
            .iter()
            .map(|&i| 0.5 * (curve.params[i] + curve.params[i + 1]))
            .collect();
        let span = grid_span(path, s, t)?;
        let images = mids
            .par_iter()
            .map(|&x| {
                flow_between(
                    field,
                    path,
                    span.start,
                    span.end,
                    Complex64::new(x, 0.0),
                    &opts.integrator,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let mut params = Vec::with_capacity(curve.len() + mids.len());
        let mut points = Vec::with_capacity(curve.len() + mids.len());
        let mut next = 0;
        for i in 0..curve.len() {
            params.push(curve.params[i]);
            points.push(curve.points[i]);
            if next < splits.len() && splits[next] == i {
                params.push(mids[next]);
                points.push(images[next]);
                next += 1;
            }
        }
        curve.params = params;
        curve.points = points;
    }
    Ok(curve)
}

/// `φ(s, t, x)` at the given real parameters, no refinement.
pub fn boundary_curve_at<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    params: &[f64],
    opts: &IntegratorOptions,
) -> Result<BoundaryCurve> {
    let span = grid_span(path, s, t)?;
    let points = params
        .par_iter()
        .map(|&x| flow_between(field, path, span.start, span.end, Complex64::new(x, 0.0), opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryCurve {
        s: path.time(span.start),
        t: path.time(span.end),
        params: params.to_vec(),
        points,
        warnings: span.warnings,
    })
}

/// `|φ(s, t, z) − φ(u, t, φ(s, u, z))|` on one driver.
pub fn check_flow_property<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    u: f64,
    t: f64,
    z: Complex64,
    opts: &IntegratorOptions,
) -> Result<f64> {
    if !(s <= u && u <= t) {
        return Err(Error::invalid("u", format!("need s <= u <= t, got {s}, {u}, {t}")));
    }
    let (ks, _) = path.snap(s)?;
    let (ku, _) = path.snap(u)?;
    let (kt, _) = path.snap(t)?;
    let direct = flow_between(field, path, ks, kt, z, opts)?;
    let mid = flow_between(field, path, ks, ku, z, opts)?;
    let composed = flow_between(field, path, ku, kt, mid, opts)?;
    Ok((direct - composed).norm())
}

/// `{(1−α)(t−s) + z^{1−α}}^{1/(1−α)}` with principal branches: the flow of
/// `ż = z^α` with no driver.
pub fn closed_form_power_flow(alpha: f64, s: f64, t: f64, z: Complex64) -> Result<Complex64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if !(t >= s) {
        return Err(Error::invalid("s/t", format!("need t >= s, got s = {s}, t = {t}")));
    }
    check_start(z)?;
    if t == s {
        return Ok(z);
    }
    let beta = 1.0 - alpha;
    let base = beta * (t - s) + pow_upper(z, beta);
    Ok(pow_upper(base, 1.0 / beta))
}
