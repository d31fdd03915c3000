//! Chordal Loewner chains in the upper half-plane.
//!
//! The driver is held constant on each grid step, where the Loewner equation
//! `∂_t g = 2/(g − U)` is solved exactly by the slit map
//! `g ← U_k + sqrt((g − U_k)² + 4Δt)`. The reverse flow applies the exact
//! inverse of the same maps, so forward and reverse agree to rounding.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result, Warning};
use crate::flow::Trajectory;
use crate::paths::DriverPath;

/// Relative width of the band around the negative real axis in which
/// `h² + 4τ` is treated as hitting zero.
const CUT_TOL: f64 = 1e-10;
const SINGULAR_TOL: f64 = 1e-9;

/// Square root in the closed upper half-plane. On the real axis the sign is
/// taken from `like`, which keeps real points on their side of the driver.
fn sqrt_upper(w: Complex64, like: Complex64) -> Complex64 {
    if w.im == 0.0 {
        if w.re >= 0.0 {
            let r = w.re.sqrt();
            return Complex64::new(if like.re < 0.0 { -r } else { r }, 0.0);
        }
        return Complex64::new(0.0, (-w.re).sqrt());
    }
    let r = w.sqrt();
    if r.im < 0.0 {
        -r
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ForwardOutcome {
    Value { g: Complex64 },
    Swallowed { time: f64 },
}

impl ForwardOutcome {
    pub fn value(&self) -> Option<Complex64> {
        match *self {
            ForwardOutcome::Value { g } => Some(g),
            ForwardOutcome::Swallowed { .. } => None,
        }
    }
}

fn check_point(z: Complex64) -> Result<()> {
    if z.im < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain { z });
    }
    Ok(())
}

/// `g_t(z)`, or the time at which `z` is swallowed, from `g_{t0} = z`.
pub fn forward_lde(driver: &DriverPath, z: Complex64, t: f64) -> Result<ForwardOutcome> {
    check_point(z)?;
    let (n, _) = driver.snap(t)?;
    forward_steps(driver, z, n)
}

fn forward_steps(driver: &DriverPath, z: Complex64, n: usize) -> Result<ForwardOutcome> {
    if z == Complex64::new(0.0, 0.0) {
        return Ok(ForwardOutcome::Swallowed { time: driver.t0() });
    }
    let dt = driver.dt();
    let u = driver.values();
    let mut g = z;
    for k in 0..n {
        let h = g - u[k];
        if g.im == 0.0 {
            // a real point is swallowed when the driver reaches it
            let prev = if k == 0 { 0.0 } else { u[k - 1] };
            let before = g.re - prev;
            if h.re == 0.0 || (k > 0 && before != 0.0 && h.re.signum() != before.signum()) {
                let frac = if k == 0 || u[k] == prev {
                    1.0
                } else {
                    (g.re - prev) / (u[k] - prev)
                };
                let t_prev = if k == 0 { driver.t0() } else { driver.time(k - 1) };
                return Ok(ForwardOutcome::Swallowed {
                    time: t_prev + frac.clamp(0.0, 1.0) * (driver.time(k) - t_prev),
                });
            }
        } else {
            let h2 = h * h;
            let band = CUT_TOL * h2.norm().max(4.0 * dt);
            if h2.im.abs() <= band && h2.re < 0.0 && -h2.re <= 4.0 * dt {
                return Ok(ForwardOutcome::Swallowed {
                    time: driver.time(k) + (-h2.re) / 4.0,
                });
            }
        }
        g = u[k] + sqrt_upper(h * h + 4.0 * dt, h);
    }
    // a real point the driver lands on exactly at the final time
    if g.im == 0.0 && n > 0 && g.re == u[n] {
        return Ok(ForwardOutcome::Swallowed { time: driver.time(n) });
    }
    Ok(ForwardOutcome::Value { g })
}

/// `h_s(z)` for `s` on the grid of `[0, t − t0]`; the last state is
/// `ĥ_t(z) = g_t^{-1}(z + U_t)`.
pub fn reverse_lde(driver: &DriverPath, t: f64, z: Complex64) -> Result<Trajectory> {
    check_point(z)?;
    let (n, warning) = driver.snap(t)?;
    let dt = driver.dt();
    let u = driver.values();
    let mut states = Vec::with_capacity(n + 1);
    let mut h = z;
    states.push(h);
    for j in 0..n {
        // increment of the reversed driver s ↦ U_t − U_{t−s}
        h += u[n - j] - u[n - j - 1];
        h = sqrt_upper(h * h - 4.0 * dt, h);
        if h.norm() < SINGULAR_TOL {
            return Err(Error::SingularStep {
                time: driver.t0() + (j + 1) as f64 * dt,
                z: h,
                singularity: Complex64::new(0.0, 0.0),
                tolerance: SINGULAR_TOL,
            });
        }
        states.push(h);
    }
    Ok(Trajectory {
        s: 0.0,
        times: (0..=n).map(|j| j as f64 * dt).collect(),
        states,
        field: "loewner reverse flow".to_string(),
        path_seed: driver.seed(),
        step: dt,
        warnings: warning.into_iter().collect(),
    })
}

fn hat_h(driver: &DriverPath, n: usize, z: Complex64) -> Result<Complex64> {
    let dt = driver.dt();
    let u = driver.values();
    let mut h = z;
    for j in 0..n {
        h += u[n - j] - u[n - j - 1];
        h = sqrt_upper(h * h - 4.0 * dt, h);
        if h.norm() < SINGULAR_TOL {
            return Err(Error::SingularStep {
                time: driver.t0() + (j + 1) as f64 * dt,
                z: h,
                singularity: Complex64::new(0.0, 0.0),
                tolerance: SINGULAR_TOL,
            });
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    /// Richardson combination `(4γ_{ε/2} − γ_ε)/3`.
    pub gamma: Complex64,
    pub eps: f64,
    pub gamma_eps: Complex64,
    pub gamma_half: Complex64,
    /// `|γ_ε − γ_{ε/2}|`.
    pub error_proxy: f64,
}

/// `γ_t ≈ ĥ_t(iε)` at `ε = √step` and `ε/2`, extrapolated.
pub fn trace(driver: &DriverPath, times: &[f64]) -> Result<(Vec<TracePoint>, Vec<Warning>)> {
    trace_with_eps(driver, times, driver.dt().sqrt())
}

pub fn trace_with_eps(driver: &DriverPath, times: &[f64], eps: f64) -> Result<(Vec<TracePoint>, Vec<Warning>)> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", format!("must be > 0, got {eps}")));
    }
    let mut warnings = Vec::new();
    let mut idx = Vec::with_capacity(times.len());
    for &t in times {
        let (n, w) = driver.snap(t)?;
        warnings.extend(w);
        idx.push(n);
    }
    let points = idx
        .par_iter()
        .map(|&n| {
            let t = driver.time(n);
            if n == 0 {
                let zero = Complex64::new(0.0, 0.0);
                return Ok(TracePoint {
                    t,
                    gamma: zero,
                    eps,
                    gamma_eps: zero,
                    gamma_half: zero,
                    error_proxy: 0.0,
                });
            }
            let a = hat_h(driver, n, Complex64::new(0.0, eps))?;
            let b = hat_h(driver, n, Complex64::new(0.0, 0.5 * eps))?;
            let mut gamma = (4.0 * b - a) / 3.0;
            gamma.im = gamma.im.max(0.0);
            Ok(TracePoint {
                t,
                gamma,
                eps,
                gamma_eps: a,
                gamma_half: b,
                error_proxy: (a - b).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((points, warnings))
}

pub fn write_trace_csv<W: Write>(points: &[TracePoint], mut out: W) -> io::Result<()> {
    writeln!(out, "t,re,im")?;
    for p in points {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", p.t, p.gamma.re, p.gamma.im)?;
    }
    Ok(())
}

/// `b̂_t` from two probes at radius `R`: `z = R·e^{iπ/4}` and `−z̄`. Averaging
/// `Re[(g(ζ) − ζ)ζ]` over the pair cancels the `1/ζ²` and `1/ζ³` terms.
pub fn hcap_estimate(driver: &DriverPath, t: f64, probe_radius: f64) -> Result<f64> {
    if !(probe_radius > 0.0) || !probe_radius.is_finite() {
        return Err(Error::invalid(
            "probe_radius",
            format!("must be finite and > 0, got {probe_radius}"),
        ));
    }
    let (n, _) = driver.snap(t)?;
    if n == 0 {
        return Ok(0.0);
    }
    let z = Complex64::from_polar(probe_radius, std::f64::consts::FRAC_PI_4);
    let zp = -z.conj();
    let mut acc = 0.0;
    for probe in [z, zp] {
        match forward_steps(driver, probe, n)? {
            ForwardOutcome::Value { g } => acc += ((g - probe) * probe).re,
            ForwardOutcome::Swallowed { .. } => {
                return Err(Error::invalid(
                    "probe_radius",
                    format!("probe at radius {probe_radius} was swallowed; increase it"),
                ))
            }
        }
    }
    Ok(0.5 * acc)
}

/// `T_z`, or `+∞` if `z` survives to the end of the driver.
pub fn swallowing_time(driver: &DriverPath, z: Complex64) -> Result<f64> {
    check_point(z)?;
    Ok(match forward_steps(driver, z, driver.n_steps())? {
        ForwardOutcome::Swallowed { time } => time,
        ForwardOutcome::Value { .. } => f64::INFINITY,
    })
}

/// `T_z ≤ t` for each grid point.
pub fn hull(driver: &DriverPath, t: f64, grid: &[Complex64]) -> Result<Vec<bool>> {
    driver.snap(t)?;
    let times = grid
        .par_iter()
        .map(|&z| swallowing_time(driver, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(times.into_iter().map(|tz| tz <= t).collect())
}

pub fn write_hull_csv<W: Write>(grid: &[Complex64], member: &[bool], mut out: W) -> io::Result<()> {
    writeln!(out, "re,im,member")?;
    for (z, m) in grid.iter().zip(member) {
        writeln!(out, "{:.16e},{:.16e},{}", z.re, z.im, u8::from(*m))?;
    }
    Ok(())
}

/// A driver together with everything evaluated on it.
#[derive(Debug, Clone, Serialize)]
pub struct LoewnerChain {
    pub driver: DriverPath,
    pub horizon: f64,
    pub forward: Vec<(f64, Complex64, ForwardOutcome)>,
    pub reverse: Vec<(f64, Complex64, Complex64)>,
    pub hcap: Vec<(f64, f64)>,
    pub trace: Vec<TracePoint>,
    pub swallowing: Vec<(Complex64, f64)>,
    pub warnings: Vec<Warning>,
}

impl LoewnerChain {
    pub fn new(driver: DriverPath) -> Self {
        let horizon = driver.t1();
        LoewnerChain {
            driver,
            horizon,
            forward: Vec::new(),
            reverse: Vec::new(),
            hcap: Vec::new(),
            trace: Vec::new(),
            swallowing: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn g(&mut self, z: Complex64, t: f64) -> Result<ForwardOutcome> {
        let out = forward_lde(&self.driver, z, t)?;
        self.forward.push((t, z, out));
        Ok(out)
    }

    pub fn h_hat(&mut self, t: f64, z: Complex64) -> Result<Complex64> {
        let traj = reverse_lde(&self.driver, t, z)?;
        self.warnings.extend(traj.warnings.iter().cloned());
        let v = traj.last();
        self.reverse.push((t, z, v));
        Ok(v)
    }

    pub fn hcap(&mut self, t: f64, probe_radius: f64) -> Result<f64> {
        let b = hcap_estimate(&self.driver, t, probe_radius)?;
        self.hcap.push((t, b));
        Ok(b)
    }

    pub fn trace_at(&mut self, times: &[f64]) -> Result<&[TracePoint]> {
        let (points, warnings) = trace(&self.driver, times)?;
        let start = self.trace.len();
        self.trace.extend(points);
        self.warnings.extend(warnings);
        Ok(&self.trace[start..])
    }

    pub fn swallowing_time(&mut self, z: Complex64) -> Result<f64> {
        let tz = swallowing_time(&self.driver, z)?;
        self.swallowing.push((z, tz));
        Ok(tz)
    }
}
