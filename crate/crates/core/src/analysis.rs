//! Monte Carlo moment scaling, regularity diagnostics of boundary curves and
//! the resolvent transform `Φ`.
//!
//! Path `i` of an experiment is the Brownian driver seeded by
//! `derive_seed(master_seed, i)`. Paths run in parallel, results are gathered
//! in path order and reduced by pairwise summation, so every number depends
//! only on the configuration.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::derivative::j_series;
use crate::error::{Error, Result, Warning};
use crate::fields::HalfPlaneField;
use crate::flow::{flow_between, states_between, BoundaryCurve, IntegratorOptions};
use crate::paths::DriverPath;
use crate::rng::derive_seed;
use crate::stats::{jackknife_stderr, ols, pairwise_sum, pairwise_sum_complex};

/// Contiguous batches of paths for the jackknife standard error of slopes.
pub const JACKKNIFE_BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Lag in the start time: `φ(s, t, z)` against `φ(s + ℓ, t, z)`.
    TimeS,
    /// Lag in the end time: `φ(s, t, z)` against `φ(s, t + ℓ, z)`.
    TimeT,
    /// Real shift of the starting point(s), centred on the base point:
    /// `z − ℓ/2` against `z + ℓ/2`.
    Space,
}

impl Axis {
    pub fn parse(s: &str) -> Option<Axis> {
        match s {
            "time-s" | "s" => Some(Axis::TimeS),
            "time-t" | "t" => Some(Axis::TimeT),
            "space" | "z" => Some(Axis::Space),
            _ => None,
        }
    }
}

/// Driver grid and sample size of a Monte Carlo experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloSpec {
    pub n_paths: usize,
    pub master_seed: u64,
    pub step: f64,
    /// Drivers live on `[0, horizon]`.
    pub horizon: f64,
    pub scale: f64,
}

impl MonteCarloSpec {
    fn validate(&self) -> Result<usize> {
        if self.n_paths < 2 {
            return Err(Error::invalid("n_paths", "need at least two paths"));
        }
        if !(self.step > 0.0) || !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid("step/horizon", "step and horizon must be > 0"));
        }
        let n = (self.horizon / self.step).round();
        if n < 1.0 || ((n * self.step - self.horizon).abs() > 1e-9 * self.horizon) {
            return Err(Error::invalid(
                "step",
                format!("horizon {} is not a multiple of step {}", self.horizon, self.step),
            ));
        }
        Ok(n as usize)
    }

    pub fn path(&self, index: usize) -> Result<DriverPath> {
        let n = self.validate()?;
        DriverPath::sample_brownian(
            derive_seed(self.master_seed, index as u64),
            0.0,
            self.horizon,
            n,
            self.scale,
        )
    }
}

/// Runs `f` on every path; numerical failures censor the path.
fn run_paths<T: Send>(
    spec: &MonteCarloSpec,
    f: impl Fn(&DriverPath) -> Result<T> + Sync,
) -> Result<(Vec<Option<T>>, usize)> {
    spec.validate()?;
    let results = (0..spec.n_paths)
        .into_par_iter()
        .map(|i| {
            let path = spec.path(i)?;
            match f(&path) {
                Ok(v) => Ok(Some(v)),
                Err(e) if e.is_numerical() => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let censored = results.iter().filter(|r| r.is_none()).count();
    if censored == results.len() {
        return Err(Error::AllCensored);
    }
    Ok((results, censored))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub quantity: &'static str,
    pub field: String,
    pub p: f64,
    pub axis: Axis,
    pub s: f64,
    pub t: f64,
    pub z: Complex64,
    pub w: Option<Complex64>,
    pub lags: Vec<f64>,
    /// Mean of `|Δ|^p` per lag.
    pub estimates: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Jackknife over contiguous path batches.
    pub slope_stderr: f64,
    pub ols_stderr: f64,
    /// Exponent of the lag in the moment bound.
    pub bound_exponent: f64,
    pub n_paths: usize,
    pub censored: usize,
    pub master_seed: u64,
    pub step: f64,
    pub horizon: f64,
    pub warnings: Vec<Warning>,
}

impl MomentReport {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lag,estimate")?;
        for (l, e) in self.lags.iter().zip(&self.estimates) {
            writeln!(out, "{l:.16e},{e:.16e}")?;
        }
        Ok(())
    }
}

/// `count` lags log-spaced over `[lo, hi]`.
pub fn log_lags(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    crate::stats::log_spaced(lo, hi, count)
}

struct Lags {
    values: Vec<f64>,
    /// Grid steps per lag (time axes only).
    steps: Vec<usize>,
}

fn prepare_lags(axis: Axis, lags: &[f64], step: f64, warnings: &mut Vec<Warning>) -> Result<Lags> {
    if lags.len() < 2 {
        return Err(Error::InsufficientLags(format!(
            "got {} lag(s), need at least 2",
            lags.len()
        )));
    }
    if lags.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::invalid("lags", "every lag must be finite and > 0"));
    }
    let mut out = Lags {
        values: Vec::new(),
        steps: Vec::new(),
    };
    match axis {
        Axis::Space => {
            let mut v = lags.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            out.values = v;
        }
        Axis::TimeS | Axis::TimeT => {
            let mut steps: Vec<usize> = Vec::new();
            for &l in lags {
                let k = (l / step).round().max(1.0) as usize;
                if ((k as f64) * step - l).abs() > 1e-6 * step {
                    warnings.push(Warning::SnapToGrid {
                        requested: l,
                        snapped: k as f64 * step,
                    });
                }
                steps.push(k);
            }
            steps.sort_unstable();
            steps.dedup();
            out.values = steps.iter().map(|&k| k as f64 * step).collect();
            out.steps = steps;
        }
    }
    let (lo, hi) = (out.values[0], *out.values.last().unwrap());
    if out.values.len() < 2 || hi < 10.0 * lo * (1.0 - 1e-9) {
        return Err(Error::InsufficientLags(format!(
            "{} distinct lag(s) over [{lo}, {hi}]; need at least 2 spanning a decade",
            out.values.len()
        )));
    }
    Ok(out)
}

/// Regression of log-mean on log-lag, with the jackknife over path batches.
fn regress(lags: &[f64], samples: &[Vec<f64>]) -> Result<(Vec<f64>, f64, f64, f64, f64)> {
    let n_lags = lags.len();
    let means_of = |rows: &[&Vec<f64>]| -> Vec<f64> {
        (0..n_lags)
            .map(|j| {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                pairwise_sum(&col) / col.len() as f64
            })
            .collect()
    };
    let fit_of = |means: &[f64]| {
        let (x, y): (Vec<f64>, Vec<f64>) = lags
            .iter()
            .zip(means)
            .filter(|(_, &m)| m > 0.0 && m.is_finite())
            .map(|(l, m)| (l.ln(), m.ln()))
            .unzip();
        ols(&x, &y)
    };
    let all: Vec<&Vec<f64>> = samples.iter().collect();
    let estimates = means_of(&all);
    let fit = fit_of(&estimates)
        .ok_or_else(|| Error::InsufficientLags("fewer than two lags with a positive moment estimate".into()))?;
    let batches = JACKKNIFE_BATCHES.min(samples.len());
    let mut leave_out = Vec::with_capacity(batches);
    for b in 0..batches {
        let lo = b * samples.len() / batches;
        let hi = (b + 1) * samples.len() / batches;
        let rows: Vec<&Vec<f64>> = samples[..lo].iter().chain(&samples[hi..]).collect();
        if let Some(f) = fit_of(&means_of(&rows)) {
            leave_out.push(f.slope);
        }
    }
    Ok((
        estimates,
        fit.slope,
        fit.intercept,
        jackknife_stderr(&leave_out),
        fit.slope_stderr,
    ))
}

/// Base tuple of a moment experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasePoint {
    pub s: f64,
    pub t: f64,
    pub z: Complex64,
}

fn grid_index(spec: &MonteCarloSpec, t: f64, name: &'static str) -> Result<usize> {
    let x = t / spec.step;
    let k = x.round();
    if !(t >= 0.0) || (x - k).abs() > 1e-6 || t > spec.horizon * (1.0 + 1e-12) {
        return Err(Error::invalid(
            name,
            format!("{t} must be a grid time in [0, {}] at step {}", spec.horizon, spec.step),
        ));
    }
    Ok(k as usize)
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::invalid("p", format!("must be finite and >= 2, got {p}")));
    }
    Ok(())
}

/// `E|φ(s, t, z) − φ(lagged tuple)|^p` against the lag, with a log-log fit.
pub fn moment_scaling(
    field: &HalfPlaneField,
    p: f64,
    axis: Axis,
    base: BasePoint,
    lags: &[f64],
    spec: &MonteCarloSpec,
) -> Result<MomentReport> {
    check_p(p)?;
    spec.validate()?;
    let mut warnings = Vec::new();
    let lags = prepare_lags(axis, lags, spec.step, &mut warnings)?;
    let ks = grid_index(spec, base.s, "s")?;
    let kt = grid_index(spec, base.t, "t")?;
    if ks > kt {
        return Err(Error::invalid("s/t", "need s <= t"));
    }
    let max_steps = lags.steps.last().copied().unwrap_or(0);
    match axis {
        Axis::TimeT if kt + max_steps > spec.validate()? => {
            return Err(Error::invalid("lags", "t + largest lag exceeds the horizon"))
        }
        Axis::TimeS if ks + max_steps > kt => return Err(Error::invalid("lags", "s + largest lag exceeds t")),
        _ => {}
    }
    let opts = IntegratorOptions::default();
    let (rows, censored) = run_paths(spec, |path| {
        let phi = |k0: usize, k1: usize, z: Complex64| flow_between(field, path, k0, k1, z, &opts);
        let row: Vec<f64> = match axis {
            Axis::TimeT => {
                let states = states_between(field, path, ks, kt + max_steps, base.z, &opts)?;
                let b = states[kt - ks];
                lags.steps
                    .iter()
                    .map(|&k| (states[kt - ks + k] - b).norm().powf(p))
                    .collect()
            }
            Axis::TimeS => {
                let b = phi(ks, kt, base.z)?;
                lags.steps
                    .iter()
                    .map(|&k| Ok((phi(ks + k, kt, base.z)? - b).norm().powf(p)))
                    .collect::<Result<_>>()?
            }
            Axis::Space => lags
                .values
                .iter()
                .map(|&l| {
                    let a = phi(ks, kt, base.z - l / 2.0)?;
                    Ok((phi(ks, kt, base.z + l / 2.0)? - a).norm().powf(p))
                })
                .collect::<Result<_>>()?,
        };
        Ok(row)
    })?;
    let samples: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    if censored > 0 {
        warnings.push(Warning::Censoring {
            censored,
            total: spec.n_paths,
        });
    }
    let (estimates, slope, intercept, slope_stderr, ols_stderr) = regress(&lags.values, &samples)?;
    Ok(MomentReport {
        quantity: "phi",
        field: field.describe(),
        p,
        axis,
        s: base.s,
        t: base.t,
        z: base.z,
        w: None,
        lags: lags.values,
        estimates,
        slope,
        intercept,
        slope_stderr,
        ols_stderr,
        bound_exponent: match axis {
            Axis::Space => p,
            _ => p / 2.0,
        },
        n_paths: spec.n_paths,
        censored,
        master_seed: spec.master_seed,
        step: spec.step,
        horizon: spec.horizon,
        warnings,
    })
}

/// The same harness on increments of `J(s, t, z, w)`; the bound exponents
/// are `pα/2` (time) and `pα` (space) for a field of Hölder exponent `α`.
#[allow(clippy::too_many_arguments)]
pub fn j_moment_scaling(
    field: &HalfPlaneField,
    p: f64,
    axis: Axis,
    base: BasePoint,
    w: Complex64,
    lags: &[f64],
    theta_nodes: usize,
    spec: &MonteCarloSpec,
) -> Result<MomentReport> {
    check_p(p)?;
    if let HalfPlaneField::Iterated(_) = field {
        return Err(Error::Unsupported {
            operation: "j_moment_scaling",
            kind: "iterated",
        });
    }
    let n = spec.validate()?;
    let alpha = field.holder_exponent();
    let mut warnings = Vec::new();
    if p < 2.0 / alpha {
        warnings.push(Warning::MomentBelowThreshold {
            p,
            required: 2.0 / alpha,
        });
    }
    let lags = prepare_lags(axis, lags, spec.step, &mut warnings)?;
    let ks = grid_index(spec, base.s, "s")?;
    let kt = grid_index(spec, base.t, "t")?;
    if ks > kt {
        return Err(Error::invalid("s/t", "need s <= t"));
    }
    let max_steps = lags.steps.last().copied().unwrap_or(0);
    match axis {
        Axis::TimeT if kt + max_steps > n => return Err(Error::invalid("lags", "t + largest lag exceeds the horizon")),
        Axis::TimeS if ks + max_steps > kt => return Err(Error::invalid("lags", "s + largest lag exceeds t")),
        _ => {}
    }
    let dt = spec.step;
    let (rows, censored) = run_paths(spec, |path| {
        let j_at = |k0: usize, k1: usize, z: Complex64, w: Complex64| -> Result<Complex64> {
            let series = j_series(field, path, k0 as f64 * dt, k1 as f64 * dt, z, w, theta_nodes)?;
            Ok(*series.last().unwrap())
        };
        let row: Vec<f64> = match axis {
            Axis::TimeT => {
                let series = j_series(
                    field,
                    path,
                    ks as f64 * dt,
                    (kt + max_steps) as f64 * dt,
                    base.z,
                    w,
                    theta_nodes,
                )?;
                let b = series[kt - ks];
                lags.steps
                    .iter()
                    .map(|&k| (series[kt - ks + k] - b).norm().powf(p))
                    .collect()
            }
            Axis::TimeS => {
                let b = j_at(ks, kt, base.z, w)?;
                lags.steps
                    .iter()
                    .map(|&k| Ok((j_at(ks + k, kt, base.z, w)? - b).norm().powf(p)))
                    .collect::<Result<_>>()?
            }
            Axis::Space => lags
                .values
                .iter()
                .map(|&l| {
                    let a = j_at(ks, kt, base.z - l / 2.0, w - l / 2.0)?;
                    Ok((j_at(ks, kt, base.z + l / 2.0, w + l / 2.0)? - a).norm().powf(p))
                })
                .collect::<Result<_>>()?,
        };
        Ok(row)
    })?;
    let samples: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    if censored > 0 {
        warnings.push(Warning::Censoring {
            censored,
            total: spec.n_paths,
        });
    }
    let (estimates, slope, intercept, slope_stderr, ols_stderr) = regress(&lags.values, &samples)?;
    Ok(MomentReport {
        quantity: "j",
        field: field.describe(),
        p,
        axis,
        s: base.s,
        t: base.t,
        z: base.z,
        w: Some(w),
        lags: lags.values,
        estimates,
        slope,
        intercept,
        slope_stderr,
        ols_stderr,
        bound_exponent: match axis {
            Axis::Space => p * alpha,
            _ => p * alpha / 2.0,
        },
        n_paths: spec.n_paths,
        censored,
        master_seed: spec.master_seed,
        step: spec.step,
        horizon: spec.horizon,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerReport {
    pub center: f64,
    pub window: f64,
    /// Interior angle on the side of the image domain, in `(0, 2π)`.
    pub angle: f64,
    pub left_samples: usize,
    pub right_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    /// Regression slope clamped to `(0, 1]`.
    pub eta: f64,
    pub eta_raw: f64,
    pub band: (f64, f64),
    pub stderr: f64,
    pub gaps: Vec<f64>,
    pub moduli: Vec<f64>,
    pub corner: Option<CornerReport>,
}

const HOLDER_BLOCKS: usize = 8;
const MIN_CURVE_POINTS: usize = 100;

fn interpolate(curve: &BoundaryCurve, x: f64) -> Complex64 {
    let ps = &curve.params;
    let i = ps.partition_point(|&p| p <= x);
    if i == 0 {
        return curve.points[0];
    }
    if i == ps.len() {
        return *curve.points.last().unwrap();
    }
    let (a, b) = (ps[i - 1], ps[i]);
    let f = if b > a { (x - a) / (b - a) } else { 0.0 };
    curve.points[i - 1] + (curve.points[i] - curve.points[i - 1]) * f
}

/// Hölder exponent of `x ↦ φ(s, t, x)` from the maximal increment over dyadic
/// parameter gaps. The band is ±2 jackknife errors, leaving out one of eight
/// parameter blocks at a time.
pub fn holder_exponent(curve: &BoundaryCurve) -> Result<RegularityReport> {
    let n = curve.len();
    if n < MIN_CURVE_POINTS {
        return Err(Error::invalid(
            "curve",
            format!("need at least {MIN_CURVE_POINTS} points, got {n}"),
        ));
    }
    let first = curve.points[0];
    if curve.points.iter().all(|&p| p == first) {
        return Err(Error::DegenerateCurve);
    }
    let (a, b) = (curve.params[0], curve.params[n - 1]);
    let levels = ((n - 1) as f64).log2().floor() as u32;
    let m = 1usize << levels;
    let h = (b - a) / m as f64;
    let grid: Vec<Complex64> = (0..=m).map(|j| interpolate(curve, a + h * j as f64)).collect();

    // per gap: maximum over each block of starting indices
    let mut gaps = Vec::new();
    let mut block_max: Vec<Vec<f64>> = Vec::new();
    for level in 0..levels.saturating_sub(2) {
        let g = 1usize << level;
        let mut per_block = vec![0.0f64; HOLDER_BLOCKS];
        for j in 0..=(m - g) {
            let blk = (j * HOLDER_BLOCKS / (m - g + 1)).min(HOLDER_BLOCKS - 1);
            per_block[blk] = per_block[blk].max((grid[j + g] - grid[j]).norm());
        }
        gaps.push(g as f64 * h);
        block_max.push(per_block);
    }
    let slope_of = |skip: Option<usize>| -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = gaps
            .iter()
            .zip(&block_max)
            .filter_map(|(g, blocks)| {
                let mx = blocks
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| Some(*i) != skip)
                    .map(|(_, v)| *v)
                    .fold(0.0, f64::max);
                (mx > 0.0).then(|| (g.ln(), mx.ln()))
            })
            .unzip();
        ols(&x, &y).map(|f| f.slope)
    };
    let eta_raw = slope_of(None).ok_or(Error::DegenerateCurve)?;
    let leave_out: Vec<f64> = (0..HOLDER_BLOCKS).filter_map(|b| slope_of(Some(b))).collect();
    let stderr = jackknife_stderr(&leave_out);
    let moduli = block_max
        .iter()
        .map(|bl| bl.iter().copied().fold(0.0, f64::max))
        .collect();
    Ok(RegularityReport {
        eta: eta_raw.clamp(f64::MIN_POSITIVE, 1.0),
        eta_raw,
        band: (eta_raw - 2.0 * stderr, eta_raw + 2.0 * stderr),
        stderr,
        gaps,
        moduli,
        corner: None,
    })
}

pub const MIN_SIDE_SAMPLES: usize = 10;

/// Axis of the unit vectors `v/|v|` in the weighted least-squares sense,
/// oriented to point along them.
fn side_direction(vs: &[(Complex64, f64)]) -> Complex64 {
    let units: Vec<(Complex64, f64)> = vs
        .iter()
        .filter(|(v, _)| v.norm() > 0.0)
        .map(|&(v, wt)| (v / v.norm(), wt))
        .collect();
    let sq: Vec<Complex64> = units.iter().map(|&(u, wt)| u * u * wt).collect();
    let axis = Complex64::from_polar(1.0, 0.5 * pairwise_sum_complex(&sq).arg());
    let along: Vec<Complex64> = units.iter().map(|&(u, wt)| u * wt).collect();
    if (axis.conj() * pairwise_sum_complex(&along)).re < 0.0 {
        -axis
    } else {
        axis
    }
}

/// Interior angle of the curve at the image of `center_param`, from tangent
/// directions fitted on `[c − window, c)` and `(c, c + window]`. A straight
/// curve gives `π`.
pub fn corner_angle(curve: &BoundaryCurve, center_param: f64, window: f64) -> Result<CornerReport> {
    if !(window > 0.0) {
        return Err(Error::invalid("window", "must be > 0"));
    }
    let pc = interpolate(curve, center_param);
    // offsets from the centre, with samples on the window edge counted in,
    // so that relabelling the parameters cannot move a sample across it
    let edge = window * (1.0 + 1e-9);
    let ds: Vec<f64> = curve.params.iter().map(|&x| x - center_param).collect();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, (&d, p)) in ds.iter().zip(&curve.points).enumerate() {
        let in_left = d >= -edge && d < 0.0;
        let in_right = d > 0.0 && d <= edge;
        if !(in_left || in_right) {
            continue;
        }
        // parameter cell of the sample, clipped to its side of the window, so
        // that uneven sampling does not bias the fit toward dense regions
        let (a, b) = if in_left { (-window, 0.0) } else { (0.0, window) };
        let prev = if i > 0 { ds[i - 1] } else { d };
        let next = if i + 1 < ds.len() { ds[i + 1] } else { d };
        let cell = (0.5 * (d + next)).min(b) - (0.5 * (prev + d)).max(a);
        let entry = (p - pc, cell.max(0.0));
        if in_left {
            left.push(entry);
        } else {
            right.push(entry);
        }
    }
    if left.len() < MIN_SIDE_SAMPLES || right.len() < MIN_SIDE_SAMPLES {
        return Err(Error::WindowTooSmall {
            center: center_param,
            window,
            left: left.len(),
            right: right.len(),
            required: MIN_SIDE_SAMPLES,
        });
    }
    let dl = side_direction(&left);
    let dr = side_direction(&right);
    let mut angle = (dl / dr).arg();
    if angle <= 0.0 {
        angle += 2.0 * PI;
    }
    Ok(CornerReport {
        center: center_param,
        window,
        angle,
        left_samples: left.len(),
        right_samples: right.len(),
    })
}

/// `corner_angle` over a sequence of windows, in the given order.
pub fn corner_angle_sequence(curve: &BoundaryCurve, center_param: f64, windows: &[f64]) -> Result<Vec<CornerReport>> {
    windows.iter().map(|&w| corner_angle(curve, center_param, w)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiReport {
    pub field: String,
    pub lambda: f64,
    pub z: Complex64,
    pub phi: Complex64,
    /// Standard error of the real and imaginary parts.
    pub stderr: (f64, f64),
    /// `½Φ″ + FΦ′ − λ(Φ − z)` by central differences with common drivers.
    pub residual: Complex64,
    pub fd_step: f64,
    pub n_paths: usize,
    pub censored: usize,
    pub master_seed: u64,
    pub step: f64,
    pub horizon: f64,
    pub warnings: Vec<Warning>,
}

/// Tail bound below which truncating the time integral is not reported.
pub const TRUNCATION_TOL: f64 = 1e-6;

/// `∫_0^T e^{−λr} F(φ(0, r, z)) dr` with `F∘φ` linear between grid points and
/// the exponential weight integrated exactly.
fn weighted_integral(values: &[Complex64], lambda: f64, dt: f64) -> Complex64 {
    // ∫_0^Δ e^{−λr}(1 − r/Δ) dr and ∫_0^Δ e^{−λr} r/Δ dr
    let x = lambda * dt;
    let (w_left, w_right) = if x < 1e-4 {
        (dt * (0.5 - x / 6.0 + x * x / 24.0), dt * (0.5 - x / 3.0 + x * x / 8.0))
    } else {
        let e = (-x).exp();
        ((x - 1.0 + e) / (lambda * x), (1.0 - e - x * e) / (lambda * x))
    };
    let decay = (-x).exp();
    let mut weight = 1.0;
    let terms: Vec<Complex64> = values
        .windows(2)
        .map(|v| {
            let term = weight * (w_left * v[0] + w_right * v[1]);
            weight *= decay;
            term
        })
        .collect();
    pairwise_sum_complex(&terms)
}

/// Monte Carlo estimate of `Φ(z) = z + ∫_0^∞ e^{−λr} E[F(φ(0, r, z))] dr`
/// truncated at the horizon of `spec`.
pub fn phi_transform_estimate(
    field: &HalfPlaneField,
    lambda: f64,
    z: Complex64,
    spec: &MonteCarloSpec,
) -> Result<PhiReport> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(
            "lambda",
            format!("must be finite and > 0, got {lambda}"),
        ));
    }
    let n = spec.validate()?;
    let mut warnings = Vec::new();
    let bound = field.sup_bound();
    let tail = bound.map(|b| b * (-lambda * spec.horizon).exp() / lambda);
    if tail.is_none_or(|t| t > TRUNCATION_TOL) {
        warnings.push(Warning::Truncation {
            horizon: spec.horizon,
            bound,
            tail: tail.unwrap_or(f64::INFINITY),
        });
    }
    let h = 1e-3 * z.norm().max(1.0);
    let probes = [z, z + h, z - h];
    let opts = IntegratorOptions::default();
    let (rows, censored) = run_paths(spec, |path| {
        probes
            .iter()
            .map(|&z0| {
                let states = states_between(field, path, 0, n, z0, &opts)?;
                let f = states.iter().map(|&x| field.eval(x)).collect::<Result<Vec<_>>>()?;
                Ok(weighted_integral(&f, lambda, spec.step))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let kept: Vec<Vec<Complex64>> = rows.into_iter().flatten().collect();
    if censored > 0 {
        warnings.push(Warning::Censoring {
            censored,
            total: spec.n_paths,
        });
    }
    let m = kept.len() as f64;
    let mean_at = |j: usize| pairwise_sum_complex(&kept.iter().map(|r| r[j]).collect::<Vec<_>>()) / m;
    let phis: Vec<Complex64> = (0..3).map(|j| probes[j] + mean_at(j)).collect();
    let var = |part: fn(&Complex64) -> f64| {
        let mu = part(&(phis[0] - z));
        pairwise_sum(&kept.iter().map(|r| (part(&r[0]) - mu).powi(2)).collect::<Vec<_>>()) / (m - 1.0)
    };
    let stderr = if m > 1.0 {
        ((var(|c| c.re) / m).sqrt(), (var(|c| c.im) / m).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    let d1 = (phis[1] - phis[2]) / (2.0 * h);
    let d2 = (phis[1] - 2.0 * phis[0] + phis[2]) / (h * h);
    let residual = 0.5 * d2 + field.eval(z)? * d1 - lambda * (phis[0] - z);
    Ok(PhiReport {
        field: field.describe(),
        lambda,
        z,
        phi: phis[0],
        stderr,
        residual,
        fd_step: h,
        n_paths: spec.n_paths,
        censored,
        master_seed: spec.master_seed,
        step: spec.step,
        horizon: spec.horizon,
        warnings,
    })
}
