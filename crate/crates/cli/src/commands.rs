//! One function per command. Each reads its keys from the config, runs the
//! library operation, writes data files and returns headline numbers for the
//! manifest.

use std::f64::consts::PI;
use std::io::Write;

use clap::ValueEnum;
use planar_flow::analysis::{
    corner_angle_sequence, holder_exponent, j_moment_scaling, log_lags, moment_scaling, phi_transform_estimate, Axis,
    BasePoint, CornerReport, MomentReport, MonteCarloSpec,
};
use planar_flow::derivative::{
    compute_v, derivative_field, finite_difference_derivative, identity_residual, DerivativeReport,
};
use planar_flow::flow::{boundary_curve_at, integrate_with, BoundaryOptions};
use planar_flow::loewner::{hcap_estimate, hull, trace_with_eps, write_hull_csv, write_trace_csv};
use planar_flow::{
    boundary_curve, iterate_field, shift_field, Atom, Complex64, DriverPath, HalfPlaneField, IntegratorOptions, Warning,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::Output;
use crate::svg::{Item, Style};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Boundary,
    Derivative,
    IdentityCheck,
    Moments,
    JMoments,
    LoewnerTrace,
    Hull,
    Hcap,
    CornerDemo,
    PhiEstimate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Boundary => "boundary",
            Command::Derivative => "derivative",
            Command::IdentityCheck => "identity-check",
            Command::Moments => "moments",
            Command::JMoments => "j-moments",
            Command::LoewnerTrace => "loewner-trace",
            Command::Hull => "hull",
            Command::Hcap => "hcap",
            Command::CornerDemo => "corner-demo",
            Command::PhiEstimate => "phi-estimate",
        }
    }
}

/// What a command hands back to the manifest.
pub struct Outcome {
    pub warnings: Vec<Warning>,
    pub summary: Value,
}

pub fn dispatch(command: Command, cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let outcome = match command {
        Command::Simulate => simulate(cfg, out),
        Command::Boundary => boundary(cfg, out),
        Command::Derivative => derivative(cfg, out),
        Command::IdentityCheck => identity_check(cfg, out),
        Command::Moments => moments(cfg, out, false),
        Command::JMoments => moments(cfg, out, true),
        Command::LoewnerTrace => loewner_trace(cfg, out),
        Command::Hull => hull_cmd(cfg, out),
        Command::Hcap => hcap(cfg, out),
        Command::CornerDemo => corner_demo(cfg, out),
        Command::PhiEstimate => phi_estimate(cfg, out),
    }?;
    Ok(outcome)
}

fn base_field(cfg: &RunConfig, kind: &str) -> Result<HalfPlaneField, CliError> {
    Ok(match kind {
        "herglotz" => {
            let atoms = cfg
                .atoms("field", "atoms")?
                .into_iter()
                .map(|(location, weight)| Atom { location, weight })
                .collect();
            HalfPlaneField::herglotz(cfg.f64_or("field", "c", 0.0)?, cfg.f64_or("field", "d", 0.0)?, atoms)?
        }
        "power" => HalfPlaneField::power(cfg.f64("field", "alpha")?)?,
        "inversion" => HalfPlaneField::inversion(cfg.f64("field", "kappa")?)?,
        "constant" => HalfPlaneField::constant(cfg.complex("field", "c")?)?,
        other => {
            return Err(CliError::Config(format!(
                "`field.kind`: unknown field kind `{other}` (expected herglotz, power, inversion, constant or iterated)"
            )))
        }
    })
}

pub fn build_field(cfg: &RunConfig) -> Result<HalfPlaneField, CliError> {
    let kind = cfg.string("field", "kind")?;
    let mut field = if kind == "iterated" {
        let base = base_field(cfg, &cfg.string("field", "base")?)?;
        let depth = cfg.usize_or("field", "depth", 1)?;
        let step = cfg.f64_or("field", "iter_step", 1e-3)?;
        let n = (1.0 / step).round().max(1.0) as usize;
        let path = if cfg.has("field", "iter_seed") {
            DriverPath::sample_brownian(
                cfg.u64("field", "iter_seed")?,
                0.0,
                1.0,
                n,
                cfg.f64_or("field", "iter_scale", 1.0)?,
            )?
        } else {
            DriverPath::zero(0.0, 1.0, n)?
        };
        iterate_field(&base, &path, depth, step)?
    } else {
        base_field(cfg, &kind)?
    };
    if let Some(y) = cfg.opt_f64("field", "shift_y")? {
        field = shift_field(&field, y)?;
    }
    Ok(field)
}

pub fn build_driver(cfg: &RunConfig) -> Result<DriverPath, CliError> {
    let kind = cfg.str_or("driver", "kind", "brownian").to_string();
    let t0 = cfg.f64_or("driver", "t0", 0.0)?;
    let t1 = cfg.f64_or("driver", "t1", 1.0)?;
    let n = grid_steps(cfg, t0, t1)?;
    match kind.as_str() {
        "zero" => Ok(DriverPath::zero(t0, t1, n)?),
        "brownian" => {
            let scale = if cfg.has("driver", "kappa") {
                let kappa = cfg.f64("driver", "kappa")?;
                if !(kappa >= 0.0) {
                    return Err(CliError::Config(format!("`driver.kappa`: must be >= 0, got {kappa}")));
                }
                kappa.sqrt()
            } else {
                cfg.f64_or("driver", "scale", 1.0)?
            };
            Ok(DriverPath::sample_brownian(
                cfg.u64("driver", "seed")?,
                t0,
                t1,
                n,
                scale,
            )?)
        }
        "custom" => Ok(DriverPath::custom(t0, t1, cfg.f64_list("driver", "values")?)?),
        other => Err(CliError::Config(format!(
            "`driver.kind`: unknown driver `{other}` (expected brownian, zero or custom)"
        ))),
    }
}

fn grid_steps(cfg: &RunConfig, t0: f64, t1: f64) -> Result<usize, CliError> {
    if cfg.str_or("driver", "kind", "brownian") == "custom" {
        return Ok(0);
    }
    let step = cfg.f64_or("driver", "step", 1e-3)?;
    if !(step > 0.0) || !(t1 > t0) {
        return Err(CliError::Config(format!(
            "`driver.step`: need step > 0 and t1 > t0, got step {step} on [{t0}, {t1}]"
        )));
    }
    let n = ((t1 - t0) / step).round();
    if n < 1.0 || (n * step - (t1 - t0)).abs() > 1e-9 * (t1 - t0) {
        return Err(CliError::Config(format!(
            "`driver.step`: {step} does not divide [{t0}, {t1}] into whole steps"
        )));
    }
    Ok(n as usize)
}

fn monte_carlo(cfg: &RunConfig) -> Result<MonteCarloSpec, CliError> {
    let t0 = cfg.f64_or("driver", "t0", 0.0)?;
    if t0 != 0.0 {
        return Err(CliError::Config("`driver.t0`: Monte Carlo drivers start at 0".into()));
    }
    if cfg.str_or("driver", "kind", "brownian") != "brownian" {
        return Err(CliError::Config(
            "`driver.kind`: Monte Carlo experiments need brownian drivers".into(),
        ));
    }
    let horizon = cfg.f64_or("driver", "t1", 1.0)?;
    grid_steps(cfg, 0.0, horizon)?;
    let scale = if cfg.has("driver", "kappa") {
        cfg.f64("driver", "kappa")?.sqrt()
    } else {
        cfg.f64_or("driver", "scale", 1.0)?
    };
    let master_seed = if cfg.has("experiment", "master_seed") {
        cfg.u64("experiment", "master_seed")?
    } else {
        cfg.u64("driver", "seed")?
    };
    Ok(MonteCarloSpec {
        n_paths: cfg.usize_or("experiment", "n_paths", 2000)?,
        master_seed,
        step: cfg.f64_or("driver", "step", 1e-3)?,
        horizon,
        scale,
    })
}

fn span(cfg: &RunConfig, driver: &DriverPath) -> Result<(f64, f64), CliError> {
    Ok((
        cfg.f64_or("experiment", "s", driver.t0())?,
        cfg.f64_or("experiment", "t", driver.t1())?,
    ))
}

fn c(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn e(x: f64) -> String {
    format!("{x:.16e}")
}

fn simulate(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let field = build_field(cfg)?;
    let driver = build_driver(cfg)?;
    let (s, t) = span(cfg, &driver)?;
    let zs = cfg.complex_list("experiment", "z")?;
    let opts = IntegratorOptions::default();
    let mut trajectories = Vec::with_capacity(zs.len());
    for &z in &zs {
        trajectories.push(integrate_with(&field, &driver, s, t, z, &opts)?);
    }
    out.csv("path.csv", |w| driver.write_csv(w))?;
    out.csv("trajectories.csv", |w| {
        writeln!(w, "point,t,re,im")?;
        for (i, tr) in trajectories.iter().enumerate() {
            for (t, z) in tr.times.iter().zip(&tr.states) {
                writeln!(w, "{i},{},{},{}", e(*t), e(z.re), e(z.im))?;
            }
        }
        Ok(())
    })?;
    let finals: Vec<Value> = zs
        .iter()
        .zip(&trajectories)
        .map(|(z, tr)| json!({ "z": c(*z), "final": c(tr.last()), "steps": tr.states.len() - 1 }))
        .collect();
    out.json(
        "simulate.json",
        &json!({
            "field": field.describe(),
            "seed": driver.seed(),
            "step": driver.dt(),
            "s": trajectories.first().map(|tr| tr.s),
            "t": t,
            "points": finals,
        }),
    )?;
    let items: Vec<Item> = trajectories
        .iter()
        .enumerate()
        .map(|(i, tr)| Item::Polyline {
            points: tr.states.clone(),
            label: format!("z{i}"),
        })
        .collect();
    out.svg("trajectories.svg", &items, &Style::default())?;
    let warnings = trajectories.iter().flat_map(|tr| tr.warnings.clone()).collect();
    Ok(Outcome {
        warnings,
        summary: json!({ "points": finals }),
    })
}

fn boundary(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let field = build_field(cfg)?;
    let driver = build_driver(cfg)?;
    let (s, t) = span(cfg, &driver)?;
    let a = cfg.f64("experiment", "a")?;
    let b = cfg.f64("experiment", "b")?;
    let n = cfg.usize_or("experiment", "n", 100)?;
    let opts = BoundaryOptions {
        delta: cfg.opt_f64("experiment", "delta")?,
        max_points: cfg.usize_or("experiment", "max_points", 20_000)?,
        integrator: IntegratorOptions::default(),
    };
    let curve = boundary_curve(&field, &driver, s, t, a, b, n, &opts)?;
    let regularity = if cfg.bool_or("experiment", "holder", false)? {
        Some(holder_exponent(&curve)?)
    } else {
        None
    };
    out.csv("boundary.csv", |w| curve.write_csv(w))?;
    let meta = json!({
        "field": field.describe(),
        "seed": driver.seed(),
        "step": driver.dt(),
        "s": curve.s,
        "t": curve.t,
        "a": a,
        "b": b,
        "points": curve.len(),
        "min_separation": curve.min_separation(),
        "regularity": regularity,
        "warnings": curve.warnings,
    });
    out.json("boundary.json", &meta)?;
    out.svg(
        "boundary.svg",
        &[Item::Polyline {
            points: curve.points.clone(),
            label: "boundary".into(),
        }],
        &Style::default(),
    )?;
    Ok(Outcome {
        warnings: curve.warnings.clone(),
        summary: json!({ "points": curve.len(), "min_separation": curve.min_separation(), "regularity": regularity }),
    })
}

fn is_iterated(field: &HalfPlaneField) -> bool {
    matches!(field, HalfPlaneField::Iterated(_))
}

fn derivative(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let field = build_field(cfg)?;
    let driver = build_driver(cfg)?;
    let (s, t) = span(cfg, &driver)?;
    let zs = cfg.complex_list("experiment", "z")?;
    let nodes = cfg.usize_or("experiment", "theta_nodes", 16)?;
    let fd_h = cfg.f64_or("experiment", "fd_h", 1e-6)?;
    let mut rows = Vec::new();
    let mut reports: Vec<DerivativeReport> = Vec::new();
    let mut warnings = Vec::new();
    for &z in &zs {
        if is_iterated(&field) {
            // no antiderivative: difference quotient instead of exp V
            rows.push((
                z,
                finite_difference_derivative(&field, &driver, s, t, z, fd_h)?,
                "finite-difference",
            ));
        } else {
            let rep = compute_v(&field, &driver, s, t, z, z, nodes)?;
            warnings.extend(rep.warnings.clone());
            rows.push((z, rep.phi_prime.unwrap_or_else(|| rep.v_val.exp()), "exponential"));
            reports.push(rep);
        }
    }
    out.csv("derivative.csv", |w| {
        writeln!(w, "re_z,im_z,re_dphi,im_dphi")?;
        for (z, d, _) in &rows {
            writeln!(w, "{},{},{},{}", e(z.re), e(z.im), e(d.re), e(d.im))?;
        }
        Ok(())
    })?;
    if cfg.has("experiment", "a") {
        let a = cfg.f64("experiment", "a")?;
        let b = cfg.f64("experiment", "b")?;
        let n = cfg.usize_or("experiment", "n", 101)?;
        if n < 2 || !(a < b) {
            return Err(CliError::Config(
                "`experiment.n`: the derivative grid needs n >= 2 and a < b".into(),
            ));
        }
        let params: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        let df = derivative_field(&field, &driver, s, t, &params)?;
        out.csv("derivative_field.csv", |w| df.write_csv(w))?;
    }
    let values: Vec<Value> = rows
        .iter()
        .map(|(z, d, method)| json!({ "z": c(*z), "phi_prime": c(*d), "method": method }))
        .collect();
    out.json("derivative.json", &json!({ "field": field.describe(), "seed": driver.seed(), "step": driver.dt(), "values": values, "reports": reports }))?;
    Ok(Outcome {
        warnings,
        summary: json!({ "values": values }),
    })
}

fn identity_check(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let field = build_field(cfg)?;
    let driver = build_driver(cfg)?;
    let (s, t) = span(cfg, &driver)?;
    let zs = cfg.complex_list("experiment", "z")?;
    let ws = cfg.complex_list("experiment", "w")?;
    if zs.len() != ws.len() {
        return Err(CliError::Config(format!(
            "`experiment.w`: {} values for {} values of experiment.z",
            ws.len(),
            zs.len()
        )));
    }
    let nodes = cfg.usize_or("experiment", "theta_nodes", 16)?;
    let fd_h = cfg.f64_or("experiment", "fd_h", 1e-4)?;
    #[derive(Serialize)]
    struct Row {
        z: Complex64,
        w: Complex64,
        residual: f64,
        phi_prime_z: Complex64,
        finite_difference_z: Complex64,
        relative_difference_z: f64,
    }
    let mut rows = Vec::new();
    for (&z, &w) in zs.iter().zip(&ws) {
        let residual = identity_residual(&field, &driver, s, t, z, w, nodes)?;
        let d = compute_v(&field, &driver, s, t, z, z, nodes)?.v_val.exp();
        let fd = finite_difference_derivative(&field, &driver, s, t, z, fd_h)?;
        rows.push(Row {
            z,
            w,
            residual,
            phi_prime_z: d,
            finite_difference_z: fd,
            relative_difference_z: (d - fd).norm() / d.norm(),
        });
    }
    out.csv("identity.csv", |wr| {
        writeln!(wr, "re_z,im_z,re_w,im_w,residual,rel_fd_difference")?;
        for r in &rows {
            writeln!(
                wr,
                "{},{},{},{},{},{}",
                e(r.z.re),
                e(r.z.im),
                e(r.w.re),
                e(r.w.im),
                e(r.residual),
                e(r.relative_difference_z)
            )?;
        }
        Ok(())
    })?;
    out.json(
        "identity.json",
        &json!({ "field": field.describe(), "seed": driver.seed(), "step": driver.dt(), "theta_nodes": nodes, "fd_h": fd_h, "rows": rows }),
    )?;
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(Outcome {
        warnings: Vec::new(),
        summary: json!({ "max_residual": worst, "rows": rows }),
    })
}

fn lags(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    if cfg.has("experiment", "lags") {
        cfg.f64_list("experiment", "lags")
    } else {
        Ok(log_lags(
            cfg.f64("experiment", "lag_min")?,
            cfg.f64("experiment", "lag_max")?,
            cfg.usize_or("experiment", "lag_count", 11)?,
        ))
    }
}

fn moment_plot(rep: &MomentReport) -> Vec<Item> {
    let pts: Vec<Complex64> = rep
        .lags
        .iter()
        .zip(&rep.estimates)
        .filter(|(_, e)| **e > 0.0)
        .map(|(l, e)| Complex64::new(l.ln(), e.ln()))
        .collect();
    let fit: Vec<Complex64> = [rep.lags[0], *rep.lags.last().unwrap()]
        .iter()
        .map(|l| Complex64::new(l.ln(), rep.intercept + rep.slope * l.ln()))
        .collect();
    vec![
        Item::Points {
            points: pts,
            label: "log mean".into(),
        },
        Item::Polyline {
            points: fit,
            label: "fit".into(),
        },
    ]
}

fn moments(cfg: &RunConfig, out: &mut Output, j: bool) -> Result<Outcome, CliError> {
    let field = build_field(cfg)?;
    let spec = monte_carlo(cfg)?;
    let axis_name = cfg.string("experiment", "axis")?;
    let axis = Axis::parse(&axis_name).ok_or_else(|| {
        CliError::Config(format!(
            "`experiment.axis`: unknown axis `{axis_name}` (expected time-s, time-t or space)"
        ))
    })?;
    let base = BasePoint {
        s: cfg.f64_or("experiment", "s", 0.0)?,
        t: cfg.f64("experiment", "t")?,
        z: cfg.complex("experiment", "z")?,
    };
    let p = cfg.f64_or("experiment", "p", 2.0)?;
    let lags = lags(cfg)?;
    let rep = if j {
        let w = cfg.complex("experiment", "w")?;
        let nodes = cfg.usize_or("experiment", "theta_nodes", 16)?;
        j_moment_scaling(&field, p, axis, base, w, &lags, nodes, &spec)?
    } else {
        moment_scaling(&field, p, axis, base, &lags, &spec)?
    };
    let stem = if j { "j_moments" } else { "moments" };
    out.csv(&format!("{stem}.csv"), |w| rep.write_csv(w))?;
    out.json(&format!("{stem}.json"), &rep)?;
    let style = Style {
        axes: false,
        ..Style::default()
    };
    out.svg(&format!("{stem}.svg"), &moment_plot(&rep), &style)?;
    Ok(Outcome {
        warnings: rep.warnings.clone(),
        summary: json!({
            "slope": rep.slope,
            "slope_stderr": rep.slope_stderr,
            "bound_exponent": rep.bound_exponent,
            "n_paths": rep.n_paths,
            "censored": rep.censored,
            "master_seed": rep.master_seed,
            "horizon": rep.horizon,
            "step": rep.step,
        }),
    })
}

fn time_list(cfg: &RunConfig, driver: &DriverPath) -> Result<Vec<f64>, CliError> {
    if cfg.has("experiment", "times") {
        return cfg.f64_list("experiment", "times");
    }
    let t_max = cfg.f64_or("experiment", "t_max", driver.t1())?;
    let count = cfg.usize_or("experiment", "count", 100)?;
    if count < 1 {
        return Err(CliError::Config("`experiment.count`: need at least one time".into()));
    }
    Ok((0..=count)
        .map(|k| driver.t0() + (t_max - driver.t0()) * k as f64 / count as f64)
        .collect())
}

fn loewner_trace(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let driver = build_driver(cfg)?;
    let times = time_list(cfg, &driver)?;
    let eps = cfg.f64_or("experiment", "eps", driver.dt().sqrt())?;
    let (points, warnings) = trace_with_eps(&driver, &times, eps)?;
    out.csv("trace.csv", |w| write_trace_csv(&points, w))?;
    out.json(
        "trace.json",
        &json!({ "seed": driver.seed(), "scale": driver.scale(), "step": driver.dt(), "eps": eps, "points": points }),
    )?;
    out.svg(
        "trace.svg",
        &[Item::Polyline {
            points: points.iter().map(|p| p.gamma).collect(),
            label: "trace".into(),
        }],
        &Style::default(),
    )?;
    let tips: Vec<Value> = points
        .iter()
        .map(|p| json!({ "t": p.t, "gamma": c(p.gamma), "error_proxy": p.error_proxy }))
        .collect();
    Ok(Outcome {
        warnings,
        summary: json!({ "points": tips }),
    })
}

fn hull_cmd(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let driver = build_driver(cfg)?;
    let t = cfg.f64_or("experiment", "t", driver.t1())?;
    let axis = |lo: &str, hi: &str, n: &str, dlo: f64, dhi: f64| -> Result<Vec<f64>, CliError> {
        let (a, b) = (cfg.f64_or("experiment", lo, dlo)?, cfg.f64_or("experiment", hi, dhi)?);
        let n = cfg.usize_or("experiment", n, 41)?;
        if n < 2 || !(a < b) {
            return Err(CliError::Config(format!(
                "`experiment.{lo}`/`experiment.{hi}`: need {lo} < {hi} and at least 2 points"
            )));
        }
        Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
    };
    let res = axis("re_min", "re_max", "re_count", -2.0, 2.0)?;
    let ims = axis("im_min", "im_max", "im_count", 0.0, 3.0)?;
    if ims[0] < 0.0 {
        return Err(CliError::Config(
            "`experiment.im_min`: the grid must lie in the closed upper half-plane".into(),
        ));
    }
    let grid: Vec<Complex64> = ims
        .iter()
        .flat_map(|&y| res.iter().map(move |&x| Complex64::new(x, y)))
        .collect();
    let member = hull(&driver, t, &grid)?;
    out.csv("hull.csv", |w| write_hull_csv(&grid, &member, w))?;
    let inside: Vec<Complex64> = grid.iter().zip(&member).filter(|(_, m)| **m).map(|(z, _)| *z).collect();
    out.json(
        "hull.json",
        &json!({ "seed": driver.seed(), "step": driver.dt(), "t": t, "grid_points": grid.len(), "members": inside.len() }),
    )?;
    if !inside.is_empty() {
        out.svg(
            "hull.svg",
            &[Item::Points {
                points: inside.clone(),
                label: "hull".into(),
            }],
            &Style::default(),
        )?;
    }
    Ok(Outcome {
        warnings: Vec::new(),
        summary: json!({ "t": t, "grid_points": grid.len(), "members": inside.len() }),
    })
}

fn hcap(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let driver = build_driver(cfg)?;
    let times = time_list(cfg, &driver)?;
    let radius = cfg.f64_or("experiment", "probe_radius", 100.0)?;
    let values = times
        .iter()
        .map(|&t| hcap_estimate(&driver, t, radius))
        .collect::<Result<Vec<f64>, _>>()?;
    out.csv("hcap.csv", |w| {
        writeln!(w, "t,hcap")?;
        for (t, b) in times.iter().zip(&values) {
            writeln!(w, "{},{}", e(*t), e(*b))?;
        }
        Ok(())
    })?;
    let rows: Vec<Value> = times
        .iter()
        .zip(&values)
        .map(|(t, b)| json!({ "t": t, "hcap": b }))
        .collect();
    out.json(
        "hcap.json",
        &json!({ "seed": driver.seed(), "step": driver.dt(), "probe_radius": radius, "values": rows }),
    )?;
    Ok(Outcome {
        warnings: Vec::new(),
        summary: json!({ "values": rows }),
    })
}

const DEFAULT_WINDOWS: [f64; 7] = [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625];

fn corner_demo(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let field = build_field(cfg)?;
    let driver = build_driver(cfg)?;
    let zero = DriverPath::zero(driver.t0(), driver.t1(), driver.n_steps())?;
    let (s, t) = span(cfg, &driver)?;
    let center = cfg.f64_or("experiment", "center", 0.0)?;
    let windows = if cfg.has("experiment", "windows") {
        cfg.f64_list("experiment", "windows")?
    } else {
        DEFAULT_WINDOWS.to_vec()
    };
    let lo = cfg.f64_or("experiment", "min_offset", 1e-5)?;
    let hi = cfg.f64_or("experiment", "max_offset", 0.5)?;
    let per_side = cfg.usize_or("experiment", "per_side", 200)?;
    let tol = cfg.f64_or("experiment", "monotone_tol", 0.01)?;
    if !(0.0 < lo && lo < hi) || per_side < 2 {
        return Err(CliError::Config(
            "`experiment.min_offset`: need 0 < min_offset < max_offset and per_side >= 2".into(),
        ));
    }
    let offsets = log_lags(lo, hi, per_side);
    let mut params: Vec<f64> = offsets.iter().map(|d| center - d).collect();
    params.push(center);
    params.extend(offsets.iter().map(|d| center + d));
    params.sort_by(f64::total_cmp);

    let opts = IntegratorOptions::default();
    let flat = boundary_curve_at(&field, &zero, s, t, &params, &opts)?;
    let rough = boundary_curve_at(&field, &driver, s, t, &params, &opts)?;
    let flat_seq = corner_angle_sequence(&flat, center, &windows)?;
    let rough_seq = corner_angle_sequence(&rough, center, &windows)?;
    let angles = |seq: &[CornerReport]| seq.iter().map(|r| r.angle).collect::<Vec<_>>();
    let rough_angles = angles(&rough_seq);
    let approaching = rough_angles
        .windows(2)
        .all(|w| (PI - w[1]).abs() <= (PI - w[0]).abs() + tol);
    let expected = match field {
        HalfPlaneField::Power { alpha } => Some(PI * (1.0 - alpha)),
        _ => None,
    };
    out.csv("corner_zero.csv", |w| flat.write_csv(w))?;
    out.csv("corner_brownian.csv", |w| rough.write_csv(w))?;
    let summary = json!({
        "field": field.describe(),
        "seed": driver.seed(),
        "step": driver.dt(),
        "center": center,
        "windows": windows,
        "zero_driver": {
            "angles": angles(&flat_seq),
            "final_angle": flat_seq.last().map(|r| r.angle),
            "expected": expected,
        },
        "brownian_driver": {
            "angles": rough_angles,
            "final_angle": rough_seq.last().map(|r| r.angle),
            "approaching_pi": approaching,
            "monotone_tolerance": tol,
        },
    });
    out.json(
        "corner.json",
        &json!({ "summary": summary, "zero_reports": flat_seq, "brownian_reports": rough_seq }),
    )?;
    out.svg(
        "corner.svg",
        &[
            Item::Polyline {
                points: flat.points.clone(),
                label: "zero driver".into(),
            },
            Item::Polyline {
                points: rough.points.clone(),
                label: "brownian driver".into(),
            },
        ],
        &Style::default(),
    )?;
    let warnings = flat.warnings.iter().chain(&rough.warnings).cloned().collect();
    Ok(Outcome { warnings, summary })
}

fn phi_estimate(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let field = build_field(cfg)?;
    let spec = monte_carlo(cfg)?;
    let lambda = cfg.f64("experiment", "lambda")?;
    let zs = cfg.complex_list("experiment", "z")?;
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    for &z in &zs {
        let r = phi_transform_estimate(&field, lambda, z, &spec)?;
        warnings.extend(r.warnings.clone());
        reports.push(r);
    }
    out.csv("phi.csv", |w| {
        writeln!(w, "re_z,im_z,re_phi,im_phi,se_re,se_im,re_residual,im_residual")?;
        for r in &reports {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                e(r.z.re),
                e(r.z.im),
                e(r.phi.re),
                e(r.phi.im),
                e(r.stderr.0),
                e(r.stderr.1),
                e(r.residual.re),
                e(r.residual.im)
            )?;
        }
        Ok(())
    })?;
    out.json("phi.json", &reports)?;
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| json!({ "z": c(r.z), "phi": c(r.phi), "stderr": [r.stderr.0, r.stderr.1], "residual": c(r.residual) }))
        .collect();
    Ok(Outcome {
        warnings,
        summary: json!({ "lambda": lambda, "values": rows }),
    })
}
