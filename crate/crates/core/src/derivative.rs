//! The exponential representation `φ(s,t,z) − φ(s,t,w) = (z − w)·exp V`.
//!
//! With `W^θ = θ·φ(s,·,z) + (1 − θ)·φ(s,·,w)` formed per grid step from the two
//! stored trajectories, step `k` contributes
//!
//! ```text
//! I_k = ∫ G(W_{k+1}) − G(W_k) − F(W_k)·(ΔW_k − ΔU_k) dθ
//! J_k = ∫ F(W_k)·ΔU_k + ½F′(W_k)·(ΔU_k² − Δt) dθ
//! ```
//!
//! and `V = 2(I − J)`. The second term of `J_k` is the Milstein correction of
//! the left-point sum: it trades the realized squared increment for `Δt`, so
//! that `V → ∫∫ F′(W^θ) dθ dr` at first order for any driver, the zero driver
//! included. The θ-integral is Gauss–Legendre on panels that are bisected
//! where the segment `[W^0, W^1]` passes close to a critical point of `F`.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result, Warning};
use crate::fields::HolomorphicField;
use crate::flow::{flow_between, grid_span, states_between, IntegratorOptions};
use crate::paths::DriverPath;
use crate::quadrature::GaussLegendre;

pub const DEFAULT_THETA_NODES: usize = 16;
const MAX_PANEL_DEPTH: u32 = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub s: f64,
    pub t: f64,
    pub z: Complex64,
    pub w: Complex64,
    pub i_val: Complex64,
    pub j_val: Complex64,
    pub v_val: Complex64,
    /// `exp V(s, t, z, z)`, only when `z = w`.
    pub phi_prime: Option<Complex64>,
    pub theta_nodes: usize,
    pub step: f64,
    pub warnings: Vec<Warning>,
}

/// Per-step contributions to `I` and `J`.
struct StepTerms {
    i: Vec<Complex64>,
    j: Vec<Complex64>,
}

fn dist_to_segment(c: Complex64, p: Complex64, q: Complex64) -> f64 {
    let d = q - p;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (c - p).norm();
    }
    let u = (((c - p) * d.conj()).re / len2).clamp(0.0, 1.0);
    (c - (p + d * u)).norm()
}

/// θ-panels for one step: `[a, b]` is split while some critical point lies
/// closer to either sub-segment than that sub-segment is long.
fn panels(
    seg0: (Complex64, Complex64),
    seg1: (Complex64, Complex64),
    critical: &[Complex64],
    out: &mut Vec<(f64, f64)>,
) {
    fn rec(
        a: f64,
        b: f64,
        depth: u32,
        seg0: (Complex64, Complex64),
        seg1: (Complex64, Complex64),
        critical: &[Complex64],
        out: &mut Vec<(f64, f64)>,
    ) {
        let near = |(y, x): (Complex64, Complex64)| {
            let p = y + (x - y) * a;
            let q = y + (x - y) * b;
            let len = (q - p).norm();
            len > 0.0 && critical.iter().any(|&c| dist_to_segment(c, p, q) < len)
        };
        if depth < MAX_PANEL_DEPTH && (near(seg0) || near(seg1)) {
            let m = 0.5 * (a + b);
            rec(a, m, depth + 1, seg0, seg1, critical, out);
            rec(m, b, depth + 1, seg0, seg1, critical, out);
        } else {
            out.push((a, b));
        }
    }
    rec(0.0, 1.0, 0, seg0, seg1, critical, out);
}

fn step_terms<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    k0: usize,
    xs: &[Complex64],
    ys: &[Complex64],
    same: bool,
    rule: &GaussLegendre,
) -> Result<StepTerms> {
    let dt = path.dt();
    let critical = field.critical_points();
    let m = xs.len() - 1;
    let mut terms = StepTerms {
        i: Vec::with_capacity(m),
        j: Vec::with_capacity(m),
    };
    let mut pans = Vec::new();
    for k in 0..m {
        let du = path.increment(k0 + k);
        let mut ik = Complex64::new(0.0, 0.0);
        let mut jk = Complex64::new(0.0, 0.0);
        let mut add = |w0: Complex64, w1: Complex64, weight: f64| -> Result<()> {
            let g0 = field.antiderivative(w0)?;
            let g1 = field.antiderivative(w1)?;
            let f0 = field.value(w0)?;
            let fp0 = field.derivative(w0)?;
            ik += weight * (g1 - g0 - f0 * (w1 - w0 - du));
            jk += weight * (f0 * du + 0.5 * fp0 * (du * du - dt));
            Ok(())
        };
        if same {
            add(xs[k], xs[k + 1], 1.0)?;
        } else {
            pans.clear();
            panels((ys[k], xs[k]), (ys[k + 1], xs[k + 1]), &critical, &mut pans);
            for &(a, b) in &pans {
                let h = b - a;
                for (node, weight) in rule.nodes.iter().zip(&rule.weights) {
                    let th = a + h * node;
                    let w0 = ys[k] + (xs[k] - ys[k]) * th;
                    let w1 = ys[k + 1] + (xs[k + 1] - ys[k + 1]) * th;
                    add(w0, w1, h * weight)?;
                }
            }
        }
        terms.i.push(ik);
        terms.j.push(jk);
    }
    Ok(terms)
}

fn check_nodes(theta_nodes: usize) -> Result<GaussLegendre> {
    if theta_nodes < 1 {
        return Err(Error::invalid("theta_nodes", "need at least one node"));
    }
    Ok(GaussLegendre::new(theta_nodes))
}

fn sum(xs: &[Complex64]) -> Complex64 {
    xs.iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b)
}

/// `I`, `J`, `V` at `(s, t, z, w)` on one driver.
pub fn compute_v<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    z: Complex64,
    w: Complex64,
    theta_nodes: usize,
) -> Result<DerivativeReport> {
    compute_v_with(field, path, s, t, z, w, theta_nodes, &IntegratorOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn compute_v_with<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    z: Complex64,
    w: Complex64,
    theta_nodes: usize,
    opts: &IntegratorOptions,
) -> Result<DerivativeReport> {
    let rule = check_nodes(theta_nodes)?;
    let span = grid_span(path, s, t)?;
    let same = z == w;
    let xs = states_between(field, path, span.start, span.end, z, opts)?;
    let ys = if same {
        xs.clone()
    } else {
        states_between(field, path, span.start, span.end, w, opts)?
    };
    let terms = step_terms(field, path, span.start, &xs, &ys, same, &rule)?;
    let i_val = sum(&terms.i);
    let j_val = sum(&terms.j);
    let v_val = 2.0 * (i_val - j_val);
    Ok(DerivativeReport {
        s: path.time(span.start),
        t: path.time(span.end),
        z,
        w,
        i_val,
        j_val,
        v_val,
        phi_prime: same.then(|| v_val.exp()),
        theta_nodes,
        step: path.dt(),
        warnings: span.warnings,
    })
}

/// `φ′(s, t, z) = exp V(s, t, z, z)`.
pub fn derivative<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    z: Complex64,
    theta_nodes: usize,
) -> Result<Complex64> {
    Ok(compute_v(field, path, s, t, z, z, theta_nodes)?.v_val.exp())
}

/// `|φ(z) − φ(w) − (z − w)·exp V| / |z − w|`.
pub fn identity_residual<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    z: Complex64,
    w: Complex64,
    theta_nodes: usize,
) -> Result<f64> {
    if z == w {
        return Err(Error::invalid("z/w", "the identity residual needs z != w"));
    }
    let rep = compute_v(field, path, s, t, z, w, theta_nodes)?;
    let opts = IntegratorOptions::default();
    let span = grid_span(path, s, t)?;
    let pz = flow_between(field, path, span.start, span.end, z, &opts)?;
    let pw = flow_between(field, path, span.start, span.end, w, &opts)?;
    Ok(((pz - pw) - (z - w) * rep.v_val.exp()).norm() / (z - w).norm())
}

/// Forward difference quotient `(φ(z + h) − φ(z))/h` on one driver. The only
/// derivative estimate for fields without an antiderivative.
pub fn finite_difference_derivative<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    z: Complex64,
    h: f64,
) -> Result<Complex64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("h", format!("must be finite and > 0, got {h}")));
    }
    let opts = IntegratorOptions::default();
    let span = grid_span(path, s, t)?;
    let zh = z + h;
    let a = flow_between(field, path, span.start, span.end, zh, &opts)?;
    let b = flow_between(field, path, span.start, span.end, z, &opts)?;
    // divide by the increment actually represented
    Ok((a - b) / (zh - z))
}

/// `|(φ(z + h) − φ(z))/h − exp V(s, t, z, z)|`.
pub fn finite_difference_check<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    z: Complex64,
    h: f64,
) -> Result<f64> {
    let fd = finite_difference_derivative(field, path, s, t, z, h)?;
    let d = derivative(field, path, s, t, z, DEFAULT_THETA_NODES)?;
    Ok((fd - d).norm())
}

/// `J(s, t_k, z, w)` at every grid time `t_k` from `s` to `t`; entry 0 is `J = 0`.
pub fn j_series<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    z: Complex64,
    w: Complex64,
    theta_nodes: usize,
) -> Result<Vec<Complex64>> {
    let rule = check_nodes(theta_nodes)?;
    let span = grid_span(path, s, t)?;
    let opts = IntegratorOptions::default();
    let same = z == w;
    let xs = states_between(field, path, span.start, span.end, z, &opts)?;
    let ys = if same {
        xs.clone()
    } else {
        states_between(field, path, span.start, span.end, w, &opts)?
    };
    let terms = step_terms(field, path, span.start, &xs, &ys, same, &rule)?;
    let mut out = Vec::with_capacity(terms.j.len() + 1);
    let mut acc = Complex64::new(0.0, 0.0);
    out.push(acc);
    for j in terms.j {
        acc += j;
        out.push(acc);
    }
    Ok(out)
}

/// `φ′(s, t, x)` along real parameters, one entry per parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeField {
    pub s: f64,
    pub t: f64,
    pub params: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl DerivativeField {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,re_dphi,im_dphi")?;
        for (x, d) in self.params.iter().zip(&self.values) {
            writeln!(out, "{x:.16e},{:.16e},{:.16e}", d.re, d.im)?;
        }
        Ok(())
    }
}

pub fn derivative_field<F: HolomorphicField + ?Sized>(
    field: &F,
    path: &DriverPath,
    s: f64,
    t: f64,
    params: &[f64],
) -> Result<DerivativeField> {
    let span = grid_span(path, s, t)?;
    let values = params
        .par_iter()
        .map(|&x| derivative(field, path, s, t, Complex64::new(x, 0.0), 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(DerivativeField {
        s: path.time(span.start),
        t: path.time(span.end),
        params: params.to_vec(),
        values,
    })
}
