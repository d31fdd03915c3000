//! Discretised real drivers `U` on uniform grids.

use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result, Warning};
use crate::rng::{NormalStream, BASE_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Brownian,
    Zero,
    Custom,
}

/// `values[k] = U(t0 + k·(t1 − t0)/n_steps)`, with `values[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriverPath {
    t0: f64,
    t1: f64,
    n_steps: usize,
    values: Vec<f64>,
    seed: Option<u64>,
    scale: f64,
    kind: PathKind,
    /// Number of bridge refinements applied since sampling.
    level: u64,
    /// For a time reversal over the full span: the path it was reversed from,
    /// so that reversing again is exact.
    #[serde(skip)]
    reversed_from: Option<Arc<DriverPath>>,
}

fn check_grid(t0: f64, t1: f64, n_steps: usize) -> Result<()> {
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::invalid("t0/t1", "interval endpoints must be finite"));
    }
    if !(t0 < t1) {
        return Err(Error::invalid("t0/t1", format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    if n_steps < 1 {
        return Err(Error::invalid("n_steps", "need at least one step"));
    }
    Ok(())
}

impl DriverPath {
    /// Brownian path `scale · B` with increments drawn from the counter-based
    /// stream: increment `k` is variate `(seed, 0, k)`.
    pub fn sample_brownian(seed: u64, t0: f64, t1: f64, n_steps: usize, scale: f64) -> Result<Self> {
        check_grid(t0, t1, n_steps)?;
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(Error::invalid("scale", format!("must be finite and >= 0, got {scale}")));
        }
        let dt = (t1 - t0) / n_steps as f64;
        let sd = scale * dt.sqrt();
        let mut values = Vec::with_capacity(n_steps + 1);
        values.push(0.0);
        let mut stream = NormalStream::new(seed, BASE_STREAM, 0);
        let mut acc = 0.0;
        for _ in 0..n_steps {
            acc += sd * stream.next_normal();
            values.push(acc);
        }
        Ok(DriverPath {
            t0,
            t1,
            n_steps,
            values,
            seed: Some(seed),
            scale,
            kind: PathKind::Brownian,
            level: 0,
            reversed_from: None,
        })
    }

    pub fn zero(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        check_grid(t0, t1, n_steps)?;
        Ok(DriverPath {
            t0,
            t1,
            n_steps,
            values: vec![0.0; n_steps + 1],
            seed: None,
            scale: 0.0,
            kind: PathKind::Zero,
            level: 0,
            reversed_from: None,
        })
    }

    /// Arbitrary driver given by its grid values; `values[0]` must be 0.
    pub fn custom(t0: f64, t1: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("values", "need at least two grid values"));
        }
        let n_steps = values.len() - 1;
        check_grid(t0, t1, n_steps)?;
        if values[0] != 0.0 {
            return Err(Error::invalid(
                "values",
                format!("U must start at 0, got {}", values[0]),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "values must be finite"));
        }
        Ok(DriverPath {
            t0,
            t1,
            n_steps,
            values,
            seed: None,
            scale: 0.0,
            kind: PathKind::Custom,
            level: 0,
            reversed_from: None,
        })
    }

    /// Custom driver sampled from `u(t − t0)` on the grid, shifted so `U(t0) = 0`.
    pub fn custom_from_fn(t0: f64, t1: f64, n_steps: usize, u: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid(t0, t1, n_steps)?;
        let dt = (t1 - t0) / n_steps as f64;
        let base = u(0.0);
        let values = (0..=n_steps).map(|k| u(k as f64 * dt) - base).collect();
        Self::custom(t0, t1, values)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    #[inline]
    pub fn increment(&self, k: usize) -> f64 {
        self.values[k + 1] - self.values[k]
    }

    /// `U(t)` by linear interpolation between grid points.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        self.check_span(t)?;
        let x = ((t - self.t0) / self.dt()).clamp(0.0, self.n_steps as f64);
        let k = (x.floor() as usize).min(self.n_steps - 1);
        let frac = x - k as f64;
        Ok(self.values[k] + frac * (self.values[k + 1] - self.values[k]))
    }

    fn check_span(&self, t: f64) -> Result<()> {
        let tol = 1e-9 * self.dt();
        if !t.is_finite() || t < self.t0 - tol || t > self.t1 + tol {
            return Err(Error::OutOfSpan {
                t,
                t0: self.t0,
                t1: self.t1,
            });
        }
        Ok(())
    }

    /// Nearest grid index to `t`; off-grid requests come back with a warning.
    pub fn snap(&self, t: f64) -> Result<(usize, Option<Warning>)> {
        self.check_span(t)?;
        let x = (t - self.t0) / self.dt();
        let k = (x.round().max(0.0) as usize).min(self.n_steps);
        let warning = if (x - k as f64).abs() > 1e-6 {
            Some(Warning::SnapToGrid {
                requested: t,
                snapped: self.time(k),
            })
        } else {
            None
        };
        Ok((k, warning))
    }

    /// The reversed driver `s ↦ U_t − U_{t−s}`, laid out on `[t0, t]` so that
    /// reversing twice at the same `t` gives back the restriction to `[t0, t]`.
    pub fn time_reversal(&self, t: f64) -> Result<(DriverPath, Option<Warning>)> {
        let (k, warning) = self.snap(t)?;
        if k == 0 {
            return Err(Error::invalid("t", "reversal time must lie after t0"));
        }
        if k == self.n_steps {
            if let Some(origin) = &self.reversed_from {
                return Ok(((**origin).clone(), warning));
            }
        }
        let origin = if k == self.n_steps {
            self.clone()
        } else {
            self.restrict(self.t0, self.time(k))?
        };
        let end = self.values[k];
        let values: Vec<f64> = (0..=k).map(|j| end - self.values[k - j]).collect();
        let kind = if self.kind == PathKind::Zero {
            PathKind::Zero
        } else {
            PathKind::Custom
        };
        Ok((
            DriverPath {
                t0: self.t0,
                t1: self.time(k),
                n_steps: k,
                values,
                seed: None,
                scale: self.scale,
                kind,
                level: 0,
                reversed_from: Some(Arc::new(origin)),
            },
            warning,
        ))
    }

    /// Restriction to the grid points between `a` and `b` (both snapped).
    pub fn restrict(&self, a: f64, b: f64) -> Result<DriverPath> {
        let (ka, _) = self.snap(a)?;
        let (kb, _) = self.snap(b)?;
        if kb <= ka {
            return Err(Error::invalid("a/b", format!("empty restriction [{a}, {b}]")));
        }
        if ka != 0 {
            return Err(Error::invalid("a", "restriction must start at t0 to keep U(t0) = 0"));
        }
        Ok(DriverPath {
            t0: self.t0,
            t1: self.time(kb),
            n_steps: kb,
            values: self.values[..=kb].to_vec(),
            reversed_from: None,
            ..self.clone()
        })
    }

    /// Linear interpolation onto a new uniform grid on `[a, b]`, re-based so the
    /// result starts at 0.
    pub fn resample(&self, a: f64, b: f64, n_steps: usize) -> Result<DriverPath> {
        check_grid(a, b, n_steps)?;
        self.check_span(a)?;
        self.check_span(b)?;
        if a == self.t0 && b == self.t1 && n_steps == self.n_steps {
            return Ok(self.clone());
        }
        let dt = (b - a) / n_steps as f64;
        let base = self.value_at(a)?;
        let values = (0..=n_steps)
            .map(|k| {
                let t = if k == n_steps { b } else { a + k as f64 * dt };
                self.value_at(t).map(|v| v - base)
            })
            .collect::<Result<Vec<f64>>>()?;
        let kind = if self.kind == PathKind::Zero {
            PathKind::Zero
        } else {
            PathKind::Custom
        };
        Ok(DriverPath {
            t0: a,
            t1: b,
            n_steps,
            values,
            seed: None,
            scale: self.scale,
            kind,
            level: 0,
            reversed_from: None,
        })
    }

    /// Inserts `factor − 1` Brownian-bridge points into every step. Coarse grid
    /// values are copied bit-exactly; point `j` of the refined grid uses the
    /// variate `(seed, level + 1, j)`.
    pub fn refine(&self, factor: usize) -> Result<DriverPath> {
        if factor < 2 {
            return Err(Error::invalid("factor", format!("must be >= 2, got {factor}")));
        }
        let n_fine = self
            .n_steps
            .checked_mul(factor)
            .ok_or_else(|| Error::invalid("factor", "refined grid too large"))?;
        match self.kind {
            PathKind::Zero => {
                return Ok(DriverPath {
                    n_steps: n_fine,
                    values: vec![0.0; n_fine + 1],
                    level: self.level + 1,
                    reversed_from: None,
                    ..self.clone()
                })
            }
            PathKind::Custom => {
                return Err(Error::Unsupported {
                    operation: "bridge refinement",
                    kind: "custom path",
                })
            }
            PathKind::Brownian => {}
        }
        let seed = self.seed.expect("brownian paths carry a seed");
        let level = self.level + 1;
        let h = self.dt() / factor as f64;
        let mut values = Vec::with_capacity(n_fine + 1);
        for i in 0..self.n_steps {
            let right = self.values[i + 1];
            let mut left = self.values[i];
            values.push(left);
            // variates are consumed in fine-grid order, skipping coarse points
            let mut stream = NormalStream::new(seed, level, (i * factor + 1) as u64);
            for j in 1..factor {
                let remaining = (factor - j + 1) as f64;
                let mean = left + (right - left) / remaining;
                let var = self.scale * self.scale * h * (remaining - 1.0) / remaining;
                left = mean + var.sqrt() * stream.next_normal();
                values.push(left);
            }
        }
        values.push(self.values[self.n_steps]);
        Ok(DriverPath {
            t0: self.t0,
            t1: self.t1,
            n_steps: n_fine,
            values,
            seed: self.seed,
            scale: self.scale,
            kind: PathKind::Brownian,
            level,
            reversed_from: None,
        })
    }

    /// CSV with header `t,u`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,u")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.time(k), v)?;
        }
        Ok(())
    }
}
