//! Grid-based energy minimization on the circle with a symmetric pair of
//! point charges as external potential.
//!
//! Cell j is centred at j/n. Cell values are point samples of the density,
//! so Fourier coefficients come from a plain DFT and the interaction uses
//! W^(k) = 1/(2|k|).

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{compensated_sum, integrate, integrate_log_singular, kernel_t, QuadratureSpec};
use crate::measures::{Angle, IntervalT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SedimentError {
    #[error("n_cells = {0} must be a power of two and at least 2")]
    BadGrid(usize),
    #[error("negative or non-finite cell value {0}")]
    BadValue(f64),
    #[error("interval covers {0} cells, at least 8 are needed")]
    IntervalTooCoarse(usize),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("malformed scenario: {0}")]
    Json(String),
}

pub(crate) struct Spectral {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    n: usize,
}

impl Spectral {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            n,
        }
    }

    /// rho^(k) = (1/n) sum_j v_j e^{-2 pi i j k / n}.
    pub(crate) fn coefficients(&self, v: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fwd.process(&mut buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        buf
    }

    /// Real part of sum_k c_k e^{2 pi i j k / n}.
    pub(crate) fn synthesize(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut c);
        c.into_iter().map(|z| z.re).collect()
    }

    pub(crate) fn frequency(&self, q: usize) -> i64 {
        if q <= self.n / 2 {
            q as i64
        } else {
            q as i64 - self.n as i64
        }
    }

    /// Circular convolution (a * b)_i = sum_j a_j b_{i-j}.
    pub(crate) fn convolve(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.n as f64;
        let fa = self.coefficients(a);
        let fb = self.coefficients(b);
        let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y * n).collect();
        self.synthesize(prod)
    }
}

/// W^(k) = 1/(2|k|) for k != 0.
pub fn w_hat(k: i64) -> f64 {
    if k == 0 {
        0.0
    } else {
        0.5 / (k.unsigned_abs() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    values: Vec<f64>,
    pub diracs: Vec<(usize, f64)>,
    pub total_mass: f64,
}

impl GridDensity {
    pub fn new(values: Vec<f64>, diracs: Vec<(usize, f64)>) -> Result<Self, SedimentError> {
        let n = values.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(SedimentError::BadGrid(n));
        }
        if let Some(&v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(SedimentError::BadValue(v));
        }
        for &(j, m) in &diracs {
            if j >= n || !(m.is_finite() && m > 0.0) {
                return Err(SedimentError::Invalid(format!("dirac ({j}, {m})")));
            }
        }
        let total_mass = compensated_sum(values.iter().map(|v| v / n as f64))
            + compensated_sum(diracs.iter().map(|d| d.1));
        Ok(Self {
            values,
            diracs,
            total_mass,
        })
    }

    pub fn sample<F: Fn(f64) -> f64>(n: usize, f: F) -> Result<Self, SedimentError> {
        Self::new((0..n).map(|j| f(Self::center_of(j, n))).collect(), vec![])
    }

    fn center_of(j: usize, n: usize) -> f64 {
        Angle::new(j as f64 / n as f64).value()
    }

    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn center(&self, j: usize) -> f64 {
        Self::center_of(j, self.n_cells())
    }

    pub fn density_mass(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v / self.n_cells() as f64))
    }

    pub fn cell_of(&self, x: f64) -> usize {
        let n = self.n_cells() as f64;
        ((x * n).round().rem_euclid(n)) as usize % self.n_cells()
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.values[self.cell_of(x)]
    }

    pub fn is_even(&self) -> bool {
        let n = self.n_cells();
        let v = &self.values;
        (0..n).all(|j| v[j] == v[(n - j) % n])
            && self.diracs.iter().all(|&(j, m)| {
                self.diracs
                    .iter()
                    .any(|&(k, w)| k == (n - j) % n && (w - m).abs() < 1e-14)
            })
    }

    /// Exact integral of the piecewise-constant density over [a, b].
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let n = self.n_cells();
        let h = 1.0 / n as f64;
        // cell j covers [(j - 1/2) h, (j + 1/2) h] on the unwrapped line
        let first = (a / h + 0.5).floor() as i64;
        let last = (b / h + 0.5).floor() as i64;
        let mut s = crate::kernels::Sum::new();
        for j in first..=last {
            let lo = ((j as f64 - 0.5) * h).max(a);
            let hi = ((j as f64 + 0.5) * h).min(b);
            if hi > lo {
                s.add(self.values[j.rem_euclid(n as i64) as usize] * (hi - lo));
            }
        }
        s.value()
    }

    /// W * rho_c at the cell centres, spectrally.
    pub fn potential_samples(&self) -> Vec<f64> {
        let sp = Spectral::new(self.n_cells());
        density_potential(&sp, &self.values)
    }

    /// Trigonometric-interpolant potential at an arbitrary point.
    pub fn density_potential_at(&self, x: f64) -> f64 {
        let sp = Spectral::new(self.n_cells());
        let c = sp.coefficients(&self.values);
        let mut s = 0.0;
        for (q, ck) in c.iter().enumerate() {
            let k = sp.frequency(q);
            let e = Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x);
            s += w_hat(k) * (ck * e).re;
        }
        s
    }

    /// sum_{j != i} c_j W(x_i - x_j) with c_j = v_j / n the cell masses.
    pub fn atomic_potential(&self) -> Vec<f64> {
        let n = self.n_cells();
        let sp = Spectral::new(n);
        let masses: Vec<f64> = self.values.iter().map(|v| v / n as f64).collect();
        let kernel: Vec<f64> = (0..n)
            .map(|d| if d == 0 { 0.0 } else { kernel_t(d as f64 / n as f64) })
            .collect();
        sp.convolve(&masses, &kernel)
    }

    /// Discrepancy with the grid's own diracs at cell centres plus `extra`.
    pub fn discrepancy(&self) -> (f64, IntervalT) {
        self.discrepancy_with(&[])
    }

    pub fn discrepancy_with(&self, extra: &[(Angle, f64)]) -> (f64, IntervalT) {
        let n = self.n_cells();
        let h = 1.0 / n as f64;
        let mut pts: Vec<(f64, f64)> = (0..n)
            .map(|j| (Angle::new((j as f64 - 0.5) * h).value(), 0.0))
            .collect();
        pts.extend(self.diracs.iter().map(|&(j, m)| (self.center(j), m)));
        pts.extend(extra.iter().map(|&(a, m)| (a.value(), m)));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (x, m) in pts {
            match merged.last_mut() {
                Some(l) if (x - l.0).abs() < 1e-15 => l.1 += m,
                _ => merged.push((x, m)),
            }
        }
        let k = merged.len();
        // items: point i, then segment (p_i, p_{i+1})
        let mut items = Vec::with_capacity(2 * k);
        for i in 0..k {
            let a = merged[i].0;
            let b = if i + 1 < k { merged[i + 1].0 } else { merged[0].0 + 1.0 };
            items.push(merged[i].1);
            items.push(self.integrate(a, b) - (b - a));
        }
        let pos = |item: usize, end: bool| -> f64 {
            let wrap = (item / (2 * k)) as f64;
            let it = item % (2 * k);
            let i = it / 2;
            let base = if it % 2 == 1 && end {
                if i + 1 < k { merged[i + 1].0 } else { merged[0].0 + 1.0 }
            } else {
                merged[i].0
            };
            base + wrap
        };
        let (v, s, e) = max_circular_run(&items);
        let start = pos(s, false);
        let end = pos(e, true);
        (
            v,
            IntervalT {
                a: Angle::new(start),
                length: (end - start).clamp(0.0, 1.0 - 1e-15),
            },
        )
    }
}

/// Best sum of a contiguous circular run of at most len-1 items, returned
/// with the start and end item indices in the doubled sequence.
pub(crate) fn max_circular_run(items: &[f64]) -> (f64, usize, usize) {
    let n = items.len();
    let mut pre = vec![0.0; 2 * n + 1];
    for i in 0..2 * n {
        pre[i + 1] = pre[i] + items[i % n];
    }
    let mut dq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    let limit = n.saturating_sub(1).max(1);
    for e in 0..2 * n {
        while let Some(&b) = dq.back() {
            if pre[b] >= pre[e] {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(e);
        while let Some(&f) = dq.front() {
            if e + 1 - f > limit {
                dq.pop_front();
            } else {
                break;
            }
        }
        let s = *dq.front().unwrap();
        let v = pre[e + 1] - pre[s];
        if v > best.0 {
            best = (v, s, e);
        }
    }
    best
}

fn density_potential(sp: &Spectral, values: &[f64]) -> Vec<f64> {
    let mut c = sp.coefficients(values);
    for (q, ck) in c.iter_mut().enumerate() {
        *ck *= w_hat(sp.frequency(q));
    }
    sp.synthesize(c)
}

/// U = m (W(x - M) + W(x + M)) plus an optional smooth term on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPotentialSpec {
    #[serde(rename = "M")]
    pub big_m: f64,
    pub m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<Vec<f64>>,
}

impl ExternalPotentialSpec {
    pub fn new(big_m: f64, m: f64) -> Self {
        Self {
            big_m: Angle::new(big_m).value(),
            m,
            extra: None,
        }
    }

    pub fn none() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn at(&self, x: f64) -> f64 {
        if self.m == 0.0 {
            return 0.0;
        }
        self.m * (kernel_t(x - self.big_m) + kernel_t(x + self.big_m))
    }

    /// Cell averages of U on an n-cell grid.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        let h = 1.0 / n as f64;
        let spec = QuadratureSpec {
            panels: 1,
            ..QuadratureSpec::with_tol(1e-13)
        };
        let singular = [self.big_m, -self.big_m];
        let mut u: Vec<f64> = (0..n)
            .map(|j| {
                if self.m == 0.0 {
                    return 0.0;
                }
                let c = j as f64 * h;
                let (a, b) = (c - 0.5 * h, c + 0.5 * h);
                let s = singular
                    .iter()
                    .flat_map(|&p| [p - 1.0, p, p + 1.0])
                    .find(|&p| p >= a && p <= b);
                let v = match s {
                    Some(p) => integrate_log_singular(|x| self.at(x), a, b, p, &spec),
                    None => integrate(|x| self.at(x), a, b, (false, false), &spec),
                };
                v.expect("cell average of the external potential") / h
            })
            .collect();
        if let Some(extra) = &self.extra {
            for (x, e) in u.iter_mut().zip(extra) {
                *x += e;
            }
        }
        u
    }
}

/// 1/2 sum_{k != 0} W^(k) |rho^(k)|^2 + integral of U rho, on the grid.
pub fn energy(rho: &GridDensity, u: &ExternalPotentialSpec) -> f64 {
    let n = rho.n_cells();
    let sp = Spectral::new(n);
    let us = u.sample(n);
    energy_with(&sp, rho.values(), &us)
}

fn energy_with(sp: &Spectral, v: &[f64], u: &[f64]) -> f64 {
    let c = sp.coefficients(v);
    let inter = compensated_sum(
        c.iter()
            .enumerate()
            .map(|(q, ck)| w_hat(sp.frequency(q)) * ck.norm_sqr()),
    );
    let n = v.len() as f64;
    let ext = compensated_sum(v.iter().zip(u).map(|(a, b)| a * b / n));
    0.5 * inter + ext
}

/// Replace the density strictly between the cells nearest x0 - eps and
/// x0 + eps by two endpoint masses matching mass and first moment.
pub fn micro_diffuse(rho: &GridDensity, x0: f64, eps: f64) -> Result<GridDensity, SedimentError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(SedimentError::Invalid(format!("eps = {eps}")));
    }
    let n = rho.n_cells();
    let nf = n as f64;
    let jl = ((x0 - eps) * nf).round() as i64;
    let jr = ((x0 + eps) * nf).round() as i64;
    let inner = (jr - jl - 1).max(0) as usize;
    if inner < 8 {
        return Err(SedimentError::IntervalTooCoarse(inner));
    }
    let mut values = rho.values().to_vec();
    let span = (jr - jl) as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for j in jl + 1..jr {
        let idx = j.rem_euclid(n as i64) as usize;
        let c = values[idx] / nf;
        let t = (j - jl) as f64 / span;
        m1 += c * (1.0 - t);
        m2 += c * t;
        values[idx] = 0.0;
    }
    values[jl.rem_euclid(n as i64) as usize] += m1 * nf;
    values[jr.rem_euclid(n as i64) as usize] += m2 * nf;
    GridDensity::new(values, rho.diracs.clone())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub density: GridDensity,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

/// Sediment residual: max over support cells of V - min V.
pub fn sediment_residual(values: &[f64], v: &[f64], mass: f64) -> f64 {
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    values
        .iter()
        .zip(v)
        .filter(|(d, _)| **d > 1e-6 * mass)
        .map(|(_, p)| p - vmin)
        .fold(0.0, f64::max)
}

pub fn total_potential(rho: &GridDensity, u: &ExternalPotentialSpec) -> Vec<f64> {
    let us = u.sample(rho.n_cells());
    rho.potential_samples()
        .into_iter()
        .zip(us)
        .map(|(a, b)| a + b)
        .collect()
}

/// Multiplicative-weights descent on the cell values with fixed total mass.
/// The step starts at `step` (or 0.5 / max|V| when `step` is None), halves
/// whenever the energy would increase and grows slowly after accepted steps.
pub fn minimize_energy(
    u: &ExternalPotentialSpec,
    mass: f64,
    n_cells: usize,
    iters: usize,
    step: Option<f64>,
    tol: f64,
) -> Result<MinimizeResult, SedimentError> {
    if !(mass > 0.0) {
        return Err(SedimentError::Invalid(format!("mass = {mass}")));
    }
    if n_cells < 2 || !n_cells.is_power_of_two() {
        return Err(SedimentError::BadGrid(n_cells));
    }
    let sp = Spectral::new(n_cells);
    let us = u.sample(n_cells);
    let nf = n_cells as f64;
    let mut v = vec![mass; n_cells];
    let pot = |v: &[f64]| -> Vec<f64> {
        density_potential(&sp, v)
            .into_iter()
            .zip(&us)
            .map(|(a, b)| a + b)
            .collect()
    };
    let mut grad = pot(&v);
    let mut e = energy_with(&sp, &v, &us);
    let vmax = grad.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-12);
    let mut eta = step.unwrap_or(0.5 / vmax);
    let eta_cap = 64.0 * eta;
    let mut trace = Vec::new();
    let mut residual = sediment_residual(&v, &grad, mass);
    let mut it = 0;
    while it < iters && residual > tol {
        let wsum: f64 = v.iter().sum();
        let mean = compensated_sum(v.iter().zip(&grad).map(|(a, g)| a * g)) / wsum;
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand: Vec<f64> = v
                .iter()
                .zip(&grad)
                .map(|(a, g)| a * (-(eta * (g - mean)).clamp(-700.0, 700.0)).exp())
                .collect();
            let s = compensated_sum(cand.iter().copied()) / nf;
            cand.iter_mut().for_each(|x| *x *= mass / s);
            let ec = energy_with(&sp, &cand, &us);
            if ec <= e + 1e-12 * e.abs().max(1.0) {
                v = cand;
                e = ec;
                accepted = true;
                eta = (eta * 1.05).min(eta_cap);
                break;
            }
            eta *= 0.5;
        }
        it += 1;
        grad = pot(&v);
        residual = sediment_residual(&v, &grad, mass);
        if it % 10 == 0 || !accepted {
            trace.push(TracePoint {
                iteration: it,
                energy: e,
                residual,
            });
        }
        if !accepted {
            break;
        }
    }
    if trace.last().map(|t| t.iteration) != Some(it) {
        trace.push(TracePoint {
            iteration: it,
            energy: e,
            residual,
        });
    }
    Ok(MinimizeResult {
        density: GridDensity::new(v, vec![])?,
        residual,
        iterations: it,
        converged: residual <= tol,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "M")]
    pub big_m: f64,
    pub m: f64,
    pub mass: f64,
    pub n_cells: usize,
    pub iters: usize,
    pub tol: f64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SedimentError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| SedimentError::Json(e.to_string()))?;
        if !(s.big_m.is_finite() && s.m.is_finite() && s.m >= 0.0) {
            return Err(SedimentError::Json("M and m must be finite, m >= 0".into()));
        }
        if !(s.mass.is_finite() && s.mass > 0.0) {
            return Err(SedimentError::Json("mass must be positive".into()));
        }
        if s.n_cells < 2 || !s.n_cells.is_power_of_two() || s.n_cells > 1 << 20 {
            return Err(SedimentError::BadGrid(s.n_cells));
        }
        if !(s.tol.is_finite() && s.tol > 0.0) {
            return Err(SedimentError::Json("tol must be positive".into()));
        }
        Ok(s)
    }

    pub fn run(&self) -> Result<MinimizeResult, SedimentError> {
        let u = ExternalPotentialSpec::new(self.big_m, self.m);
        minimize_energy(&u, self.mass, self.n_cells, self.iters, None, self.tol)
    }
}
