//! Conjugate pairs (u, v) on the circle and the sharp Ganelius estimate
//! |v(z1) - v(z2)| <= sqrt(2 pi) sqrt(H K).

use std::f64::consts::PI;

use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{integrate, QuadratureSpec};
use crate::measures::{DensityFamily, EmpiricalMeasure, Measure, MeasureError, MixedMeasureT};
use crate::sediment::{w_hat, Spectral};

#[derive(Debug, Error)]
pub enum HarmonicError {
    #[error("density is negative at sample {index} ({value})")]
    NegativeDensity { index: usize, value: f64 },
    #[error("H = {0} is not positive")]
    HNonpositive(f64),
    #[error("K = {0} is not positive")]
    KNonpositive(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

pub const DEFAULT_GRID: usize = 4096;

/// Triangular mollifier of half-width `a` and unit mass.
pub fn psi(a: f64, x: f64) -> f64 {
    let t = x.abs();
    if t >= a {
        0.0
    } else {
        (a - t) / (a * a)
    }
}

/// Samples rho(j / n) of a density given in closed form.
pub fn sample(fam: &DensityFamily, grid_n: usize) -> Vec<f64> {
    (0..grid_n).map(|j| fam.density(j as f64 / grid_n as f64)).collect()
}

/// Samples of rho * psi_a at j / n, rescaled to mean exactly 1.
pub fn mollify(rho: &Measure, grid_n: usize, a: f64) -> Result<Vec<f64>, HarmonicError> {
    if !(a > 0.0 && a < 0.25) {
        return Err(HarmonicError::Invalid(format!("mollifier width {a}")));
    }
    let h = 1.0 / grid_n as f64;
    let on_circle = |x: f64| x - x.round();
    let mut out = vec![0.0; grid_n];
    let atoms: Vec<(f64, f64)> = match rho {
        Measure::Empirical(e) => e.atoms().iter().map(|&(p, w)| (p.value(), w)).collect(),
        Measure::Mixed(m) => m.diracs.iter().map(|&(p, w)| (p.value(), w)).collect(),
    };
    for (j, v) in out.iter_mut().enumerate() {
        let x = j as f64 * h;
        *v = atoms.iter().map(|&(p, w)| w * psi(a, on_circle(x - p))).sum();
    }
    if let Measure::Mixed(m) = rho {
        add_smoothed_density(m, a, &mut out)?;
    }
    let mean = out.iter().sum::<f64>() * h;
    if !(mean > 0.0) {
        return Err(HarmonicError::Invalid("measure has no mass".into()));
    }
    out.iter_mut().for_each(|v| *v /= mean);
    Ok(out)
}

fn add_smoothed_density(m: &MixedMeasureT, a: f64, out: &mut [f64]) -> Result<(), HarmonicError> {
    if m.density == DensityFamily::Zero {
        return Ok(());
    }
    let spec = QuadratureSpec::with_tol(1e-12);
    let n = out.len();
    let breaks = m.density.breakpoints();
    for (j, v) in out.iter_mut().enumerate() {
        let x = j as f64 / n as f64;
        let mut cuts = vec![x - a, x, x + a];
        for p in &breaks {
            for s in [-1.0, 0.0, 1.0] {
                let q = p + s;
                if q > x - a && q < x + a {
                    cuts.push(q);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            if w[1] > w[0] {
                *v += integrate(|y| m.density.density(y) * psi(a, x - y), w[0], w[1], (true, true), &spec)
                    .map_err(MeasureError::from)?;
            }
        }
    }
    Ok(())
}

fn check_samples(rho: &[f64]) -> Result<(), HarmonicError> {
    if rho.len() < 8 || !rho.len().is_power_of_two() {
        return Err(HarmonicError::Invalid(format!("grid of {} samples", rho.len())));
    }
    if let Some((index, &value)) = rho.iter().enumerate().find(|(_, &v)| !(v >= -1e-12)) {
        return Err(HarmonicError::NegativeDensity { index, value });
    }
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    if (mean - 1.0).abs() > 1e-9 {
        return Err(HarmonicError::Invalid(format!("mean {mean} differs from 1")));
    }
    Ok(())
}

/// u = -(1/pi) W * rho spectrally; v = int_0^theta (1 - rho) by the
/// trapezoid rule, shifted to mean zero.
pub fn conjugate_pair(rho: &[f64]) -> Result<(Vec<f64>, Vec<f64>), HarmonicError> {
    check_samples(rho)?;
    let n = rho.len();
    let h = 1.0 / n as f64;
    let mut v = Vec::with_capacity(n);
    let mut acc = 0.0;
    v.push(0.0);
    for j in 1..n {
        acc += 0.5 * h * ((1.0 - rho[j - 1]) + (1.0 - rho[j]));
        v.push(acc);
    }
    let mean = v.iter().sum::<f64>() * h;
    v.iter_mut().for_each(|x| *x -= mean);

    let sp = Spectral::new(n);
    let c: Vec<Complex64> = sp
        .coefficients(rho)
        .into_iter()
        .enumerate()
        .map(|(q, z)| -z * w_hat(sp.frequency(q)) / PI)
        .collect();
    Ok((sp.synthesize(c), v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaneliusReport {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub osc_v: f64,
    pub bound: f64,
    pub holds: bool,
    pub ratio: f64,
}

pub fn ganelius_check(rho: &[f64]) -> Result<GaneliusReport, HarmonicError> {
    let (u, v) = conjugate_pair(rho)?;
    let h = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = rho.iter().map(|r| 1.0 - r).fold(f64::NEG_INFINITY, f64::max);
    if !(h > 0.0) {
        return Err(HarmonicError::HNonpositive(h));
    }
    if !(k > 0.0) {
        return Err(HarmonicError::KNonpositive(k));
    }
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let osc_v = vmax - vmin;
    let bound = (2.0 * PI).sqrt() * (h * k).sqrt();
    Ok(GaneliusReport {
        h,
        k,
        osc_v,
        bound,
        holds: osc_v <= bound + 1e-9,
        ratio: osc_v / bound,
    })
}

/// Samples for a measure document: closed-form densities are sampled,
/// anything with atoms is mollified with width 2 / grid_n.
pub fn density_samples(rho: &Measure, grid_n: usize) -> Result<Vec<f64>, HarmonicError> {
    match rho {
        Measure::Mixed(m) if m.diracs.is_empty() => {
            let s = sample(&m.density, grid_n);
            let mean = s.iter().sum::<f64>() / grid_n as f64;
            Ok(s.into_iter().map(|x| x / mean).collect())
        }
        _ => mollify(rho, grid_n, 2.0 / grid_n as f64),
    }
}

/// |p|^2 for a random trigonometric polynomial p of degree `half`, scaled to
/// mean 1; a nonnegative density of degree 2 * half.
pub fn random_trig_density<R: Rng>(rng: &mut R, half: usize) -> MixedMeasureT {
    let mut c: Vec<Complex64> = (0..=half)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|z| *z /= norm);
    let (mut cos, mut sin) = (Vec::new(), Vec::new());
    for k in 1..=half {
        let r: Complex64 = (0..=half - k).map(|j| c[j + k] * c[j].conj()).sum();
        cos.push(2.0 * r.re);
        sin.push(-2.0 * r.im);
    }
    MixedMeasureT::new(vec![], DensityFamily::UniformPlus { cos, sin })
}

/// Atoms of an empirical measure spread by psi_a; convenience for callers
/// holding root measures.
pub fn mollify_empirical(rho: &EmpiricalMeasure, grid_n: usize) -> Result<Vec<f64>, HarmonicError> {
    mollify(&Measure::Empirical(rho.clone()), grid_n, 2.0 / grid_n as f64)
}
