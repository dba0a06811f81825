//! Polynomials given by roots or coefficients: max modulus on the unit
//! circle, height, discrepancy of the root angles, and the inequality
//! D <= sqrt(2) sqrt(H).

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::kernels::{compensated_sum, golden_min, kernel_t};
use crate::measures::{discrepancy_empirical, Angle, EmpiricalMeasure, IntervalT, MeasureError};
use crate::sediment::Spectral;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("polynomial has a zero end coefficient")]
    ZeroCoefficient,
    #[error("roots unavailable: root finding did not converge")]
    RootsUnavailable,
    #[error("weights are not multiples of 1/{q}")]
    NonRationalWeights { q: u64 },
    #[error("invalid polynomial: {0}")]
    Invalid(String),
    #[error("malformed polynomial document: {0}")]
    Json(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Root `r e^{2 pi i theta}` stored as (modulus, angle in turns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub modulus: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolynomialSpec {
    Roots { leading: Complex64, roots: Vec<Root> },
    Coeffs(Vec<Complex64>),
}

impl PolynomialSpec {
    pub fn from_roots(leading: Complex64, roots: Vec<Root>) -> Result<Self, PolyError> {
        if roots.is_empty() {
            return Err(PolyError::Invalid("degree must be at least 1".into()));
        }
        if leading.norm() == 0.0 || !leading.re.is_finite() || !leading.im.is_finite() {
            return Err(PolyError::ZeroCoefficient);
        }
        for r in &roots {
            if !(r.modulus > 0.0 && r.modulus.is_finite() && r.angle.is_finite()) {
                return Err(PolyError::Invalid(format!("root ({}, {})", r.modulus, r.angle)));
            }
        }
        Ok(PolynomialSpec::Roots { leading, roots })
    }

    /// Monic polynomial with unimodular roots at the given angles.
    pub fn unimodular(angles: &[f64]) -> Result<Self, PolyError> {
        Self::from_roots(
            Complex64::new(1.0, 0.0),
            angles.iter().map(|&a| Root { modulus: 1.0, angle: a }).collect(),
        )
    }

    /// a_0 ... a_n.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self, PolyError> {
        if coeffs.len() < 2 {
            return Err(PolyError::Invalid("degree must be at least 1".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(PolyError::Invalid("non-finite coefficient".into()));
        }
        if coeffs[0].norm() == 0.0 || coeffs[coeffs.len() - 1].norm() == 0.0 {
            return Err(PolyError::ZeroCoefficient);
        }
        Ok(PolynomialSpec::Coeffs(coeffs))
    }

    pub fn degree(&self) -> usize {
        match self {
            PolynomialSpec::Roots { roots, .. } => roots.len(),
            PolynomialSpec::Coeffs(c) => c.len() - 1,
        }
    }

    /// (log|a_0|, log|a_n|).
    pub fn log_end_coeffs(&self) -> (f64, f64) {
        match self {
            PolynomialSpec::Roots { leading, roots } => {
                let ln_lead = leading.norm().ln();
                (ln_lead + compensated_sum(roots.iter().map(|r| r.modulus.ln())), ln_lead)
            }
            PolynomialSpec::Coeffs(c) => (c[0].norm().ln(), c[c.len() - 1].norm().ln()),
        }
    }

    /// Expand to coefficients a_0 ... a_n.
    pub fn coefficients(&self) -> Vec<Complex64> {
        match self {
            PolynomialSpec::Coeffs(c) => c.clone(),
            PolynomialSpec::Roots { leading, roots } => {
                let mut c = vec![*leading];
                for r in roots {
                    let z = Complex64::from_polar(r.modulus, 2.0 * PI * r.angle);
                    let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
                    for (k, ck) in c.iter().enumerate() {
                        next[k + 1] += ck;
                        next[k] -= ck * z;
                    }
                    c = next;
                }
                c
            }
        }
    }

    /// log|f(e^{2 pi i theta})|.
    pub fn log_abs_on_circle(&self, theta: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * theta);
        match self {
            PolynomialSpec::Roots { leading, roots } => {
                leading.norm().ln()
                    + compensated_sum(roots.iter().map(|r| {
                        (z - Complex64::from_polar(r.modulus, 2.0 * PI * r.angle)).norm().ln()
                    }))
            }
            PolynomialSpec::Coeffs(c) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for ck in c.iter().rev() {
                    acc = acc * z + ck;
                }
                acc.norm().ln()
            }
        }
    }

    /// Roots, computing them by Aberth iteration for coefficient input.
    pub fn roots(&self) -> Result<Vec<Root>, PolyError> {
        match self {
            PolynomialSpec::Roots { roots, .. } => Ok(roots.clone()),
            PolynomialSpec::Coeffs(c) => aberth(c)
                .map(|zs| {
                    zs.into_iter()
                        .map(|z| Root {
                            modulus: z.norm(),
                            angle: z.arg() / (2.0 * PI),
                        })
                        .collect()
                })
                .ok_or(PolyError::RootsUnavailable),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PolyError> {
        let v: Value = serde_json::from_str(text).map_err(|e| PolyError::Json(e.to_string()))?;
        let pair = |p: &Value| -> Result<(f64, f64), PolyError> {
            let a: [f64; 2] = serde_json::from_value(p.clone()).map_err(|e| PolyError::Json(e.to_string()))?;
            Ok((a[0], a[1]))
        };
        let list = |key: &str| -> Result<Vec<(f64, f64)>, PolyError> {
            v.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| PolyError::Json(format!("`{key}` must be an array")))?
                .iter()
                .map(pair)
                .collect()
        };
        match (v.get("roots"), v.get("coeffs")) {
            (Some(_), None) => {
                let leading = match v.get("leading") {
                    Some(l) => pair(l)?,
                    None => (1.0, 0.0),
                };
                let roots = list("roots")?
                    .into_iter()
                    .map(|(modulus, angle)| Root { modulus, angle })
                    .collect();
                Self::from_roots(Complex64::new(leading.0, leading.1), roots)
            }
            (None, Some(_)) => Self::from_coeffs(
                list("coeffs")?
                    .into_iter()
                    .map(|(re, im)| Complex64::new(re, im))
                    .collect(),
            ),
            _ => Err(PolyError::Json("expected exactly one of `roots` or `coeffs`".into())),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            PolynomialSpec::Roots { leading, roots } => serde_json::json!({
                "leading": [leading.re, leading.im],
                "roots": roots.iter().map(|r| [r.modulus, r.angle]).collect::<Vec<_>>(),
            }),
            PolynomialSpec::Coeffs(c) => serde_json::json!({
                "coeffs": c.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            }),
        }
    }
}

/// Simultaneous Aberth-Ehrlich iteration.
fn aberth(c: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = c.len() - 1;
    let lead = c[n];
    let p = |z: Complex64| -> (Complex64, Complex64) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for ck in c.iter().rev() {
            d = d * z + v;
            v = v * z + ck;
        }
        (v, d)
    };
    // Radius from the geometric mean of the roots.
    let r = (c[0].norm() / lead.norm()).powf(1.0 / n as f64);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(r, 2.0 * PI * (k as f64 + 0.25) / n as f64 + 0.4))
        .collect();
    for _ in 0..2000 {
        let mut done = true;
        for i in 0..n {
            let (v, d) = p(z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / d;
            let s: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| Complex64::new(1.0, 0.0) / (z[i] - z[j]))
                .sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * s);
            if !(w.re.is_finite() && w.im.is_finite()) {
                return None;
            }
            z[i] -= w;
            if w.norm() > 1e-14 * z[i].norm().max(1e-300) {
                done = false;
            }
        }
        if done {
            return Some(z);
        }
    }
    Some(z).filter(|zs| zs.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
}

pub fn default_grid(n: usize) -> usize {
    4096.max(64 * n)
}

/// max over |z| = 1 of log|f|, by grid sampling and golden-section refinement
/// of the five best cells.
pub fn max_log_modulus(f: &PolynomialSpec, grid_n: usize) -> (f64, Angle) {
    let g = grid_n.max(default_grid(f.degree()));
    let vals = lattice_log_abs(f, g).unwrap_or_else(|| {
        (0..g)
            .into_par_iter()
            .map(|k| f.log_abs_on_circle(k as f64 / g as f64))
            .collect()
    });
    let mut idx: Vec<usize> = (0..g).collect();
    idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let h = 1.0 / g as f64;
    let mut best = (vals[idx[0]], idx[0] as f64 * h);
    for &k in idx.iter().take(5) {
        let x = k as f64 * h;
        let (xm, fm) = golden_min(|t| -f.log_abs_on_circle(t), x - h, x + h, 1e-13);
        if -fm > best.0 {
            best = (-fm, xm);
        }
    }
    (best.0, Angle::new(best.1))
}

/// Grid values through one FFT convolution when every root is unimodular
/// and sits on the sampling lattice.
fn lattice_log_abs(f: &PolynomialSpec, g: usize) -> Option<Vec<f64>> {
    let PolynomialSpec::Roots { leading, roots } = f else {
        return None;
    };
    let mut counts = vec![0.0; g];
    for r in roots {
        if r.modulus != 1.0 {
            return None;
        }
        let t = r.angle * g as f64;
        let k = t.round();
        if (t - k).abs() > 1e-9 {
            return None;
        }
        counts[(k as i64).rem_euclid(g as i64) as usize] += 1.0;
    }
    let kernel: Vec<f64> = (0..g)
        .map(|d| if d == 0 { 0.0 } else { kernel_t(d as f64 / g as f64) })
        .collect();
    let sp = Spectral::new(g);
    let conv = sp.convolve(&counts, &kernel);
    let ln_lead = leading.norm().ln();
    Some(
        conv.into_iter()
            .zip(&counts)
            .map(|(c, &n)| if n > 0.0 { f64::NEG_INFINITY } else { ln_lead - c })
            .collect(),
    )
}

/// H[f] = (1/n) log(max|f| / sqrt|a_0 a_n|).
pub fn height_poly(f: &PolynomialSpec) -> Result<f64, PolyError> {
    let (l0, ln) = f.log_end_coeffs();
    if !l0.is_finite() || !ln.is_finite() {
        return Err(PolyError::ZeroCoefficient);
    }
    let (mx, _) = max_log_modulus(f, default_grid(f.degree()));
    Ok((mx - 0.5 * (l0 + ln)) / f.degree() as f64)
}

const ANGLE_TOL: f64 = 1e-12;

/// Number of roots, with multiplicity, whose angle lies in [alpha, beta].
pub fn sector_count(f: &PolynomialSpec, alpha: f64, beta: f64) -> Result<usize, PolyError> {
    if !(beta >= alpha && beta < alpha + 1.0) {
        return Err(PolyError::Invalid(format!("arc [{alpha}, {beta}]")));
    }
    let arc = IntervalT {
        a: Angle::new(alpha),
        length: beta - alpha,
    };
    Ok(f.roots()?
        .iter()
        .filter(|r| {
            let d = (r.angle - alpha).rem_euclid(1.0);
            arc.contains(r.angle) || d <= arc.length + ANGLE_TOL || d >= 1.0 - ANGLE_TOL
        })
        .count())
}

pub fn root_measure(f: &PolynomialSpec) -> Result<EmpiricalMeasure, PolyError> {
    let roots = f.roots()?;
    let w = 1.0 / roots.len() as f64;
    Ok(EmpiricalMeasure::new(roots.iter().map(|r| (r.angle, w)))?)
}

pub fn discrepancy_poly(f: &PolynomialSpec) -> Result<(f64, IntervalT), PolyError> {
    Ok(discrepancy_empirical(&root_measure(f)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtReport {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub bound: f64,
    pub witness: IntervalT,
    pub margin: f64,
    pub holds: bool,
}

impl EtReport {
    pub fn summary(&self, digits: usize) -> String {
        use crate::extremal::fmt_sig;
        format!(
            "D={} H={} bound={} margin={} {}",
            fmt_sig(self.d, digits),
            fmt_sig(self.h, digits),
            fmt_sig(self.bound, digits),
            fmt_sig(self.margin, digits),
            if self.holds { "holds" } else { "VIOLATED" }
        )
    }
}

pub fn check_et(f: &PolynomialSpec) -> Result<EtReport, PolyError> {
    let (d, witness) = discrepancy_poly(f)?;
    let h = height_poly(f)?;
    let bound = (2.0 * h.max(0.0)).sqrt();
    Ok(EtReport {
        d,
        h,
        bound,
        witness,
        margin: bound - d,
        holds: d <= bound + 1e-9,
    })
}

/// Project every root to the unit circle and drop the leading coefficient.
pub fn schur_reduce(f: &PolynomialSpec) -> Result<PolynomialSpec, PolyError> {
    let roots = f
        .roots()?
        .into_iter()
        .map(|r| Root { modulus: 1.0, angle: r.angle })
        .collect();
    PolynomialSpec::from_roots(Complex64::new(1.0, 0.0), roots)
}

/// Roots at angle theta (tolerance 1e-12 turns), with multiplicity.
pub fn count_at_angle(f: &PolynomialSpec, theta: f64) -> Result<usize, PolyError> {
    Ok(f.roots()?
        .iter()
        .filter(|r| Angle::new(r.angle - theta).value().abs() <= ANGLE_TOL)
        .count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealRootReport {
    pub n_plus: usize,
    pub n_minus: usize,
    pub bound: f64,
    pub holds: bool,
}

/// N_+ and N_- against sqrt(2) sqrt(H) n.
pub fn real_root_check(f: &PolynomialSpec) -> Result<RealRootReport, PolyError> {
    let n_plus = count_at_angle(f, 0.0)?;
    let n_minus = count_at_angle(f, 0.5)?;
    let bound = (2.0 * height_poly(f)?.max(0.0)).sqrt() * f.degree() as f64;
    Ok(RealRootReport {
        n_plus,
        n_minus,
        bound,
        holds: n_plus as f64 <= bound + 1e-9 && n_minus as f64 <= bound + 1e-9,
    })
}

/// prod_j (z - e^{2 pi i theta_j})^{p_j} for weights p_j / q.
pub fn synthesize_poly(rho: &EmpiricalMeasure, q: u64) -> Result<PolynomialSpec, PolyError> {
    let mut roots = Vec::new();
    let mut total = 0u64;
    for &(a, w) in rho.atoms() {
        let p = w * q as f64;
        let k = p.round();
        if (p - k).abs() > 1e-9 * q as f64 || k < 1.0 {
            return Err(PolyError::NonRationalWeights { q });
        }
        total += k as u64;
        roots.extend((0..k as u64).map(|_| Root { modulus: 1.0, angle: a.value() }));
    }
    if total != q {
        return Err(PolyError::NonRationalWeights { q });
    }
    PolynomialSpec::from_roots(Complex64::new(1.0, 0.0), roots)
}
