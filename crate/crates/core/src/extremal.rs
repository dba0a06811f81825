//! Explicit extremal constructions: the function Phi(L, R), the critical
//! radius, the admissibility curve L(R), the line distributions of kinds
//! I/II/III, the circle families rho_I and rho_II, periodization, and the
//! numerical table of H~, D~ along the curve.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kernels::{brent, integrate, kernel_r, pv_integrate, QuadError, QuadratureSpec, Sum};
use crate::measures::{
    self, d_tilde, h_tilde, AdmissibleDistR, AdmissibleKind, DensityFamily, MeasureError,
    MixedMeasureT, PeriodizedDensity,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtremalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("x = {0} is a point mass location")]
    AtDirac(f64),
    #[error("scaling factor {lambda} too large for periodization")]
    LambdaTooLarge { lambda: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// pv of pi sqrt((R^2 - x^2)(x^2 - L^2)) / (x^2 - 1) over [L, R].
pub fn phi(l: f64, r: f64, spec: &QuadratureSpec) -> Result<f64, ExtremalError> {
    if !(l >= 0.0 && l < 1.0 && r > 1.0) {
        return Err(ExtremalError::Domain(format!("need 0 <= L < 1 < R, got L = {l}, R = {r}")));
    }
    let w = r - l;
    let pole = ((1.0 - l) / w).sqrt().asin();
    let sp = pole.sin();
    let g = |t: f64| {
        let (s, c) = t.sin_cos();
        let x = l + w * s * s;
        // x - 1 = w (sin t - sin p)(sin t + sin p), kept away from cancellation.
        let dx = w * 2.0 * (0.5 * (t + pole)).cos() * (0.5 * (t - pole)).sin() * (s + sp);
        PI * 2.0 * w * w * s * s * c * c * ((r + x) * (x + l)).sqrt() / (dx * (x + 1.0))
    };
    Ok(pv_integrate(g, 0.0, 0.5 * PI, pole, spec)?)
}

/// sqrt(R^2 - 1) ln(R + sqrt(R^2 - 1)) - R, which equals Phi(0, R) / pi.
pub fn phi_zero_closed_form(r: f64) -> f64 {
    let s = (r * r - 1.0).sqrt();
    s * (r + s).ln() - r
}

pub fn r_critical() -> f64 {
    static RC: OnceLock<f64> = OnceLock::new();
    *RC.get_or_init(|| brent(phi_zero_closed_form, 1.0 + 1e-9, 3.0, 1e-15).expect("bracketed root"))
}

/// L(R) on (1, R_c) by bisection of Phi(., R), increasing in L.
pub fn l_of_r(r: f64) -> Result<f64, ExtremalError> {
    let rc = r_critical();
    if !(r > 1.0 && r < rc) {
        return Err(ExtremalError::Domain(format!("R = {r} outside (1, {rc})")));
    }
    let spec = QuadratureSpec::with_tol(1e-11);
    let (mut lo, mut hi) = (1e-6, 1.0 - 1e-6);
    if phi(lo, r, &spec)? > 0.0 {
        lo = 0.0;
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if phi(mid, r, &spec)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Kind I for `None`, kind II for R >= R_c, kind III with L = L(R) otherwise.
pub fn make_admissible(r: Option<f64>, lambda: f64) -> Result<AdmissibleDistR, ExtremalError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ExtremalError::Domain(format!("lambda = {lambda}")));
    }
    match r {
        None => Ok(AdmissibleDistR::type1(lambda)),
        Some(r) if !(r > 1.0) || !r.is_finite() => {
            Err(ExtremalError::Domain(format!("R = {r} must exceed 1")))
        }
        Some(r) if r >= r_critical() => Ok(AdmissibleDistR::type2(r, lambda)),
        Some(r) => Ok(AdmissibleDistR::type3(r, l_of_r(r)?, lambda)),
    }
}

pub fn density_r(mu: &AdmissibleDistR, x: f64) -> Result<f64, ExtremalError> {
    if mu.diracs().iter().any(|d| d.0 == x) {
        return Err(ExtremalError::AtDirac(x));
    }
    Ok(mu.density(x))
}

/// (W~ * mu)(x) on the line for the unscaled distribution, by quadrature
/// out to |y| = 2^24 R plus the asymptotic tail c/y^2.
pub fn line_potential(mu: &AdmissibleDistR, x: f64) -> Result<f64, ExtremalError> {
    let mu = mu.with_lambda(1.0);
    let spec = QuadratureSpec {
        panels: 2,
        ..QuadratureSpec::with_tol(1e-11)
    };
    let mut bps: Vec<f64> = mu.breakpoints();
    bps.extend(mu.breakpoints().iter().map(|b| -b));
    let reach = bps.iter().fold(1.0f64, |a, b| a.max(b.abs())).max(x.abs()) * 2.0;
    let mut pts = bps.clone();
    pts.push(x);
    pts.push(0.0);
    let mut edge = reach;
    for _ in 0..24 {
        pts.push(edge);
        pts.push(-edge);
        edge *= 2.0;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let mut s = Sum::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sing = |p: f64| bps.iter().any(|&q| (q - p).abs() < 1e-14) || (p - x).abs() < 1e-14;
        s.add(integrate(
            |y| kernel_r(x - y) * mu.density(y),
            a,
            b,
            (sing(a), sing(b)),
            &spec,
        )?);
    }
    let c = mu.tail_constant();
    // integral over |y| > X of -log|y| c / y^2 with X = edge
    s.add(-2.0 * c * (edge.ln() + 1.0) / edge);
    for (p, w) in mu.diracs() {
        s.add(w * kernel_r(x - p));
    }
    Ok(s.value())
}

pub fn rho_type1(m: f64) -> Result<MixedMeasureT, ExtremalError> {
    if !(m > 0.0 && m <= 0.5) {
        return Err(ExtremalError::Domain(format!("m = {m} outside (0, 1/2]")));
    }
    let density = if m == 0.5 {
        DensityFamily::Zero
    } else {
        DensityFamily::TypeI { m }
    };
    Ok(MixedMeasureT::new(vec![(0.0, 2.0 * m)], density))
}

/// Point mass of rho_II at +-M.
pub fn type2_t_mass(big_m: f64, r: f64, l: f64) -> f64 {
    let s = |a: f64| (PI * a).sin();
    (-s(big_m - r) * s(big_m + r) * s(big_m - l) * s(big_m + l)).sqrt() / (2.0 * PI * big_m).sin()
}

pub fn rho_type2(big_m: f64, r: f64, l: f64) -> Result<MixedMeasureT, ExtremalError> {
    if !(0.0 <= l && l < big_m && big_m < r && r < 0.5) {
        return Err(ExtremalError::Domain(format!(
            "need 0 <= L < M < R < 1/2, got L = {l}, M = {big_m}, R = {r}"
        )));
    }
    let m = type2_t_mass(big_m, r, l);
    Ok(MixedMeasureT::new(
        vec![(-big_m, m), (big_m, m)],
        DensityFamily::TypeII { big_m, r, l },
    ))
}

/// rho_o = 1 + sum_j mu(x - j) as a circle measure.
pub fn periodize(mu: &AdmissibleDistR) -> Result<MixedMeasureT, ExtremalError> {
    let lambda = mu.lambda;
    let ok = match mu.kind {
        AdmissibleKind::I => lambda <= 1.0,
        _ => lambda <= 0.5 && lambda * mu.m < 0.5,
    };
    if !ok {
        return Err(ExtremalError::LambdaTooLarge { lambda });
    }
    let p = PeriodizedDensity::new(*mu);
    Ok(MixedMeasureT::new(
        mu.diracs(),
        DensityFamily::Periodized(Box::new(p)),
    ))
}

pub fn periodized_radii(rho: &MixedMeasureT) -> (Option<f64>, Option<f64>) {
    match &rho.density {
        DensityFamily::Periodized(p) => (p.l_circ, p.r_circ),
        _ => (None, None),
    }
}

/// Radii R_0 .. R_19 of the reference table; R_19 is R_c to four decimals.
pub const TABLE_RADII: [f64; 20] = [
    1.1, 1.1292, 1.1592, 1.19, 1.2216, 1.2541, 1.2874, 1.3216, 1.3567, 1.3927, 1.4297, 1.4677,
    1.5067, 1.5467, 1.5878, 1.63, 1.6733, 1.7177, 1.7633, 1.8102,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub k: usize,
    pub r: f64,
    pub l: f64,
    pub h: f64,
    pub d: f64,
    /// H_k / D_{k+1}^2, absent on the last row.
    pub ratio: Option<f64>,
}

/// Kind III distribution at radius R, with L = 0 once R reaches R_c.
fn table_dist(r: f64) -> Result<AdmissibleDistR, ExtremalError> {
    let l = if r < r_critical() { l_of_r(r)? } else { 0.0 };
    Ok(AdmissibleDistR::type3(r, l, 1.0))
}

pub fn table1() -> Result<Vec<TableRow>, ExtremalError> {
    let base: Vec<(f64, f64, f64)> = TABLE_RADII
        .par_iter()
        .map(|&r| {
            let mu = table_dist(r)?;
            Ok((mu.l, h_tilde(&mu)?, d_tilde(&mu)?))
        })
        .collect::<Result<_, ExtremalError>>()?;
    Ok((0..base.len())
        .map(|k| TableRow {
            k,
            r: TABLE_RADII[k],
            l: base[k].0,
            h: base[k].1,
            d: base[k].2,
            ratio: base.get(k + 1).map(|next| base[k].1 / (next.2 * next.2)),
        })
        .collect())
}

/// Decimal rendering with `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - e).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn table1_csv(rows: &[TableRow], digits: usize) -> String {
    let mut out = String::from("k,R,H,D,ratio\n");
    for row in rows {
        let ratio = row.ratio.map(|v| fmt_sig(v, digits)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.k,
            fmt_sig(row.r, digits),
            fmt_sig(row.h, digits),
            fmt_sig(row.d, digits),
            ratio
        );
    }
    out
}

/// Convenience: (H~, D~, G~) of an admissible distribution.
pub fn tilde_functionals(mu: &AdmissibleDistR) -> Result<(f64, f64, f64), ExtremalError> {
    let h = h_tilde(mu)?;
    let d = d_tilde(mu)?;
    Ok((h, d, measures::g_tilde(mu)?))
}
