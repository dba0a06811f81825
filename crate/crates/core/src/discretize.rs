//! Continuum to discrete: moment-matched splitting of a density into
//! endpoint atoms, rationalization of the weights, and the G chain
//! continuum -> discrete -> rational.

use std::cell::Cell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extremal::{fmt_sig, rho_type1, ExtremalError};
use crate::kernels::{integrate, QuadError, QuadratureSpec};
use crate::measures::{
    discrepancy_empirical, discrepancy_mixed, height_empirical, height_mixed, Angle, EmpiricalMeasure,
    MeasureError, MixedMeasureT,
};
use crate::polynomials::{check_et, synthesize_poly, EtReport, PolyError};

#[derive(Debug, Error)]
pub enum DiscretizeError {
    #[error("density is negative on [{a}, {b}]")]
    NegativeDensity { a: f64, b: f64 },
    #[error("q = {q} is smaller than the number of atoms ({atoms})")]
    QTooSmall { q: u64, atoms: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Extremal(#[from] ExtremalError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Endpoint masses (m1 at a, m2 at b) with the same mass and first moment
/// as `rho` on [a, b]. `breaks` are interior points where `rho` is not smooth.
pub fn cell_moments<F: Fn(f64) -> f64 + Sync>(
    rho: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<(f64, f64), DiscretizeError> {
    if !(b > a) {
        return Err(DiscretizeError::Invalid(format!("cell [{a}, {b}]")));
    }
    let negative = Cell::new(false);
    let f = |x: f64| {
        let v = rho(x);
        if v < -1e-12 {
            negative.set(true);
        }
        v
    };
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    let w = b - a;
    let (mut m1, mut m2) = (0.0, 0.0);
    for s in cuts.windows(2) {
        let (lo, hi) = (s[0], s[1]);
        if hi <= lo {
            continue;
        }
        m1 += integrate(|x| (b - x) / w * f(x), lo, hi, (true, true), spec)?;
        m2 += integrate(|x| (x - a) / w * f(x), lo, hi, (true, true), spec)?;
    }
    if negative.get() {
        return Err(DiscretizeError::NegativeDensity { a, b });
    }
    Ok((m1, m2))
}

pub fn moment_match_cell<F: Fn(f64) -> f64 + Sync>(
    rho: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, f64), DiscretizeError> {
    cell_moments(rho, a, b, &[], spec)
}

/// Diracs kept, density replaced by endpoint atoms on the cells [j/n, (j+1)/n].
pub fn discretize_measure(rho: &MixedMeasureT, n: usize) -> Result<EmpiricalMeasure, DiscretizeError> {
    if n == 0 {
        return Err(DiscretizeError::Invalid("n must be positive".into()));
    }
    let spec = QuadratureSpec::with_tol(1e-13);
    let mut breaks: Vec<f64> = rho
        .density
        .breakpoints()
        .into_iter()
        .map(|p| p.rem_euclid(1.0))
        .collect();
    breaks.sort_by(f64::total_cmp);
    let fam = &rho.density;
    let cells: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let a = j as f64 / n as f64;
            let b = (j + 1) as f64 / n as f64;
            cell_moments(|x| fam.density(x), a, b, &breaks, &spec)
        })
        .collect::<Result<_, _>>()?;
    let mut w = vec![0.0; n];
    for (j, (m1, m2)) in cells.into_iter().enumerate() {
        w[j] += m1;
        w[(j + 1) % n] += m2;
    }
    let atoms = w
        .into_iter()
        .enumerate()
        .filter(|&(_, x)| x > 0.0)
        .map(|(j, x)| (j as f64 / n as f64, x))
        .chain(rho.diracs.iter().map(|&(a, m)| (a.value(), m)));
    Ok(EmpiricalMeasure::new(atoms)?)
}

/// Cumulative rounding of the normalized weights into p_j / q, in circle order.
///
/// p_j = round(q S_j) - round(q S_{j-1}) with S_j the partial sums, so the p_j sum
/// to q and |p_j / q - c_j| <= 1/q. Deficits are spread evenly along the circle.
pub fn rationalize(rho: &EmpiricalMeasure, q: u64) -> Result<EmpiricalMeasure, DiscretizeError> {
    let atoms = rho.atoms();
    if (q as usize) < atoms.len() || q == 0 {
        return Err(DiscretizeError::QTooSmall { q, atoms: atoms.len() });
    }
    let total = rho.total();
    let last = atoms.len() - 1;
    let mut partial = 0.0;
    let mut prev = 0u64;
    let mut out = Vec::with_capacity(atoms.len());
    for (j, &(a, w)) in atoms.iter().enumerate() {
        partial += w / total;
        let k = if j == last { q } else { ((partial * q as f64).round() as u64).min(q) };
        if k > prev {
            out.push((a.value(), (k - prev) as f64 / q as f64));
            prev = k;
        }
    }
    Ok(EmpiricalMeasure::new(out)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "G")]
    pub g: f64,
}

impl Stage {
    fn new(d: f64, h: f64) -> Self {
        Stage { d, h, g: h / (d * d) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub m: f64,
    pub n: usize,
    pub q: u64,
    pub continuum: Stage,
    pub discrete: Stage,
    pub rational: Stage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<EtReport>,
}

impl SharpnessReport {
    pub fn g_continuum(&self) -> f64 {
        self.continuum.g
    }
    pub fn g_discrete(&self) -> f64 {
        self.discrete.g
    }
    pub fn g_rational(&self) -> f64 {
        self.rational.g
    }
}

/// Grid used for heights of atomic measures with n atoms.
fn atomic_grid(n: usize) -> usize {
    (4 * n).max(4096)
}

pub fn continuum_stage(m: f64) -> Result<Stage, DiscretizeError> {
    let rho = rho_type1(m)?;
    let (d, _) = discrepancy_mixed(&rho)?;
    let (h, _) = height_mixed(&rho, 2048)?;
    Ok(Stage::new(d, h))
}

pub fn atomic_stage(rho: &EmpiricalMeasure) -> Result<Stage, DiscretizeError> {
    let (d, _) = discrepancy_empirical(rho)?;
    let (h, _) = height_empirical(rho, atomic_grid(rho.len()));
    Ok(Stage::new(d, h))
}

/// rho_I(m) -> discretize(n) -> rationalize(q), with the polynomial check on
/// the rational stage when `with_polynomial` is set.
pub fn sharpness_pipeline(m: f64, n: usize, q: u64, with_polynomial: bool) -> Result<SharpnessReport, DiscretizeError> {
    if !(m > 0.0 && m <= 0.5) {
        return Err(DiscretizeError::Invalid(format!("m = {m} outside (0, 1/2]")));
    }
    let continuum = continuum_stage(m)?;
    let rho_n = discretize_measure(&rho_type1(m)?, n)?;
    let discrete = atomic_stage(&rho_n)?;
    let rho_q = rationalize(&rho_n, q)?;
    let rational = atomic_stage(&rho_q)?;
    let polynomial = if with_polynomial {
        Some(check_et(&synthesize_poly(&rho_q, q)?)?)
    } else {
        None
    };
    Ok(SharpnessReport {
        m,
        n,
        q,
        continuum,
        discrete,
        rational,
        polynomial,
    })
}

/// CSV of (n, G_discrete) for a sequence of cell counts.
pub fn sharpness_trace(m: f64, ns: &[usize], digits: usize) -> Result<String, DiscretizeError> {
    let rho = rho_type1(m)?;
    let mut out = String::from("n,G\n");
    for &n in ns {
        let s = atomic_stage(&discretize_measure(&rho, n)?)?;
        out.push_str(&format!("{},{}\n", n, fmt_sig(s.g, digits)));
    }
    Ok(out)
}

/// Atom at angle `x` if present.
pub fn weight_at(rho: &EmpiricalMeasure, x: f64) -> f64 {
    rho.atoms()
        .iter()
        .filter(|(a, _)| Angle::new(a.value() - x).value().abs() < 1e-12)
        .map(|&(_, w)| w)
        .sum()
}
