//! Measures on the circle T = R/Z and signed distributions on R, with the
//! discrepancy and height functionals on both sides.
//!
//! Angles are measured in turns. Every angle is stored by its representative
//! in [-1/2, 1/2).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::kernels::{
    golden_min, integrate, integrate_log_singular, integrate_sqrt_endpoints, kernel_t,
    pv_integrate, QuadError, QuadratureSpec,
};
use crate::sediment::GridDensity;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("measure is not even")]
    NotEven,
    #[error("discrepancy is zero")]
    ZeroDiscrepancy,
    #[error("invalid weight {0}")]
    InvalidWeight(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("malformed measure document: {0}")]
    Json(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(into = "f64", from = "f64")]
pub struct Angle(f64);

impl Angle {
    pub fn new(x: f64) -> Self {
        let r = x - (x + 0.5).floor();
        // (x + 0.5).floor() can round so that r lands exactly on 1/2.
        Angle(if r >= 0.5 { r - 1.0 } else { r })
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl From<f64> for Angle {
    fn from(x: f64) -> Angle {
        Angle::new(x)
    }
}

/// Closed arc [a, a + length].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalT {
    pub a: Angle,
    pub length: f64,
}

impl IntervalT {
    pub fn contains(&self, x: f64) -> bool {
        let d = x - self.a.value();
        let d = d - d.floor();
        d <= self.length + 1e-15 || d >= 1.0 - 1e-15
    }
}

/// Signed distance x - y on the circle, in [-1/2, 1/2).
pub fn circ_diff(x: f64, y: f64) -> f64 {
    Angle::new(x - y).value()
}

const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<(Angle, f64)>,
    total: f64,
}

impl EmpiricalMeasure {
    /// Sorts atoms by angle and merges coincident angles (within 1e-12 turns,
    /// including across the wrap point).
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, MeasureError> {
        let mut v: Vec<(Angle, f64)> = Vec::new();
        for (x, w) in atoms {
            if !(w.is_finite() && w > 0.0) || !x.is_finite() {
                return Err(MeasureError::InvalidWeight(w));
            }
            v.push((Angle::new(x), w));
        }
        if v.is_empty() {
            return Err(MeasureError::EmptyMeasure);
        }
        v.sort_by(|a, b| a.0.value().total_cmp(&b.0.value()));
        let mut merged: Vec<(Angle, f64)> = Vec::with_capacity(v.len());
        for (a, w) in v {
            match merged.last_mut() {
                Some(last) if a.value() - last.0.value() <= MERGE_TOL => last.1 += w,
                _ => merged.push((a, w)),
            }
        }
        if merged.len() > 1 {
            let first = merged[0].0.value();
            let last = merged[merged.len() - 1].0.value();
            if first + 1.0 - last <= MERGE_TOL {
                let (_, w) = merged.pop().unwrap();
                merged[0].1 += w;
            }
        }
        let total = crate::kernels::compensated_sum(merged.iter().map(|a| a.1));
        Ok(Self {
            atoms: merged,
            total,
        })
    }

    /// n equally spaced atoms of weight 1/n starting at 0.
    pub fn uniform(n: usize) -> Self {
        Self::new((0..n).map(|k| (k as f64 / n as f64, 1.0 / n as f64))).unwrap()
    }

    pub fn atoms(&self) -> &[(Angle, f64)] {
        &self.atoms
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn rotate(&self, t: f64) -> Self {
        Self::new(self.atoms.iter().map(|&(a, w)| (a.value() + t, w))).unwrap()
    }

    pub fn potential(&self, x: f64) -> f64 {
        crate::kernels::compensated_sum(self.atoms.iter().map(|&(a, w)| w * kernel_t(x - a.value())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdmissibleKind {
    I,
    II,
    III,
}

/// Admissible distribution on R scaled by `lambda`: the density
/// x -> mu(x / lambda) plus point masses. For kind I the point mass is
/// lambda at 0; for kinds II and III it is lambda * m at +-lambda.
/// `r` and `l` are zero where the kind has no such parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleDistR {
    pub kind: AdmissibleKind,
    pub lambda: f64,
    pub r: f64,
    pub l: f64,
    pub m: f64,
}

/// Dirac mass m(R, L) = pi sqrt((R^2 - 1)(1 - L^2)) / 2.
pub fn dirac_mass(r: f64, l: f64) -> f64 {
    0.5 * PI * ((r * r - 1.0) * (1.0 - l * l)).sqrt()
}

impl AdmissibleDistR {
    pub fn type1(lambda: f64) -> Self {
        Self {
            kind: AdmissibleKind::I,
            lambda,
            r: 0.0,
            l: 0.0,
            m: 1.0,
        }
    }

    pub fn type2(r: f64, lambda: f64) -> Self {
        Self {
            kind: AdmissibleKind::II,
            lambda,
            r,
            l: 0.0,
            m: dirac_mass(r, 0.0),
        }
    }

    pub fn type3(r: f64, l: f64, lambda: f64) -> Self {
        Self {
            kind: AdmissibleKind::III,
            lambda,
            r,
            l,
            m: dirac_mass(r, l),
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    /// Unscaled continuous part including the -1 background.
    pub fn base_density(&self, x: f64) -> f64 {
        let ax = x.abs();
        match self.kind {
            AdmissibleKind::I => {
                let a = 1.0 / PI;
                if ax >= a {
                    // sqrt(x^2 - a^2)/|x| - 1 without cancellation
                    -a * a / (ax * ((ax * ax - a * a).sqrt() + ax))
                } else {
                    -1.0
                }
            }
            AdmissibleKind::II | AdmissibleKind::III => {
                let (r, l) = (self.r, self.l);
                let x2 = x * x;
                if ax >= r {
                    let p = (x2 - r * r) * (x2 - l * l);
                    let q = x2 - 1.0;
                    let num = (2.0 - r * r - l * l) * x2 + r * r * l * l - 1.0;
                    num / (q * (p.sqrt() + q))
                } else if ax <= l {
                    ((r * r - x2) * (l * l - x2)).sqrt() / (1.0 - x2) - 1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Scaled continuous part mu(x / lambda), background included.
    pub fn density(&self, x: f64) -> f64 {
        self.base_density(x / self.lambda)
    }

    /// Point masses (position, mass) after scaling.
    pub fn diracs(&self) -> Vec<(f64, f64)> {
        match self.kind {
            AdmissibleKind::I => vec![(0.0, self.lambda)],
            _ => vec![
                (-self.lambda, self.lambda * self.m),
                (self.lambda, self.lambda * self.m),
            ],
        }
    }

    /// Points where the scaled density has square-root behaviour.
    pub fn breakpoints(&self) -> Vec<f64> {
        let s = self.lambda;
        match self.kind {
            AdmissibleKind::I => vec![s / PI],
            AdmissibleKind::II => vec![s * self.r],
            AdmissibleKind::III => {
                if self.l > 0.0 {
                    vec![s * self.l, s * self.r]
                } else {
                    vec![s * self.r]
                }
            }
        }
    }

    /// lim x^2 mu(x) as x -> infinity, scaled.
    pub fn tail_constant(&self) -> f64 {
        let c = match self.kind {
            AdmissibleKind::I => -0.5 / (PI * PI),
            _ => 1.0 - 0.5 * (self.r * self.r + self.l * self.l),
        };
        c * self.lambda * self.lambda
    }
}

fn tight_spec() -> QuadratureSpec {
    QuadratureSpec::with_tol(1e-13)
}

/// H~ from the closed forms (kinds I, II) or the sqrt-endpoint integral (III).
pub fn h_tilde(mu: &AdmissibleDistR) -> Result<f64, MeasureError> {
    let s2 = mu.lambda * mu.lambda;
    Ok(match mu.kind {
        AdmissibleKind::I => 0.5 * s2,
        AdmissibleKind::II => s2 * 0.5 * PI * PI * (mu.r * mu.r - 2.0),
        AdmissibleKind::III => {
            let (r, l) = (mu.r, mu.l);
            let v = integrate_sqrt_endpoints(
                |x: f64| ((r * r - x * x) * (x * x - l * l)).max(0.0).sqrt() / (x + 1.0),
                l,
                r,
                &tight_spec(),
            )?;
            s2 * 2.0 * PI * v
        }
    })
}

/// H~ by direct quadrature of the integral representations, for every kind.
pub fn h_tilde_quadrature(mu: &AdmissibleDistR, spec: &QuadratureSpec) -> Result<f64, MeasureError> {
    let s2 = mu.lambda * mu.lambda;
    match mu.kind {
        AdmissibleKind::I => {
            let a = 1.0 / PI;
            let v = integrate_sqrt_endpoints(|y: f64| (a * a - y * y).max(0.0).sqrt(), -a, a, spec)?;
            Ok(s2 * 2.0 * PI * 0.5 * v)
        }
        AdmissibleKind::II => {
            // Pole kept at the representable point y = 1; y - 1 is exact nearby.
            let r = mu.r;
            let g = |y: f64| y * y * ((r - y) * (r + y)).max(0.0).sqrt() / ((y - 1.0) * (y + 1.0));
            let v = pv_integrate(g, 0.0, r, 1.0, spec)?;
            Ok(s2 * 2.0 * PI * v)
        }
        AdmissibleKind::III => h_tilde(mu),
    }
}

pub fn d_tilde(mu: &AdmissibleDistR) -> Result<f64, MeasureError> {
    Ok(match mu.kind {
        AdmissibleKind::I => mu.lambda,
        AdmissibleKind::II => mu.lambda * (PI * (mu.r * mu.r - 1.0).sqrt() - 2.0),
        AdmissibleKind::III => {
            let (r, l) = (mu.r, mu.l);
            let inner = if l > 0.0 {
                0.5 * integrate_sqrt_endpoints(
                    |x: f64| ((r * r - x * x) * (l * l - x * x)).max(0.0).sqrt() / (1.0 - x * x),
                    -l,
                    l,
                    &tight_spec(),
                )?
            } else {
                0.0
            };
            mu.lambda * (2.0 * mu.m - 2.0 + 2.0 * inner)
        }
    })
}

pub fn g_tilde(mu: &AdmissibleDistR) -> Result<f64, MeasureError> {
    let d = d_tilde(mu)?;
    Ok(h_tilde(mu)? / (d * d))
}

/// Lattice sum of a scaled admissible density, periodized onto the circle.
///
/// Terms with |j| < `j_exact` are summed pointwise; the remaining smooth
/// part is stored as a Chebyshev interpolant on [-1/2, 1/2].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodizedDensity {
    pub mu: AdmissibleDistR,
    pub j_exact: i64,
    pub j_trunc: i64,
    far: Vec<f64>,
    pub l_circ: Option<f64>,
    pub r_circ: Option<f64>,
}

const CHEB_NODES: usize = 48;

/// Chebyshev nodes on [-1/2, 1/2] with their barycentric weights.
fn cheb_nodes() -> &'static [(f64, f64); CHEB_NODES] {
    static NODES: std::sync::OnceLock<[(f64, f64); CHEB_NODES]> = std::sync::OnceLock::new();
    NODES.get_or_init(|| {
        std::array::from_fn(|k| {
            let th = (2 * k + 1) as f64 * PI / (2 * CHEB_NODES) as f64;
            let w = if k % 2 == 0 { th.sin() } else { -th.sin() };
            (0.5 * th.cos(), w)
        })
    })
}

impl PeriodizedDensity {
    pub fn new(mu: AdmissibleDistR) -> Self {
        // C = 4 max_{x in [5,10]} |mu(x)| x^2
        let c = 4.0
            * (0..=200)
                .map(|i| {
                    let x = 5.0 + 5.0 * i as f64 / 200.0;
                    (mu.density(x) * x * x).abs()
                })
                .fold(0.0, f64::max);
        let j_trunc = ((c / 1e-10).sqrt().ceil() as i64).max(8);
        let reach = mu.breakpoints().into_iter().fold(mu.lambda, f64::max);
        let j_exact = ((reach + 0.5).ceil() as i64 + 1).min(j_trunc);
        let tail_c = mu.tail_constant();
        let far: Vec<f64> = (0..CHEB_NODES)
            .into_par_iter()
            .map(|k| {
                let y = cheb_nodes()[k].0;
                let mut s = crate::kernels::Sum::new();
                for j in (j_exact..=j_trunc).rev() {
                    let jf = j as f64;
                    s.add(mu.density(y - jf));
                    s.add(mu.density(y + jf));
                }
                let jt = j_trunc as f64 + 0.5;
                s.add(tail_c * (1.0 / (jt - y) + 1.0 / (jt + y)));
                s.value()
            })
            .collect();
        let mut p = Self {
            mu,
            j_exact,
            j_trunc,
            far,
            l_circ: None,
            r_circ: None,
        };
        p.find_sign_change_radii();
        p
    }

    fn far_sum(&self, y: f64) -> f64 {
        // Barycentric interpolation at Chebyshev points of the first kind.
        let mut num = 0.0;
        let mut den = 0.0;
        for (&(xk, wk), &fk) in cheb_nodes().iter().zip(&self.far) {
            let d = y - xk;
            if d == 0.0 {
                return fk;
            }
            let w = wk / d;
            num += w * fk;
            den += w;
        }
        num / den
    }

    /// 1 + sum_j mu_c(y - j) for the continuous part.
    pub fn density(&self, y: f64) -> f64 {
        let y = Angle::new(y).value();
        let mut s = 1.0 + self.mu.density(y);
        for j in 1..self.j_exact {
            let jf = j as f64;
            s += self.mu.density(y - jf) + self.mu.density(y + jf);
        }
        s + self.far_sum(y)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = Vec::new();
        for p in self.mu.breakpoints() {
            for j in -self.j_exact..=self.j_exact {
                for q in [p + j as f64, -p + j as f64] {
                    if (-0.5..=0.5).contains(&q) {
                        b.push(Angle::new(q).value());
                    }
                }
            }
        }
        b
    }

    fn find_sign_change_radii(&mut self) {
        if self.mu.kind == AdmissibleKind::I {
            return;
        }
        let lam = self.mu.lambda;
        let f = |x: f64| self.density(x);
        let l_out = lam * self.mu.l;
        let l_circ = (self.mu.l > 0.0 && f(0.0) >= 0.0).then(|| bisect_sign(&f, 0.0, l_out));
        let r_in = lam * self.mu.r;
        let r_circ = (r_in < 0.5 && f(0.5) >= 0.0).then(|| bisect_sign(&f, 0.5, r_in));
        self.l_circ = l_circ;
        self.r_circ = r_circ;
    }
}

/// Boundary of {f >= 0} between `inside` (f >= 0) and `outside` (f < 0).
fn bisect_sign<F: Fn(f64) -> f64>(f: &F, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if f(mid) >= 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
        if (inside - outside).abs() < 1e-14 {
            break;
        }
    }
    inside
}

/// Continuous part of a circle measure.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityFamily {
    /// sqrt(1 - 4m^2 / sin^2(pi x)) on |x| >= asin(2m)/pi.
    TypeI { m: f64 },
    /// Sine-product density on |x| in [0, L] u [R, 1/2].
    TypeII { big_m: f64, r: f64, l: f64 },
    Periodized(Box<PeriodizedDensity>),
    Grid(GridDensity),
    /// 1 + sum_k (cos[k-1] cos(2 pi k x) + sin[k-1] sin(2 pi k x)).
    UniformPlus { cos: Vec<f64>, sin: Vec<f64> },
    Zero,
}

impl DensityFamily {
    pub fn uniform() -> Self {
        DensityFamily::UniformPlus {
            cos: vec![],
            sin: vec![],
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let x = Angle::new(x).value();
        match self {
            DensityFamily::TypeI { m } => {
                let s = (PI * x).sin();
                let v = 1.0 - 4.0 * m * m / (s * s);
                if x.abs() >= (2.0 * m).min(1.0).asin() / PI && v > 0.0 {
                    v.sqrt()
                } else {
                    0.0
                }
            }
            DensityFamily::TypeII { big_m, r, l } => {
                let ax = x.abs();
                if ax <= *l || ax >= *r {
                    let sp = |a: f64| (PI * a).sin();
                    let num = sp(x - r) * sp(x + r) * sp(x - l) * sp(x + l);
                    let den = (sp(x - big_m) * sp(x + big_m)).abs();
                    num.max(0.0).sqrt() / den
                } else {
                    0.0
                }
            }
            DensityFamily::Periodized(p) => p.density(x),
            DensityFamily::Grid(g) => g.value_at(x),
            DensityFamily::UniformPlus { cos, sin } => {
                let mut s = 1.0;
                for (k, c) in cos.iter().enumerate() {
                    s += c * (2.0 * PI * (k + 1) as f64 * x).cos();
                }
                for (k, c) in sin.iter().enumerate() {
                    s += c * (2.0 * PI * (k + 1) as f64 * x).sin();
                }
                s
            }
            DensityFamily::Zero => 0.0,
        }
    }

    /// Sorted points in [-1/2, 1/2) where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = match self {
            DensityFamily::TypeI { m } => {
                let s0 = (2.0 * m).min(1.0).asin() / PI;
                if s0 >= 0.5 {
                    vec![]
                } else {
                    vec![-s0, s0]
                }
            }
            DensityFamily::TypeII { r, l, .. } => {
                let mut v = vec![-r, *r];
                if *l > 0.0 {
                    v.extend([-l, *l]);
                }
                v
            }
            DensityFamily::Periodized(p) => p.breakpoints(),
            DensityFamily::Grid(g) => (0..g.n_cells())
                .map(|j| Angle::new((j as f64 - 0.5) / g.n_cells() as f64).value())
                .collect(),
            DensityFamily::UniformPlus { .. } | DensityFamily::Zero => vec![],
        };
        b.iter_mut().for_each(|x| *x = Angle::new(*x).value());
        b.sort_by(f64::total_cmp);
        b.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        b
    }

    fn has_gaps(&self) -> bool {
        matches!(self, DensityFamily::TypeI { .. } | DensityFamily::TypeII { .. })
    }

    /// Smooth pieces covering one period; pieces where the density vanishes
    /// identically are flagged.
    pub fn pieces(&self) -> Vec<Piece> {
        if matches!(self, DensityFamily::Zero) {
            return vec![];
        }
        let b = self.breakpoints();
        if b.is_empty() {
            let zero = matches!(self, DensityFamily::TypeI { .. });
            return vec![Piece {
                a: -0.5,
                b: 0.5,
                zero,
                singular: false,
            }];
        }
        let n = b.len();
        (0..n)
            .map(|i| {
                let a = b[i];
                let e = if i + 1 < n { b[i + 1] } else { b[0] + 1.0 };
                let zero = self.has_gaps() && self.density(0.5 * (a + e)) == 0.0;
                Piece {
                    a,
                    b: e,
                    zero,
                    singular: true,
                }
            })
            .collect()
    }

    pub fn is_even(&self) -> bool {
        match self {
            DensityFamily::UniformPlus { sin, .. } => sin.iter().all(|&s| s == 0.0),
            DensityFamily::Grid(g) => g.is_even(),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub zero: bool,
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedMeasureT {
    pub diracs: Vec<(Angle, f64)>,
    pub density: DensityFamily,
    pub even: bool,
}

impl MixedMeasureT {
    pub fn new(diracs: Vec<(f64, f64)>, density: DensityFamily) -> Self {
        let diracs: Vec<(Angle, f64)> = diracs.into_iter().map(|(x, w)| (Angle::new(x), w)).collect();
        let even = density.is_even()
            && diracs.iter().all(|&(a, w)| {
                a.value() == 0.0
                    || a.value() == -0.5
                    || diracs
                        .iter()
                        .any(|&(b, v)| (a.value() + b.value()).abs() < 1e-14 && (w - v).abs() < 1e-14)
            });
        Self {
            diracs,
            density,
            even,
        }
    }

    pub fn uniform() -> Self {
        Self::new(vec![], DensityFamily::uniform())
    }

    pub fn dirac_mass(&self) -> f64 {
        self.diracs.iter().map(|d| d.1).sum()
    }

    /// Integral of the continuous part over [a, b] (a <= b, may wrap).
    pub fn integrate_density(&self, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64, MeasureError> {
        if b <= a {
            return Ok(0.0);
        }
        if let DensityFamily::Grid(g) = &self.density {
            return Ok(g.integrate(a, b));
        }
        let mut pts = vec![a, b];
        let bp = self.density.breakpoints();
        let k0 = a.floor() as i64 - 1;
        let k1 = b.ceil() as i64 + 1;
        for k in k0..=k1 {
            for &p in &bp {
                let q = p + k as f64;
                if q > a && q < b {
                    pts.push(q);
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        let mut s = crate::kernels::Sum::new();
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi - lo <= 0.0 {
                continue;
            }
            let mid = self.density.density(0.5 * (lo + hi));
            if self.density.has_gaps() && mid == 0.0 {
                continue;
            }
            s.add(integrate(|x| self.density.density(x), lo, hi, (true, true), spec)?);
        }
        Ok(s.value())
    }

    pub fn total_mass(&self, spec: &QuadratureSpec) -> Result<f64, MeasureError> {
        Ok(self.dirac_mass() + self.integrate_density(-0.5, 0.5, spec)?)
    }

    /// (W * rho_c)(x) for the continuous part.
    pub fn density_potential(&self, x: f64, spec: &QuadratureSpec) -> Result<f64, MeasureError> {
        match &self.density {
            DensityFamily::Zero => Ok(0.0),
            DensityFamily::UniformPlus { cos, sin } => {
                let mut s = 0.0;
                for (k, c) in cos.iter().enumerate() {
                    let k = (k + 1) as f64;
                    s += c * (2.0 * PI * k * x).cos() / (2.0 * k);
                }
                for (k, c) in sin.iter().enumerate() {
                    let k = (k + 1) as f64;
                    s += c * (2.0 * PI * k * x).sin() / (2.0 * k);
                }
                Ok(s)
            }
            DensityFamily::Grid(g) => Ok(g.density_potential_at(x)),
            fam => {
                let mut s = crate::kernels::Sum::new();
                for p in fam.pieces() {
                    if p.zero {
                        continue;
                    }
                    let f = |y: f64| kernel_t(x - y) * fam.density(y);
                    let sing = (-2..=2)
                        .map(|k| x + k as f64)
                        .find(|&t| t >= p.a && t <= p.b);
                    let v = match sing {
                        Some(t) => integrate_log_singular(f, p.a, p.b, t, spec)?,
                        None => integrate(f, p.a, p.b, (p.singular, p.singular), spec)?,
                    };
                    s.add(v);
                }
                Ok(s.value())
            }
        }
    }

    /// (W * rho)(x), +inf at atoms.
    pub fn potential(&self, x: f64, spec: &QuadratureSpec) -> Result<f64, MeasureError> {
        let mut v = self.density_potential(x, spec)?;
        for &(a, w) in &self.diracs {
            v += w * kernel_t(x - a.value());
        }
        Ok(v)
    }
}

/// Either kind of circle measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Empirical(EmpiricalMeasure),
    Mixed(MixedMeasureT),
}

impl From<EmpiricalMeasure> for Measure {
    fn from(m: EmpiricalMeasure) -> Self {
        Measure::Empirical(m)
    }
}

impl From<MixedMeasureT> for Measure {
    fn from(m: MixedMeasureT) -> Self {
        Measure::Mixed(m)
    }
}

/// Exact discrepancy of an atomic probability measure.
///
/// Arc from atom i forward to atom j has excess (C[j+1] - t[j]) - (C[i] - t[i])
/// with C the cumulative weight and t the unwrapped angle. For each j the best
/// i in the window (j - n, j] comes from a monotone deque.
pub fn discrepancy_empirical(rho: &EmpiricalMeasure) -> Result<(f64, IntervalT), MeasureError> {
    let n = rho.len();
    if n == 0 {
        return Err(MeasureError::EmptyMeasure);
    }
    let atoms = rho.atoms();
    let theta = |k: usize| atoms[k % n].0.value() + (k / n) as f64;
    let mut cum = vec![0.0; 2 * n + 1];
    for k in 0..2 * n {
        cum[k + 1] = cum[k] + atoms[k % n].1;
    }
    let key = |i: usize| cum[i] - theta(i);
    let mut dq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for j in 0..2 * n - 1 {
        while let Some(&b) = dq.back() {
            if key(b) >= key(j) {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(j);
        while let Some(&f) = dq.front() {
            if f + n <= j {
                dq.pop_front();
            } else {
                break;
            }
        }
        let i = *dq.front().unwrap();
        let v = (cum[j + 1] - theta(j)) - key(i);
        if v > best.0 {
            best = (v, i, j);
        }
    }
    let (v, i, j) = best;
    Ok((
        v,
        IntervalT {
            a: atoms[i % n].0,
            length: theta(j) - theta(i),
        },
    ))
}

/// O(n^2) sweep over all atom-endpoint arcs.
pub fn discrepancy_empirical_exhaustive(rho: &EmpiricalMeasure) -> Result<(f64, IntervalT), MeasureError> {
    let n = rho.len();
    if n == 0 {
        return Err(MeasureError::EmptyMeasure);
    }
    let atoms = rho.atoms();
    let mut best = (f64::NEG_INFINITY, IntervalT { a: atoms[0].0, length: 0.0 });
    for i in 0..n {
        let mut mass = 0.0;
        for k in 0..n {
            let j = (i + k) % n;
            mass += atoms[j].1;
            let mut len = atoms[j].0.value() - atoms[i].0.value();
            if i + k >= n {
                len += 1.0;
            }
            let v = mass - len;
            if v > best.0 {
                best = (
                    v,
                    IntervalT {
                        a: atoms[i].0,
                        length: len,
                    },
                );
            }
        }
    }
    Ok(best)
}

const SCAN_POINTS: usize = 2048;

/// Discrepancy of a mixed measure. Even measures are scanned over symmetric
/// arcs [-a, a]; grid-backed densities use a full two-endpoint scan.
pub fn discrepancy_mixed(rho: &MixedMeasureT) -> Result<(f64, IntervalT), MeasureError> {
    if let DensityFamily::Grid(g) = &rho.density {
        return Ok(g.discrepancy());
    }
    if !rho.even {
        return Err(MeasureError::NotEven);
    }
    let spec = QuadratureSpec {
        panels: 1,
        ..QuadratureSpec::with_tol(1e-12)
    };
    let bps: Vec<f64> = rho
        .density
        .breakpoints()
        .into_iter()
        .map(f64::abs)
        .collect();
    let mut cand: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| 0.5 * i as f64 / SCAN_POINTS as f64)
        .collect();
    cand.extend(rho.diracs.iter().map(|d| d.0.value().abs()));
    cand.extend(bps.iter().copied());
    cand.sort_by(f64::total_cmp);
    cand.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let is_bp = |x: f64| bps.iter().any(|&b| (b - x).abs() < 1e-15);
    let pieces: Vec<f64> = cand
        .par_windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            if rho.density.has_gaps() && rho.density.density(0.5 * (lo + hi)) == 0.0 {
                return Ok(0.0);
            }
            integrate(
                |x| rho.density.density(x),
                lo,
                hi,
                (is_bp(lo), is_bp(hi)),
                &spec,
            )
        })
        .collect::<Result<_, _>>()?;
    let dirac_in = |a: f64, closed: bool| -> f64 {
        rho.diracs
            .iter()
            .filter(|d| {
                let x = d.0.value().abs();
                if closed {
                    x <= a + 1e-15
                } else {
                    x < a - 1e-15
                }
            })
            .map(|d| d.1)
            .sum()
    };
    let mut prefix = vec![0.0];
    for p in &pieces {
        prefix.push(prefix[prefix.len() - 1] + p);
    }
    let total = dirac_in(0.5, true) + 2.0 * prefix[prefix.len() - 1];
    // Excess of [-a, a] (centred at 0) and of the closed arc [a, 1 - a] (centred at 1/2).
    let excess = |a: f64, acc: f64, at_half: bool| -> f64 {
        if at_half {
            total - dirac_in(a, false) - 2.0 * acc - (1.0 - 2.0 * a)
        } else {
            dirac_in(a, true) + 2.0 * acc - 2.0 * a
        }
    };
    let mut best = (f64::NEG_INFINITY, 0usize, false);
    for (k, (&a, &acc)) in cand.iter().zip(&prefix).enumerate() {
        for at_half in [false, true] {
            let v = excess(a, acc, at_half);
            if v > best.0 {
                best = (v, k, at_half);
            }
        }
    }
    let (mut value, idx, at_half) = best;
    let mut a_best = cand[idx];
    // interior maximum where the density crosses 1
    if idx > 0 && idx < cand.len() - 1 {
        let lo = cand[idx - 1];
        let f = |a: f64| {
            let part = integrate(|x| rho.density.density(x), lo, a, (is_bp(lo), false), &spec).unwrap_or(0.0);
            -excess(a, prefix[idx - 1] + part, at_half)
        };
        let (a, fa) = golden_min(f, lo, cand[idx + 1], 1e-12);
        if -fa > value {
            value = -fa;
            a_best = a;
        }
    }
    let witness = if at_half {
        IntervalT {
            a: Angle::new(a_best),
            length: 1.0 - 2.0 * a_best,
        }
    } else {
        IntervalT {
            a: Angle::new(-a_best),
            length: 2.0 * a_best,
        }
    };
    Ok((value, witness))
}

pub fn discrepancy(rho: &Measure) -> Result<(f64, IntervalT), MeasureError> {
    match rho {
        Measure::Empirical(e) => discrepancy_empirical(e),
        Measure::Mixed(m) => discrepancy_mixed(m),
    }
}

fn top_k(vals: &[(f64, f64)], k: usize) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = vals.iter().copied().filter(|p| p.1.is_finite()).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    v.truncate(k);
    v
}

/// H = -min (W * rho) over the circle for an atomic measure. Candidates are
/// a shifted uniform grid and all gap midpoints; the best five are refined
/// inside their gaps, where the potential is convex.
pub fn height_empirical(rho: &EmpiricalMeasure, grid_n: usize) -> (f64, Angle) {
    let atoms = rho.atoms();
    let n = atoms.len();
    let mut xs: Vec<f64> = (0..grid_n)
        .map(|i| -0.5 + (i as f64 + 0.5) / grid_n as f64)
        .collect();
    for k in 0..n {
        let a = atoms[k].0.value();
        let b = if k + 1 < n { atoms[k + 1].0.value() } else { atoms[0].0.value() + 1.0 };
        xs.push(Angle::new(0.5 * (a + b)).value());
    }
    let vals: Vec<(f64, f64)> = xs.par_iter().map(|&x| (x, rho.potential(x))).collect();
    let mut best = (f64::INFINITY, 0.0);
    for (x, _) in top_k(&vals, 5) {
        // gap containing x
        let idx = atoms.partition_point(|a| a.0.value() < x);
        let (lo, hi) = if n == 1 {
            (atoms[0].0.value(), atoms[0].0.value() + 1.0)
        } else if idx == 0 {
            (atoms[n - 1].0.value() - 1.0, atoms[0].0.value())
        } else if idx == n {
            (atoms[n - 1].0.value(), atoms[0].0.value() + 1.0)
        } else {
            (atoms[idx - 1].0.value(), atoms[idx].0.value())
        };
        let w = hi - lo;
        let (xm, fm) = golden_min(|t| rho.potential(t), lo + 1e-9 * w, hi - 1e-9 * w, 1e-10 * w.max(1e-3));
        for (cx, cf) in [(xm, fm), (x, rho.potential(x))] {
            if cf < best.0 {
                best = (cf, cx);
            }
        }
    }
    (-best.0, Angle::new(best.1))
}

/// H = -min (W * rho) for a mixed measure on a uniform grid (atoms excluded)
/// with golden-section refinement around the best five grid points.
pub fn height_mixed(rho: &MixedMeasureT, grid_n: usize) -> Result<(f64, Angle), MeasureError> {
    let spec = QuadratureSpec::with_tol(1e-11);
    if let DensityFamily::Grid(g) = &rho.density {
        let n = g.n_cells();
        let v: Vec<f64> = g
            .potential_samples()
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                let x = g.center(j);
                v + rho.diracs.iter().map(|&(a, w)| w * kernel_t(x - a.value())).sum::<f64>()
            })
            .collect();
        let (j, min) = v
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, &x)| if x < acc.1 { (j, x) } else { acc });
        return Ok((-min, Angle::new(j as f64 / n as f64)));
    }
    let is_atom = |x: f64| rho.diracs.iter().any(|d| circ_diff(x, d.0.value()).abs() < 1e-14);
    let xs: Vec<f64> = (0..grid_n)
        .map(|i| -0.5 + i as f64 / grid_n as f64)
        .filter(|&x| !is_atom(x))
        .collect();
    let vals: Vec<(f64, f64)> = xs
        .par_iter()
        .map(|&x| rho.potential(x, &spec).map(|v| (x, v)))
        .collect::<Result<_, _>>()?;
    let h = 1.0 / grid_n as f64;
    let mut best = (f64::INFINITY, 0.0);
    for (x, v) in top_k(&vals, 5) {
        if v < best.0 {
            best = (v, x);
        }
        let f = |t: f64| rho.potential(t, &spec).unwrap_or(f64::INFINITY);
        let (xm, fm) = golden_min(f, x - h, x + h, 1e-10);
        if fm < best.0 {
            best = (fm, xm);
        }
    }
    Ok((-best.0, Angle::new(best.1)))
}

pub fn height_t(rho: &Measure, grid_n: usize) -> Result<(f64, Angle), MeasureError> {
    if grid_n < 256 {
        return Err(MeasureError::Domain(format!("grid_n = {grid_n} < 256")));
    }
    match rho {
        Measure::Empirical(e) => Ok(height_empirical(e, grid_n)),
        Measure::Mixed(m) => height_mixed(m, grid_n),
    }
}

pub const DEFAULT_GRID: usize = 1024;

/// G_alpha = H / D^alpha.
pub fn g_ratio(rho: &Measure, alpha: f64) -> Result<f64, MeasureError> {
    let (d, _) = discrepancy(rho)?;
    if d <= 1e-12 {
        return Err(MeasureError::ZeroDiscrepancy);
    }
    let (h, _) = height_t(rho, DEFAULT_GRID)?;
    Ok(h / d.powf(alpha))
}

#[derive(Debug, Serialize, Deserialize)]
struct RawDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diracs: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<RawFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atoms: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawFamily {
    tag: String,
    #[serde(default)]
    params: Value,
}

fn param(params: &Value, key: &str) -> Result<f64, MeasureError> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .filter(|x| x.is_finite())
        .ok_or_else(|| MeasureError::Json(format!("missing numeric parameter `{key}`")))
}

fn float_list(params: &Value, key: &str) -> Result<Vec<f64>, MeasureError> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(vec![]),
        Some(v) => serde_json::from_value::<Vec<f64>>(v.clone())
            .map_err(|e| MeasureError::Json(format!("`{key}`: {e}"))),
    }
}

fn family_from_raw(f: &RawFamily) -> Result<(DensityFamily, Vec<(f64, f64)>), MeasureError> {
    let p = &f.params;
    match f.tag.as_str() {
        "uniform" => Ok((DensityFamily::uniform(), vec![])),
        "uniform_plus" => {
            let cos = float_list(p, "cos")?;
            let sin = float_list(p, "sin")?;
            if cos.iter().chain(&sin).any(|c| !c.is_finite()) {
                return Err(MeasureError::Json("non-finite coefficient".into()));
            }
            Ok((DensityFamily::UniformPlus { cos, sin }, vec![]))
        }
        "type1_t" => {
            let m = param(p, "m")?;
            let rho = crate::extremal::rho_type1(m).map_err(|e| MeasureError::Domain(e.to_string()))?;
            let d = rho.diracs.iter().map(|d| (d.0.value(), d.1)).collect();
            Ok((rho.density, d))
        }
        "type2_t" => {
            let rho = crate::extremal::rho_type2(param(p, "M")?, param(p, "R")?, param(p, "L")?)
                .map_err(|e| MeasureError::Domain(e.to_string()))?;
            let d = rho.diracs.iter().map(|d| (d.0.value(), d.1)).collect();
            Ok((rho.density, d))
        }
        "periodized" => {
            let kind = p
                .get("kind")
                .and_then(Value::as_str)
                .ok_or_else(|| MeasureError::Json("missing `kind`".into()))?;
            let lambda = param(p, "lambda")?;
            let r = match kind {
                "I" => None,
                "II" | "III" => Some(param(p, "R")?),
                other => return Err(MeasureError::Json(format!("unknown kind `{other}`"))),
            };
            let mu = crate::extremal::make_admissible(r, lambda)
                .map_err(|e| MeasureError::Domain(e.to_string()))?;
            let rho = crate::extremal::periodize(&mu).map_err(|e| MeasureError::Domain(e.to_string()))?;
            let d = rho.diracs.iter().map(|d| (d.0.value(), d.1)).collect();
            Ok((rho.density, d))
        }
        "grid" => {
            let values = float_list(p, "values")?;
            let g = GridDensity::new(values, vec![]).map_err(|e| MeasureError::Domain(e.to_string()))?;
            Ok((DensityFamily::Grid(g), vec![]))
        }
        other => Err(MeasureError::Json(format!("unknown family tag `{other}`"))),
    }
}

fn check_pairs(v: &[[f64; 2]], what: &str) -> Result<(), MeasureError> {
    for [x, w] in v {
        if !x.is_finite() || !(w.is_finite() && *w > 0.0) {
            return Err(MeasureError::Json(format!("invalid {what} entry [{x}, {w}]")));
        }
    }
    Ok(())
}

impl Measure {
    pub fn from_json(text: &str) -> Result<Measure, MeasureError> {
        let raw: RawDoc = serde_json::from_str(text).map_err(|e| MeasureError::Json(e.to_string()))?;
        if let Some(atoms) = &raw.atoms {
            if raw.family.is_some() || raw.diracs.is_some() {
                return Err(MeasureError::Json("`atoms` cannot be combined with `family`/`diracs`".into()));
            }
            check_pairs(atoms, "atom")?;
            return Ok(Measure::Empirical(EmpiricalMeasure::new(
                atoms.iter().map(|p| (p[0], p[1])),
            )?));
        }
        let (family, implied) = match &raw.family {
            Some(f) => family_from_raw(f)?,
            None => (DensityFamily::Zero, vec![]),
        };
        let diracs = match &raw.diracs {
            Some(d) => {
                check_pairs(d, "dirac")?;
                d.iter().map(|p| (p[0], p[1])).collect()
            }
            None => implied,
        };
        if diracs.is_empty() && matches!(family, DensityFamily::Zero) {
            return Err(MeasureError::EmptyMeasure);
        }
        Ok(Measure::Mixed(MixedMeasureT::new(diracs, family)))
    }

    pub fn to_json(&self) -> Value {
        match self {
            Measure::Empirical(e) => json!({
                "atoms": e.atoms().iter().map(|a| [a.0.value(), a.1]).collect::<Vec<_>>()
            }),
            Measure::Mixed(m) => {
                let diracs: Vec<[f64; 2]> = m.diracs.iter().map(|d| [d.0.value(), d.1]).collect();
                let family = match &m.density {
                    DensityFamily::TypeI { m } => json!({"tag": "type1_t", "params": {"m": m}}),
                    DensityFamily::TypeII { big_m, r, l } => {
                        json!({"tag": "type2_t", "params": {"M": big_m, "R": r, "L": l}})
                    }
                    DensityFamily::Periodized(p) => {
                        let kind = match p.mu.kind {
                            AdmissibleKind::I => "I",
                            AdmissibleKind::II => "II",
                            AdmissibleKind::III => "III",
                        };
                        json!({"tag": "periodized", "params": {"kind": kind, "R": p.mu.r, "lambda": p.mu.lambda}})
                    }
                    DensityFamily::Grid(g) => json!({"tag": "grid", "params": {"values": g.values()}}),
                    DensityFamily::UniformPlus { cos, sin } => {
                        json!({"tag": "uniform_plus", "params": {"cos": cos, "sin": sin}})
                    }
                    DensityFamily::Zero => Value::Null,
                };
                let mut doc = json!({ "diracs": diracs });
                if !family.is_null() {
                    doc["family"] = family;
                }
                doc
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_canonical() {
        assert_eq!(Angle::new(0.5).value(), -0.5);
        assert_eq!(Angle::new(-0.5).value(), -0.5);
        assert!((Angle::new(1.25).value() - 0.25).abs() < 1e-15);
        assert!((Angle::new(-0.75).value() - 0.25).abs() < 1e-15);
        let a = Angle::new(0.3).value();
        assert_eq!(Angle::new(a).value(), a);
    }

    #[test]
    fn merging_duplicates() {
        let m = EmpiricalMeasure::new([(0.0, 0.25), (1.0, 0.25), (0.5, 0.5)]).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.total() - 1.0).abs() < 1e-15);
        assert!(EmpiricalMeasure::new([(0.0, -1.0)]).is_err());
        assert!(matches!(
            EmpiricalMeasure::new(std::iter::empty()),
            Err(MeasureError::EmptyMeasure)
        ));
    }

    #[test]
    fn dirac_discrepancy_is_one() {
        let m = EmpiricalMeasure::new([(0.0, 1.0)]).unwrap();
        let (d, w) = discrepancy_empirical(&m).unwrap();
        assert_eq!(d, 1.0);
        assert_eq!(w.length, 0.0);
    }

    #[test]
    fn equally_spaced_discrepancy() {
        let m = EmpiricalMeasure::uniform(8);
        let (d, w) = discrepancy_empirical(&m).unwrap();
        assert!((d - 0.125).abs() < 1e-15);
        assert!(w.length.abs() < 1e-15);
    }

    #[test]
    fn three_atom_example_matches_sweep() {
        let m = EmpiricalMeasure::new([(0.0, 0.5), (0.3, 0.25), (0.6, 0.25)]).unwrap();
        let (fast, _) = discrepancy_empirical(&m).unwrap();
        let (slow, _) = discrepancy_empirical_exhaustive(&m).unwrap();
        assert!((fast - slow).abs() < 1e-15);
        // arc [0.6, 1.3] holds everything and has length 0.7
        assert!((slow - 0.5).abs() < 1e-12);
    }

    #[test]
    fn height_of_dirac() {
        let m = EmpiricalMeasure::new([(0.0, 1.0)]).unwrap();
        let (h, x) = height_empirical(&m, 256);
        assert!((h - 2f64.ln()).abs() < 1e-12);
        assert!((x.value().abs() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn uniform_has_zero_height_and_discrepancy() {
        let u = MixedMeasureT::uniform();
        let (h, _) = height_mixed(&u, 256).unwrap();
        assert!(h.abs() < 1e-12);
        let (d, _) = discrepancy_mixed(&u).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn admissible_closed_forms() {
        let mu = AdmissibleDistR::type1(1.0);
        assert_eq!(h_tilde(&mu).unwrap(), 0.5);
        assert_eq!(d_tilde(&AdmissibleDistR::type1(3.0)).unwrap(), 3.0);
        let mu = AdmissibleDistR::type2(2.0, 1.0);
        assert!((h_tilde(&mu).unwrap() - PI * PI).abs() < 1e-12);
        assert!((d_tilde(&mu).unwrap() - (PI * 3f64.sqrt() - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn stable_density_matches_naive() {
        let mu = AdmissibleDistR::type3(1.4, 0.6, 1.0);
        for &x in &[1.5f64, 2.0, 3.0, 10.0] {
            let naive = ((x * x - 1.96) * (x * x - 0.36)).sqrt() / (x * x - 1.0) - 1.0;
            assert!((mu.base_density(x) - naive).abs() < 1e-12);
        }
        let mu = AdmissibleDistR::type1(1.0);
        let x = 2.0 / PI;
        assert!((mu.base_density(x) - (3f64.sqrt() / 2.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let m = Measure::from_json(r#"{"atoms": [[0.0, 0.5], [0.25, 0.5]]}"#).unwrap();
        let back = Measure::from_json(&m.to_json().to_string()).unwrap();
        assert_eq!(m, back);
        let u = Measure::from_json(r#"{"family": {"tag": "uniform_plus", "params": {"cos": [0.5]}}}"#)
            .unwrap();
        let back = Measure::from_json(&u.to_json().to_string()).unwrap();
        assert_eq!(u, back);
        assert!(Measure::from_json("{").is_err());
        assert!(Measure::from_json(r#"{"family": {"tag": "nope"}}"#).is_err());
        assert!(Measure::from_json(r#"{"atoms": [[0.0, -1.0]]}"#).is_err());
    }

    #[test]
    fn interval_contains() {
        let i = IntervalT {
            a: Angle::new(0.4),
            length: 0.2,
        };
        assert!(i.contains(0.5));
        assert!(i.contains(-0.45));
        assert!(!i.contains(0.0));
    }
}
