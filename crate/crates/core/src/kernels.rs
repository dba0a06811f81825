//! Logarithmic kernels on the circle and the line, plus the quadrature
//! engines used for singular integrands.
//!
//! All integrators are deterministic: nodes are visited in a fixed order and
//! partial sums are accumulated with Neumaier compensation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("tolerance {abs_tol:e} not met after {refinements} refinements")]
    ToleranceNotMet { abs_tol: f64, refinements: usize },
    #[error("pole {p} lies on the boundary of [{a}, {b}]")]
    PoleOnBoundary { a: f64, b: f64, p: f64 },
    #[error("degenerate interval [{a}, {b}]")]
    DegenerateInterval { a: f64, b: f64 },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub nodes_per_panel: usize,
    pub abs_tol: f64,
    pub max_refinements: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panels: 8,
            nodes_per_panel: 32,
            abs_tol: 1e-8,
            max_refinements: 40,
        }
    }
}

impl QuadratureSpec {
    /// Default spec with a different tolerance; the refinement budget grows
    /// so that geometric grading can actually reach the requested accuracy.
    pub fn with_tol(abs_tol: f64) -> Self {
        let levels = (1.0 / abs_tol).log2().ceil().max(0.0) as usize;
        Self {
            abs_tol,
            max_refinements: (levels + 16).max(40),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        if self.panels < 1 {
            return Err(QuadError::InvalidSpec("panels must be at least 1"));
        }
        if self.nodes_per_panel < 2 {
            return Err(QuadError::InvalidSpec("nodes_per_panel must be at least 2"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(QuadError::InvalidSpec("abs_tol must be positive"));
        }
        if self.max_refinements < 1 {
            return Err(QuadError::InvalidSpec("max_refinements must be at least 1"));
        }
        Ok(())
    }
}

/// W(x) = -log|2 sin(pi x)|, +inf at integers.
pub fn kernel_t(x: f64) -> f64 {
    let r = x - x.round();
    if r == 0.0 {
        return f64::INFINITY;
    }
    -(2.0 * (PI * r).sin().abs()).ln()
}

/// W~(x) = -log|x|, +inf at 0.
pub fn kernel_r(x: f64) -> f64 {
    if x == 0.0 {
        return f64::INFINITY;
    }
    -x.abs().ln()
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

impl std::iter::FromIterator<f64> for Sum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Sum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    xs.into_iter().collect::<Sum>().value()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared rule for `n` nodes.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap();
        map.entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::new(n)))
            .clone()
    }

    /// Plain rule on [a, b]; errors on a non-finite sample.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> Result<f64, QuadError> {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = Sum::new();
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let x = c + h * t;
            let y = f(x);
            if !y.is_finite() {
                return Err(QuadError::NonFinite { x });
            }
            s.add(w * y);
        }
        Ok(h * s.value())
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Geometric panels [a + w/2^(k+1), a + w/2^k] marching toward the end `a`
/// (or toward `b` when `toward_left` is false).
fn graded<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    toward_left: bool,
    spec: &QuadratureSpec,
    rule: &GaussLegendre,
) -> Result<f64, QuadError> {
    let w = b - a;
    let mut acc = Sum::new();
    let mut hi = w;
    let mut prev = f64::NAN;
    for k in 0..spec.max_refinements {
        let lo = 0.5 * hi;
        let (c, rest) = if toward_left {
            (rule.apply(f, a + lo, a + hi)?, rule.apply(f, a, a + lo)?)
        } else {
            (rule.apply(f, b - hi, b - lo)?, rule.apply(f, b - lo, b)?)
        };
        acc.add(c);
        // Current estimate closes the gap [end, lo] with one plain panel.
        let total = acc.value() + rest;
        if k >= 3 && (total - prev).abs() < 0.25 * spec.abs_tol {
            return Ok(total);
        }
        prev = total;
        hi = lo;
    }
    Err(QuadError::ToleranceNotMet {
        abs_tol: spec.abs_tol,
        refinements: spec.max_refinements,
    })
}

/// Composite Gauss-Legendre on `spec.panels` equal panels; the outermost
/// panels are geometrically graded toward the ends flagged as singular.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    singular_ends: (bool, bool),
    spec: &QuadratureSpec,
) -> Result<f64, QuadError> {
    spec.validate()?;
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, (singular_ends.1, singular_ends.0), spec).map(|v| -v);
    }
    let rule = GaussLegendre::cached(spec.nodes_per_panel);
    let n = spec.panels;
    let h = (b - a) / n as f64;
    let mut acc = Sum::new();
    if n == 1 && singular_ends.0 && singular_ends.1 {
        let m = 0.5 * (a + b);
        acc.add(graded(&f, a, m, true, spec, &rule)?);
        acc.add(graded(&f, m, b, false, spec, &rule)?);
        return Ok(acc.value());
    }
    for i in 0..n {
        let lo = a + h * i as f64;
        let hi = if i + 1 == n { b } else { a + h * (i + 1) as f64 };
        let v = if i == 0 && singular_ends.0 {
            graded(&f, lo, hi, true, spec, &rule)?
        } else if i + 1 == n && singular_ends.1 {
            graded(&f, lo, hi, false, spec, &rule)?
        } else {
            rule.apply(&f, lo, hi)?
        };
        acc.add(v);
    }
    Ok(acc.value())
}

/// Integral of `f` over [a, b] where `f` has a logarithmic singularity at `s`.
pub fn integrate_log_singular<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    s: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadError> {
    if !(b > a) {
        return Err(QuadError::DegenerateInterval { a, b });
    }
    if s <= a {
        integrate(&f, a, b, (true, true), spec)
    } else if s >= b {
        integrate(&f, a, b, (true, true), spec)
    } else {
        let left = integrate(&f, a, s, (true, true), spec)?;
        let right = integrate(&f, s, b, (true, true), spec)?;
        Ok(left + right)
    }
}

/// Cauchy principal value of `f` over [a, b] with a simple pole at `p`,
/// by pairing f(p+t) + f(p-t) on (0, h] and integrating the remainder.
pub fn pv_integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    p: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadError> {
    if !(b > a) {
        return Err(QuadError::DegenerateInterval { a, b });
    }
    if p <= a || p >= b {
        return Err(QuadError::PoleOnBoundary { a, b, p });
    }
    let h = (p - a).min(b - p);
    let paired = integrate(
        |t| {
            // Offset snapped to the representable neighbour so both sides stay symmetric.
            let d = (p + t) - p;
            if d == 0.0 || p - d == p {
                0.0
            } else {
                f(p + d) + f(p - d)
            }
        },
        0.0,
        h,
        (true, true),
        spec,
    )?;
    let rest = if p - a > h {
        integrate(&f, a, p - h, (true, true), spec)?
    } else if b - p > h {
        integrate(&f, p + h, b, (true, true), spec)?
    } else {
        0.0
    };
    Ok(paired + rest)
}

/// Integral of f = sqrt((b-x)(x-a)) g(x) over [a, b] via x = a + (b-a) sin^2(phi).
pub fn integrate_sqrt_endpoints<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadError> {
    if !(b > a) {
        return Err(QuadError::DegenerateInterval { a, b });
    }
    let w = b - a;
    integrate(
        |phi: f64| {
            let s = phi.sin();
            let x = a + w * s * s;
            f(x) * w * (2.0 * phi).sin()
        },
        0.0,
        0.5 * PI,
        (false, false),
        spec,
    )
}

/// Brent's method on a bracketing interval.
pub fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Some(b)
}

/// Golden-section search for a minimum of a unimodal `f` on [a, b].
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
