//! Reference computations kept independent of the library numerics.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Integral of f over [a, b] for f with an integrable singularity at `a`,
/// via x = a + (b - a) t^4 and Simpson in t.
pub fn endpoint_singular<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let w = b - a;
    simpson(
        |t| if t == 0.0 { 0.0 } else { f(a + w * t.powi(4)) * 4.0 * w * t.powi(3) },
        0.0,
        1.0,
        20_000,
    )
}

/// sup over closed arcs with endpoints at atoms of (mass - length).
pub fn brute_discrepancy(atoms: &[(f64, f64)]) -> f64 {
    let mut a: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (x.rem_euclid(1.0), w)).collect();
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    let n = a.len();
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let mut mass = 0.0;
        for k in 0..n {
            let j = (i + k) % n;
            mass += a[j].1;
            let len = (a[j].0 - a[i].0).rem_euclid(1.0);
            best = best.max(mass - len);
        }
    }
    best
}

/// -log|2 sin(pi x)| written out directly.
pub fn w(x: f64) -> f64 {
    -(2.0 * (PI * x).sin()).abs().ln()
}

/// Small deterministic generator (splitmix64) for oracle-side randomness.
pub struct Mix(pub u64);

impl Mix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Table 1 as printed: (k, R, H, D, ratio).
pub const TABLE: [(usize, f64, f64, f64, f64); 20] = [
    (0, 1.1000, 0.0986, 0.3188, 0.5765),
    (1, 1.1292, 0.1645, 0.4135, 0.6290),
    (2, 1.1592, 0.2495, 0.5114, 0.6650),
    (3, 1.1900, 0.3550, 0.6125, 0.6906),
    (4, 1.2216, 0.4824, 0.7170, 0.7090),
    (5, 1.2541, 0.6331, 0.8248, 0.7225),
    (6, 1.2874, 0.8088, 0.9361, 0.7323),
    (7, 1.3216, 1.0111, 1.0509, 0.7394),
    (8, 1.3567, 1.2417, 1.1694, 0.7445),
    (9, 1.3927, 1.5025, 1.2915, 0.7479),
    (10, 1.4297, 1.7954, 1.4174, 0.7500),
    (11, 1.4677, 2.1224, 1.5472, 0.7512),
    (12, 1.5067, 2.4858, 1.6809, 0.7515),
    (13, 1.5467, 2.8879, 1.8187, 0.7512),
    (14, 1.5878, 3.3312, 1.9607, 0.7504),
    (15, 1.6300, 3.8188, 2.1070, 0.7492),
    (16, 1.6733, 4.3538, 2.2577, 0.7477),
    (17, 1.7177, 4.9404, 2.4131, 0.7459),
    (18, 1.7633, 5.5844, 2.5736, 0.7437),
    (19, 1.8102, 6.3003, 2.7403, f64::NAN),
];
