mod common;

use std::f64::consts::{LN_2, PI};

use et_lab::measures::{discrepancy_empirical, height_empirical, EmpiricalMeasure};
use et_lab::polynomials::*;
use rustfft::num_complex::Complex64;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn random_unimodular(rng: &mut common::Mix, n: usize) -> PolynomialSpec {
    let angles: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    PolynomialSpec::unimodular(&angles).unwrap()
}

/// log|f(e^{2 pi i t})| straight from the product over roots.
fn log_abs_direct(leading: Complex64, roots: &[Root], t: f64) -> f64 {
    let z = Complex64::from_polar(1.0, 2.0 * PI * t);
    roots
        .iter()
        .map(|r| (z - Complex64::from_polar(r.modulus, 2.0 * PI * r.angle)).norm().ln())
        .sum::<f64>()
        + leading.norm().ln()
}

#[test]
fn classical_examples() {
    let f = PolynomialSpec::unimodular(&[0.0; 8]).unwrap();
    let r = check_et(&f).unwrap();
    assert!((r.d - 1.0).abs() < 1e-9);
    assert!((r.h - LN_2).abs() < 1e-9);
    assert!((r.bound - 1.1774).abs() < 1e-4);
    assert!(r.holds);

    let g = PolynomialSpec::unimodular(&(0..8).map(|k| k as f64 / 8.0).collect::<Vec<_>>()).unwrap();
    let r = check_et(&g).unwrap();
    assert!((r.d - 0.125).abs() < 1e-9);
    assert!((r.h - LN_2 / 8.0).abs() < 1e-9);
    assert!(r.holds);

    let mut c = vec![Complex64::new(0.0, 0.0); 9];
    c[0] = -one();
    c[8] = one();
    let r = check_et(&PolynomialSpec::from_coeffs(c).unwrap()).unwrap();
    assert!((r.d - 0.125).abs() < 1e-9);
    assert!((r.h - LN_2 / 8.0).abs() < 1e-9);
}

#[test]
fn near_monomial_has_constant_modulus() {
    let f = PolynomialSpec::from_coeffs(vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(3.0, 0.0)]);
    assert!(matches!(f, Err(PolyError::ZeroCoefficient)));
    let f = PolynomialSpec::from_roots(Complex64::new(3.0, 0.0), vec![Root { modulus: 1e-300, angle: 0.0 }]).unwrap();
    let (v, _) = max_log_modulus(&f, 4096);
    assert!((v - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn et_holds_on_random_unimodular() {
    let mut rng = common::Mix(42);
    for _ in 0..200 {
        let n = 1 + (rng.next_u64() % 64) as usize;
        let f = random_unimodular(&mut rng, n);
        let r = check_et(&f).unwrap();
        assert!(r.holds && r.margin >= -1e-9, "n = {n}: {}", r.summary(6));
    }
}

#[test]
fn height_matches_potential_of_root_measure() {
    let mut rng = common::Mix(3);
    for _ in 0..20 {
        let n = 2 + (rng.next_u64() % 30) as usize;
        let f = random_unimodular(&mut rng, n);
        let h = height_poly(&f).unwrap();
        let rho = root_measure(&f).unwrap();
        let (hm, _) = height_empirical(&rho, 1 << 15);
        assert!((h - hm).abs() < 1e-6, "{h} vs {hm}");
        let (d, _) = discrepancy_poly(&f).unwrap();
        assert_eq!(d, discrepancy_empirical(&rho).unwrap().0);
    }
}

#[test]
fn max_modulus_against_dense_scan() {
    let mut rng = common::Mix(8);
    for _ in 0..10 {
        let n = 3 + (rng.next_u64() % 10) as usize;
        let roots: Vec<Root> = (0..n)
            .map(|_| Root { modulus: 0.2 + 4.8 * rng.uniform(), angle: rng.uniform() })
            .collect();
        let lead = Complex64::new(0.5 + rng.uniform(), 0.0);
        let f = PolynomialSpec::from_roots(lead, roots.clone()).unwrap();
        let (v, _) = max_log_modulus(&f, 4096);
        let scan = (0..200_000)
            .map(|k| log_abs_direct(lead, &roots, k as f64 / 200_000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(v >= scan - 1e-12 && v - scan < 1e-6, "{v} vs {scan}");
    }
}

#[test]
fn schur_pointwise_comparison() {
    let mut rng = common::Mix(77);
    for _ in 0..100 {
        let n = 1 + (rng.next_u64() % 12) as usize;
        let roots: Vec<Root> = (0..n)
            .map(|_| Root { modulus: 0.2 + 4.8 * rng.uniform(), angle: rng.uniform() })
            .collect();
        let lead = Complex64::from_polar(0.3 + 3.0 * rng.uniform(), 2.0 * PI * rng.uniform());
        let f = PolynomialSpec::from_roots(lead, roots).unwrap();
        let g = schur_reduce(&f).unwrap();
        let (l0, ln) = f.log_end_coeffs();
        for k in 0..4096 {
            let t = k as f64 / 4096.0;
            assert!(g.log_abs_on_circle(t) <= f.log_abs_on_circle(t) - 0.5 * (l0 + ln) + 1e-12);
        }
        assert_eq!(discrepancy_poly(&g).unwrap().0, discrepancy_poly(&f).unwrap().0);
        assert!(height_poly(&g).unwrap() <= height_poly(&f).unwrap() + 1e-9);
    }
}

#[test]
fn schur_single_root() {
    let f = PolynomialSpec::from_roots(one(), vec![Root { modulus: 2.0, angle: 0.25 }]).unwrap();
    let g = schur_reduce(&f).unwrap();
    assert!((f.log_abs_on_circle(0.75) - 3f64.ln()).abs() < 1e-14);
    assert!((g.log_abs_on_circle(0.75) - 2f64.ln()).abs() < 1e-14);
    assert!(g.log_abs_on_circle(0.75) <= f.log_abs_on_circle(0.75) - 0.5 * 2f64.ln());
}

#[test]
fn sector_partition_sums_to_degree() {
    let mut rng = common::Mix(20);
    let f = random_unimodular(&mut rng, 20);
    for parts in [2usize, 3, 7, 16] {
        let mut total = 0;
        for p in 0..parts {
            let a = p as f64 / parts as f64;
            let b = (p + 1) as f64 / parts as f64 - 1e-9;
            total += sector_count(&f, a, b).unwrap();
        }
        assert_eq!(total, 20);
    }
}

#[test]
fn real_root_examples() {
    let roots = vec![
        Root { modulus: 1.0, angle: 0.5 },
        Root { modulus: 1.0, angle: 0.5 },
        Root { modulus: 1.0, angle: 0.5 },
        Root { modulus: 1.0, angle: 0.0 },
    ];
    let f = PolynomialSpec::from_roots(one(), roots).unwrap();
    let r = real_root_check(&f).unwrap();
    assert_eq!((r.n_plus, r.n_minus), (1, 3));
    let h_oracle = {
        let g = |t: f64| 3.0 * (2.0 * (PI * t).cos()).abs().ln() + (2.0 * (PI * t).sin()).abs().ln();
        (1..100_000).map(|k| g(k as f64 / 100_000.0)).fold(f64::NEG_INFINITY, f64::max) / 4.0
    };
    assert!((height_poly(&f).unwrap() - h_oracle).abs() < 1e-8);
    assert!((r.bound - (2.0 * h_oracle).sqrt() * 4.0).abs() < 1e-6);
    assert!(r.holds);

    let f = PolynomialSpec::unimodular(&[0.0; 5]).unwrap();
    let r = real_root_check(&f).unwrap();
    assert_eq!(r.n_plus, 5);
    assert!((r.bound - 5.887).abs() < 1e-3);
}

#[test]
fn rotation_moves_counts_and_keeps_height() {
    let mut rng = common::Mix(9);
    for _ in 0..20 {
        let n = 2 + (rng.next_u64() % 20) as usize;
        let theta = rng.uniform();
        let mut angles: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let k = (rng.next_u64() % 3) as usize;
        angles[..k].iter_mut().for_each(|a| *a = theta);
        let f = PolynomialSpec::unimodular(&angles).unwrap();
        let shifted: Vec<f64> = angles.iter().map(|a| a - theta).collect();
        let g = PolynomialSpec::unimodular(&shifted).unwrap();
        assert_eq!(count_at_angle(&f, theta).unwrap(), count_at_angle(&g, 0.0).unwrap());
        assert!((height_poly(&f).unwrap() - height_poly(&g).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn synthesis_examples() {
    let f = synthesize_poly(&EmpiricalMeasure::new([(0.0, 1.0)]).unwrap(), 1).unwrap();
    let c = f.coefficients();
    assert!((c[0] + one()).norm() < 1e-15 && (c[1] - one()).norm() < 1e-15);
    let f = synthesize_poly(&EmpiricalMeasure::uniform(4), 4).unwrap();
    let c = f.coefficients();
    assert!((c[0] + one()).norm() < 1e-12 && (c[4] - one()).norm() < 1e-12);
    assert!(c[1..4].iter().all(|z| z.norm() < 1e-12));
    assert!(matches!(
        synthesize_poly(&EmpiricalMeasure::new([(0.0, 0.3), (0.5, 0.7)]).unwrap(), 4),
        Err(PolyError::NonRationalWeights { q: 4 })
    ));
}

#[test]
fn coefficient_and_root_forms_agree() {
    let mut rng = common::Mix(31);
    for _ in 0..10 {
        let n = 2 + (rng.next_u64() % 10) as usize;
        let roots: Vec<Root> = (0..n)
            .map(|_| Root { modulus: 0.5 + rng.uniform(), angle: rng.uniform() })
            .collect();
        let f = PolynomialSpec::from_roots(one(), roots).unwrap();
        let g = PolynomialSpec::from_coeffs(f.coefficients()).unwrap();
        assert!((height_poly(&f).unwrap() - height_poly(&g).unwrap()).abs() < 1e-8);
        assert!((discrepancy_poly(&f).unwrap().0 - discrepancy_poly(&g).unwrap().0).abs() < 1e-9);
    }
}

#[test]
fn json_round_trip() {
    let docs = [
        r#"{"roots":[[1.0,0.0],[1.0,0.5]],"leading":[1.0,0.0]}"#,
        r#"{"coeffs":[[-1.0,0.0],[0.0,0.0],[1.0,0.0]]}"#,
        r#"{"roots":[[11,0],[2222222222222221,0]]}"#,
        r#"{"coeffs":[[0.1,0.7],[1e-300,3.3333333333333335],[2.2250738585072014e-308,1]]}"#,
    ];
    for d in docs {
        let f = PolynomialSpec::from_json(d).unwrap();
        let g = PolynomialSpec::from_json(&f.to_json().to_string()).unwrap();
        assert_eq!(f, g);
    }
    assert!(PolynomialSpec::from_json(r#"{"roots":[]}"#).is_err());
    assert!(PolynomialSpec::from_json("[").is_err());
}
