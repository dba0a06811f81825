//! Command-line front end. Exit codes: 0 success, 1 an inequality is
//! violated, 2 bad input.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::discretize::{sharpness_pipeline, sharpness_trace};
use crate::extremal::{
    fmt_sig, make_admissible, periodize, periodized_radii, phi, r_critical, rho_type1, table1, table1_csv,
    tilde_functionals,
};
use crate::harmonic::{density_samples, ganelius_check, random_trig_density, GaneliusReport};
use crate::kernels::QuadratureSpec;
use crate::measures::{discrepancy, height_t, h_tilde, AdmissibleDistR, AdmissibleKind, Measure, DEFAULT_GRID};
use crate::polynomials::{check_et, PolynomialSpec};
use crate::sediment::{energy, ExternalPotentialSpec, Scenario};

#[derive(Debug, Parser)]
#[command(name = "et-lab", version, about = "Discrepancy and height of roots and circle measures")]
pub struct Cli {
    /// Significant digits for CSV and summary lines.
    #[arg(long, global = true, default_value_t = 6)]
    pub precision: usize,
    /// Seed for generated corpora.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check D <= sqrt(2) sqrt(H) for a polynomial JSON file.
    CheckPoly { file: PathBuf },
    /// Reproduce the table of H, D and H_k / D_{k+1}^2.
    Table1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the principal value Phi(L, R).
    Phi {
        #[arg(long = "L", allow_hyphen_values = true)]
        l: f64,
        #[arg(long = "R", allow_hyphen_values = true)]
        r: f64,
    },
    /// Functionals of the extremal families.
    Extremal {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        kind: u8,
        /// Dirac mass parameter of the circle family of kind 1.
        #[arg(long)]
        m: Option<f64>,
        #[arg(long = "R")]
        r: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        emit_density: Option<PathBuf>,
        #[arg(long)]
        emit_measure: Option<PathBuf>,
    },
    /// Continuum -> discrete -> rational chain for rho_I(m).
    Sharpness {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: u64,
        /// Also build the polynomial and run the root check.
        #[arg(long)]
        poly: bool,
        /// CSV of (n, G) over n = 256, 1024, 4096.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Minimize the energy for a scenario JSON file.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        density: Option<PathBuf>,
    },
    /// Ganelius estimate for a measure JSON file, or for a random corpus.
    Ganelius {
        file: Option<PathBuf>,
        #[arg(long, default_value_t = crate::harmonic::DEFAULT_GRID)]
        grid: usize,
        /// Check this many random trigonometric densities instead of a file.
        #[arg(long)]
        corpus: Option<usize>,
    },
    /// Periodize an admissible distribution onto the circle.
    Periodize {
        #[arg(long = "R")]
        r: Option<f64>,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        emit_measure: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Violated(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(Failure::Violated(msg)) => {
            let _ = writeln!(err, "{msg}");
            1
        }
        Err(Failure::Input(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, v: &serde_json::Value) -> Outcome {
    writeln!(out, "{}", serde_json::to_string_pretty(v).expect("serializable"))?;
    Ok(())
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Outcome {
    let digits = cli.precision.clamp(1, 17);
    match &cli.command {
        Command::CheckPoly { file } => {
            let f = PolynomialSpec::from_json(&read(file)?)?;
            let report = check_et(&f)?;
            emit(out, &serde_json::to_value(&report)?)?;
            writeln!(out, "{}", report.summary(digits))?;
            if !report.holds {
                return Err(Failure::Violated(format!("inequality violated: {}", report.summary(digits))));
            }
        }
        Command::Table1 { out: path } => {
            let csv = table1_csv(&table1()?, digits);
            match path {
                Some(p) => write_file(p, &csv)?,
                None => write!(out, "{csv}")?,
            }
        }
        Command::Phi { l, r } => {
            let v = phi(*l, *r, &QuadratureSpec::with_tol(1e-12))?;
            writeln!(out, "{}", fmt_sig(v, digits))?;
        }
        Command::Extremal {
            kind,
            m,
            r,
            lambda,
            emit_density,
            emit_measure,
        } => extremal(*kind, *m, *r, *lambda, emit_density.as_deref(), emit_measure.as_deref(), digits, out)?,
        Command::Sharpness { m, n, q, poly, trace } => {
            let report = sharpness_pipeline(*m, *n, *q, *poly)?;
            emit(out, &serde_json::to_value(&report)?)?;
            if let Some(p) = trace {
                write_file(p, &sharpness_trace(*m, &[256, 1024, 4096], digits)?)?;
            }
            let stages = [report.continuum, report.discrete, report.rational];
            if stages.iter().any(|s| !(s.g > 0.5)) {
                return Err(Failure::Violated("G <= 1/2 at some stage".into()));
            }
            if let Some(p) = &report.polynomial {
                if !p.holds {
                    return Err(Failure::Violated(format!("inequality violated: {}", p.summary(digits))));
                }
            }
        }
        Command::Simulate { file, trace, density } => {
            let sc = Scenario::from_json(&read(file)?)?;
            let res = sc.run()?;
            let u = ExternalPotentialSpec::new(sc.big_m, sc.m);
            emit(
                out,
                &json!({
                    "energy": energy(&res.density, &u),
                    "residual": res.residual,
                    "iterations": res.iterations,
                    "converged": res.converged,
                }),
            )?;
            if let Some(p) = trace {
                let mut s = String::from("iteration,energy,residual\n");
                for t in &res.trace {
                    s.push_str(&format!(
                        "{},{},{}\n",
                        t.iteration,
                        fmt_sig(t.energy, digits),
                        fmt_sig(t.residual, digits)
                    ));
                }
                write_file(p, &s)?;
            }
            if let Some(p) = density {
                let g = &res.density;
                let mut s = String::from("x,density\n");
                for (j, v) in g.values().iter().enumerate() {
                    s.push_str(&format!("{},{}\n", fmt_sig(g.center(j), digits), fmt_sig(*v, digits)));
                }
                write_file(p, &s)?;
            }
        }
        Command::Ganelius { file, grid, corpus } => {
            let reports: Vec<GaneliusReport> = match (file, corpus) {
                (Some(f), None) => {
                    let rho = Measure::from_json(&read(f)?)?;
                    vec![ganelius_check(&density_samples(&rho, *grid)?)?]
                }
                (None, Some(count)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
                    (0..*count)
                        .map(|i| {
                            let rho = random_trig_density(&mut rng, 1 + i % 16);
                            ganelius_check(&density_samples(&Measure::Mixed(rho), *grid)?)
                        })
                        .collect::<Result<_, _>>()?
                }
                _ => return Err(Failure::Input("give either a density file or --corpus".into())),
            };
            if reports.len() == 1 {
                emit(out, &serde_json::to_value(&reports[0])?)?;
            } else {
                let worst = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
                let held = reports.iter().filter(|r| r.holds).count();
                emit(out, &json!({ "count": reports.len(), "holds": held, "max_ratio": worst }))?;
            }
            if reports.iter().any(|r| !r.holds) {
                return Err(Failure::Violated("Ganelius estimate violated".into()));
            }
        }
        Command::Periodize { r, lambda, emit_measure } => {
            let mu = make_admissible(*r, *lambda)?;
            let rho = periodize(&mu)?;
            let (l_circ, r_circ) = periodized_radii(&rho);
            let m = Measure::Mixed(rho);
            let (d, _) = discrepancy(&m)?;
            let (h, _) = height_t(&m, DEFAULT_GRID)?;
            emit(
                out,
                &json!({
                    "kind": kind_name(mu.kind),
                    "R": r,
                    "L": mu.l,
                    "lambda": lambda,
                    "L_circ": l_circ,
                    "R_circ": r_circ,
                    "D": d,
                    "H": h,
                    "H_tilde": h_tilde(&mu)?,
                    "G": h / (d * d),
                }),
            )?;
            if let Some(p) = emit_measure {
                write_file(p, &serde_json::to_string_pretty(&m.to_json())?)?;
            }
        }
    }
    Ok(())
}

fn kind_name(k: AdmissibleKind) -> &'static str {
    match k {
        AdmissibleKind::I => "I",
        AdmissibleKind::II => "II",
        AdmissibleKind::III => "III",
    }
}

#[allow(clippy::too_many_arguments)]
fn extremal(
    kind: u8,
    m: Option<f64>,
    r: Option<f64>,
    lambda: f64,
    emit_density: Option<&Path>,
    emit_measure: Option<&Path>,
    digits: usize,
    out: &mut dyn Write,
) -> Outcome {
    if kind == 1 {
        if let Some(m) = m {
            let rho = rho_type1(m)?;
            let meas = Measure::Mixed(rho.clone());
            let (d, _) = discrepancy(&meas)?;
            let (h, _) = height_t(&meas, DEFAULT_GRID)?;
            emit(out, &json!({ "kind": "I", "m": m, "D": d, "H": h, "G": h / (d * d) }))?;
            if let Some(p) = emit_density {
                let n = 1024;
                let mut s = String::from("x,density\n");
                for j in 0..n {
                    let x = -0.5 + (j as f64 + 0.5) / n as f64;
                    s.push_str(&format!("{},{}\n", fmt_sig(x, digits), fmt_sig(rho.density.density(x), digits)));
                }
                write_file(p, &s)?;
            }
            if let Some(p) = emit_measure {
                write_file(p, &serde_json::to_string_pretty(&meas.to_json())?)?;
            }
            return Ok(());
        }
    }
    let mu = match (kind, r) {
        (1, None) => AdmissibleDistR::type1(lambda),
        (1, Some(_)) => return Err(Failure::Input("kind 1 takes --m or no parameter".into())),
        (_, None) => return Err(Failure::Input(format!("kind {kind} needs --R"))),
        (2, Some(r)) if r < r_critical() => {
            return Err(Failure::Input(format!("kind 2 needs R >= {}", r_critical())))
        }
        (3, Some(r)) if r >= r_critical() => {
            return Err(Failure::Input(format!("kind 3 needs R < {}", r_critical())))
        }
        (_, Some(r)) => make_admissible(Some(r), lambda)?,
    };
    let (h, d, g) = tilde_functionals(&mu)?;
    emit(
        out,
        &json!({
            "kind": kind_name(mu.kind),
            "R": mu.r,
            "L": mu.l,
            "lambda": mu.lambda,
            "H_tilde": h,
            "D_tilde": d,
            "G_tilde": g,
        }),
    )?;
    if let Some(p) = emit_density {
        let reach = 1.5 * mu.lambda * mu.r.max(1.0);
        let n = 2000;
        let diracs = mu.diracs();
        let mut s = String::from("x,density\n");
        for j in 0..=n {
            let x = -reach + 2.0 * reach * j as f64 / n as f64;
            if diracs.iter().any(|d| d.0 == x) {
                continue;
            }
            s.push_str(&format!("{},{}\n", fmt_sig(x, digits), fmt_sig(mu.density(x), digits)));
        }
        write_file(p, &s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("et-lab").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn phi_near_critical_radius() {
        let (code, out, _) = call(&["phi", "--L", "0", "--R", "1.8102"]);
        assert_eq!(code, 0);
        assert!(out.trim().parse::<f64>().unwrap().abs() < 1e-3);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&["phi", "--L", "0"]).0, 2);
        assert_eq!(call(&["nonsense"]).0, 2);
        assert_eq!(call(&["phi", "--L", "2", "--R", "3"]).0, 2);
        assert_eq!(call(&["check-poly", "/nonexistent/file.json"]).0, 2);
        assert_eq!(call(&["extremal", "--kind", "2", "--R", "1.5"]).0, 2);
    }

    #[test]
    fn extremal_kinds() {
        let (code, out, _) = call(&["extremal", "--kind", "2", "--R", "2"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["H_tilde"].as_f64().unwrap() - std::f64::consts::PI.powi(2)).abs() < 1e-9);
        let (code, out, _) = call(&["extremal", "--kind", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["G_tilde"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}
