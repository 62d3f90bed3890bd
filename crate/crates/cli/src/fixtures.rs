//! Fixture file format and the golden-suite runner.
//!
//! One JSON record per line. Each record names a curve, optionally a
//! generator and Tamagawa LCM, and a list of expected values keyed by the
//! prime: E2 digit expansions, sigma coefficients, height expansions.

use std::path::Path;

use num_bigint::BigUint;
use serde::Deserialize;

use padic_heights::curve::{CurveQ, RationalPoint};
use padic_heights::height::{padic_height, HeightJob};
use padic_heights::kedlaya::compute_e2;
use padic_heights::sigma::compute_sigma;

#[derive(Deserialize)]
pub struct Fixture {
    pub label: String,
    pub a_invariants: [i64; 5],
    /// x_num, x_den, y_num, y_den; absent for rank-0 curves used only for
    /// E2 and sigma checks
    pub generator: Option<[i64; 4]>,
    pub tamagawa_lcm: Option<u64>,
    #[serde(default)]
    pub expected: Vec<Expected>,
}

#[derive(Deserialize)]
pub struct Expected {
    pub p: u64,
    pub e2: Option<E2Expect>,
    pub sigma: Option<SigmaExpect>,
    pub height: Option<HeightExpect>,
}

#[derive(Deserialize)]
pub struct E2Expect {
    pub prec: u32,
    pub digits: Vec<u64>,
}

#[derive(Deserialize)]
pub struct SigmaExpect {
    /// ideal index N: c_k is expected mod p^{N-k}
    pub ideal: u32,
    /// (k, decimal value, modulus exponent)
    pub coeffs: Vec<(u32, String, u32)>,
}

#[derive(Deserialize)]
pub struct HeightExpect {
    pub prec: u32,
    pub valuation: i64,
    pub digits: Vec<u64>,
}

pub struct Report {
    pub text: String,
    pub checks: usize,
    pub failures: usize,
}

fn generator_point(fx: &Fixture, e: &CurveQ) -> Result<RationalPoint, String> {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    let g = fx.generator.ok_or_else(|| format!("{}: fixture has no generator", fx.label))?;
    let x = BigRational::new(BigInt::from(g[0]), BigInt::from(g[1]));
    let y = BigRational::new(BigInt::from(g[2]), BigInt::from(g[3]));
    let pt = RationalPoint::from_xy(&x, &y);
    if !e.is_on_curve(&pt) {
        return Err(format!("{}: generator is not on the curve", fx.label));
    }
    Ok(pt)
}

pub fn run_golden_suite(path: &Path) -> Result<Report, String> {
    let body = std::fs::read_to_string(path)
        .map_err(|err| format!("{}: {err}", path.display()))?;
    let mut report = Report { text: String::new(), checks: 0, failures: 0 };
    for (lineno, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fx: Fixture = serde_json::from_str(line)
            .map_err(|err| format!("line {}: {err}", lineno + 1))?;
        run_fixture(&fx, &mut report)?;
    }
    Ok(report)
}

fn record(report: &mut Report, label: &str, stage: &str, p: u64, fail: Option<String>) {
    report.checks += 1;
    match fail {
        None => report.text.push_str(&format!("{label} {stage} p={p} PASS\n")),
        Some(why) => {
            report.failures += 1;
            report.text.push_str(&format!("{label} {stage} p={p} FAIL ({why})\n"));
        }
    }
}

fn first_mismatch(got: &[u64], want: &[u64]) -> Option<String> {
    if got.len() != want.len() {
        return Some(format!("length: got {} want {}", got.len(), want.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if g != w {
            return Some(format!("digit {i}: got {g} want {w}"));
        }
    }
    None
}

fn run_fixture(fx: &Fixture, report: &mut Report) -> Result<(), String> {
    let e = CurveQ::from_i64(fx.a_invariants).map_err(|err| format!("{}: {err}", fx.label))?;
    if fx.generator.is_some() {
        generator_point(fx, &e)?;
    }
    for exp in &fx.expected {
        let pb = BigUint::from(exp.p);
        if let Some(want) = &exp.e2 {
            let fail = match compute_e2(&e, &pb, want.prec, false) {
                Ok(e2) => first_mismatch(&e2.digits(), &want.digits),
                Err(err) => Some(err.to_string()),
            };
            record(report, &fx.label, "e2", exp.p, fail);
        }
        if let Some(want) = &exp.sigma {
            let fail = (|| {
                let e2 = if want.ideal >= 4 {
                    Some(compute_e2(&e, &pb, want.ideal - 3, false).map_err(|e| e.to_string())?)
                } else {
                    None
                };
                let sigma =
                    compute_sigma(&e, &pb, want.ideal, e2.as_ref()).map_err(|e| e.to_string())?;
                for (k, value, prec) in &want.coeffs {
                    let (got, got_prec) = sigma.coeff(*k);
                    if got.to_string() != *value || got_prec != *prec {
                        return Err(format!(
                            "c_{k}: got {got} mod p^{got_prec} want {value} mod p^{prec}"
                        ));
                    }
                }
                Ok(())
            })()
            .err();
            record(report, &fx.label, "sigma", exp.p, fail);
        }
        if let Some(want) = &exp.height {
            let fail = (|| {
                let pt = generator_point(fx, &e)?;
                let job = HeightJob {
                    curve: e.clone(),
                    point: pt,
                    p: exp.p,
                    precision: want.prec,
                    tamagawa_lcm: fx.tamagawa_lcm.unwrap_or(1),
                    mst_normalization: false,
                };
                let r = padic_height(&job).map_err(|e| e.to_string())?;
                if r.value.valuation() != want.valuation {
                    return Err(format!(
                        "valuation: got {} want {}",
                        r.value.valuation(),
                        want.valuation
                    ));
                }
                match first_mismatch(&r.value.digit_expansion(), &want.digits) {
                    Some(why) => Err(why),
                    None => Ok(()),
                }
            })()
            .err();
            record(report, &fx.label, "height", exp.p, fail);
        }
    }
    Ok(())
}
