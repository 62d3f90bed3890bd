//! Command-line front end: E2, Frobenius matrices, sigma coefficients,
//! point multiples and p-adic heights, plus the golden-fixture runner and a
//! small benchmark harness.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use num_traits::Num;

use padic_heights::curve::{is_prime, CurveQ, RationalPoint};
use padic_heights::divpoly::DivPolyContext;
use padic_heights::height::{padic_height, HeightJob, HeightResult};
use padic_heights::kedlaya::{compute_e2, compute_frobenius};
use padic_heights::sigma::compute_sigma;

mod fixtures;
mod render;

#[derive(Parser)]
#[command(name = "padic-height", version, about = "p-adic heights on elliptic curves over Q")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CurveArg {
    /// a-invariants a1,a2,a3,a4,a6
    #[arg(long, value_parser = parse_curve)]
    curve: CurveSpec,
}

#[derive(Clone)]
struct CurveSpec([i64; 5]);

#[derive(Subcommand)]
enum Command {
    /// E2(E, omega) mod p^prec
    E2 {
        #[command(flatten)]
        curve: CurveArg,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        prec: u32,
        /// derive the full matrix from one low-precision column
        #[arg(long)]
        column_trick: bool,
    },
    /// Frobenius matrix on the standard cohomology basis mod p^prec
    Frobenius {
        #[command(flatten)]
        curve: CurveArg,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        prec: u32,
    },
    /// sigma function coefficients mod the ideal (p^prec, ..., t^prec)
    Sigma {
        #[command(flatten)]
        curve: CurveArg,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        prec: u32,
    },
    /// alpha, beta, d of mQ modulo an odd integer
    Multiple {
        #[command(flatten)]
        curve: CurveArg,
        /// point as xnum/xden,ynum/yden
        #[arg(long, value_parser = parse_point)]
        point: PointSpec,
        #[arg(long)]
        m: u64,
        #[arg(long = "mod", value_parser = parse_biguint)]
        modulus: BigUint,
    },
    /// cyclotomic p-adic height of a rational point
    Height {
        #[command(flatten)]
        curve: CurveArg,
        #[arg(long, value_parser = parse_point)]
        point: PointSpec,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        prec: u32,
        /// LCM of the Tamagawa numbers of the curve
        #[arg(long)]
        tamagawa_lcm: u64,
        /// divide by 2p (Mazur-Stein-Tate normalization)
        #[arg(long)]
        mst_normalization: bool,
        #[arg(long)]
        json: bool,
    },
    /// run every expected value in a fixture file
    Golden {
        /// line-oriented JSON fixture file
        #[arg(default_value = "fixtures/paper.jsonl")]
        fixtures: PathBuf,
    },
    /// timings for the sigma function and point-multiple stages
    Bench,
}

#[derive(Clone)]
struct PointSpec {
    x_num: i64,
    x_den: i64,
    y_num: i64,
    y_den: i64,
}

fn parse_curve(s: &str) -> Result<CurveSpec, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 5 {
        return Err("expected 5 comma-separated integers a1,a2,a3,a4,a6".into());
    }
    let mut a = [0i64; 5];
    for (i, part) in parts.iter().enumerate() {
        a[i] = part.trim().parse().map_err(|e| format!("a{}: {e}", [1, 2, 3, 4, 6][i]))?;
    }
    Ok(CurveSpec(a))
}

fn parse_rational(s: &str) -> Result<(i64, i64), String> {
    match s.split_once('/') {
        Some((n, d)) => {
            let den: i64 = d.trim().parse().map_err(|e| format!("{e}"))?;
            if den == 0 {
                return Err("zero denominator".into());
            }
            Ok((n.trim().parse().map_err(|e| format!("{e}"))?, den))
        }
        None => Ok((s.trim().parse().map_err(|e| format!("{e}"))?, 1)),
    }
}

fn parse_point(s: &str) -> Result<PointSpec, String> {
    let (xs, ys) = s
        .split_once(',')
        .ok_or_else(|| "expected xnum/xden,ynum/yden".to_string())?;
    let (x_num, x_den) = parse_rational(xs)?;
    let (y_num, y_den) = parse_rational(ys)?;
    Ok(PointSpec { x_num, x_den, y_num, y_den })
}

fn parse_biguint(s: &str) -> Result<BigUint, String> {
    BigUint::from_str_radix(s.trim(), 10).map_err(|e| format!("{e}"))
}

fn build_curve(spec: &CurveSpec) -> Result<CurveQ, String> {
    CurveQ::from_i64(spec.0).map_err(|e| e.to_string())
}

fn build_point(curve: &CurveQ, spec: &PointSpec) -> Result<RationalPoint, String> {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    let x = BigRational::new(BigInt::from(spec.x_num), BigInt::from(spec.x_den));
    let y = BigRational::new(BigInt::from(spec.y_num), BigInt::from(spec.y_den));
    let xd = x.denom().clone();
    let d2 = xd.sqrt();
    if &d2 * &d2 != xd || y.denom() != &(&d2 * &d2 * &d2) {
        return Err("point denominators are not (d^2, d^3)".into());
    }
    let pt = RationalPoint::from_xy(&x, &y);
    if !curve.is_on_curve(&pt) {
        return Err("point is not on the curve".into());
    }
    Ok(pt)
}

fn require_prime(p: u64) -> Result<(), String> {
    if p < 5 || !is_prime(p) {
        return Err("p must be a prime >= 5".into());
    }
    Ok(())
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::E2 { curve, p, prec, column_trick } => {
            require_prime(p)?;
            let e = build_curve(&curve.curve)?;
            let e2 = compute_e2(&e, &BigUint::from(p), prec, column_trick)
                .map_err(|e| e.to_string())?;
            println!("E2 = {} (mod {}^{})", e2.value(), p, prec);
            println!("digits = {}", render::digit_list(&e2.digits()));
        }
        Command::Frobenius { curve, p, prec } => {
            require_prime(p)?;
            let e = build_curve(&curve.curve)?;
            let f = compute_frobenius(&e, &BigUint::from(p), prec, false)
                .map_err(|e| e.to_string())?;
            println!("F = [[{}, {}], [{}, {}]] (mod {}^{})",
                     f.a.value(), f.b.value(), f.c.value(), f.d.value(), p, prec);
        }
        Command::Sigma { curve, p, prec } => {
            require_prime(p)?;
            if prec < 2 {
                return Err("prec must be >= 2".into());
            }
            let e = build_curve(&curve.curve)?;
            let pb = BigUint::from(p);
            let e2 = if prec >= 4 {
                Some(compute_e2(&e, &pb, prec - 3, false).map_err(|e| e.to_string())?)
            } else {
                None
            };
            let sigma = compute_sigma(&e, &pb, prec, e2.as_ref()).map_err(|e| e.to_string())?;
            for k in 1..prec {
                let (c, exp) = sigma.coeff(k);
                println!("c_{k} = {c} (mod {p}^{exp})");
            }
        }
        Command::Multiple { curve, point, m, modulus } => {
            let e = build_curve(&curve.curve)?;
            let q = build_point(&e, &point)?;
            let mut ctx = DivPolyContext::new(&e, &q, &modulus).map_err(|e| e.to_string())?;
            let (a, b, d) = ctx.multiple_coords(m).map_err(|e| e.to_string())?;
            println!("alpha={a} beta=\u{b1}{b} d=\u{b1}{d}");
        }
        Command::Height { curve, point, p, prec, tamagawa_lcm, mst_normalization, json } => {
            require_prime(p)?;
            let e = build_curve(&curve.curve)?;
            let pt = build_point(&e, &point)?;
            let job = HeightJob {
                curve: e,
                point: pt,
                p,
                precision: prec,
                tamagawa_lcm,
                mst_normalization,
            };
            let result = padic_height(&job).map_err(|e| e.to_string())?;
            if json {
                println!("{}", render_json(&result));
            } else {
                println!("{}", render::padic(&result.value));
            }
        }
        Command::Golden { fixtures } => {
            let report = fixtures::run_golden_suite(&fixtures)?;
            print!("{}", report.text);
            if report.failures > 0 {
                return Err(format!("{} golden check(s) failed", report.failures));
            }
        }
        Command::Bench => bench(),
    }
    Ok(())
}

fn render_json(r: &HeightResult) -> String {
    let v = &r.value;
    serde_json::json!({
        "p": v.prime().to_string(),
        "valuation": v.valuation(),
        "unit": v.unit().to_string(),
        "digits": v.digit_expansion(),
        "precision": r.precision,
        "text": render::padic(v),
        "diagnostics": {
            "n1": r.diagnostics.n1,
            "n2": r.diagnostics.n2,
            "n": r.diagnostics.n,
            "m": r.diagnostics.m,
            "m_prime": r.diagnostics.m_prime,
            "e2_precision": r.diagnostics.e2_precision,
            "p_divides_n2": r.diagnostics.p_divides_n2,
        },
    })
    .to_string()
}

fn bench() {
    let e = CurveQ::from_i64([0, 0, 0, -1, 1]).unwrap();
    let pb = BigUint::from(5u32);
    for n in [250u32, 500, 1000] {
        let t0 = Instant::now();
        let e2 = compute_e2(&e, &pb, n - 3, false).unwrap();
        let t1 = Instant::now();
        compute_sigma(&e, &pb, n, Some(&e2)).unwrap();
        println!(
            "sigma N={n}: e2 {:.3}s, sigma {:.3}s",
            (t1 - t0).as_secs_f64(),
            t1.elapsed().as_secs_f64()
        );
    }
    let e = CurveQ::from_i64([0, 1, 1, -7, 5]).unwrap();
    let q = RationalPoint::affine(5, -3, 2);
    let r = BigUint::from(5u64).pow(20);
    for m in [1u64 << 10, 1 << 20, 1 << 30] {
        let t0 = Instant::now();
        let mut ctx = DivPolyContext::new(&e, &q, &r).unwrap();
        ctx.multiple_coords(m).unwrap();
        println!("multiple m=2^{}: {:.4}s", m.trailing_zeros(), t0.elapsed().as_secs_f64());
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
