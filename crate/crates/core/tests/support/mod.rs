//! Shared oracles for the integration suites: deterministic randomness, a
//! schoolbook multiplier, a term-by-term sigma solver, and fixture data.

#![allow(dead_code)]

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;

use padic_heights::curve::{CurveQ, RationalPoint};
use padic_heights::formal_group::formal_group;
use padic_heights::kedlaya::compute_frobenius;
use padic_heights::padic::{val_u64, Modulus, ZModPN};
use padic_heights::sigma::{compute_c, compute_h_hat};

/// Small deterministic generator so failures reproduce exactly.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    /// Uniform in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    /// Uniform in [lo, hi] inclusive.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }
}

pub fn schoolbook_mul(a: &[BigUint], b: &[BigUint], pn: &BigUint) -> Vec<BigUint> {
    let mut out = vec![BigUint::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = (&out[i + j] + x * y) % pn;
        }
    }
    out
}

pub fn red(x: &BigInt, r: &BigUint) -> BigUint {
    let ri = BigInt::from(r.clone());
    (((x % &ri) + &ri) % &ri).to_biguint().unwrap()
}

/// Solve F'/F = f coefficient by coefficient: n F_n = sum_j f_j F_{n-1-j}.
/// Returns the sigma coefficients c_k = F_{k-1} for k = 1..N-1 together
/// with the number of digits each one is good for, tracking the exact
/// precision loss of every division by p | n. Quadratic and simple, which
/// is the point: it shares no code with the doubling solver.
pub fn naive_sigma_coeffs(e: &CurveQ, p: u64, n: u32, e2: &ZModPN) -> Vec<(BigUint, u32)> {
    assert!(n >= 4);
    let pb = BigUint::from(p);
    let fg = formal_group(e, &pb, n).unwrap();
    let c = compute_c(e, &e2.retarget(fg.modulus()));
    let h = compute_h_hat(e, &fg, &c).unwrap();

    let k_work = n + 10;
    let pk = pb.pow(k_work);
    // f_0 carries N-2 good digits, the rest N-3
    let mut f_vals = vec![h.constant.value().clone()];
    let mut f_errs = vec![n - 2];
    for coef in &h.regular.coeffs()[1..] {
        f_vals.push(coef.value().clone());
        f_errs.push(n - 3);
    }

    let mut big_f = vec![BigUint::from(1u32)];
    let mut errs = vec![k_work];
    for t in 1..(n - 1) as usize {
        let mut s = BigUint::zero();
        let mut err = k_work;
        for j in 0..t.min(f_vals.len()) {
            s = (s + &f_vals[j] * &big_f[t - 1 - j]) % &pk;
            err = err.min(f_errs[j]).min(errs[t - 1 - j]);
        }
        let v = val_u64(t as u64, p);
        let pv = pb.pow(v);
        assert!((&s % &pv).is_zero(), "exact division by p^{v} must hold");
        let m = Modulus::new(pb.clone(), k_work);
        let unit_inv = ZModPN::from_u64(&m, t as u64 / p.pow(v)).inv().unwrap();
        big_f.push((s / pv) * unit_inv.value() % &pk);
        errs.push(err - v);
    }

    let mut out = vec![(BigUint::from(1u32), n - 1)];
    for k in 2..n {
        let good = errs[(k - 1) as usize].min(n - k);
        out.push((&big_f[(k - 1) as usize] % pb.pow(good), good));
    }
    out
}

pub struct Fixture {
    pub label: &'static str,
    pub coeffs: [i64; 5],
    /// preferred good ordinary prime, if one is pinned by the golden data
    pub p: Option<u64>,
    pub generator: Option<(RationalPoint, u64)>,
}

pub fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture {
            label: "37a",
            coeffs: [0, 0, 1, -1, 0],
            p: Some(5),
            generator: Some((RationalPoint::affine(0, 0, 1), 1)),
        },
        Fixture {
            label: "92b1",
            coeffs: [0, 0, 0, -1, 1],
            p: Some(5),
            generator: Some((RationalPoint::affine(1, 1, 1), 3)),
        },
        Fixture {
            label: "214a1",
            coeffs: [1, 0, 0, -12, 16],
            p: Some(43),
            generator: Some((RationalPoint::affine(0, -4, 1), 7)),
        },
        Fixture {
            label: "26a2",
            coeffs: [1, 0, 1, -460, -3830],
            p: Some(5),
            generator: None,
        },
        Fixture {
            label: "91b1",
            coeffs: [0, 1, 1, -7, 5],
            p: None,
            generator: Some((RationalPoint::affine(5, -3, 2), 1)),
        },
        Fixture {
            label: "x3+7x+8",
            coeffs: [0, 0, 0, 7, 8],
            p: Some(11),
            generator: None,
        },
    ]
}

pub fn first_good_ordinary(e: &CurveQ, from: u64) -> u64 {
    let mut p = from;
    loop {
        if padic_heights::curve::is_prime(p) && e.is_good_ordinary(p).unwrap_or(false) {
            return p;
        }
        p += 2;
    }
}

/// det = p, trace = a_p, and F^2 - a_p F + p I = 0, all mod p^n.
pub fn assert_frobenius_identities(e: &CurveQ, p: u64, n: u32) {
    let pb = BigUint::from(p);
    let f = compute_frobenius(e, &pb, n, false).unwrap();
    let m = f.a.modulus().clone();
    let (_, a_p) = e.count_points(p).unwrap();
    assert_eq!(f.det(), ZModPN::from_u64(&m, p));
    assert_eq!(f.trace(), ZModPN::from_i64(&m, a_p));
    let f2 = f.pow(2);
    let ap = ZModPN::from_i64(&m, a_p);
    let pz = ZModPN::from_u64(&m, p);
    assert!(f2.a.sub(&ap.mul(&f.a)).add(&pz).is_zero());
    assert!(f2.b.sub(&ap.mul(&f.b)).is_zero());
    assert!(f2.c.sub(&ap.mul(&f.c)).is_zero());
    assert!(f2.d.sub(&ap.mul(&f.d)).add(&pz).is_zero());
}

/// Random curve with small coefficients and a small-height rational point
/// that is non-torsion and reduces to a nonsingular point at every bad
/// prime of the model. Returns None when the draw is unusable.
pub fn random_curve_with_point(rng: &mut Lcg) -> Option<(CurveQ, RationalPoint)> {
    let a1 = rng.range_i64(-3, 3);
    let a2 = rng.range_i64(-3, 3);
    let a3 = rng.range_i64(-3, 3);
    let a4 = rng.range_i64(-3, 3);
    let x = rng.range_i64(-4, 4);
    let y = rng.range_i64(-8, 8);
    // solve for a6 so (x, y) lies on the curve
    let a6 = y * y + a1 * x * y + a3 * y - x * x * x - a2 * x * x - a4 * x;
    let e = CurveQ::from_i64([a1, a2, a3, a4, a6]).ok()?;
    let q = RationalPoint::affine(x, y, 1);
    // non-torsion: no multiple up to the rational torsion bound vanishes
    let mut acc = q.clone();
    for _ in 1..=12u64 {
        if acc.is_infinity() {
            return None;
        }
        acc = e.point_add(&acc, &q);
    }
    let (_, a2_ok) = e.check_a1_a2(&q, 5).ok()?;
    if !a2_ok {
        return None;
    }
    Some((e, q))
}
