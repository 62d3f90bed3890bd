//! Exact arithmetic in Z/p^N Z and p-adic numbers with explicit precision.
//!
//! A [`ZModPN`] is a residue modulo p^N for a fixed odd prime p >= 5; the
//! modulus descriptor (p, N, p^N) is shared through an `Arc` so that a whole
//! computation reuses one precomputed power. A [`PadicNumber`] is the triple
//! (valuation, unit, precision) used for final results, where the valuation
//! may be negative (heights at anomalous primes).

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Shared modulus descriptor for residues mod p^N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Modulus {
    p: BigUint,
    exp: u32,
    pow: BigUint,
}

impl Modulus {
    pub fn new(p: BigUint, exp: u32) -> Arc<Modulus> {
        assert!(exp >= 1, "modulus exponent must be >= 1");
        assert!(p >= BigUint::from(2u32), "p must be a prime >= 2");
        let pow = p.pow(exp);
        Arc::new(Modulus { p, exp, pow })
    }

    pub fn prime(&self) -> &BigUint {
        &self.p
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn power(&self) -> &BigUint {
        &self.pow
    }

    pub fn same(a: &Arc<Modulus>, b: &Arc<Modulus>) -> bool {
        Arc::ptr_eq(a, b) || (a.p == b.p && a.exp == b.exp)
    }
}

/// A residue in Z/p^N Z.
#[derive(Clone, PartialEq, Eq)]
pub struct ZModPN {
    m: Arc<Modulus>,
    value: BigUint,
}

impl fmt::Debug for ZModPN {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (mod {}^{})",
            self.value,
            self.m.prime(),
            self.m.exponent()
        )
    }
}

impl ZModPN {
    pub fn new(m: &Arc<Modulus>, value: BigUint) -> ZModPN {
        let value = value % m.power();
        ZModPN { m: m.clone(), value }
    }

    pub fn from_bigint(m: &Arc<Modulus>, value: &BigInt) -> ZModPN {
        let r = value.mod_floor(&BigInt::from(m.power().clone()));
        ZModPN::new(m, r.to_biguint().expect("mod_floor is nonnegative"))
    }

    pub fn from_u64(m: &Arc<Modulus>, value: u64) -> ZModPN {
        ZModPN::new(m, BigUint::from(value))
    }

    pub fn from_i64(m: &Arc<Modulus>, value: i64) -> ZModPN {
        ZModPN::from_bigint(m, &BigInt::from(value))
    }

    pub fn zero(m: &Arc<Modulus>) -> ZModPN {
        ZModPN { m: m.clone(), value: BigUint::zero() }
    }

    pub fn one(m: &Arc<Modulus>) -> ZModPN {
        ZModPN::new(m, BigUint::one())
    }

    pub fn modulus(&self) -> &Arc<Modulus> {
        &self.m
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_unit(&self) -> bool {
        !(&self.value % self.m.prime()).is_zero()
    }

    fn check(&self, other: &ZModPN) {
        assert!(
            Modulus::same(&self.m, &other.m),
            "mixed moduli: {:?} vs {:?}",
            self.m,
            other.m
        );
    }

    pub fn add(&self, other: &ZModPN) -> ZModPN {
        self.check(other);
        let mut v = &self.value + &other.value;
        if v >= *self.m.power() {
            v -= self.m.power();
        }
        ZModPN { m: self.m.clone(), value: v }
    }

    pub fn sub(&self, other: &ZModPN) -> ZModPN {
        self.check(other);
        let v = if self.value >= other.value {
            &self.value - &other.value
        } else {
            self.m.power() - &other.value + &self.value
        };
        ZModPN { m: self.m.clone(), value: v }
    }

    pub fn neg(&self) -> ZModPN {
        if self.value.is_zero() {
            self.clone()
        } else {
            ZModPN { m: self.m.clone(), value: self.m.power() - &self.value }
        }
    }

    pub fn mul(&self, other: &ZModPN) -> ZModPN {
        self.check(other);
        ZModPN { m: self.m.clone(), value: (&self.value * &other.value) % self.m.power() }
    }

    pub fn mul_u64(&self, k: u64) -> ZModPN {
        ZModPN { m: self.m.clone(), value: (&self.value * k) % self.m.power() }
    }

    pub fn pow(&self, mut e: u64) -> ZModPN {
        let mut base = self.clone();
        let mut acc = ZModPN::one(&self.m);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Inverse mod p^N by the extended Euclidean algorithm.
    pub fn inv(&self) -> Result<ZModPN> {
        if !self.is_unit() {
            return Err(Error::NotAUnit(format!("{:?}", self)));
        }
        let a = BigInt::from(self.value.clone());
        let n = BigInt::from(self.m.power().clone());
        let e = a.extended_gcd(&n);
        debug_assert!(e.gcd.is_one());
        Ok(ZModPN::from_bigint(&self.m, &e.x))
    }

    pub fn div(&self, other: &ZModPN) -> Result<ZModPN> {
        Ok(self.mul(&other.inv()?))
    }

    /// p-adic valuation of the canonical representative, capped at N.
    pub fn valuation(&self) -> u32 {
        if self.value.is_zero() {
            return self.m.exponent();
        }
        let mut v = 0u32;
        let mut x = self.value.clone();
        while (&x % self.m.prime()).is_zero() {
            x /= self.m.prime();
            v += 1;
        }
        v
    }

    /// Exact division of the canonical representative by p^k. The result
    /// is only meaningful mod p^{N-k}; it is returned at the same modulus.
    pub fn shift_down(&self, k: u32) -> Result<ZModPN> {
        if k == 0 {
            return Ok(self.clone());
        }
        let pk = self.m.prime().pow(k);
        let (q, r) = self.value.div_rem(&pk);
        if !r.is_zero() {
            return Err(Error::NotAUnit(format!(
                "p^{k} does not divide {:?}",
                self
            )));
        }
        Ok(ZModPN { m: self.m.clone(), value: q })
    }

    /// Reinterpret the representative at a different exponent of the same p.
    /// Reducing truncates; lifting keeps the canonical representative (the
    /// new high digits are unspecified information, not data).
    pub fn retarget(&self, m: &Arc<Modulus>) -> ZModPN {
        assert_eq!(self.m.prime(), m.prime());
        ZModPN::new(m, self.value.clone())
    }

    /// Base-p digits d_0..d_{N-1}, least significant first.
    pub fn digits(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.m.exponent() as usize);
        let mut x = self.value.clone();
        for _ in 0..self.m.exponent() {
            let (q, r) = x.div_rem(self.m.prime());
            out.push(r.to_u64().expect("digit fits in u64"));
            x = q;
        }
        out
    }
}

/// The usual additive p-adic valuation of an integer; `None` encodes +infinity.
pub fn padic_val(a: &BigInt, p: &BigUint) -> Option<u64> {
    if a.is_zero() {
        return None;
    }
    let p = BigInt::from(p.clone());
    let mut x = a.abs();
    let mut v = 0u64;
    loop {
        let (q, r) = x.div_rem(&p);
        if !r.is_zero() {
            return Some(v);
        }
        x = q;
        v += 1;
    }
}

/// Valuation of a u64, as a u32.
pub fn val_u64(mut a: u64, p: u64) -> u32 {
    assert!(a != 0);
    let mut v = 0;
    while a % p == 0 {
        a /= p;
        v += 1;
    }
    v
}

/// Iwasawa p-adic logarithm of a unit, correct mod p^N.
///
/// Computed as (p-1)^{-1} log(u^{p-1}) with the series for log(1+x) carried
/// at p^{N+g} where g = floor(log_p N) + 1 guard digits absorb the divisions
/// by k. The result does not depend on the sign or Teichmueller part of u.
pub fn iwasawa_log(u: &ZModPN) -> Result<ZModPN> {
    if !u.is_unit() {
        return Err(Error::NotAUnit(format!("{:?}", u)));
    }
    let m = u.modulus();
    let n = m.exponent();
    let p = m.prime().clone();

    // guard digits: divisions by k lose v_p(k) <= log_p(k) digits
    let mut g = 1u32;
    let mut t = BigUint::from(n);
    while t >= p {
        t /= &p;
        g += 1;
    }
    let mw = Modulus::new(p.clone(), n + g);

    let p_minus_1 = (&p - 1u32).to_u64();
    let uw = u.retarget(&mw);
    let upow = match p_minus_1 {
        Some(e) => uw.pow(e),
        None => {
            // p - 1 exceeds u64: exponentiate with BigUint exponent
            let mut acc = ZModPN::one(&mw);
            let mut base = uw.clone();
            let mut e = &p - 1u32;
            while !e.is_zero() {
                if e.bit(0) {
                    acc = acc.mul(&base);
                }
                e >>= 1;
                if !e.is_zero() {
                    base = base.mul(&base);
                }
            }
            acc
        }
    };
    let x = upow.sub(&ZModPN::one(&mw));
    debug_assert!(x.is_zero() || x.valuation() >= 1);

    // sum_{k>=1} (-1)^{k+1} x^k / k, truncated once v_p(term) provably > N:
    // v_p(x^k/k) >= k - v_p(k), and k - log_p(k) >= N for k >= N + g.
    let mut acc = ZModPN::zero(&mw);
    let mut xk = x.clone();
    let mut k = 1u64;
    loop {
        if k > (n + g) as u64 || xk.is_zero() {
            break;
        }
        let kb = BigUint::from(k);
        let v = padic_val(&BigInt::from(kb.clone()), &p).unwrap() as u32;
        let odd = ZModPN::new(&mw, &kb / p.pow(v));
        let term = xk.shift_down(v)?.mul(&odd.inv()?);
        if k % 2 == 1 {
            acc = acc.add(&term);
        } else {
            acc = acc.sub(&term);
        }
        k += 1;
        if k <= (n + g) as u64 {
            xk = xk.mul(&x);
        }
    }

    let inv_pm1 = ZModPN::new(&mw, &p - 1u32).inv()?;
    Ok(acc.mul(&inv_pm1).retarget(m))
}

/// A p-adic number as (valuation, unit, precision): the value is
/// p^valuation * unit, known mod p^{valuation + precision_digits}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadicNumber {
    p: BigUint,
    valuation: i64,
    unit: BigUint,
    /// number of known digits starting at `valuation`
    digits: u32,
}

impl PadicNumber {
    /// The distinguished zero, known mod p^{abs_prec}.
    pub fn zero(p: BigUint, abs_prec: i64) -> PadicNumber {
        PadicNumber { p, valuation: abs_prec, unit: BigUint::zero(), digits: 0 }
    }

    /// Build from a residue with an external power-of-p shift. `shift` is
    /// added to the valuation of the residue; the residue is known mod p^N.
    pub fn from_residue_shifted(z: &ZModPN, shift: i64) -> PadicNumber {
        let p = z.modulus().prime().clone();
        let n = z.modulus().exponent();
        if z.is_zero() {
            return PadicNumber::zero(p, n as i64 + shift);
        }
        let v = z.valuation();
        let unit = z.shift_down(v).expect("valuation computed above").value().clone();
        PadicNumber {
            p,
            valuation: v as i64 + shift,
            unit,
            digits: n - v,
        }
    }

    pub fn prime(&self) -> &BigUint {
        &self.p
    }

    pub fn valuation(&self) -> i64 {
        self.valuation
    }

    pub fn unit(&self) -> &BigUint {
        &self.unit
    }

    pub fn is_zero(&self) -> bool {
        self.unit.is_zero()
    }

    /// Exponent a with the number known mod p^a.
    pub fn abs_precision(&self) -> i64 {
        self.valuation + self.digits as i64
    }

    /// Truncate to at most `digits` known digits.
    pub fn truncate_digits(&self, digits: u32) -> PadicNumber {
        if self.digits <= digits {
            return self.clone();
        }
        let unit = &self.unit % self.p.pow(digits);
        if unit.is_zero() {
            // all retained digits vanish: collapses to a less precise zero
            return PadicNumber::zero(self.p.clone(), self.valuation + digits as i64);
        }
        // renormalize in case low digits of the unit vanish after cutting
        let mut v = 0u32;
        let mut u = unit;
        while (&u % &self.p).is_zero() {
            u /= &self.p;
            v += 1;
        }
        PadicNumber {
            p: self.p.clone(),
            valuation: self.valuation + v as i64,
            unit: u,
            digits: digits - v,
        }
    }

    /// Digits d_v, d_{v+1}, ... least significant first, starting at the
    /// valuation, `self.num_digits()` of them.
    pub fn digit_expansion(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.digits as usize);
        let mut x = self.unit.clone();
        for _ in 0..self.digits {
            let (q, r) = x.div_rem(&self.p);
            out.push(r.to_u64().expect("digit fits in u64"));
            x = q;
        }
        out
    }

    pub fn num_digits(&self) -> u32 {
        self.digits
    }

    /// `true` when the two numbers agree mod p^a for a = min of the two
    /// absolute precisions (and that minimum is > both valuations or the
    /// difference vanishes at it).
    pub fn agrees_with(&self, other: &PadicNumber) -> bool {
        if self.p != other.p {
            return false;
        }
        let a = self.abs_precision().min(other.abs_precision());
        let base = self.valuation.min(other.valuation).min(0);
        self.reduce_mod(a, base) == other.reduce_mod(a, base)
    }

    /// Canonical residue of p^{-base} * value mod p^{a - base}.
    fn reduce_mod(&self, a: i64, base: i64) -> BigUint {
        if self.is_zero() || self.valuation >= a {
            return BigUint::zero();
        }
        let k = (a - base) as u32;
        let shift = (self.valuation - base) as u32;
        (&self.unit * self.p.pow(shift)) % self.p.pow(k)
    }
}

/// Render in the session style `d*p^v + ... + O(p^a)`, omitting zero digits.
impl fmt::Display for PadicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (i, d) in self.digit_expansion().iter().enumerate() {
            if *d == 0 {
                continue;
            }
            let e = self.valuation + i as i64;
            if wrote {
                write!(f, " + ")?;
            }
            match e {
                0 => write!(f, "{d}")?,
                1 => write!(f, "{d}*{}", self.p)?,
                _ => write!(f, "{d}*{}^{e}", self.p)?,
            }
            wrote = true;
        }
        if wrote {
            write!(f, " + ")?;
        }
        write!(f, "O({}^{})", self.p, self.abs_precision())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(p: u64, n: u32) -> Arc<Modulus> {
        Modulus::new(BigUint::from(p), n)
    }

    #[test]
    fn inverse_of_identity() {
        let m = m(5, 6);
        let one = ZModPN::one(&m);
        assert_eq!(one.inv().unwrap(), one);
    }

    #[test]
    fn inverse_of_twelve_mod_5_6() {
        // oracle: extended Euclid run by hand-rolled i64 arithmetic
        let mm = m(5, 6);
        let a = ZModPN::from_u64(&mm, 12);
        let b = a.inv().unwrap();
        assert_eq!(b.value(), &BigUint::from(14323u32));
        assert!(a.mul(&b).value().is_one());
        // involution
        assert_eq!(b.inv().unwrap(), a);
    }

    #[test]
    fn inverse_of_nonunit_fails() {
        let mm = m(5, 6);
        assert!(matches!(
            ZModPN::from_u64(&mm, 5).inv(),
            Err(Error::NotAUnit(_))
        ));
    }

    #[test]
    fn valuation_of_integers() {
        assert_eq!(padic_val(&BigInt::from(75), &BigUint::from(5u32)), Some(2));
        assert_eq!(padic_val(&BigInt::from(301), &BigUint::from(43u32)), Some(1));
        assert_eq!(padic_val(&BigInt::from(0), &BigUint::from(7u32)), None);
        assert_eq!(padic_val(&BigInt::from(-50), &BigUint::from(5u32)), Some(2));
    }

    #[test]
    fn valuation_is_additive() {
        let p = BigUint::from(5u32);
        for (a, b) in [(75i64, 10), (12, 35), (-25, 5)] {
            let va = padic_val(&BigInt::from(a), &p).unwrap();
            let vb = padic_val(&BigInt::from(b), &p).unwrap();
            assert_eq!(padic_val(&BigInt::from(a * b), &p), Some(va + vb));
        }
    }

    #[test]
    fn log_of_identity_is_zero() {
        let mm = m(7, 8);
        assert!(iwasawa_log(&ZModPN::one(&mm)).unwrap().is_zero());
    }

    #[test]
    fn log_matches_anomalous_example() {
        // log(1430987165464) = 43 * 44668563676 mod 43^8
        let mm = m(43, 8);
        let u = ZModPN::new(&mm, BigUint::from(1430987165464u64));
        let l = iwasawa_log(&u).unwrap();
        let expect = ZModPN::new(&mm, BigUint::from(43u64) * BigUint::from(44668563676u64));
        assert_eq!(l, expect);
    }

    #[test]
    fn log_insensitive_to_sign() {
        let mm = m(5, 10);
        let u = ZModPN::from_u64(&mm, 7_654_321);
        assert_eq!(iwasawa_log(&u).unwrap(), iwasawa_log(&u.neg()).unwrap());
    }

    #[test]
    fn log_of_nonunit_fails() {
        let mm = m(5, 4);
        assert!(iwasawa_log(&ZModPN::from_u64(&mm, 10)).is_err());
    }

    #[test]
    fn log_unchanged_by_multiples_of_pn() {
        // perturbing u mod p^N never changes the output
        let mm = m(5, 6);
        let u = ZModPN::from_u64(&mm, 1 + 5u64.pow(6) * 3 + 2 * 5);
        let v = ZModPN::from_u64(&mm, 1 + 2 * 5);
        assert_eq!(iwasawa_log(&u).unwrap(), iwasawa_log(&v).unwrap());
    }

    #[test]
    fn padic_number_rendering() {
        // 43^{-1} * 96127622779 + O(43^6)
        let mm = m(43, 8);
        let l = ZModPN::new(&mm, BigUint::from(43u64) * BigUint::from(96127622779u64));
        let h = PadicNumber::from_residue_shifted(&l, -2).truncate_digits(7);
        assert_eq!(h.valuation(), -1);
        assert_eq!(h.unit(), &BigUint::from(96127622779u64));
        assert_eq!(h.abs_precision(), 6);
    }

    #[test]
    fn padic_number_display_style() {
        let mm = m(5, 5);
        let v = ZModPN::from_u64(&mm, 4 * 5 + 3 * 25 + 3 * 125 + 4 * 625);
        let h = PadicNumber::from_residue_shifted(&v, 0).truncate_digits(5);
        // zero constant digit omitted, session style
        let s = format!("{}", PadicNumber {
            p: BigUint::from(5u32),
            valuation: 1,
            unit: h.unit().clone(),
            digits: 4,
        });
        assert_eq!(s, "4*5 + 3*5^2 + 3*5^3 + 4*5^4 + O(5^5)");
    }
}
