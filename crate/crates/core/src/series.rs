//! Dense truncated power series over Z/p^N Z.
//!
//! Multiplication packs coefficients into one large integer (Kronecker
//! substitution) so that a length-d product over Z/p^N Z costs a single
//! big-integer multiplication; below length 32 schoolbook is used. Series
//! with poles of order <= 3 carry an `offset` giving the power of t that
//! multiplies the stored expansion, so x(t), y(t) and h-construction
//! intermediates need no separate Laurent type.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::padic::{Modulus, ZModPN};

const SCHOOLBOOK_CUTOFF: usize = 32;

/// Product of two residue slices over Z/pn, full length `a.len()+b.len()-1`.
///
/// Inputs must already be reduced mod `pn`. Used both for series
/// multiplication and for the flattened bivariate products inside the
/// Frobenius computation.
pub(crate) const NTT_CUTOFF: usize = 1 << 14;

pub(crate) fn mul_slices(a: &[BigUint], b: &[BigUint], pn: &BigUint) -> Vec<BigUint> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().min(b.len()) < SCHOOLBOOK_CUTOFF && a.len() * b.len() < 4096 {
        return mul_slices_schoolbook(a, b, pn);
    }
    let out_len = a.len() + b.len() - 1;
    // the CRT transform overtakes Kronecker packing once the product's
    // total bit size passes ~2^16, measured, independent of the split
    // between length and coefficient width
    let work = out_len as u64 * pn.bits();
    if work >= 1 << 16 {
        if pn.bits() >= 2600 && crate::ntt::seg_feasible(out_len, pn) {
            return crate::ntt::segmented_mul(a, b, pn);
        }
        if crate::ntt::feasible(out_len, pn) {
            return crate::ntt::ntt_mul(a, b, pn);
        }
    }
    mul_slices_kronecker(a, b, pn)
}

pub(crate) fn mul_slices_schoolbook(a: &[BigUint], b: &[BigUint], pn: &BigUint) -> Vec<BigUint> {
    let mut out = vec![BigUint::zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if bj.is_zero() {
                continue;
            }
            out[i + j] += ai * bj;
        }
    }
    for c in &mut out {
        *c %= pn;
    }
    out
}

fn mul_slices_kronecker(a: &[BigUint], b: &[BigUint], pn: &BigUint) -> Vec<BigUint> {
    // slot width: product coefficients are sums of at most min(la, lb)
    // terms each < pn^2; round up to whole u32 digits for cheap packing
    let pairs = a.len().min(b.len()) as u64;
    let bits = 2 * pn.bits() + 64 - pairs.leading_zeros() as u64;
    let slot_words = ((bits + 31) / 32) as usize;
    let pa = pack(a, slot_words);
    let pb = pack(b, slot_words);
    let prod = pa * pb;
    unpack(&prod, slot_words, a.len() + b.len() - 1, pn)
}

fn pack(a: &[BigUint], slot_words: usize) -> BigUint {
    let mut words = vec![0u32; a.len() * slot_words];
    for (i, c) in a.iter().enumerate() {
        let digits = c.to_u32_digits();
        debug_assert!(digits.len() <= slot_words);
        words[i * slot_words..i * slot_words + digits.len()].copy_from_slice(&digits);
    }
    BigUint::new(words)
}

fn unpack(v: &BigUint, slot_words: usize, len: usize, pn: &BigUint) -> Vec<BigUint> {
    let words = v.to_u32_digits();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let lo = (i * slot_words).min(words.len());
        let hi = ((i + 1) * slot_words).min(words.len());
        let c = BigUint::from_slice(&words[lo..hi]);
        out.push(c % pn);
    }
    out
}

/// Truncated power series sum_j c_j t^{offset+j} + O(t^{offset+len}).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadicSeries {
    m: Arc<Modulus>,
    offset: i32,
    coeffs: Vec<ZModPN>,
}

impl PadicSeries {
    pub fn new(m: &Arc<Modulus>, offset: i32, coeffs: Vec<ZModPN>) -> PadicSeries {
        assert!(!coeffs.is_empty(), "series needs at least one coefficient");
        assert!((-3..=0).contains(&offset), "pole order at most 3");
        for c in &coeffs {
            assert!(Modulus::same(c.modulus(), m), "mixed coefficient moduli");
        }
        PadicSeries { m: m.clone(), offset, coeffs }
    }

    pub fn from_u64s(m: &Arc<Modulus>, offset: i32, coeffs: &[u64]) -> PadicSeries {
        PadicSeries::new(m, offset, coeffs.iter().map(|&c| ZModPN::from_u64(m, c)).collect())
    }

    pub fn from_i64s(m: &Arc<Modulus>, offset: i32, coeffs: &[i64]) -> PadicSeries {
        PadicSeries::new(m, offset, coeffs.iter().map(|&c| ZModPN::from_i64(m, c)).collect())
    }

    pub fn one(m: &Arc<Modulus>) -> PadicSeries {
        PadicSeries::new(m, 0, vec![ZModPN::one(m)])
    }

    pub fn zero(m: &Arc<Modulus>, len: usize) -> PadicSeries {
        PadicSeries::new(m, 0, vec![ZModPN::zero(m); len.max(1)])
    }

    pub fn modulus(&self) -> &Arc<Modulus> {
        &self.m
    }

    pub fn offset(&self) -> i32 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stored coefficients, index j carrying t^{offset+j}.
    pub fn coeffs(&self) -> &[ZModPN] {
        &self.coeffs
    }

    /// Coefficient of t^e, zero outside the stored window.
    pub fn coeff_at(&self, e: i64) -> ZModPN {
        let j = e - self.offset as i64;
        if j < 0 || j >= self.coeffs.len() as i64 {
            ZModPN::zero(&self.m)
        } else {
            self.coeffs[j as usize].clone()
        }
    }

    pub fn truncate(&self, trunc: usize) -> PadicSeries {
        let mut c = self.coeffs.clone();
        c.truncate(trunc.max(1));
        PadicSeries { m: self.m.clone(), offset: self.offset, coeffs: c }
    }

    /// Multiply the stored expansion by t^k (adjusts the offset only).
    pub fn shift(&self, k: i32) -> PadicSeries {
        PadicSeries::new(&self.m, self.offset + k, self.coeffs.clone())
    }

    fn check(&self, other: &PadicSeries) -> Result<()> {
        if Modulus::same(&self.m, &other.m) {
            Ok(())
        } else {
            Err(Error::ModulusMismatch)
        }
    }

    pub fn add(&self, other: &PadicSeries) -> Result<PadicSeries> {
        self.check(other)?;
        let off = self.offset.min(other.offset);
        let hi = (self.offset as i64 + self.coeffs.len() as i64)
            .max(other.offset as i64 + other.coeffs.len() as i64);
        let mut out = Vec::with_capacity((hi - off as i64) as usize);
        for e in off as i64..hi {
            out.push(self.coeff_at(e).add(&other.coeff_at(e)));
        }
        Ok(PadicSeries::new(&self.m, off, out))
    }

    pub fn sub(&self, other: &PadicSeries) -> Result<PadicSeries> {
        Ok(self.add(&other.scale(&ZModPN::from_i64(&self.m, -1)))?)
    }

    pub fn scale(&self, k: &ZModPN) -> PadicSeries {
        PadicSeries {
            m: self.m.clone(),
            offset: self.offset,
            coeffs: self.coeffs.iter().map(|c| c.mul(k)).collect(),
        }
    }

    pub fn add_scalar(&self, k: &ZModPN) -> PadicSeries {
        let mut out = self.clone();
        let j = -(self.offset as i64);
        assert!(j >= 0 && (j as usize) < out.coeffs.len());
        out.coeffs[j as usize] = out.coeffs[j as usize].add(k);
        out
    }

    /// Product truncated to `trunc` stored terms; offsets add.
    pub fn mul(&self, other: &PadicSeries, trunc: usize) -> Result<PadicSeries> {
        self.check(other)?;
        let a: Vec<BigUint> = self.coeffs.iter().map(|c| c.value().clone()).collect();
        let b: Vec<BigUint> = other.coeffs.iter().map(|c| c.value().clone()).collect();
        let la = a.len().min(trunc);
        let lb = b.len().min(trunc);
        let mut prod = mul_slices(&a[..la], &b[..lb], self.m.power());
        prod.truncate(trunc);
        let coeffs = prod.into_iter().map(|c| ZModPN::new(&self.m, c)).collect();
        Ok(PadicSeries::new(&self.m, self.offset + other.offset, coeffs))
    }

    /// Newton inversion: g with self * g = 1 + O(t^trunc). The leading
    /// stored coefficient (after stripping exact zeros) must be a unit.
    pub fn inv(&self, trunc: usize) -> Result<PadicSeries> {
        let mut lead = 0usize;
        while lead < self.coeffs.len() && self.coeffs[lead].is_zero() {
            lead += 1;
        }
        if lead == self.coeffs.len() {
            return Err(Error::NotAUnit("series is zero".into()));
        }
        let off = self.offset + lead as i32;
        if !self.coeffs[lead].is_unit() {
            return Err(Error::NotAUnit(format!(
                "leading series coefficient {:?}",
                self.coeffs[lead]
            )));
        }
        if -off < -3 {
            return Err(Error::PreconditionViolated(
                "inverse would have a pole of order > 3".into(),
            ));
        }
        let f: Vec<ZModPN> = self.coeffs[lead..].to_vec();
        let mut g = vec![f[0].inv()?];
        let mut known = 1usize;
        while known < trunc {
            known = (known * 2).min(trunc);
            // g <- g*(2 - f*g) to `known` terms
            let fa: Vec<BigUint> = f.iter().take(known).map(|c| c.value().clone()).collect();
            let ga: Vec<BigUint> = g.iter().map(|c| c.value().clone()).collect();
            let mut fg = mul_slices(&fa, &ga, self.m.power());
            fg.truncate(known);
            fg.resize(known, BigUint::zero());
            // 2 - f*g
            let two = ZModPN::from_u64(&self.m, 2);
            let mut corr: Vec<BigUint> = Vec::with_capacity(known);
            for (j, c) in fg.iter().enumerate() {
                let c = ZModPN::new(&self.m, c.clone());
                let t = if j == 0 { two.sub(&c) } else { c.neg() };
                corr.push(t.value().clone());
            }
            let mut next = mul_slices(&ga, &corr, self.m.power());
            next.truncate(known);
            next.resize(known, BigUint::zero());
            g = next.into_iter().map(|c| ZModPN::new(&self.m, c)).collect();
        }
        g.truncate(trunc);
        Ok(PadicSeries::new(&self.m, -off, g))
    }

    /// Termwise derivative respecting the offset.
    pub fn derivative(&self) -> PadicSeries {
        let mut out = Vec::with_capacity(self.coeffs.len());
        let mut off = self.offset - 1;
        for (j, c) in self.coeffs.iter().enumerate() {
            let e = self.offset as i64 + j as i64;
            out.push(c.mul(&ZModPN::from_i64(&self.m, e)));
        }
        // the t^0 term differentiates to zero; for offset 0 keep offset 0
        if self.offset == 0 {
            out.remove(0);
            if out.is_empty() {
                out.push(ZModPN::zero(&self.m));
            }
            off = 0;
        }
        PadicSeries::new(&self.m, off, out)
    }

    /// Antiderivative with zero constant term, plus the per-coefficient
    /// precision-loss profile: entry (j, v) states the coefficient of t^j in
    /// the result is known only mod p^{N-v} because of the division by j.
    ///
    /// Requires the t^{-1} coefficient to vanish and, for each stored t^j
    /// term with j >= 0, that p^{v_p(j+1)} divides the canonical residue.
    pub fn integrate(&self) -> Result<(PadicSeries, Vec<(i64, u32)>)> {
        let p = self.m.prime();
        if !self.coeff_at(-1).is_zero() {
            return Err(Error::NotIntegrable {
                index: (-1i64 - self.offset as i64) as usize,
                required: 0,
            });
        }
        let mut out = Vec::with_capacity(self.coeffs.len());
        let mut losses = Vec::new();
        for (j, c) in self.coeffs.iter().enumerate() {
            let e = self.offset as i64 + j as i64;
            if e == -1 {
                continue; // vanishing checked above; drop the slot
            }
            let d = e + 1;
            if e < 0 {
                // division by -1 or -2, a unit
                out.push(c.mul(&ZModPN::from_i64(&self.m, d).inv()?));
                continue;
            }
            let v = crate::padic::padic_val(&num_bigint::BigInt::from(d), p)
                .expect("d >= 1") as u32;
            let quo = c.shift_down(v).map_err(|_| Error::NotIntegrable {
                index: j,
                required: v,
            })?;
            let odd = ZModPN::from_i64(&self.m, d).shift_down(v).expect("exact");
            out.push(quo.mul(&odd.inv()?));
            if v > 0 {
                losses.push((d, v));
            }
        }
        // constant term of the antiderivative is zero
        let off = (self.offset + 1).min(0);
        let pole = (-off) as usize; // stored slots below t^0
        let mut coeffs = Vec::with_capacity(out.len() + 1);
        coeffs.extend_from_slice(&out[..pole.min(out.len())]);
        coeffs.push(ZModPN::zero(&self.m));
        if pole < out.len() {
            coeffs.extend_from_slice(&out[pole..]);
        }
        Ok((PadicSeries::new(&self.m, off, coeffs), losses))
    }
}

/// A series known mod the ideal (p^N, p^{N-1} t, ..., t^N): entry k
/// (1 <= k < N) is the t^k coefficient reduced mod p^{N-k}. The constant
/// term is absent; series handled here begin at t.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealSeries {
    p: BigUint,
    n: u32,
    coeffs: Vec<BigUint>,
}

impl IdealSeries {
    /// Entry k of `coeffs_from_t1` is the coefficient of t^{k+1}; values are
    /// reduced mod p^{N-k-1} on entry.
    pub fn new(p: BigUint, n: u32, coeffs_from_t1: Vec<BigUint>) -> IdealSeries {
        assert!(n >= 1);
        assert_eq!(coeffs_from_t1.len() as u32 + 1, n, "need entries t^1..t^{{N-1}}");
        let coeffs = coeffs_from_t1
            .into_iter()
            .enumerate()
            .map(|(i, c)| c % p.pow(n - 1 - i as u32))
            .collect();
        IdealSeries { p, n, coeffs }
    }

    pub fn prime(&self) -> &BigUint {
        &self.p
    }

    pub fn ideal_index(&self) -> u32 {
        self.n
    }

    /// Coefficient of t^k together with the exponent of its stated modulus.
    pub fn coeff(&self, k: u32) -> (BigUint, u32) {
        assert!(k >= 1 && k < self.n);
        (self.coeffs[(k - 1) as usize].clone(), self.n - k)
    }

    /// Truncate to a smaller ideal index.
    pub fn truncate_to(&self, n: u32) -> IdealSeries {
        assert!(n <= self.n);
        let coeffs = self.coeffs[..(n - 1) as usize]
            .iter()
            .enumerate()
            .map(|(i, c)| c % self.p.pow(n - 1 - i as u32))
            .collect();
        IdealSeries { p: self.p.clone(), n, coeffs }
    }
}
