//! Number-theoretic transforms over a CRT basis of 61-bit primes, for
//! multiplying long coefficient slices. Kronecker packing into a single big
//! integer is quadratic-ish at megabyte sizes; transforming each slice
//! modulo a handful of word-sized primes and reconstructing stays
//! quasi-linear.

use std::sync::Mutex;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::curve::miller_rabin;

/// Transforms up to 2^MAX_LOG points.
const MAX_LOG: u32 = 25;

#[derive(Clone, Copy)]
struct NttPrime {
    q: u64,
    /// -q^{-1} mod 2^64
    qneg: u64,
    /// 2^128 mod q
    r2: u64,
    /// R mod q
    one: u64,
    /// 2^MAX_LOG-th root of unity, Montgomery form
    root: u64,
    root_inv: u64,
}

#[inline(always)]
fn mont_mul(a: u64, b: u64, q: u64, qneg: u64) -> u64 {
    let t = (a as u128) * (b as u128);
    let m = (t as u64).wrapping_mul(qneg);
    let u = ((t + (m as u128) * (q as u128)) >> 64) as u64;
    if u >= q { u - q } else { u }
}

#[inline(always)]
fn add_mod(a: u64, b: u64, q: u64) -> u64 {
    let s = a + b;
    if s >= q { s - q } else { s }
}

impl NttPrime {
    fn new(q: u64) -> NttPrime {
        // -q^{-1} mod 2^64 by Newton lifting
        let mut x = q;
        for _ in 0..5 {
            x = x.wrapping_mul(2u64.wrapping_sub(q.wrapping_mul(x)));
        }
        let qneg = x.wrapping_neg();
        let r = ((1u128 << 64) % q as u128) as u64;
        let r2 = ((r as u128 * r as u128) % q as u128) as u64;
        let mut pr = NttPrime { q, qneg, r2, one: r, root: 0, root_inv: 0 };
        // generator of the 2^MAX_LOG torsion
        let mut g = 2u64;
        loop {
            let cand = pr.pow(pr.to_mont(g), (q - 1) >> MAX_LOG);
            if pr.pow(cand, 1 << (MAX_LOG - 1)) != pr.one {
                pr.root = cand;
                pr.root_inv = pr.pow(cand, (1 << MAX_LOG) - 1);
                break;
            }
            g += 1;
        }
        debug_assert_eq!(pr.pow(pr.root, 1 << MAX_LOG), pr.one);
        pr
    }

    #[inline(always)]
    fn mul(&self, a: u64, b: u64) -> u64 {
        mont_mul(a, b, self.q, self.qneg)
    }

    fn to_mont(&self, a: u64) -> u64 {
        self.mul(a % self.q, self.r2)
    }

    fn pow(&self, base_m: u64, mut e: u64) -> u64 {
        let mut acc = self.one;
        let mut b = base_m;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }

    fn inv(&self, a_m: u64) -> u64 {
        self.pow(a_m, self.q - 2)
    }
}

struct PrimePool {
    primes: Vec<NttPrime>,
    next_k: u64,
}

static POOL: Mutex<Option<PrimePool>> = Mutex::new(None);

fn get_primes(count: usize) -> Vec<NttPrime> {
    let mut guard = POOL.lock().unwrap();
    let pool = guard.get_or_insert_with(|| PrimePool {
        primes: Vec::new(),
        next_k: (1u64 << 36) - 1,
    });
    while pool.primes.len() < count {
        let k = pool.next_k;
        assert!(k >= 1 << 35, "CRT prime pool exhausted");
        pool.next_k -= 2;
        let q = (k << MAX_LOG) | 1;
        if miller_rabin(q) {
            pool.primes.push(NttPrime::new(q));
        }
    }
    pool.primes[..count].to_vec()
}

fn bitrev(a: &mut [u64]) {
    let n = a.len();
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            a.swap(i, j);
        }
    }
}

/// Montgomery product without the final conditional subtraction: for
/// a < 2q, b < q the result is < 2q. Used inside butterflies.
#[inline(always)]
fn mont_mul_lazy(a: u64, b: u64, q: u64, qneg: u64) -> u64 {
    let t = (a as u128) * (b as u128);
    let m = (t as u64).wrapping_mul(qneg);
    ((t + (m as u128) * (q as u128)) >> 64) as u64
}

/// In-place transform; values are kept in [0, 2q) throughout (lazy
/// reduction) and brought back below q by the inverse-length scaling or by
/// the caller's pointwise multiplication.
fn ntt(a: &mut [u64], pr: &NttPrime, invert: bool) {
    let n = a.len();
    debug_assert!(n.is_power_of_two() && n <= 1 << MAX_LOG);
    let lg = n.trailing_zeros();
    bitrev(a);
    let base = if invert { pr.root_inv } else { pr.root };
    let (q, qneg) = (pr.q, pr.qneg);
    let q2 = 2 * q;
    let mut tw = vec![0u64; n / 2];
    for s in 1..=lg {
        let len = 1usize << s;
        let half = len / 2;
        let wlen = pr.pow(base, 1u64 << (MAX_LOG - s));
        tw[0] = pr.one;
        for i in 1..half {
            tw[i] = pr.mul(tw[i - 1], wlen);
        }
        for chunk in a.chunks_mut(len) {
            for i in 0..half {
                let mut u = chunk[i];
                if u >= q2 {
                    u -= q2;
                }
                let v = mont_mul_lazy(tw[i], chunk[i + half], q, qneg);
                chunk[i] = u + v;
                chunk[i + half] = u + q2 - v;
            }
        }
    }
    if invert {
        let ninv = pr.inv(pr.to_mont(n as u64));
        for x in a.iter_mut() {
            let mut v = *x;
            if v >= q2 {
                v -= q2;
            }
            *x = pr.mul(v, ninv);
        }
    } else {
        for x in a.iter_mut() {
            let mut v = *x;
            if v >= q2 {
                v -= q2;
            }
            if v >= q {
                v -= q;
            }
            *x = v;
        }
    }
}

/// Reduce a big-integer slice modulo pr.q, zero-padded to length l;
/// `to_mont` additionally leaves the residues in Montgomery form.
fn reduce_slice(a: &[BigUint], l: usize, pr: &NttPrime, to_mont: bool) -> Vec<u64> {
    let w64 = pr.to_mont(0u64.wrapping_sub(pr.q) % pr.q); // 2^64 mod q, Montgomery
    let max_words = a.iter().map(|c| (c.bits() as usize + 63) / 64).max().unwrap_or(0);
    // weights[j] = (2^64)^j mod q in Montgomery form, shared by every slot
    let mut weights = Vec::with_capacity(max_words);
    let mut weight = pr.one;
    for _ in 0..max_words {
        weights.push(weight);
        weight = pr.mul(weight, w64);
    }
    let mut out = vec![0u64; l];
    for (i, c) in a.iter().enumerate() {
        let mut acc = 0u64;
        for (d, w) in c.iter_u64_digits().zip(&weights) {
            // mont_mul tolerates one full-word factor: d * w < 2^64 q
            acc = add_mod(acc, mont_mul(d, *w, pr.q, pr.qneg), pr.q);
        }
        out[i] = if to_mont { pr.mul(acc, pr.r2) } else { acc };
    }
    out
}

/// Whether the CRT basis can cover a product of slices with coefficients
/// below pn.
pub(crate) fn feasible(out_len: usize, pn: &BigUint) -> bool {
    if out_len > 1 << MAX_LOG {
        return false;
    }
    let need = 2 * pn.bits() + 64 - (out_len as u64).leading_zeros() as u64 + 1;
    need <= 60 * 512
}

pub(crate) struct PreparedRhs {
    l: usize,
    rlen_b: usize,
    r: usize,
    /// per-prime forward transforms, Montgomery form
    transforms: Vec<Vec<u64>>,
}

/// Forward-transform a fixed right-hand operand once, sized for products of
/// up to out_len_max coefficients below pn.
pub(crate) fn prepare_rhs(b: &[BigUint], out_len_max: usize, pn: &BigUint) -> PreparedRhs {
    let l = out_len_max.next_power_of_two();
    let pair_bits = 64 - (b.len() as u64).leading_zeros() as u64;
    let need = 2 * pn.bits() + pair_bits + 1;
    let r = ((need + 59) / 60) as usize;
    let primes = get_primes(r);
    let transforms = primes
        .iter()
        .map(|pr| {
            let mut fb = reduce_slice(b, l, pr, true);
            ntt(&mut fb, pr, false);
            fb
        })
        .collect();
    PreparedRhs { l, rlen_b: b.len(), r, transforms }
}

pub(crate) fn mul_prepared(a: &[BigUint], prep: &PreparedRhs, pn: &BigUint) -> Vec<BigUint> {
    let rlen = a.len() + prep.rlen_b - 1;
    assert!(rlen <= prep.l);
    let primes = get_primes(prep.r);
    let mut residues: Vec<Vec<u64>> = Vec::with_capacity(prep.r);
    for (pr, fb) in primes.iter().zip(&prep.transforms) {
        let mut fa = reduce_slice(a, prep.l, pr, false);
        ntt(&mut fa, pr, false);
        for i in 0..prep.l {
            fa[i] = pr.mul(fa[i], fb[i]);
        }
        ntt(&mut fa, pr, true);
        fa.truncate(rlen);
        residues.push(fa);
    }
    reconstruct(&residues, &primes, rlen, pn)
}

pub(crate) fn ntt_mul(a: &[BigUint], b: &[BigUint], pn: &BigUint) -> Vec<BigUint> {
    let rlen = a.len() + b.len() - 1;
    let l = rlen.next_power_of_two();
    let pair_bits = 64 - (a.len().min(b.len()) as u64).leading_zeros() as u64;
    let need = 2 * pn.bits() + pair_bits + 1;
    let r = ((need + 59) / 60) as usize;
    let primes = get_primes(r);

    let mut residues: Vec<Vec<u64>> = Vec::with_capacity(r);
    for pr in &primes {
        let mut fa = reduce_slice(a, l, pr, false);
        let mut fb = reduce_slice(b, l, pr, true);
        ntt(&mut fa, pr, false);
        ntt(&mut fb, pr, false);
        for i in 0..l {
            fa[i] = pr.mul(fa[i], fb[i]);
        }
        drop(fb);
        ntt(&mut fa, pr, true);
        fa.truncate(rlen);
        residues.push(fa);
    }
    reconstruct(&residues, &primes, rlen, pn)
}

/// Whether the limb-packed single-prime path can cover the product.
pub(crate) fn seg_feasible(out_len: usize, pn: &BigUint) -> bool {
    let stride = 2 * ((pn.bits() as usize + 15) / 16) + 2;
    // slot sums stay below 2^(32 + MAX_LOG) < q for any length we accept
    (out_len * stride).next_power_of_two() <= 1 << MAX_LOG
}

/// Split a coefficient slice into 16-bit limbs, `stride` slots per
/// coefficient, zero-padded to length l; optionally in Montgomery form.
fn pack_limbs(a: &[BigUint], stride: usize, l: usize, pr: &NttPrime, to_mont: bool) -> Vec<u64> {
    let mut out = vec![0u64; l];
    for (i, c) in a.iter().enumerate() {
        let base = i * stride;
        for (j, d) in c.iter_u64_digits().enumerate() {
            for t in 0..4 {
                let limb = (d >> (16 * t)) & 0xffff;
                out[base + 4 * j + t] = if to_mont { pr.to_mont(limb) } else { limb };
            }
        }
    }
    out
}

/// Multiply by packing every coefficient into 16-bit limbs and running one
/// transform over a single prime: product slots are bounded by
/// 2^32 * length < q, so no CRT basis is needed and every stage except the
/// final division by pn is linear in the total bit size. Beats the
/// multi-prime path once coefficients get wide, because that path spends
/// time quadratic in the prime count on residue conversion.
pub(crate) fn segmented_mul(a: &[BigUint], b: &[BigUint], pn: &BigUint) -> Vec<BigUint> {
    let rlen = a.len() + b.len() - 1;
    // product coefficients are < min_len * pn^2, spanning < stride slots
    let stride = 2 * ((pn.bits() as usize + 15) / 16) + 2;
    let l = (rlen * stride).next_power_of_two();
    let pr = get_primes(1)[0];
    let mut fa = pack_limbs(a, stride, l, &pr, false);
    let mut fb = pack_limbs(b, stride, l, &pr, true);
    ntt(&mut fa, &pr, false);
    ntt(&mut fb, &pr, false);
    for i in 0..l {
        fa[i] = pr.mul(fa[i], fb[i]);
    }
    drop(fb);
    ntt(&mut fa, &pr, true);

    let wlen = (16 * stride) / 64 + 2;
    let mut out = Vec::with_capacity(rlen);
    let mut words = vec![0u64; wlen];
    let mut bytes = vec![0u8; wlen * 8];
    for c in 0..rlen {
        let slots = &fa[c * stride..c * stride + stride];
        let mut carry: u128 = 0;
        for (t, chunk) in slots.chunks(4).enumerate() {
            let mut s = carry;
            for (u, slot) in chunk.iter().enumerate() {
                s += (*slot as u128) << (16 * u);
            }
            words[t] = s as u64;
            carry = s >> 64;
        }
        let filled = (stride + 3) / 4;
        words[filled] = carry as u64;
        words[filled + 1..].iter_mut().for_each(|w| *w = 0);
        for (j, w) in words.iter().enumerate() {
            bytes[8 * j..8 * j + 8].copy_from_slice(&w.to_le_bytes());
        }
        let v = BigUint::from_bytes_le(&bytes);
        out.push(if v.is_zero() { v } else { v % pn });
    }
    out
}

/// CRT reconstruction of each coefficient: value = sum_i z_i (M/q_i) with
/// z_i = y_i (M/q_i)^{-1} mod q_i lies in [0, rM); one small-quotient
/// reduction mod M recovers the exact integer, then mod pn. Unlike Garner
/// this is linear in r per residue, with the quadratic part pushed into
/// word-level multiply-adds.
fn reconstruct(
    residues: &[Vec<u64>],
    primes: &[NttPrime],
    rlen: usize,
    pn: &BigUint,
) -> Vec<BigUint> {
    let r = primes.len();
    let mut m_full = BigUint::one();
    for pr in primes {
        m_full *= pr.q;
    }
    let wlen = (m_full.bits() as usize + 63) / 64;
    // w_parts[i] = M/q_i as words, c_mont[i] = (M/q_i)^{-1} mod q_i
    let mut w_parts: Vec<Vec<u64>> = Vec::with_capacity(r);
    let mut c_mont = Vec::with_capacity(r);
    for pr in primes {
        let wi = &m_full / pr.q;
        let w64 = pr.to_mont(0u64.wrapping_sub(pr.q) % pr.q);
        let mut weight = pr.one;
        let mut acc = 0u64;
        for d in wi.iter_u64_digits() {
            acc = add_mod(acc, mont_mul(d, weight, pr.q, pr.qneg), pr.q);
            weight = pr.mul(weight, w64);
        }
        c_mont.push(pr.inv(pr.to_mont(acc)));
        let mut words = wi.to_u64_digits();
        words.resize(wlen, 0);
        w_parts.push(words);
    }

    let mut out = Vec::with_capacity(rlen);
    let mut acc = vec![0u64; wlen + 1];
    for c in 0..rlen {
        acc.iter_mut().for_each(|w| *w = 0);
        for i in 0..r {
            let pr = &primes[i];
            let z = mont_mul(residues[i][c], c_mont[i], pr.q, pr.qneg);
            if z == 0 {
                continue;
            }
            // acc += z * (M/q_i); the three u128 summands stay below 2^128
            let mut carry: u128 = 0;
            for (j, wj) in w_parts[i].iter().enumerate() {
                let t = (*wj as u128) * (z as u128) + (acc[j] as u128) + carry;
                acc[j] = t as u64;
                carry = t >> 64;
            }
            acc[wlen] += carry as u64;
        }
        let mut bytes = Vec::with_capacity(acc.len() * 8);
        for w in &acc {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        let mut v = BigUint::from_bytes_le(&bytes);
        if v >= m_full {
            v %= &m_full; // quotient < r, so this division is cheap
        }
        out.push(if v.is_zero() { v } else { v % pn });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn schoolbook(a: &[BigUint], b: &[BigUint], pn: &BigUint) -> Vec<BigUint> {
        let mut out = vec![BigUint::zero(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] = (&out[i + j] + x * y) % pn;
            }
        }
        out
    }

    #[test]
    fn matches_schoolbook() {
        let pn = BigUint::from(5u32).pow(40);
        let mut state = 0x12345678u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            BigUint::from(state) * BigUint::from(state >> 7) % &pn
        };
        let a: Vec<BigUint> = (0..137).map(|_| rnd()).collect();
        let b: Vec<BigUint> = (0..211).map(|_| rnd()).collect();
        assert_eq!(ntt_mul(&a, &b, &pn), schoolbook(&a, &b, &pn));
    }

    #[test]
    fn single_coefficient() {
        let pn = BigUint::from(97u32);
        let a = vec![BigUint::from(50u32)];
        let b = vec![BigUint::from(60u32)];
        assert_eq!(ntt_mul(&a, &b, &pn), vec![BigUint::from(50u32 * 60 % 97)]);
    }

    #[test]
    fn wide_coefficients_many_primes() {
        let pn = BigUint::from(3u32).pow(700);
        let big = &pn - BigUint::one();
        let a = vec![big.clone(), big.clone(), BigUint::from(7u32)];
        let b = vec![big.clone(), BigUint::from(11u32)];
        assert_eq!(ntt_mul(&a, &b, &pn), schoolbook(&a, &b, &pn));
    }

    #[test]
    fn segmented_matches_schoolbook() {
        let pn = BigUint::from(5u32).pow(40);
        let mut state = 0xdeadbeefu64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            BigUint::from(state) * BigUint::from(state >> 7) % &pn
        };
        let a: Vec<BigUint> = (0..111).map(|_| rnd()).collect();
        let b: Vec<BigUint> = (0..93).map(|_| rnd()).collect();
        assert!(seg_feasible(a.len() + b.len() - 1, &pn));
        assert_eq!(segmented_mul(&a, &b, &pn), schoolbook(&a, &b, &pn));
    }

    #[test]
    fn segmented_wide_coefficients() {
        let pn = BigUint::from(3u32).pow(700);
        let big = &pn - BigUint::one();
        let a = vec![big.clone(), big.clone(), BigUint::from(7u32)];
        let b = vec![big.clone(), BigUint::from(11u32)];
        assert_eq!(segmented_mul(&a, &b, &pn), schoolbook(&a, &b, &pn));
    }

    #[test]
    fn segmented_agrees_with_crt_path() {
        let pn = BigUint::from(5u32).pow(1200);
        let mut state = 0xabcdefu64;
        let mut rnd = || {
            let mut words = Vec::with_capacity(28);
            for _ in 0..28 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                words.push(state as u32);
                words.push((state >> 32) as u32);
            }
            BigUint::new(words) % &pn
        };
        let a: Vec<BigUint> = (0..40).map(|_| rnd()).collect();
        let b: Vec<BigUint> = (0..40).map(|_| rnd()).collect();
        assert_eq!(segmented_mul(&a, &b, &pn), ntt_mul(&a, &b, &pn));
    }
}
