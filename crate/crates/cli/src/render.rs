//! Text rendering of p-adic numbers as digit expansions.

use padic_heights::padic::PadicNumber;

/// "4*5 + 3*5^2 + ... + O(5^5)"; negative valuations render the unit whole,
/// "43^-1*96127622779 + O(43^6)".
pub fn padic(v: &PadicNumber) -> String {
    let p = v.prime();
    let a = v.abs_precision();
    if v.is_zero() {
        return format!("O({p}^{a})");
    }
    let val = v.valuation();
    if val < 0 {
        return format!("{p}^{val}*{} + O({p}^{a})", v.unit());
    }
    let mut terms = Vec::new();
    for (i, d) in v.digit_expansion().iter().enumerate() {
        if *d == 0 {
            continue;
        }
        let k = val + i as i64;
        terms.push(match k {
            0 => format!("{d}"),
            1 => format!("{d}*{p}"),
            _ => format!("{d}*{p}^{k}"),
        });
    }
    format!("{} + O({p}^{a})", terms.join(" + "))
}

pub fn digit_list(digits: &[u64]) -> String {
    let strs: Vec<String> = digits.iter().map(|d| d.to_string()).collect();
    format!("[{}]", strs.join(", "))
}
