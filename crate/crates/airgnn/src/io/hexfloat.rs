//! Exact text form of `f64` values, `[-]0x1.<hex>p<exp>`.

use crate::error::{Error, Result};

const MANT_BITS: u32 = 52;
const MANT_MASK: u64 = (1 << MANT_BITS) - 1;

pub fn format_hex(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    let sign = if v.is_sign_negative() { "-" } else { "" };
    if v.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = v.to_bits();
    let biased = ((bits >> MANT_BITS) & 0x7ff) as i32;
    let mant = bits & MANT_MASK;
    if biased == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if biased == 0 { (0, -1022) } else { (1, biased - 1023) };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let frac = if digits.is_empty() { String::new() } else { format!(".{digits}") };
    format!("{sign}0x{lead}{frac}p{exp:+}")
}

fn err(s: &str, why: &str) -> Error {
    Error::Decode(format!("invalid hex float {s:?}: {why}"))
}

/// Inverse of [`format_hex`]; accepts any number of hex digits and rounds
/// to nearest, ties to even.
pub fn parse_hex(text: &str) -> Result<f64> {
    let s = text.trim();
    let (neg, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let signed = |v: f64| if neg { -v } else { v };
    match body {
        "inf" | "infinity" => return Ok(signed(f64::INFINITY)),
        "nan" => return Ok(f64::NAN),
        _ => {}
    }
    let body = body
        .strip_prefix("0x")
        .or_else(|| body.strip_prefix("0X"))
        .ok_or_else(|| err(text, "missing 0x prefix"))?;
    let (digits, exp_part) = match body.find(['p', 'P']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let pexp: i64 = match exp_part {
        Some(e) => e.parse().map_err(|_| err(text, "bad exponent"))?,
        None => 0,
    };
    if pexp.abs() > 1 << 20 {
        return Err(err(text, "exponent out of range"));
    }
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err(text, "no digits"));
    }
    let mut mant: u64 = 0;
    let mut exp: i64 = pexp;
    let mut sticky = false;
    for (part, is_frac) in [(int_part, false), (frac_part, true)] {
        for c in part.chars() {
            let d = c.to_digit(16).ok_or_else(|| err(text, "bad digit"))? as u64;
            if mant >> 60 == 0 {
                mant = mant * 16 + d;
                if is_frac {
                    exp -= 4;
                }
            } else {
                sticky |= d != 0;
                if !is_frac {
                    exp += 4;
                }
            }
        }
    }
    if mant == 0 {
        return Ok(signed(0.0));
    }
    // value = mant * 2^exp (plus sticky bits below mant's last digit)
    let width = 64 - mant.leading_zeros() as i64;
    let e = width - 1 + exp;
    if e > 1023 {
        return Err(err(text, "overflow"));
    }
    let precision = if e >= -1022 { 53 } else { e + 1075 };
    if precision <= 0 {
        // Below half the smallest subnormal, or exactly half and rounds to even zero.
        let half = precision == 0 && (mant.is_power_of_two() && !sticky);
        return Ok(signed(if precision == 0 && !half { f64::from_bits(1) } else { 0.0 }));
    }
    let shift = width - precision;
    let (mut m, mut e) = (mant as u128, e);
    if shift > 0 {
        let rem = m & ((1u128 << shift) - 1);
        let half = 1u128 << (shift - 1);
        m >>= shift;
        if rem > half || (rem == half && (sticky || m & 1 == 1)) {
            m += 1;
            if m >> precision != 0 {
                e += 1;
                if e > 1023 {
                    return Err(err(text, "overflow"));
                }
                if precision == 53 {
                    m >>= 1;
                }
            }
        }
    } else {
        m <<= -shift;
    }
    // m has at most 53 bits and the result is exactly m * 2^scale.
    let scale = if e >= -1022 || m >> 52 != 0 { e - 52 } else { -1074 };
    let mut v = m as f64;
    let mut k = scale;
    while k != 0 {
        let step = k.clamp(-1000, 1000);
        v *= f64::from_bits(((step + 1023) as u64) << MANT_BITS);
        k -= step;
    }
    Ok(signed(v))
}
