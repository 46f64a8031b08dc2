//! Fixed-precision decimal output with half-up rounding.
//!
//! Every number that ends up in a CSV or report passes through here so that
//! artifacts diff cleanly across platforms.

/// Formats `x` with `decimals` fractional digits, rounding halves away from zero.
pub fn fixed(x: f64, decimals: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // Rust prints the exact binary value; take enough digits that the only
    // rounding left is ours.
    let long = format!("{:.*}", decimals + 24, x.abs());
    let (int_part, frac_part) = long.split_once('.').unwrap_or((&long, ""));
    let mut digits: Vec<u8> = int_part
        .bytes()
        .chain(frac_part.bytes().take(decimals))
        .map(|b| b - b'0')
        .collect();
    let round_up = frac_part.as_bytes().get(decimals).is_some_and(|&d| d >= b'5');
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - decimals;
    let mut s = String::with_capacity(digits.len() + 2);
    if x < 0.0 && digits.iter().any(|&d| d != 0) {
        s.push('-');
    }
    s.extend(digits[..split].iter().map(|d| (b'0' + d) as char));
    if decimals > 0 {
        s.push('.');
        s.extend(digits[split..].iter().map(|d| (b'0' + d) as char));
    }
    s
}

/// Shortest representation that round-trips; used for JSON-adjacent text.
pub fn exact(x: f64) -> String {
    format!("{x}")
}
