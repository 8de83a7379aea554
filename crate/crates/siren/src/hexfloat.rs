//! C99 hexadecimal floating-point text (`0x1.8p+1`), exact for every `f64`.

use std::fmt::Write;

/// Shortest exact hex-float spelling of `x`; `inf`, `-inf` and `nan` for
/// non-finite values.
pub fn format_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let mut out = String::new();
    if x.is_sign_negative() {
        out.push('-');
    }
    if x.is_infinite() {
        out.push_str("inf");
        return out;
    }
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mantissa == 0 {
        out.push_str("0x0p+0");
        return out;
    }
    let (lead, exp) = if exp_bits == 0 { (0, -1022) } else { (1, exp_bits - 1023) };
    let mut digits = format!("{mantissa:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    write!(out, "0x{lead}").unwrap();
    if !digits.is_empty() {
        write!(out, ".{digits}").unwrap();
    }
    write!(out, "p{exp:+}").unwrap();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid number `{0}`")]
pub struct ParseFloatError(pub String);

/// Accepts decimal or C99 hex-float text.
pub fn parse_float(s: &str) -> Result<f64, ParseFloatError> {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    if body.starts_with("0x") || body.starts_with("0X") {
        let lower = s.to_ascii_lowercase();
        // the parser wants an explicit exponent
        let text = if lower.contains('p') { lower } else { format!("{lower}p0") };
        hexf_parse::parse_hexf64(&text, false).map_err(|_| ParseFloatError(s.into()))
    } else {
        s.parse::<f64>().map_err(|_| ParseFloatError(s.into()))
    }
}
