//! Fixed 17-significant-digit number output for JSON and CSV.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};

/// Format `v` with 17 significant digits, which round-trips every `f64`.
///
/// Plain positional notation is used for decimal exponents in [-5, 16],
/// scientific notation otherwise. Trailing zeros are kept so every value
/// carries the same precision.
pub fn fmt_f64(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".to_string()
        } else if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0" } else { "0.0" }.to_string();
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..=16).contains(&exp) {
        return format!("{mantissa}e{exp}");
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let body = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        let split = exp as usize + 1;
        format!("{}.{}", &digits[..split], &digits[split..])
    };
    let body = if body.ends_with('.') {
        format!("{body}0")
    } else {
        body
    };
    format!("{sign}{body}")
}

/// Compact JSON formatter that writes floats through [`fmt_f64`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Float17Formatter;

impl Formatter for Float17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            CompactFormatter.write_null(writer)
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize `value` as compact JSON followed by a newline.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, Float17Formatter);
    value
        .serialize(&mut ser)
        .expect("serializing into memory cannot fail");
    out.push(b'\n');
    out
}
