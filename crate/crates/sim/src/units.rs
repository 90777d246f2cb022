//! Quantities with explicit unit suffixes, converted to SI.
//!
//! Frequencies are cyclic: `"3 MHz"` becomes `2π × 3e6 rad/s`. Rates are
//! not multiplied by 2π: `"500 /s"` is `500 s⁻¹`.

use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Time,
    Length,
    Rate,
}

impl Dimension {
    /// Unit names and their decimal exponent.
    fn units(self) -> &'static [(&'static str, i32)] {
        match self {
            Dimension::Frequency => &[("Hz", 0), ("kHz", 3), ("MHz", 6), ("GHz", 9)],
            Dimension::Time => &[("s", 0), ("ms", -3), ("µs", -6), ("us", -6), ("ns", -9)],
            Dimension::Length => &[("m", 0), ("mm", -3), ("µm", -6), ("um", -6), ("nm", -9)],
            Dimension::Rate => &[("/s", 0), ("/ms", 3), ("/µs", 6), ("/us", 6)],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dimension::Frequency => "frequency",
            Dimension::Time => "time",
            Dimension::Length => "length",
            Dimension::Rate => "rate",
        }
    }
}

/// Parses `"<number> <unit>"` (space optional) into SI. Frequencies come
/// back as angular frequencies.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let unit = unit.trim();
    let allowed: Vec<&str> = dim.units().iter().map(|(u, _)| *u).collect();
    if unit.is_empty() {
        return Err(format!("`{text}` has no unit; expected a {} in one of {}", dim.name(), allowed.join(", ")));
    }
    let value: f64 = number
        .parse()
        .map_err(|_| format!("`{text}` does not start with a number"))?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    let (_, exponent) = dim
        .units()
        .iter()
        .find(|(u, _)| *u == unit)
        .ok_or_else(|| format!("unknown {} unit `{unit}`; expected one of {}", dim.name(), allowed.join(", ")))?;
    // dividing keeps "50 µs" at exactly 5e-5
    let si = if *exponent >= 0 { value * 10f64.powi(*exponent) } else { value / 10f64.powi(-exponent) };
    Ok(if dim == Dimension::Frequency { 2.0 * PI * si } else { si })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-30);
        assert!(close(parse_quantity("3.0 MHz", Dimension::Frequency).unwrap(), 2.0 * PI * 3e6));
        assert!(close(parse_quantity("40kHz", Dimension::Frequency).unwrap(), 2.0 * PI * 4e4));
        assert!(close(parse_quantity("70 µs", Dimension::Time).unwrap(), 70e-6));
        assert!(close(parse_quantity("70us", Dimension::Time).unwrap(), 70e-6));
        assert!(close(parse_quantity("21 µm", Dimension::Length).unwrap(), 21e-6));
        assert!(close(parse_quantity("1.5e2 /s", Dimension::Rate).unwrap(), 150.0));
        assert!(close(parse_quantity("0.5 /ms", Dimension::Rate).unwrap(), 500.0));
    }

    #[test]
    fn rejects_missing_or_wrong_units() {
        assert!(parse_quantity("21", Dimension::Length).unwrap_err().contains("no unit"));
        assert!(parse_quantity("21 kHz", Dimension::Length).unwrap_err().contains("unknown length unit"));
        assert!(parse_quantity("fast", Dimension::Time).is_err());
    }
}
