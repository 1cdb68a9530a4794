//! Unit-suffixed quantity parsing. Everything is stored in SI base units
//! (radians, metres, seconds).

use crate::{Error, Result};

/// Physical dimension a parsed value must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Angle,
    Length,
    Time,
}

const ANGLE_UNITS: &[(&str, f64)] = &[
    ("deg", std::f64::consts::PI / 180.0),
    ("mrad", 1e-3),
    ("urad", 1e-6),
    ("nrad", 1e-9),
    ("rad", 1.0),
];

const LENGTH_UNITS: &[(&str, f64)] = &[
    ("nm", 1e-9),
    ("um", 1e-6),
    ("mm", 1e-3),
    ("cm", 1e-2),
    ("m", 1.0),
];

const TIME_UNITS: &[(&str, f64)] = &[
    ("ns", 1e-9),
    ("us", 1e-6),
    ("ms", 1e-3),
    ("min", 60.0),
    ("s", 1.0),
];

/// Parse `"1.7mrad"`, `"0.2 deg"`, `"1.49mm"` and friends. A bare number is
/// taken to be in the SI base unit.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let table = match dim {
        Dimension::Angle => ANGLE_UNITS,
        Dimension::Length => LENGTH_UNITS,
        Dimension::Time => TIME_UNITS,
    };
    // Longest suffix first so that "mrad" wins over "rad" and "mm" over "m".
    let mut units: Vec<_> = table.to_vec();
    units.sort_by_key(|(s, _)| std::cmp::Reverse(s.len()));
    for (suffix, scale) in units {
        if let Some(number) = text.strip_suffix(suffix) {
            let number = number.trim_end();
            if number.is_empty() || number.ends_with(|c: char| c.is_ascii_alphabetic()) {
                continue;
            }
            return parse_number(number).map(|v| v * scale);
        }
    }
    parse_number(text)
}

fn parse_number(text: &str) -> Result<f64> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Usage(format!("cannot parse quantity `{text}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_suffixes() {
        let v = parse_quantity("1.7mrad", Dimension::Angle).unwrap();
        assert!((v - 1.7e-3).abs() < 1e-18);
        let v = parse_quantity("0.24 deg", Dimension::Angle).unwrap();
        assert!((v - 0.24f64.to_radians()).abs() < 1e-15);
        let v = parse_quantity("349nrad", Dimension::Angle).unwrap();
        assert!((v - 349e-9).abs() < 1e-21);
        assert_eq!(parse_quantity("0.5", Dimension::Angle).unwrap(), 0.5);
    }

    #[test]
    fn length_and_time() {
        let v = parse_quantity("1.49mm", Dimension::Length).unwrap();
        assert!((v - 1.49e-3).abs() < 1e-18);
        assert_eq!(parse_quantity("0.6m", Dimension::Length).unwrap(), 0.6);
        let v = parse_quantity("2ns", Dimension::Time).unwrap();
        assert!((v - 2e-9).abs() < 1e-24);
        assert_eq!(parse_quantity("30min", Dimension::Time).unwrap(), 1800.0);
    }

    #[test]
    fn wrong_unit_is_rejected() {
        assert!(parse_quantity("1.7mm", Dimension::Angle).is_err());
        assert!(parse_quantity("abc", Dimension::Length).is_err());
    }
}
