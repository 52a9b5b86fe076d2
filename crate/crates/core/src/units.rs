//! Unit-suffixed number parsing for the configuration grammar.
//!
//! A quantity is a float followed by an optional unit token. Bare numbers
//! are interpreted in the base unit of the expected dimension (Hz, s, K,
//! W/m2, W/m, m, kg, 1/m, 1/s).

use crate::constants::AMU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Time,
    Temperature,
    Intensity,
    SpectralDensity,
    Length,
    Mass,
    Wavenumber,
    Rate,
    Dimensionless,
}

impl Dimension {
    pub fn base_unit(&self) -> &'static str {
        match self {
            Dimension::Frequency => "Hz",
            Dimension::Time => "s",
            Dimension::Temperature => "K",
            Dimension::Intensity => "W/m2",
            Dimension::SpectralDensity => "W/m",
            Dimension::Length => "m",
            Dimension::Mass => "kg",
            Dimension::Wavenumber => "1/m",
            Dimension::Rate => "1/s",
            Dimension::Dimensionless => "",
        }
    }

    fn scale_of(&self, unit: &str) -> Option<f64> {
        let table: &[(&str, f64)] = match self {
            Dimension::Frequency => &[
                ("Hz", 1.0),
                ("kHz", 1e3),
                ("MHz", 1e6),
                ("GHz", 1e9),
                ("THz", 1e12),
            ],
            Dimension::Time => &[
                ("fs", 1e-15),
                ("ps", 1e-12),
                ("ns", 1e-9),
                ("us", 1e-6),
                ("ms", 1e-3),
                ("s", 1.0),
            ],
            Dimension::Temperature => &[("K", 1.0)],
            Dimension::Intensity => &[("W/m2", 1.0), ("W/cm2", 1e4), ("mW/cm2", 10.0)],
            Dimension::SpectralDensity => &[("W/m", 1.0), ("mW/nm", 1e6), ("W/nm", 1e9)],
            Dimension::Length => &[
                ("m", 1.0),
                ("cm", 1e-2),
                ("mm", 1e-3),
                ("um", 1e-6),
                ("nm", 1e-9),
            ],
            Dimension::Mass => &[("kg", 1.0), ("amu", AMU), ("u", AMU)],
            Dimension::Wavenumber => &[("1/m", 1.0)],
            Dimension::Rate => &[("1/s", 1.0), ("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6)],
            Dimension::Dimensionless => &[],
        };
        table.iter().find(|(u, _)| *u == unit).map(|(_, s)| *s)
    }
}

/// Parse "21.51 GHz" style quantities into the base unit of `dim`.
pub fn parse_quantity(s: &str, dim: Dimension) -> Result<f64, String> {
    let s = s.trim();
    let (num_str, unit_str) = match s.find(|c: char| c.is_ascii_whitespace()) {
        Some(i) => (&s[..i], s[i..].trim()),
        None => {
            // allow a unit glued to the number ("80MHz"); 'e'/'E' belong
            // to the exponent, no unit starts with them
            let split = s
                .char_indices()
                .find(|(_, c)| c.is_ascii_alphabetic() && !matches!(c, 'e' | 'E'))
                .map(|(i, _)| i);
            match split {
                Some(i) if i > 0 => (&s[..i], s[i..].trim()),
                _ => (s, ""),
            }
        }
    };
    let value: f64 = num_str
        .parse()
        .map_err(|_| format!("cannot parse number from '{s}'"))?;
    if unit_str.is_empty() {
        return Ok(value);
    }
    match dim.scale_of(unit_str) {
        Some(scale) => Ok(value * scale),
        None => Err(format!(
            "unit '{unit_str}' is not a {} unit (expected e.g. '{}')",
            dimension_name(dim),
            dim.base_unit()
        )),
    }
}

fn dimension_name(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Frequency => "frequency",
        Dimension::Time => "time",
        Dimension::Temperature => "temperature",
        Dimension::Intensity => "intensity",
        Dimension::SpectralDensity => "spectral-density",
        Dimension::Length => "length",
        Dimension::Mass => "mass",
        Dimension::Wavenumber => "wavenumber",
        Dimension::Rate => "rate",
        Dimension::Dimensionless => "dimensionless",
    }
}
