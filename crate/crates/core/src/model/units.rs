use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Temperature,
    Light,
    Humidity,
}

impl Capability {
    pub const ALL: [Capability; 3] = [
        Capability::Temperature,
        Capability::Light,
        Capability::Humidity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Temperature => "temperature",
            Capability::Light => "light",
            Capability::Humidity => "humidity",
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Capability {
    type Err = UnitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Capability::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnitError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Celsius,
    Fahrenheit,
    Kelvin,
    Lux,
    PercentRh,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("cannot convert {from} to {to}")]
    IncompatibleUnits { from: Unit, to: Unit },
    #[error("unknown name {0:?}")]
    UnknownName(String),
}

impl Unit {
    pub const ALL: [Unit; 5] = [
        Unit::Celsius,
        Unit::Fahrenheit,
        Unit::Kelvin,
        Unit::Lux,
        Unit::PercentRh,
    ];

    pub fn family(self) -> Capability {
        match self {
            Unit::Celsius | Unit::Fahrenheit | Unit::Kelvin => Capability::Temperature,
            Unit::Lux => Capability::Light,
            Unit::PercentRh => Capability::Humidity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Celsius => "celsius",
            Unit::Fahrenheit => "fahrenheit",
            Unit::Kelvin => "kelvin",
            Unit::Lux => "lux",
            Unit::PercentRh => "percent_rh",
        }
    }

    /// Wire code used in binary frames.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Unit> {
        Unit::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = UnitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Unit::ALL
            .into_iter()
            .find(|u| u.as_str() == s)
            .ok_or_else(|| UnitError::UnknownName(s.to_string()))
    }
}

/// Affine conversion within one capability family.
pub fn convert_unit(value: f64, from: Unit, to: Unit) -> Result<f64, UnitError> {
    use Unit::*;
    if from.family() != to.family() {
        return Err(UnitError::IncompatibleUnits { from, to });
    }
    let v = match (from, to) {
        (a, b) if a == b => value,
        (Celsius, Fahrenheit) => value * 9.0 / 5.0 + 32.0,
        (Fahrenheit, Celsius) => (value - 32.0) * 5.0 / 9.0,
        (Celsius, Kelvin) => value + 273.15,
        (Kelvin, Celsius) => value - 273.15,
        (Fahrenheit, Kelvin) => (value - 32.0) * 5.0 / 9.0 + 273.15,
        (Kelvin, Fahrenheit) => (value - 273.15) * 9.0 / 5.0 + 32.0,
        _ => unreachable!("same-family pairs are covered above"),
    };
    Ok(v)
}
