//! Unit-tagged quantities in input files.
//!
//! A numeric field may be a bare SI number or `{ "value": 3.4, "unit": "MPa" }`.
//! Everything is converted to SI on ingest and written back as bare numbers.

use serde::{Deserialize, Deserializer};

use crate::schedule::{Schedule, ScheduleInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Pressure,
    Length,
    MassFlow,
    Density,
    Time,
    Dimensionless,
}

/// SI factor for `unit` in dimension `dim`.
pub fn factor(unit: &str, dim: Dim) -> Result<f64, String> {
    let f = match (dim, unit) {
        (Dim::Pressure, "Pa") => 1.0,
        (Dim::Pressure, "kPa") => 1e3,
        (Dim::Pressure, "MPa") => 1e6,
        (Dim::Pressure, "bar") => 1e5,
        (Dim::Pressure, "atm") => 101_325.0,
        (Dim::Pressure, "psi") => 6_894.757_293_168,
        (Dim::Length, "m") => 1.0,
        (Dim::Length, "km") => 1e3,
        (Dim::Length, "mm") => 1e-3,
        (Dim::Length, "in") => 0.0254,
        (Dim::MassFlow, "kg/s") => 1.0,
        (Dim::MassFlow, "kg/h") => 1.0 / 3600.0,
        (Dim::Density, "kg/m3") => 1.0,
        (Dim::Time, "s") => 1.0,
        (Dim::Time, "min") => 60.0,
        (Dim::Time, "h") => 3600.0,
        (Dim::Dimensionless, "1") => 1.0,
        _ => return Err(format!("unit '{unit}' is not valid for a {dim:?} quantity")),
    };
    Ok(f)
}

pub trait UnitDim {
    const DIM: Dim;
}

macro_rules! dims {
    ($($name:ident),*) => {$(
        pub struct $name;
        impl UnitDim for $name { const DIM: Dim = Dim::$name; }
    )*};
}
dims!(Pressure, Length, MassFlow, Density, Time, Dimensionless);

#[derive(Deserialize)]
#[serde(untagged)]
enum Quantity {
    Bare(f64),
    Tagged { value: f64, unit: String },
}

impl Quantity {
    fn si<U: UnitDim>(self) -> Result<f64, String> {
        match self {
            Quantity::Bare(v) => Ok(v),
            Quantity::Tagged { value, unit } => Ok(value * factor(&unit, U::DIM)?),
        }
    }
}

pub fn quantity<'de, U: UnitDim, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Quantity::deserialize(d)?.si::<U>().map_err(serde::de::Error::custom)
}

pub fn opt_quantity<'de, U: UnitDim, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    Option::<Quantity>::deserialize(d)?
        .map(|q| q.si::<U>())
        .transpose()
        .map_err(serde::de::Error::custom)
}

pub fn schedule<'de, U: UnitDim, D: Deserializer<'de>>(d: D) -> Result<Schedule, D::Error> {
    ScheduleInput::deserialize(d)?
        .into_si(U::DIM)
        .map_err(serde::de::Error::custom)
}

pub fn opt_schedule<'de, U: UnitDim, D: Deserializer<'de>>(d: D) -> Result<Option<Schedule>, D::Error> {
    Option::<ScheduleInput>::deserialize(d)?
        .map(|s| s.into_si(U::DIM))
        .transpose()
        .map_err(serde::de::Error::custom)
}
