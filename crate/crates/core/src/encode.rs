//! Wrap latitude, longitude and day-of-year onto the unit circle.
//!
//! Each scalar is first mapped to `[-1, 1]` and then sent through
//! `x -> (sin πx, cos πx)`, so `-1` and `1` land on the same point.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use chrono::Datelike;

use crate::domain::Observation;
use crate::error::Error;

pub const FEATURE_DIM: usize = 6;

/// `[sin πa, cos πa, sin πb, cos πb, sin πd, cos πd]` for normalized
/// latitude `a`, longitude `b` and date `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedFeatures(pub [f64; FEATURE_DIM]);

impl EncodedFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Which inputs the prior sees. Recorded in checkpoints so models trained
/// under one convention are never fed features built under another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FeatureConvention {
    #[default]
    LatLonDate,
    /// Date pair replaced by zeros.
    LatLon,
}

impl FeatureConvention {
    pub fn id(self) -> &'static str {
        match self {
            FeatureConvention::LatLonDate => "lat,lon,date:sincos-pi:v1",
            FeatureConvention::LatLon => "lat,lon:sincos-pi:v1",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        [FeatureConvention::LatLonDate, FeatureConvention::LatLon].into_iter().find(|c| c.id() == id)
    }

    pub fn encode(self, obs: &Observation) -> EncodedFeatures {
        let mut x = encode_observation(obs);
        if self == FeatureConvention::LatLon {
            x.0[4] = 0.0;
            x.0[5] = 0.0;
        }
        x
    }
}

impl fmt::Display for FeatureConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureConvention::LatLonDate => "lat-lon-date",
            FeatureConvention::LatLon => "lat-lon",
        })
    }
}

impl FromStr for FeatureConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "lat-lon-date" => Ok(FeatureConvention::LatLonDate),
            "lat-lon" => Ok(FeatureConvention::LatLon),
            other => Self::from_id(other)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown feature convention {other:?}"))),
        }
    }
}

/// Map latitude, longitude and date to `[-1, 1]`.
///
/// The date uses the observation's own year length, so Dec 31 of a leap
/// year maps to `2·365/366 − 1`.
pub fn normalize_observation(obs: &Observation) -> (f64, f64, f64) {
    let year_len = if obs.date.leap_year() { 366.0 } else { 365.0 };
    let day = f64::from(obs.date.ordinal0());
    (obs.latitude / 90.0, obs.longitude / 180.0, 2.0 * day / year_len - 1.0)
}

pub fn cyclical_encode(x: f64) -> (f64, f64) {
    (PI * x).sin_cos()
}

/// Pairs in (lat, lon, date) order.
pub fn encode_observation(obs: &Observation) -> EncodedFeatures {
    let (a, b, d) = normalize_observation(obs);
    let mut out = [0.0; FEATURE_DIM];
    for (i, v) in [a, b, d].into_iter().enumerate() {
        let (s, c) = cyclical_encode(v);
        out[2 * i] = s;
        out[2 * i + 1] = c;
    }
    EncodedFeatures(out)
}
