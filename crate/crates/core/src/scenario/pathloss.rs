//! Urban-macro NLOS path loss, `PL_dB(d) = 128.1 + 37.6 log10(d / 1 km)`.

use crate::error::{Error, Result};

pub const PL_AT_1KM_DB: f64 = 128.1;
pub const PL_SLOPE_DB: f64 = 37.6;

pub fn pathloss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::Config(format!("distance must be positive, got {distance_m}")));
    }
    Ok(PL_AT_1KM_DB + PL_SLOPE_DB * (distance_m / 1000.0).log10())
}

/// Linear channel gain `10^(−PL_dB / 10)`.
pub fn pathloss_urban_macro(distance_m: f64) -> Result<f64> {
    Ok(10f64.powf(-pathloss_db(distance_m)? / 10.0))
}
