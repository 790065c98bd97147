//! Large-scale channel gains for the urban-micro street-canyon model.
//!
//! All gains are amplitude gains in dB: the printed model carries a factor
//! ½ because the gain enters the SINR squared. Convert to a linear power
//! gain with [`amplitude_db_to_power`].

use crate::error::{Error, Result};

fn check(d: f64, fc_ghz: f64) -> Result<()> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    if !(fc_ghz > 0.0) || !fc_ghz.is_finite() {
        return Err(Error::Domain(format!("carrier frequency must be positive, got {fc_ghz}")));
    }
    Ok(())
}

/// Half of the negated free-space path loss `20·log10(d) + 20·log10(fc) + 32.45`
/// with `d` in meters and `fc` in GHz.
pub fn free_space_gain(d: f64, fc_ghz: f64) -> Result<f64> {
    check(d, fc_ghz)?;
    Ok(-0.5 * (20.0 * d.log10() + 20.0 * fc_ghz.log10() + 32.45))
}

/// Line-of-sight amplitude gain.
pub fn los_gain(d: f64, altitude: f64, fc_ghz: f64, gain_db: f64) -> Result<f64> {
    check(d, fc_ghz)?;
    if !(altitude > 0.0) {
        return Err(Error::Domain(format!("altitude must be positive, got {altitude}")));
    }
    let fs = 2.0 * free_space_gain(d, fc_ghz)?;
    let umi = -30.9 - (22.25 - 0.5 * altitude.log10()) * d.log10() - 20.0 * fc_ghz.log10();
    Ok(gain_db / 2.0 + 0.5 * fs.min(umi))
}

/// Non-line-of-sight amplitude gain; never exceeds [`los_gain`].
pub fn nlos_gain(d: f64, altitude: f64, fc_ghz: f64, gain_db: f64) -> Result<f64> {
    let los = 2.0 * (los_gain(d, altitude, fc_ghz, gain_db)? - gain_db / 2.0);
    let umi = -32.4 - (43.2 - 7.6 * altitude.log10()) * d.log10() - 20.0 * fc_ghz.log10();
    Ok(gain_db / 2.0 + 0.5 * los.min(umi))
}

/// Linear power gain `|h|²` of an amplitude gain in dB.
pub fn amplitude_db_to_power(g_db: f64) -> f64 {
    10f64.powf(2.0 * g_db / 10.0)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
