use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// The four carrier bands the simulator is calibrated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    /// 4.6 GHz, sub-6 GHz (FR1).
    #[serde(rename = "4.6")]
    Sub6,
    /// 8.2 GHz, upper mid-band (FR3).
    #[serde(rename = "8.2")]
    Fr3Low,
    /// 15 GHz, upper mid-band (FR3).
    #[serde(rename = "15")]
    Fr3High,
    /// 28 GHz, mmWave (FR2).
    #[serde(rename = "28")]
    MmWave,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::Sub6, Band::Fr3Low, Band::Fr3High, Band::MmWave];

    pub fn from_ghz(ghz: f64) -> Result<Band> {
        Band::ALL
            .into_iter()
            .find(|b| (b.ghz() - ghz).abs() < 1e-6)
            .ok_or(Error::UnsupportedBand(ghz))
    }

    /// Band whose carrier matches `hz` to within 1 kHz.
    pub fn from_hz(hz: f64) -> Result<Band> {
        Band::ALL
            .into_iter()
            .find(|b| (b.carrier_hz() - hz).abs() < 1e3)
            .ok_or(Error::UnsupportedBand(hz / 1e9))
    }

    pub fn ghz(self) -> f64 {
        match self {
            Band::Sub6 => 4.6,
            Band::Fr3Low => 8.2,
            Band::Fr3High => 15.0,
            Band::MmWave => 28.0,
        }
    }

    pub fn carrier_hz(self) -> f64 {
        self.ghz() * 1e9
    }

    pub fn wavelength_m(self) -> f64 {
        wavelength(self.carrier_hz())
    }

    /// Position in [`Band::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ghz())
    }
}

pub fn wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_supported_bands_only() {
        assert_eq!(Band::from_ghz(4.6).unwrap(), Band::Sub6);
        assert_eq!(Band::from_ghz(28.0).unwrap(), Band::MmWave);
        let err = Band::from_ghz(10.0).unwrap_err().to_string();
        assert!(err.contains("unsupported band"), "{err}");
    }

    #[test]
    fn index_matches_all_order() {
        for (i, b) in Band::ALL.iter().enumerate() {
            assert_eq!(b.index(), i);
        }
    }
}
