//! Building and ground materials with per-band electrical constants.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::band::Band;

/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    #[default]
    Concrete,
    Glass,
    Brick,
    DryEarth,
}

/// Homogeneous dielectric at one carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dielectric {
    pub rel_permittivity: f64,
    /// Conductivity (S/m).
    pub conductivity: f64,
}

impl Dielectric {
    pub const VACUUM: Dielectric = Dielectric {
        rel_permittivity: 1.0,
        conductivity: 0.0,
    };

    pub fn lossless(rel_permittivity: f64) -> Self {
        Dielectric {
            rel_permittivity,
            conductivity: 0.0,
        }
    }

    /// `eps_r - j * sigma / (omega * eps_0)`.
    pub fn complex_permittivity(&self, carrier_hz: f64) -> Complex64 {
        let omega = 2.0 * std::f64::consts::PI * carrier_hz;
        Complex64::new(
            self.rel_permittivity,
            -self.conductivity / (omega * EPSILON_0),
        )
    }
}

// (sigma S/m, eps_r) at 4.6, 8.2, 15, 28 GHz.
const CONCRETE: [(f64, f64); 4] = [(0.14, 5.24), (0.23, 5.24), (0.38, 5.24), (0.63, 5.24)];
const GLASS: [(f64, f64); 4] = [(0.03, 6.31), (0.06, 6.31), (0.12, 6.31), (0.24, 6.31)];
const BRICK: [(f64, f64); 4] = [(0.03, 3.91), (0.03, 3.91), (0.04, 3.91), (0.04, 3.91)];
const DRY_EARTH: [(f64, f64); 4] = [(0.003, 3.0), (0.01, 3.0), (0.036, 3.0), (0.147, 3.0)];

impl MaterialKind {
    pub const ALL: [MaterialKind; 4] = [
        MaterialKind::Concrete,
        MaterialKind::Glass,
        MaterialKind::Brick,
        MaterialKind::DryEarth,
    ];

    pub fn at(self, band: Band) -> Dielectric {
        let table = match self {
            MaterialKind::Concrete => &CONCRETE,
            MaterialKind::Glass => &GLASS,
            MaterialKind::Brick => &BRICK,
            MaterialKind::DryEarth => &DRY_EARTH,
        };
        let (conductivity, rel_permittivity) = table[band.index()];
        Dielectric {
            rel_permittivity,
            conductivity,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MaterialKind::Concrete => "concrete",
            MaterialKind::Glass => "glass",
            MaterialKind::Brick => "brick",
            MaterialKind::DryEarth => "dry_earth",
        }
    }
}

impl fmt::Display for MaterialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values_are_physical() {
        for m in MaterialKind::ALL {
            for b in Band::ALL {
                let d = m.at(b);
                assert!(d.conductivity >= 0.0);
                assert!(d.rel_permittivity >= 1.0);
            }
        }
    }

    #[test]
    fn concrete_at_28_ghz() {
        let d = MaterialKind::Concrete.at(Band::MmWave);
        assert_eq!(d.conductivity, 0.63);
        assert_eq!(d.rel_permittivity, 5.24);
        let eps = d.complex_permittivity(28e9);
        assert!((eps.im + 0.404_4).abs() < 1e-3, "{eps}");
    }
}
