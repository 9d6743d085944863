//! Element radiation patterns and half-wavelength URA/ULA responses.
//!
//! Directions are world-frame unit vectors. An array (or sector) frame is set
//! by a boresight azimuth (CCW from +x) and a tilt (boresight elevation,
//! negative below the horizon): local x is boresight, local y is horizontal
//! and local z completes the right-handed frame.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::band::{wavelength, Band};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Parabolic sector element in the style of 3GPP TR 37.840.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementPattern {
    pub hpbw_deg: f64,
    pub max_gain_dbi: f64,
    /// Maximum attenuation, applied both as front-to-back ratio and side-lobe floor.
    pub front_to_back_db: f64,
    /// Boresight elevation (deg); negative tilts the beam down.
    pub tilt_deg: f64,
}

impl Default for ElementPattern {
    fn default() -> Self {
        ElementPattern {
            hpbw_deg: 65.0,
            max_gain_dbi: 30.0,
            front_to_back_db: 30.0,
            tilt_deg: -12.0,
        }
    }
}

impl ElementPattern {
    pub const ISOTROPIC: ElementPattern = ElementPattern {
        hpbw_deg: 179.0,
        max_gain_dbi: 0.0,
        front_to_back_db: 0.0,
        tilt_deg: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.hpbw_deg > 0.0 && self.hpbw_deg < 180.0) {
            return Err(Error::InvalidParameter(format!(
                "hpbw_deg must lie in (0, 180), got {}",
                self.hpbw_deg
            )));
        }
        if !self.max_gain_dbi.is_finite() || !(self.front_to_back_db >= 0.0) {
            return Err(Error::InvalidParameter(
                "element gain and front-to-back ratio must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Gain (dBi) in a world direction for an element whose boresight points at `azimuth_deg`.
    pub fn gain_towards(&self, azimuth_deg: f64, direction: Vec3) -> f64 {
        let frame = Frame::new(azimuth_deg, self.tilt_deg);
        let (phi, theta) = frame.local_angles_deg(direction);
        element_gain(self, theta, phi)
    }
}

/// Element gain (dBi) at elevation offset `theta_deg` and azimuth offset
/// `phi_deg` from boresight, both measured in the tilted element frame.
pub fn element_gain(pattern: &ElementPattern, theta_deg: f64, phi_deg: f64) -> f64 {
    let a_m = pattern.front_to_back_db;
    let att_az = (12.0 * (phi_deg / pattern.hpbw_deg).powi(2)).min(a_m);
    let att_el = (12.0 * (theta_deg / pattern.hpbw_deg).powi(2)).min(a_m);
    pattern.max_gain_dbi - (att_az + att_el).min(a_m)
}

/// Orthonormal frame attached to an array or element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub boresight: Vec3,
    pub horizontal: Vec3,
    pub up: Vec3,
}

impl Frame {
    pub fn new(azimuth_deg: f64, tilt_deg: f64) -> Self {
        let (sa, ca) = azimuth_deg.to_radians().sin_cos();
        let (st, ct) = tilt_deg.to_radians().sin_cos();
        Frame {
            boresight: Vec3::new(ct * ca, ct * sa, st),
            horizontal: Vec3::new(-sa, ca, 0.0),
            up: Vec3::new(-st * ca, -st * sa, ct),
        }
    }

    /// Local (azimuth, elevation) in degrees of a world direction.
    pub fn local_angles_deg(&self, d: Vec3) -> (f64, f64) {
        let x = d.dot(self.boresight);
        let y = d.dot(self.horizontal);
        let z = d.dot(self.up);
        let n = (x * x + y * y + z * z).sqrt();
        (y.atan2(x).to_degrees(), (z / n).clamp(-1.0, 1.0).asin().to_degrees())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrayKind {
    /// Rectangular array: `rows` along local up, `cols` along local horizontal.
    Ura { rows: usize, cols: usize },
    /// Linear array along local horizontal.
    Ula { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    /// Carrier the half-wavelength spacing was cut for.
    pub carrier_hz: f64,
    pub spacing_m: f64,
    pub azimuth_deg: f64,
    pub tilt_deg: f64,
}

impl ArrayGeometry {
    pub fn ura(rows: usize, cols: usize, carrier_hz: f64, azimuth_deg: f64, tilt_deg: f64) -> Self {
        assert!(rows >= 1 && cols >= 1, "URA needs at least one element");
        ArrayGeometry {
            kind: ArrayKind::Ura { rows, cols },
            carrier_hz,
            spacing_m: wavelength(carrier_hz) / 2.0,
            azimuth_deg,
            tilt_deg,
        }
    }

    pub fn ula(n: usize, carrier_hz: f64, azimuth_deg: f64) -> Self {
        assert!(n >= 1, "ULA needs at least one element");
        ArrayGeometry {
            kind: ArrayKind::Ula { n },
            carrier_hz,
            spacing_m: wavelength(carrier_hz) / 2.0,
            azimuth_deg,
            tilt_deg: 0.0,
        }
    }

    pub fn single(carrier_hz: f64) -> Self {
        ArrayGeometry::ula(1, carrier_hz, 0.0)
    }

    pub fn len(&self) -> usize {
        match self.kind {
            ArrayKind::Ura { rows, cols } => rows * cols,
            ArrayKind::Ula { n } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame(&self) -> Frame {
        Frame::new(self.azimuth_deg, self.tilt_deg)
    }

    /// Element positions relative to the first element, row-major for a URA.
    pub fn element_positions(&self) -> Vec<Vec3> {
        let f = self.frame();
        let d = self.spacing_m;
        match self.kind {
            ArrayKind::Ura { rows, cols } => (0..rows)
                .flat_map(|r| (0..cols).map(move |c| (r, c)))
                .map(|(r, c)| f.horizontal * (c as f64 * d) + f.up * (r as f64 * d))
                .collect(),
            ArrayKind::Ula { n } => (0..n).map(|k| f.horizontal * (k as f64 * d)).collect(),
        }
    }

    /// Largest element-to-element extent (m).
    pub fn aperture_side_m(&self) -> f64 {
        let n = match self.kind {
            ArrayKind::Ura { rows, cols } => rows.max(cols),
            ArrayKind::Ula { n } => n,
        };
        (n as f64 - 1.0) * self.spacing_m
    }
}

/// Array response `exp(j k <p_k, d>)` for a unit direction `d`.
pub fn steering_vector(geometry: &ArrayGeometry, carrier_hz: f64, direction: Vec3) -> Vec<Complex64> {
    let k = 2.0 * std::f64::consts::PI / wavelength(carrier_hz);
    geometry
        .element_positions()
        .into_iter()
        .map(|p| Complex64::from_polar(1.0, k * p.dot(direction)))
        .collect()
}

/// Array dimensions and bandwidth tied to one carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BandBundle {
    pub ura_rows: usize,
    pub ura_cols: usize,
    pub ula_n: usize,
    pub bandwidth_hz: u64,
}

impl BandBundle {
    pub fn for_band(band: Band) -> BandBundle {
        let (ura, ula, mhz) = match band {
            Band::Sub6 => (2, 2, 60),
            Band::Fr3Low => (3, 2, 200),
            Band::Fr3High => (5, 3, 300),
            Band::MmWave => (9, 3, 400),
        };
        BandBundle {
            ura_rows: ura,
            ura_cols: ura,
            ula_n: ula,
            bandwidth_hz: mhz * 1_000_000,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth_hz as f64
    }

    pub fn n_tx(&self) -> usize {
        self.ura_rows * self.ura_cols
    }
}

/// Table lookup by carrier in GHz.
pub fn elements_for_band(ghz: f64) -> Result<BandBundle> {
    Band::from_ghz(ghz).map(BandBundle::for_band)
}

/// Boresight gain (dBi) of an in-phase array of `pattern` elements.
pub fn array_boresight_gain(geometry: &ArrayGeometry, pattern: &ElementPattern) -> f64 {
    pattern.max_gain_dbi + 10.0 * (geometry.len() as f64).log10()
}

/// Array factor power `|sum_k exp(j k <p_k, d>)|^2` for in-phase weights.
pub fn array_factor_power(geometry: &ArrayGeometry, direction: Vec3) -> f64 {
    let sv = steering_vector(geometry, geometry.carrier_hz, direction);
    sv.iter().sum::<Complex64>().norm_sqr()
}

/// Gain (dBi) of the in-phase array in a world direction, normalised so the
/// boresight value equals [`array_boresight_gain`].
pub fn array_gain_towards(geometry: &ArrayGeometry, pattern: &ElementPattern, direction: Vec3) -> f64 {
    let n = geometry.len() as f64;
    let (phi, theta) = geometry.frame().local_angles_deg(direction);
    element_gain(pattern, theta, phi) + 10.0 * (array_factor_power(geometry, direction) / n).log10()
}

/// Array-over-element directivity ratio (dB) by integrating both power
/// patterns over the sphere on a `n_theta x 2 n_theta` midpoint grid.
pub fn array_directivity_gain_numeric(
    geometry: &ArrayGeometry,
    pattern: &ElementPattern,
    n_theta: usize,
) -> f64 {
    let frame = geometry.frame();
    let n_phi = 2 * n_theta;
    let d_theta = std::f64::consts::PI / n_theta as f64;
    let d_phi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut el_int = 0.0;
    let mut arr_int = 0.0;
    for i in 0..n_theta {
        let theta = (i as f64 + 0.5) * d_theta;
        let w = theta.sin() * d_theta * d_phi;
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * d_phi;
            let d = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let (az, el) = frame.local_angles_deg(d);
            let g = 10f64.powf(element_gain(pattern, el, az) / 10.0);
            el_int += g * w;
            arr_int += g * array_factor_power(geometry, d) * w;
        }
    }
    let n = geometry.len() as f64;
    let bore_ratio = n * n;
    10.0 * (bore_ratio * el_int / arr_int).log10()
}
