//! Synthetic high-rise city layouts drawn from the ITU three-parameter urban
//! model: built-up fraction `alpha0`, building density `beta0` (per km²) and a
//! Rayleigh height scale `gamma0` (m).
//!
//! Buildings are square, share one width and sit on a regular grid whose pitch
//! is building width plus street width. Only the heights are random.

use std::path::Path;

use rand::distributions::{Distribution, Open01};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::material::MaterialKind;
use crate::stats::{ks_p_value, ks_statistic};

/// Sampled heights below this are raised to it (one storey).
pub const MIN_BUILDING_HEIGHT_M: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItuUrbanParams {
    pub alpha0: f64,
    pub beta0: f64,
    pub gamma0: f64,
}

impl ItuUrbanParams {
    /// The high-rise urban set used throughout: half the land built up,
    /// 300 buildings per km², Rayleigh scale 50 m.
    pub const HIGH_RISE: ItuUrbanParams = ItuUrbanParams {
        alpha0: 0.5,
        beta0: 300.0,
        gamma0: 50.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha0 must lie in (0, 1], got {}",
                self.alpha0
            )));
        }
        if !(self.beta0 > 0.0) || !self.beta0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta0 must be positive, got {}",
                self.beta0
            )));
        }
        if !(self.gamma0 > 0.0) || !self.gamma0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma0 must be positive, got {}",
                self.gamma0
            )));
        }
        Ok(())
    }
}

/// Derived grid dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutParams {
    pub building_width_m: f64,
    pub street_width_m: f64,
    /// Side of the square network area (km).
    pub side_km: f64,
}

impl LayoutParams {
    pub fn pitch_m(&self) -> f64 {
        self.building_width_m + self.street_width_m
    }
}

/// Building width, street width and area side from `(alpha0, beta0, n_buildings)`.
pub fn derive_layout_params(alpha0: f64, beta0: f64, n_buildings: usize) -> Result<LayoutParams> {
    ItuUrbanParams {
        alpha0,
        beta0,
        gamma0: 1.0,
    }
    .validate()?;
    if n_buildings == 0 {
        return Err(Error::InvalidParameter("n_buildings must be at least 1".into()));
    }
    let building_width_m = 1000.0 * (alpha0 / beta0).sqrt();
    let street_width_m = 1000.0 / beta0.sqrt() - building_width_m;
    if street_width_m <= 1e-9 * building_width_m {
        return Err(Error::InfeasibleLayout(format!(
            "alpha0 = {alpha0}, beta0 = {beta0} leaves street width {street_width_m:.3e} m"
        )));
    }
    let side_km = (street_width_m + building_width_m) / 1000.0 * (n_buildings as f64).sqrt();
    Ok(LayoutParams {
        building_width_m,
        street_width_m,
        side_km,
    })
}

/// Inverse Rayleigh CDF without the height floor.
pub fn rayleigh_inverse_cdf(gamma0: f64, u: f64) -> f64 {
    gamma0 * (-2.0 * (-u).ln_1p()).sqrt()
}

pub fn rayleigh_cdf(gamma0: f64, h: f64) -> f64 {
    if h <= 0.0 {
        0.0
    } else {
        -(-h * h / (2.0 * gamma0 * gamma0)).exp_m1()
    }
}

/// Building height for a uniform draw `u` in (0, 1), floored at [`MIN_BUILDING_HEIGHT_M`].
pub fn sample_building_height(gamma0: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "uniform draw must lie in (0, 1), got {u}"
        )));
    }
    if !(gamma0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma0 must be positive, got {gamma0}"
        )));
    }
    Ok(rayleigh_inverse_cdf(gamma0, u).max(MIN_BUILDING_HEIGHT_M))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Building {
    #[serde(rename = "cx")]
    pub center_x: f64,
    #[serde(rename = "cy")]
    pub center_y: f64,
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(rename = "h")]
    pub height: f64,
    #[serde(default)]
    pub material: MaterialKind,
}

impl Building {
    pub fn bounds(&self) -> Aabb {
        let hw = self.width / 2.0;
        Aabb::new(
            Vec3::new(self.center_x - hw, self.center_y - hw, 0.0),
            Vec3::new(self.center_x + hw, self.center_y + hw, self.height),
        )
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        let hw = self.width / 2.0;
        (x - self.center_x).abs() < hw && (y - self.center_y).abs() < hw
    }
}

/// How a non-square building count is fitted onto the square grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GridRounding {
    /// Largest square grid not exceeding the requested count.
    #[default]
    Floor,
    /// Smallest square grid covering the count; the surplus cells are emptied
    /// at random with the given seed.
    CeilDropExcess { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityLayout {
    pub side_km: f64,
    #[serde(rename = "street_m")]
    pub street_width_m: f64,
    pub buildings: Vec<Building>,
    #[serde(skip)]
    pub seed: u64,
}

/// Achieved statistics of a generated layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CityStats {
    pub n_buildings: usize,
    pub achieved_alpha: f64,
    pub achieved_beta: f64,
    pub height_ks_stat: f64,
    pub height_ks_p_value: f64,
}

/// Generate a grid city with `Floor` rounding.
pub fn generate_city(params: ItuUrbanParams, n_buildings: usize, seed: u64) -> Result<CityLayout> {
    generate_city_with(params, n_buildings, seed, GridRounding::Floor)
}

pub fn generate_city_with(
    params: ItuUrbanParams,
    n_buildings: usize,
    seed: u64,
    rounding: GridRounding,
) -> Result<CityLayout> {
    params.validate()?;
    let lp = derive_layout_params(params.alpha0, params.beta0, n_buildings)?;
    let root = integer_sqrt(n_buildings);
    let (side, keep) = match rounding {
        GridRounding::Floor => (root, None),
        GridRounding::CeilDropExcess { seed: drop_seed } => {
            let side = if root * root == n_buildings { root } else { root + 1 };
            let cells = side * side;
            let mut keep = vec![true; cells];
            if cells > n_buildings {
                let mut rng = ChaCha8Rng::seed_from_u64(drop_seed);
                for i in sample(&mut rng, cells, cells - n_buildings) {
                    keep[i] = false;
                }
            }
            (side, Some(keep))
        }
    };
    let pitch = lp.pitch_m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buildings = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            // one draw per grid cell so dropped cells do not shift other heights
            let u: f64 = Open01.sample(&mut rng);
            if keep.as_ref().is_some_and(|k| !k[j * side + i]) {
                continue;
            }
            buildings.push(Building {
                center_x: (i as f64 + 0.5) * pitch,
                center_y: (j as f64 + 0.5) * pitch,
                width: lp.building_width_m,
                height: sample_building_height(params.gamma0, u)?,
                material: MaterialKind::Concrete,
            });
        }
    }
    Ok(CityLayout {
        side_km: side as f64 * pitch / 1000.0,
        street_width_m: lp.street_width_m,
        buildings,
        seed,
    })
}

fn integer_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

impl CityLayout {
    pub fn side_m(&self) -> f64 {
        self.side_km * 1000.0
    }

    pub fn building_at(&self, x: f64, y: f64) -> Option<usize> {
        self.buildings.iter().position(|b| b.contains_xy(x, y))
    }

    /// Fraction of the ground not covered by footprints.
    pub fn open_fraction(&self) -> f64 {
        let built: f64 = self.buildings.iter().map(|b| b.width * b.width).sum();
        1.0 - built / (self.side_m() * self.side_m())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serialises")
    }

    pub fn from_json(text: &str) -> std::result::Result<CityLayout, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let layout: CityLayout = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            format!("field `{path}`: {}", e.into_inner())
        })?;
        layout.check()?;
        Ok(layout)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<CityLayout> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CityLayout::from_json(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !(self.side_km > 0.0) {
            return Err(format!("field `side_km`: must be positive, got {}", self.side_km));
        }
        for (i, b) in self.buildings.iter().enumerate() {
            if !(b.width > 0.0) {
                return Err(format!("field `buildings[{i}].w`: must be positive"));
            }
            if !(b.height > 0.0) {
                return Err(format!("field `buildings[{i}].h`: must be positive"));
            }
        }
        Ok(())
    }
}

/// Achieved alpha/beta and height goodness-of-fit against the Rayleigh law with `gamma0`.
pub fn validate_city(layout: &CityLayout, gamma0: f64) -> CityStats {
    let area_m2 = layout.side_m() * layout.side_m();
    let built: f64 = layout.buildings.iter().map(|b| b.width * b.width).sum();
    let heights: Vec<f64> = layout.buildings.iter().map(|b| b.height).collect();
    let n = heights.len();
    let ks = if n == 0 {
        0.0
    } else {
        ks_statistic(&heights, |h| rayleigh_cdf(gamma0, h))
    };
    CityStats {
        n_buildings: n,
        achieved_alpha: built / area_m2,
        achieved_beta: n as f64 / (layout.side_km * layout.side_km),
        height_ks_stat: ks,
        height_ks_p_value: if n == 0 { 1.0 } else { ks_p_value(ks, n) },
    }
}
