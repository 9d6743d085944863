//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::antenna::ElementPattern;
use crate::band::Band;
use crate::city::{GridRounding, ItuUrbanParams};
use crate::error::{Error, Result};
use crate::metrics::{Beamforming, DEFAULT_N0};
use crate::propagation::TraceConfig;
use crate::scenario::{density_to_isd, InterferenceMode, Scenario, PINNED_DENSITIES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub city: u64,
    pub ue: u64,
    /// Seed of the surplus-cell removal when `city.rounding = "ceil_drop_excess"`.
    pub drop_excess: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    #[default]
    Floor,
    CeilDropExcess,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CityConfig {
    pub alpha0: f64,
    pub beta0: f64,
    pub gamma0: f64,
    pub rounding: RoundingMode,
}

impl Default for CityConfig {
    fn default() -> Self {
        let p = ItuUrbanParams::HIGH_RISE;
        CityConfig {
            alpha0: p.alpha0,
            beta0: p.beta0,
            gamma0: p.gamma0,
            rounding: RoundingMode::Floor,
        }
    }
}

impl CityConfig {
    pub fn params(&self) -> ItuUrbanParams {
        ItuUrbanParams {
            alpha0: self.alpha0,
            beta0: self.beta0,
            gamma0: self.gamma0,
        }
    }
}

fn default_bands() -> Vec<f64> {
    Band::ALL.iter().map(|b| b.ghz()).collect()
}

fn default_densities() -> Vec<f64> {
    PINNED_DENSITIES.iter().map(|d| d.0).collect()
}

fn default_mode() -> InterferenceMode {
    InterferenceMode::FullInterference
}

fn default_n_ues() -> usize {
    100
}

fn default_realizations() -> usize {
    3
}

fn default_area() -> f64 {
    0.6
}

fn default_p_t() -> f64 {
    1.0
}

fn default_n0() -> f64 {
    DEFAULT_N0
}

fn default_gamma() -> f64 {
    10.0
}

/// Experiment description; every field except `seeds` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Band of `run`; may be given on the command line instead.
    #[serde(default)]
    pub band_ghz: Option<f64>,
    /// Bands of `sweep-density`.
    #[serde(default = "default_bands")]
    pub bands: Vec<f64>,
    #[serde(default = "default_mode")]
    pub mode: InterferenceMode,
    /// BS density (per km^2); mutually exclusive with `isd_m`.
    #[serde(default)]
    pub bs_density: Option<f64>,
    #[serde(default)]
    pub isd_m: Option<f64>,
    /// Densities of `sweep-density`.
    #[serde(default = "default_densities")]
    pub densities: Vec<f64>,
    #[serde(default = "default_n_ues")]
    pub n_ues: usize,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    /// Side of the square network area (km).
    #[serde(default = "default_area")]
    pub area_km: f64,
    /// Total transmit power per sector (W).
    #[serde(default = "default_p_t")]
    pub p_t_w: f64,
    #[serde(default = "default_n0")]
    pub n0_w_per_hz: f64,
    #[serde(default)]
    pub beamforming: Beamforming,
    /// Coverage threshold (dB).
    #[serde(default = "default_gamma")]
    pub gamma_th_db: f64,
    /// Load this city for every realization instead of generating one.
    #[serde(default)]
    pub city_file: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub seeds: Seeds,
    #[serde(default)]
    pub city: CityConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub antenna: ElementPattern,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed_city: Option<u64>,
    pub seed_ue: Option<u64>,
    pub band_ghz: Option<f64>,
    pub density: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

/// 1-based line of the first assignment to `key` in `text`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl ScenarioConfig {
    /// Parse and validate a config document; `origin` names it in messages.
    pub fn parse(text: &str, origin: &str) -> Result<ScenarioConfig> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        cfg.validate().map_err(|(key, msg)| {
            let leaf = key.rsplit('.').next().unwrap_or(key);
            match key_line(text, leaf) {
                Some(line) => Error::Config(format!("{origin}:{line}: {key}: {msg}")),
                None => Error::Config(format!("{origin}: {key}: {msg}")),
            }
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        ScenarioConfig::parse(&text, &path.display().to_string())
    }

    /// The shipped desk-scale preset.
    pub fn desk(seeds: Seeds) -> ScenarioConfig {
        ScenarioConfig {
            band_ghz: Some(8.2),
            bands: default_bands(),
            mode: InterferenceMode::FullInterference,
            bs_density: None,
            isd_m: Some(350.0),
            densities: default_densities(),
            n_ues: 100,
            n_realizations: 3,
            area_km: 0.6,
            p_t_w: 0.01,
            n0_w_per_hz: DEFAULT_N0,
            beamforming: Beamforming::Mrt,
            gamma_th_db: 10.0,
            city_file: None,
            output_dir: None,
            seeds,
            city: CityConfig::default(),
            trace: TraceConfig::default(),
            antenna: ElementPattern::default(),
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed_city {
            self.seeds.city = s;
        }
        if let Some(s) = o.seed_ue {
            self.seeds.ue = s;
        }
        if let Some(b) = o.band_ghz {
            self.band_ghz = Some(b);
        }
        if let Some(d) = o.density {
            self.bs_density = Some(d);
            self.isd_m = None;
        }
        if let Some(p) = &o.output_dir {
            self.output_dir = Some(p.clone());
        }
        self.validate()
            .map_err(|(key, msg)| Error::Config(format!("{key}: {msg}")))
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if let Some(b) = self.band_ghz {
            Band::from_ghz(b).map_err(|e| ("band_ghz", e.to_string()))?;
        }
        if self.bands.is_empty() {
            return Err(("bands", "at least one band is required".into()));
        }
        for &b in &self.bands {
            Band::from_ghz(b).map_err(|e| ("bands", e.to_string()))?;
        }
        if self.bs_density.is_some() && self.isd_m.is_some() {
            return Err(("isd_m", "set either bs_density or isd_m, not both".into()));
        }
        if let Some(d) = self.bs_density {
            density_to_isd(d).map_err(|e| ("bs_density", e.to_string()))?;
        }
        if let Some(isd) = self.isd_m {
            if !(isd > 0.0) {
                return Err(("isd_m", format!("must be positive, got {isd}")));
            }
        }
        for &d in &self.densities {
            density_to_isd(d).map_err(|e| ("densities", e.to_string()))?;
        }
        if self.n_ues < 1 {
            return Err(("n_ues", "must be at least 1".into()));
        }
        if self.n_realizations < 1 {
            return Err(("n_realizations", "must be at least 1".into()));
        }
        for (key, v) in [
            ("area_km", self.area_km),
            ("p_t_w", self.p_t_w),
            ("n0_w_per_hz", self.n0_w_per_hz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err((key, format!("must be positive, got {v}")));
            }
        }
        if self.gamma_th_db.is_nan() {
            return Err(("gamma_th_db", "must be a number".into()));
        }
        self.city
            .params()
            .validate()
            .map_err(|e| ("city", e.to_string()))?;
        self.trace.validate().map_err(|e| ("trace", e.to_string()))?;
        self.antenna.validate().map_err(|e| ("antenna", e.to_string()))?;
        Ok(())
    }

    pub fn band(&self) -> Result<Band> {
        let ghz = self
            .band_ghz
            .ok_or_else(|| Error::Config("band_ghz: no band given (set it in the config or pass --band)".into()))?;
        Band::from_ghz(ghz)
    }

    pub fn bands(&self) -> Result<Vec<Band>> {
        self.bands.iter().map(|&b| Band::from_ghz(b)).collect()
    }

    /// Inter-site distance and whether it came from the density table.
    pub fn resolved_isd(&self) -> Result<(f64, bool)> {
        match (self.bs_density, self.isd_m) {
            (Some(d), _) => density_to_isd(d).map(|l| (l.isd_m, l.pinned)),
            (None, Some(isd)) => Ok((isd, true)),
            (None, None) => Ok((350.0, true)),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Scenario with `isd_m` and the city source resolved.
    pub fn scenario(&self) -> Result<Scenario> {
        let layout = match &self.city_file {
            Some(p) => Some(crate::city::CityLayout::load(p)?),
            None => None,
        };
        Ok(Scenario {
            city: self.city.params(),
            area_km: self.area_km,
            rounding: match self.city.rounding {
                RoundingMode::Floor => GridRounding::Floor,
                RoundingMode::CeilDropExcess => GridRounding::CeilDropExcess {
                    seed: self.seeds.drop_excess,
                },
            },
            layout,
            isd_m: self.resolved_isd()?.0,
            n_ues: self.n_ues,
            n_realizations: self.n_realizations,
            seed_city: self.seeds.city,
            seed_ue: self.seeds.ue,
            mode: self.mode,
            trace: self.trace,
            p_t_w: self.p_t_w,
            n0_w_per_hz: self.n0_w_per_hz,
            beamforming: self.beamforming,
            pattern: self.antenna,
        })
    }

    /// SHA-256 of the canonical serialisation, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let canonical = ScenarioConfig {
            output_dir: None,
            ..self.clone()
        };
        let text = toml::to_string(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[seeds]\ncity = 1\nue = 2\ndrop_excess = 3\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ScenarioConfig::parse(MINIMAL, "t.toml").unwrap();
        assert_eq!(c.n_ues, 100);
        assert_eq!(c.resolved_isd().unwrap(), (350.0, true));
        assert_eq!(c.trace, TraceConfig::default());
        assert_eq!(c.bands().unwrap(), Band::ALL.to_vec());
        assert!(c.band().is_err());
    }

    #[test]
    fn seeds_are_mandatory() {
        let e = ScenarioConfig::parse("n_ues = 3\n", "t.toml").unwrap_err();
        assert!(e.to_string().contains("seeds"), "{e}");
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = format!("n_ues = 3\nn_uess = 4\n{MINIMAL}");
        let e = ScenarioConfig::parse(&text, "t.toml").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(e.contains("n_uess"), "{e}");
    }

    #[test]
    fn semantic_error_reports_its_line() {
        let text = format!("n_ues = 3\nband_ghz = 9.0\n{MINIMAL}");
        let e = ScenarioConfig::parse(&text, "t.toml").unwrap_err().to_string();
        assert!(e.contains("t.toml:2: band_ghz"), "{e}");
    }

    #[test]
    fn density_and_isd_conflict() {
        let text = format!("bs_density = 17\nisd_m = 300\n{MINIMAL}");
        assert!(ScenarioConfig::parse(&text, "t.toml").is_err());
        let text = format!("bs_density = 17\n{MINIMAL}");
        let c = ScenarioConfig::parse(&text, "t.toml").unwrap();
        assert_eq!(c.resolved_isd().unwrap(), (350.0, true));
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ScenarioConfig::desk(Seeds {
            city: 1,
            ue: 2,
            drop_excess: 3,
        });
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seeds.ue = 5;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn toml_round_trip() {
        let a = ScenarioConfig::desk(Seeds {
            city: 1,
            ue: 2,
            drop_excess: 3,
        });
        let b = ScenarioConfig::parse(&a.to_toml(), "rt").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infinite_threshold_parses() {
        let text = format!("gamma_th_db = -inf\n{MINIMAL}");
        let c = ScenarioConfig::parse(&text, "t.toml").unwrap();
        assert_eq!(c.gamma_th_db, f64::NEG_INFINITY);
    }
}
