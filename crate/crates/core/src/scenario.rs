//! Hexagonal deployments, UE drops, association and Monte Carlo evaluation.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::{ArrayGeometry, BandBundle, ElementPattern};
use crate::band::Band;
use crate::channel::{assemble_terms, ChannelImpulseResponse, PathTerm};
use crate::city::{generate_city_with, CityLayout, GridRounding, ItuUrbanParams};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::metrics::{interference_term, signal_energy, sinr_from_energy, Beamforming, LinkSample, RadioConfig};
use crate::propagation::{path_response, rank_paths, RayGeometry, Scene, TraceConfig, TxTracer};

pub const SECTOR_AZIMUTHS_DEG: [f64; 3] = [0.0, 120.0, 240.0];
pub const MAST_HEIGHT_M: f64 = 2.0;
pub const UE_HEIGHT_M: f64 = 2.0;

/// Densities (BS/km^2) with their tabulated inter-site distances (m).
pub const PINNED_DENSITIES: [(f64, f64); 7] = [
    (1.0, 800.0),
    (5.0, 650.0),
    (9.0, 500.0),
    (17.0, 350.0),
    (38.0, 200.0),
    (60.0, 150.0),
    (116.0, 100.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    InterferenceFree,
    FullInterference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsdLookup {
    pub isd_m: f64,
    /// False when the value comes from the ideal hex-cell formula instead of the table.
    pub pinned: bool,
}

/// Inter-site distance for a BS density.
pub fn density_to_isd(bs_per_km2: f64) -> Result<IsdLookup> {
    if !(bs_per_km2 > 0.0) || !bs_per_km2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "BS density must be positive, got {bs_per_km2}"
        )));
    }
    if let Some(&(_, isd_m)) = PINNED_DENSITIES.iter().find(|(d, _)| *d == bs_per_km2) {
        return Ok(IsdLookup { isd_m, pinned: true });
    }
    // hexagonal cell area sqrt(3)/2 * isd^2 per site
    let isd_m = (2.0e6 / (3f64.sqrt() * bs_per_km2)).sqrt();
    Ok(IsdLookup { isd_m, pinned: false })
}

/// Points of a hexagonal lattice with spacing `isd_m` centred on the square
/// `[0, side_m]^2`, kept if within the square grown by `isd_m / 10`.
pub fn hex_lattice(side_m: f64, isd_m: f64) -> Vec<[f64; 2]> {
    let c = side_m / 2.0;
    let half = side_m / 2.0 + isd_m / 10.0;
    let row_h = isd_m * 3f64.sqrt() / 2.0;
    let nj = (half / row_h).ceil() as i64 + 1;
    let ni = (half / isd_m).ceil() as i64 + 2;
    let mut pts = Vec::new();
    for j in -nj..=nj {
        for i in -ni..=ni {
            let x = (i as f64 + 0.5 * (j.rem_euclid(2)) as f64) * isd_m;
            let y = j as f64 * row_h;
            if x.abs() <= half + 1e-9 && y.abs() <= half + 1e-9 {
                pts.push([c + x, c + y]);
            }
        }
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Site {
    pub x_m: f64,
    pub y_m: f64,
    pub building: usize,
    pub rooftop_height_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sector {
    pub id: usize,
    pub site: usize,
    pub azimuth_deg: f64,
    /// Antenna phase centre: roof edge in the azimuth direction, mast above the roof.
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deployment {
    pub isd_m: f64,
    pub sites: Vec<Site>,
    pub sectors: Vec<Sector>,
}

/// Hex deployment with every lattice point moved onto the nearest unused rooftop.
pub fn place_bs_hex(layout: &CityLayout, isd_m: f64) -> Result<Deployment> {
    if !(isd_m > 0.0) {
        return Err(Error::InvalidParameter(format!("isd must be positive, got {isd_m}")));
    }
    let mut used = vec![false; layout.buildings.len()];
    let mut sites = Vec::new();
    for [x, y] in hex_lattice(layout.side_m(), isd_m) {
        let best = layout
            .buildings
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, b)| (i, (b.center_x - x).powi(2) + (b.center_y - y).powi(2)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let Some((b, _)) = best else { break };
        used[b] = true;
        let bld = &layout.buildings[b];
        sites.push(Site {
            x_m: bld.center_x,
            y_m: bld.center_y,
            building: b,
            rooftop_height_m: bld.height + MAST_HEIGHT_M,
        });
    }
    if sites.is_empty() {
        return Err(Error::NoSites);
    }
    let mut sectors = Vec::with_capacity(3 * sites.len());
    for (s, site) in sites.iter().enumerate() {
        let hw = layout.buildings[site.building].width / 2.0;
        for az in SECTOR_AZIMUTHS_DEG {
            let (sa, ca) = az.to_radians().sin_cos();
            // exact facade coordinate on the dominant axis
            let (dx, dy) = if ca.abs() >= sa.abs() {
                (hw.copysign(ca), hw * sa / ca.abs())
            } else {
                (hw * ca / sa.abs(), hw.copysign(sa))
            };
            sectors.push(Sector {
                id: sectors.len(),
                site: s,
                azimuth_deg: az,
                position: Vec3::new(site.x_m + dx, site.y_m + dy, site.rooftop_height_m),
            });
        }
    }
    Ok(Deployment {
        isd_m,
        sites,
        sectors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ue {
    pub id: usize,
    pub position: Vec3,
    /// Azimuth of the vehicle-roof ULA broadside.
    pub heading_deg: f64,
}

impl Ue {
    pub fn array(&self, band: Band, bundle: &BandBundle) -> ArrayGeometry {
        ArrayGeometry::ula(bundle.ula_n, band.carrier_hz(), self.heading_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UePopulation {
    pub ues: Vec<Ue>,
    pub seed: u64,
}

/// Minimum open ground fraction accepted by [`drop_ues`].
pub const MIN_OPEN_FRACTION: f64 = 0.01;

/// `n` UEs uniform over the street-level area outside building footprints.
pub fn drop_ues(n: usize, layout: &CityLayout, seed: u64) -> Result<UePopulation> {
    if n == 0 {
        return Err(Error::InvalidParameter("at least one UE is required".into()));
    }
    let open = layout.open_fraction();
    if open < MIN_OPEN_FRACTION {
        return Err(Error::CrowdedLayout(open));
    }
    let side = layout.side_m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ues = (0..n)
        .map(|id| {
            let (x, y) = loop {
                let x = rng.gen::<f64>() * side;
                let y = rng.gen::<f64>() * side;
                if layout.building_at(x, y).is_none() {
                    break (x, y);
                }
            };
            Ue {
                id,
                position: Vec3::new(x, y, UE_HEIGHT_M),
                heading_deg: rng.gen::<f64>() * 360.0,
            }
        })
        .collect();
    Ok(UePopulation { ues, seed })
}

/// Index of the largest positive score, lowest index on ties; `None` if no
/// score is positive (outage).
pub fn associate(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0.0 && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Association over assembled channels by the SNR numerator `P_t / N_t * E`.
pub fn associate_channels(channels: &[ChannelImpulseResponse], radio: &RadioConfig) -> Option<usize> {
    let scores: Vec<f64> = channels
        .iter()
        .map(|c| radio.p_t_w / c.n_t.max(1) as f64 * signal_energy(c, radio.beamforming))
        .collect();
    associate(&scores)
}

/// Seed of realization `r` derived from a base seed.
pub fn realization_seed(base: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(r as u64 + 1);
    rng.next_u64()
}

/// Transmit power per sector of the desk-scale preset (W).
pub const DESK_P_T_W: f64 = 0.01;

/// Everything needed to run a Monte Carlo evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub city: ItuUrbanParams,
    /// Side of the requested square area (km); the building count is `beta0 * area`.
    pub area_km: f64,
    pub rounding: GridRounding,
    /// Fixed layout used by every realization instead of generated cities.
    pub layout: Option<CityLayout>,
    pub isd_m: f64,
    pub n_ues: usize,
    pub n_realizations: usize,
    pub seed_city: u64,
    pub seed_ue: u64,
    pub mode: InterferenceMode,
    pub trace: TraceConfig,
    pub p_t_w: f64,
    pub n0_w_per_hz: f64,
    pub beamforming: Beamforming,
    pub pattern: ElementPattern,
}

impl Scenario {
    /// Desk-scale preset: 0.6 km area, ISD 350 m, 100 UEs, 3 cities, 3 reflections.
    pub fn desk(mode: InterferenceMode) -> Scenario {
        Scenario {
            city: ItuUrbanParams::HIGH_RISE,
            area_km: 0.6,
            rounding: GridRounding::Floor,
            layout: None,
            isd_m: 350.0,
            n_ues: 100,
            n_realizations: 3,
            seed_city: 1,
            seed_ue: 2,
            mode,
            trace: TraceConfig::default(),
            p_t_w: DESK_P_T_W,
            n0_w_per_hz: crate::metrics::DEFAULT_N0,
            beamforming: Beamforming::Mrt,
            pattern: ElementPattern::default(),
        }
    }

    pub fn n_buildings(&self) -> usize {
        (self.city.beta0 * self.area_km * self.area_km).round() as usize
    }

    pub fn radio(&self, band: Band) -> RadioConfig {
        RadioConfig {
            p_t_w: self.p_t_w,
            n0_w_per_hz: self.n0_w_per_hz,
            bandwidth_hz: BandBundle::for_band(band).bandwidth(),
            beamforming: self.beamforming,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.city.validate()?;
        self.trace.validate()?;
        self.pattern.validate()?;
        if self.n_realizations < 1 {
            return Err(Error::InvalidParameter("n_realizations must be at least 1".into()));
        }
        if self.n_ues < 1 {
            return Err(Error::InvalidParameter("n_ues must be at least 1".into()));
        }
        if self.layout.is_none() && !(self.area_km > 0.0) {
            return Err(Error::InvalidParameter("area_km must be positive".into()));
        }
        RadioConfig {
            bandwidth_hz: 1.0,
            ..self.radio(Band::Sub6)
        }
        .validate()
    }

    /// City of realization `r`.
    pub fn city_for(&self, r: usize) -> Result<CityLayout> {
        match &self.layout {
            Some(l) => Ok(l.clone()),
            None => {
                let rounding = match self.rounding {
                    GridRounding::Floor => GridRounding::Floor,
                    GridRounding::CeilDropExcess { seed } => GridRounding::CeilDropExcess {
                        seed: realization_seed(seed, r),
                    },
                };
                generate_city_with(self.city, self.n_buildings(), realization_seed(self.seed_city, r), rounding)
            }
        }
    }

    pub fn ues_for(&self, r: usize, layout: &CityLayout) -> Result<UePopulation> {
        drop_ues(self.n_ues, layout, realization_seed(self.seed_ue, r))
    }
}

/// Channel statistics of one (sector, UE) link at one band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEnergy {
    /// Energy in the SNR numerator (depends on the beamforming mode).
    pub signal: f64,
    /// `sum |H|^2` over all taps.
    pub total: f64,
    pub los: bool,
}

/// Channel of one sector to one UE from its traced rays, with element gains
/// applied and the path budget enforced.
pub fn link_channel(
    rays: &[RayGeometry],
    sector: &Sector,
    pattern: &ElementPattern,
    ue: &Ue,
    band: Band,
    trace: &TraceConfig,
) -> Result<(ChannelImpulseResponse, bool)> {
    let hz = band.carrier_hz();
    let bundle = BandBundle::for_band(band);
    let responses = rays
        .iter()
        .map(|r| path_response(r, hz, pattern.gain_towards(sector.azimuth_deg, r.aod), 0.0))
        .collect::<Result<Vec<_>>>()?;
    let kept = rank_paths(rays, &responses, trace);
    let los = kept.iter().any(|&i| rays[i].is_los());
    let terms: Vec<PathTerm> = kept
        .iter()
        .map(|&i| PathTerm {
            amplitude: responses[i].amplitude,
            phase_rad: responses[i].phase_rad,
            delay_s: responses[i].delay_s,
            aod: rays[i].aod,
            aoa: rays[i].aoa,
        })
        .collect();
    let tx = ArrayGeometry::ura(bundle.ura_rows, bundle.ura_cols, hz, sector.azimuth_deg, pattern.tilt_deg);
    let rx = ue.array(band, &bundle);
    Ok((assemble_terms(&terms, &tx, &rx, hz)?, los))
}

/// `[sector][ue][band]` link energies of one deployment.
pub fn link_energies(
    scene: &Scene,
    deployment: &Deployment,
    ues: &UePopulation,
    bands: &[Band],
    scenario: &Scenario,
) -> Result<Vec<Vec<Vec<LinkEnergy>>>> {
    deployment
        .sectors
        .iter()
        .map(|sector| {
            let tracer = TxTracer::new(scene, sector.position, scenario.trace);
            ues.ues
                .par_iter()
                .map(|ue| {
                    let rays = tracer.rays_to(ue.position);
                    bands
                        .iter()
                        .map(|&band| {
                            let (cir, los) =
                                link_channel(&rays, sector, &scenario.pattern, ue, band, &scenario.trace)?;
                            Ok(LinkEnergy {
                                signal: signal_energy(&cir, scenario.beamforming),
                                total: cir.energy(),
                                los,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Per-band samples of one deployment; UE ids are offset by `id_offset`.
pub fn samples_from_energies(
    energies: &[Vec<Vec<LinkEnergy>>],
    ues: &UePopulation,
    bands: &[Band],
    scenario: &Scenario,
    id_offset: usize,
) -> Vec<Vec<LinkSample>> {
    bands
        .iter()
        .enumerate()
        .map(|(bi, &band)| {
            let radio = scenario.radio(band);
            let bundle = BandBundle::for_band(band);
            let n_t = bundle.n_tx();
            ues.ues
                .iter()
                .enumerate()
                .map(|(ui, ue)| {
                    let scores: Vec<f64> = energies
                        .iter()
                        .map(|s| radio.p_t_w / n_t as f64 * s[ui][bi].signal)
                        .collect();
                    let serving = associate(&scores);
                    let (snr_db, sinr_db, los) = match serving {
                        None => (f64::NEG_INFINITY, f64::NEG_INFINITY, false),
                        Some(k) => {
                            let link = energies[k][ui][bi];
                            let p_i = match scenario.mode {
                                InterferenceMode::InterferenceFree => 0.0,
                                InterferenceMode::FullInterference => energies
                                    .iter()
                                    .enumerate()
                                    .filter(|(j, _)| *j != k)
                                    .map(|(_, s)| interference_term(s[ui][bi].total, radio.p_t_w, n_t, bundle.ula_n))
                                    .sum(),
                            };
                            (
                                sinr_from_energy(link.signal, n_t, &radio, 0.0),
                                sinr_from_energy(link.signal, n_t, &radio, p_i),
                                link.los,
                            )
                        }
                    };
                    LinkSample {
                        ue_id: id_offset + ue.id,
                        x_m: ue.position.x,
                        y_m: ue.position.y,
                        serving_bs: serving,
                        snr_db,
                        sinr_db,
                        los,
                    }
                })
                .collect()
        })
        .collect()
}

/// Samples per band (in the order of `bands`), concatenated over realizations.
pub fn evaluate_bands(scenario: &Scenario, bands: &[Band]) -> Result<Vec<Vec<LinkSample>>> {
    Ok(evaluate_sweep(scenario, bands, &[scenario.isd_m])?.remove(0))
}

/// Samples per ISD and band (`[isd][band]`); every ISD sees the same cities and UE drops.
pub fn evaluate_sweep(scenario: &Scenario, bands: &[Band], isds_m: &[f64]) -> Result<Vec<Vec<Vec<LinkSample>>>> {
    scenario.validate()?;
    let mut out = vec![vec![Vec::new(); bands.len()]; isds_m.len()];
    for r in 0..scenario.n_realizations {
        let layout = scenario.city_for(r)?;
        let scene = Scene::new(&layout);
        let ues = scenario.ues_for(r, &layout)?;
        for (k, &isd) in isds_m.iter().enumerate() {
            let deployment = place_bs_hex(&layout, isd)?;
            let energies = link_energies(&scene, &deployment, &ues, bands, scenario)?;
            let samples = samples_from_energies(&energies, &ues, bands, scenario, r * scenario.n_ues);
            for (dst, src) in out[k].iter_mut().zip(samples) {
                dst.extend(src);
            }
        }
    }
    Ok(out)
}

/// Samples of a single band.
pub fn evaluate_scenario(scenario: &Scenario, band: Band) -> Result<Vec<LinkSample>> {
    Ok(evaluate_bands(scenario, &[band])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::city::generate_city;

    #[test]
    fn pinned_densities() {
        assert_eq!(density_to_isd(17.0).unwrap().isd_m, 350.0);
        assert_eq!(density_to_isd(116.0).unwrap().isd_m, 100.0);
        assert_eq!(density_to_isd(1.0).unwrap().isd_m, 800.0);
        let other = density_to_isd(10.0).unwrap();
        assert!(!other.pinned);
        assert!((3f64.sqrt() / 2.0 * other.isd_m.powi(2) - 1e5).abs() < 1e-6);
        assert!(density_to_isd(0.0).is_err());
        assert!(density_to_isd(-3.0).is_err());
    }

    #[test]
    fn lattice_sizes() {
        assert_eq!(hex_lattice(1200.0, 350.0).len(), 17);
        assert_eq!(hex_lattice(1200.0, 2400.0).len(), 1);
        assert_eq!(hex_lattice(1200.0, 2400.0)[0], [600.0, 600.0]);
    }

    #[test]
    fn full_scale_deployment_has_17_sites() {
        let l = generate_city(ItuUrbanParams::HIGH_RISE, 432, 1).unwrap();
        let d = place_bs_hex(&l, 350.0).unwrap();
        assert_eq!(d.sites.len(), 17);
        assert_eq!(d.sectors.len(), 51);
        for s in &d.sectors {
            let b = &l.buildings[d.sites[s.site].building];
            assert_eq!(s.position.z, b.height + MAST_HEIGHT_M);
            let edge = (s.position.x - b.center_x).abs().max((s.position.y - b.center_y).abs());
            assert!((edge - b.width / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_site_when_isd_is_large() {
        let l = generate_city(ItuUrbanParams::HIGH_RISE, 100, 1).unwrap();
        let d = place_bs_hex(&l, 3.0 * l.side_m()).unwrap();
        assert_eq!(d.sites.len(), 1);
    }

    #[test]
    fn ues_avoid_buildings_and_repeat() {
        let l = generate_city(ItuUrbanParams::HIGH_RISE, 100, 2).unwrap();
        let a = drop_ues(370, &l, 9).unwrap();
        let b = drop_ues(370, &l, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ues.len(), 370);
        assert!(a.ues.iter().all(|u| l.building_at(u.position.x, u.position.y).is_none()));
        assert!(a.ues.iter().all(|u| u.position.z == UE_HEIGHT_M));
    }

    #[test]
    fn crowded_layout_is_rejected() {
        let l = CityLayout {
            side_km: 0.1,
            street_width_m: 0.0,
            buildings: vec![crate::city::Building {
                center_x: 50.0,
                center_y: 50.0,
                width: 100.0,
                height: 10.0,
                material: Default::default(),
            }],
            seed: 0,
        };
        assert!(matches!(drop_ues(1, &l, 0), Err(Error::CrowdedLayout(_))));
    }

    #[test]
    fn association_rules() {
        assert_eq!(associate(&[1.0]), Some(0));
        assert_eq!(associate(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(associate(&[0.0, 0.0]), None);
        assert_eq!(associate(&[]), None);
    }

    #[test]
    fn realization_seeds_differ() {
        assert_ne!(realization_seed(7, 0), realization_seed(7, 1));
        assert_eq!(realization_seed(7, 3), realization_seed(7, 3));
    }
}
