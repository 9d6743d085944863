//! SNR, interference, SINR, coverage and empirical CDFs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelImpulseResponse;
use crate::error::{Error, Result};
use crate::stats::quantile;

/// Thermal noise density used by default (W/Hz).
pub const DEFAULT_N0: f64 = 1e-21;

/// How the serving link combines its antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beamforming {
    /// Matched-filter transmit and receive weights on the dominant
    /// eigenmode: the captured energy is `N_t * lambda_max(sum H^H H)`.
    #[default]
    Mrt,
    /// Plain channel energy `sum |H_{m,n}|^2`.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    /// Total transmit power per sector (W).
    pub p_t_w: f64,
    /// Noise power spectral density (W/Hz).
    pub n0_w_per_hz: f64,
    pub bandwidth_hz: f64,
    #[serde(default)]
    pub beamforming: Beamforming,
}

impl RadioConfig {
    pub fn new(p_t_w: f64, bandwidth_hz: f64) -> Self {
        RadioConfig {
            p_t_w,
            n0_w_per_hz: DEFAULT_N0,
            bandwidth_hz,
            beamforming: Beamforming::Mrt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_t_w", self.p_t_w),
            ("n0_w_per_hz", self.n0_w_per_hz),
            ("bandwidth_hz", self.bandwidth_hz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `sigma_n^2 = N0 B`.
    pub fn noise_power(&self) -> f64 {
        self.n0_w_per_hz * self.bandwidth_hz
    }
}

/// Serving-link energy entering the SNR numerator.
pub fn signal_energy(cir: &ChannelImpulseResponse, beamforming: Beamforming) -> f64 {
    match beamforming {
        Beamforming::Mrt => cir.n_t as f64 * cir.max_eigen_energy(),
        Beamforming::None => cir.energy(),
    }
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `P_t / (N_t (sigma^2 + P_I)) * E` in dB, the common form of SNR and SINR.
pub fn sinr_from_energy(energy: f64, n_t: usize, radio: &RadioConfig, p_i_avg: f64) -> f64 {
    to_db(radio.p_t_w / (n_t as f64 * (radio.noise_power() + p_i_avg)) * energy)
}

/// Interference-free SNR (dB); `-inf` for an empty channel.
pub fn snr(cir: &ChannelImpulseResponse, radio: &RadioConfig) -> f64 {
    sinr(cir, radio, 0.0)
}

/// SINR (dB) with average interference power `p_i_avg` (W).
pub fn sinr(cir: &ChannelImpulseResponse, radio: &RadioConfig, p_i_avg: f64) -> f64 {
    sinr_from_energy(signal_energy(cir, radio.beamforming), cir.n_t, radio, p_i_avg)
}

/// One interfering sector as seen by the UE.
#[derive(Debug, Clone, Copy)]
pub struct Interferer<'a> {
    pub cir: &'a ChannelImpulseResponse,
    pub p_t_w: f64,
    pub n_t: usize,
}

/// Term of the average interference power of one sector from its channel energy.
pub fn interference_term(energy: f64, p_t_w: f64, n_t: usize, n_r: usize) -> f64 {
    p_t_w / n_t as f64 * energy / n_r as f64
}

/// `sum_j P_t,j / N_t,j * (1 / N_r) * sum |H_j|^2` (W).
pub fn average_interference_power(interferers: &[Interferer<'_>], n_r: usize) -> Result<f64> {
    let mut total = 0.0;
    for (j, i) in interferers.iter().enumerate() {
        if i.cir.n_r != n_r {
            return Err(Error::ArrayMismatch(format!(
                "interferer {j} has {} receive antennas, expected {n_r}",
                i.cir.n_r
            )));
        }
        total += interference_term(i.cir.energy(), i.p_t_w, i.n_t, n_r);
    }
    Ok(total)
}

/// Fraction of samples strictly above `gamma_th_db`.
pub fn coverage_probability(samples_db: &[f64], gamma_th_db: f64) -> Result<f64> {
    if samples_db.is_empty() {
        return Err(Error::EmptySamples);
    }
    let above = samples_db.iter().filter(|&&s| s > gamma_th_db).count();
    Ok(above as f64 / samples_db.len() as f64)
}

/// Quantile levels tagged in CDF outputs.
pub const TAGGED_QUANTILES: [(f64, &str); 3] = [(0.1, "q10"), (0.5, "q50"), (0.9, "q90")];

#[derive(Debug, Clone, PartialEq)]
pub struct CdfPoint {
    pub value_db: f64,
    pub cdf: f64,
    /// Quantile tags (`q10`, `q50`, `q90`) falling on this step, joined by `|`.
    pub tag: String,
}

/// Step points of the empirical CDF, one per distinct value.
pub fn empirical_cdf(samples_db: &[f64]) -> Result<Vec<CdfPoint>> {
    if samples_db.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples_db.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(p) if p.value_db == x => p.cdf = cdf,
            _ => points.push(CdfPoint {
                value_db: x,
                cdf,
                tag: String::new(),
            }),
        }
    }
    for (p, name) in TAGGED_QUANTILES {
        let q = quantile(&sorted, p);
        if let Some(pt) = points.iter_mut().find(|pt| pt.value_db == q) {
            if !pt.tag.is_empty() {
                pt.tag.push('|');
            }
            pt.tag.push_str(name);
        }
    }
    Ok(points)
}

/// Format a dB value for CSV output.
pub fn fmt_db(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_cdf_csv(points: &[CdfPoint], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "value_db,cdf,tag")?;
    for p in points {
        writeln!(out, "{},{:.8},{}", fmt_db(p.value_db), p.cdf, p.tag)?;
    }
    Ok(())
}

/// Per-UE outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub ue_id: usize,
    pub x_m: f64,
    pub y_m: f64,
    /// Serving sector id, `None` in outage.
    pub serving_bs: Option<usize>,
    pub snr_db: f64,
    pub sinr_db: f64,
    pub los: bool,
}

pub const METRICS_HEADER: &str = "ue_id,x_m,y_m,serving_bs,los,snr_db,sinr_db";

pub fn write_metrics_csv(samples: &[LinkSample], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for s in samples {
        let serving = s.serving_bs.map(|b| b.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{:.3},{:.3},{},{},{},{}",
            s.ue_id,
            s.x_m,
            s.y_m,
            serving,
            u8::from(s.los),
            fmt_db(s.snr_db),
            fmt_db(s.sinr_db)
        )?;
    }
    Ok(())
}
