//! Wideband MIMO impulse responses synthesised from traced paths.

use std::io::Write;

use num_complex::Complex64;

use crate::antenna::{steering_vector, ArrayGeometry};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::propagation::PropagationPath;

/// Taps closer than this (s) are merged into one.
pub const TAP_MERGE_S: f64 = 0.01e-9;

/// Minimal per-path input of [`assemble_terms`]; `amplitude` already
/// includes the element gains at `aod` and `aoa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTerm {
    pub amplitude: f64,
    pub phase_rad: f64,
    pub delay_s: f64,
    pub aod: Vec3,
    pub aoa: Vec3,
}

impl From<&PropagationPath> for PathTerm {
    fn from(p: &PropagationPath) -> Self {
        PathTerm {
            amplitude: p.amplitude,
            phase_rad: p.phase_rad,
            delay_s: p.delay_s,
            aod: p.geometry.aod,
            aoa: p.geometry.aoa,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tap {
    pub delay_s: f64,
    /// `N_r x N_t` gains, row-major over (receive m, transmit n).
    pub gains: Vec<Complex64>,
}

impl Tap {
    pub fn energy(&self) -> f64 {
        self.gains.iter().map(Complex64::norm_sqr).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImpulseResponse {
    pub taps: Vec<Tap>,
    pub n_t: usize,
    pub n_r: usize,
    pub carrier_hz: f64,
}

impl ChannelImpulseResponse {
    pub fn empty(n_t: usize, n_r: usize, carrier_hz: f64) -> Self {
        ChannelImpulseResponse {
            taps: Vec::new(),
            n_t,
            n_r,
            carrier_hz,
        }
    }

    pub fn gain(&self, tap: usize, m: usize, n: usize) -> Complex64 {
        self.taps[tap].gains[m * self.n_t + n]
    }

    /// `sum_taps sum_{m,n} |H_{m,n}|^2`.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(Tap::energy).sum()
    }

    /// Largest eigenvalue of `sum_taps H^H H`, i.e. the squared spectral norm
    /// of the taps stacked on top of each other.
    pub fn max_eigen_energy(&self) -> f64 {
        let rows = self.taps.len() * self.n_r;
        if rows == 0 || self.n_t == 0 {
            return 0.0;
        }
        let n_t = self.n_t;
        let row = |r: usize| {
            let (k, m) = (r / self.n_r, r % self.n_r);
            &self.taps[k].gains[m * n_t..(m + 1) * n_t]
        };
        let best = (0..rows)
            .max_by(|&a, &b| {
                let ea: f64 = row(a).iter().map(Complex64::norm_sqr).sum();
                let eb: f64 = row(b).iter().map(Complex64::norm_sqr).sum();
                ea.total_cmp(&eb).then(b.cmp(&a))
            })
            .unwrap_or(0);
        let mut v: Vec<Complex64> = row(best).iter().map(|h| h.conj()).collect();
        let norm = v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let mut w = vec![Complex64::new(0.0, 0.0); rows];
        let mut next = vec![Complex64::new(0.0, 0.0); n_t];
        let mut lambda = 0.0;
        for _ in 0..500 {
            for (r, out) in w.iter_mut().enumerate() {
                *out = row(r).iter().zip(&v).map(|(h, x)| h * x).sum();
            }
            // Rayleigh quotient of the unit vector v
            let rq: f64 = w.iter().map(Complex64::norm_sqr).sum();
            next.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            for (r, wr) in w.iter().enumerate() {
                for (x, h) in next.iter_mut().zip(row(r)) {
                    *x += h.conj() * wr;
                }
            }
            let norm = next.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
            let converged = (rq - lambda).abs() <= 1e-13 * rq;
            lambda = rq;
            if norm == 0.0 || converged {
                break;
            }
            for (x, y) in v.iter_mut().zip(&next) {
                *x = y / norm;
            }
        }
        lambda
    }
}

/// Tap matrices `A e^{j psi} a_rx(aoa) a_tx(aod)^H` of the given paths.
pub fn assemble_channel(
    paths: &[PropagationPath],
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    carrier_hz: f64,
) -> Result<ChannelImpulseResponse> {
    let terms: Vec<PathTerm> = paths.iter().map(PathTerm::from).collect();
    assemble_terms(&terms, tx_array, rx_array, carrier_hz)
}

pub fn assemble_terms(
    terms: &[PathTerm],
    tx_array: &ArrayGeometry,
    rx_array: &ArrayGeometry,
    carrier_hz: f64,
) -> Result<ChannelImpulseResponse> {
    for (name, a) in [("transmit", tx_array), ("receive", rx_array)] {
        if (a.carrier_hz - carrier_hz).abs() > 1.0 {
            return Err(Error::ArrayMismatch(format!(
                "{name} array is configured for {} Hz, channel carrier is {} Hz",
                a.carrier_hz, carrier_hz
            )));
        }
    }
    let (n_t, n_r) = (tx_array.len(), rx_array.len());
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by(|&a, &b| terms[a].delay_s.total_cmp(&terms[b].delay_s).then(a.cmp(&b)));
    let mut taps: Vec<Tap> = Vec::new();
    for i in order {
        let t = &terms[i];
        let c = Complex64::from_polar(t.amplitude, t.phase_rad);
        let a_t = steering_vector(tx_array, carrier_hz, t.aod);
        let a_r = steering_vector(rx_array, carrier_hz, t.aoa);
        let merge = taps.last().is_some_and(|tap| t.delay_s - tap.delay_s < TAP_MERGE_S);
        if !merge {
            taps.push(Tap {
                delay_s: t.delay_s,
                gains: vec![Complex64::new(0.0, 0.0); n_r * n_t],
            });
        }
        let tap = taps.last_mut().expect("tap exists");
        for (m, r) in a_r.iter().enumerate() {
            let cr = c * r;
            for (n, s) in a_t.iter().enumerate() {
                tap.gains[m * n_t + n] += cr * s.conj();
            }
        }
    }
    Ok(ChannelImpulseResponse {
        taps,
        n_t,
        n_r,
        carrier_hz,
    })
}

/// Power-weighted RMS spread of the tap delays (s).
pub fn rms_delay_spread(cir: &ChannelImpulseResponse) -> Result<f64> {
    let powers: Vec<f64> = cir.taps.iter().map(Tap::energy).collect();
    let total: f64 = powers.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroChannel);
    }
    let mean = cir.taps.iter().zip(&powers).map(|(t, p)| p * t.delay_s).sum::<f64>() / total;
    let var = cir
        .taps
        .iter()
        .zip(&powers)
        .map(|(t, p)| p * (t.delay_s - mean).powi(2))
        .sum::<f64>()
        / total;
    Ok(var.max(0.0).sqrt())
}

/// `1 / (5 tau_rms)` (Hz).
pub fn coherence_bandwidth(tau_rms_s: f64) -> Result<f64> {
    if !(tau_rms_s > 0.0) || !tau_rms_s.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "delay spread must be positive, got {tau_rms_s} s"
        )));
    }
    Ok(1.0 / (5.0 * tau_rms_s))
}

/// Whether `bandwidth_hz` exceeds the coherence bandwidth of `cir`.
pub fn is_wideband(cir: &ChannelImpulseResponse, bandwidth_hz: f64) -> bool {
    if cir.taps.len() < 2 {
        return false;
    }
    match rms_delay_spread(cir).and_then(coherence_bandwidth) {
        Ok(bc) => bandwidth_hz > bc,
        Err(_) => false,
    }
}

/// CSV dump: `tap_idx, delay_ns` then `h_m_n_re, h_m_n_im` row-major over (m, n).
pub fn write_cir_csv(cir: &ChannelImpulseResponse, out: &mut impl Write) -> std::io::Result<()> {
    write!(out, "tap_idx,delay_ns")?;
    for m in 0..cir.n_r {
        for n in 0..cir.n_t {
            write!(out, ",h_{m}_{n}_re,h_{m}_{n}_im")?;
        }
    }
    writeln!(out)?;
    for (k, tap) in cir.taps.iter().enumerate() {
        write!(out, "{k},{:.6}", tap.delay_s * 1e9)?;
        for g in &tap.gains {
            write!(out, ",{:e},{:e}", g.re, g.im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
