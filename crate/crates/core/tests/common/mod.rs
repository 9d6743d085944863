//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use highrise::band::Band;
use highrise::channel::{ChannelImpulseResponse, Tap};
use highrise::city::{Building, CityLayout};
use highrise::geometry::Vec3;
use highrise::material::MaterialKind;
use highrise::propagation::{trace_paths, PropagationPath, TraceConfig};
use num_complex::Complex64;
use rand::Rng;

pub const C0: f64 = 299_792_458.0;
const EPS0: f64 = 8.854_187_812_8e-12;

pub fn friis_loss_db(d_m: f64, hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d_m * hz / C0).log10()
}

/// Up to four non-overlapping square buildings inside a 200 m square.
pub fn random_micro_layout(rng: &mut impl Rng) -> CityLayout {
    let side = 200.0;
    let n = rng.gen_range(1..=4);
    let mut buildings: Vec<Building> = Vec::new();
    let materials = [MaterialKind::Concrete, MaterialKind::Glass, MaterialKind::Brick];
    while buildings.len() < n {
        let w: f64 = rng.gen_range(10.0..40.0);
        let cx = rng.gen_range(w / 2.0 + 5.0..side - w / 2.0 - 5.0);
        let cy = rng.gen_range(w / 2.0 + 5.0..side - w / 2.0 - 5.0);
        let clear = buildings.iter().all(|b| {
            let gap = (b.width + w) / 2.0 + 3.0;
            (b.center_x - cx).abs() > gap || (b.center_y - cy).abs() > gap
        });
        if clear {
            buildings.push(Building {
                center_x: cx,
                center_y: cy,
                width: w,
                height: rng.gen_range(5.0..60.0),
                material: materials[rng.gen_range(0..3)],
            });
        }
    }
    CityLayout {
        side_km: side / 1000.0,
        street_width_m: 3.0,
        buildings,
        seed: 0,
    }
}

/// A point at least 0.5 m away from every footprint.
pub fn random_open_point(rng: &mut impl Rng, layout: &CityLayout, z_lo: f64, z_hi: f64) -> Vec3 {
    let side = layout.side_km * 1000.0;
    loop {
        let x = rng.gen_range(1.0..side - 1.0);
        let y = rng.gen_range(1.0..side - 1.0);
        let free = layout.buildings.iter().all(|b| {
            let r = b.width / 2.0 + 0.5;
            (x - b.center_x).abs() > r || (y - b.center_y).abs() > r
        });
        if free {
            return Vec3::new(x, y, rng.gen_range(z_lo..z_hi));
        }
    }
}

fn coord(p: Vec3, axis: usize) -> f64 {
    [p.x, p.y, p.z][axis]
}

/// Does the open segment pass through the open interior of the box?
pub fn segment_hits_box(p: Vec3, q: Vec3, b: &Building) -> Option<f64> {
    let hw = b.width / 2.0;
    let lo = [b.center_x - hw, b.center_y - hw, 0.0];
    let hi = [b.center_x + hw, b.center_y + hw, b.height];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for a in 0..3 {
        let (pa, da) = (coord(p, a), coord(q, a) - coord(p, a));
        let (l, h) = (lo[a] + 1e-7, hi[a] - 1e-7);
        if da.abs() < 1e-15 {
            if pa <= l || pa >= h {
                return None;
            }
        } else {
            let (mut ta, mut tb) = ((l - pa) / da, (h - pa) / da);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
    }
    (t1 - t0 > 1e-12).then_some(t0)
}

pub fn segment_clear(p: Vec3, q: Vec3, layout: &CityLayout) -> bool {
    layout.buildings.iter().all(|b| segment_hits_box(p, q, b).is_none())
}

#[derive(Clone, Copy)]
struct Plane {
    axis: usize,
    coord: f64,
    sign: f64,
    /// Bounds of the rectangle on all three axes (the normal axis is ignored).
    lo: [f64; 3],
    hi: [f64; 3],
    eps: Complex64,
    te: bool,
}

fn permittivity(kind: MaterialKind, band: Band) -> Complex64 {
    let d = kind.at(band);
    Complex64::new(d.rel_permittivity, -d.conductivity / (2.0 * std::f64::consts::PI * band.carrier_hz() * EPS0))
}

fn planes(layout: &CityLayout, band: Band) -> Vec<Plane> {
    let side = layout.side_km * 1000.0;
    let mut out = vec![Plane {
        axis: 2,
        coord: 0.0,
        sign: 1.0,
        lo: [0.0, 0.0, 0.0],
        hi: [side, side, 0.0],
        eps: permittivity(MaterialKind::DryEarth, band),
        te: false,
    }];
    for b in &layout.buildings {
        let hw = b.width / 2.0;
        let (x0, x1, y0, y1) = (b.center_x - hw, b.center_x + hw, b.center_y - hw, b.center_y + hw);
        let eps = permittivity(b.material, band);
        let lo = [x0, y0, 0.0];
        let hi = [x1, y1, b.height];
        for (axis, c, s) in [(0, x1, 1.0), (0, x0, -1.0), (1, y1, 1.0), (1, y0, -1.0)] {
            out.push(Plane {
                axis,
                coord: c,
                sign: s,
                lo,
                hi,
                eps,
                te: true,
            });
        }
    }
    out
}

fn mirror(p: Vec3, pl: &Plane) -> Vec3 {
    let mut v = [p.x, p.y, p.z];
    v[pl.axis] = 2.0 * pl.coord - v[pl.axis];
    Vec3::new(v[0], v[1], v[2])
}

fn fresnel_magnitude(pl: &Plane, cos_t: f64) -> f64 {
    let sin2 = 1.0 - cos_t * cos_t;
    let root = (pl.eps - sin2).sqrt();
    if pl.te {
        ((cos_t - root) / (cos_t + root)).norm()
    } else {
        ((pl.eps * cos_t - root) / (pl.eps * cos_t + root)).norm()
    }
}

/// One specular path of the oracle: total length and received power for a
/// 30 dBm reference with isotropic elements.
#[derive(Debug, Clone, Copy)]
pub struct OraclePath {
    pub length_m: f64,
    pub power_dbm: f64,
    pub reflections: usize,
}

fn realise(seq: &[usize], pls: &[Plane], tx: Vec3, rx: Vec3, layout: &CityLayout, band: Band) -> Option<OraclePath> {
    let mut images = vec![tx];
    for &s in seq {
        images.push(mirror(*images.last().unwrap(), &pls[s]));
    }
    let k = seq.len();
    let mut pts = vec![Vec3::ZERO; k + 2];
    pts[0] = tx;
    pts[k + 1] = rx;
    let mut target = rx;
    for j in (1..=k).rev() {
        let pl = &pls[seq[j - 1]];
        let img = images[j];
        let (a, b) = (coord(target, pl.axis), coord(img, pl.axis));
        if (b - a).abs() < 1e-12 {
            return None;
        }
        let t = (pl.coord - a) / (b - a);
        if !(t > 0.0 && t < 1.0) {
            return None;
        }
        let p = target + (img - target) * t;
        for ax in 0..3 {
            if ax != pl.axis && !(coord(p, ax) >= pl.lo[ax] - 1e-9 && coord(p, ax) <= pl.hi[ax] + 1e-9) {
                return None;
            }
        }
        pts[j] = p;
        target = p;
    }
    for j in 1..=k {
        let pl = &pls[seq[j - 1]];
        for q in [pts[j - 1], pts[j + 1]] {
            if (coord(q, pl.axis) - pl.coord) * pl.sign <= 1e-9 {
                return None;
            }
        }
    }
    if !pts.windows(2).all(|w| segment_clear(w[0], w[1], layout)) {
        return None;
    }
    let length: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
    let lambda = C0 / band.carrier_hz();
    let mut amp = lambda / (4.0 * std::f64::consts::PI * length);
    for j in 1..=k {
        let pl = &pls[seq[j - 1]];
        let d = (pts[j] - pts[j - 1]).normalized();
        amp *= fresnel_magnitude(pl, coord(d, pl.axis).abs());
    }
    Some(OraclePath {
        length_m: length,
        power_dbm: 30.0 + 20.0 * amp.log10(),
        reflections: k,
    })
}

/// Every specular path with at most `max_reflections` bounces, by exhaustive
/// enumeration of surface sequences.
pub fn oracle_paths(layout: &CityLayout, tx: Vec3, rx: Vec3, band: Band, max_reflections: usize) -> Vec<OraclePath> {
    let pls = planes(layout, band);
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![vec![]];
    while let Some(seq) = stack.pop() {
        if let Some(p) = realise(&seq, &pls, tx, rx, layout, band) {
            out.push(p);
        }
        if seq.len() < max_reflections {
            for s in 0..pls.len() {
                if seq.last() != Some(&s) {
                    let mut next = seq.clone();
                    next.push(s);
                    stack.push(next);
                }
            }
        }
    }
    out.sort_by(|a, b| a.length_m.total_cmp(&b.length_m));
    out
}

/// Traced specular paths for the oracle comparison (no path budget).
pub fn traced_specular(layout: &CityLayout, tx: Vec3, rx: Vec3, band: Band, max_reflections: usize) -> Vec<PropagationPath> {
    let cfg = TraceConfig {
        max_paths: 1_000_000,
        ..TraceConfig::reflections_only(max_reflections)
    };
    let mut p = trace_paths(tx, rx, layout, band.carrier_hz(), &cfg).expect("trace");
    p.sort_by(|a, b| a.geometry.length_m.total_cmp(&b.geometry.length_m));
    p
}

/// `Ok(n)` with the number of matched paths, or a description of the first mismatch.
pub fn compare_with_oracle(traced: &[PropagationPath], oracle: &[OraclePath]) -> Result<usize, String> {
    if traced.len() != oracle.len() {
        return Err(format!(
            "traced {} paths, oracle {}: traced lengths {:?}, oracle lengths {:?}",
            traced.len(),
            oracle.len(),
            traced.iter().map(|p| p.geometry.length_m).collect::<Vec<_>>(),
            oracle.iter().map(|p| p.length_m).collect::<Vec<_>>()
        ));
    }
    for (t, o) in traced.iter().zip(oracle) {
        let dl = (t.geometry.length_m - o.length_m).abs();
        let dp = (t.power_dbm(30.0) - o.power_dbm).abs();
        if dl > 1e-6 || dp > 0.01 || t.geometry.n_reflections() != o.reflections {
            return Err(format!(
                "path mismatch: traced ({}, {} dBm, {} refl) vs oracle ({}, {} dBm, {} refl)",
                t.geometry.length_m,
                t.power_dbm(30.0),
                t.geometry.n_reflections(),
                o.length_m,
                o.power_dbm,
                o.reflections
            ));
        }
    }
    Ok(traced.len())
}

/// Random CIR with 1-5 taps and gains spread over many orders of magnitude.
pub fn random_cir(rng: &mut impl Rng, n_t: usize, n_r: usize) -> ChannelImpulseResponse {
    let n_taps = rng.gen_range(1..=5);
    let taps = (0..n_taps)
        .map(|k| Tap {
            delay_s: k as f64 * 1e-8,
            gains: (0..n_t * n_r)
                .map(|_| {
                    let scale = 10f64.powf(rng.gen_range(-8.0..0.0));
                    Complex64::new(rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale)
                })
                .collect(),
        })
        .collect();
    ChannelImpulseResponse {
        taps,
        n_t,
        n_r,
        carrier_hz: 8.2e9,
    }
}

/// Average interference power summed element by element.
pub fn brute_interference(sets: &[(ChannelImpulseResponse, f64, usize)], n_r: usize) -> f64 {
    let mut total = 0.0;
    for (cir, p_t, n_t) in sets {
        let mut e = 0.0;
        for tap in &cir.taps {
            for m in 0..cir.n_r {
                for n in 0..cir.n_t {
                    let h = tap.gains[m * cir.n_t + n];
                    e += h.re * h.re + h.im * h.im;
                }
            }
        }
        total += p_t / *n_t as f64 * e / n_r as f64;
    }
    total
}
