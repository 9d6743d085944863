//! Interaction coefficients: Fresnel reflection, slab transmission and
//! knife-edge diffraction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::band::wavelength;
use crate::material::Dielectric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    /// Electric field normal to the plane of incidence.
    Te,
    /// Electric field in the plane of incidence.
    Tm,
}

/// `sqrt(eps - sin^2 theta)` on the principal branch.
fn normal_wavenumber_ratio(eps: Complex64, incidence_rad: f64) -> Complex64 {
    let s = incidence_rad.sin();
    (eps - s * s).sqrt()
}

/// Fresnel reflection coefficient of a half-space with complex permittivity
/// `eps_r - j sigma / (omega eps_0)`; `incidence_rad` is measured from the normal.
pub fn reflection_coefficient(
    material: &Dielectric,
    carrier_hz: f64,
    incidence_rad: f64,
    polarization: Polarization,
) -> Complex64 {
    let eps = material.complex_permittivity(carrier_hz);
    fresnel_reflection(eps, incidence_rad, polarization)
}

fn fresnel_reflection(eps: Complex64, incidence_rad: f64, polarization: Polarization) -> Complex64 {
    let c = incidence_rad.cos();
    let root = normal_wavenumber_ratio(eps, incidence_rad);
    match polarization {
        Polarization::Te => (c - root) / (c + root),
        Polarization::Tm => (eps * c - root) / (eps * c + root),
    }
}

/// Field transmission coefficient of a homogeneous slab of `thickness_m`
/// surrounded by air, including the internal multiple reflections.
pub fn slab_transmission(
    material: &Dielectric,
    carrier_hz: f64,
    thickness_m: f64,
    incidence_rad: f64,
    polarization: Polarization,
) -> Complex64 {
    let eps = material.complex_permittivity(carrier_hz);
    let r = fresnel_reflection(eps, incidence_rad, polarization);
    let k0 = 2.0 * std::f64::consts::PI / wavelength(carrier_hz);
    let q = normal_wavenumber_ratio(eps, incidence_rad) * (k0 * thickness_m);
    let j = Complex64::i();
    let r2 = r * r;
    (Complex64::new(1.0, 0.0) - r2) * (-j * q).exp()
        / (Complex64::new(1.0, 0.0) - r2 * (-j * q * 2.0).exp())
}

/// Fresnel integrals `(C(x), S(x))` with kernel `cos/sin(pi t^2 / 2)`.
pub fn fresnel_integrals(x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-15;
    const MAX_IT: usize = 200;
    const X_MIN: f64 = 1.5;
    let ax = x.abs();
    let (c, s) = if ax < 1e-150 {
        (ax, 0.0)
    } else if ax <= X_MIN {
        // power series, alternating between the cosine and sine sums
        let fact = std::f64::consts::FRAC_PI_2 * ax * ax;
        let mut sum_c = ax;
        let mut sum_s = 0.0;
        let mut sum = 0.0;
        let mut sign = 1.0;
        let mut term = ax;
        let mut odd = true;
        let mut n = 3.0;
        for k in 1..=MAX_IT {
            term *= fact / k as f64;
            sum += sign * term / n;
            let test = sum.abs() * EPS;
            if odd {
                sign = -sign;
                sum_s = sum;
                sum = sum_c;
            } else {
                sum_c = sum;
                sum = sum_s;
            }
            if term < test {
                break;
            }
            odd = !odd;
            n += 2.0;
        }
        (sum_c, sum_s)
    } else {
        // complementary error function by modified Lentz continued fraction
        let pix2 = std::f64::consts::PI * ax * ax;
        let mut b = Complex64::new(1.0, -pix2);
        let mut cc = Complex64::new(1e300, 0.0);
        let mut d = Complex64::new(1.0, 0.0) / b;
        let mut h = d;
        let mut n = -1.0;
        for _ in 2..=MAX_IT {
            n += 2.0;
            let a = -n * (n + 1.0);
            b += Complex64::new(4.0, 0.0);
            d = Complex64::new(1.0, 0.0) / (d * a + b);
            cc = b + cc.inv() * a;
            let del = cc * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < EPS {
                break;
            }
        }
        h *= Complex64::new(ax, -ax);
        let cs = Complex64::new(0.5, 0.5)
            * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, 0.5 * pix2) * h);
        (cs.re, cs.im)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

/// Single knife-edge loss (dB) from the exact Fresnel-integral solution.
/// Positive `nu` means the edge obstructs the direct ray.
pub fn knife_edge_loss_db(nu: f64) -> f64 {
    let (c, s) = fresnel_integrals(nu);
    let field_sq = 0.5 * ((0.5 - c).powi(2) + (0.5 - s).powi(2));
    -10.0 * field_sq.log10()
}

/// Fresnel–Kirchhoff parameter from the path excess `d1 + d2 - d` (m).
/// Shadowed geometry gives a positive value.
pub fn fresnel_parameter(excess_m: f64, carrier_hz: f64, shadowed: bool) -> f64 {
    let nu = 2.0 * (excess_m.max(0.0) / wavelength(carrier_hz)).sqrt();
    if shadowed {
        nu
    } else {
        -nu
    }
}

/// Knife-edge diffraction loss (dB) of an edge point `edge` between `tx` and
/// `rx`; `shadowed` says whether the edge's obstacle blocks the direct ray.
pub fn diffraction_loss(
    edge: crate::geometry::Vec3,
    tx: crate::geometry::Vec3,
    rx: crate::geometry::Vec3,
    carrier_hz: f64,
    shadowed: bool,
) -> f64 {
    let excess = tx.distance(edge) + edge.distance(rx) - tx.distance(rx);
    knife_edge_loss_db(fresnel_parameter(excess, carrier_hz, shadowed))
}
