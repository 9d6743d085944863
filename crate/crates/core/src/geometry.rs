//! Minimal 3D vector and box primitives used by the tracer.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Margin (m) by which boxes are shrunk before segment tests, so grazing and
/// face-touching segments count as unobstructed.
pub const GEOM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Component along axis 0 (x), 1 (y) or 2 (z).
    pub fn axis(self, a: usize) -> f64 {
        match a {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn with_axis(mut self, a: usize, v: f64) -> Vec3 {
        match a {
            0 => self.x = v,
            1 => self.y = v,
            _ => self.z = v,
        }
        self
    }

    /// Azimuth (rad, CCW from +x) and elevation (rad above the xy-plane) of a direction.
    pub fn az_el(self) -> (f64, f64) {
        let n = self.norm();
        (self.y.atan2(self.x), (self.z / n).clamp(-1.0, 1.0).asin())
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, a: usize) -> &f64 {
        match a {
            0 => &self.x,
            1 => &self.y,
            _ => &self.z,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

/// Where a segment passes through the interior of a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxCrossing {
    /// Segment parameters of entry and exit, clipped to `[0, 1]`.
    pub t_in: f64,
    pub t_out: f64,
    /// Axis of the face crossed on entry, `None` when the segment starts inside.
    pub entry_axis: Option<usize>,
    /// Axis of the face crossed on exit, `None` when the segment ends inside.
    pub exit_axis: Option<usize>,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| p[a] > self.min[a] + GEOM_EPS && p[a] < self.max[a] - GEOM_EPS)
    }

    /// Slab test of the segment `p -> q` against the box interior (shrunk by
    /// [`GEOM_EPS`]). Touching or running along a face is not a crossing.
    pub fn crossing(&self, p: Vec3, q: Vec3) -> Option<BoxCrossing> {
        let d = q - p;
        let mut t_in = f64::NEG_INFINITY;
        let mut t_out = f64::INFINITY;
        let mut in_axis = None;
        let mut out_axis = None;
        for a in 0..3 {
            let lo = self.min[a] + GEOM_EPS;
            let hi = self.max[a] - GEOM_EPS;
            if d[a].abs() < 1e-15 {
                if p[a] <= lo || p[a] >= hi {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[a];
            let (t0, t1) = if inv > 0.0 {
                ((lo - p[a]) * inv, (hi - p[a]) * inv)
            } else {
                ((hi - p[a]) * inv, (lo - p[a]) * inv)
            };
            if t0 > t_in {
                t_in = t0;
                in_axis = Some(a);
            }
            if t1 < t_out {
                t_out = t1;
                out_axis = Some(a);
            }
        }
        let lo = t_in.max(0.0);
        let hi = t_out.min(1.0);
        if lo < hi {
            Some(BoxCrossing {
                t_in: lo,
                t_out: hi,
                entry_axis: if t_in >= 0.0 { in_axis } else { None },
                exit_axis: if t_out <= 1.0 { out_axis } else { None },
            })
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Aabb {
        Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn segment_through_box_is_a_crossing() {
        let c = unit_box()
            .crossing(Vec3::new(-1.0, 0.5, 0.5), Vec3::new(2.0, 0.5, 0.5))
            .unwrap();
        assert!((c.t_in - 1.0 / 3.0).abs() < 1e-6);
        assert!((c.t_out - 2.0 / 3.0).abs() < 1e-6);
        assert_eq!(c.entry_axis, Some(0));
        assert_eq!(c.exit_axis, Some(0));
    }

    #[test]
    fn grazing_segment_is_clear() {
        // runs along the top face
        assert!(unit_box()
            .crossing(Vec3::new(-1.0, 0.5, 1.0), Vec3::new(2.0, 0.5, 1.0))
            .is_none());
        // starts on a face and leaves
        assert!(unit_box()
            .crossing(Vec3::new(1.0, 0.5, 0.5), Vec3::new(3.0, 0.5, 0.9))
            .is_none());
    }

    #[test]
    fn segment_ending_short_of_box_is_clear() {
        assert!(unit_box()
            .crossing(Vec3::new(-3.0, 0.5, 0.5), Vec3::new(-0.1, 0.5, 0.5))
            .is_none());
    }

    #[test]
    fn az_el_of_axes() {
        let (az, el) = Vec3::Y.az_el();
        assert!((az - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(el.abs() < 1e-12);
        let (_, el) = Vec3::new(1.0, 0.0, 1.0).az_el();
        assert!((el - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }
}
