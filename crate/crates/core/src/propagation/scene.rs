//! Static description of a city as reflecting surfaces, diffracting edges and
//! a uniform grid of buildings for segment queries.

use crate::city::CityLayout;
use crate::geometry::{Aabb, BoxCrossing, Vec3, GEOM_EPS};
use crate::material::MaterialKind;
use crate::propagation::em::Polarization;

/// Tolerance for a point to count as lying on a surface rectangle.
pub const RECT_TOL: f64 = 1e-9;

/// The two in-plane axes of a surface whose normal lies along `axis`.
pub fn plane_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Ground,
    /// Face `face` (0: +x, 1: -x, 2: +y, 3: -y) of a building.
    Wall { building: usize, face: usize },
}

/// Axis-aligned planar rectangle with an outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surface {
    pub kind: SurfaceKind,
    /// Normal axis.
    pub axis: usize,
    pub coord: f64,
    /// Direction of the outward normal along `axis`.
    pub sign: f64,
    /// Rectangle extent along `plane_axes(axis)`.
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub material: MaterialKind,
}

impl Surface {
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.sign * (p[self.axis] - self.coord)
    }

    pub fn normal(&self) -> Vec3 {
        Vec3::ZERO.with_axis(self.axis, self.sign)
    }

    pub fn mirror(&self, p: Vec3) -> Vec3 {
        p.with_axis(self.axis, 2.0 * self.coord - p[self.axis])
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let [a, b] = plane_axes(self.axis);
        p[a] >= self.lo[0] - RECT_TOL
            && p[a] <= self.hi[0] + RECT_TOL
            && p[b] >= self.lo[1] - RECT_TOL
            && p[b] <= self.hi[1] + RECT_TOL
    }

    /// Corners in cyclic order.
    pub fn vertices(&self) -> [Vec3; 4] {
        let [a, b] = plane_axes(self.axis);
        let base = Vec3::ZERO.with_axis(self.axis, self.coord);
        let at = |u: f64, v: f64| base.with_axis(a, u).with_axis(b, v);
        [
            at(self.lo[0], self.lo[1]),
            at(self.hi[0], self.lo[1]),
            at(self.hi[0], self.hi[1]),
            at(self.lo[0], self.hi[1]),
        ]
    }

    pub fn polarization(&self) -> Polarization {
        match self.kind {
            SurfaceKind::Ground => Polarization::Tm,
            SurfaceKind::Wall { .. } => Polarization::Te,
        }
    }

    pub fn building(&self) -> Option<usize> {
        match self.kind {
            SurfaceKind::Ground => None,
            SurfaceKind::Wall { building, .. } => Some(building),
        }
    }
}

/// Straight building edge, either a roof edge or a vertical corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: Vec3,
    pub b: Vec3,
    pub building: usize,
}

/// One building interior crossed by a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub building: usize,
    pub hit: BoxCrossing,
}

#[derive(Debug, Clone)]
struct Cell {
    buildings: Vec<u32>,
    max_height: f64,
}

/// Surfaces, edges and spatial index of a [`CityLayout`].
#[derive(Debug, Clone)]
pub struct Scene {
    pub side_m: f64,
    pub surfaces: Vec<Surface>,
    pub edges: Vec<Edge>,
    pub boxes: Vec<Aabb>,
    pub materials: Vec<MaterialKind>,
    /// For every surface, the surfaces with at least one corner strictly in front of it.
    pub facing: Vec<Vec<u32>>,
    origin: [f64; 2],
    cell_size: f64,
    dims: [usize; 2],
    cells: Vec<Cell>,
}

impl Scene {
    pub fn new(layout: &CityLayout) -> Scene {
        let side_m = layout.side_m();
        let mut surfaces = vec![Surface {
            kind: SurfaceKind::Ground,
            axis: 2,
            coord: 0.0,
            sign: 1.0,
            lo: [0.0, 0.0],
            hi: [side_m, side_m],
            material: MaterialKind::DryEarth,
        }];
        let mut edges = Vec::with_capacity(8 * layout.buildings.len());
        let mut boxes = Vec::with_capacity(layout.buildings.len());
        let mut materials = Vec::with_capacity(layout.buildings.len());
        for (b, bld) in layout.buildings.iter().enumerate() {
            let bb = bld.bounds();
            let (x0, y0, x1, y1, h) = (bb.min.x, bb.min.y, bb.max.x, bb.max.y, bb.max.z);
            let wall = |face: usize, axis: usize, coord: f64, sign: f64, lo: [f64; 2], hi: [f64; 2]| Surface {
                kind: SurfaceKind::Wall { building: b, face },
                axis,
                coord,
                sign,
                lo,
                hi,
                material: bld.material,
            };
            surfaces.push(wall(0, 0, x1, 1.0, [y0, 0.0], [y1, h]));
            surfaces.push(wall(1, 0, x0, -1.0, [y0, 0.0], [y1, h]));
            surfaces.push(wall(2, 1, y1, 1.0, [x0, 0.0], [x1, h]));
            surfaces.push(wall(3, 1, y0, -1.0, [x0, 0.0], [x1, h]));
            let c = [
                Vec3::new(x0, y0, 0.0),
                Vec3::new(x1, y0, 0.0),
                Vec3::new(x1, y1, 0.0),
                Vec3::new(x0, y1, 0.0),
            ];
            let up = Vec3::new(0.0, 0.0, h);
            for k in 0..4 {
                edges.push(Edge {
                    a: c[k] + up,
                    b: c[(k + 1) % 4] + up,
                    building: b,
                });
            }
            for corner in c {
                edges.push(Edge {
                    a: corner,
                    b: corner + up,
                    building: b,
                });
            }
            boxes.push(bb);
            materials.push(bld.material);
        }

        let facing = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| {
                surfaces
                    .iter()
                    .enumerate()
                    .filter(|&(j, o)| {
                        j != i && o.vertices().iter().any(|&v| s.signed_distance(v) > GEOM_EPS)
                    })
                    .map(|(j, _)| j as u32)
                    .collect()
            })
            .collect();

        let mut lo = [0.0f64, 0.0];
        let mut hi = [side_m, side_m];
        for bb in &boxes {
            lo = [lo[0].min(bb.min.x), lo[1].min(bb.min.y)];
            hi = [hi[0].max(bb.max.x), hi[1].max(bb.max.y)];
        }
        let n = (layout.buildings.len().max(1) as f64).sqrt().ceil();
        let cell_size = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / n).max(1.0);
        let dims = [
            (((hi[0] - lo[0]) / cell_size).ceil() as usize).max(1),
            (((hi[1] - lo[1]) / cell_size).ceil() as usize).max(1),
        ];
        let mut cells = vec![
            Cell {
                buildings: Vec::new(),
                max_height: 0.0,
            };
            dims[0] * dims[1]
        ];
        for (b, bb) in boxes.iter().enumerate() {
            let i0 = (((bb.min.x - lo[0]) / cell_size).floor() as usize).min(dims[0] - 1);
            let i1 = (((bb.max.x - lo[0]) / cell_size).floor() as usize).min(dims[0] - 1);
            let j0 = (((bb.min.y - lo[1]) / cell_size).floor() as usize).min(dims[1] - 1);
            let j1 = (((bb.max.y - lo[1]) / cell_size).floor() as usize).min(dims[1] - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let cell = &mut cells[j * dims[0] + i];
                    cell.buildings.push(b as u32);
                    cell.max_height = cell.max_height.max(bb.max.z);
                }
            }
        }

        Scene {
            side_m,
            surfaces,
            edges,
            boxes,
            materials,
            facing,
            origin: lo,
            cell_size,
            dims,
            cells,
        }
    }

    pub fn n_buildings(&self) -> usize {
        self.boxes.len()
    }

    /// Visit the grid cells touched by the horizontal projection of `p -> q`
    /// with the segment-parameter interval spent in each. Stops when `f` returns false.
    fn walk_cells(&self, p: Vec3, q: Vec3, mut f: impl FnMut(&Cell, f64, f64) -> bool) {
        let d = [q.x - p.x, q.y - p.y];
        let s = [p.x, p.y];
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for a in 0..2 {
            let lo = self.origin[a];
            let hi = self.origin[a] + self.dims[a] as f64 * self.cell_size;
            if d[a].abs() < 1e-15 {
                if s[a] < lo || s[a] > hi {
                    return;
                }
            } else {
                let (mut ta, mut tb) = ((lo - s[a]) / d[a], (hi - s[a]) / d[a]);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
            }
        }
        if t0 > t1 {
            return;
        }
        let mut idx = [0usize; 2];
        let mut step = [0isize; 2];
        let mut t_next = [f64::INFINITY; 2];
        let mut t_delta = [f64::INFINITY; 2];
        for a in 0..2 {
            let start = s[a] + d[a] * t0 - self.origin[a];
            let i = ((start / self.cell_size).floor().max(0.0) as usize).min(self.dims[a] - 1);
            idx[a] = i;
            if d[a] > 1e-15 {
                step[a] = 1;
                t_next[a] = ((i + 1) as f64 * self.cell_size - (s[a] - self.origin[a])) / d[a];
                t_delta[a] = self.cell_size / d[a];
            } else if d[a] < -1e-15 {
                step[a] = -1;
                t_next[a] = (i as f64 * self.cell_size - (s[a] - self.origin[a])) / d[a];
                t_delta[a] = -self.cell_size / d[a];
            }
        }
        let mut t = t0;
        loop {
            let t_exit = t_next[0].min(t_next[1]).min(t1);
            if !f(&self.cells[idx[1] * self.dims[0] + idx[0]], t, t_exit) {
                return;
            }
            if t_exit >= t1 {
                return;
            }
            let a = if t_next[0] < t_next[1] { 0 } else { 1 };
            let next = idx[a] as isize + step[a];
            if next < 0 || next >= self.dims[a] as isize {
                return;
            }
            idx[a] = next as usize;
            t = t_next[a];
            t_next[a] += t_delta[a];
        }
    }

    /// Buildings whose interior the segment `p -> q` crosses, in order of
    /// entry. Returns `None` as soon as more than `limit` are found.
    pub fn crossings(&self, p: Vec3, q: Vec3, limit: usize) -> Option<Vec<Crossing>> {
        let mut found: Vec<Crossing> = Vec::new();
        let mut over = false;
        let dz = q.z - p.z;
        self.walk_cells(p, q, |cell, ta, tb| {
            let zmin = (p.z + dz * ta).min(p.z + dz * tb);
            if zmin >= cell.max_height {
                return true;
            }
            for &b in &cell.buildings {
                let b = b as usize;
                if found.iter().any(|c| c.building == b) {
                    continue;
                }
                if let Some(hit) = self.boxes[b].crossing(p, q) {
                    found.push(Crossing { building: b, hit });
                    if found.len() > limit {
                        over = true;
                        return false;
                    }
                }
            }
            true
        });
        if over {
            return None;
        }
        found.sort_by(|a, b| {
            a.hit
                .t_in
                .total_cmp(&b.hit.t_in)
                .then(a.building.cmp(&b.building))
        });
        Some(found)
    }

    pub fn is_clear(&self, p: Vec3, q: Vec3) -> bool {
        matches!(self.crossings(p, q, 0), Some(v) if v.is_empty())
    }

    /// All crossings without a limit.
    pub fn all_crossings(&self, p: Vec3, q: Vec3) -> Vec<Crossing> {
        self.crossings(p, q, usize::MAX).unwrap_or_default()
    }

    /// Cosine of the incidence angle of direction `d` on a box face normal to
    /// `axis`; without an axis the dominant component is used.
    pub fn face_cosine(d: Vec3, axis: Option<usize>) -> f64 {
        let n = d.norm();
        match axis {
            Some(a) => (d[a].abs() / n).clamp(0.0, 1.0),
            None => {
                let m = d.x.abs().max(d.y.abs()).max(d.z.abs());
                (m / n).clamp(0.0, 1.0)
            }
        }
    }

    /// Surface id of wall `face` of building `b`.
    pub fn wall_id(b: usize, face: usize) -> usize {
        1 + 4 * b + face
    }
}
