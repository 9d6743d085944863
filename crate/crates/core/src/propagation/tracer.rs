//! Deterministic image-method ray tracer.
//!
//! Geometry is band independent: [`TxTracer`] enumerates [`RayGeometry`]
//! values once per transmitter position and receiver, and
//! [`path_response`] turns a ray into amplitude, phase and delay at a carrier.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::band::{wavelength, Band, SPEED_OF_LIGHT};
use crate::city::CityLayout;
use crate::error::{Error, Result};
use crate::geometry::{Vec3, GEOM_EPS};
use crate::material::MaterialKind;
use crate::propagation::em::{knife_edge_loss_db, reflection_coefficient, slab_transmission, Polarization};
use crate::propagation::scene::{Crossing, Scene, Surface};

/// Search budget of the tracer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    pub max_reflections: usize,
    pub max_diffractions: usize,
    pub max_transmissions: usize,
    pub max_paths: usize,
    pub power_threshold_dbm: f64,
    /// Transmit power used to express path gains as received power (dBm).
    pub reference_power_dbm: f64,
    /// Wall thickness of the slab model (m).
    pub slab_thickness_m: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            max_reflections: 3,
            max_diffractions: 1,
            max_transmissions: 1,
            max_paths: 25,
            power_threshold_dbm: -250.0,
            reference_power_dbm: 30.0,
            slab_thickness_m: 0.3,
        }
    }
}

impl TraceConfig {
    /// Six reflections, one diffraction and one transmission per path.
    pub fn full() -> Self {
        TraceConfig {
            max_reflections: 6,
            ..TraceConfig::default()
        }
    }

    /// Line of sight and reflections only.
    pub fn reflections_only(max_reflections: usize) -> Self {
        TraceConfig {
            max_reflections,
            max_diffractions: 0,
            max_transmissions: 0,
            ..TraceConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_paths < 1 {
            return Err(Error::InvalidParameter("max_paths must be at least 1".into()));
        }
        if self.max_diffractions > 1 {
            return Err(Error::InvalidParameter(
                "max_diffractions: at most one diffraction per path is supported".into(),
            ));
        }
        if self.max_reflections > 8 {
            return Err(Error::InvalidParameter(
                "max_reflections: at most 8 reflections are supported".into(),
            ));
        }
        if !(self.slab_thickness_m > 0.0) || !self.slab_thickness_m.is_finite() {
            return Err(Error::InvalidParameter("slab_thickness_m must be positive".into()));
        }
        if self.power_threshold_dbm.is_nan() || !self.reference_power_dbm.is_finite() {
            return Err(Error::InvalidParameter("power levels must be numbers".into()));
        }
        Ok(())
    }
}

/// One interaction along a ray, in travel order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interaction {
    Reflection {
        surface: usize,
        material: MaterialKind,
        polarization: Polarization,
        incidence_rad: f64,
    },
    Diffraction {
        edge: usize,
        /// `d1 + d2 - d` of the edge point relative to the direct segment.
        excess_m: f64,
    },
    Transmission {
        building: usize,
        material: MaterialKind,
        thickness_m: f64,
        entry: (Polarization, f64),
        exit: (Polarization, f64),
    },
}

impl Interaction {
    fn key(&self) -> (u8, usize) {
        match *self {
            Interaction::Reflection { surface, .. } => (0, surface),
            Interaction::Diffraction { edge, .. } => (1, edge),
            Interaction::Transmission { building, .. } => (2, building),
        }
    }

    /// Complex field coefficient of the interaction at `carrier_hz`.
    pub fn coefficient(&self, carrier_hz: f64) -> Result<Complex64> {
        Ok(match *self {
            Interaction::Reflection {
                material,
                polarization,
                incidence_rad,
                ..
            } => {
                let d = material.at(Band::from_hz(carrier_hz)?);
                reflection_coefficient(&d, carrier_hz, incidence_rad, polarization)
            }
            Interaction::Diffraction { excess_m, .. } => {
                let nu = 2.0 * (excess_m.max(0.0) / wavelength(carrier_hz)).sqrt();
                Complex64::new(10f64.powf(-knife_edge_loss_db(nu) / 20.0), 0.0)
            }
            Interaction::Transmission {
                material,
                thickness_m,
                entry,
                exit,
                ..
            } => {
                let d = material.at(Band::from_hz(carrier_hz)?);
                let t_in = slab_transmission(&d, carrier_hz, thickness_m, entry.1, entry.0);
                let t_out = slab_transmission(&d, carrier_hz, thickness_m, exit.1, exit.0);
                Complex64::new((t_in.norm() * t_out.norm()).sqrt(), 0.0)
            }
        })
    }
}

/// Band-independent geometry of one propagation path.
#[derive(Debug, Clone, PartialEq)]
pub struct RayGeometry {
    /// Transmitter, every reflection and diffraction point, receiver.
    pub vertices: Vec<Vec3>,
    pub interactions: Vec<Interaction>,
    pub length_m: f64,
    /// Unit departure direction at the transmitter.
    pub aod: Vec3,
    /// Unit arrival direction at the receiver, pointing back along the ray.
    pub aoa: Vec3,
}

impl RayGeometry {
    fn new(vertices: Vec<Vec3>, interactions: Vec<Interaction>) -> RayGeometry {
        let length_m = vertices.windows(2).map(|w| w[0].distance(w[1])).sum();
        let n = vertices.len();
        let aod = (vertices[1] - vertices[0]).normalized();
        let aoa = (vertices[n - 2] - vertices[n - 1]).normalized();
        RayGeometry {
            vertices,
            interactions,
            length_m,
            aod,
            aoa,
        }
    }

    pub fn n_reflections(&self) -> usize {
        self.count(|i| matches!(i, Interaction::Reflection { .. }))
    }

    pub fn n_diffractions(&self) -> usize {
        self.count(|i| matches!(i, Interaction::Diffraction { .. }))
    }

    pub fn n_transmissions(&self) -> usize {
        self.count(|i| matches!(i, Interaction::Transmission { .. }))
    }

    fn count(&self, f: impl Fn(&Interaction) -> bool) -> usize {
        self.interactions.iter().filter(|i| f(i)).count()
    }

    pub fn is_los(&self) -> bool {
        self.interactions.is_empty()
    }

    fn interaction_keys(&self) -> Vec<(u8, usize)> {
        self.interactions.iter().map(Interaction::key).collect()
    }
}

/// Amplitude, phase and delay of a ray at one carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathResponse {
    pub amplitude: f64,
    pub phase_rad: f64,
    pub delay_s: f64,
}

/// A traced ray together with its response at the traced carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    pub geometry: RayGeometry,
    pub carrier_hz: f64,
    pub delay_s: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
}

impl PropagationPath {
    pub fn power_dbm(&self, reference_power_dbm: f64) -> f64 {
        reference_power_dbm + 20.0 * self.amplitude.log10()
    }
}

/// Response of `ray` with element gains (dBi) at its departure and arrival
/// directions, using the per-band material constants.
pub fn path_response(ray: &RayGeometry, carrier_hz: f64, tx_gain_dbi: f64, rx_gain_dbi: f64) -> Result<PathResponse> {
    path_response_with(ray, carrier_hz, tx_gain_dbi, rx_gain_dbi, |i| i.coefficient(carrier_hz))
}

/// [`path_response`] with caller-supplied interaction coefficients.
pub fn path_response_with(
    ray: &RayGeometry,
    carrier_hz: f64,
    tx_gain_dbi: f64,
    rx_gain_dbi: f64,
    coefficient: impl Fn(&Interaction) -> Result<Complex64>,
) -> Result<PathResponse> {
    if !(ray.length_m > 0.0) {
        return Err(Error::ZeroLengthPath);
    }
    let lambda = wavelength(carrier_hz);
    let gain = 10f64.powf((tx_gain_dbi + rx_gain_dbi) / 20.0);
    let mut amplitude = gain * lambda / (4.0 * std::f64::consts::PI * ray.length_m);
    let mut phase = -2.0 * std::f64::consts::PI * ray.length_m / lambda;
    for i in &ray.interactions {
        let c = coefficient(i)?;
        amplitude *= c.norm();
        if let Interaction::Reflection { .. } = i {
            phase += c.arg();
        }
    }
    Ok(PathResponse {
        amplitude,
        phase_rad: phase,
        delay_s: ray.length_m / SPEED_OF_LIGHT,
    })
}

/// `{A, psi, tau}` of a traced path for other element gains.
pub fn path_amplitude(
    path: &PropagationPath,
    carrier_hz: f64,
    tx_gain_dbi: f64,
    rx_gain_dbi: f64,
) -> Result<PathResponse> {
    path_response(&path.geometry, carrier_hz, tx_gain_dbi, rx_gain_dbi)
}

/// Indices of `rays` kept by the budget: sorted by descending amplitude,
/// then ascending length, then interaction sequence; thresholded and truncated.
pub fn rank_paths(rays: &[RayGeometry], responses: &[PathResponse], config: &TraceConfig) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rays.len())
        .filter(|&i| {
            let a = responses[i].amplitude;
            a > 0.0 && config.reference_power_dbm + 20.0 * a.log10() >= config.power_threshold_dbm
        })
        .collect();
    idx.sort_by(|&a, &b| compare_paths(&rays[a], &responses[a], &rays[b], &responses[b]));
    idx.truncate(config.max_paths);
    idx
}

fn compare_paths(ra: &RayGeometry, pa: &PathResponse, rb: &RayGeometry, pb: &PathResponse) -> Ordering {
    pb.amplitude
        .total_cmp(&pa.amplitude)
        .then(ra.length_m.total_cmp(&rb.length_m))
        .then_with(|| ra.interaction_keys().cmp(&rb.interaction_keys()))
}

const ROOT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct ImageNode {
    parent: u32,
    surface: u32,
    image: Vec3,
}

/// Mirror images of a transmitter over every surface sequence that can carry
/// a specular path, pruned by facing and beam tests that never drop a valid path.
#[derive(Debug, Clone)]
pub struct ImageTree {
    nodes: Vec<ImageNode>,
    by_surface: Vec<Vec<u32>>,
}

impl ImageTree {
    pub fn build(scene: &Scene, tx: Vec3, max_reflections: usize) -> ImageTree {
        let mut nodes = Vec::new();
        if max_reflections > 0 {
            for (s, surf) in scene.surfaces.iter().enumerate() {
                if surf.signed_distance(tx) > GEOM_EPS {
                    nodes.push(ImageNode {
                        parent: ROOT,
                        surface: s as u32,
                        image: surf.mirror(tx),
                    });
                }
            }
        }
        let mut level = 0..nodes.len();
        for _ in 1..max_reflections {
            let start = nodes.len();
            for n in level.clone() {
                let node = nodes[n];
                let last = &scene.surfaces[node.surface as usize];
                let planes = beam_planes(node.image, last);
                for &s in &scene.facing[node.surface as usize] {
                    let surf = &scene.surfaces[s as usize];
                    if surf.signed_distance(node.image) <= GEOM_EPS || outside_beam(&planes, node.image, surf) {
                        continue;
                    }
                    nodes.push(ImageNode {
                        parent: n as u32,
                        surface: s,
                        image: surf.mirror(node.image),
                    });
                }
            }
            level = start..nodes.len();
        }
        let mut by_surface = vec![Vec::new(); scene.surfaces.len()];
        for (i, n) in nodes.iter().enumerate() {
            by_surface[n.surface as usize].push(i as u32);
        }
        ImageTree { nodes, by_surface }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Inward normals of the four side planes of the pyramid from `apex` through `surface`.
fn beam_planes(apex: Vec3, surface: &Surface) -> [Vec3; 4] {
    let v = surface.vertices();
    let centroid = (v[0] + v[1] + v[2] + v[3]) * 0.25;
    let mut planes = [Vec3::ZERO; 4];
    for i in 0..4 {
        let n = (v[i] - apex).cross(v[(i + 1) % 4] - apex);
        let n = if (centroid - apex).dot(n) < 0.0 { -n } else { n };
        let len = n.norm();
        planes[i] = if len > 0.0 { n / len } else { Vec3::ZERO };
    }
    planes
}

fn outside_beam(planes: &[Vec3; 4], apex: Vec3, surface: &Surface) -> bool {
    let v = surface.vertices();
    planes
        .iter()
        .any(|n| v.iter().all(|&w| (w - apex).dot(*n) < -1e-7))
}

/// Ray enumeration from one fixed transmitter.
#[derive(Debug, Clone)]
pub struct TxTracer<'s> {
    scene: &'s Scene,
    tx: Vec3,
    tree: ImageTree,
    config: TraceConfig,
}

impl<'s> TxTracer<'s> {
    pub fn new(scene: &'s Scene, tx: Vec3, config: TraceConfig) -> TxTracer<'s> {
        let tree = ImageTree::build(scene, tx, config.max_reflections);
        TxTracer {
            scene,
            tx,
            tree,
            config,
        }
    }

    pub fn tx(&self) -> Vec3 {
        self.tx
    }

    pub fn image_count(&self) -> usize {
        self.tree.len()
    }

    /// Every geometrically valid ray to `rx`, unranked.
    pub fn rays_to(&self, rx: Vec3) -> Vec<RayGeometry> {
        let mut out = Vec::new();
        if self.tx.distance(rx) <= GEOM_EPS {
            return out;
        }
        let direct = self.scene.all_crossings(self.tx, rx);
        if direct.len() <= self.config.max_transmissions {
            out.push(self.assemble(&[self.tx, rx], &[], vec![direct.clone()]));
        }
        self.reflection_rays(rx, &mut out);
        if self.config.max_diffractions > 0 && !direct.is_empty() {
            self.diffraction_rays(rx, &direct, &mut out);
        }
        out
    }

    fn reflection_rays(&self, rx: Vec3, out: &mut Vec<RayGeometry>) {
        let surfaces = &self.scene.surfaces;
        let mut chain: Vec<(usize, Vec3)> = Vec::with_capacity(self.config.max_reflections);
        for (s, nodes) in self.tree.by_surface.iter().enumerate() {
            if nodes.is_empty() || surfaces[s].signed_distance(rx) <= GEOM_EPS {
                continue;
            }
            'node: for &n in nodes {
                chain.clear();
                let mut target = rx;
                let mut cur = n;
                loop {
                    let node = self.tree.nodes[cur as usize];
                    let surf = &surfaces[node.surface as usize];
                    let dt = surf.signed_distance(target);
                    if dt <= GEOM_EPS {
                        continue 'node;
                    }
                    let di = surf.signed_distance(node.image);
                    let p = node.image + (target - node.image) * (di / (di - dt));
                    if !surf.contains(p) {
                        continue 'node;
                    }
                    chain.push((node.surface as usize, p));
                    target = p;
                    if node.parent == ROOT {
                        break;
                    }
                    cur = node.parent;
                }
                chain.reverse();
                let mut points = Vec::with_capacity(chain.len() + 2);
                points.push(self.tx);
                points.extend(chain.iter().map(|&(_, p)| p));
                points.push(rx);
                for (k, &(s, _)) in chain.iter().enumerate() {
                    if surfaces[s].signed_distance(points[k]) <= GEOM_EPS {
                        continue 'node;
                    }
                }
                let Some(crossings) = self.validate_segments(&points, None) else {
                    continue;
                };
                let bends: Vec<Interaction> = chain
                    .iter()
                    .enumerate()
                    .map(|(k, &(s, p))| {
                        let surf = &surfaces[s];
                        let d = (p - points[k]).normalized();
                        Interaction::Reflection {
                            surface: s,
                            material: surf.material,
                            polarization: surf.polarization(),
                            incidence_rad: d.dot(surf.normal()).abs().clamp(0.0, 1.0).acos(),
                        }
                    })
                    .collect();
                out.push(self.assemble(&points, &bends, crossings));
            }
        }
    }

    fn diffraction_rays(&self, rx: Vec3, direct: &[Crossing], out: &mut Vec<RayGeometry>) {
        let tx = self.tx;
        let direct_len = tx.distance(rx);
        for c in direct {
            for e in 8 * c.building..8 * c.building + 8 {
                let edge = self.scene.edges[e];
                let axis = edge.b - edge.a;
                let len = axis.norm();
                let u = axis / len;
                let s_tx = (tx - edge.a).dot(u);
                let s_rx = (rx - edge.a).dot(u);
                let rho_tx = ((tx - edge.a) - u * s_tx).norm();
                let rho_rx = ((rx - edge.a) - u * s_rx).norm();
                if rho_tx + rho_rx <= GEOM_EPS {
                    continue;
                }
                let t = s_tx + (s_rx - s_tx) * rho_tx / (rho_tx + rho_rx);
                if t <= GEOM_EPS || t >= len - GEOM_EPS {
                    continue;
                }
                let d = edge.a + u * t;
                if d.distance(tx) <= GEOM_EPS || d.distance(rx) <= GEOM_EPS {
                    continue;
                }
                let points = [tx, d, rx];
                let Some(crossings) = self.validate_segments(&points, Some(edge.building)) else {
                    continue;
                };
                let excess = tx.distance(d) + d.distance(rx) - direct_len;
                let bend = Interaction::Diffraction { edge: e, excess_m: excess };
                out.push(self.assemble(&points, &[bend], crossings));
            }
        }
    }

    /// Building crossings of every segment within the transmission budget;
    /// `None` if the budget is exceeded or `forbidden` is crossed.
    fn validate_segments(&self, points: &[Vec3], forbidden: Option<usize>) -> Option<Vec<Vec<Crossing>>> {
        let mut budget = self.config.max_transmissions;
        let mut all = Vec::with_capacity(points.len() - 1);
        for w in points.windows(2) {
            let cs = self.scene.crossings(w[0], w[1], budget)?;
            if forbidden.is_some_and(|b| cs.iter().any(|c| c.building == b)) {
                return None;
            }
            budget -= cs.len();
            all.push(cs);
        }
        Some(all)
    }

    fn assemble(&self, points: &[Vec3], bends: &[Interaction], crossings: Vec<Vec<Crossing>>) -> RayGeometry {
        let mut interactions = Vec::with_capacity(bends.len());
        for (k, cs) in crossings.iter().enumerate() {
            let d = points[k + 1] - points[k];
            for c in cs {
                let pol = |axis: Option<usize>| {
                    if axis == Some(2) {
                        Polarization::Tm
                    } else {
                        Polarization::Te
                    }
                };
                interactions.push(Interaction::Transmission {
                    building: c.building,
                    material: self.scene.materials[c.building],
                    thickness_m: self.config.slab_thickness_m,
                    entry: (pol(c.hit.entry_axis), Scene::face_cosine(d, c.hit.entry_axis).acos()),
                    exit: (pol(c.hit.exit_axis), Scene::face_cosine(d, c.hit.exit_axis).acos()),
                });
            }
            if k < bends.len() {
                interactions.push(bends[k]);
            }
        }
        RayGeometry::new(points.to_vec(), interactions)
    }
}

/// Result of a direct visibility query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineOfSight {
    pub blocked: bool,
    pub first_blocker: Option<usize>,
}

/// Whether the open segment `tx -> rx` passes through any building.
pub fn line_of_sight(tx: Vec3, rx: Vec3, layout: &CityLayout) -> LineOfSight {
    scene_line_of_sight(&Scene::new(layout), tx, rx)
}

pub fn scene_line_of_sight(scene: &Scene, tx: Vec3, rx: Vec3) -> LineOfSight {
    let first_blocker = scene.all_crossings(tx, rx).first().map(|c| c.building);
    LineOfSight {
        blocked: first_blocker.is_some(),
        first_blocker,
    }
}

/// Trace `tx -> rx` with isotropic elements and return the ranked paths.
pub fn trace_paths(
    tx: Vec3,
    rx: Vec3,
    layout: &CityLayout,
    carrier_hz: f64,
    config: &TraceConfig,
) -> Result<Vec<PropagationPath>> {
    config.validate()?;
    let scene = Scene::new(layout);
    trace_scene_paths(&scene, tx, rx, carrier_hz, config)
}

pub fn trace_scene_paths(
    scene: &Scene,
    tx: Vec3,
    rx: Vec3,
    carrier_hz: f64,
    config: &TraceConfig,
) -> Result<Vec<PropagationPath>> {
    let rays = TxTracer::new(scene, tx, *config).rays_to(rx);
    let responses = rays
        .iter()
        .map(|r| path_response(r, carrier_hz, 0.0, 0.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_paths(&rays, &responses, config)
        .into_iter()
        .map(|i| PropagationPath {
            geometry: rays[i].clone(),
            carrier_hz,
            delay_s: responses[i].delay_s,
            amplitude: responses[i].amplitude,
            phase_rad: responses[i].phase_rad,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::city::Building;

    fn open_ground(side_km: f64) -> CityLayout {
        CityLayout {
            side_km,
            street_width_m: 10.0,
            buildings: vec![],
            seed: 0,
        }
    }

    fn one_block() -> CityLayout {
        CityLayout {
            side_km: 0.2,
            street_width_m: 10.0,
            buildings: vec![Building {
                center_x: 100.0,
                center_y: 100.0,
                width: 40.0,
                height: 30.0,
                material: MaterialKind::Concrete,
            }],
            seed: 0,
        }
    }

    #[test]
    fn open_ground_gives_direct_and_ground_paths() {
        let l = open_ground(0.1);
        let paths = trace_paths(
            Vec3::new(10.0, 10.0, 10.0),
            Vec3::new(40.0, 10.0, 10.0),
            &l,
            28e9,
            &TraceConfig::reflections_only(1),
        )
        .unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths[0].geometry.is_los());
        assert!((paths[1].geometry.length_m - (30f64.powi(2) + 20f64.powi(2)).sqrt()).abs() < 1e-9);
        assert!((paths[1].geometry.vertices[1].z).abs() < 1e-12);
    }

    #[test]
    fn friis_at_100_m() {
        let ray = RayGeometry::new(vec![Vec3::ZERO, Vec3::new(100.0, 0.0, 0.0)], vec![]);
        let r = path_response(&ray, 28e9, 0.0, 0.0).unwrap();
        let pl = -20.0 * r.amplitude.log10();
        assert!((pl - 101.39).abs() < 0.01, "{pl}");
        assert!((r.delay_s * SPEED_OF_LIGHT - 100.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_reflector_costs_nothing() {
        let tx = Vec3::new(0.0, 0.0, 10.0);
        let rx = Vec3::new(30.0, 0.0, 10.0);
        let p = Vec3::new(15.0, 0.0, 0.0);
        let ray = RayGeometry::new(
            vec![tx, p, rx],
            vec![Interaction::Reflection {
                surface: 0,
                material: MaterialKind::DryEarth,
                polarization: Polarization::Tm,
                incidence_rad: 0.5,
            }],
        );
        let r = path_response_with(&ray, 8.2e9, 0.0, 0.0, |_| Ok(Complex64::new(-1.0, 0.0))).unwrap();
        let free = RayGeometry::new(vec![Vec3::ZERO, Vec3::new(ray.length_m, 0.0, 0.0)], vec![]);
        let f = path_response(&free, 8.2e9, 0.0, 0.0).unwrap();
        assert!((r.amplitude - f.amplitude).abs() < 1e-15);
        assert!((r.phase_rad - f.phase_rad - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn zero_length_path_is_an_error() {
        let ray = RayGeometry {
            vertices: vec![Vec3::ZERO, Vec3::ZERO],
            interactions: vec![],
            length_m: 0.0,
            aod: Vec3::X,
            aoa: Vec3::X,
        };
        assert!(matches!(path_response(&ray, 4.6e9, 0.0, 0.0), Err(Error::ZeroLengthPath)));
    }

    #[test]
    fn blocked_link_diffracts_over_the_roof() {
        let l = one_block();
        let cfg = TraceConfig {
            max_reflections: 0,
            max_transmissions: 0,
            ..TraceConfig::default()
        };
        let tx = Vec3::new(50.0, 100.0, 40.0);
        let rx = Vec3::new(150.0, 100.0, 2.0);
        assert!(line_of_sight(tx, rx, &l).blocked);
        let paths = trace_paths(tx, rx, &l, 4.6e9, &cfg).unwrap();
        // only the far roof edge sees both ends
        assert_eq!(paths.len(), 1);
        let d = paths[0].geometry.vertices[1];
        assert!(d.distance(Vec3::new(120.0, 100.0, 30.0)) < 1e-9);
        let excess = tx.distance(d) + d.distance(rx) - tx.distance(rx);
        let nu = 2.0 * (excess / wavelength(4.6e9)).sqrt();
        let free = wavelength(4.6e9) / (4.0 * std::f64::consts::PI * (tx.distance(d) + d.distance(rx)));
        let expect = free * 10f64.powf(-knife_edge_loss_db(nu) / 20.0);
        assert!((paths[0].amplitude / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transmission_through_one_building() {
        let l = one_block();
        let cfg = TraceConfig {
            max_reflections: 0,
            max_diffractions: 0,
            max_transmissions: 1,
            ..TraceConfig::default()
        };
        let tx = Vec3::new(50.0, 100.0, 10.0);
        let rx = Vec3::new(150.0, 100.0, 10.0);
        let paths = trace_paths(tx, rx, &l, 4.6e9, &cfg).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].geometry.n_transmissions(), 1);
        let free = -20.0 * (wavelength(4.6e9) / (4.0 * std::f64::consts::PI * 100.0)).log10();
        let loss = -20.0 * paths[0].amplitude.log10() - free;
        assert!(loss > 20.0, "{loss}");
    }

    #[test]
    fn wall_reflection_obeys_specular_law() {
        let l = one_block();
        let tx = Vec3::new(140.0, 60.0, 5.0);
        let rx = Vec3::new(150.0, 140.0, 5.0);
        let paths = trace_paths(tx, rx, &l, 15e9, &TraceConfig::reflections_only(1)).unwrap();
        let wall = paths
            .iter()
            .find(|p| {
                matches!(p.geometry.interactions.as_slice(), [Interaction::Reflection { surface, .. }] if *surface == Scene::wall_id(0, 0))
            })
            .expect("reflection on the +x wall");
        let p = wall.geometry.vertices[1];
        assert!((p.x - 120.0).abs() < 1e-9);
        let image = Vec3::new(100.0, 60.0, 5.0);
        assert!((wall.geometry.length_m - image.distance(rx)).abs() < 1e-9);
    }

    #[test]
    fn reciprocity_on_small_block() {
        let l = one_block();
        let a = Vec3::new(60.0, 30.0, 12.0);
        let b = Vec3::new(160.0, 170.0, 2.0);
        let cfg = TraceConfig::default();
        let ab = trace_paths(a, b, &l, 8.2e9, &cfg).unwrap();
        let ba = trace_paths(b, a, &l, 8.2e9, &cfg).unwrap();
        assert_eq!(ab.len(), ba.len());
        let mut la: Vec<f64> = ab.iter().map(|p| p.geometry.length_m).collect();
        let mut lb: Vec<f64> = ba.iter().map(|p| p.geometry.length_m).collect();
        la.sort_by(f64::total_cmp);
        lb.sort_by(f64::total_cmp);
        for (x, y) in la.iter().zip(&lb) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
