//! Room geometry, LED array layouts, the receiver-plane sensing grid and
//! per-link geometry.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{self, LcRisConfig, OpticsError, SteeringMode};

/// Desk-level photodetectors face straight up.
pub const RECEIVER_NORMAL: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

/// Straight-down boresight of a ceiling fixture.
pub const DOWN: Vec3 = Vec3 { x: 0.0, y: 0.0, z: -1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("{field} must be > 0 (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("ADT tilt {0}° is outside the open interval (0°, 90°)")]
    AdtTilt(f64),
    #[error("total power must be finite and ≥ 0 (got {0})")]
    Power(f64),
    #[error("grid needs at least one cell per axis (got {nx}×{ny})")]
    EmptyGrid { nx: usize, ny: usize },
    #[error("receiver plane height {plane} m must lie in [0, {ceiling}) m")]
    PlaneHeight { plane: f64, ceiling: f64 },
    #[error("array count {count} is not supported by the {scheme} layout")]
    ArrayCount { scheme: &'static str, count: usize },
    #[error("zero-length direction vector")]
    ZeroVector,
    #[error("receiver point coincides with the emitter")]
    Coincident,
    #[error(transparent)]
    Optics(#[from] OpticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Result<Vec3, SceneError> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(SceneError::ZeroVector);
        }
        Ok(self * (1.0 / n))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
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
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Room {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl Room {
    pub fn validate(&self) -> Result<(), SceneError> {
        for (field, value) in [
            ("length_m", self.length_m),
            ("width_m", self.width_m),
            ("height_m", self.height_m),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SceneError::NonPositive { field, value });
            }
        }
        Ok(())
    }

    pub fn center_x(&self) -> f64 {
        self.length_m / 2.0
    }

    pub fn center_y(&self) -> f64 {
        self.width_m / 2.0
    }
}

impl Default for Room {
    fn default() -> Self {
        Room { length_m: 5.0, width_m: 5.0, height_m: 3.0 }
    }
}

/// A point-source LED array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Emitter {
    pub position: Vec3,
    /// Unit boresight.
    pub normal: Vec3,
    pub power_w: f64,
    pub semi_angle_deg: f64,
    pub lambertian_order: f64,
}

impl Emitter {
    pub fn new(position: Vec3, normal: Vec3, power_w: f64, semi_angle_deg: f64) -> Result<Self, SceneError> {
        if !(power_w >= 0.0) || !power_w.is_finite() {
            return Err(SceneError::Power(power_w));
        }
        Ok(Emitter {
            position,
            normal: normal.normalized()?,
            power_w,
            semi_angle_deg,
            lambertian_order: optics::lambertian_order(semi_angle_deg)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeKind {
    Centralized,
    Distributed,
    /// Angle-diversity transmitter; arrays tilted by `tau_deg` off nadir.
    Adt { tau_deg: f64 },
    /// Centralized arrays behind a liquid-crystal RIS.
    RisCentralized(LcRisConfig),
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Centralized => "centralized",
            SchemeKind::Distributed => "distributed",
            SchemeKind::Adt { .. } => "adt",
            SchemeKind::RisCentralized(_) => "ris",
        }
    }

    pub fn ris(&self) -> Option<&LcRisConfig> {
        match self {
            SchemeKind::RisCentralized(cfg) => Some(cfg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutScheme {
    pub kind: SchemeKind,
    /// Number of LED arrays making up the fixture(s).
    pub array_count: usize,
}

impl LayoutScheme {
    pub fn new(kind: SchemeKind) -> Self {
        LayoutScheme { kind, array_count: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub plane_height_m: f64,
}

impl GridSpec {
    pub fn validate(&self, room: &Room) -> Result<(), SceneError> {
        if self.nx == 0 || self.ny == 0 {
            return Err(SceneError::EmptyGrid { nx: self.nx, ny: self.ny });
        }
        if !(self.plane_height_m >= 0.0 && self.plane_height_m < room.height_m) {
            return Err(SceneError::PlaneHeight { plane: self.plane_height_m, ceiling: room.height_m });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center of cell `(i, j)`, `i` along the room length.
    pub fn cell_center(&self, room: &Room, i: usize, j: usize) -> Vec3 {
        Vec3::new(
            (i as f64 + 0.5) * room.length_m / self.nx as f64,
            (j as f64 + 0.5) * room.width_m / self.ny as f64,
            self.plane_height_m,
        )
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 100, ny: 100, plane_height_m: 0.85 }
    }
}

/// Distance and angles of one emitter→point link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance_m: f64,
    /// Angle off the emitter boresight.
    pub irradiance_angle_rad: f64,
    /// Angle off the receiver normal.
    pub incidence_angle_rad: f64,
    pub cos_irradiance: f64,
    pub cos_incidence: f64,
}

impl LinkGeometry {
    pub fn from_angles(distance_m: f64, irradiance_angle_rad: f64, incidence_angle_rad: f64) -> Self {
        LinkGeometry {
            distance_m,
            irradiance_angle_rad,
            incidence_angle_rad,
            cos_irradiance: irradiance_angle_rad.cos(),
            cos_incidence: incidence_angle_rad.cos(),
        }
    }
}

/// An evaluated transmitter arrangement on a sensing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub room: Room,
    pub grid: GridSpec,
    pub scheme: SchemeKind,
    pub emitters: Vec<Emitter>,
}

impl Scene {
    pub fn new(
        scheme: LayoutScheme,
        room: Room,
        grid: GridSpec,
        total_power_w: f64,
        semi_angle_deg: f64,
    ) -> Result<Self, SceneError> {
        grid.validate(&room)?;
        let emitters = build_layout(&scheme, &room, total_power_w, semi_angle_deg)?;
        Ok(Scene { room, grid, scheme: scheme.kind, emitters })
    }

    pub fn name(&self) -> &'static str {
        self.scheme.name()
    }

    pub fn ris(&self) -> Option<&LcRisConfig> {
        self.scheme.ris()
    }
}

/// Places the LED arrays of `scheme` on the ceiling.
pub fn build_layout(
    scheme: &LayoutScheme,
    room: &Room,
    total_power_w: f64,
    semi_angle_deg: f64,
) -> Result<Vec<Emitter>, SceneError> {
    room.validate()?;
    if !(total_power_w >= 0.0) || !total_power_w.is_finite() {
        return Err(SceneError::Power(total_power_w));
    }
    let n = scheme.array_count;
    let center = Vec3::new(room.center_x(), room.center_y(), room.height_m);
    match scheme.kind {
        SchemeKind::Centralized => Ok(vec![Emitter::new(center, DOWN, total_power_w, semi_angle_deg)?]),
        SchemeKind::Distributed => {
            let side = (n as f64).sqrt().round() as usize;
            if n == 0 || side * side != n {
                return Err(SceneError::ArrayCount { scheme: "distributed", count: n });
            }
            let each = total_power_w / n as f64;
            let mut out = Vec::with_capacity(n);
            for j in 0..side {
                for i in 0..side {
                    let pos = Vec3::new(
                        (2 * i + 1) as f64 * room.length_m / (2 * side) as f64,
                        (2 * j + 1) as f64 * room.width_m / (2 * side) as f64,
                        room.height_m,
                    );
                    out.push(Emitter::new(pos, DOWN, each, semi_angle_deg)?);
                }
            }
            Ok(out)
        }
        SchemeKind::Adt { tau_deg } => {
            if !(tau_deg > 0.0 && tau_deg < 90.0) {
                return Err(SceneError::AdtTilt(tau_deg));
            }
            if n == 0 {
                return Err(SceneError::ArrayCount { scheme: "adt", count: n });
            }
            let each = total_power_w / n as f64;
            tilted_normals(tau_deg.to_radians(), n)
                .into_iter()
                .map(|normal| Emitter::new(center, normal, each, semi_angle_deg))
                .collect()
        }
        SchemeKind::RisCentralized(cfg) => {
            cfg.validate()?;
            let deviation = optics::steering_deviation(&cfg);
            if deviation == 0.0 {
                return Ok(vec![Emitter::new(center, DOWN, total_power_w, semi_angle_deg)?]);
            }
            match cfg.steering {
                SteeringMode::Split => {
                    if n == 0 {
                        return Err(SceneError::ArrayCount { scheme: "ris", count: n });
                    }
                    let each = total_power_w / n as f64;
                    tilted_normals(deviation, n)
                        .into_iter()
                        .map(|normal| Emitter::new(center, normal, each, semi_angle_deg))
                        .collect()
                }
                SteeringMode::Axis { azimuth_deg } => {
                    let normal = tilted_normal(deviation, azimuth_deg.to_radians());
                    Ok(vec![Emitter::new(center, normal, total_power_w, semi_angle_deg)?])
                }
            }
        }
    }
}

/// Boresights of the four ADT arrays, aimed at the room diagonals.
pub fn adt_normals(tau_deg: f64) -> Result<[Vec3; 4], SceneError> {
    if !(tau_deg > 0.0 && tau_deg < 90.0) {
        return Err(SceneError::AdtTilt(tau_deg));
    }
    let v = tilted_normals(tau_deg.to_radians(), 4);
    Ok([v[0], v[1], v[2], v[3]])
}

fn tilted_normal(tilt_rad: f64, azimuth_rad: f64) -> Vec3 {
    Vec3::new(tilt_rad.sin() * azimuth_rad.cos(), tilt_rad.sin() * azimuth_rad.sin(), -tilt_rad.cos())
}

/// `count` boresights tilted off nadir, azimuths starting at 45° and evenly
/// spaced.
pub(crate) fn tilted_normals(tilt_rad: f64, count: usize) -> Vec<Vec3> {
    (0..count)
        .map(|k| {
            let azimuth = PI / 4.0 + 2.0 * PI * k as f64 / count as f64;
            tilted_normal(tilt_rad, azimuth)
        })
        .collect()
}

/// Cell-center sensing points in row-major order (x fastest).
pub fn grid_points(room: &Room, spec: &GridSpec) -> Result<Vec<Vec3>, SceneError> {
    room.validate()?;
    spec.validate(room)?;
    let mut out = Vec::with_capacity(spec.len());
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            out.push(spec.cell_center(room, i, j));
        }
    }
    Ok(out)
}

pub fn link_geometry(e: &Emitter, p: Vec3, receiver_normal: Vec3) -> Result<LinkGeometry, SceneError> {
    let d = p - e.position;
    let distance_m = d.norm();
    if !(distance_m > 0.0) {
        return Err(SceneError::Coincident);
    }
    let dir = d * (1.0 / distance_m);
    let cos_irradiance = dir.dot(e.normal).clamp(-1.0, 1.0);
    let cos_incidence = (-dir).dot(receiver_normal).clamp(-1.0, 1.0);
    Ok(LinkGeometry {
        distance_m,
        irradiance_angle_rad: cos_irradiance.acos(),
        incidence_angle_rad: cos_incidence.acos(),
        cos_irradiance,
        cos_incidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    fn layout(kind: SchemeKind, power: f64) -> Vec<Emitter> {
        build_layout(&LayoutScheme::new(kind), &Room::default(), power, 60.0).unwrap()
    }

    #[test]
    fn distributed_quadrant_centers() {
        let e = layout(SchemeKind::Distributed, 1.0);
        let expect = [(1.25, 1.25), (3.75, 1.25), (1.25, 3.75), (3.75, 3.75)];
        assert_eq!(e.len(), 4);
        for (em, (x, y)) in e.iter().zip(expect) {
            assert!(close(em.position, Vec3::new(x, y, 3.0), 1e-12));
            assert_eq!(em.power_w, 0.25);
            assert_eq!(em.normal, DOWN);
        }
    }

    #[test]
    fn centralized_single_source() {
        let e = layout(SchemeKind::Centralized, 1.0);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].position, Vec3::new(2.5, 2.5, 3.0));
        assert_eq!(e[0].power_w, 1.0);
        assert_eq!(e[0].lambertian_order, 1.0);
    }

    #[test]
    fn unsteered_ris_is_a_point_source() {
        let e = layout(SchemeKind::RisCentralized(LcRisConfig::default()), 2.0);
        assert_eq!(e, layout(SchemeKind::Centralized, 2.0));
    }

    #[test]
    fn steered_ris_splits_into_sub_beams() {
        let cfg = LcRisConfig { wedge_angle_rad: 0.2, ..LcRisConfig::default() };
        let e = layout(SchemeKind::RisCentralized(cfg), 1.0);
        assert_eq!(e.len(), 4);
        let tilt = optics::steering_deviation(&cfg);
        for em in &e {
            assert!((em.normal.z + tilt.cos()).abs() < 1e-12);
        }
        let axis = LcRisConfig { steering: SteeringMode::Axis { azimuth_deg: 0.0 }, ..cfg };
        let e = layout(SchemeKind::RisCentralized(axis), 1.0);
        assert_eq!(e.len(), 1);
        assert!(close(e[0].normal, Vec3::new(tilt.sin(), 0.0, -tilt.cos()), 1e-12));
    }

    #[test]
    fn adt_rejects_degenerate_tilt() {
        let room = Room::default();
        for tau in [0.0, 90.0, -5.0, f64::NAN] {
            let s = LayoutScheme::new(SchemeKind::Adt { tau_deg: tau });
            assert!(matches!(build_layout(&s, &room, 1.0, 60.0), Err(SceneError::AdtTilt(_))));
        }
        assert!(adt_normals(0.0).is_err());
    }

    #[test]
    fn adt_normal_examples() {
        let n = adt_normals(45.0).unwrap();
        assert!(close(n[0], Vec3::new(0.5, 0.5, -std::f64::consts::FRAC_1_SQRT_2), 1e-5));
        let sum = n.iter().fold(Vec3::default(), |acc, v| acc + *v);
        assert!(close(sum, Vec3::new(0.0, 0.0, -2.8284), 1e-4));
        let nearly_flat = tilted_normals(1e-12, 4);
        for v in nearly_flat {
            assert!(close(v, DOWN, 1e-11));
        }
        for v in n {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_power_rejected() {
        let s = LayoutScheme::new(SchemeKind::Centralized);
        assert!(build_layout(&s, &Room::default(), -1.0, 60.0).is_err());
    }

    #[test]
    fn distributed_needs_square_count() {
        let s = LayoutScheme { kind: SchemeKind::Distributed, array_count: 3 };
        assert!(build_layout(&s, &Room::default(), 1.0, 60.0).is_err());
        let s = LayoutScheme { kind: SchemeKind::Distributed, array_count: 9 };
        assert_eq!(build_layout(&s, &Room::default(), 1.0, 60.0).unwrap().len(), 9);
    }

    #[test]
    fn grid_point_examples() {
        let room = Room::default();
        let pts = grid_points(&room, &GridSpec::default()).unwrap();
        assert_eq!(pts.len(), 10_000);
        assert!(close(pts[0], Vec3::new(0.025, 0.025, 0.85), 1e-12));
        assert!(close(pts[1], Vec3::new(0.075, 0.025, 0.85), 1e-12));
        assert!(close(pts[9_999], Vec3::new(4.975, 4.975, 0.85), 1e-12));
        let one = grid_points(&room, &GridSpec { nx: 1, ny: 1, plane_height_m: 0.85 }).unwrap();
        assert_eq!(one, vec![Vec3::new(2.5, 2.5, 0.85)]);
    }

    #[test]
    fn grid_validation() {
        let room = Room::default();
        assert!(GridSpec { nx: 0, ny: 3, plane_height_m: 0.5 }.validate(&room).is_err());
        assert!(GridSpec { nx: 3, ny: 3, plane_height_m: 3.0 }.validate(&room).is_err());
    }

    #[test]
    fn link_geometry_examples() {
        let e = layout(SchemeKind::Centralized, 1.0)[0];
        let g = link_geometry(&e, Vec3::new(2.5, 2.5, 0.85), RECEIVER_NORMAL).unwrap();
        assert!((g.distance_m - 2.15).abs() < 1e-12);
        assert_eq!(g.irradiance_angle_rad, 0.0);
        assert_eq!(g.incidence_angle_rad, 0.0);

        let g = link_geometry(&e, Vec3::new(0.0, 0.0, 0.85), RECEIVER_NORMAL).unwrap();
        assert!((g.distance_m - 4.1380).abs() < 1e-4);
        assert!((g.cos_irradiance - 0.5196).abs() < 1e-4);

        let g = link_geometry(&e, Vec3::new(1.0, 2.0, 0.85), -RECEIVER_NORMAL).unwrap();
        assert!(g.cos_incidence < 0.0);
        assert!(g.incidence_angle_rad > PI / 2.0);

        assert_eq!(link_geometry(&e, e.position, RECEIVER_NORMAL), Err(SceneError::Coincident));
    }
}
