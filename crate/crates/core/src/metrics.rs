//! Per-point illuminance and achievable rate, whole-grid field maps and the
//! statistics derived from them.
//!
//! Field evaluation is per-cell pure: every cell sums its emitters in the
//! fixed layout order, so parallel and serial evaluation give bit-identical
//! maps.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{
    self, ConcentratorConfig, LcRisConfig, Photometry, RateModel, ReceiverModel,
};
use crate::scene::{link_geometry, Emitter, Scene, Vec3, RECEIVER_NORMAL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("field map has no cells")]
    Empty,
    #[error("gain against a zero baseline is undefined")]
    ZeroBaseline,
    #[error("compliance needs an illuminance map, got {0:?}")]
    WrongQuantity(Quantity),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Illuminance,
    #[serde(alias = "rate")]
    DataRate,
}

impl Quantity {
    pub fn units(self) -> &'static str {
        match self {
            Quantity::Illuminance => "lux",
            Quantity::DataRate => "bit/s",
        }
    }

    /// Short name used in output file names.
    pub fn file_stem(self) -> &'static str {
        match self {
            Quantity::Illuminance => "illuminance",
            Quantity::DataRate => "rate",
        }
    }
}

/// Optical and receiver parameters shared by all schemes of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticsSetup {
    pub concentrator: ConcentratorConfig,
    pub photometry: Photometry,
    pub receiver: ReceiverModel,
    pub rate_model: RateModel,
}

/// Row-major grid of samples, `x` index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub nx: usize,
    pub ny: usize,
    pub cell_x_m: f64,
    pub cell_y_m: f64,
    pub values: Vec<f64>,
    pub quantity: Quantity,
    pub scheme: String,
    pub units: String,
}

impl FieldMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Center of cell `(i, j)` in plane coordinates.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.cell_x_m, (j as f64 + 0.5) * self.cell_y_m)
    }

    pub fn argmax(&self) -> (usize, usize) {
        let k = arg_by(&self.values, |a, b| a > b);
        (k % self.nx, k / self.nx)
    }

    pub fn argmin(&self) -> (usize, usize) {
        let k = arg_by(&self.values, |a, b| a < b);
        (k % self.nx, k / self.nx)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn arg_by(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if better(v, values[best]) {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformityReport {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    /// `min / avg`, reported as 0 for an all-zero map.
    pub uniformity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Task,
    ImmediateSurrounding,
    Background,
}

/// Zone layout and illuminance thresholds for lighting compliance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplianceZones {
    /// Side of the central square task area.
    pub task_side_m: f64,
    /// Width of the immediate-surrounding band around the task area.
    pub surround_band_m: f64,
    pub task_min_lux: f64,
    pub surround_min_lux: f64,
    pub background_min_lux: f64,
    /// Threshold used for the covered-area fraction.
    pub area_threshold_lux: f64,
}

impl Default for ComplianceZones {
    fn default() -> Self {
        ComplianceZones {
            task_side_m: 2.5,
            surround_band_m: 0.5,
            task_min_lux: 400.0,
            surround_min_lux: 500.0,
            background_min_lux: 200.0,
            area_threshold_lux: 400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneVerdict {
    pub zone: Zone,
    pub cells: usize,
    /// `None` when no sensing point falls inside the zone.
    pub min_lux: Option<f64>,
    pub threshold_lux: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub zones: Vec<ZoneVerdict>,
    pub area_threshold_lux: f64,
    pub area_fraction_above: f64,
    pub all_pass: bool,
}

fn illuminance_terms(e: &Emitter, point: Vec3) -> Option<(f64, f64)> {
    let g = link_geometry(e, point, RECEIVER_NORMAL).ok()?;
    if g.cos_irradiance <= 0.0 || g.cos_incidence <= 0.0 {
        return None;
    }
    let lambertian = (e.lambertian_order + 1.0) / (2.0 * PI * g.distance_m * g.distance_m)
        * g.cos_irradiance.powf(e.lambertian_order)
        * g.cos_incidence;
    Some((lambertian, g.incidence_angle_rad))
}

/// Surface illuminance (lux) at `point`. The concentrator gain and the RIS
/// power factors apply only when `ris` is present.
pub fn illuminance_at(
    emitters: &[Emitter],
    ris: Option<&LcRisConfig>,
    photometry: &Photometry,
    concentrator: &ConcentratorConfig,
    point: Vec3,
) -> f64 {
    let mut total = 0.0;
    for e in emitters {
        let Some((lambertian, incidence)) = illuminance_terms(e, point) else {
            continue;
        };
        let front_end = match ris {
            Some(_) => optics::concentrator_gain(incidence, concentrator),
            None => 1.0,
        };
        total += optics::effective_emitted_power(e.power_w, ris) * lambertian * front_end
            / photometry.delta_w_per_lm;
    }
    total
}

/// Received optical power (W) at `point`.
pub fn received_power_at(
    emitters: &[Emitter],
    ris: Option<&LcRisConfig>,
    concentrator: &ConcentratorConfig,
    rx: &ReceiverModel,
    point: Vec3,
) -> f64 {
    let conc = ris.map(|_| concentrator);
    let mut total = 0.0;
    for e in emitters {
        let Ok(g) = link_geometry(e, point, RECEIVER_NORMAL) else {
            continue;
        };
        total += optics::effective_emitted_power(e.power_w, ris)
            * optics::los_gain(&g, e.lambertian_order, rx, conc);
    }
    total
}

/// Electrical SNR `(ρ·P_r)² / (N₀·B)`.
pub fn snr(received_power_w: f64, rx: &ReceiverModel) -> f64 {
    let current = rx.responsivity_a_per_w * received_power_w;
    current * current / (rx.noise_psd_a2_per_hz * rx.bandwidth_hz)
}

/// Achievable rate (bit/s) at `point`.
pub fn rate_at(
    emitters: &[Emitter],
    ris: Option<&LcRisConfig>,
    concentrator: &ConcentratorConfig,
    rx: &ReceiverModel,
    model: RateModel,
    point: Vec3,
) -> f64 {
    let p_r = received_power_at(emitters, ris, concentrator, rx, point);
    if p_r <= 0.0 {
        return 0.0;
    }
    model.rate(rx.bandwidth_hz, snr(p_r, rx))
}

fn cell_value(scene: &Scene, quantity: Quantity, setup: &OpticsSetup, k: usize) -> f64 {
    let (i, j) = (k % scene.grid.nx, k / scene.grid.nx);
    let p = scene.grid.cell_center(&scene.room, i, j);
    match quantity {
        Quantity::Illuminance => {
            illuminance_at(&scene.emitters, scene.ris(), &setup.photometry, &setup.concentrator, p)
        }
        Quantity::DataRate => rate_at(
            &scene.emitters,
            scene.ris(),
            &setup.concentrator,
            &setup.receiver,
            setup.rate_model,
            p,
        ),
    }
}

fn wrap(scene: &Scene, quantity: Quantity, values: Vec<f64>) -> FieldMap {
    FieldMap {
        nx: scene.grid.nx,
        ny: scene.grid.ny,
        cell_x_m: scene.room.length_m / scene.grid.nx as f64,
        cell_y_m: scene.room.width_m / scene.grid.ny as f64,
        values,
        quantity,
        scheme: scene.name().to_string(),
        units: quantity.units().to_string(),
    }
}

/// Evaluates `quantity` at every grid cell on the current rayon pool.
pub fn compute_field(scene: &Scene, quantity: Quantity, setup: &OpticsSetup) -> FieldMap {
    let values = (0..scene.grid.len())
        .into_par_iter()
        .map(|k| cell_value(scene, quantity, setup, k))
        .collect();
    wrap(scene, quantity, values)
}

/// Single-threaded twin of [`compute_field`].
pub fn compute_field_serial(scene: &Scene, quantity: Quantity, setup: &OpticsSetup) -> FieldMap {
    let values = (0..scene.grid.len()).map(|k| cell_value(scene, quantity, setup, k)).collect();
    wrap(scene, quantity, values)
}

pub fn uniformity(map: &FieldMap) -> Result<UniformityReport, MetricsError> {
    uniformity_of(&map.values)
}

pub(crate) fn uniformity_of(values: &[f64]) -> Result<UniformityReport, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let avg = sum / values.len() as f64;
    let uniformity = if avg > 0.0 { min / avg } else { 0.0 };
    Ok(UniformityReport { min, max, avg, uniformity })
}

/// Relative improvement of `new_value` over `baseline`, in percent.
pub fn gain_percent(new_value: f64, baseline: f64) -> Result<f64, MetricsError> {
    if baseline == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok((new_value / baseline - 1.0) * 100.0)
}

fn zone_of(zones: &ComplianceZones, dx: f64, dy: f64) -> Zone {
    let r = dx.abs().max(dy.abs());
    let half = zones.task_side_m / 2.0;
    if r <= half {
        Zone::Task
    } else if r <= half + zones.surround_band_m {
        Zone::ImmediateSurrounding
    } else {
        Zone::Background
    }
}

pub fn classify_compliance(map: &FieldMap, zones: &ComplianceZones) -> Result<ComplianceReport, MetricsError> {
    if map.quantity != Quantity::Illuminance {
        return Err(MetricsError::WrongQuantity(map.quantity));
    }
    if map.values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let cx = map.nx as f64 * map.cell_x_m / 2.0;
    let cy = map.ny as f64 * map.cell_y_m / 2.0;
    let order = [Zone::Task, Zone::ImmediateSurrounding, Zone::Background];
    let mut mins = [f64::INFINITY; 3];
    let mut counts = [0usize; 3];
    let mut above = 0usize;
    for j in 0..map.ny {
        for i in 0..map.nx {
            let v = map.get(i, j);
            let (x, y) = map.cell_center(i, j);
            let z = zone_of(zones, x - cx, y - cy);
            let slot = order.iter().position(|o| *o == z).unwrap_or(2);
            mins[slot] = mins[slot].min(v);
            counts[slot] += 1;
            if v >= zones.area_threshold_lux {
                above += 1;
            }
        }
    }
    let thresholds = [zones.task_min_lux, zones.surround_min_lux, zones.background_min_lux];
    let verdicts: Vec<ZoneVerdict> = (0..3)
        .map(|s| {
            let min_lux = (counts[s] > 0).then_some(mins[s]);
            ZoneVerdict {
                zone: order[s],
                cells: counts[s],
                min_lux,
                threshold_lux: thresholds[s],
                pass: min_lux.is_none_or(|m| m >= thresholds[s]),
            }
        })
        .collect();
    let all_pass = verdicts.iter().all(|v| v.pass);
    Ok(ComplianceReport {
        zones: verdicts,
        area_threshold_lux: zones.area_threshold_lux,
        area_fraction_above: above as f64 / map.values.len() as f64,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{GridSpec, LayoutScheme, Room, SchemeKind};

    fn setup() -> OpticsSetup {
        OpticsSetup {
            concentrator: ConcentratorConfig {
                refr_index_f: 1.5,
                accept_semi_angle_deg: 60.0,
                literal_concentrator: false,
            },
            photometry: Photometry::default(),
            receiver: ReceiverModel::default(),
            rate_model: RateModel::Shannon,
        }
    }

    fn constant_map(v: f64, n: usize) -> FieldMap {
        FieldMap {
            nx: n,
            ny: n,
            cell_x_m: 5.0 / n as f64,
            cell_y_m: 5.0 / n as f64,
            values: vec![v; n * n],
            quantity: Quantity::Illuminance,
            scheme: "test".into(),
            units: "lux".into(),
        }
    }

    fn nadir_emitter(power: f64) -> Emitter {
        Emitter::new(Vec3::new(2.5, 2.5, 3.0), crate::scene::DOWN, power, 60.0).unwrap()
    }

    #[test]
    fn nadir_illuminance_example() {
        let s = setup();
        let ph = Photometry { delta_w_per_lm: 1.0 / 343.5, ..Photometry::default() };
        let p = Vec3::new(2.5, 2.5, 0.85);
        let lux = illuminance_at(&[nadir_emitter(1.0)], None, &ph, &s.concentrator, p);
        assert!((lux - 23.65).abs() / 23.65 < 5e-3, "{lux}");

        let ris = LcRisConfig::default();
        let boosted = illuminance_at(&[nadir_emitter(1.0)], Some(&ris), &ph, &s.concentrator, p);
        assert!((boosted - 645.0).abs() / 645.0 < 5e-3, "{boosted}");

        assert_eq!(illuminance_at(&[nadir_emitter(0.0)], None, &ph, &s.concentrator, p), 0.0);
    }

    #[test]
    fn rate_examples() {
        let rx = ReceiverModel { responsivity_a_per_w: 0.4, noise_psd_a2_per_hz: 1e-21, bandwidth_hz: 2e8, ..ReceiverModel::default() };
        assert!((snr(1e-5, &rx) - 80.0).abs() < 1e-9);
        let r = RateModel::Shannon.rate(rx.bandwidth_hz, snr(1e-5, &rx));
        assert!((r - 1.2680e9).abs() / 1.2680e9 < 1e-4, "{r}");

        let hi = RateModel::Shannon.rate(rx.bandwidth_hz, snr(1e-3, &rx));
        let hi2 = RateModel::Shannon.rate(rx.bandwidth_hz, snr(2e-3, &rx));
        assert!(((hi2 - hi) - 2.0 * rx.bandwidth_hz).abs() / (2.0 * rx.bandwidth_hz) < 0.01);

        let s = setup();
        let zero = rate_at(&[nadir_emitter(0.0)], None, &s.concentrator, &rx, RateModel::Shannon, Vec3::new(1.0, 1.0, 0.85));
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn single_cell_field_matches_point_evaluation() {
        let s = setup();
        let grid = GridSpec { nx: 1, ny: 1, plane_height_m: 0.85 };
        let scene = Scene::new(LayoutScheme::new(SchemeKind::Distributed), Room::default(), grid, 1.0, 60.0).unwrap();
        let map = compute_field(&scene, Quantity::Illuminance, &s);
        let direct = illuminance_at(&scene.emitters, None, &s.photometry, &s.concentrator, Vec3::new(2.5, 2.5, 0.85));
        assert_eq!(map.values, vec![direct]);
        let rmap = compute_field(&scene, Quantity::DataRate, &s);
        let rdirect = rate_at(&scene.emitters, None, &s.concentrator, &s.receiver, s.rate_model, Vec3::new(2.5, 2.5, 0.85));
        assert_eq!(rmap.values, vec![rdirect]);
    }

    #[test]
    fn centralized_peak_and_trough() {
        let s = setup();
        let scene = Scene::new(LayoutScheme::new(SchemeKind::Centralized), Room::default(), GridSpec::default(), 1.0, 60.0).unwrap();
        let map = compute_field(&scene, Quantity::Illuminance, &s);
        let (i, j) = map.argmax();
        assert!((49..=50).contains(&i) && (49..=50).contains(&j));
        let (i, j) = map.argmin();
        assert!([0, 99].contains(&i) && [0, 99].contains(&j));
    }

    #[test]
    fn parallel_matches_serial() {
        let s = setup();
        for kind in [SchemeKind::Adt { tau_deg: 45.0 }, SchemeKind::RisCentralized(LcRisConfig::default())] {
            let scene = Scene::new(LayoutScheme::new(kind), Room::default(), GridSpec { nx: 37, ny: 23, plane_height_m: 0.85 }, 1.0, 60.0).unwrap();
            for q in [Quantity::Illuminance, Quantity::DataRate] {
                assert_eq!(compute_field(&scene, q, &s), compute_field_serial(&scene, q, &s));
            }
        }
    }

    #[test]
    fn uniformity_examples() {
        assert_eq!(uniformity(&constant_map(7.0, 3)).unwrap().uniformity, 1.0);
        let r = uniformity_of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.min, r.max, r.avg, r.uniformity), (1.0, 3.0, 2.0, 0.5));
        assert_eq!(uniformity(&constant_map(0.0, 2)).unwrap().uniformity, 0.0);
        assert_eq!(uniformity_of(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn gain_examples() {
        assert!((gain_percent(222.0, 10.0).unwrap() - 2120.0).abs() < 1e-9);
        assert_eq!(gain_percent(3.3, 3.3).unwrap(), 0.0);
        assert!((gain_percent(2.6115, 0.3595).unwrap() - 626.4).abs() < 0.05);
        assert_eq!(gain_percent(1.0, 0.0), Err(MetricsError::ZeroBaseline));
    }

    #[test]
    fn compliance_examples() {
        let zones = ComplianceZones::default();
        let bright = classify_compliance(&constant_map(1000.0, 100), &zones).unwrap();
        assert!(bright.all_pass);
        assert_eq!(bright.area_fraction_above, 1.0);
        let dim = classify_compliance(&constant_map(100.0, 100), &zones).unwrap();
        assert!(dim.zones.iter().all(|z| !z.pass));
        assert_eq!(dim.area_fraction_above, 0.0);
        let cells: usize = dim.zones.iter().map(|z| z.cells).sum();
        assert_eq!(cells, 10_000);
        // 2.5 m task square → 50×50 cells, 3.5 m outer square → 70×70
        assert_eq!(dim.zones[0].cells, 2500);
        assert_eq!(dim.zones[1].cells, 4900 - 2500);
    }

    #[test]
    fn compliance_rejects_rate_maps() {
        let mut m = constant_map(1.0, 2);
        m.quantity = Quantity::DataRate;
        assert!(classify_compliance(&m, &ComplianceZones::default()).is_err());
    }
}
