//! Scenario orchestration: the multi-scheme comparison, transmit-power
//! sweeps and the parameter calibration sweep used to pick the shipped
//! receiver and concentrator defaults.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    self, classify_compliance, compute_field, compute_field_serial, gain_percent, ComplianceReport,
    ComplianceZones, FieldMap, OpticsSetup, Quantity, UniformityReport,
};
use crate::optics::{ConcentratorConfig, LcRisConfig, Photometry, RateModel, ReceiverModel};
use crate::scene::{GridSpec, LayoutScheme, Room, Scene, SchemeKind};

/// Calibrated concentrator refractive index.
pub const DEFAULT_CONCENTRATOR_F: f64 = 1.55;

/// Default LED semi-angle at half power (Lambertian order 1).
pub const DEFAULT_SEMI_ANGLE_DEG: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Centralized,
    Distributed,
    Adt,
    Ris,
}

impl SchemeName {
    pub const ALL: [SchemeName; 4] =
        [SchemeName::Centralized, SchemeName::Distributed, SchemeName::Adt, SchemeName::Ris];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeName::Centralized => "centralized",
            SchemeName::Distributed => "distributed",
            SchemeName::Adt => "adt",
            SchemeName::Ris => "ris",
        }
    }

    pub fn parse(s: &str) -> Option<SchemeName> {
        SchemeName::ALL.into_iter().find(|n| n.as_str() == s.trim())
    }
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdtSettings {
    pub tau_deg: f64,
}

impl Default for AdtSettings {
    fn default() -> Self {
        AdtSettings { tau_deg: 45.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentratorSettings {
    pub refr_index_f: f64,
    /// Defaults to the LED semi-angle when absent.
    pub accept_semi_angle_deg: Option<f64>,
    pub literal_concentrator: bool,
}

impl Default for ConcentratorSettings {
    fn default() -> Self {
        ConcentratorSettings {
            refr_index_f: DEFAULT_CONCENTRATOR_F,
            accept_semi_angle_deg: None,
            literal_concentrator: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotometrySettings {
    pub wavelength_nm: f64,
    pub luminosity_v: f64,
    /// Overrides `1 / (683 · V)` when set.
    pub delta_w_per_lm: Option<f64>,
}

impl Default for PhotometrySettings {
    fn default() -> Self {
        PhotometrySettings {
            wavelength_nm: 510.0,
            luminosity_v: crate::optics::LUMINOSITY_510NM,
            delta_w_per_lm: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    pub csv: bool,
    pub heatmap: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions { csv: true, heatmap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { param: "power_w".into(), start: 0.5, stop: 8.0, step: 0.5 }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.param != "power_w" {
            return Err(Error::invalid("sweep.param", format!("unsupported parameter `{}`", self.param)));
        }
        if !(self.start > 0.0) || !self.start.is_finite() {
            return Err(Error::invalid("sweep.start", "must be finite and > 0"));
        }
        if !(self.stop >= self.start) || !self.stop.is_finite() {
            return Err(Error::invalid("sweep.stop", "must be finite and ≥ start"));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::invalid("sweep.step", "must be finite and > 0"));
        }
        Ok(())
    }

    /// `start, start+step, …` up to and including `stop` (within 1e-9 steps).
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub room: Room,
    pub grid: GridSpec,
    pub schemes: Vec<SchemeName>,
    /// Reference scheme for the gain table; `centralized` if present,
    /// otherwise the first listed scheme.
    pub baseline: Option<SchemeName>,
    pub total_power_w: f64,
    pub semi_angle_deg: f64,
    pub array_count: usize,
    pub adt: AdtSettings,
    pub ris: LcRisConfig,
    pub concentrator: ConcentratorSettings,
    pub receiver: ReceiverModel,
    pub photometry: PhotometrySettings,
    pub rate_model: RateModel,
    pub compliance: ComplianceZones,
    pub sweep: SweepSpec,
    pub output: OutputOptions,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            room: Room::default(),
            grid: GridSpec::default(),
            schemes: SchemeName::ALL.to_vec(),
            baseline: None,
            total_power_w: 1.0,
            semi_angle_deg: DEFAULT_SEMI_ANGLE_DEG,
            array_count: 4,
            adt: AdtSettings::default(),
            ris: LcRisConfig::default(),
            concentrator: ConcentratorSettings::default(),
            receiver: ReceiverModel::default(),
            photometry: PhotometrySettings::default(),
            rate_model: RateModel::default(),
            compliance: ComplianceZones::default(),
            sweep: SweepSpec::default(),
            output: OutputOptions::default(),
        }
    }
}

fn prefixed<E: fmt::Display>(prefix: &str) -> impl Fn(E) -> Error + '_ {
    move |e| {
        let text = e.to_string();
        // optics/scene errors lead with the offending field name
        match text.split_once(": ") {
            Some((field, message)) if !field.contains(' ') => {
                Error::invalid(format!("{prefix}.{field}"), message)
            }
            _ => Error::invalid(prefix, text),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.room.validate().map_err(|e| match e {
            crate::scene::SceneError::NonPositive { field, .. } => {
                Error::invalid(format!("room.{field}"), e.to_string())
            }
            other => Error::invalid("room", other.to_string()),
        })?;
        if self.grid.nx == 0 {
            return Err(Error::invalid("grid.nx", "must be ≥ 1"));
        }
        if self.grid.ny == 0 {
            return Err(Error::invalid("grid.ny", "must be ≥ 1"));
        }
        if !(self.grid.plane_height_m >= 0.0 && self.grid.plane_height_m < self.room.height_m) {
            return Err(Error::invalid("grid.plane_height_m", "must lie in [0, room.height_m)"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("schemes", "at least one scheme is required"));
        }
        for (k, s) in self.schemes.iter().enumerate() {
            if self.schemes[..k].contains(s) {
                return Err(Error::invalid(format!("schemes[{k}]"), format!("duplicate scheme `{s}`")));
            }
        }
        if let Some(b) = self.baseline {
            if !self.schemes.contains(&b) {
                return Err(Error::invalid("baseline", format!("`{b}` is not among the configured schemes")));
            }
        }
        if !(self.total_power_w > 0.0) || !self.total_power_w.is_finite() {
            return Err(Error::invalid("total_power_w", "must be finite and > 0"));
        }
        crate::optics::lambertian_order(self.semi_angle_deg)
            .map_err(|e| Error::invalid("semi_angle_deg", e.to_string()))?;
        if self.array_count == 0 {
            return Err(Error::invalid("array_count", "must be ≥ 1"));
        }
        if self.schemes.contains(&SchemeName::Distributed) {
            let side = (self.array_count as f64).sqrt().round() as usize;
            if side * side != self.array_count {
                return Err(Error::invalid("array_count", "distributed layout needs a perfect square"));
            }
        }
        if !(self.adt.tau_deg > 0.0 && self.adt.tau_deg < 90.0) {
            return Err(Error::invalid("adt.tau_deg", "must lie in the open interval (0°, 90°)"));
        }
        self.ris.validate().map_err(prefixed("ris"))?;
        self.concentrator_config().validate().map_err(prefixed("concentrator"))?;
        self.receiver.validate().map_err(prefixed("receiver"))?;
        if self.photometry.delta_w_per_lm.is_none() && !(self.photometry.luminosity_v > 0.0) {
            return Err(Error::invalid("photometry.luminosity_v", "must be > 0"));
        }
        self.photometry_model().validate().map_err(prefixed("photometry"))?;
        let c = &self.compliance;
        for (field, v) in [
            ("task_side_m", c.task_side_m),
            ("surround_band_m", c.surround_band_m),
            ("task_min_lux", c.task_min_lux),
            ("surround_min_lux", c.surround_min_lux),
            ("background_min_lux", c.background_min_lux),
            ("area_threshold_lux", c.area_threshold_lux),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("compliance.{field}"), "must be finite and ≥ 0"));
            }
        }
        self.sweep.validate()
    }

    pub fn baseline(&self) -> SchemeName {
        self.baseline.unwrap_or(if self.schemes.contains(&SchemeName::Centralized) {
            SchemeName::Centralized
        } else {
            self.schemes[0]
        })
    }

    pub fn concentrator_config(&self) -> ConcentratorConfig {
        ConcentratorConfig {
            refr_index_f: self.concentrator.refr_index_f,
            accept_semi_angle_deg: self.concentrator.accept_semi_angle_deg.unwrap_or(self.semi_angle_deg),
            literal_concentrator: self.concentrator.literal_concentrator,
        }
    }

    pub fn photometry_model(&self) -> Photometry {
        let p = &self.photometry;
        match p.delta_w_per_lm {
            Some(delta) => Photometry { delta_w_per_lm: delta, wavelength_nm: p.wavelength_nm, luminosity_v: p.luminosity_v },
            None => Photometry::from_luminosity(p.wavelength_nm, p.luminosity_v),
        }
    }

    pub fn optics(&self) -> OpticsSetup {
        OpticsSetup {
            concentrator: self.concentrator_config(),
            photometry: self.photometry_model(),
            receiver: self.receiver,
            rate_model: self.rate_model,
        }
    }

    pub fn layout(&self, name: SchemeName) -> LayoutScheme {
        let kind = match name {
            SchemeName::Centralized => SchemeKind::Centralized,
            SchemeName::Distributed => SchemeKind::Distributed,
            SchemeName::Adt => SchemeKind::Adt { tau_deg: self.adt.tau_deg },
            SchemeName::Ris => SchemeKind::RisCentralized(self.ris),
        };
        LayoutScheme { kind, array_count: self.array_count }
    }

    pub fn scene(&self, name: SchemeName) -> Result<Scene> {
        Ok(Scene::new(self.layout(name), self.room, self.grid, self.total_power_w, self.semi_angle_deg)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: SchemeName,
    pub illuminance: FieldMap,
    pub rate: FieldMap,
    pub illuminance_stats: UniformityReport,
    pub rate_stats: UniformityReport,
    pub compliance: ComplianceReport,
}

impl SchemeResult {
    pub fn map(&self, q: Quantity) -> &FieldMap {
        match q {
            Quantity::Illuminance => &self.illuminance,
            Quantity::DataRate => &self.rate,
        }
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::MinIlluminance => self.illuminance_stats.min,
            Metric::AvgIlluminance => self.illuminance_stats.avg,
            Metric::MaxIlluminance => self.illuminance_stats.max,
            Metric::MinRate => self.rate_stats.min,
            Metric::AvgRate => self.rate_stats.avg,
            Metric::MaxRate => self.rate_stats.max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MinIlluminance,
    AvgIlluminance,
    MaxIlluminance,
    MinRate,
    AvgRate,
    MaxRate,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::MinIlluminance,
        Metric::AvgIlluminance,
        Metric::MaxIlluminance,
        Metric::MinRate,
        Metric::AvgRate,
        Metric::MaxRate,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainRow {
    pub scheme: SchemeName,
    pub metric: Metric,
    pub value: f64,
    pub baseline_value: f64,
    /// `None` when the baseline value is zero.
    pub gain_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub baseline: SchemeName,
    pub results: Vec<SchemeResult>,
    /// Gains of every non-baseline scheme against the baseline.
    pub gains: Vec<GainRow>,
}

impl ComparisonReport {
    pub fn result(&self, scheme: SchemeName) -> Option<&SchemeResult> {
        self.results.iter().find(|r| r.scheme == scheme)
    }

    /// `(from, to, gain %)` for every ordered pair of distinct schemes.
    pub fn pairwise_gains(&self, metric: Metric) -> Vec<(SchemeName, SchemeName, f64)> {
        let mut out = Vec::new();
        for from in &self.results {
            for to in &self.results {
                if from.scheme == to.scheme {
                    continue;
                }
                if let Ok(g) = gain_percent(to.metric(metric), from.metric(metric)) {
                    out.push((from.scheme, to.scheme, g));
                }
            }
        }
        out
    }
}

fn field(scene: &Scene, q: Quantity, setup: &OpticsSetup, exec: Execution) -> FieldMap {
    match exec {
        Execution::Serial => compute_field_serial(scene, q, setup),
        Execution::Parallel => compute_field(scene, q, setup),
    }
}

pub fn run_scenario(s: &Scenario) -> Result<ComparisonReport> {
    run_scenario_with(s, Execution::Parallel)
}

pub fn run_scenario_with(s: &Scenario, exec: Execution) -> Result<ComparisonReport> {
    s.validate()?;
    let setup = s.optics();
    let mut results = Vec::with_capacity(s.schemes.len());
    for &name in &s.schemes {
        let scene = s.scene(name)?;
        let illuminance = field(&scene, Quantity::Illuminance, &setup, exec);
        let rate = field(&scene, Quantity::DataRate, &setup, exec);
        results.push(SchemeResult {
            scheme: name,
            illuminance_stats: metrics::uniformity(&illuminance)?,
            rate_stats: metrics::uniformity(&rate)?,
            compliance: classify_compliance(&illuminance, &s.compliance)?,
            illuminance,
            rate,
        });
    }
    let baseline = s.baseline();
    let base = results.iter().find(|r| r.scheme == baseline).expect("baseline validated");
    let mut gains = Vec::new();
    for r in results.iter().filter(|r| r.scheme != baseline) {
        for metric in Metric::ALL {
            let (value, baseline_value) = (r.metric(metric), base.metric(metric));
            gains.push(GainRow {
                scheme: r.scheme,
                metric,
                value,
                baseline_value,
                gain_percent: gain_percent(value, baseline_value).ok(),
            });
        }
    }
    Ok(ComparisonReport { baseline, results, gains })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub power_w: f64,
    /// Per scheme, in [`SweepTable::schemes`] order.
    pub min_rate_bps: Vec<f64>,
    pub min_illuminance_lux: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub param: String,
    pub schemes: Vec<SchemeName>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    fn column(&self, scheme: SchemeName) -> Option<usize> {
        self.schemes.iter().position(|s| *s == scheme)
    }

    pub fn min_rates(&self, scheme: SchemeName) -> Vec<f64> {
        self.column(scheme).map_or_else(Vec::new, |c| self.rows.iter().map(|r| r.min_rate_bps[c]).collect())
    }

    pub fn min_illuminances(&self, scheme: SchemeName) -> Vec<f64> {
        self.column(scheme)
            .map_or_else(Vec::new, |c| self.rows.iter().map(|r| r.min_illuminance_lux[c]).collect())
    }

    /// Powers at which the minimum-rate ordering of `a` and `b` flips
    /// relative to the previous row.
    pub fn rate_crossovers(&self, a: SchemeName, b: SchemeName) -> Vec<f64> {
        let (ra, rb) = (self.min_rates(a), self.min_rates(b));
        let mut out = Vec::new();
        for k in 1..ra.len().min(rb.len()) {
            let before = ra[k - 1] > rb[k - 1];
            let after = ra[k] > rb[k];
            if before != after {
                out.push(self.rows[k].power_w);
            }
        }
        out
    }
}

pub fn power_sweep(s: &Scenario, sweep: &SweepSpec) -> Result<SweepTable> {
    s.validate()?;
    sweep.validate()?;
    let setup = s.optics();
    let mut rows = Vec::new();
    for power in sweep.values() {
        let scenario = Scenario { total_power_w: power, ..s.clone() };
        let mut min_rate_bps = Vec::with_capacity(s.schemes.len());
        let mut min_illuminance_lux = Vec::with_capacity(s.schemes.len());
        for &name in &s.schemes {
            let scene = scenario.scene(name)?;
            min_illuminance_lux.push(compute_field(&scene, Quantity::Illuminance, &setup).min());
            min_rate_bps.push(compute_field(&scene, Quantity::DataRate, &setup).min());
        }
        rows.push(SweepRow { power_w: power, min_rate_bps, min_illuminance_lux });
    }
    Ok(SweepTable { param: sweep.param.clone(), schemes: s.schemes.clone(), rows })
}

/// Target `(illumination, rate)` uniformity per scheme, in
/// [`SchemeName::ALL`] order, that the calibration sweep scores against.
pub const UNIFORMITY_TARGETS: [(f64, f64); 4] =
    [(0.2371, 0.3535), (0.4378, 0.3937), (0.4755, 0.4379), (0.4628, 0.8168)];

/// Window for the centralized→RIS minimum-illuminance gain, percent.
pub const ILLUMINANCE_GAIN_WINDOW: (f64, f64) = (1000.0, 3000.0);

/// Orderings closer than this are treated as ties.
pub const ORDER_MARGIN: f64 = 1e-9;

/// Parameter axes explored by [`calibrate`]. All other scenario values are
/// taken from the base scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationGrid {
    pub semi_angles_deg: Vec<f64>,
    pub wedge_angles_rad: Vec<f64>,
    pub concentrator_f: Vec<f64>,
    pub noise_psd: Vec<f64>,
}

impl CalibrationGrid {
    fn default_f() -> Vec<f64> {
        (0..=12).map(|k| 1.0 + 0.05 * k as f64).collect()
    }

    fn default_noise() -> Vec<f64> {
        // 10 points per decade, 1e-23 … 1e-20 A²/Hz
        (0..=30).map(|k| round_sig(10f64.powf(-23.0 + k as f64 / 10.0), 2)).collect()
    }

    /// Receiver/concentrator calibration at the base geometry.
    pub fn receiver(base: &Scenario) -> Self {
        CalibrationGrid {
            semi_angles_deg: vec![base.semi_angle_deg],
            wedge_angles_rad: vec![base.ris.wedge_angle_rad],
            concentrator_f: Self::default_f(),
            noise_psd: Self::default_noise(),
        }
    }

    /// Wide search over geometry as well, used to look for the closest
    /// match to [`UNIFORMITY_TARGETS`].
    pub fn wide() -> Self {
        CalibrationGrid {
            semi_angles_deg: (0..=25).map(|k| 30.0 + 2.0 * k as f64).collect(),
            wedge_angles_rad: vec![0.0, 0.13, 0.26],
            concentrator_f: vec![1.0, 1.2, 1.4, 1.6],
            noise_psd: Self::default_noise(),
        }
    }

    pub fn len(&self) -> usize {
        self.semi_angles_deg.len() * self.wedge_angles_rad.len() * self.concentrator_f.len() * self.noise_psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn round_sig(v: f64, digits: usize) -> f64 {
    // through decimal text so that e.g. 3.2e-22 comes out as the shortest literal
    format!("{v:.*e}", digits - 1).parse().expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationChecks {
    /// Centralized illumination uniformity below every other scheme and < 0.40.
    pub illuminance_order: bool,
    /// RIS rate uniformity ≥ 0.7 while every plain scheme stays < 0.5.
    pub rate_uniformity_split: bool,
    /// Centralized→RIS minimum-illuminance gain inside the window.
    pub illuminance_gain_window: bool,
    /// Centralized→RIS minimum-rate gain positive and the largest pairwise gain.
    pub rate_gain_largest: bool,
}

impl CalibrationChecks {
    pub fn passed(&self) -> usize {
        [self.illuminance_order, self.rate_uniformity_split, self.illuminance_gain_window, self.rate_gain_largest]
            .iter()
            .filter(|b| **b)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub semi_angle_deg: f64,
    pub wedge_angle_rad: f64,
    pub refr_index_f: f64,
    pub noise_psd: f64,
    /// `[(illumination, rate)]` uniformity in [`SchemeName::ALL`] order.
    pub uniformity: [(f64, f64); 4],
    pub min_illuminance_gain_pct: f64,
    pub min_rate_gain_pct: f64,
    pub checks: CalibrationChecks,
    /// Largest absolute deviation from [`UNIFORMITY_TARGETS`].
    pub max_abs_error: f64,
    pub rms_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationOutcome {
    pub evaluated: usize,
    /// Most checks passed, ties broken by RMS distance to the targets.
    pub best: CalibrationPoint,
    /// Smallest max-abs distance to the targets.
    pub closest: CalibrationPoint,
}

impl CalibrationOutcome {
    /// `base` with the selected calibration applied.
    pub fn apply(&self, base: &Scenario) -> Scenario {
        let mut s = base.clone();
        s.semi_angle_deg = self.best.semi_angle_deg;
        s.ris.wedge_angle_rad = self.best.wedge_angle_rad;
        s.concentrator.refr_index_f = self.best.refr_index_f;
        s.receiver.noise_psd_a2_per_hz = self.best.noise_psd;
        s
    }
}

struct GeometryFields {
    semi_angle_deg: f64,
    wedge_angle_rad: f64,
    refr_index_f: f64,
    /// Illuminance and received power per scheme, `SchemeName::ALL` order.
    illuminance: Vec<Vec<f64>>,
    received: Vec<Vec<f64>>,
}

fn received_power_field(scene: &Scene, setup: &OpticsSetup) -> Vec<f64> {
    (0..scene.grid.len())
        .map(|k| {
            let p = scene.grid.cell_center(&scene.room, k % scene.grid.nx, k / scene.grid.nx);
            metrics::received_power_at(&scene.emitters, scene.ris(), &setup.concentrator, &setup.receiver, p)
        })
        .collect()
}

fn strictly_below(a: f64, b: f64) -> bool {
    a < b - ORDER_MARGIN
}

fn score(g: &GeometryFields, noise_psd: f64, rx: &ReceiverModel, model: RateModel) -> CalibrationPoint {
    let rx = ReceiverModel { noise_psd_a2_per_hz: noise_psd, ..*rx };
    let mut uniformity = [(0.0, 0.0); 4];
    let mut min_illum = [0.0; 4];
    let mut min_rate = [0.0; 4];
    for k in 0..4 {
        let rates: Vec<f64> = g.received[k]
            .iter()
            .map(|&p| if p > 0.0 { model.rate(rx.bandwidth_hz, metrics::snr(p, &rx)) } else { 0.0 })
            .collect();
        let iu = metrics::uniformity_of(&g.illuminance[k]).expect("non-empty grid");
        let ru = metrics::uniformity_of(&rates).expect("non-empty grid");
        uniformity[k] = (iu.uniformity, ru.uniformity);
        min_illum[k] = iu.min;
        min_rate[k] = ru.min;
    }
    let (c, r) = (0, 3);
    let illuminance_order = uniformity[c].0 < 0.40 && (1..4).all(|k| strictly_below(uniformity[c].0, uniformity[k].0));
    let rate_uniformity_split = uniformity[r].1 >= 0.7 && (0..3).all(|k| uniformity[k].1 < 0.5);
    let min_illuminance_gain_pct = gain_percent(min_illum[r], min_illum[c]).unwrap_or(f64::INFINITY);
    let illuminance_gain_window = (ILLUMINANCE_GAIN_WINDOW.0..=ILLUMINANCE_GAIN_WINDOW.1).contains(&min_illuminance_gain_pct);
    let min_rate_gain_pct = gain_percent(min_rate[r], min_rate[c]).unwrap_or(f64::INFINITY);
    let largest_other = (0..4)
        .flat_map(|a| (0..4).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b && (a, b) != (c, r))
        .filter_map(|(a, b)| gain_percent(min_rate[b], min_rate[a]).ok())
        .fold(f64::NEG_INFINITY, f64::max);
    let rate_gain_largest = min_rate_gain_pct > 0.0 && min_rate_gain_pct.is_finite() && min_rate_gain_pct > largest_other;

    let mut max_abs_error: f64 = 0.0;
    let mut sq = 0.0;
    for k in 0..4 {
        for (got, want) in [(uniformity[k].0, UNIFORMITY_TARGETS[k].0), (uniformity[k].1, UNIFORMITY_TARGETS[k].1)] {
            max_abs_error = max_abs_error.max((got - want).abs());
            sq += (got - want) * (got - want);
        }
    }
    CalibrationPoint {
        semi_angle_deg: g.semi_angle_deg,
        wedge_angle_rad: g.wedge_angle_rad,
        refr_index_f: g.refr_index_f,
        noise_psd,
        uniformity,
        min_illuminance_gain_pct,
        min_rate_gain_pct,
        checks: CalibrationChecks { illuminance_order, rate_uniformity_split, illuminance_gain_window, rate_gain_largest },
        max_abs_error,
        rms_error: (sq / 8.0).sqrt(),
    }
}

/// Exhaustive sweep over `grid`, scoring each point against the comparison
/// checks and [`UNIFORMITY_TARGETS`]. Needs all four schemes; the scheme
/// list of `base` is ignored.
pub fn calibrate(base: &Scenario, grid: &CalibrationGrid) -> Result<CalibrationOutcome> {
    base.validate()?;
    if grid.is_empty() {
        return Err(Error::invalid("calibration", "empty calibration grid"));
    }
    let mut geometries = Vec::new();
    for &sa in &grid.semi_angles_deg {
        for &wedge in &grid.wedge_angles_rad {
            for &f in &grid.concentrator_f {
                geometries.push((sa, wedge, f));
            }
        }
    }
    let fields: Vec<GeometryFields> = geometries
        .par_iter()
        .map(|&(sa, wedge, f)| -> Result<GeometryFields> {
            let mut s = base.clone();
            s.schemes = SchemeName::ALL.to_vec();
            s.baseline = None;
            s.semi_angle_deg = sa;
            s.ris.wedge_angle_rad = wedge;
            s.concentrator.refr_index_f = f;
            s.validate()?;
            let setup = s.optics();
            let mut illuminance = Vec::with_capacity(4);
            let mut received = Vec::with_capacity(4);
            for name in SchemeName::ALL {
                let scene = s.scene(name)?;
                illuminance.push(compute_field_serial(&scene, Quantity::Illuminance, &setup).values);
                received.push(received_power_field(&scene, &setup));
            }
            Ok(GeometryFields { semi_angle_deg: sa, wedge_angle_rad: wedge, refr_index_f: f, illuminance, received })
        })
        .collect::<Result<_>>()?;
    let points: Vec<CalibrationPoint> = fields
        .par_iter()
        .flat_map_iter(|g| grid.noise_psd.iter().map(move |&n0| (g, n0)))
        .map(|(g, n0)| score(g, n0, &base.receiver, base.rate_model))
        .collect();

    let mut best = &points[0];
    let mut closest = &points[0];
    for p in &points[1..] {
        let (pb, bb) = (p.checks.passed(), best.checks.passed());
        if pb > bb || (pb == bb && p.rms_error < best.rms_error) {
            best = p;
        }
        if p.max_abs_error < closest.max_abs_error {
            closest = p;
        }
    }
    Ok(CalibrationOutcome { evaluated: points.len(), best: best.clone(), closest: closest.clone() })
}
