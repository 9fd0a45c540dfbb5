//! Physical-layer formulas: Lambertian emission, line-of-sight DC gain,
//! non-imaging concentrator gain and the liquid-crystal RIS front end
//! (Fresnel transmission, stimulated-emission amplification, thin-prism
//! steering).
//!
//! Every function here is pure. Configs are plain values that can be shared
//! freely across threads.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::LinkGeometry;

/// Peak luminous efficacy of radiation, lm/W.
pub const LUMINOUS_EFFICACY_LM_PER_W: f64 = 683.0;

/// Photopic luminosity V(λ) at 510 nm.
pub const LUMINOSITY_510NM: f64 = 0.503;

/// Largest prism wedge for which the thin-prism deviation formula is used.
pub const MAX_WEDGE_ANGLE_RAD: f64 = 15.0 * PI / 180.0;

/// Floor applied to the incidence angle when the literal `f²/sin²φ`
/// concentrator formula is selected.
pub const LITERAL_CONCENTRATOR_FLOOR_RAD: f64 = PI / 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("semi-angle {0}° is outside the open interval (0°, 90°)")]
    SemiAngle(f64),
    #[error("total internal reflection: n_from·sin θ / n_to = {ratio} exceeds 1")]
    TotalInternalReflection { ratio: f64 },
    #[error("incidence angle {0} rad is outside [0, π/2]")]
    IncidenceAngle(f64),
    #[error("{field}: {message}")]
    InvalidConfig { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> OpticsError {
    OpticsError::InvalidConfig { field, message: message.into() }
}

/// How a non-zero steering deviation is applied to the aggregated source
/// behind the RIS.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SteeringMode {
    /// Split the source into `array_count` co-located sub-beams, each
    /// deflected outward toward its own diagonal azimuth. Keeps the field
    /// symmetric about the room center.
    #[default]
    Split,
    /// Tilt the whole beam toward one azimuth (degrees from +x).
    Axis { azimuth_deg: f64 },
}

/// Liquid-crystal RIS element placed in front of the LED arrays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcRisConfig {
    pub n_air: f64,
    pub n_lc: f64,
    pub thickness_m: f64,
    /// Stimulated-emission gain coefficient, 1/m.
    pub gamma_per_m: f64,
    pub drive_voltage_v: f64,
    pub threshold_voltage_v: f64,
    pub wedge_angle_rad: f64,
    pub steering: SteeringMode,
}

impl LcRisConfig {
    /// Gain coefficient giving `exp(Γ·d) = 10` for the default 0.75 mm slab.
    pub const DEFAULT_GAMMA_PER_M: f64 = std::f64::consts::LN_10 / 7.5e-4;

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.n_air >= 1.0) {
            return Err(invalid("n_air", "must be ≥ 1"));
        }
        if !(self.n_lc >= self.n_air) || !self.n_lc.is_finite() {
            return Err(invalid("n_lc", "must be finite and ≥ n_air"));
        }
        if !(self.thickness_m > 0.0) || !self.thickness_m.is_finite() {
            return Err(invalid("thickness_m", "must be > 0"));
        }
        if !(self.gamma_per_m >= 0.0) || !self.gamma_per_m.is_finite() {
            return Err(invalid("gamma_per_m", "must be finite and ≥ 0"));
        }
        if !(self.threshold_voltage_v > 0.0) {
            return Err(invalid("threshold_voltage_v", "must be > 0"));
        }
        if !self.drive_voltage_v.is_finite() {
            return Err(invalid("drive_voltage_v", "must be finite"));
        }
        if !(self.wedge_angle_rad.abs() <= MAX_WEDGE_ANGLE_RAD) {
            return Err(invalid("wedge_angle_rad", "thin-prism model requires |wedge| ≤ 15°"));
        }
        if let SteeringMode::Axis { azimuth_deg } = self.steering {
            if !azimuth_deg.is_finite() {
                return Err(invalid("steering", "azimuth must be finite"));
            }
        }
        Ok(())
    }
}

impl Default for LcRisConfig {
    fn default() -> Self {
        LcRisConfig {
            n_air: 1.0,
            n_lc: 1.55,
            thickness_m: 7.5e-4,
            gamma_per_m: Self::DEFAULT_GAMMA_PER_M,
            drive_voltage_v: 2.1,
            threshold_voltage_v: 1.34,
            wedge_angle_rad: 0.0,
            steering: SteeringMode::Split,
        }
    }
}

/// Non-imaging concentrator feeding the RIS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentratorConfig {
    /// Internal refractive index `f`.
    pub refr_index_f: f64,
    pub accept_semi_angle_deg: f64,
    /// Use `f²/sin²φ` evaluated at the incidence angle instead of the
    /// acceptance-angle constant.
    #[serde(default)]
    pub literal_concentrator: bool,
}

impl ConcentratorConfig {
    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.refr_index_f >= 1.0) || !self.refr_index_f.is_finite() {
            return Err(invalid("refr_index_f", "must be finite and ≥ 1"));
        }
        if !(self.accept_semi_angle_deg > 0.0 && self.accept_semi_angle_deg <= 90.0) {
            return Err(invalid("accept_semi_angle_deg", "must lie in (0°, 90°]"));
        }
        Ok(())
    }
}

/// Photodetector front end used for the rate computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverModel {
    pub area_m2: f64,
    pub fov_semi_angle_deg: f64,
    pub responsivity_a_per_w: f64,
    pub noise_psd_a2_per_hz: f64,
    pub bandwidth_hz: f64,
    /// Optical filter transmittance `T_f`.
    pub filter_gain: f64,
}

impl ReceiverModel {
    /// Calibrated single-sided noise spectral density (A²/Hz).
    pub const DEFAULT_NOISE_PSD: f64 = 3.2e-22;

    pub fn validate(&self) -> Result<(), OpticsError> {
        let positive = [
            ("area_m2", self.area_m2),
            ("fov_semi_angle_deg", self.fov_semi_angle_deg),
            ("responsivity_a_per_w", self.responsivity_a_per_w),
            ("noise_psd_a2_per_hz", self.noise_psd_a2_per_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("filter_gain", self.filter_gain),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(field, "must be finite and > 0"));
            }
        }
        if self.fov_semi_angle_deg > 90.0 {
            return Err(invalid("fov_semi_angle_deg", "must be ≤ 90°"));
        }
        Ok(())
    }
}

impl Default for ReceiverModel {
    fn default() -> Self {
        ReceiverModel {
            area_m2: 1e-4,
            fov_semi_angle_deg: 70.0,
            responsivity_a_per_w: 0.53,
            noise_psd_a2_per_hz: Self::DEFAULT_NOISE_PSD,
            bandwidth_hz: 2e8,
            filter_gain: 1.0,
        }
    }
}

/// Optical-to-luminous conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Photometry {
    /// δ, optical watts per lumen.
    pub delta_w_per_lm: f64,
    pub wavelength_nm: f64,
    pub luminosity_v: f64,
}

impl Photometry {
    pub fn from_luminosity(wavelength_nm: f64, luminosity_v: f64) -> Self {
        Photometry {
            delta_w_per_lm: 1.0 / (LUMINOUS_EFFICACY_LM_PER_W * luminosity_v),
            wavelength_nm,
            luminosity_v,
        }
    }

    pub fn lumens_per_watt(&self) -> f64 {
        1.0 / self.delta_w_per_lm
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.delta_w_per_lm > 0.0) || !self.delta_w_per_lm.is_finite() {
            return Err(invalid("delta_w_per_lm", "must be finite and > 0"));
        }
        Ok(())
    }
}

impl Default for Photometry {
    fn default() -> Self {
        Photometry::from_luminosity(510.0, LUMINOSITY_510NM)
    }
}

/// Electrical-SNR rate expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `B·log₂(1 + SNR)`.
    #[default]
    Shannon,
    /// IM/DD capacity lower bound `B·log₂(1 + e/(2π)·SNR)`.
    LowerBound,
}

impl RateModel {
    pub fn rate(self, bandwidth_hz: f64, snr: f64) -> f64 {
        let scale = match self {
            RateModel::Shannon => 1.0,
            RateModel::LowerBound => std::f64::consts::E / (2.0 * PI),
        };
        bandwidth_hz * (scale * snr).ln_1p() / std::f64::consts::LN_2
    }
}

/// `m = −1 / log₂(cos φ½)`.
pub fn lambertian_order(semi_angle_deg: f64) -> Result<f64, OpticsError> {
    if !(semi_angle_deg > 0.0 && semi_angle_deg < 90.0) {
        return Err(OpticsError::SemiAngle(semi_angle_deg));
    }
    let m = -1.0 / semi_angle_deg.to_radians().cos().log2();
    // cos(60°) evaluates to 0.5000000000000001; snap such residue to the integer order
    let nearest = m.round();
    Ok(if (m - nearest).abs() <= 1e-12 * nearest.max(1.0) { nearest } else { m })
}

/// Lambertian LoS DC gain, zero outside the emitter half-space or the
/// receiver field of view. When `concentrator` is given its gain replaces
/// the unit receiver optics.
pub fn los_gain(
    geom: &LinkGeometry,
    order: f64,
    rx: &ReceiverModel,
    concentrator: Option<&ConcentratorConfig>,
) -> f64 {
    if geom.irradiance_angle_rad > PI / 2.0
        || geom.incidence_angle_rad > rx.fov_semi_angle_deg.to_radians()
        || geom.cos_incidence < 0.0
    {
        return 0.0;
    }
    let optics = match concentrator {
        Some(c) => concentrator_gain(geom.incidence_angle_rad, c),
        None => 1.0,
    };
    (order + 1.0) * rx.area_m2 / (2.0 * PI * geom.distance_m * geom.distance_m)
        * geom.cos_irradiance.max(0.0).powf(order)
        * rx.filter_gain
        * optics
        * geom.cos_incidence
}

/// Concentrator gain over its acceptance cone; zero outside.
pub fn concentrator_gain(phi_rad: f64, c: &ConcentratorConfig) -> f64 {
    let accept = c.accept_semi_angle_deg.to_radians();
    if phi_rad < 0.0 || phi_rad > accept {
        return 0.0;
    }
    let f2 = c.refr_index_f * c.refr_index_f;
    if c.literal_concentrator {
        let s = phi_rad.max(LITERAL_CONCENTRATOR_FLOOR_RAD).sin();
        f2 / (s * s)
    } else {
        let s = accept.sin();
        f2 / (s * s)
    }
}

/// The LC molecules reorient only above the threshold voltage.
pub fn ris_active(cfg: &LcRisConfig) -> bool {
    cfg.drive_voltage_v > cfg.threshold_voltage_v
}

/// Two-face normal-incidence Fresnel transmittance `α_LC = T²`.
pub fn lc_transmission(cfg: &LcRisConfig) -> f64 {
    let sum = cfg.n_air + cfg.n_lc;
    let t = 4.0 * cfg.n_air * cfg.n_lc / (sum * sum);
    t * t
}

/// `exp(Γ·d)` when biased above threshold, otherwise 1.
pub fn amplification_factor(cfg: &LcRisConfig) -> f64 {
    if ris_active(cfg) {
        (cfg.gamma_per_m * cfg.thickness_m).exp()
    } else {
        1.0
    }
}

/// Refraction angle from Snell's law.
pub fn snell_angle(theta_in_rad: f64, n_from: f64, n_to: f64) -> Result<f64, OpticsError> {
    if !(0.0..=PI / 2.0).contains(&theta_in_rad) {
        return Err(OpticsError::IncidenceAngle(theta_in_rad));
    }
    let ratio = n_from * theta_in_rad.sin() / n_to;
    if ratio > 1.0 {
        return Err(OpticsError::TotalInternalReflection { ratio });
    }
    Ok(ratio.clamp(-1.0, 1.0).asin())
}

/// Thin-prism boresight deviation `(n_lc/n_air − 1)·wedge`; zero when the
/// RIS is not biased.
pub fn steering_deviation(cfg: &LcRisConfig) -> f64 {
    if !ris_active(cfg) || cfg.wedge_angle_rad == 0.0 {
        return 0.0;
    }
    (cfg.n_lc / cfg.n_air - 1.0) * cfg.wedge_angle_rad
}

/// Optical power leaving the transmitter. Without a RIS the LED power is
/// radiated unchanged.
pub fn effective_emitted_power(p_in_w: f64, ris: Option<&LcRisConfig>) -> f64 {
    match ris {
        Some(cfg) => amplification_factor(cfg) * lc_transmission(cfg) * p_in_w,
        None => p_in_w,
    }
}
