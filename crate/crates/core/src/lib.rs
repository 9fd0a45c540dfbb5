//! Indoor visible-light-communication simulator comparing centralized,
//! distributed, angle-diversity and liquid-crystal RIS transmitter layouts
//! on illuminance and achievable data rate.

// `!(x > 0.0)` is how validation rejects NaN alongside out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod optics;
pub mod scene;

pub use error::{Error, Result};
pub use experiment::{
    calibrate, power_sweep, run_scenario, run_scenario_with, CalibrationGrid, CalibrationOutcome,
    ComparisonReport, Execution, Metric, Scenario, SchemeName, SweepSpec, SweepTable,
};
pub use metrics::{compute_field, uniformity, FieldMap, OpticsSetup, Quantity, UniformityReport};
pub use optics::{ConcentratorConfig, LcRisConfig, Photometry, RateModel, ReceiverModel, SteeringMode};
pub use scene::{Emitter, GridSpec, LayoutScheme, Room, Scene, SchemeKind, Vec3};
