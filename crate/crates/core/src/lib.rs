//! Cable-length autocalibration for cable-driven parallel robots.
//!
//! Metallic marks on a cable pass inductive sensors on the support as the
//! cable winds. Each (mark, sensor) pair fires at a known free length, so
//! the sequence of length increments between detections identifies the
//! absolute cable length once it becomes unique.
//!
//! - [`model`]: geometry, layouts and the seven design conditions.
//! - [`designer`]: constructive layout from gap pools.
//! - [`events`]: event enumeration, rectification, Δρ statistics, stroke profile.
//! - [`simulator`]: synthetic winding traces read through an imperfect encoder.
//! - [`identifier`]: online candidate elimination and encoder correction.
//! - [`optimizer`]: search over pool orderings.
//! - [`config`]: the TOML design file shared by the command-line tool.

pub mod config;
pub mod designer;
pub mod error;
pub mod events;
pub mod fixtures;
pub mod identifier;
pub mod model;
pub mod optimizer;
pub mod simulator;

/// Geometric tolerance for equalities between lengths and times.
pub const EPS_GEOM: f64 = 1e-9;

/// Default matching tolerance on observed Δρ, in metres.
pub const DEFAULT_GAP_TOLERANCE: f64 = 0.05;

pub use config::{DesignConfig, Tolerances};
pub use designer::{build_design, BuiltDesign, DesignRecipe};
pub use error::{Error, Result};
pub use events::{
    delta_stats, enumerate_events, rectify, stroke_profile, DeltaStats, Event, EventTable,
    StrokeProfile,
};
pub use identifier::{run_trace, CalibrationResult, ClosedLoopCorrector, IdentifierState, Status};
pub use model::{
    validate_design, CalibrationDesign, Condition, ConditionReport, MarkLayout, RobotGeometry,
    SensorLayout,
};
pub use optimizer::{compare, score, search, ObjectiveScore, SearchResult};
pub use simulator::{simulate, wound_between, EncoderModel, ObservationTrace, TraceRecord};
