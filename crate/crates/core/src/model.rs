//! Geometric domain types and the design validator.
//!
//! Conventions: all lengths are meters. The winch center is `O`, the top of
//! the support is `A`, the platform attachment point is `B`. Sensors are
//! numbered from the lowest (`S_1`) upwards; marks are numbered from the
//! one farthest from `B` (`M_1`, nearest `A` when the cable is fully paid
//! out) towards `B`. Indices exposed by this crate are 1-based.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events;
use crate::EPS_GEOM;

/// Support and winding parameters of a single cable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct RobotGeometry {
    h: f64,
    rho_max: f64,
    v: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    h: f64,
    rho_max: f64,
    v: f64,
    b: f64,
}

impl TryFrom<RawGeometry> for RobotGeometry {
    type Error = Error;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        RobotGeometry::new(raw.h, raw.rho_max, raw.v, raw.b)
    }
}

impl From<RobotGeometry> for RawGeometry {
    fn from(g: RobotGeometry) -> Self {
        RawGeometry {
            h: g.h,
            rho_max: g.rho_max,
            v: g.v,
            b: g.b,
        }
    }
}

impl RobotGeometry {
    /// `h` support height, `rho_max` maximum free length `|AB|`, `v` winding
    /// speed, `b` boost reserve.
    pub fn new(h: f64, rho_max: f64, v: f64, b: f64) -> Result<Self> {
        let finite = [h, rho_max, v, b].iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidGeometry("non-finite value".into()));
        }
        if h <= 0.0 {
            return Err(Error::InvalidGeometry(format!("h must be > 0, got {h}")));
        }
        if rho_max <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "rho_max must be > 0, got {rho_max}"
            )));
        }
        if v <= 0.0 {
            return Err(Error::InvalidGeometry(format!("v must be > 0, got {v}")));
        }
        if b < 0.0 {
            return Err(Error::InvalidGeometry(format!("b must be >= 0, got {b}")));
        }
        Ok(Self { h, rho_max, v, b })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Total cable length from the winch center to `B` at full pay-out.
    pub fn l_max(&self) -> f64 {
        self.h + self.rho_max
    }
}

/// Sensor heights `|OS_j|`, strictly ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLayout {
    heights: Vec<f64>,
}

impl SensorLayout {
    pub fn new(heights: Vec<f64>) -> Result<Self> {
        if heights.is_empty() {
            return Err(Error::InvalidSensorLayout("no sensors".into()));
        }
        if heights.iter().any(|h| !h.is_finite() || *h <= 0.0) {
            return Err(Error::InvalidSensorLayout(
                "heights must be finite and > 0".into(),
            ));
        }
        if let Some(k) = heights.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSensorLayout(format!(
                "heights must strictly ascend: S_{} = {} is not above S_{} = {}",
                k + 2,
                heights[k + 1],
                k + 1,
                heights[k]
            )));
        }
        Ok(Self { heights })
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    /// `|OS_j|` for a 1-based index.
    pub fn height(&self, j: usize) -> Result<f64> {
        if j == 0 || j > self.heights.len() {
            return Err(Error::SensorIndex {
                index: j,
                count: self.heights.len(),
            });
        }
        Ok(self.heights[j - 1])
    }

    /// Gaps `z_j = |OS_{j+1}| - |OS_j|`.
    pub fn gaps(&self) -> Vec<f64> {
        self.heights.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Mark positions `|BM_i|`, strictly descending.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkLayout {
    positions: Vec<f64>,
}

impl MarkLayout {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidMarkLayout("no marks".into()));
        }
        if positions.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::InvalidMarkLayout(
                "positions must be finite and > 0".into(),
            ));
        }
        if let Some(k) = positions.windows(2).position(|w| w[1] >= w[0]) {
            return Err(Error::InvalidMarkLayout(format!(
                "positions must strictly descend: M_{} = {} is not below M_{} = {}",
                k + 2,
                positions[k + 1],
                k + 1,
                positions[k]
            )));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `|BM_i|` for a 1-based index.
    pub fn position(&self, i: usize) -> Result<f64> {
        if i == 0 || i > self.positions.len() {
            return Err(Error::MarkIndex {
                index: i,
                count: self.positions.len(),
            });
        }
        Ok(self.positions[i - 1])
    }

    /// Inter-mark gaps `d_i = |BM_i| - |BM_{i+1}|`, for `i = 1..n_m-1`.
    pub fn gaps(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[0] - w[1]).collect()
    }

    /// Distal reserve `d_n = |BM_n|`.
    pub fn distal_reserve(&self) -> f64 {
        *self.positions.last().expect("layout is non-empty")
    }
}

/// Geometry plus sensor and mark layouts.
///
/// Only structural invariants are enforced here; the placement conditions
/// are evaluated by [`validate_design`], so non-conforming designs can still
/// be built and studied.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDesign {
    geometry: RobotGeometry,
    sensors: SensorLayout,
    marks: MarkLayout,
}

impl CalibrationDesign {
    pub fn new(geometry: RobotGeometry, sensors: SensorLayout, marks: MarkLayout) -> Result<Self> {
        let top = *sensors.heights().last().expect("non-empty");
        if top >= geometry.h() {
            return Err(Error::InvalidSensorLayout(format!(
                "top sensor at {top} must be below the support height {}",
                geometry.h()
            )));
        }
        Ok(Self {
            geometry,
            sensors,
            marks,
        })
    }

    pub fn geometry(&self) -> &RobotGeometry {
        &self.geometry
    }

    pub fn sensors(&self) -> &SensorLayout {
        &self.sensors
    }

    pub fn marks(&self) -> &MarkLayout {
        &self.marks
    }

    pub fn mark_count(&self) -> usize {
        self.marks.len()
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    /// Proximal reserve `d_0 = rho_max - |BM_1|`.
    pub fn proximal_reserve(&self) -> f64 {
        self.geometry.rho_max() - self.marks.positions()[0]
    }

    /// Mark gap sequence starting with `d_0`: `[d_0, d_1, ..., d_{n-1}]`.
    pub fn mark_gap_sequence(&self) -> Vec<f64> {
        let mut seq = Vec::with_capacity(self.marks.len());
        seq.push(self.proximal_reserve());
        seq.extend(self.marks.gaps());
        seq
    }

    /// Free length `|AB|` when mark `i` faces sensor `j`.
    pub fn rho_at(&self, i: usize, j: usize) -> Result<f64> {
        let bm = self.marks.position(i)?;
        let os = self.sensors.height(j)?;
        Ok(bm - (self.geometry.h() - os))
    }
}

pub fn l_max(geometry: &RobotGeometry) -> f64 {
    geometry.l_max()
}

pub fn rho_at(design: &CalibrationDesign, i: usize, j: usize) -> Result<f64> {
    design.rho_at(i, j)
}

/// The seven placement conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
}

impl Condition {
    pub const ALL: [Condition; 7] = [
        Condition::C1,
        Condition::C2,
        Condition::C3,
        Condition::C4,
        Condition::C5,
        Condition::C6,
        Condition::C7,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Condition::C1 => "proximal reserve d_0 is the minimum gap and tops the sensor rail",
            Condition::C2 => "no two marks superpose",
            Condition::C3 => "h - |OS_1| - d_n + b = 0",
            Condition::C4 => "no two sensors superpose",
            Condition::C5 => "each detection instant maps to a unique event",
            Condition::C6 => "successive mark gaps vary",
            Condition::C7 => "successive sensor gaps vary",
        }
    }

    /// C6 and C7 are quality conditions: a design failing them is still usable.
    pub fn is_advisory(self) -> bool {
        matches!(self, Condition::C6 | Condition::C7)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEntry {
    pub condition: Condition,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn entries(&self) -> &[ConditionEntry] {
        &self.entries
    }

    pub fn entry(&self, c: Condition) -> &ConditionEntry {
        &self.entries[c as usize]
    }

    pub fn passed(&self, c: Condition) -> bool {
        self.entry(c).passed
    }

    /// C1 through C5 all pass.
    pub fn is_conforming(&self) -> bool {
        self.entries
            .iter()
            .filter(|e| !e.condition.is_advisory())
            .all(|e| e.passed)
    }

    /// Failed advisory conditions (C6, C7).
    pub fn warnings(&self) -> Vec<Condition> {
        self.entries
            .iter()
            .filter(|e| e.condition.is_advisory() && !e.passed)
            .map(|e| e.condition)
            .collect()
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let status = match (e.passed, e.condition.is_advisory()) {
                (true, _) => "pass",
                (false, true) => "WARN",
                (false, false) => "FAIL",
            };
            writeln!(
                f,
                "{:<3} {:<5} {:<68} {}",
                e.condition,
                status,
                e.condition.title(),
                e.detail
            )?;
        }
        Ok(())
    }
}

pub fn validate_design(design: &CalibrationDesign) -> ConditionReport {
    validate_design_with(design, EPS_GEOM)
}

pub fn validate_design_with(design: &CalibrationDesign, eps: f64) -> ConditionReport {
    let g = design.geometry();
    let d0 = design.proximal_reserve();
    let gaps = design.marks().gaps();
    let dn = design.marks().distal_reserve();
    let heights = design.sensors().heights();
    let z = design.sensors().gaps();
    let os1 = heights[0];
    let osn = *heights.last().expect("non-empty");

    let mut entries = Vec::with_capacity(7);

    // C1
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let min_ok = d0 > eps && d0 <= min_gap + eps;
    let top_ok = (osn - (g.h() - d0)).abs() <= eps;
    let detail = match (min_ok, top_ok) {
        (true, true) => format!("d_0 = {d0}, |OS_n| = {osn}"),
        (false, _) if d0 <= eps => format!("d_0 = {d0} is not positive"),
        (false, _) => format!("d_0 = {d0} exceeds the smallest mark gap {min_gap}"),
        (true, false) => format!("|OS_n| = {osn} but h - d_0 = {}", g.h() - d0),
    };
    entries.push(ConditionEntry {
        condition: Condition::C1,
        passed: min_ok && top_ok,
        detail,
    });

    // C2
    let bad: Vec<usize> = gaps
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= eps)
        .map(|(k, _)| k + 1)
        .collect();
    let passed = bad.is_empty() && d0 > eps && dn > eps;
    let detail = if passed {
        format!("{} gaps, all > 0", gaps.len())
    } else if !bad.is_empty() {
        format!("zero gaps at d_{bad:?}")
    } else {
        format!("reserve not positive (d_0 = {d0}, d_n = {dn})")
    };
    entries.push(ConditionEntry {
        condition: Condition::C2,
        passed,
        detail,
    });

    // C3
    let residual = g.h() - os1 - dn + g.b();
    entries.push(ConditionEntry {
        condition: Condition::C3,
        passed: residual.abs() <= eps,
        detail: format!("residual {residual}"),
    });

    // C4
    let bad: Vec<usize> = z
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= eps)
        .map(|(k, _)| k + 1)
        .collect();
    entries.push(ConditionEntry {
        condition: Condition::C4,
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} sensor gaps, all > 0", z.len())
        } else {
            format!("zero sensor gaps at z_{bad:?}")
        },
    });

    // C5
    let raw = events::enumerate_events_with(design, eps);
    let rectified = events::rectify_with(&raw, eps);
    let groups = raw.len() - rectified.len();
    let unique = rectified.is_rectified_with(eps);
    let passed = !rectified.is_empty() && unique;
    entries.push(ConditionEntry {
        condition: Condition::C5,
        passed,
        detail: if rectified.is_empty() {
            "no detectable events".to_string()
        } else {
            format!(
                "{} raw events, {} simultaneous dropped, {} exploitable",
                raw.len(),
                groups,
                rectified.len()
            )
        },
    });

    // C6
    let seq = design.mark_gap_sequence();
    let bad = equal_neighbours(&seq, eps);
    entries.push(ConditionEntry {
        condition: Condition::C6,
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "successive mark gaps all differ".into()
        } else {
            format!("equal successive gaps at (d_k, d_k+1), k = {bad:?}")
        },
    });

    // C7
    let bad = equal_neighbours(&z, eps);
    entries.push(ConditionEntry {
        condition: Condition::C7,
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "successive sensor gaps all differ".into()
        } else {
            format!("equal successive sensor gaps at (z_k, z_k+1), k = {bad:?}")
        },
    });

    ConditionReport { entries }
}

// Indices k (0-based) where seq[k] and seq[k+1] coincide.
fn equal_neighbours(seq: &[f64], eps: f64) -> Vec<usize> {
    seq.windows(2)
        .enumerate()
        .filter(|(_, w)| (w[1] - w[0]).abs() <= eps)
        .map(|(k, _)| k)
        .collect()
}
