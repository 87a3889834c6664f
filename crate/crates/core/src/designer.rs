//! Constructive layout design from a geometry and gap pools.
//!
//! Sensors start at `|OS_1|` (default `h/3`) and climb through the sensor
//! gap pool, with the top sensor pinned at `h - d_0`. Marks start at
//! `rho_max - d_0` and descend through the mark gap pool in pool order; a
//! short tail of pool gaps then closes the layout exactly on `d_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_design, CalibrationDesign, ConditionReport, MarkLayout, RobotGeometry, SensorLayout,
};
use crate::EPS_GEOM;

/// Longest tail searched when closing a mark layout.
const MAX_TAIL: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecipe {
    pub geometry: RobotGeometry,
    /// Candidate mark gaps, cycled in this order.
    pub d_pool: Vec<f64>,
    /// Candidate sensor gaps, cycled in this order.
    pub z_pool: Vec<f64>,
    /// Height of the lowest sensor; defaults to `h/3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub os1: Option<f64>,
    /// Explicit sensor heights, bypassing sensor placement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_heights_override: Option<Vec<f64>>,
    /// Fixes the number of marks; the last three are then the closing tail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark_count: Option<usize>,
}

impl DesignRecipe {
    pub fn new(geometry: RobotGeometry, d_pool: Vec<f64>, z_pool: Vec<f64>) -> Self {
        Self {
            geometry,
            d_pool,
            z_pool,
            os1: None,
            sensor_heights_override: None,
            mark_count: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_pool("d_pool", &self.d_pool)?;
        check_pool("z_pool", &self.z_pool)?;
        if let Some(os1) = self.os1 {
            if !(os1 > 0.0 && os1 < self.geometry.h()) {
                return Err(Error::InvalidRecipe(format!(
                    "os1 = {os1} must lie in (0, h)"
                )));
            }
        }
        if self.mark_count == Some(0) {
            return Err(Error::InvalidRecipe("mark_count must be >= 1".into()));
        }
        Ok(())
    }
}

fn check_pool(name: &str, pool: &[f64]) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::InvalidRecipe(format!("{name} is empty")));
    }
    if pool.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::InvalidRecipe(format!(
            "{name} values must be finite and > 0"
        )));
    }
    Ok(())
}

pub fn first_sensor_height(geometry: &RobotGeometry) -> f64 {
    geometry.h() / 3.0
}

/// `d_n = h - |OS_1| + b`, the value that satisfies C.3.
pub fn distal_reserve(geometry: &RobotGeometry, os1: f64) -> f64 {
    geometry.h() - os1 + geometry.b()
}

/// `1 + (h - d_0 - |OS_1|) / z_bar`, truncated toward zero.
pub fn sensor_count(geometry: &RobotGeometry, d0: f64, os1: f64, z_bar: f64) -> Result<usize> {
    Ok(sensor_count_exact(geometry, d0, os1, z_bar)?.floor() as usize)
}

fn sensor_count_exact(geometry: &RobotGeometry, d0: f64, os1: f64, z_bar: f64) -> Result<f64> {
    if z_bar <= 0.0 || !z_bar.is_finite() {
        return Err(Error::NonPositiveDenominator(z_bar));
    }
    let span = geometry.h() - d0 - os1;
    if span < -EPS_GEOM {
        return Err(Error::InvalidRecipe(format!(
            "first sensor {os1} lies above the top sensor position {}",
            geometry.h() - d0
        )));
    }
    // absorb binary noise just below an integer
    Ok(1.0 + span.max(0.0) / z_bar + EPS_GEOM)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountEstimate {
    pub value: f64,
    /// `value` rounded to the nearest integer (halves up).
    pub rounded: usize,
}

/// Advisory `1 + (rho_max - d_0 - d_n) / d_bar`.
pub fn mark_count_estimate(
    geometry: &RobotGeometry,
    d0: f64,
    dn: f64,
    d_bar: f64,
) -> Result<CountEstimate> {
    if d_bar <= 0.0 || !d_bar.is_finite() {
        return Err(Error::NonPositiveDenominator(d_bar));
    }
    let value = 1.0 + (geometry.rho_max() - d0 - dn) / d_bar;
    Ok(CountEstimate {
        value,
        rounded: value.max(0.0).round() as usize,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sensor heights from `os1` upwards, cycling through `z_list`; the count
/// follows [`sensor_count`] with the pool mean and the top sensor sits at
/// `h - d0`.
pub fn place_sensors(
    geometry: &RobotGeometry,
    os1: f64,
    z_list: &[f64],
    d0: f64,
) -> Result<SensorLayout> {
    check_pool("z_pool", z_list)?;
    let top = geometry.h() - d0;
    if os1 > top + EPS_GEOM {
        return Err(Error::SensorOvershoot { height: os1, top });
    }
    let mut n = sensor_count(geometry, d0, os1, mean(z_list))?;
    if os1 >= top - EPS_GEOM {
        return SensorLayout::new(vec![top]);
    }
    // the top sensor is mandatory, so a single-sensor count still gets it
    n = n.max(2);
    let mut heights = Vec::with_capacity(n);
    heights.push(os1);
    for k in 0..n - 2 {
        let next = heights[k] + z_list[k % z_list.len()];
        if next >= top - EPS_GEOM {
            return Err(Error::SensorOvershoot { height: next, top });
        }
        heights.push(next);
    }
    heights.push(top);
    SensorLayout::new(heights)
}

/// Mark positions from `rho_max - d0` down to exactly `dn`.
///
/// Regular gaps are taken from `d_pool` cyclically, starting right after the
/// pool's minimum (which is `d0` itself). Without `mark_count`, the regular
/// run stops once at most twice the largest pool gap remains above `dn`;
/// with it, the regular run stops three marks short of the count. The
/// remaining distance is closed by a tail of pool gaps (see
/// [`choose_tail`]).
pub fn place_marks(
    geometry: &RobotGeometry,
    d0: f64,
    dn: f64,
    d_pool: &[f64],
    mark_count: Option<usize>,
) -> Result<MarkLayout> {
    check_pool("d_pool", d_pool)?;
    if dn <= EPS_GEOM {
        return Err(Error::InvalidRecipe(format!(
            "d_n = {dn} leaves no room for a mark"
        )));
    }
    let first = geometry.rho_max() - d0;
    if first < dn - EPS_GEOM {
        return Err(Error::InvalidRecipe(format!(
            "rho_max = {} is shorter than d_0 + d_n = {}",
            geometry.rho_max(),
            d0 + dn
        )));
    }
    if (first - dn).abs() <= EPS_GEOM {
        if mark_count.is_some_and(|n| n != 1) {
            return Err(Error::InvalidRecipe(
                "only one mark fits between d_0 and d_n".into(),
            ));
        }
        return MarkLayout::new(vec![dn]);
    }

    let largest = d_pool.iter().copied().fold(f64::MIN, f64::max);
    let min_at = d_pool
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("non-empty");
    let mut cursor = (min_at + 1) % d_pool.len();
    let mut prev = d0;
    let mut positions = vec![first];
    let regular_len = mark_count.map(|n| n.saturating_sub(3).max(1));

    loop {
        let last = *positions.last().expect("non-empty");
        let rem = last - dn;
        if rem <= EPS_GEOM {
            *positions.last_mut().expect("non-empty") = dn;
            if let Some(n) = mark_count {
                if positions.len() != n {
                    return Err(Error::InvalidRecipe(format!(
                        "regular placement reaches d_n after {} marks, not {n}",
                        positions.len()
                    )));
                }
            }
            return MarkLayout::new(positions);
        }
        let stop = match regular_len {
            Some(len) => positions.len() >= len,
            None => rem <= 2.0 * largest + EPS_GEOM,
        };
        let gap = d_pool[cursor];
        if stop || last - gap < dn - EPS_GEOM {
            break;
        }
        positions.push(last - gap);
        prev = gap;
        cursor = (cursor + 1) % d_pool.len();
    }

    let last = *positions.last().expect("non-empty");
    let rem = last - dn;
    let lengths: Vec<usize> = match mark_count {
        Some(n) => {
            let l = n.saturating_sub(positions.len());
            if l == 0 || l > MAX_TAIL {
                return Err(Error::InfeasibleTail { remaining: rem, dn });
            }
            vec![l]
        }
        None => vec![3, 2, 1],
    };
    let cycle: Vec<f64> = (0..d_pool.len())
        .map(|k| d_pool[(cursor + k) % d_pool.len()])
        .collect();
    for distinct in [true, false] {
        for &len in &lengths {
            if let Some(tail) = choose_tail(d_pool, &cycle, prev, rem, len, distinct) {
                let mut pos = last;
                for g in &tail[..len - 1] {
                    pos -= g;
                    positions.push(pos);
                }
                positions.push(dn);
                return MarkLayout::new(positions);
            }
        }
    }
    Err(Error::InfeasibleTail { remaining: rem, dn })
}

/// Picks `len` pool gaps summing to `rem`.
///
/// First choice: `len - 1` consecutive gaps of the continuing cycle (trying
/// each cycle offset in turn) followed by one closing pool gap. Otherwise
/// the feasible tuple with the smallest largest gap, earliest in pool order.
/// With `distinct`, no gap may equal its predecessor (starting from `prev`).
fn choose_tail(
    pool: &[f64],
    cycle: &[f64],
    prev: f64,
    rem: f64,
    len: usize,
    distinct: bool,
) -> Option<Vec<f64>> {
    let feasible = |tail: &[f64]| -> bool {
        let sum: f64 = tail.iter().sum();
        if (sum - rem).abs() > EPS_GEOM {
            return false;
        }
        if distinct {
            let mut p = prev;
            for &g in tail {
                if (g - p).abs() <= EPS_GEOM {
                    return false;
                }
                p = g;
            }
        }
        true
    };
    let closing = |head: &[f64]| -> Option<Vec<f64>> {
        let c = rem - head.iter().sum::<f64>();
        let g = *pool.iter().find(|g| (**g - c).abs() <= EPS_GEOM)?;
        let mut tail = head.to_vec();
        tail.push(g);
        feasible(&tail).then_some(tail)
    };

    let offsets = if len == 1 { 1 } else { cycle.len() };
    for s in 0..offsets {
        let head: Vec<f64> = (0..len - 1).map(|k| cycle[(s + k) % cycle.len()]).collect();
        if let Some(t) = closing(&head) {
            return Some(t);
        }
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; len];
    loop {
        let tail: Vec<f64> = idx.iter().map(|&k| pool[k]).collect();
        if feasible(&tail) {
            let top = tail.iter().copied().fold(f64::MIN, f64::max);
            if best.as_ref().is_none_or(|(b, _)| top < *b - EPS_GEOM) {
                best = Some((top, tail));
            }
        }
        // odometer over pool indices
        let mut k = len;
        loop {
            if k == 0 {
                return best.map(|(_, t)| t);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < pool.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignSummary {
    pub d0: f64,
    pub os1: f64,
    pub dn: f64,
    /// Unrounded sensor count from the pool-mean formula.
    pub sensor_count_exact: f64,
    pub mark_count_estimate: CountEstimate,
}

#[derive(Debug, Clone)]
pub struct BuiltDesign {
    pub design: CalibrationDesign,
    pub report: ConditionReport,
    pub summary: DesignSummary,
}

pub fn build_design(recipe: &DesignRecipe) -> Result<BuiltDesign> {
    recipe.validate()?;
    let g = &recipe.geometry;
    let d0 = recipe.d_pool.iter().copied().fold(f64::INFINITY, f64::min);
    let os1 = recipe
        .os1
        .or_else(|| recipe.sensor_heights_override.as_ref().map(|h| h[0]))
        .unwrap_or_else(|| first_sensor_height(g));
    let dn = distal_reserve(g, os1);

    let sensors = match &recipe.sensor_heights_override {
        Some(heights) => {
            let layout = SensorLayout::new(heights.clone())?;
            if heights.iter().any(|h| *h >= g.h()) {
                return Err(Error::InvalidSensorLayout(
                    "override heights must lie below h".into(),
                ));
            }
            layout
        }
        None => place_sensors(g, os1, &recipe.z_pool, d0)?,
    };
    let marks = place_marks(g, d0, dn, &recipe.d_pool, recipe.mark_count)?;
    let design = CalibrationDesign::new(*g, sensors, marks)?;
    let report = validate_design(&design);
    let summary = DesignSummary {
        d0,
        os1,
        dn,
        sensor_count_exact: sensor_count_exact(g, d0, os1, mean(&recipe.z_pool))
            .unwrap_or(f64::NAN),
        mark_count_estimate: mark_count_estimate(g, d0, dn, mean(&recipe.d_pool))?,
    };
    Ok(BuiltDesign {
        design,
        report,
        summary,
    })
}
