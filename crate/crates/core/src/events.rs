//! Event enumeration, rectification of simultaneous detections, Δρ
//! statistics and calibration-stroke profiles.

use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CalibrationDesign;
use crate::EPS_GEOM;

/// Detection of mark `i` by sensor `j` at time `t`, with free length `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub rho: f64,
}

impl Event {
    // Simultaneity tie rule: smaller i/j wins, then smaller i.
    fn preferred_over(&self, other: &Event) -> bool {
        match (self.i * other.j).cmp(&(other.i * self.j)) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.i < other.i,
        }
    }
}

/// Time-ordered events with the Δρ gap between each consecutive pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTable {
    events: Vec<Event>,
    gaps: Vec<f64>,
    rectified: bool,
}

impl EventTable {
    fn from_events(events: Vec<Event>, rectified: bool) -> Self {
        let gaps = events.windows(2).map(|w| w[0].rho - w[1].rho).collect();
        Self {
            events,
            gaps,
            rectified,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// `gaps()[k] = rho(E_k) - rho(E_{k+1})`, 0-based.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn is_rectified(&self) -> bool {
        self.rectified
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first(&self) -> Option<&Event> {
        self.events.first()
    }

    pub fn last(&self) -> Option<&Event> {
        self.events.last()
    }

    /// Strictly increasing times and strictly positive gaps.
    pub fn is_rectified_with(&self, eps: f64) -> bool {
        self.events.windows(2).all(|w| w[1].t - w[0].t > eps) && self.gaps.iter().all(|g| *g > eps)
    }

    /// Writes `t,i,j,rho,delta_rho`. `precision = None` writes shortest
    /// round-trip floats; `Some(n)` writes `n` decimals.
    pub fn write_csv<W: Write>(&self, out: W, precision: Option<usize>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "i", "j", "rho", "delta_rho"])?;
        let fmt = |x: f64| match precision {
            Some(p) => format!("{x:.p$}"),
            None => format!("{x}"),
        };
        for (k, e) in self.events.iter().enumerate() {
            let delta = if k == 0 {
                String::new()
            } else {
                fmt(self.gaps[k - 1])
            };
            w.write_record([
                fmt(e.t),
                e.i.to_string(),
                e.j.to_string(),
                fmt(e.rho),
                delta,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`EventTable::write_csv`]. The `delta_rho`
    /// column is recomputed from `rho`; the table is flagged rectified when
    /// its times strictly increase.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let expected = ["t", "i", "j", "rho", "delta_rho"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::Csv(format!(
                "expected header {}, got {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut events = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<&str> {
                rec.get(k).ok_or_else(|| {
                    Error::Csv(format!("row {}: missing column {}", line + 2, expected[k]))
                })
            };
            let num = |k: usize| -> Result<f64> {
                field(k)?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {}: {}: {e}", line + 2, expected[k])))
            };
            let idx = |k: usize| -> Result<usize> {
                field(k)?
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Csv(format!("row {}: {}: {e}", line + 2, expected[k])))
            };
            events.push(Event {
                t: num(0)?,
                i: idx(1)?,
                j: idx(2)?,
                rho: num(3)?,
            });
        }
        let mut table = Self::from_events(events, false);
        table.rectified = table.is_rectified_with(0.0);
        Ok(table)
    }
}

/// Time at which mark `i` faces sensor `j` when winding from full pay-out.
pub fn detection_time(design: &CalibrationDesign, i: usize, j: usize) -> Result<f64> {
    let g = design.geometry();
    let bm = design.marks().position(i)?;
    let os = design.sensors().height(j)?;
    Ok((g.l_max() - bm - os) / g.v())
}

pub fn enumerate_events(design: &CalibrationDesign) -> EventTable {
    enumerate_events_with(design, EPS_GEOM)
}

/// All mark/sensor pairs met while winding from `rho_max`, in time order.
/// Simultaneous events (within `eps`) are ordered by `i` ascending, then `j`
/// descending.
pub fn enumerate_events_with(design: &CalibrationDesign, eps: f64) -> EventTable {
    let g = design.geometry();
    let mut events = Vec::with_capacity(design.mark_count() * design.sensor_count());
    for (mi, bm) in design.marks().positions().iter().enumerate() {
        for (sj, os) in design.sensors().heights().iter().enumerate() {
            let t = (g.l_max() - bm - os) / g.v();
            let rho = bm - (g.h() - os);
            if t >= -eps && rho > eps {
                events.push(Event {
                    t,
                    i: mi + 1,
                    j: sj + 1,
                    rho,
                });
            }
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));

    // stable order inside each simultaneity group
    let mut start = 0;
    while start < events.len() {
        let end = group_end(&events, start, eps);
        events[start..end].sort_by(|a, b| a.i.cmp(&b.i).then(b.j.cmp(&a.j)));
        start = end;
    }
    EventTable::from_events(events, false)
}

// One past the last index of the simultaneity group beginning at `start`.
fn group_end(events: &[Event], start: usize, eps: f64) -> usize {
    let mut end = start + 1;
    while end < events.len() && events[end].t - events[end - 1].t <= eps {
        end += 1;
    }
    end
}

pub fn rectify(table: &EventTable) -> EventTable {
    rectify_with(table, EPS_GEOM)
}

/// Keeps one event per detection instant.
pub fn rectify_with(table: &EventTable, eps: f64) -> EventTable {
    if table.rectified {
        return table.clone();
    }
    let events = &table.events;
    let mut kept = Vec::with_capacity(events.len());
    let mut start = 0;
    while start < events.len() {
        let end = group_end(events, start, eps);
        let best = events[start + 1..end]
            .iter()
            .fold(events[start], |best, e| {
                if e.preferred_over(&best) {
                    *e
                } else {
                    best
                }
            });
        kept.push(best);
        start = end;
    }
    EventTable::from_events(kept, true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Mean Δρ over `n_e - 1` gaps and its dispersion with denominator `n_e - 2`.
pub fn delta_stats(table: &EventTable) -> Result<DeltaStats> {
    if !table.rectified {
        return Err(Error::NotRectified);
    }
    let n = table.len();
    if n < 3 {
        return Err(Error::TooFewEvents { needed: 3, have: n });
    }
    let mean = table.gaps.iter().sum::<f64>() / (n - 1) as f64;
    let ss: f64 = table.gaps.iter().map(|g| (g - mean).powi(2)).sum();
    Ok(DeltaStats {
        mean,
        std: (ss / (n - 2) as f64).sqrt(),
        count: n,
    })
}

/// Winding needed from one starting event before the gap sequence is unique.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeEntry {
    /// 1-based index of the first detected event.
    pub start: usize,
    /// Detections after the first needed for uniqueness; `None` if the
    /// remaining sequence never becomes unique.
    pub detections: Option<usize>,
    pub stroke: Option<f64>,
}

impl StrokeEntry {
    pub fn is_identifiable(&self) -> bool {
        self.detections.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrokeProfile {
    /// One entry per event that is followed by at least one more event.
    pub entries: Vec<StrokeEntry>,
    pub worst_stroke: f64,
    pub mean_stroke: f64,
    pub unidentifiable: usize,
}

impl StrokeProfile {
    /// Entry for a 1-based starting event; `None` for the last event.
    pub fn entry(&self, start: usize) -> Option<&StrokeEntry> {
        start.checked_sub(1).and_then(|k| self.entries.get(k))
    }
}

pub const DEFAULT_STROKE_TOLERANCE: f64 = 0.01;

/// For every starting gap `p`, the shortest run `g_p..g_{p+k-1}` matching
/// (within `tolerance`) at exactly one position of the full gap list.
pub fn stroke_profile(table: &EventTable, tolerance: f64) -> Result<StrokeProfile> {
    if !table.rectified {
        return Err(Error::NotRectified);
    }
    if table.len() < 2 {
        return Err(Error::TooFewEvents {
            needed: 2,
            have: table.len(),
        });
    }
    let gaps = &table.gaps;
    let entries: Vec<StrokeEntry> = (0..gaps.len())
        .map(|p| {
            let k = unique_run_length(gaps, p, tolerance);
            StrokeEntry {
                start: p + 1,
                detections: k,
                stroke: k.map(|k| gaps[p..p + k].iter().sum()),
            }
        })
        .collect();

    let strokes: Vec<f64> = entries.iter().filter_map(|e| e.stroke).collect();
    let worst_stroke = strokes.iter().copied().fold(0.0, f64::max);
    let mean_stroke = if strokes.is_empty() {
        0.0
    } else {
        strokes.iter().sum::<f64>() / strokes.len() as f64
    };
    Ok(StrokeProfile {
        unidentifiable: entries.len() - strokes.len(),
        entries,
        worst_stroke,
        mean_stroke,
    })
}

fn unique_run_length(gaps: &[f64], p: usize, tolerance: f64) -> Option<usize> {
    let mut matches: Vec<usize> = (0..gaps.len()).collect();
    for k in 1..=gaps.len() - p {
        let offset = k - 1;
        let target = gaps[p + offset];
        matches
            .retain(|&q| q + offset < gaps.len() && (gaps[q + offset] - target).abs() <= tolerance);
        if matches.len() == 1 {
            return Some(k);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn detection_time_examples() {
        assert_eq!(detection_time(&fixtures::example1(), 1, 2).unwrap(), 2.0);
        assert_eq!(detection_time(&fixtures::example3(), 1, 5).unwrap(), 0.5);
        assert!(detection_time(&fixtures::example3(), 15, 1).is_err());
    }

    #[test]
    fn detection_at_start_instant_is_zero() {
        let d = crate::model::CalibrationDesign::new(
            crate::model::RobotGeometry::new(4.0, 10.0, 2.0, 1.0).unwrap(),
            crate::model::SensorLayout::new(vec![1.0, 3.0]).unwrap(),
            crate::model::MarkLayout::new(vec![11.0, 4.0]).unwrap(),
        )
        .unwrap();
        // |BM_1| + |OS_2| = 14 = l_max
        assert_eq!(detection_time(&d, 1, 2).unwrap(), 0.0);
    }

    #[test]
    fn example1_raw_and_rectified_counts() {
        let raw = enumerate_events(&fixtures::example1());
        assert_eq!(raw.len(), 12);
        assert_eq!(raw.first().unwrap().t, 2.0);
        assert_eq!(raw.last().unwrap().t, 10.0);
        let rect = rectify(&raw);
        assert_eq!(rect.len(), 9);
        let at5 = rect.events().iter().find(|e| e.t == 5.0).unwrap();
        assert_eq!((at5.i, at5.j), (1, 1));
    }

    #[test]
    fn autocalibration_tie_keeps_smaller_ratio() {
        let rect = rectify(&enumerate_events(&fixtures::autocalibration()));
        let e = rect.events().iter().find(|e| e.rho == 11.25).unwrap();
        assert_eq!((e.t, e.i, e.j), (1.75, 1, 2));
        assert_eq!(rect.len(), 26);
    }

    #[test]
    fn single_pair_gives_single_event() {
        let d = crate::model::CalibrationDesign::new(
            crate::model::RobotGeometry::new(3.0, 4.0, 1.0, 1.0).unwrap(),
            crate::model::SensorLayout::new(vec![2.0]).unwrap(),
            crate::model::MarkLayout::new(vec![3.0]).unwrap(),
        )
        .unwrap();
        let raw = enumerate_events(&d);
        assert_eq!(raw.len(), 1);
        assert!(raw.gaps().is_empty());
    }

    #[test]
    fn rectify_is_idempotent() {
        for d in fixtures::all() {
            let once = rectify(&enumerate_events(&d));
            let mut raw_again = once.clone();
            raw_again.rectified = false;
            assert_eq!(rectify(&once), once);
            assert_eq!(rectify(&raw_again), once);
        }
    }

    #[test]
    fn stats_example1() {
        let s = delta_stats(&rectify(&enumerate_events(&fixtures::example1()))).unwrap();
        assert!((s.mean - 1.0).abs() < 1e-9);
        assert!(s.std.abs() < 1e-9);
        assert_eq!(s.count, 9);
    }

    #[test]
    fn stats_two_equal_gaps() {
        let t = EventTable::from_events(
            vec![
                Event {
                    t: 0.0,
                    i: 1,
                    j: 1,
                    rho: 3.0,
                },
                Event {
                    t: 1.0,
                    i: 2,
                    j: 1,
                    rho: 2.0,
                },
                Event {
                    t: 2.0,
                    i: 3,
                    j: 1,
                    rho: 1.0,
                },
            ],
            true,
        );
        let s = delta_stats(&t).unwrap();
        assert_eq!((s.mean, s.std), (1.0, 0.0));
    }

    #[test]
    fn stats_error_paths() {
        let raw = enumerate_events(&fixtures::example1());
        assert_eq!(delta_stats(&raw), Err(Error::NotRectified));
        let t = EventTable::from_events(
            vec![
                Event {
                    t: 0.0,
                    i: 1,
                    j: 1,
                    rho: 3.0,
                },
                Event {
                    t: 1.0,
                    i: 2,
                    j: 1,
                    rho: 2.0,
                },
            ],
            true,
        );
        assert!(matches!(delta_stats(&t), Err(Error::TooFewEvents { .. })));
    }

    #[test]
    fn stroke_two_events() {
        let t = EventTable::from_events(
            vec![
                Event {
                    t: 0.0,
                    i: 1,
                    j: 1,
                    rho: 3.0,
                },
                Event {
                    t: 1.5,
                    i: 2,
                    j: 1,
                    rho: 1.5,
                },
            ],
            true,
        );
        let p = stroke_profile(&t, DEFAULT_STROKE_TOLERANCE).unwrap();
        assert_eq!(p.entries.len(), 1);
        assert_eq!(p.entries[0].detections, Some(1));
        assert_eq!(p.entries[0].stroke, Some(1.5));
    }

    #[test]
    fn stroke_example1_interior_starts_flagged() {
        let t = rectify(&enumerate_events(&fixtures::example1()));
        let p = stroke_profile(&t, DEFAULT_STROKE_TOLERANCE).unwrap();
        assert_eq!(p.entries[0].detections, Some(8));
        assert!(p.entries[1..].iter().all(|e| !e.is_identifiable()));
        assert_eq!(p.unidentifiable, 7);
    }

    #[test]
    fn stroke_autocalibration_scenario() {
        let t = rectify(&enumerate_events(&fixtures::autocalibration()));
        let start = t.events().iter().position(|e| e.rho == 9.0).unwrap() + 1;
        let e = stroke_profile(&t, DEFAULT_STROKE_TOLERANCE)
            .unwrap()
            .entry(start)
            .copied()
            .unwrap();
        assert_eq!(e.detections, Some(3));
        assert_eq!(e.stroke, Some(1.5));
    }

    #[test]
    fn csv_two_decimal_rendering() {
        let raw = enumerate_events(&fixtures::example1());
        let mut buf = Vec::new();
        raw.write_csv(&mut buf, Some(2)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,i,j,rho,delta_rho");
        assert_eq!(lines[1], "2.00,1,2,9.00,");
        assert_eq!(lines[5], "5.00,4,2,6.00,0.00");
    }

    #[test]
    fn csv_rejects_bad_header() {
        let err = EventTable::read_csv("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv(_)));
    }
}
