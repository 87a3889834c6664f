//! Online identification of the cable length.
//!
//! After the first detection every rectified event is a possible starting
//! point. Each further detection contributes one measured Δρ, and a start
//! `p` survives while the table's gaps from `p` match everything observed.
//! A single survivor pins the current event and hence the absolute length.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::EventTable;
use crate::model::CalibrationDesign;
use crate::simulator::{wound_between, ObservationTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    AwaitingFirst,
    Ambiguous {
        candidates: usize,
    },
    /// `event` is the 1-based index of the current event in the table.
    Identified {
        event: usize,
        rho: f64,
    },
    /// Winding went on past every possible detection; `rho` is the
    /// exhaustion estimate `rho_{n,1} + (d_n - d_0)`, not a sequence match.
    Exhausted {
        rho: f64,
    },
    NoMatch,
}

impl Status {
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            Status::Identified { .. } | Status::Exhausted { .. } | Status::NoMatch
        )
    }

    pub fn rho(&self) -> Option<f64> {
        match *self {
            Status::Identified { rho, .. } | Status::Exhausted { rho } => Some(rho),
            _ => None,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::AwaitingFirst => write!(f, "awaiting-first"),
            Status::Ambiguous { candidates } => write!(f, "ambiguous ({candidates} candidates)"),
            Status::Identified { event, rho } => write!(f, "identified (event {event}, rho {rho})"),
            Status::Exhausted { rho } => write!(f, "exhaustion-estimate (rho {rho})"),
            Status::NoMatch => write!(f, "no-match"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifierState<'a> {
    table: &'a EventTable,
    tolerance: f64,
    observed_gaps: Vec<f64>,
    /// 1-based starting indices still consistent with the observations.
    candidates: Vec<usize>,
    status: Status,
}

impl<'a> IdentifierState<'a> {
    /// State before any detection.
    pub fn new(table: &'a EventTable, tolerance: f64) -> Result<Self> {
        if !table.is_rectified() {
            return Err(Error::NotRectified);
        }
        if table.len() < 2 {
            return Err(Error::TooFewEvents {
                needed: 2,
                have: table.len(),
            });
        }
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidRange(format!(
                "tolerance = {tolerance} must be >= 0"
            )));
        }
        Ok(Self {
            table,
            tolerance,
            observed_gaps: Vec::new(),
            candidates: Vec::new(),
            status: Status::AwaitingFirst,
        })
    }

    /// State right after the first detection: every event is a candidate.
    pub fn start(table: &'a EventTable, tolerance: f64) -> Result<Self> {
        Ok(Self::new(table, tolerance)?.first_detection())
    }

    pub fn first_detection(&self) -> Self {
        if self.status != Status::AwaitingFirst {
            return self.clone();
        }
        let n = self.table.len();
        Self {
            candidates: (1..=n).collect(),
            status: Status::Ambiguous { candidates: n },
            ..self.clone()
        }
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn observed_gaps(&self) -> &[f64] {
        &self.observed_gaps
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn table(&self) -> &'a EventTable {
        self.table
    }

    /// Feeds the Δρ measured since the previous detection.
    pub fn observe(&self, gap: f64) -> Result<Self> {
        if !matches!(self.status, Status::Ambiguous { .. }) {
            return Err(Error::TerminalState(format!(
                "cannot observe a gap while {}",
                self.status
            )));
        }
        let n = self.table.len();
        let gaps = self.table.gaps();
        let m = self.observed_gaps.len() + 1;
        let candidates: Vec<usize> = self
            .candidates
            .iter()
            .copied()
            .filter(|&p| p + m <= n && (gaps[p + m - 2] - gap).abs() <= self.tolerance)
            .collect();
        let status = match candidates.as_slice() {
            [] => Status::NoMatch,
            [p] => {
                let event = p + m;
                Status::Identified {
                    event,
                    rho: self.table.events()[event - 1].rho,
                }
            }
            many => Status::Ambiguous {
                candidates: many.len(),
            },
        };
        let mut observed_gaps = self.observed_gaps.clone();
        observed_gaps.push(gap);
        Ok(Self {
            table: self.table,
            tolerance: self.tolerance,
            observed_gaps,
            candidates,
            status,
        })
    }

    /// Exhaustion check: once more than `d_n - d_0` (plus tolerance) has been
    /// wound without a detection, reports `rho_{n,1} + (d_n - d_0)`.
    pub fn check_no_detection(
        &self,
        design: &CalibrationDesign,
        wound_since_last: f64,
    ) -> (Self, Option<f64>) {
        if self.status.is_terminal() {
            return (self.clone(), None);
        }
        let span = exhaustion_span(design);
        if wound_since_last > span + self.tolerance {
            let rho = exhaustion_estimate(design);
            let next = Self {
                status: Status::Exhausted { rho },
                ..self.clone()
            };
            (next, Some(rho))
        } else {
            (self.clone(), None)
        }
    }

    /// Starting event for the identified sequence, 1-based.
    pub fn identified_start(&self) -> Option<usize> {
        match self.status {
            Status::Identified { .. } => self.candidates.first().copied(),
            _ => None,
        }
    }
}

/// `d_n - d_0`.
pub fn exhaustion_span(design: &CalibrationDesign) -> f64 {
    design.marks().distal_reserve() - design.proximal_reserve()
}

/// `rho_{n,1} + (d_n - d_0)`.
pub fn exhaustion_estimate(design: &CalibrationDesign) -> f64 {
    let n = design.mark_count();
    design.rho_at(n, 1).expect("mark n and sensor 1 exist") + exhaustion_span(design)
}

/// Least-squares fit of `reading = scale * (rho_ref - rho) + offset` from
/// identified lengths and the raw encoder readings taken at them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopCorrector {
    pub rho_ref: f64,
    pub samples: Vec<(f64, f64)>,
    pub fit: Option<EncoderFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EncoderFit {
    pub scale: f64,
    pub offset: f64,
}

impl ClosedLoopCorrector {
    pub fn new(rho_ref: f64) -> Self {
        Self {
            rho_ref,
            samples: Vec::new(),
            fit: None,
        }
    }

    pub fn update(&self, identified_rho: f64, raw_reading: f64) -> Self {
        let mut samples = self.samples.clone();
        samples.push((identified_rho, raw_reading));
        let fit = least_squares(self.rho_ref, &samples);
        Self {
            rho_ref: self.rho_ref,
            samples,
            fit,
        }
    }

    /// True length for a raw reading, once the fit exists.
    pub fn corrected_length(&self, reading: f64) -> Option<f64> {
        self.fit
            .map(|f| self.rho_ref - (reading - f.offset) / f.scale)
    }
}

fn least_squares(rho_ref: f64, samples: &[(f64, f64)]) -> Option<EncoderFit> {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return None;
    }
    let xs = samples.iter().map(|(rho, _)| rho_ref - rho);
    let x_bar = xs.clone().sum::<f64>() / n;
    let y_bar = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, (_, y)) in xs.zip(samples) {
        sxx += (x - x_bar) * (x - x_bar);
        sxy += (x - x_bar) * (y - y_bar);
    }
    if sxx <= f64::EPSILON * n {
        return None;
    }
    let scale = sxy / sxx;
    if scale <= 0.0 {
        return None;
    }
    Some(EncoderFit {
        scale,
        offset: y_bar - scale * x_bar,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub status: Status,
    pub rho: Option<f64>,
    /// Detections consumed up to the final status, including the first.
    pub detections_used: usize,
    /// Length wound between the first detection and identification.
    pub stroke: Option<f64>,
    pub candidate_count_history: Vec<usize>,
    pub corrector: Option<ClosedLoopCorrector>,
}

impl CalibrationResult {
    pub fn history_string(&self) -> String {
        self.candidate_count_history
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

impl fmt::Display for CalibrationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.status {
            Status::AwaitingFirst => "awaiting-first",
            Status::Ambiguous { .. } => "ambiguous",
            Status::Identified { .. } => "identified",
            Status::Exhausted { .. } => "exhaustion-estimate",
            Status::NoMatch => "no-match",
        };
        writeln!(f, "status: {kind}")?;
        if let Status::Ambiguous { candidates } = self.status {
            writeln!(f, "candidates: {candidates}")?;
        }
        if let Status::Identified { event, .. } = self.status {
            writeln!(f, "event: {event}")?;
        }
        match self.rho {
            Some(rho) => writeln!(f, "rho: {rho:.2}")?,
            None => writeln!(f, "rho: -")?,
        }
        writeln!(f, "detections_used: {}", self.detections_used)?;
        match self.stroke {
            Some(s) => writeln!(f, "stroke: {s:.2}")?,
            None => writeln!(f, "stroke: -")?,
        }
        writeln!(f, "candidate_count_history: {}", self.history_string())?;
        match self
            .corrector
            .as_ref()
            .and_then(|c| c.fit.map(|fit| (c, fit)))
        {
            Some((c, fit)) => write!(
                f,
                "corrector: scale {:.6}, offset {:.6}, samples {}",
                fit.scale,
                fit.offset,
                c.samples.len()
            ),
            None => write!(f, "corrector: -"),
        }
    }
}

/// Replays a trace through the identifier, then fits the encoder on every
/// detection whose event is known once the sequence is identified.
///
/// The exhaustion check only looks at the winding after the last record: a
/// recorded detection shows the table was not exhausted, even when the
/// preceding gap exceeds `d_n - d_0`.
pub fn run_trace(
    design: &CalibrationDesign,
    table: &EventTable,
    trace: &ObservationTrace,
    tolerance: f64,
) -> Result<CalibrationResult> {
    let mut state = IdentifierState::new(table, tolerance)?;
    let mut history = Vec::new();
    let mut used = 0;

    for k in 0..trace.len() {
        if state.status().is_terminal() {
            break;
        }
        if k == 0 {
            state = state.first_detection();
        } else {
            state = state.observe(wound_between(trace, k - 1, k)?)?;
        }
        used = k + 1;
        history.push(state.candidates().len());
    }
    if !state.status().is_terminal() {
        if let Some(tail) = trace.tail_wound {
            state = state.check_no_detection(design, tail).0;
        }
    }

    let status = state.status();
    let mut stroke = None;
    let mut corrector = None;
    if let (Status::Identified { event, .. }, Some(start)) = (status, state.identified_start()) {
        let events = table.events();
        stroke = Some(events[start - 1].rho - events[event - 1].rho);
        // Record k maps to event `start + k` while it stays inside the table.
        let rho_ref = trace.start_rho.unwrap_or(events[start - 1].rho);
        let mut c = ClosedLoopCorrector::new(rho_ref);
        for (k, r) in trace.records.iter().enumerate() {
            match events.get(start - 1 + k) {
                Some(e) => c = c.update(e.rho, r.encoder_reading),
                None => break,
            }
        }
        corrector = Some(c);
    }

    Ok(CalibrationResult {
        status,
        rho: status.rho(),
        detections_used: used,
        stroke,
        candidate_count_history: history,
        corrector,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{enumerate_events, rectify};
    use crate::fixtures;
    use crate::simulator::{simulate, EncoderModel};
    use crate::DEFAULT_GAP_TOLERANCE as TOL;

    fn table(d: &CalibrationDesign) -> EventTable {
        rectify(&enumerate_events(d))
    }

    #[test]
    fn scenario_narrows_to_one() {
        let t = table(&fixtures::autocalibration());
        let s = IdentifierState::start(&t, TOL).unwrap();
        assert_eq!(s.status(), Status::Ambiguous { candidates: 26 });
        let s = s.observe(0.5).unwrap();
        assert!(matches!(s.status(), Status::Ambiguous { candidates } if candidates > 2));
        let s = s.observe(0.75).unwrap();
        assert_eq!(s.status(), Status::Ambiguous { candidates: 2 });
        let s = s.observe(0.25).unwrap();
        assert_eq!(s.status().rho(), Some(7.5));
        assert!(s.observe(0.25).is_err());
    }

    #[test]
    fn impossible_gap() {
        let t = table(&fixtures::autocalibration());
        let s = IdentifierState::start(&t, TOL)
            .unwrap()
            .observe(99.0)
            .unwrap();
        assert_eq!(s.status(), Status::NoMatch);
        assert!(s.candidates().is_empty());
    }

    #[test]
    fn precondition_errors() {
        let d = fixtures::example1();
        let raw = enumerate_events(&d);
        assert_eq!(IdentifierState::start(&raw, TOL), Err(Error::NotRectified));
        let s = IdentifierState::new(&table(&d), TOL).map(|s| s.status());
        assert_eq!(s, Ok(Status::AwaitingFirst));
        let t = table(&d);
        let s = IdentifierState::new(&t, TOL).unwrap();
        assert!(matches!(s.observe(1.0), Err(Error::TerminalState(_))));
    }

    #[test]
    fn exhaustion_threshold() {
        let d = fixtures::autocalibration();
        let t = table(&d);
        let s = IdentifierState::start(&t, 0.0).unwrap();
        let (next, est) = s.check_no_detection(&d, 2.80);
        assert_eq!(est, Some(3.75));
        assert_eq!(next.status(), Status::Exhausted { rho: 3.75 });
        assert_eq!(s.check_no_detection(&d, 0.10).1, None);
        assert_eq!(s.check_no_detection(&d, 2.75).1, None);
    }

    #[test]
    fn corrector_fit() {
        let c = ClosedLoopCorrector::new(9.0).update(9.0, 0.0);
        assert_eq!(c.fit, None);
        assert_eq!(c.corrected_length(1.0), None);
        let c = c.update(7.5, 1.53);
        let fit = c.fit.unwrap();
        assert!((fit.scale - 1.02).abs() < 1e-12);
        assert!(fit.offset.abs() < 1e-12);
        assert!((c.corrected_length(1.02).unwrap() - 8.0).abs() < 1e-12);

        let same_rho = ClosedLoopCorrector::new(9.0)
            .update(8.0, 1.0)
            .update(8.0, 1.1);
        assert_eq!(same_rho.fit, None);
    }

    #[test]
    fn scenario_trace() {
        let d = fixtures::autocalibration();
        let t = table(&d);
        let tr = simulate(&d, &EncoderModel::ideal(), 9.1, 1.0).unwrap();
        let r = run_trace(&d, &t, &tr, TOL).unwrap();
        assert_eq!(r.rho, Some(7.5));
        assert_eq!(r.detections_used, 4);
        assert_eq!(r.stroke, Some(1.5));
        assert_eq!(&r.candidate_count_history[2..], &[2, 1]);
        let fit = r.corrector.unwrap().fit.unwrap();
        assert!((fit.scale - 1.0).abs() < 1e-9 && fit.offset.abs() < 1e-9);
    }

    #[test]
    fn corrector_recovers_scale_and_offset() {
        let d = fixtures::autocalibration();
        let t = table(&d);
        let tr = simulate(
            &d,
            &EncoderModel::new(0.985, 4.0, 0.0, 0).unwrap(),
            9.1,
            1.0,
        )
        .unwrap();
        let r = run_trace(&d, &t, &tr, TOL).unwrap();
        let c = r.corrector.unwrap();
        let fit = c.fit.unwrap();
        assert!((fit.scale - 0.985).abs() < 1e-9);
        assert!((fit.offset - 4.0).abs() < 1e-9);
        for rec in &tr.records {
            assert!(
                (c.corrected_length(rec.encoder_reading).unwrap() - rec.truth_rho.unwrap()).abs()
                    < 1e-9
            );
        }
    }

    #[test]
    fn constant_gaps_resolve_only_at_table_end() {
        let d = fixtures::example1();
        let t = table(&d);
        let tr = simulate(&d, &EncoderModel::ideal(), 11.0, 1.0).unwrap();
        let r = run_trace(&d, &t, &tr, TOL).unwrap();
        assert_eq!(r.status, Status::Identified { event: 9, rho: 1.0 });
        assert_eq!(r.detections_used, 9);
        assert_eq!(r.candidate_count_history, vec![9, 8, 7, 6, 5, 4, 3, 2, 1]);

        let tr = simulate(&d, &EncoderModel::ideal(), 8.5, 1.0).unwrap();
        let r = run_trace(&d, &t, &tr, TOL).unwrap();
        assert_eq!(r.status, Status::Ambiguous { candidates: 2 });
    }

    #[test]
    fn no_detection_at_all() {
        let d = fixtures::autocalibration();
        let t = table(&d);
        let tr = ObservationTrace {
            tail_wound: Some(3.0),
            ..Default::default()
        };
        let r = run_trace(&d, &t, &tr, TOL).unwrap();
        assert_eq!(r.status, Status::Exhausted { rho: 3.75 });
        assert_eq!(r.detections_used, 0);
    }
}
