//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the event engine; only design accessors are used.

#![allow(dead_code)]

use cablecal::{CalibrationDesign, MarkLayout, RobotGeometry, SensorLayout};
use proptest::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEvent {
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub rho: f64,
}

/// Detects mark/sensor crossings by stepping time at `dt` and watching the
/// mark height `h - BM_i + rho(t)` drop through each sensor height.
pub fn time_stepped_events(design: &CalibrationDesign, dt: f64) -> Vec<(f64, usize, usize)> {
    let g = design.geometry();
    let (h, rho_max, v) = (g.h(), g.rho_max(), g.v());
    let steps = (rho_max / v / dt).ceil() as usize + 1;
    let mut out = Vec::new();
    for (mi, bm) in design.marks().positions().iter().enumerate() {
        for (sj, os) in design.sensors().heights().iter().enumerate() {
            let height = |k: usize| h - bm + (rho_max - v * k as f64 * dt);
            if height(0) == *os {
                out.push((0.0, mi + 1, sj + 1));
                continue;
            }
            for k in 1..=steps {
                if height(k - 1) > *os && height(k) <= *os {
                    let t = k as f64 * dt;
                    if rho_max - v * t > 1e-6 {
                        out.push((t, mi + 1, sj + 1));
                    }
                    break;
                }
            }
        }
    }
    out
}

/// Closed-form event list, sorted by time, then `i` ascending, then `j` descending.
pub fn closed_form_events(design: &CalibrationDesign) -> Vec<OracleEvent> {
    let g = design.geometry();
    let mut out = Vec::new();
    for (mi, bm) in design.marks().positions().iter().enumerate() {
        for (sj, os) in design.sensors().heights().iter().enumerate() {
            let rho = bm - g.h() + os;
            let t = (g.rho_max() - rho) / g.v();
            if rho > 1e-9 && t >= -1e-9 {
                out.push(OracleEvent {
                    t,
                    i: mi + 1,
                    j: sj + 1,
                    rho,
                });
            }
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.i.cmp(&b.i)).then(b.j.cmp(&a.j)));
    out
}

/// Keeps one event per simultaneous group: smallest `i/j`, then smallest `i`.
pub fn rectify_oracle(events: &[OracleEvent]) -> Vec<OracleEvent> {
    let mut out: Vec<OracleEvent> = Vec::new();
    let mut k = 0;
    while k < events.len() {
        let mut end = k + 1;
        while end < events.len() && (events[end].t - events[k].t).abs() <= 1e-9 {
            end += 1;
        }
        let best = events[k..end]
            .iter()
            .min_by(|a, b| {
                let ra = a.i as f64 / a.j as f64;
                let rb = b.i as f64 / b.j as f64;
                if (ra - rb).abs() < 1e-12 {
                    a.i.cmp(&b.i)
                } else {
                    ra.total_cmp(&rb)
                }
            })
            .unwrap();
        out.push(*best);
        k = end;
    }
    out
}

pub fn gaps_of(rhos: &[f64]) -> Vec<f64> {
    rhos.windows(2).map(|w| w[0] - w[1]).collect()
}

/// Mean and dispersion of Δρ: mean over n-1 gaps, variance over n-2.
pub fn stats_oracle(rhos: &[f64]) -> (f64, f64) {
    let n = rhos.len() as f64;
    let g = gaps_of(rhos);
    let mean = (rhos[0] - rhos[rhos.len() - 1]) / (n - 1.0);
    let var = g.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 2.0);
    (mean, var.sqrt())
}

/// For each gap start, the shortest window that occurs exactly once in the
/// gap list, as (window length, wound length).
pub fn stroke_oracle(rhos: &[f64], tol: f64) -> Vec<Option<(usize, f64)>> {
    let g = gaps_of(rhos);
    let n = g.len();
    (0..n)
        .map(|p| {
            (1..=n - p).find_map(|k| {
                let w = &g[p..p + k];
                let hits = (0..=n - k)
                    .filter(|&q| g[q..q + k].iter().zip(w).all(|(a, b)| (a - b).abs() <= tol))
                    .count();
                (hits == 1).then(|| (k, rhos[p] - rhos[p + k]))
            })
        })
        .collect()
}

/// Random layouts on a quarter-metre grid built to satisfy C1-C4: the top
/// sensor sits at `h - d_0`, the first mark at `rho_max - d_0`, every mark
/// gap is at least `d_0`, and the last mark closes `h - OS_1 - d_n + b = 0`.
pub fn conforming_design() -> impl Strategy<Value = CalibrationDesign> {
    (
        1usize..=6,
        1u32..=4,
        1u32..=8,
        1u32..=4,
        prop::sample::select(vec![0.5, 1.0, 2.0]),
    )
        .prop_flat_map(|(n_s, d0q, os1q, bq, v)| {
            (
                prop::collection::vec(1u32..=8, n_s - 1),
                prop::collection::vec(d0q..=d0q + 6, 0..20usize),
                Just((d0q, os1q, bq, v)),
            )
        })
        .prop_map(|(zq, dq, (d0q, os1q, bq, v))| {
            let q = |n: u32| n as f64 * 0.25;
            let mut heights = vec![q(os1q)];
            for z in &zq {
                heights.push(heights.last().unwrap() + q(*z));
            }
            let top = *heights.last().unwrap();
            let h = top + q(d0q);
            let dn = h - q(os1q) + q(bq);
            let mut marks = vec![dn];
            for d in &dq {
                marks.push(marks.last().unwrap() + q(*d));
            }
            marks.reverse();
            let rho_max = marks[0] + q(d0q);
            let g = RobotGeometry::new(h, rho_max, v, q(bq)).unwrap();
            CalibrationDesign::new(
                g,
                SensorLayout::new(heights).unwrap(),
                MarkLayout::new(marks).unwrap(),
            )
            .unwrap()
        })
}
