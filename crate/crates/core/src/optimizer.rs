//! Search over pool orderings for the best-scoring layout.
//!
//! Designs are ranked lexicographically: fewer unidentifiable starts, then
//! a smaller worst-case stroke, then a smaller mean Δρ, then a larger Δρ
//! spread. When the number of distinct orderings fits in the budget they
//! are all scored in parallel; otherwise a seeded hill climb over adjacent
//! swaps with random restarts spends the budget.

use std::cmp::Ordering;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::designer::{build_design, DesignRecipe};
use crate::error::{Error, Result};
use crate::events::{
    delta_stats, enumerate_events, rectify, stroke_profile, DEFAULT_STROKE_TOLERANCE,
};
use crate::model::{validate_design, CalibrationDesign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveScore {
    pub mean_gap: f64,
    pub std_gap: f64,
    pub worst_stroke: f64,
    pub mean_stroke: f64,
    pub unidentifiable_starts: usize,
}

pub fn score(design: &CalibrationDesign) -> Result<ObjectiveScore> {
    score_with(design, DEFAULT_STROKE_TOLERANCE)
}

pub fn score_with(design: &CalibrationDesign, stroke_tolerance: f64) -> Result<ObjectiveScore> {
    let table = rectify(&enumerate_events(design));
    let stats = delta_stats(&table)?;
    let profile = stroke_profile(&table, stroke_tolerance)?;
    Ok(ObjectiveScore {
        mean_gap: stats.mean,
        std_gap: stats.std,
        worst_stroke: profile.worst_stroke,
        mean_stroke: profile.mean_stroke,
        unidentifiable_starts: profile.unidentifiable,
    })
}

// Lengths are compared on a 1e-9 grid so rounding noise cannot break
// transitivity.
fn quantize(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// `Less` means `a` is the better design.
pub fn compare(a: &ObjectiveScore, b: &ObjectiveScore) -> Ordering {
    a.unidentifiable_starts
        .cmp(&b.unidentifiable_starts)
        .then(quantize(a.worst_stroke).cmp(&quantize(b.worst_stroke)))
        .then(quantize(a.mean_gap).cmp(&quantize(b.mean_gap)))
        .then(quantize(b.std_gap).cmp(&quantize(a.std_gap)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrailEntry {
    pub iteration: usize,
    pub score: ObjectiveScore,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub recipe: DesignRecipe,
    pub design: CalibrationDesign,
    pub score: ObjectiveScore,
    /// Every feasible evaluation, in iteration order.
    pub trail: Vec<TrailEntry>,
    pub exhaustive: bool,
    pub evaluations: usize,
}

impl SearchResult {
    /// Report CSV: `iteration,mean,std,worst_stroke`.
    pub fn write_report<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "mean", "std", "worst_stroke"])?;
        for e in &self.trail {
            w.write_record([
                e.iteration.to_string(),
                e.score.mean_gap.to_string(),
                e.score.std_gap.to_string(),
                e.score.worst_stroke.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds, validates and scores one recipe; `None` if it is not conforming.
pub fn evaluate(recipe: &DesignRecipe) -> Option<(CalibrationDesign, ObjectiveScore)> {
    let built = build_design(recipe).ok()?;
    if !validate_design(&built.design).is_conforming() {
        return None;
    }
    let s = score(&built.design).ok()?;
    Some((built.design, s))
}

/// Number of distinct orderings of a multiset, saturating.
pub fn distinct_orderings(pool: &[f64]) -> u128 {
    let mut sorted = pool.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut count: u128 = 1;
    let mut run = 0u128;
    for (k, x) in sorted.iter().enumerate() {
        run = if k > 0 && sorted[k - 1] == *x {
            run + 1
        } else {
            1
        };
        // n! / prod(run!) built incrementally: multiply by k+1, divide by run.
        count = count.saturating_mul(k as u128 + 1) / run;
    }
    count
}

/// All distinct orderings in lexicographic order.
pub fn orderings(pool: &[f64]) -> Vec<Vec<f64>> {
    let mut cur = pool.to_vec();
    cur.sort_by(f64::total_cmp);
    let mut out = vec![cur.clone()];
    while next_permutation(&mut cur) {
        out.push(cur.clone());
    }
    out
}

fn next_permutation(v: &mut [f64]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len())
        .rev()
        .find(|&j| v[j] > v[i - 1])
        .expect("pivot has a successor");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn z_is_free(recipe: &DesignRecipe) -> bool {
    recipe.sensor_heights_override.is_none()
}

fn with_pools(recipe: &DesignRecipe, d: &[f64], z: &[f64]) -> DesignRecipe {
    DesignRecipe {
        d_pool: d.to_vec(),
        z_pool: z.to_vec(),
        ..recipe.clone()
    }
}

/// Best ordering of `recipe`'s pools under [`compare`].
pub fn search(recipe: &DesignRecipe, budget: usize, seed: u64) -> Result<SearchResult> {
    recipe.validate()?;
    if budget == 0 {
        let built = build_design(recipe)?;
        let s = score(&built.design)?;
        return Ok(SearchResult {
            recipe: recipe.clone(),
            design: built.design,
            score: s,
            trail: vec![TrailEntry {
                iteration: 0,
                score: s,
            }],
            exhaustive: false,
            evaluations: 0,
        });
    }
    let z_count = if z_is_free(recipe) {
        distinct_orderings(&recipe.z_pool)
    } else {
        1
    };
    let total = distinct_orderings(&recipe.d_pool).saturating_mul(z_count);
    if total <= budget as u128 {
        exhaustive(recipe)
    } else {
        hill_climb(recipe, budget, seed)
    }
}

fn better(a: &(usize, ObjectiveScore), b: &(usize, ObjectiveScore)) -> bool {
    compare(&a.1, &b.1).then(a.0.cmp(&b.0)) == Ordering::Less
}

fn exhaustive(recipe: &DesignRecipe) -> Result<SearchResult> {
    let ds = orderings(&recipe.d_pool);
    let zs = if z_is_free(recipe) {
        orderings(&recipe.z_pool)
    } else {
        vec![recipe.z_pool.clone()]
    };
    let space: Vec<DesignRecipe> = ds
        .iter()
        .flat_map(|d| zs.iter().map(move |z| (d, z)))
        .map(|(d, z)| with_pools(recipe, d, z))
        .collect();

    let mut scored: Vec<(usize, ObjectiveScore)> = space
        .par_iter()
        .enumerate()
        .filter_map(|(k, r)| evaluate(r).map(|(_, s)| (k, s)))
        .collect();
    scored.sort_by_key(|e| e.0);
    let best = scored
        .iter()
        .copied()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .ok_or(Error::EmptyFeasibleSet)?;

    let winner = space[best.0].clone();
    let design = build_design(&winner)?.design;
    Ok(SearchResult {
        recipe: winner,
        design,
        score: best.1,
        trail: scored
            .into_iter()
            .map(|(iteration, score)| TrailEntry { iteration, score })
            .collect(),
        exhaustive: true,
        evaluations: space.len(),
    })
}

fn hill_climb(recipe: &DesignRecipe, budget: usize, seed: u64) -> Result<SearchResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_free = z_is_free(recipe);
    let mut trail = Vec::new();
    let mut best: Option<(usize, ObjectiveScore, DesignRecipe)> = None;
    let mut iteration = 0;

    let eval = |r: &DesignRecipe,
                iteration: &mut usize,
                trail: &mut Vec<TrailEntry>,
                best: &mut Option<(usize, ObjectiveScore, DesignRecipe)>| {
        let k = *iteration;
        *iteration += 1;
        let s = evaluate(r).map(|(_, s)| s);
        if let Some(s) = s {
            trail.push(TrailEntry {
                iteration: k,
                score: s,
            });
            if best
                .as_ref()
                .is_none_or(|b| compare(&s, &b.1) == Ordering::Less)
            {
                *best = Some((k, s, r.clone()));
            }
        }
        s
    };

    let mut current = recipe.clone();
    let mut current_score = eval(&current, &mut iteration, &mut trail, &mut best);
    while iteration < budget {
        let mut moves: Vec<(bool, usize)> = (1..current.d_pool.len()).map(|k| (true, k)).collect();
        if z_free {
            moves.extend((1..current.z_pool.len()).map(|k| (false, k)));
        }
        moves.shuffle(&mut rng);

        let mut improved = false;
        for (on_d, k) in moves {
            if iteration >= budget {
                break;
            }
            let mut next = current.clone();
            let pool = if on_d {
                &mut next.d_pool
            } else {
                &mut next.z_pool
            };
            if pool[k - 1] == pool[k] {
                continue;
            }
            pool.swap(k - 1, k);
            let s = eval(&next, &mut iteration, &mut trail, &mut best);
            let accept = match (s, current_score) {
                (Some(s), Some(c)) => compare(&s, &c) == Ordering::Less,
                (Some(_), None) => true,
                _ => false,
            };
            if accept {
                current = next;
                current_score = s;
                improved = true;
                break;
            }
        }
        if !improved && iteration < budget {
            // Local optimum (or dead end): restart from a random ordering.
            current = recipe.clone();
            current.d_pool.shuffle(&mut rng);
            if z_free {
                current.z_pool.shuffle(&mut rng);
            }
            current_score = eval(&current, &mut iteration, &mut trail, &mut best);
        }
    }

    let (_, s, winner) = best.ok_or(Error::EmptyFeasibleSet)?;
    let design = build_design(&winner)?.design;
    Ok(SearchResult {
        recipe: winner,
        design,
        score: s,
        trail,
        exhaustive: false,
        evaluations: iteration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::RobotGeometry;

    #[test]
    fn example_scores() {
        let s1 = score(&fixtures::example1()).unwrap();
        assert_eq!((s1.mean_gap, s1.std_gap), (1.0, 0.0));
        assert!(s1.unidentifiable_starts > 0);
        let s3 = score(&fixtures::example3()).unwrap();
        assert!((s3.mean_gap - 0.5).abs() <= 0.1 && (s3.std_gap - 0.5).abs() <= 0.1);
        assert_eq!(compare(&s3, &s1), Ordering::Less);
        assert_eq!(compare(&s3, &s3), Ordering::Equal);
    }

    #[test]
    fn order_on_mean_gap() {
        let a = ObjectiveScore {
            mean_gap: 0.5,
            std_gap: 0.1,
            worst_stroke: 2.0,
            mean_stroke: 1.0,
            unidentifiable_starts: 0,
        };
        let b = ObjectiveScore { mean_gap: 0.6, ..a };
        assert_eq!(compare(&a, &b), Ordering::Less);
        let c = ObjectiveScore { std_gap: 0.2, ..a };
        assert_eq!(compare(&c, &a), Ordering::Less);
    }

    #[test]
    fn ordering_counts() {
        assert_eq!(distinct_orderings(&[1.0, 2.0, 3.0]), 6);
        assert_eq!(distinct_orderings(&[1.0, 1.0, 2.0]), 3);
        assert_eq!(orderings(&[1.0, 1.0, 2.0]).len(), 3);
        assert_eq!(orderings(&[0.5, 0.75, 1.0, 1.25, 1.5]).len(), 120);
    }

    #[test]
    fn budget_zero_echoes_seed_design() {
        let r = fixtures::example2_recipe();
        let out = search(&r, 0, 1).unwrap();
        assert_eq!(out.design, fixtures::example2());
        assert_eq!(out.recipe, r);
    }

    #[test]
    fn single_element_pools() {
        let r = fixtures::example1_recipe();
        let out = search(&r, 10, 1).unwrap();
        assert!(out.exhaustive);
        assert_eq!(out.design, fixtures::example1());
    }

    #[test]
    fn hill_climb_is_deterministic_and_no_worse() {
        let r = fixtures::example3_recipe();
        let a = search(&r, 40, 9).unwrap();
        let b = search(&r, 40, 9).unwrap();
        assert!(!a.exhaustive);
        assert_eq!(a.design, b.design);
        assert_eq!(a.trail, b.trail);
        let initial = score(&fixtures::example3()).unwrap();
        assert_ne!(compare(&a.score, &initial), Ordering::Greater);
        assert!(a.evaluations <= 40);
    }

    #[test]
    fn infeasible_space() {
        // A single 4 m gap cannot close a 0.5 m distal run.
        let g = RobotGeometry::new(3.0, 6.0, 1.0, 0.5).unwrap();
        let r = DesignRecipe::new(g, vec![4.0], vec![1.0]);
        assert!(matches!(search(&r, 5, 0), Err(Error::EmptyFeasibleSet)));
    }
}
