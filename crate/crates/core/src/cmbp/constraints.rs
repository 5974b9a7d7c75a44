//! Sampled checks of the probabilistic and monotonicity constraints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

use super::{PolynomialModel, CONSTANT_FEATURE};

pub const DEFAULT_SAMPLES: usize = 10_000;
const MAX_WITNESSES: usize = 5;
const TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintResult {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub violations: usize,
    /// Feature vectors at which the constraint fails (at most a handful).
    pub witnesses: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub constraints: Vec<ConstraintResult>,
}

impl ConstraintReport {
    pub fn passed(&self) -> bool {
        self.constraints.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConstraintResult> {
        self.constraints.iter().find(|c| c.name == name)
    }
}

/// Samples a point of the feasible region: every probability in `[0, 1]`,
/// `P+ + P~+ <= 1`, `P- + P~- <= 1`, the constant feature at 1 and any act
/// flags in `{0, 1}`.
pub fn sample_feasible<R: Rng + ?Sized>(rng: &mut R, feature_count: usize) -> Vec<f64> {
    let pair = |rng: &mut R| {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        if a + b > 1.0 {
            (1.0 - a, 1.0 - b)
        } else {
            (a, b)
        }
    };
    let b = rng.random::<f64>();
    let (pos, pos_other) = pair(rng);
    let (neg, neg_other) = pair(rng);
    let mut x = vec![b, pos, neg, pos_other, neg_other, 1.0];
    for _ in 6..feature_count {
        x.push(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    }
    x
}

/// Vertices of the feasible region (act flags held at 0).
fn corners(feature_count: usize) -> Vec<Vec<f64>> {
    let pairs = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
    let mut out = Vec::new();
    for b in [0.0, 1.0] {
        for &(p, po) in &pairs {
            for &(n, no) in &pairs {
                let mut x = vec![b, p, n, po, no, 1.0];
                x.resize(feature_count, 0.0);
                out.push(x);
            }
        }
    }
    out
}

/// Checks that the rule's output stays in `[0, 1]` and never decreases in
/// `P+` over the feasible region, using the region's vertices plus
/// `sample_count` seeded random points.
pub fn check_constraints(
    model: &PolynomialModel,
    sample_count: usize,
    seed: u64,
) -> Result<ConstraintReport> {
    let fc = model.feature_count();
    if fc != 6 && fc != 10 {
        return Err(Error::UnsupportedFeatureCount(fc));
    }
    debug_assert_eq!(CONSTANT_FEATURE, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = corners(fc);
    points.extend((0..sample_count).map(|_| sample_feasible(&mut rng, fc)));

    let slope = model.derivative(1);
    let mut range = ConstraintResult {
        name: "output_in_unit_interval".into(),
        passed: true,
        checked: 0,
        violations: 0,
        witnesses: Vec::new(),
    };
    let mut monotone = ConstraintResult {
        name: "nondecreasing_in_p_pos".into(),
        ..range.clone()
    };
    for x in &points {
        let value = model.evaluate(x)?;
        range.checked += 1;
        if !(-TOLERANCE..=1.0 + TOLERANCE).contains(&value) {
            range.violations += 1;
            if range.witnesses.len() < MAX_WITNESSES {
                range.witnesses.push(x.clone());
            }
        }
        monotone.checked += 1;
        if slope.evaluate(x) < -TOLERANCE {
            monotone.violations += 1;
            if monotone.witnesses.len() < MAX_WITNESSES {
                monotone.witnesses.push(x.clone());
            }
        }
    }
    range.passed = range.violations == 0;
    monotone.passed = monotone.violations == 0;
    Ok(ConstraintReport {
        constraints: vec![range, monotone],
    })
}
