//! Coordinate-wise hill climbing over a rule's nonzero coefficients.

use serde::Serialize;

use crate::error::{Error, Result};

use super::{Monomial, PolynomialModel};

#[derive(Clone, Debug)]
pub struct HillClimbConfig {
    pub step: f64,
    /// Upper bound on accepted moves; `None` runs to a local optimum.
    pub max_moves: Option<usize>,
}

impl Default for HillClimbConfig {
    fn default() -> Self {
        HillClimbConfig {
            step: 0.1,
            max_moves: None,
        }
    }
}

/// One accepted move.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Move {
    pub monomial: String,
    /// +1 or -1 (the change is `direction * step`).
    pub direction: i8,
    /// Net number of steps this coefficient has moved from its start.
    pub offset: i64,
    pub coefficient: f64,
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct HillClimbResult {
    pub model: PolynomialModel,
    pub initial_objective: f64,
    pub objective: f64,
    pub moves: Vec<Move>,
    /// Number of objective evaluations, including the initial one.
    pub evaluations: usize,
}

/// Maximises `objective` by moving one initially-nonzero coefficient at a
/// time by `±step`.
///
/// Coordinates are visited round-robin, `+step` before `-step`; a move is
/// kept only if it strictly improves the objective, after which the sweep
/// restarts from the first coordinate. Coefficients are always recomputed as
/// `start + k * step`, so they stay exact multiples of the step away from
/// where they began.
pub fn hill_climb<F>(
    model: &PolynomialModel,
    config: &HillClimbConfig,
    mut objective: F,
) -> Result<HillClimbResult>
where
    F: FnMut(&PolynomialModel) -> Result<f64>,
{
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "hill-climbing step must be positive, got {}",
            config.step
        )));
    }
    let coords: Vec<(Monomial, f64)> = model.coefficients().map(|(m, g)| (m.clone(), g)).collect();
    let mut offsets = vec![0i64; coords.len()];
    let mut current = model.clone();
    let initial_objective = objective(&current)?;
    let mut best = initial_objective;
    let mut evaluations = 1;
    let mut moves = Vec::new();

    'search: loop {
        if config.max_moves.is_some_and(|cap| moves.len() >= cap) {
            break;
        }
        for (i, (mono, start)) in coords.iter().enumerate() {
            for direction in [1i8, -1] {
                let offset = offsets[i] + i64::from(direction);
                let value = start + offset as f64 * config.step;
                let mut candidate = current.clone();
                candidate.set(mono.clone(), value)?;
                let score = objective(&candidate)?;
                evaluations += 1;
                if score > best {
                    log::debug!("hill climb: {mono} -> {value} ({best} -> {score})");
                    best = score;
                    offsets[i] = offset;
                    current = candidate;
                    moves.push(Move {
                        monomial: mono.to_string(),
                        direction,
                        offset,
                        coefficient: value,
                        objective: score,
                    });
                    continue 'search;
                }
            }
        }
        break;
    }

    // Coefficients that stepped onto exactly zero drop out of the sparse map
    // but remain coordinates above, so re-set them from the offsets.
    for ((mono, start), &k) in coords.iter().zip(&offsets) {
        current.set(mono.clone(), start + k as f64 * config.step)?;
    }
    Ok(HillClimbResult {
        model: current,
        initial_objective,
        objective: best,
        moves,
        evaluations,
    })
}
