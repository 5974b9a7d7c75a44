//! Per-turn feature vectors for one `(slot, value)`.
//!
//! | index | feature |
//! |-------|---------|
//! | 0 | previous belief |
//! | 1, 2 | inform/affirm and deny/negate score mass on the value |
//! | 3, 4 | the same masses summed over every other value of the slot |
//! | 5 | constant 1 |
//! | 6 | system can't help with the value, or says the slot's value is missing |
//! | 7 | system asks the user to select the value |
//! | 8, 9 | some SLU hypothesis informs / denies the value |

use std::collections::BTreeMap;

use crate::corpus::{MachineActType, TurnObservation, UserActType};

/// SLU score mass per value of one slot at one turn.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SlotScores {
    pub positive: BTreeMap<String, f64>,
    pub negative: BTreeMap<String, f64>,
}

impl SlotScores {
    /// Sums the turn's hypotheses for `slot`. If either side sums above 1
    /// it is scaled down proportionally so the features stay feasible.
    pub fn collect(turn: &TurnObservation, slot: &str) -> Self {
        let mut out = SlotScores::default();
        for h in &turn.slu {
            if h.slot.as_deref() != Some(slot) {
                continue;
            }
            let Some(v) = h.value.as_ref() else {
                continue;
            };
            let side = match h.act {
                UserActType::Inform | UserActType::Affirm => &mut out.positive,
                UserActType::Deny | UserActType::Negate => &mut out.negative,
                other => {
                    log::debug!("turn {}: act {other:?} does not feed belief features", turn.turn);
                    continue;
                }
            };
            *side.entry(v.clone()).or_default() += h.score;
        }
        for (name, side) in [("positive", &mut out.positive), ("negative", &mut out.negative)] {
            let sum: f64 = side.values().sum();
            if sum > 1.0 {
                log::warn!(
                    "turn {}: {name} score mass {sum} for slot `{slot}` exceeds 1; rescaling",
                    turn.turn
                );
                side.values_mut().for_each(|p| *p /= sum);
            }
        }
        out
    }

    pub fn positive(&self, value: &str) -> f64 {
        self.positive.get(value).copied().unwrap_or(0.0)
    }

    pub fn negative(&self, value: &str) -> f64 {
        self.negative.get(value).copied().unwrap_or(0.0)
    }

    pub fn positive_other(&self, value: &str) -> f64 {
        others(&self.positive, value)
    }

    pub fn negative_other(&self, value: &str) -> f64 {
        others(&self.negative, value)
    }
}

fn others(side: &BTreeMap<String, f64>, value: &str) -> f64 {
    side.iter().filter(|(v, _)| *v != value).map(|(_, p)| p).sum()
}

/// Features for `value` of `slot` at one turn. `feature_count` is 6 or 10.
pub fn extract_features(
    turn: &TurnObservation,
    scores: &SlotScores,
    slot: &str,
    value: &str,
    previous_belief: f64,
    feature_count: usize,
) -> Vec<f64> {
    let mut f = vec![
        previous_belief,
        scores.positive(value),
        scores.negative(value),
        scores.positive_other(value),
        scores.negative_other(value),
        1.0,
    ];
    if feature_count > 6 {
        let on = |b: bool| if b { 1.0 } else { 0.0 };
        let targets = |a: &crate::corpus::MachineAct| {
            a.slot.as_deref() == Some(slot) && a.value.as_deref() == Some(value)
        };
        let canthelp = turn.machine_acts.iter().any(|a| match a.act {
            MachineActType::Canthelp => targets(a),
            MachineActType::CanthelpMissingSlotValue => a.slot.as_deref() == Some(slot),
            _ => false,
        });
        let select = turn
            .machine_acts
            .iter()
            .any(|a| a.act == MachineActType::Select && targets(a));
        let said = |acts: &[UserActType]| {
            turn.slu.iter().any(|h| {
                acts.contains(&h.act)
                    && h.slot.as_deref() == Some(slot)
                    && h.value.as_deref() == Some(value)
            })
        };
        f.push(on(canthelp));
        f.push(on(select));
        f.push(on(said(&[UserActType::Inform])));
        f.push(on(said(&[UserActType::Deny, UserActType::Negate])));
        f.truncate(feature_count);
    }
    f
}
