//! Accuracy and L2 of tracked beliefs against scheme-A labels, on the turns
//! selected by schedule 2.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::joint::one_best;
use super::labels::{label_scheme_a, schedule2_joint, schedule2_turns};
use super::{BeliefState, JointGoal, SlotBelief};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotReport {
    pub accuracy: f64,
    pub l2: f64,
    pub turns_scored: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub accuracy: f64,
    pub l2: f64,
    pub turns_scored: usize,
    pub per_slot: BTreeMap<String, SlotReport>,
}

fn fmt_metrics(out: &mut String, indent: &str, r: &SlotReport) {
    let _ = write!(
        out,
        "{indent}\"accuracy\": {:.6},\n{indent}\"l2\": {:.6},\n{indent}\"turns_scored\": {}",
        r.accuracy, r.l2, r.turns_scored
    );
}

impl ScoreReport {
    fn overall(&self) -> SlotReport {
        SlotReport {
            accuracy: self.accuracy,
            l2: self.l2,
            turns_scored: self.turns_scored,
        }
    }

    /// JSON with every metric printed to six decimals.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        fmt_metrics(&mut out, "  ", &self.overall());
        out.push_str(",\n  \"per_slot\": {");
        for (i, (slot, r)) in self.per_slot.iter().enumerate() {
            let _ = write!(
                out,
                "{}\n    {}: {{\n",
                if i == 0 { "" } else { "," },
                serde_json::Value::String(slot.clone())
            );
            fmt_metrics(&mut out, "      ", r);
            out.push_str("\n    }");
        }
        out.push_str(if self.per_slot.is_empty() { "}\n}\n" } else { "\n  }\n}\n" });
        out
    }
}

fn prob(b: &SlotBelief, v: &Option<String>) -> f64 {
    match v {
        None => b.none,
        Some(v) => b.values.get(v).copied().unwrap_or(0.0),
    }
}

/// L2 distance between the joint distribution implied by `belief` (product
/// of slot marginals, with an "other" bucket for missing mass) and the delta
/// on `gold`. Computed in factored form; a gold joint that is not listed
/// contributes its full unit of error.
pub fn joint_l2(belief: &BeliefState, gold: &JointGoal) -> f64 {
    let empty = SlotBelief::empty();
    let mut squares = 1.0;
    let mut listed = 1.0;
    let mut p_gold = 1.0;
    for (slot, g) in gold {
        let b = belief.slots.get(slot).unwrap_or(&empty);
        squares *= b.none * b.none + b.values.values().map(|p| p * p).sum::<f64>();
        listed *= b.none + b.values.values().sum::<f64>();
        p_gold *= prob(b, g);
    }
    let other = (1.0 - listed).max(0.0);
    (squares - 2.0 * p_gold + 1.0 + other * other).max(0.0).sqrt()
}

/// Accuracy of the 1-best joint and mean joint L2 over aligned turns.
pub fn score(tracked: &[&BeliefState], gold: &[&JointGoal]) -> Result<SlotReport> {
    if tracked.len() != gold.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            got: tracked.len(),
        });
    }
    if tracked.is_empty() {
        return Err(Error::NoScoredTurns);
    }
    let mut correct = 0usize;
    let mut l2 = 0.0;
    for (b, g) in tracked.iter().zip(gold) {
        let best = one_best(b);
        let hit = g.iter().all(|(s, v)| best.get(s).cloned().flatten() == *v);
        correct += usize::from(hit);
        l2 += joint_l2(b, g);
    }
    let n = tracked.len();
    Ok(SlotReport {
        accuracy: correct as f64 / n as f64,
        l2: l2 / n as f64,
        turns_scored: n,
    })
}

fn project(b: &BeliefState, slot: &str) -> BeliefState {
    BeliefState {
        slots: b.slots.get_key_value(slot).map(|(k, v)| (k.clone(), v.clone())).into_iter().collect(),
    }
}

/// Scores tracker output for a whole corpus: joint metrics on the union of
/// every slot's schedule-2 turns, and per-slot metrics on each slot's own.
pub fn score_corpus(corpus: &Corpus, tracked: &[Vec<BeliefState>]) -> Result<ScoreReport> {
    if tracked.len() != corpus.dialogues.len() {
        return Err(Error::LengthMismatch {
            expected: corpus.dialogues.len(),
            got: tracked.len(),
        });
    }
    let slots: Vec<&str> = corpus.slots().collect();
    let mut joint_b = Vec::new();
    let mut joint_g = Vec::new();
    let mut slot_pairs: BTreeMap<&str, (Vec<BeliefState>, Vec<JointGoal>)> = BTreeMap::new();
    for (d, states) in corpus.dialogues.iter().zip(tracked) {
        if states.len() != d.len() {
            return Err(Error::LengthMismatch {
                expected: d.len(),
                got: states.len(),
            });
        }
        let gold = label_scheme_a(d, slots.iter().copied());
        let scored: BTreeSet<usize> = schedule2_joint(d, slots.iter().copied());
        for &t in &scored {
            joint_b.push(&states[t - 1]);
            joint_g.push(gold[t - 1].clone());
        }
        for &slot in &slots {
            let entry = slot_pairs.entry(slot).or_default();
            for t in schedule2_turns(d, slot) {
                entry.0.push(project(&states[t - 1], slot));
                entry.1.push(JointGoal::from([(slot.to_string(), gold[t - 1][slot].clone())]));
            }
        }
    }
    let gold_refs: Vec<&JointGoal> = joint_g.iter().collect();
    let overall = score(&joint_b, &gold_refs)?;
    let mut per_slot = BTreeMap::new();
    for (slot, (b, g)) in &slot_pairs {
        if b.is_empty() {
            continue;
        }
        let b: Vec<&BeliefState> = b.iter().collect();
        let g: Vec<&JointGoal> = g.iter().collect();
        per_slot.insert(slot.to_string(), score(&b, &g)?);
    }
    Ok(ScoreReport {
        accuracy: overall.accuracy,
        l2: overall.l2,
        turns_scored: overall.turns_scored,
        per_slot,
    })
}
