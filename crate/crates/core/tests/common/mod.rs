//! Independent oracles shared by the integration and acceptance tests. None
//! of these reuse the library's scoring, labelling or schedule code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rpn_dst::corpus::{Corpus, DialogueLog, MachineActType};
use rpn_dst::tracker::{BeliefState, SlotBelief};

pub type Goal = BTreeMap<String, Option<String>>;

/// Every joint hypothesis (slot order = map order) with its product
/// probability.
pub fn all_joints(belief: &BeliefState) -> Vec<(Goal, f64)> {
    let mut out = vec![(Goal::new(), 1.0)];
    for (slot, b) in &belief.slots {
        let mut next = Vec::new();
        for (goal, p) in &out {
            let mut with_none = goal.clone();
            with_none.insert(slot.clone(), None);
            next.push((with_none, p * b.none));
            for (v, q) in &b.values {
                let mut g = goal.clone();
                g.insert(slot.clone(), Some(v.clone()));
                next.push((g, p * q));
            }
        }
        out = next;
    }
    out
}

/// Highest product probability over the full cross product.
pub fn exhaustive_max(belief: &BeliefState) -> f64 {
    all_joints(belief).iter().map(|(_, p)| *p).fold(f64::NEG_INFINITY, f64::max)
}

pub fn joint_probability(belief: &BeliefState, goal: &Goal) -> f64 {
    goal.iter()
        .map(|(s, v)| {
            let b = &belief.slots[s];
            match v {
                None => b.none,
                Some(v) => b.values.get(v).copied().unwrap_or(0.0),
            }
        })
        .product()
}

/// Squared L2 over the explicit hypothesis list plus the "other" bucket; a
/// gold joint missing from the list adds its full unit.
pub fn brute_l2(belief: &BeliefState, gold: &Goal) -> f64 {
    let joints = all_joints(belief);
    let listed: f64 = joints.iter().map(|(_, p)| p).sum();
    let other = (1.0 - listed).max(0.0);
    let mut sq = other * other;
    let mut found = false;
    for (g, p) in &joints {
        let target = if g == gold {
            found = true;
            1.0
        } else {
            0.0
        };
        sq += (p - target) * (p - target);
    }
    if !found {
        sq += 1.0;
    }
    sq.sqrt()
}

/// Argmax per slot with ties to `None`, then the smallest value.
pub fn brute_one_best(belief: &BeliefState) -> Goal {
    belief
        .slots
        .iter()
        .map(|(s, b)| {
            let mut best: (Option<String>, f64) = (None, b.none);
            for (v, &p) in &b.values {
                if p > best.1 {
                    best = (Some(v.clone()), p);
                }
            }
            (s.clone(), best.0)
        })
        .collect()
}

/// Gold goals accumulated from the per-turn informed annotations.
pub fn brute_labels(corpus: &Corpus, d: &DialogueLog) -> Vec<Goal> {
    let mut goal: Goal = corpus.ontology.keys().map(|s| (s.clone(), None)).collect();
    let mut out = Vec::new();
    for turn in &d.turns {
        for (s, v) in &turn.informed {
            *goal.get_mut(s).unwrap() = Some(v.clone());
        }
        out.push(goal.clone());
    }
    out
}

fn slot_scored(turn: &rpn_dst::corpus::TurnObservation, slot: &str) -> bool {
    turn.slu.iter().any(|h| h.slot.as_deref() == Some(slot))
        || turn.machine_acts.iter().any(|a| {
            (a.act == MachineActType::Confirm || a.act == MachineActType::Select)
                && a.slot.as_deref() == Some(slot)
        })
}

/// (accuracy, mean L2, turns scored) by direct enumeration.
pub fn brute_score(corpus: &Corpus, beliefs: &[Vec<BeliefState>]) -> (f64, f64, usize) {
    let (mut correct, mut l2, mut n) = (0usize, 0.0, 0usize);
    for (d, states) in corpus.dialogues.iter().zip(beliefs) {
        let gold = brute_labels(corpus, d);
        for (i, turn) in d.turns.iter().enumerate() {
            if !corpus.ontology.keys().any(|s| slot_scored(turn, s)) {
                continue;
            }
            n += 1;
            if brute_one_best(&states[i]) == gold[i] {
                correct += 1;
            }
            l2 += brute_l2(&states[i], &gold[i]);
        }
    }
    (correct as f64 / n as f64, l2 / n as f64, n)
}

/// Random marginals over the ontology. Some slots leave mass unassigned
/// (feeding the "other" bucket) and some contain exact ties.
pub fn random_beliefs<R: Rng>(rng: &mut R, ontology: &BTreeMap<String, Vec<String>>) -> BeliefState {
    let slots = ontology
        .iter()
        .map(|(slot, values)| {
            let mut raw: Vec<(String, f64)> = Vec::new();
            for v in values {
                if rng.random_bool(0.5) {
                    raw.push((v.clone(), f64::from(rng.random_range(0u8..5)) / 4.0));
                }
            }
            let none_raw = f64::from(rng.random_range(0u8..5)) / 4.0;
            let total: f64 = raw.iter().map(|(_, p)| p).sum::<f64>() + none_raw;
            let keep = if rng.random_bool(0.3) { rng.random_range(0.5..1.0) } else { 1.0 };
            let belief = if total == 0.0 {
                SlotBelief::empty()
            } else {
                for (_, p) in raw.iter_mut() {
                    *p *= keep / total;
                }
                SlotBelief {
                    values: raw.into_iter().collect(),
                    none: none_raw * keep / total,
                }
            };
            (slot.clone(), belief)
        })
        .collect();
    BeliefState { slots }
}
