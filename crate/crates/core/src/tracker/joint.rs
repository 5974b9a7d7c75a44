//! Joint-goal distributions under slot independence.

use std::cmp::Ordering;

use itertools::Itertools;

use super::{BeliefState, JointGoal, SlotBelief};

/// Cross product of per-slot candidates, most probable first. `other` is
/// the mass not covered by the listed hypotheses.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    pub hypotheses: Vec<(JointGoal, f64)>,
    pub other: f64,
}

/// `None` first, then values in lexicographic order.
fn tie_order(a: &Option<String>, b: &Option<String>) -> Ordering {
    a.cmp(b)
}

/// A slot's candidates (values and `None`) sorted by descending belief,
/// ties resolved by [`tie_order`].
pub fn ranked_candidates(belief: &SlotBelief) -> Vec<(Option<String>, f64)> {
    let mut c: Vec<(Option<String>, f64)> = std::iter::once((None, belief.none))
        .chain(belief.values.iter().map(|(v, &p)| (Some(v.clone()), p)))
        .collect();
    c.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| tie_order(&a.0, &b.0)));
    c
}

/// Joint hypotheses from per-slot marginals, each slot truncated to its
/// `top_k` best candidates first (`None` keeps them all).
pub fn assemble_joint(belief: &BeliefState, top_k: Option<usize>) -> JointDistribution {
    let slots: Vec<&String> = belief.slots.keys().collect();
    let per_slot: Vec<Vec<(Option<String>, f64)>> = belief
        .slots
        .values()
        .map(|b| {
            let mut c = ranked_candidates(b);
            if let Some(k) = top_k {
                c.truncate(k.max(1));
            }
            c
        })
        .collect();
    let mut hypotheses: Vec<(JointGoal, f64)> = if slots.is_empty() {
        vec![(JointGoal::new(), 1.0)]
    } else {
        per_slot
            .iter()
            .map(|c| c.iter())
            .multi_cartesian_product()
            .map(|combo| {
                let goal = slots
                    .iter()
                    .zip(&combo)
                    .map(|(s, (v, _))| ((*s).clone(), v.clone()))
                    .collect();
                (goal, combo.iter().map(|(_, p)| p).product())
            })
            .collect()
    };
    hypotheses.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let listed: f64 = hypotheses.iter().map(|(_, p)| p).sum();
    JointDistribution {
        hypotheses,
        other: (1.0 - listed).max(0.0),
    }
}

/// Per-slot argmax combination.
pub fn one_best(belief: &BeliefState) -> JointGoal {
    belief
        .slots
        .iter()
        .map(|(s, b)| (s.clone(), ranked_candidates(b).swap_remove(0).0))
        .collect()
}
