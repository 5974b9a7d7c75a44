//! Gold labels (accumulated user informs) and the turns that get scored.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{DialogueLog, MachineActType};

/// A joint goal: every slot mapped to a value or `None`.
pub type JointGoal = BTreeMap<String, Option<String>>;

/// Per-turn gold joint goal: a slot is `None` until the user informs a value
/// and keeps the latest informed value afterwards.
pub fn label_scheme_a<'a>(
    dialogue: &DialogueLog,
    slots: impl IntoIterator<Item = &'a str>,
) -> Vec<JointGoal> {
    let mut current: JointGoal = slots.into_iter().map(|s| (s.to_string(), None)).collect();
    dialogue
        .turns
        .iter()
        .map(|turn| {
            for (s, v) in &turn.informed {
                current.insert(s.clone(), Some(v.clone()));
            }
            current.clone()
        })
        .collect()
}

/// Turns (1-based) where `slot` shows up in the SLU list or in a system
/// confirm/select act.
pub fn schedule2_turns(dialogue: &DialogueLog, slot: &str) -> BTreeSet<usize> {
    dialogue
        .turns
        .iter()
        .filter(|turn| {
            turn.slu.iter().any(|h| h.slot.as_deref() == Some(slot))
                || turn.machine_acts.iter().any(|a| {
                    matches!(a.act, MachineActType::Confirm | MachineActType::Select)
                        && a.slot.as_deref() == Some(slot)
                })
        })
        .map(|turn| turn.turn)
        .collect()
}

/// Turns where any slot is scored.
pub fn schedule2_joint<'a>(
    dialogue: &DialogueLog,
    slots: impl IntoIterator<Item = &'a str>,
) -> BTreeSet<usize> {
    slots
        .into_iter()
        .flat_map(|s| schedule2_turns(dialogue, s))
        .collect()
}
