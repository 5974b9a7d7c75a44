//! Belief tracking over dialogue corpora.
//!
//! Slots and values are tracked independently: every value of a slot that
//! ever appears in the SLU output gets its own belief sequence, computed
//! from turn 1 but reported only from its first mention on. Beliefs of a
//! slot are rescaled when output so they sum to at most 1, and the rest is
//! the `None` mass.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmbp::{DstLayout, PolynomialModel};
use crate::corpus::{Corpus, DialogueLog, Ontology, UserActType};
use crate::error::{Error, Result};
use crate::network::Network;

pub mod features;
pub mod joint;
pub mod labels;
pub mod metrics;
pub mod samples;

pub use features::{extract_features, SlotScores};
pub use joint::{assemble_joint, one_best, JointDistribution};
pub use labels::{label_scheme_a, schedule2_joint, schedule2_turns, JointGoal};
pub use metrics::{score, score_corpus, ScoreReport, SlotReport};
pub use samples::{build_samples, corpus_accuracy, soft_labels, CorpusValidator};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotBelief {
    pub values: BTreeMap<String, f64>,
    pub none: f64,
}

impl SlotBelief {
    pub fn empty() -> Self {
        SlotBelief {
            values: BTreeMap::new(),
            none: 1.0,
        }
    }
}

/// Output beliefs of one turn.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub slots: BTreeMap<String, SlotBelief>,
}

/// Maps a value's per-turn feature rows to raw beliefs. Feature 0 of each
/// row is ignored: the model feeds its own previous belief back.
pub trait BeliefModel: Sync {
    fn feature_count(&self) -> usize;
    fn run(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>>;
}

/// A layered network built for tracking.
#[derive(Clone, Debug)]
pub struct RpnModel {
    net: Network,
    layout: DstLayout,
}

impl RpnModel {
    pub fn new(net: Network) -> Result<Self> {
        let layout = DstLayout::infer(net.topology())?;
        if layout.feature_count != 6 && layout.feature_count != 10 {
            return Err(Error::UnsupportedFeatureCount(layout.feature_count));
        }
        Ok(RpnModel { net, layout })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn layout(&self) -> &DstLayout {
        &self.layout
    }
}

impl BeliefModel for RpnModel {
    fn feature_count(&self) -> usize {
        self.layout.feature_count
    }

    fn run(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let out = self.layout.output;
        let mut state = self.net.initial_state();
        rows.iter()
            .map(|row| {
                let values = self.net.forward_step(&mut state, &self.layout.network_inputs(row))?;
                Ok(values[out])
            })
            .collect()
    }
}

/// A polynomial rule applied directly, clamped to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct CmbpModel {
    rule: PolynomialModel,
}

impl CmbpModel {
    pub fn new(rule: PolynomialModel) -> Result<Self> {
        let fc = rule.feature_count();
        if fc != 6 && fc != 10 {
            return Err(Error::UnsupportedFeatureCount(fc));
        }
        Ok(CmbpModel { rule })
    }

    pub fn rule(&self) -> &PolynomialModel {
        &self.rule
    }
}

impl BeliefModel for CmbpModel {
    fn feature_count(&self) -> usize {
        self.rule.feature_count()
    }

    fn run(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut prev = 0.0;
        let mut f = Vec::new();
        rows.iter()
            .map(|row| {
                f.clear();
                f.extend_from_slice(row);
                f[0] = prev;
                prev = self.rule.evaluate(&f)?.clamp(0.0, 1.0);
                Ok(prev)
            })
            .collect()
    }
}

/// Feature rows of one tracked value (feature 0 left at 0).
#[derive(Clone, Debug, PartialEq)]
pub struct ValueSequence {
    pub slot: String,
    pub value: String,
    /// First turn (1-based) at which the value appears in the SLU output.
    pub first_turn: usize,
    pub rows: Vec<Vec<f64>>,
}

/// Every `(slot, value)` the dialogue's SLU output mentions, slots in
/// ontology order and values in order of first mention.
pub fn value_sequences(
    ontology: &Ontology,
    dialogue: &DialogueLog,
    feature_count: usize,
) -> Vec<ValueSequence> {
    let mut out = Vec::new();
    for slot in ontology.keys() {
        let mut first: Vec<(String, usize)> = Vec::new();
        for turn in &dialogue.turns {
            let mut fresh: Vec<&String> = turn
                .slu
                .iter()
                .filter(|h| h.slot.as_deref() == Some(slot))
                .filter_map(|h| h.value.as_ref())
                .filter(|v| !first.iter().any(|(x, _)| x == *v))
                .collect();
            fresh.sort();
            fresh.dedup();
            first.extend(fresh.into_iter().map(|v| (v.clone(), turn.turn)));
        }
        if first.is_empty() {
            continue;
        }
        let scores: Vec<SlotScores> = dialogue
            .turns
            .iter()
            .map(|t| SlotScores::collect(t, slot))
            .collect();
        for (value, first_turn) in first {
            let rows = dialogue
                .turns
                .iter()
                .zip(&scores)
                .map(|(t, sc)| extract_features(t, sc, slot, &value, 0.0, feature_count))
                .collect();
            out.push(ValueSequence {
                slot: slot.clone(),
                value,
                first_turn,
                rows,
            });
        }
    }
    out
}

/// Rescaled beliefs for every turn of one dialogue.
pub fn track_dialogue(
    model: &dyn BeliefModel,
    ontology: &Ontology,
    dialogue: &DialogueLog,
) -> Result<Vec<BeliefState>> {
    let mut raw: BTreeMap<&str, Vec<(String, usize, Vec<f64>)>> = BTreeMap::new();
    let sequences = value_sequences(ontology, dialogue, model.feature_count());
    for seq in &sequences {
        let beliefs = model.run(&seq.rows)?;
        raw.entry(seq.slot.as_str())
            .or_default()
            .push((seq.value.clone(), seq.first_turn, beliefs));
    }
    Ok((1..=dialogue.len())
        .map(|t| {
            let slots = ontology
                .keys()
                .map(|slot| {
                    let mut belief = SlotBelief::empty();
                    if let Some(values) = raw.get(slot.as_str()) {
                        for (v, first, b) in values {
                            if *first <= t {
                                belief.values.insert(v.clone(), b[t - 1]);
                            }
                        }
                        let total: f64 = belief.values.values().sum();
                        let divisor = total.max(1.0);
                        belief.values.values_mut().for_each(|b| *b /= divisor);
                        belief.none = 1.0 - total / divisor;
                    }
                    (slot.clone(), belief)
                })
                .collect();
            BeliefState { slots }
        })
        .collect())
}

/// Tracks every dialogue in parallel; results keep corpus order.
pub fn track_corpus(model: &dyn BeliefModel, corpus: &Corpus) -> Result<Vec<Vec<BeliefState>>> {
    corpus
        .dialogues
        .par_iter()
        .map(|d| track_dialogue(model, &corpus.ontology, d))
        .collect()
}

/// Baseline: each slot takes the top inform/affirm value of the latest turn
/// that has one, with belief 1.
pub fn track_top_hypothesis(ontology: &Ontology, dialogue: &DialogueLog) -> Vec<BeliefState> {
    let mut current: BTreeMap<&str, String> = BTreeMap::new();
    dialogue
        .turns
        .iter()
        .map(|turn| {
            for slot in ontology.keys() {
                let top = turn
                    .slu
                    .iter()
                    .filter(|h| {
                        matches!(h.act, UserActType::Inform | UserActType::Affirm)
                            && h.slot.as_deref() == Some(slot)
                            && h.value.is_some()
                    })
                    .max_by(|a, b| a.score.total_cmp(&b.score));
                if let Some(h) = top {
                    current.insert(slot, h.value.clone().expect("filtered"));
                }
            }
            let slots = ontology
                .keys()
                .map(|slot| {
                    let belief = match current.get(slot.as_str()) {
                        Some(v) => SlotBelief {
                            values: BTreeMap::from([(v.clone(), 1.0)]),
                            none: 0.0,
                        },
                        None => SlotBelief::empty(),
                    };
                    (slot.clone(), belief)
                })
                .collect();
            BeliefState { slots }
        })
        .collect()
}

/// One line of a beliefs file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefRecord {
    pub dialogue: String,
    pub turn: usize,
    pub slots: BTreeMap<String, SlotBelief>,
}

pub fn beliefs_to_jsonl(corpus: &Corpus, beliefs: &[Vec<BeliefState>]) -> Result<String> {
    let mut out = String::new();
    for (d, states) in corpus.dialogues.iter().zip(beliefs) {
        for (i, state) in states.iter().enumerate() {
            let rec = BeliefRecord {
                dialogue: d.id.clone(),
                turn: i + 1,
                slots: state.slots.clone(),
            };
            let _ = writeln!(out, "{}", serde_json::to_string(&rec)?);
        }
    }
    Ok(out)
}

/// Reads a beliefs file back into per-dialogue sequences aligned with
/// `corpus`. Every turn of every dialogue must be present, in order.
pub fn beliefs_from_jsonl(text: &str, corpus: &Corpus) -> Result<Vec<Vec<BeliefState>>> {
    let mut by_id: BTreeMap<String, Vec<BeliefState>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: BeliefRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        let states = by_id.entry(rec.dialogue.clone()).or_default();
        if rec.turn != states.len() + 1 {
            return Err(Error::parse(
                i + 1,
                format!("dialogue `{}`: expected turn {}, got {}", rec.dialogue, states.len() + 1, rec.turn),
            ));
        }
        states.push(BeliefState { slots: rec.slots });
    }
    corpus
        .dialogues
        .iter()
        .map(|d| {
            let states = by_id.remove(&d.id).unwrap_or_default();
            if states.len() != d.len() {
                return Err(Error::InvalidConfig(format!(
                    "beliefs for dialogue `{}` cover {} of {} turns",
                    d.id,
                    states.len(),
                    d.len()
                )));
            }
            Ok(states)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmbp::{build_dst_topology, init_rpn_from_cmbp};
    use crate::corpus::{SluHypothesis, TurnObservation};
    use crate::network::ActivationSpec;

    fn ontology() -> Ontology {
        BTreeMap::from([
            ("area".to_string(), vec!["north".to_string(), "south".to_string()]),
            ("food".to_string(), vec!["chinese".to_string(), "indian".to_string()]),
        ])
    }

    fn dialogue(turns: Vec<Vec<SluHypothesis>>) -> DialogueLog {
        DialogueLog {
            id: "d".into(),
            turns: turns
                .into_iter()
                .enumerate()
                .map(|(i, slu)| TurnObservation {
                    turn: i + 1,
                    machine_acts: vec![],
                    slu,
                    informed: Default::default(),
                })
                .collect(),
        }
    }

    fn demo_rpn() -> RpnModel {
        let topo = build_dst_topology(6, false, ActivationSpec::softclip(0.01).unwrap()).unwrap();
        let topo = init_rpn_from_cmbp(&topo, &PolynomialModel::demo_rule()).unwrap();
        RpnModel::new(Network::new(topo).unwrap()).unwrap()
    }

    #[test]
    fn demo_rule_iterates() {
        let inform = || vec![SluHypothesis::new(UserActType::Inform, "food", "chinese", 0.5)];
        let d = dialogue(vec![inform(), inform()]);
        let states = track_dialogue(&demo_rpn(), &ontology(), &d).unwrap();
        let food = |t: usize| states[t].slots["food"].values["chinese"];
        assert_eq!(food(0), 0.5);
        assert_eq!(food(1), 0.75);
        assert_eq!(states[1].slots["food"].none, 0.25);
    }

    #[test]
    fn unmentioned_slot_is_none() {
        let d = dialogue(vec![
            vec![SluHypothesis::new(UserActType::Inform, "food", "chinese", 0.5)],
            vec![],
        ]);
        let states = track_dialogue(&demo_rpn(), &ontology(), &d).unwrap();
        for s in &states {
            assert_eq!(s.slots["area"], SlotBelief::empty());
        }
    }

    #[test]
    fn rescales_when_over_full() {
        struct Fixed;
        impl BeliefModel for Fixed {
            fn feature_count(&self) -> usize {
                6
            }
            fn run(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
                Ok(vec![0.7; rows.len()])
            }
        }
        let d = dialogue(vec![vec![
            SluHypothesis::new(UserActType::Inform, "food", "chinese", 0.5),
            SluHypothesis::new(UserActType::Inform, "food", "indian", 0.4),
        ]]);
        let states = track_dialogue(&Fixed, &ontology(), &d).unwrap();
        let food = &states[0].slots["food"];
        assert_eq!(food.values["chinese"], 0.5);
        assert_eq!(food.values["indian"], 0.5);
        assert_eq!(food.none, 0.0);
    }

    #[test]
    fn values_appear_from_first_mention() {
        let d = dialogue(vec![
            vec![SluHypothesis::new(UserActType::Inform, "food", "chinese", 0.5)],
            vec![SluHypothesis::new(UserActType::Inform, "food", "indian", 0.4)],
            vec![],
        ]);
        let states = track_dialogue(&demo_rpn(), &ontology(), &d).unwrap();
        assert_eq!(states[0].slots["food"].values.len(), 1);
        assert_eq!(states[1].slots["food"].values.len(), 2);
        assert_eq!(states[2].slots["food"].values.len(), 2);
    }

    #[test]
    fn cmbp_model_matches_rpn_in_identity_region() {
        let d = dialogue(vec![
            vec![SluHypothesis::new(UserActType::Inform, "food", "chinese", 0.3)],
            vec![SluHypothesis::new(UserActType::Inform, "food", "chinese", 0.2)],
        ]);
        let cmbp = CmbpModel::new(PolynomialModel::demo_rule()).unwrap();
        let a = track_dialogue(&cmbp, &ontology(), &d).unwrap();
        let b = track_dialogue(&demo_rpn(), &ontology(), &d).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn belief_file_round_trip() {
        let corpus = Corpus {
            ontology: ontology(),
            dialogues: vec![dialogue(vec![
                vec![SluHypothesis::new(UserActType::Inform, "food", "chinese", 0.3)],
                vec![],
            ])],
        };
        let beliefs = track_corpus(&demo_rpn(), &corpus).unwrap();
        let text = beliefs_to_jsonl(&corpus, &beliefs).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(beliefs_from_jsonl(&text, &corpus).unwrap(), beliefs);
        let first_line_only = text.lines().next().unwrap();
        assert!(beliefs_from_jsonl(first_line_only, &corpus).is_err());
    }
}
