//! Synthetic dialogues with a hidden user goal, a simple system policy and
//! a noisy SLU channel.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{
    Corpus, DialogueLog, MachineAct, MachineActType, Ontology, SluHypothesis, TurnObservation,
    UserActType,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub slots: usize,
    pub values_per_slot: usize,
    pub dialogues: usize,
    pub min_turns: usize,
    pub max_turns: usize,
    /// Per-turn probability that one goal slot switches to another value.
    pub goal_change_prob: f64,
    /// Probability that a slot starts without any goal.
    pub no_goal_prob: f64,
    /// Per-turn probability of informing a goal the system has not heard yet.
    pub inform_prob: f64,
    /// Probability that the top SLU hypothesis of a user act is wrong.
    pub confusion_prob: f64,
    /// Beta parameters for the confidence `c`; the top hypothesis scores
    /// `0.5 + 0.5 c`.
    pub confidence_alpha: f64,
    pub confidence_beta: f64,
    pub confirm_rate: f64,
    pub select_rate: f64,
    pub canthelp_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            slots: 3,
            values_per_slot: 5,
            dialogues: 100,
            min_turns: 3,
            max_turns: 8,
            goal_change_prob: 0.1,
            no_goal_prob: 0.2,
            inform_prob: 0.7,
            confusion_prob: 0.0,
            confidence_alpha: 4.0,
            confidence_beta: 2.0,
            confirm_rate: 0.2,
            select_rate: 0.05,
            canthelp_rate: 0.05,
        }
    }
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<()> {
        let probs = [
            ("goal_change_prob", self.goal_change_prob),
            ("no_goal_prob", self.no_goal_prob),
            ("inform_prob", self.inform_prob),
            ("confusion_prob", self.confusion_prob),
            ("confirm_rate", self.confirm_rate),
            ("select_rate", self.select_rate),
            ("canthelp_rate", self.canthelp_rate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.slots == 0 || self.values_per_slot < 2 {
            return Err(Error::InvalidConfig(
                "need at least one slot and two values per slot".into(),
            ));
        }
        if self.min_turns == 0 || self.min_turns > self.max_turns {
            return Err(Error::InvalidConfig(format!(
                "turn range {}..={} is empty or starts at 0",
                self.min_turns, self.max_turns
            )));
        }
        if !(self.confidence_alpha > 0.0 && self.confidence_beta > 0.0) {
            return Err(Error::InvalidConfig("Beta parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn ontology(&self) -> Ontology {
        const NAMES: [&str; 6] = ["area", "food", "pricerange", "type", "near", "stars"];
        (0..self.slots)
            .map(|i| {
                let name = NAMES
                    .get(i)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| format!("slot{i}"));
                let values = (0..self.values_per_slot).map(|j| format!("{name}{j}")).collect();
                (name, values)
            })
            .collect()
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn floor4(x: f64) -> f64 {
    (x * 1e4).floor() / 1e4
}

struct Generator<'a> {
    cfg: &'a GeneratorConfig,
    ontology: &'a Ontology,
    rng: ChaCha8Rng,
    beta: Beta<f64>,
}

impl Generator<'_> {
    fn other_value(&mut self, slot: &str, not: &str) -> String {
        let choices: Vec<&String> = self.ontology[slot].iter().filter(|v| *v != not).collect();
        (*choices.choose(&mut self.rng).expect("two or more values")).clone()
    }

    /// Top score and whether the channel confuses this act.
    fn channel(&mut self) -> (f64, bool, f64) {
        let c = self.beta.sample(&mut self.rng);
        let top = round4(0.5 + 0.5 * c);
        let confused = self.rng.random_bool(self.cfg.confusion_prob);
        let rest = floor4((1.0 - top) * self.rng.random::<f64>());
        (top, confused, rest)
    }

    fn dialogue(&mut self, id: String) -> DialogueLog {
        let slots: Vec<String> = self.ontology.keys().cloned().collect();
        let turns = self.rng.random_range(self.cfg.min_turns..=self.cfg.max_turns);
        let mut target: BTreeMap<String, Option<String>> = BTreeMap::new();
        for s in &slots {
            let goal = if self.rng.random_bool(self.cfg.no_goal_prob) {
                None
            } else {
                self.ontology[s].choose(&mut self.rng).cloned()
            };
            target.insert(s.clone(), goal);
        }
        let mut informed: BTreeMap<String, String> = BTreeMap::new();
        let mut heard: BTreeMap<String, String> = BTreeMap::new();
        let mut out = Vec::with_capacity(turns);

        for t in 1..=turns {
            // system turn
            let mut machine_acts = Vec::new();
            if t == 1 {
                machine_acts.push(MachineAct::new(MachineActType::Welcome, None, None));
            }
            let mut confirms = Vec::new();
            let mut selects: Vec<(String, [String; 2])> = Vec::new();
            for s in &slots {
                let Some(top) = heard.get(s).cloned() else {
                    continue;
                };
                if self.rng.random_bool(self.cfg.confirm_rate) {
                    machine_acts.push(MachineAct::new(MachineActType::Confirm, Some(s), Some(&top)));
                    confirms.push((s.clone(), top));
                } else if self.rng.random_bool(self.cfg.select_rate) {
                    let alt = self.other_value(s, &top);
                    machine_acts.push(MachineAct::new(MachineActType::Select, Some(s), Some(&top)));
                    machine_acts.push(MachineAct::new(MachineActType::Select, Some(s), Some(&alt)));
                    selects.push((s.clone(), [top, alt]));
                }
            }
            if self.rng.random_bool(self.cfg.canthelp_rate) {
                let s = slots.choose(&mut self.rng).expect("slots").clone();
                match informed.get(&s) {
                    Some(v) if self.rng.random_bool(0.5) => machine_acts.push(MachineAct::new(
                        MachineActType::Canthelp,
                        Some(&s),
                        Some(v),
                    )),
                    _ => machine_acts.push(MachineAct::new(
                        MachineActType::CanthelpMissingSlotValue,
                        Some(&s),
                        None,
                    )),
                }
            }

            // the goal may drift before the user answers
            if self.rng.random_bool(self.cfg.goal_change_prob) {
                let with_goal: Vec<String> = target
                    .iter()
                    .filter(|(_, v)| v.is_some())
                    .map(|(s, _)| s.clone())
                    .collect();
                if let Some(s) = with_goal.choose(&mut self.rng).cloned() {
                    let old = target[&s].clone().expect("has goal");
                    let new = self.other_value(&s, &old);
                    target.insert(s, Some(new));
                }
            }

            // user turn: (act, slot, value) triples that are really said
            let mut acts: Vec<(UserActType, String, String)> = Vec::new();
            let mut turn_informed = BTreeMap::new();
            for (s, v) in &confirms {
                if target[s].as_deref() == Some(v.as_str()) {
                    acts.push((UserActType::Affirm, s.clone(), v.clone()));
                    turn_informed.insert(s.clone(), v.clone());
                } else {
                    acts.push((UserActType::Deny, s.clone(), v.clone()));
                }
            }
            for s in &slots {
                let Some(goal) = target[s].clone() else {
                    continue;
                };
                if turn_informed.contains_key(s) {
                    continue;
                }
                let denied = acts
                    .iter()
                    .any(|(a, slot, _)| *a == UserActType::Deny && slot == s);
                let offered = selects
                    .iter()
                    .any(|(slot, vals)| slot == s && vals.contains(&goal));
                let fresh = informed.get(s) != Some(&goal);
                if denied || offered || (fresh && self.rng.random_bool(self.cfg.inform_prob)) {
                    acts.push((UserActType::Inform, s.clone(), goal.clone()));
                    turn_informed.insert(s.clone(), goal);
                }
            }

            // SLU channel
            let mut slu = Vec::new();
            for (act, s, v) in acts {
                let (top, confused, rest) = self.channel();
                match act {
                    UserActType::Inform => {
                        let wrong = self.other_value(&s, &v);
                        let (first, second) = if confused { (wrong, v) } else { (v, wrong) };
                        slu.push(SluHypothesis::new(UserActType::Inform, &s, &first, top));
                        if rest > 0.0 {
                            slu.push(SluHypothesis::new(UserActType::Inform, &s, &second, rest));
                        }
                    }
                    _ => {
                        let flipped = if act == UserActType::Affirm {
                            UserActType::Deny
                        } else {
                            UserActType::Affirm
                        };
                        let (first, second) = if confused { (flipped, act) } else { (act, flipped) };
                        slu.push(SluHypothesis::new(first, &s, &v, top));
                        if rest > 0.0 {
                            slu.push(SluHypothesis::new(second, &s, &v, rest));
                        }
                    }
                }
            }
            keep_feasible(&mut slu);
            slu.sort_by(|a, b| b.score.total_cmp(&a.score));

            for s in &slots {
                let best = slu
                    .iter()
                    .filter(|h| h.act == UserActType::Inform && h.slot.as_deref() == Some(s))
                    .max_by(|a, b| a.score.total_cmp(&b.score));
                if let Some(h) = best {
                    heard.insert(s.clone(), h.value.clone().expect("inform has value"));
                }
            }
            informed.extend(turn_informed.clone());
            out.push(TurnObservation {
                turn: t,
                machine_acts,
                slu,
                informed: turn_informed,
            });
        }
        DialogueLog { id, turns: out }
    }
}

/// A confused deny can land next to an inform on the same slot; scale such
/// slots back so positive (and negative) mass per slot stays at most 1.
fn keep_feasible(slu: &mut [SluHypothesis]) {
    let positive = |a: UserActType| matches!(a, UserActType::Inform | UserActType::Affirm);
    let mut mass: BTreeMap<(String, bool), f64> = BTreeMap::new();
    for h in slu.iter() {
        *mass
            .entry((h.slot.clone().unwrap_or_default(), positive(h.act)))
            .or_default() += h.score;
    }
    for h in slu.iter_mut() {
        let total = mass[&(h.slot.clone().unwrap_or_default(), positive(h.act))];
        if total > 1.0 {
            h.score = floor4(h.score / total);
        }
    }
}

/// Fully determined by `config.seed`.
pub fn generate_corpus(config: &GeneratorConfig) -> Result<Corpus> {
    config.check()?;
    let ontology = config.ontology();
    let mut g = Generator {
        cfg: config,
        ontology: &ontology,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        beta: Beta::new(config.confidence_alpha, config.confidence_beta)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?,
    };
    let dialogues = (0..config.dialogues)
        .map(|i| g.dialogue(format!("dlg{i:05}")))
        .collect();
    Ok(Corpus {
        ontology: ontology.clone(),
        dialogues,
    })
}
