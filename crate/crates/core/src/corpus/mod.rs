//! Dialogue corpora: JSON Lines with an ontology header.
//!
//! ```text
//! {"ontology":{"area":["north","south"],"food":["chinese","indian"]}}
//! {"id":"d0","turns":[{"turn":1,"machine_acts":[],"slu":[{"act":"inform","slot":"food","value":"chinese","score":0.8}],"informed":{"food":"chinese"}}]}
//! ```
//!
//! `informed` holds the user's true informs at that turn; accumulated goal
//! labels are derived from it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

mod generate;

pub use generate::{generate_corpus, GeneratorConfig};

/// Slot name to its possible values.
pub type Ontology = BTreeMap<String, Vec<String>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserActType {
    Inform,
    Affirm,
    Deny,
    Negate,
    Request,
    Hello,
    Bye,
    Null,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MachineActType {
    #[serde(rename = "canthelp")]
    Canthelp,
    #[serde(rename = "canthelp.missing_slot_value")]
    CanthelpMissingSlotValue,
    #[serde(rename = "select")]
    Select,
    #[serde(rename = "confirm")]
    Confirm,
    #[serde(rename = "request")]
    Request,
    #[serde(rename = "offer")]
    Offer,
    #[serde(rename = "inform")]
    Inform,
    #[serde(rename = "welcomemsg")]
    Welcome,
    #[serde(rename = "bye")]
    Bye,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineAct {
    pub act: MachineActType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slot: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<String>,
}

impl MachineAct {
    pub fn new(act: MachineActType, slot: Option<&str>, value: Option<&str>) -> Self {
        MachineAct {
            act,
            slot: slot.map(str::to_string),
            value: value.map(str::to_string),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SluHypothesis {
    pub act: UserActType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slot: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<String>,
    pub score: f64,
}

impl SluHypothesis {
    pub fn new(act: UserActType, slot: &str, value: &str, score: f64) -> Self {
        SluHypothesis {
            act,
            slot: Some(slot.to_string()),
            value: Some(value.to_string()),
            score,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnObservation {
    pub turn: usize,
    #[serde(default)]
    pub machine_acts: Vec<MachineAct>,
    #[serde(default)]
    pub slu: Vec<SluHypothesis>,
    /// What the user truly informed at this turn, slot to value.
    #[serde(default)]
    pub informed: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialogueLog {
    pub id: String,
    pub turns: Vec<TurnObservation>,
}

impl DialogueLog {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub ontology: Ontology,
    pub dialogues: Vec<DialogueLog>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    ontology: Ontology,
}

impl Corpus {
    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.ontology.keys().map(String::as_str)
    }

    /// Dialogues whose id hashes into the first 60% of the range go to
    /// training, the rest to validation.
    pub fn split(&self) -> (Corpus, Corpus) {
        let (train, valid): (Vec<_>, Vec<_>) = self
            .dialogues
            .iter()
            .cloned()
            .partition(|d| is_training_id(&d.id));
        (
            Corpus {
                ontology: self.ontology.clone(),
                dialogues: train,
            },
            Corpus {
                ontology: self.ontology.clone(),
                dialogues: valid,
            },
        )
    }
}

pub fn is_training_id(id: &str) -> bool {
    let digest = Sha256::digest(id.as_bytes());
    let bucket = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes")) % 100;
    bucket < 60
}

fn check_dialogue(d: &DialogueLog, ontology: &Ontology) -> std::result::Result<(), String> {
    let known = |slot: &str, value: Option<&str>| -> std::result::Result<(), String> {
        let values = ontology
            .get(slot)
            .ok_or_else(|| format!("unknown slot `{slot}`"))?;
        if let Some(v) = value {
            if !values.iter().any(|x| x == v) {
                return Err(format!("value `{v}` is not in the ontology for slot `{slot}`"));
            }
        }
        Ok(())
    };
    if d.id.is_empty() {
        return Err("empty dialogue id".into());
    }
    for (i, turn) in d.turns.iter().enumerate() {
        let ctx = |msg: String| format!("turn {}: {msg}", i + 1);
        if turn.turn != i + 1 {
            return Err(ctx(format!("turn index {} is not contiguous from 1", turn.turn)));
        }
        for a in &turn.machine_acts {
            if a.value.is_some() && a.slot.is_none() {
                return Err(ctx("machine act has a value but no slot".into()));
            }
            if let Some(s) = &a.slot {
                known(s, a.value.as_deref()).map_err(ctx)?;
            }
        }
        for h in &turn.slu {
            if !(0.0..=1.0).contains(&h.score) {
                return Err(ctx(format!("confidence out of range: {}", h.score)));
            }
            if h.value.is_some() && h.slot.is_none() {
                return Err(ctx("SLU hypothesis has a value but no slot".into()));
            }
            if matches!(h.act, UserActType::Inform | UserActType::Deny)
                && (h.slot.is_none() || h.value.is_none())
            {
                return Err(ctx("inform and deny hypotheses need a slot and a value".into()));
            }
            if let Some(s) = &h.slot {
                known(s, h.value.as_deref()).map_err(ctx)?;
            }
        }
        for (s, v) in &turn.informed {
            known(s, Some(v)).map_err(ctx)?;
        }
    }
    Ok(())
}

pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (line, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing ontology header"))?;
    let header: Header = serde_json::from_str(header)
        .map_err(|e| Error::parse(line, format!("bad ontology header: {e}")))?;
    for (slot, values) in &header.ontology {
        let unique: BTreeSet<&String> = values.iter().collect();
        if values.is_empty() || unique.len() != values.len() {
            return Err(Error::parse(
                line,
                format!("slot `{slot}` needs a non-empty list of distinct values"),
            ));
        }
    }
    let mut ids = BTreeSet::new();
    let mut dialogues = Vec::new();
    for (line, text) in lines {
        let d: DialogueLog =
            serde_json::from_str(text).map_err(|e| Error::parse(line, e.to_string()))?;
        check_dialogue(&d, &header.ontology)
            .map_err(|msg| Error::parse(line, format!("dialogue `{}`: {msg}", d.id)))?;
        if !ids.insert(d.id.clone()) {
            return Err(Error::parse(line, format!("duplicate dialogue id `{}`", d.id)));
        }
        dialogues.push(d);
    }
    Ok(Corpus {
        ontology: header.ontology,
        dialogues,
    })
}

/// Canonical text: one compact JSON object per line, header first.
pub fn serialize_corpus(corpus: &Corpus) -> Result<String> {
    let mut out = serde_json::to_string(&Header {
        ontology: corpus.ontology.clone(),
    })?;
    out.push('\n');
    for d in &corpus.dialogues {
        out.push_str(&serde_json::to_string(d)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    parse_corpus(&fs::read_to_string(path)?)
}

pub fn write_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    fs::write(path, serialize_corpus(corpus)?)?;
    Ok(())
}
