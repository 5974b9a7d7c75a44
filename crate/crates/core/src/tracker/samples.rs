//! Training samples and validation objectives built from corpora.

use super::labels::label_scheme_a;
use super::metrics::score_corpus;
use super::{track_corpus, value_sequences, BeliefModel, RpnModel};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::trainer::{mse_loss, TrainingSample, Validation, Validator};

fn samples_with(
    corpus: &Corpus,
    feature_count: usize,
    mut labels: impl FnMut(&str, &super::ValueSequence, &[super::JointGoal]) -> Result<Vec<f64>>,
) -> Result<Vec<TrainingSample>> {
    let slots: Vec<&str> = corpus.slots().collect();
    let mut out = Vec::new();
    for d in &corpus.dialogues {
        let gold = label_scheme_a(d, slots.iter().copied());
        for seq in value_sequences(&corpus.ontology, d, feature_count) {
            let labels = labels(&d.id, &seq, &gold)?;
            out.push(TrainingSample {
                dialogue_id: d.id.clone(),
                slot: seq.slot.clone(),
                value: seq.value.clone(),
                inputs: seq.rows.iter().map(|r| r[1..].to_vec()).collect(),
                labels,
                mask: (1..=seq.rows.len()).map(|t| t >= seq.first_turn).collect(),
            });
        }
    }
    Ok(out)
}

/// One sample per tracked `(dialogue, slot, value)`: label 1 on turns where
/// the scheme-A goal of the slot is the value, loss masked before the value
/// is first mentioned.
pub fn build_samples(corpus: &Corpus, feature_count: usize) -> Vec<TrainingSample> {
    samples_with(corpus, feature_count, |_, seq, gold| {
        Ok(gold
            .iter()
            .map(|g| f64::from(u8::from(g[&seq.slot].as_deref() == Some(seq.value.as_str()))))
            .collect())
    })
    .expect("indicator labels cannot fail")
}

/// Like [`build_samples`], but each label is the raw belief `teacher`
/// produces for the value at that turn.
pub fn soft_labels(
    corpus: &Corpus,
    feature_count: usize,
    teacher: &dyn BeliefModel,
) -> Result<Vec<TrainingSample>> {
    if teacher.feature_count() != feature_count {
        return Err(Error::ModelMismatch(format!(
            "teacher uses {} features, samples use {feature_count}",
            teacher.feature_count()
        )));
    }
    samples_with(corpus, feature_count, |_, seq, _| teacher.run(&seq.rows))
}

/// Joint-goal accuracy of a tracker over a corpus.
pub fn corpus_accuracy(model: &dyn BeliefModel, corpus: &Corpus) -> Result<f64> {
    if corpus.dialogues.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(score_corpus(corpus, &track_corpus(model, corpus)?)?.accuracy)
}

/// Validates a network by tracking a held-out corpus: accuracy is the joint
/// goal accuracy, loss the masked MSE on the corpus's samples.
pub struct CorpusValidator<'a> {
    corpus: &'a Corpus,
    samples: Vec<TrainingSample>,
}

impl<'a> CorpusValidator<'a> {
    pub fn new(corpus: &'a Corpus, feature_count: usize) -> Result<Self> {
        if corpus.dialogues.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(CorpusValidator {
            corpus,
            samples: build_samples(corpus, feature_count),
        })
    }

    pub fn samples(&self) -> &[TrainingSample] {
        &self.samples
    }
}

impl Validator for CorpusValidator<'_> {
    fn validate(&self, net: &Network) -> Result<Validation> {
        let model = RpnModel::new(net.clone())?;
        let accuracy = corpus_accuracy(&model, self.corpus)?;
        let loss = if self.samples.is_empty() {
            0.0
        } else {
            mse_loss(net, &self.samples)?
        };
        Ok(Validation { accuracy, loss })
    }
}
