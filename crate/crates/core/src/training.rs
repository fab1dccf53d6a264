//! Offline training of BayesBot and NNetBot from pick logs.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{BayesCounts, BayesModel, NNetModel};
use crate::card::{CardId, CardSet};
use crate::dataset::DraftLog;
use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, Adam, AdamConfig, Matrix, Network, TrainConfig};
use crate::rng;

/// Number of dense/batchnorm blocks before the output layer.
pub const HIDDEN_LAYERS: usize = 3;

fn training_logs<'a>(logs: &'a [DraftLog], set: &CardSet, human_only: bool) -> Result<Vec<&'a DraftLog>> {
    let selected: Vec<&DraftLog> = logs
        .iter()
        .filter(|l| !human_only || l.is_human())
        .collect();
    if selected.is_empty() {
        return Err(Error::Empty("no training logs after filtering".into()));
    }
    if let Some(l) = selected.iter().find(|l| l.set_code != set.code) {
        return Err(Error::SetMismatch {
            expected: set.code.clone(),
            found: l.set_code.clone(),
        });
    }
    Ok(selected)
}

/// Counts pairwise and pack/collection statistics over every pick event.
/// Shards are counted in parallel and summed, so the result does not depend
/// on log order.
pub fn count_bayes(logs: &[&DraftLog], set_size: usize) -> Result<BayesCounts> {
    logs.par_iter()
        .try_fold(
            || BayesCounts::new(set_size),
            |mut acc, log| {
                acc.add_log(log)?;
                Ok(acc)
            },
        )
        .try_reduce(|| BayesCounts::new(set_size), |a, b| a.merge(&b))
}

pub fn train_bayes(logs: &[DraftLog], set: &CardSet, human_only: bool) -> Result<BayesModel> {
    let selected = training_logs(logs, set, human_only)?;
    let counts = count_bayes(&selected, set.len())?;
    Ok(BayesModel::from_counts(set.code.clone(), counts))
}

/// Compact store of (collection before pick, picked card) examples.
///
/// Collections are rebuilt per batch from each log's pick sequence, so the
/// memory cost is one byte per example plus the picks themselves.
pub struct PickExamples {
    set_size: usize,
    picks: Vec<Vec<CardId>>,
    /// (log, position of the pick within the log)
    index: Vec<(u32, u8)>,
    draft_of_log: Vec<String>,
}

impl PickExamples {
    pub fn from_logs(logs: &[&DraftLog], set_size: usize) -> Self {
        let mut picks = Vec::with_capacity(logs.len());
        let mut index = Vec::new();
        let mut draft_of_log = Vec::with_capacity(logs.len());
        for (li, log) in logs.iter().enumerate() {
            let seq: Vec<CardId> = log.events.iter().map(|e| e.picked).collect();
            index.extend((0..seq.len()).map(|k| (li as u32, k as u8)));
            picks.push(seq);
            draft_of_log.push(log.draft_id.clone());
        }
        PickExamples {
            set_size,
            picks,
            index,
            draft_of_log,
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Inputs and targets for the given example ids.
    pub fn batch(&self, ids: &[usize]) -> (Matrix<f32>, Vec<usize>) {
        let mut x = Matrix::zeros(ids.len(), self.set_size);
        let mut targets = Vec::with_capacity(ids.len());
        for (r, &id) in ids.iter().enumerate() {
            let (log, k) = self.index[id];
            let seq = &self.picks[log as usize];
            let row = x.row_mut(r);
            for &c in &seq[..k as usize] {
                row[c] += 1.0;
            }
            targets.push(seq[k as usize]);
        }
        (x, targets)
    }

    /// Splits example ids into `folds` groups; all picks of a draft share a fold.
    pub fn folds(&self, folds: usize, seed: u64) -> Vec<Vec<usize>> {
        let mut drafts: Vec<&str> = self.draft_of_log.iter().map(String::as_str).collect();
        drafts.sort_unstable();
        drafts.dedup();
        drafts.shuffle(&mut rng::stream(seed));
        let fold_of: HashMap<&str, usize> = drafts
            .iter()
            .enumerate()
            .map(|(i, d)| (*d, i % folds))
            .collect();
        let mut out = vec![Vec::new(); folds];
        for (id, &(log, _)) in self.index.iter().enumerate() {
            out[fold_of[self.draft_of_log[log as usize].as_str()]].push(id);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Cross-validation fold, or `None` for the final all-data model.
    pub fold: Option<usize>,
    pub loss: f64,
    /// Held-out unmasked next-pick accuracy for CV folds; training accuracy
    /// for the final model.
    pub accuracy: f64,
}

pub struct NNetTraining {
    pub model: NNetModel,
    pub metrics: Vec<EpochMetrics>,
    /// Final-epoch held-out accuracy of each CV fold.
    pub fold_accuracy: Vec<f64>,
}

/// Unmasked next-pick accuracy: argmax over the whole set equals the pick.
pub fn unmasked_accuracy(net: &Network<f32>, examples: &PickExamples, ids: &[usize]) -> Result<f64> {
    if ids.is_empty() {
        return Ok(0.0);
    }
    let correct: usize = ids
        .par_chunks(512)
        .map(|chunk| {
            let (x, targets) = examples.batch(chunk);
            let logits = net.forward_infer(&x)?;
            Ok(softmax_cross_entropy(&logits, &targets)?.correct)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(correct as f64 / ids.len() as f64)
}

fn fit<F>(
    examples: &PickExamples,
    train_ids: &[usize],
    held_out: Option<&[usize]>,
    config: &TrainConfig,
    fold: Option<usize>,
    on_epoch: &mut F,
) -> Result<(Network<f32>, Vec<EpochMetrics>)>
where
    F: FnMut(&EpochMetrics),
{
    let s = examples.set_size;
    let stream_key = fold.map_or(u64::MAX, |f| f as u64);
    let mut init_rng = rng::stream(rng::derive(config.seed, stream_key));
    let mut net = Network::<f32>::new(s, s, s, HIDDEN_LAYERS, config.leak, config.dropout, &mut init_rng);
    let mut adam = Adam::new(AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    });
    let mut order = train_ids.to_vec();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut epoch_rng = rng::stream(rng::derive(rng::derive(config.seed, stream_key), epoch as u64));
        order.shuffle(&mut epoch_rng);
        let (mut loss_sum, mut seen, mut correct) = (0.0f64, 0usize, 0usize);
        for chunk in order.chunks(config.batch_size) {
            // batch statistics need at least two rows
            if chunk.len() < 2 {
                continue;
            }
            let (x, targets) = examples.batch(chunk);
            let (out, grads, cache) = net.loss_and_grad(&x, &targets, &mut epoch_rng)?;
            adam.step_network(&mut net, &grads)?;
            net.commit_running(&cache);
            loss_sum += out.loss * chunk.len() as f64;
            seen += chunk.len();
            correct += out.correct;
        }
        if seen == 0 {
            return Err(Error::Empty("not enough training examples for one batch".into()));
        }
        let accuracy = match held_out {
            Some(ids) => unmasked_accuracy(&net, examples, ids)?,
            None => correct as f64 / seen as f64,
        };
        let m = EpochMetrics {
            epoch,
            fold,
            loss: loss_sum / seen as f64,
            accuracy,
        };
        on_epoch(&m);
        metrics.push(m);
    }
    Ok((net, metrics))
}

/// Trains the network on every pick event, optionally running k-fold
/// cross-validation first. `on_epoch` sees each metrics row as it is produced.
pub fn train_nnet<F>(
    logs: &[DraftLog],
    set: &CardSet,
    config: &TrainConfig,
    cv_folds: Option<usize>,
    human_only: bool,
    mut on_epoch: F,
) -> Result<NNetTraining>
where
    F: FnMut(&EpochMetrics),
{
    config.validate()?;
    let selected = training_logs(logs, set, human_only)?;
    let examples = PickExamples::from_logs(&selected, set.len());
    let mut metrics = Vec::new();
    let mut fold_accuracy = Vec::new();
    if let Some(k) = cv_folds {
        if k < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        let folds = examples.folds(k, config.seed);
        for (f, held) in folds.iter().enumerate() {
            let train_ids: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, ids)| ids.iter().copied())
                .collect();
            let (_, m) = fit(&examples, &train_ids, Some(held), config, Some(f), &mut on_epoch)?;
            fold_accuracy.push(m.last().map_or(0.0, |m| m.accuracy));
            metrics.extend(m);
        }
    }
    let all: Vec<usize> = (0..examples.len()).collect();
    let (net, m) = fit(&examples, &all, None, config, None, &mut on_epoch)?;
    metrics.extend(m);
    Ok(NNetTraining {
        model: NNetModel::new(set.code.clone(), net),
        metrics,
        fold_accuracy,
    })
}

pub fn write_metrics_csv<W: std::io::Write>(out: W, metrics: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "fold", "loss", "accuracy"])?;
    for m in metrics {
        w.write_record([
            m.epoch.to_string(),
            m.fold.map_or_else(|| "all".to_string(), |f| f.to_string()),
            m.loss.to_string(),
            m.accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
