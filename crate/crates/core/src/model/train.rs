use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::config::Config;
use super::network::{forward, loss, predict, Architecture, Batch, Mode, Model};
use super::params::Adam;
use crate::diff::Tape;
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::harness::metrics::{accuracy, roc_auc};
use crate::rng::{rng_for, stream};

const EVAL_CHUNK: usize = 256;

/// Evaluation-mode outputs for one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphPrediction {
    pub label: usize,
    pub predicted: usize,
    pub logits: Vec<f64>,
    pub node_scores: Vec<f64>,
    pub edge_scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Mean cross-entropy.
    pub loss: f64,
    /// Edge-level AUC pooled over graphs with ground-truth masks; `None`
    /// when no graph has a mask or the pooled labels have one class.
    pub auc: Option<f64>,
    pub graphs: Vec<GraphPrediction>,
}

pub fn evaluate(model: &Model, graphs: &[Graph], config: &Config) -> Result<Evaluation> {
    if graphs.is_empty() {
        return Err(Error::Config("nothing to evaluate".into()));
    }
    let chunks: Vec<Result<(Vec<GraphPrediction>, f64)>> = graphs
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let refs: Vec<&Graph> = chunk.iter().collect();
            let batch = Batch::new(&refs)?;
            let (pred, ce) = predict(model, &batch, config)?;
            let classes = pred.classes();
            let out = chunk
                .iter()
                .enumerate()
                .map(|(i, g)| GraphPrediction {
                    label: g.label,
                    predicted: classes[i],
                    logits: pred.logits.row(i).to_vec(),
                    node_scores: pred.node_scores[batch.node_offsets[i]..batch.node_offsets[i + 1]].to_vec(),
                    edge_scores: pred.edge_scores[batch.edge_offsets[i]..batch.edge_offsets[i + 1]].to_vec(),
                })
                .collect();
            Ok((out, ce * chunk.len() as f64))
        })
        .collect();
    let mut records = Vec::with_capacity(graphs.len());
    let mut total_ce = 0.0;
    for chunk in chunks {
        let (r, ce) = chunk?;
        records.extend(r);
        total_ce += ce;
    }
    let predicted: Vec<usize> = records.iter().map(|r| r.predicted).collect();
    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    let (mut scores, mut truth) = (Vec::new(), Vec::new());
    for (g, r) in graphs.iter().zip(&records) {
        if let Some(mask) = &g.gt_edge_mask {
            scores.extend_from_slice(&r.edge_scores);
            truth.extend_from_slice(mask);
        }
    }
    let auc = if scores.is_empty() {
        None
    } else {
        match roc_auc(&scores, &truth) {
            Ok(a) => Some(a),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(Evaluation { accuracy: accuracy(&predicted, &labels), loss: total_ce / graphs.len() as f64, auc, graphs: records })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_loss: f64,
    pub test_acc: f64,
    pub test_auc: Option<f64>,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,val_acc,val_loss,test_acc,test_auc";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        let auc = self.test_auc.map_or_else(String::new, |a| a.to_string());
        format!("{},{},{},{},{},{}", self.epoch, self.train_loss, self.val_acc, self.val_loss, self.test_acc, auc)
    }
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    for r in history {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the selected epoch (the initial ones when no epoch ran).
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

pub fn architecture_for(config: &Config, graphs: &[&[Graph]]) -> Result<Architecture> {
    let first = graphs.iter().flat_map(|s| s.iter()).next().ok_or_else(|| Error::Config("no graphs".into()))?;
    let classes = graphs.iter().flat_map(|s| s.iter()).map(|g| g.label).max().unwrap_or(0) + 1;
    Ok(Architecture {
        in_dim: first.feature_dim(),
        hidden: config.hidden,
        layers: config.layers,
        classes: classes.max(2),
        elements: config.elements,
        degree_buckets: config.degree_buckets,
    })
}

pub fn initial_model(config: &Config, arch: Architecture) -> Result<Model> {
    Model::new(arch, &mut rng_for(config.seed, stream::INIT, 0))
}

/// One optimiser step on `graphs`; returns the batch loss.
pub fn train_step(model: &mut Model, opt: &mut Adam, graphs: &[&Graph], config: &Config, step: u64) -> Result<f64> {
    let batch = Batch::new(graphs)?;
    let mut rng = rng_for(config.seed, stream::GUMBEL, step);
    let mut tape = Tape::new();
    let vars = model.params.on_tape(&mut tape);
    let fwd = forward(&mut tape, model, &vars, &batch, config, &mut Mode::Train(&mut rng))?;
    let terms = loss(&mut tape, &fwd, &batch, config);
    let value = tape.scalar(terms.total);
    tape.backward(terms.total)?;
    let grads = vars.iter().map(|&v| tape.grad(v)).collect::<Result<Vec<_>>>()?;
    opt.step(&mut model.params, &grads, &[])?;
    model.project()?;
    Ok(value)
}

/// Minibatch training. The returned model is the epoch with the highest
/// validation accuracy, ties going to the lower validation loss.
pub fn train(train: &[Graph], val: &[Graph], test: &[Graph], config: &Config) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::Config("train, validation and test splits must be non-empty".into()));
    }
    let arch = architecture_for(config, &[train, val, test])?;
    let mut model = initial_model(config, arch)?;
    let mut opt = Adam::new(&model.params, config.lr);
    let mut best: Option<(f64, f64, Model, usize)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0u64;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng_for(config.seed, stream::SHUFFLE, epoch as u64));
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch) {
            let graphs: Vec<&Graph> = chunk.iter().map(|&i| &train[i]).collect();
            total += train_step(&mut model, &mut opt, &graphs, config, step)?;
            step += 1;
            batches += 1;
        }
        let v = evaluate(&model, val, config)?;
        let t = evaluate(&model, test, config)?;
        let record = EpochRecord {
            epoch,
            train_loss: total / batches as f64,
            val_acc: v.accuracy,
            val_loss: v.loss,
            test_acc: t.accuracy,
            test_auc: t.auc,
        };
        log::info!("{}", record.csv_row());
        let better = match &best {
            None => true,
            Some((acc, l, _, _)) => v.accuracy > *acc || (v.accuracy == *acc && v.loss < *l),
        };
        if better {
            best = Some((v.accuracy, v.loss, model.clone(), epoch));
        }
        history.push(record);
    }
    Ok(match best {
        Some((_, _, m, e)) => TrainOutcome { model: m, history, best_epoch: Some(e) },
        None => TrainOutcome { model, history, best_epoch: None },
    })
}
