//! Mini-batch training, the rotation curriculum, evaluation and multi-seed
//! experiment matrices.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::{AdamConfig, Tape};
use crate::datagen::{Dataset, Sample, CURRICULUM_THETA_MAX};
use crate::error::{Error, Result};
use crate::models::{predict_label, target_class, Checkpoint, LayerKind, Model, ModelConfig};
use crate::rng::{purpose, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    BestValid,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub selection: Selection,
    /// Epochs per stage when training on a curriculum.
    pub stage_epochs: usize,
    /// Optimizer steps per epoch; `None` means one pass over the data.
    /// Fixing it keeps the step budget constant across dataset sizes.
    pub steps_per_epoch: Option<usize>,
    pub adam: AdamConfig,
}

impl TrainSpec {
    pub fn new(seed: u64) -> TrainSpec {
        TrainSpec {
            epochs: 20,
            lr: 1e-3,
            batch_size: 128,
            seed,
            selection: Selection::BestValid,
            stage_epochs: 5,
            steps_per_epoch: None,
            adam: AdamConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::InvalidParameter("learning rate must be > 0".into()));
        }
        if self.steps_per_epoch == Some(0) {
            return Err(Error::InvalidParameter("steps per epoch must be >= 1".into()));
        }
        Ok(())
    }

    /// Steps a full epoch over `n` samples takes.
    pub fn steps_for(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: Option<usize>,
    pub theta_max: Option<f64>,
    pub steps: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub valid_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: LayerKind,
    pub train_data: Vec<String>,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub selected_epoch: Option<usize>,
    pub valid_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub total_steps: usize,
    pub wall_time_secs: f64,
    pub model_hash: String,
}

impl RunReport {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &RunReport) -> bool {
        let mut a = self.clone();
        a.wall_time_secs = 0.0;
        let mut b = other.clone();
        b.wall_time_secs = 0.0;
        a == b
    }
}

/// FNV-1a over the parameter bit patterns, as 16 hex digits.
pub fn model_hash(model: &Model) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for r in model.params().to_records() {
        for b in r.name.bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3);
        }
        for v in r.values {
            for b in v.to_bits().to_le_bytes() {
                h = (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3);
            }
        }
    }
    format!("{h:016x}")
}

const EVAL_BATCH: usize = 256;

/// Fraction of samples whose predicted label matches; ties predict 0.
pub fn evaluate(model: &Model, dataset: &Dataset) -> Result<f64> {
    model.check_task(dataset.task())?;
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("cannot evaluate on an empty dataset".into()));
    }
    let correct = dataset
        .samples
        .par_chunks(EVAL_BATCH)
        .map(|chunk| -> Result<usize> {
            let refs: Vec<&Sample> = chunk.iter().collect();
            let logits = model.logits(&refs)?;
            Ok(logits
                .iter()
                .zip(chunk)
                .filter(|(l, s)| predict_label(**l) == s.label())
                .count())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / dataset.len() as f64)
}

/// Evaluate a serialized model.
pub fn evaluate_checkpoint(ckpt: &Checkpoint, dataset: &Dataset) -> Result<f64> {
    evaluate(&ckpt.to_model()?, dataset)
}

struct BatchStream<'a> {
    data: &'a Dataset,
    order: Vec<usize>,
    pos: usize,
    pass: u64,
    seed: u64,
    salt: u64,
}

impl<'a> BatchStream<'a> {
    fn new(data: &'a Dataset, seed: u64, salt: u64) -> BatchStream<'a> {
        BatchStream {
            data,
            order: Vec::new(),
            pos: 0,
            pass: 0,
            seed,
            salt,
        }
    }

    /// Next batch; reshuffles after every full pass, keeping the final
    /// partial batch.
    fn next(&mut self, batch: usize) -> Vec<&'a Sample> {
        if self.pos >= self.order.len() {
            self.order = (0..self.data.len()).collect();
            let mut rng = substream(self.seed, purpose::SHUFFLE, self.salt + self.pass);
            self.order.shuffle(&mut rng);
            self.pos = 0;
            self.pass += 1;
        }
        let end = (self.pos + batch).min(self.order.len());
        let out = self.order[self.pos..end]
            .iter()
            .map(|&i| &self.data.samples[i])
            .collect();
        self.pos = end;
        out
    }
}

struct StepStats {
    loss: f64,
    correct: usize,
    count: usize,
}

fn train_step(model: &mut Model, batch: &[&Sample], spec: &TrainSpec) -> Result<StepStats> {
    let input = model.prepare(batch)?;
    let mut tape = Tape::new();
    let params = model.param_vars(&mut tape);
    let logits = model.forward(&mut tape, &params, &input)?;
    let targets: Vec<usize> = batch.iter().map(|s| target_class(s.label())).collect();
    let loss = tape.softmax_cross_entropy(logits, &targets)?;
    let lv = tape.value(logits);
    let correct = batch
        .iter()
        .enumerate()
        .filter(|(r, s)| predict_label([lv.get(*r, 0), lv.get(*r, 1)]) == s.label())
        .count();
    let loss_value = tape.value(loss).item();
    let grads = tape.backward(loss)?;
    tape.accumulate_param_grads(&grads, model.params_mut());
    model.params_mut().adam_step(spec.lr, &spec.adam);
    Ok(StepStats {
        loss: loss_value * batch.len() as f64,
        correct,
        count: batch.len(),
    })
}

struct Stage<'a> {
    data: &'a Dataset,
    epochs: usize,
    index: Option<usize>,
}

fn run_stages(
    model: &Model,
    stages: &[Stage<'_>],
    valid: &Dataset,
    spec: &TrainSpec,
) -> Result<(Model, RunReport)> {
    spec.validate()?;
    for s in stages {
        model.check_task(s.data.task())?;
        if s.data.is_empty() && s.epochs > 0 {
            return Err(Error::InvalidParameter(format!(
                "training set {} is empty",
                s.data.header.name
            )));
        }
    }
    model.check_task(valid.task())?;
    let start = Instant::now();
    let mut current = model.clone();
    let mut best: Option<(f64, usize, Model)> = None;
    let mut records = Vec::new();
    let mut total_steps = 0;
    let mut epoch = 0;
    for (k, stage) in stages.iter().enumerate() {
        let mut stream = BatchStream::new(stage.data, spec.seed, (k as u64) << 32);
        let steps = spec
            .steps_per_epoch
            .unwrap_or_else(|| spec.steps_for(stage.data.len()));
        for _ in 0..stage.epochs {
            let mut loss = 0.0;
            let mut correct = 0;
            let mut count = 0;
            for _ in 0..steps {
                let batch = stream.next(spec.batch_size);
                let st = train_step(&mut current, &batch, spec)?;
                loss += st.loss;
                correct += st.correct;
                count += st.count;
            }
            total_steps += steps;
            let valid_accuracy = evaluate(&current, valid)?;
            records.push(EpochRecord {
                epoch,
                stage: stage.index,
                theta_max: stage.index.map(|_| stage.data.header.theta_max),
                steps,
                train_loss: loss / count.max(1) as f64,
                train_accuracy: correct as f64 / count.max(1) as f64,
                valid_accuracy,
            });
            if best.as_ref().is_none_or(|(acc, _, _)| valid_accuracy > *acc) {
                best = Some((valid_accuracy, epoch, current.clone()));
            }
            epoch += 1;
        }
    }
    let (selected, selected_epoch, valid_accuracy) = match (spec.selection, best) {
        (_, None) => (current, None, None),
        (Selection::BestValid, Some((acc, e, m))) => (m, Some(e), Some(acc)),
        (Selection::Last, Some(_)) => {
            let last = records.last().map(|r| (r.epoch, r.valid_accuracy));
            (current, last.map(|l| l.0), last.map(|l| l.1))
        }
    };
    let report = RunReport {
        model: selected.config().layer,
        train_data: stages.iter().map(|s| s.data.header.name.clone()).collect(),
        seed: spec.seed,
        epochs: records,
        selected_epoch,
        valid_accuracy,
        test_accuracy: None,
        total_steps,
        wall_time_secs: start.elapsed().as_secs_f64(),
        model_hash: model_hash(&selected),
    };
    Ok((selected, report))
}

/// Train `model` on `train` for `spec.epochs` epochs.
pub fn train(
    model: &Model,
    train: &Dataset,
    valid: &Dataset,
    spec: &TrainSpec,
) -> Result<(Model, RunReport)> {
    run_stages(
        model,
        &[Stage {
            data: train,
            epochs: spec.epochs,
            index: None,
        }],
        valid,
        spec,
    )
}

/// Sequential training on the five rotation stages, `spec.stage_epochs`
/// each, carrying parameters and optimizer state across stages.
pub fn train_curriculum(
    model: &Model,
    stages: &[Dataset],
    valid: &Dataset,
    spec: &TrainSpec,
) -> Result<(Model, RunReport)> {
    if stages.len() != CURRICULUM_THETA_MAX.len() {
        return Err(Error::InvalidParameter(format!(
            "curriculum needs {} stages, got {}",
            CURRICULUM_THETA_MAX.len(),
            stages.len()
        )));
    }
    if !stages
        .windows(2)
        .all(|w| w[0].header.theta_max < w[1].header.theta_max)
    {
        return Err(Error::InvalidParameter(
            "curriculum stages must have increasing rotation bounds".into(),
        ));
    }
    let stages: Vec<Stage> = stages
        .iter()
        .enumerate()
        .map(|(k, d)| Stage {
            data: d,
            epochs: spec.stage_epochs,
            index: Some(k),
        })
        .collect();
    run_stages(model, &stages, valid, spec)
}

/// Training data for one run: a single set or a five-stage curriculum.
#[derive(Debug, Clone)]
pub struct DataBundle {
    pub name: String,
    pub train: Vec<Dataset>,
    pub valid: Dataset,
    pub test: Dataset,
}

/// Train a fresh `config` model on `bundle` with `spec`, then test it.
pub fn run_bundle(
    config: ModelConfig,
    bundle: &DataBundle,
    spec: &TrainSpec,
) -> Result<(Model, RunReport)> {
    let model = Model::new(config, spec.seed)?;
    let (trained, mut report) = match bundle.train.len() {
        1 => train(&model, &bundle.train[0], &bundle.valid, spec)?,
        _ => train_curriculum(&model, &bundle.train, &bundle.valid, spec)?,
    };
    report.test_accuracy = Some(evaluate(&trained, &bundle.test)?);
    Ok((trained, report))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixCell {
    pub model: LayerKind,
    pub group: String,
    pub mean: f64,
    pub std: f64,
    pub runs: Vec<RunReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixResult {
    pub groups: Vec<String>,
    pub cells: Vec<MatrixCell>,
    pub params: Vec<(LayerKind, usize)>,
}

impl MatrixResult {
    pub fn cell(&self, model: LayerKind, group: &str) -> Option<&MatrixCell> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.group == group)
    }

    /// Tab-separated table: one row per model, `mean ± std` per group.
    pub fn to_table(&self) -> String {
        let mut out = String::from("model");
        for g in &self.groups {
            out.push('\t');
            out.push_str(g);
        }
        out.push_str("\tparameters\n");
        for (kind, count) in &self.params {
            out.push_str(kind.as_str());
            for g in &self.groups {
                match self.cell(*kind, g) {
                    Some(c) => out.push_str(&format!("\t{:.3} ± {:.3}", c.mean, c.std)),
                    None => out.push_str("\t-"),
                }
            }
            out.push_str(&format!("\t{count}\n"));
        }
        out
    }
}

/// Train every model kind on every bundle of every group for every seed;
/// report test accuracy mean ± std per (model, group).
pub fn run_matrix(
    kinds: &[LayerKind],
    groups: &[(String, Vec<DataBundle>)],
    seeds: &[u64],
    spec: &TrainSpec,
) -> Result<MatrixResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let mut jobs = Vec::new();
    for &kind in kinds {
        for (gi, (_, bundles)) in groups.iter().enumerate() {
            for bi in 0..bundles.len() {
                for &seed in seeds {
                    jobs.push((kind, gi, bi, seed));
                }
            }
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(kind, gi, bi, seed)| {
            let bundle = &groups[gi].1[bi];
            let config = ModelConfig::for_dataset(kind, &bundle.train[0]);
            let spec = TrainSpec { seed, ..*spec };
            run_bundle(config, bundle, &spec).map(|(m, r)| (m.count_params(), r))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut params = Vec::new();
    for &kind in kinds {
        let mut count = 0;
        for (gi, (name, _)) in groups.iter().enumerate() {
            let runs: Vec<RunReport> = jobs
                .iter()
                .zip(&results)
                .filter(|((k, g, _, _), _)| *k == kind && *g == gi)
                .map(|(_, (c, r))| {
                    count = *c;
                    r.clone()
                })
                .collect();
            let accs: Vec<f64> = runs.iter().filter_map(|r| r.test_accuracy).collect();
            let (mean, std) = mean_std(&accs);
            cells.push(MatrixCell {
                model: kind,
                group: name.clone(),
                mean,
                std,
                runs,
            });
        }
        params.push((kind, count));
    }
    Ok(MatrixResult {
        groups: groups.iter().map(|(n, _)| n.clone()).collect(),
        cells,
        params,
    })
}
