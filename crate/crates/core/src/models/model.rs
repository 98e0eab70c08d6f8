use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Dims, LayerKind, Tower};
use super::mlp::Mlp;
use crate::autograd::{ParamRecord, ParamStore, Tape, Tensor, Var};
use crate::datagen::{Dataset, Sample, Task};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, FEATURE_DIM};
use crate::graph::{batch_graph_refs, build_graph_with, Graph, GraphBatch, GraphOptions};
use crate::rng::{purpose, substream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layer: LayerKind,
    pub task: Task,
    /// Hidden width of every internal MLP.
    pub hidden: usize,
    /// Hidden-layer count of every internal MLP.
    pub depth: usize,
    pub d_u: usize,
    /// Recurrent passes through the graph layer.
    pub passes: usize,
    #[serde(default)]
    pub self_loops: bool,
    /// MLP baseline only: objects per configuration the input is padded to.
    #[serde(default)]
    pub max_objects: usize,
}

impl ModelConfig {
    /// Graph model with `h = 16`, `d_u = 16`, one pass and the per-layer depth.
    pub fn graph(layer: LayerKind, task: Task) -> ModelConfig {
        ModelConfig {
            layer,
            task,
            hidden: 16,
            depth: layer.default_depth(),
            d_u: 16,
            passes: 1,
            self_loops: false,
            max_objects: 0,
        }
    }

    /// MLP baseline: two hidden layers of `16·mean_n` units (doubled for
    /// Comparison), input zero-padded to `max_n` objects per configuration.
    pub fn mlp_baseline(task: Task, mean_n: f64, max_n: usize) -> ModelConfig {
        let per_config = (16.0 * mean_n).round().max(1.0) as usize;
        ModelConfig {
            layer: LayerKind::Mlp,
            task,
            hidden: per_config * task.configs_per_sample(),
            depth: 2,
            d_u: 16,
            passes: 1,
            self_loops: false,
            max_objects: max_n,
        }
    }

    /// Defaults for `layer`, sizing the MLP baseline from `dataset`.
    pub fn for_dataset(layer: LayerKind, dataset: &Dataset) -> ModelConfig {
        match layer {
            LayerKind::Mlp => ModelConfig::mlp_baseline(
                dataset.task(),
                (dataset.header.n_min + dataset.header.n_max) as f64 / 2.0
                    + dataset.header.distractors_max as f64 / 2.0,
                dataset.header.n_max + dataset.header.distractors_max,
            ),
            _ => ModelConfig::graph(layer, dataset.task()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.d_u == 0 || self.passes == 0 {
            return Err(Error::InvalidParameter(
                "hidden width, d_u and passes must be >= 1".into(),
            ));
        }
        if self.layer.is_graph() && self.depth == 0 {
            return Err(Error::InvalidParameter("depth must be >= 1".into()));
        }
        if self.layer == LayerKind::Mlp && self.max_objects == 0 {
            return Err(Error::InvalidParameter(
                "MLP baseline needs max_objects >= 1".into(),
            ));
        }
        Ok(())
    }

    fn dims(&self) -> Dims {
        Dims {
            hidden: self.hidden,
            depth: self.depth,
            d_u: self.d_u,
        }
    }

    fn flat_width(&self) -> usize {
        self.max_objects * FEATURE_DIM * self.task.configs_per_sample()
    }
}

/// Batched model input.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum ModelInput {
    Graphs(GraphBatch),
    Pairs(GraphBatch, GraphBatch),
    Flat(Tensor),
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
enum Body {
    Single(Tower),
    Dual(Tower, Tower),
    Flat,
}

/// A classifier producing logits `(C₊, C₋)` per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    seed: u64,
    store: ParamStore,
    body: Body,
    head: Mlp,
}

impl Model {
    /// Fresh model with weights drawn from the `seed` init stream.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let mut rng = substream(seed, purpose::INIT, 0);
        let mut store = ParamStore::new();
        let (body, head) = build_structure(&config, &mut store, &mut rng)?;
        Ok(Model {
            config,
            seed,
            store,
            body,
            head,
        })
    }

    /// Model with the given parameter values (names and shapes must match).
    pub fn from_records(config: ModelConfig, seed: u64, records: &[ParamRecord]) -> Result<Model> {
        let mut model = Model::new(config, seed)?;
        model.store.load_values(records)?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn task(&self) -> Task {
        self.config.task
    }

    pub fn count_params(&self) -> usize {
        self.store.num_scalars()
    }

    fn graph_options(&self) -> GraphOptions {
        GraphOptions {
            self_loops: self.config.self_loops,
        }
    }

    pub fn check_task(&self, task: Task) -> Result<()> {
        if task != self.config.task {
            return Err(Error::TaskMismatch {
                expected: self.config.task.to_string(),
                found: task.to_string(),
            });
        }
        Ok(())
    }

    pub fn prepare(&self, samples: &[&Sample]) -> Result<ModelInput> {
        for s in samples {
            self.check_task(s.task())?;
        }
        let configs: Vec<Vec<&Configuration>> = samples.iter().map(|s| s.configs()).collect();
        self.prepare_configs(&configs)
    }

    /// Like [`Model::prepare`], from raw configurations (one or two per row).
    pub fn prepare_configs(&self, rows: &[Vec<&Configuration>]) -> Result<ModelInput> {
        let per = self.config.task.configs_per_sample();
        if let Some(bad) = rows.iter().find(|r| r.len() != per) {
            return Err(Error::TaskMismatch {
                expected: self.config.task.to_string(),
                found: format!("{} configuration(s) per sample", bad.len()),
            });
        }
        if rows.is_empty() {
            return Err(Error::InvalidParameter("empty batch".into()));
        }
        match self.body {
            Body::Flat => self.flat_input(rows).map(ModelInput::Flat),
            Body::Single(_) => {
                let graphs = self.graphs(rows, 0)?;
                Ok(ModelInput::Graphs(batch_graph_refs(
                    &graphs.iter().collect::<Vec<_>>(),
                )?))
            }
            Body::Dual(..) => {
                let g1 = self.graphs(rows, 0)?;
                let g2 = self.graphs(rows, 1)?;
                Ok(ModelInput::Pairs(
                    batch_graph_refs(&g1.iter().collect::<Vec<_>>())?,
                    batch_graph_refs(&g2.iter().collect::<Vec<_>>())?,
                ))
            }
        }
    }

    fn graphs(&self, rows: &[Vec<&Configuration>], slot: usize) -> Result<Vec<Graph>> {
        let opts = self.graph_options();
        rows.iter()
            .map(|r| build_graph_with(r[slot], opts))
            .collect()
    }

    fn flat_input(&self, rows: &[Vec<&Configuration>]) -> Result<Tensor> {
        let width = self.config.flat_width();
        let slot_width = self.config.max_objects * FEATURE_DIM;
        let mut data = vec![0.0; rows.len() * width];
        for (r, configs) in rows.iter().enumerate() {
            for (k, c) in configs.iter().enumerate() {
                let f = c.features();
                if f.len() > slot_width {
                    return Err(Error::InvalidParameter(format!(
                        "configuration of {} objects exceeds MLP input capacity {}",
                        c.len(),
                        self.config.max_objects
                    )));
                }
                let start = r * width + k * slot_width;
                data[start..start + f.len()].copy_from_slice(&f);
            }
        }
        Tensor::new(rows.len(), width, data)
    }

    /// Put every parameter on `tape`; the result is indexed like the store.
    pub fn param_vars(&self, tape: &mut Tape) -> Vec<Var> {
        (0..self.store.len()).map(|i| tape.param(&self.store, i)).collect()
    }

    /// Logits (`batch × 2`, columns `C₊`, `C₋`).
    pub fn forward(&self, tape: &mut Tape, params: &[Var], input: &ModelInput) -> Result<Var> {
        let embedding = match (&self.body, input) {
            (Body::Single(t), ModelInput::Graphs(g)) => t.forward(tape, params, g)?.u,
            (Body::Dual(t1, t2), ModelInput::Pairs(g1, g2)) => {
                let u1 = t1.forward(tape, params, g1)?.u;
                let u2 = t2.forward(tape, params, g2)?.u;
                tape.concat(&[u1, u2])?
            }
            (Body::Flat, ModelInput::Flat(x)) => tape.constant(x.clone()),
            _ => {
                return Err(Error::InvalidParameter(
                    "model input does not match model kind".into(),
                ))
            }
        };
        self.head.forward(tape, params, embedding)
    }

    /// Logits for a batch of samples, without gradient bookkeeping.
    pub fn logits(&self, samples: &[&Sample]) -> Result<Vec<[f64; 2]>> {
        let input = self.prepare(samples)?;
        self.logits_for(&input)
    }

    pub fn logits_for(&self, input: &ModelInput) -> Result<Vec<[f64; 2]>> {
        let mut tape = Tape::new();
        let params: Vec<Var> = (0..self.store.len())
            .map(|i| tape.constant(self.store.value(i).clone()))
            .collect();
        let out = self.forward(&mut tape, &params, input)?;
        let t = tape.value(out);
        Ok((0..t.rows()).map(|r| [t.get(r, 0), t.get(r, 1)]).collect())
    }

    /// The tower(s) of a graph model, for inspection.
    pub fn towers(&self) -> Vec<&Tower> {
        match &self.body {
            Body::Single(t) => vec![t],
            Body::Dual(a, b) => vec![a, b],
            Body::Flat => vec![],
        }
    }
}

/// Index of the target class for a label: positives score in column 0.
pub fn target_class(label: u8) -> usize {
    if label == 1 {
        0
    } else {
        1
    }
}

/// Predicted label; ties go to the negative label.
pub fn predict_label(logits: [f64; 2]) -> u8 {
    u8::from(logits[0] > logits[1])
}

fn build_structure<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    store: &mut ParamStore,
    rng: &mut R,
) -> Result<(Body, Mlp)> {
    let dims = cfg.dims();
    let body = match (cfg.layer, cfg.task) {
        (LayerKind::Mlp, _) => Body::Flat,
        (kind, Task::Identification) => {
            Body::Single(Tower::build(kind, store, rng, "tower", cfg.passes, &dims)?)
        }
        (kind, Task::Comparison) => Body::Dual(
            Tower::build(kind, store, rng, "tower1", cfg.passes, &dims)?,
            Tower::build(kind, store, rng, "tower2", cfg.passes, &dims)?,
        ),
    };
    let head = match body {
        Body::Flat => Mlp::build(
            store,
            rng,
            "mlp",
            cfg.flat_width(),
            cfg.hidden,
            cfg.depth,
            2,
        )?,
        Body::Single(_) => Mlp::build(store, rng, "out", cfg.d_u, cfg.hidden, cfg.depth, 2)?,
        Body::Dual(..) => Mlp::build(store, rng, "out", 2 * cfg.d_u, cfg.hidden, cfg.depth, 2)?,
    };
    Ok((body, head))
}

pub const CHECKPOINT_FORMAT: &str = "spatialsim-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serializable snapshot of a model: hyperparameters, seed and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    pub seed: u64,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model: model.config,
            seed: model.seed,
            params: model.store.to_records(),
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        Model::from_records(self.model, self.seed, &self.params)
    }
}
