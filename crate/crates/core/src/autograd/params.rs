use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Param {
    name: String,
    value: Tensor,
    grad: Tensor,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

/// One serialized parameter: name, `[rows, cols]`, row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Named parameters in registration order, with Adam moments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidParameter(format!(
                "duplicate parameter name {name:?}"
            )));
        }
        let n = value.len();
        let grad = Tensor::zeros(value.rows(), value.cols());
        self.params.push(Param {
            name: name.to_string(),
            value,
            grad,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        });
        self.index.insert(name.to_string(), self.params.len() - 1);
        Ok(self.params.len() - 1)
    }

    /// Weight `fan_in × fan_out` drawn from `U(±1/√fan_in)`.
    pub fn init_weight<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Result<usize> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| (2.0 * rng.gen::<f64>() - 1.0) * bound)
            .collect();
        self.insert(name, Tensor::new(fan_in, fan_out, data)?)
    }

    pub fn init_bias(&mut self, name: &str, width: usize) -> Result<usize> {
        self.insert(name, Tensor::zeros(1, width))
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.params[i].name
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn value(&self, i: usize) -> &Tensor {
        &self.params[i].value
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.params[i].value
    }

    pub fn grad(&self, i: usize) -> &Tensor {
        &self.params[i].grad
    }

    pub(crate) fn grad_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.params[i].grad
    }

    pub fn step_count(&self, i: usize) -> u64 {
        self.params[i].step
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// One Adam update with bias correction, then zero the gradients.
    pub fn adam_step(&mut self, lr: f64, cfg: &AdamConfig) {
        for p in &mut self.params {
            p.step += 1;
            let t = p.step as i32;
            let c1 = 1.0 - cfg.beta1.powi(t);
            let c2 = 1.0 - cfg.beta2.powi(t);
            let g = p.grad.data();
            let w = p.value.data_mut();
            for k in 0..w.len() {
                p.m[k] = cfg.beta1 * p.m[k] + (1.0 - cfg.beta1) * g[k];
                p.v[k] = cfg.beta2 * p.v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                let m_hat = p.m[k] / c1;
                let v_hat = p.v[k] / c2;
                w[k] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            p.grad.fill(0.0);
        }
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.params
            .iter()
            .map(|p| ParamRecord {
                name: p.name.clone(),
                shape: p.value.shape(),
                values: p.value.data().to_vec(),
            })
            .collect()
    }

    pub fn from_records(records: &[ParamRecord]) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for r in records {
            if r.shape.len() != 2 {
                return Err(Error::Format(format!(
                    "parameter {:?} has shape {:?}, expected [rows, cols]",
                    r.name, r.shape
                )));
            }
            store.insert(&r.name, Tensor::new(r.shape[0], r.shape[1], r.values.clone())?)?;
        }
        Ok(store)
    }

    /// Overwrite values from `records`, which must match names and shapes.
    pub fn load_values(&mut self, records: &[ParamRecord]) -> Result<()> {
        if records.len() != self.params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} parameters, model has {}",
                records.len(),
                self.params.len()
            )));
        }
        for (p, r) in self.params.iter_mut().zip(records) {
            if p.name != r.name || p.value.shape() != r.shape {
                return Err(Error::Format(format!(
                    "parameter mismatch: model {:?} {:?}, checkpoint {:?} {:?}",
                    p.name,
                    p.value.shape(),
                    r.name,
                    r.shape
                )));
            }
            p.value = Tensor::new(r.shape[0], r.shape[1], r.values.clone())?;
        }
        Ok(())
    }
}
