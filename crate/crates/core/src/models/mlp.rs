use rand::Rng;

use crate::autograd::{ParamStore, Tape, Var};
use crate::error::Result;

/// Fully connected stack: `depth` ReLU hidden layers of width `hidden`,
/// then a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// `(weight, bias)` indices into the owning [`ParamStore`].
    layers: Vec<(usize, usize)>,
    in_dim: usize,
    out_dim: usize,
}

impl Mlp {
    pub fn build<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        in_dim: usize,
        hidden: usize,
        depth: usize,
        out_dim: usize,
    ) -> Result<Mlp> {
        let mut widths = vec![in_dim];
        widths.extend(std::iter::repeat_n(hidden, depth));
        widths.push(out_dim);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let wi = store.init_weight(&format!("{name}.l{k}.w"), w[0], w[1], rng)?;
                let bi = store.init_bias(&format!("{name}.l{k}.b"), w[1])?;
                Ok((wi, bi))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp {
            layers,
            in_dim,
            out_dim,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// `params[i]` must be the tape leaf of store parameter `i`.
    pub fn forward(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            let z = tape.matmul(h, params[w])?;
            h = tape.add_row(z, params[b])?;
            if k < last {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}
