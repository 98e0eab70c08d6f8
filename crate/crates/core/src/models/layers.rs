//! The three graph layers: message passing (MPGNN), recurrent deep set
//! (RDS) and deep set (DS).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::autograd::{ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{GraphBatch, EDGE_DIM, NODE_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Mpgnn,
    Rds,
    Deepset,
    Mlp,
}

impl LayerKind {
    pub const GRAPH_KINDS: [LayerKind; 3] = [LayerKind::Mpgnn, LayerKind::Rds, LayerKind::Deepset];

    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Mpgnn => "mpgnn",
            LayerKind::Rds => "rds",
            LayerKind::Deepset => "deepset",
            LayerKind::Mlp => "mlp",
        }
    }

    /// Hidden-layer count used for each layer's internal MLPs.
    pub fn default_depth(self) -> usize {
        match self {
            LayerKind::Mpgnn => 1,
            LayerKind::Rds => 2,
            LayerKind::Deepset => 4,
            LayerKind::Mlp => 2,
        }
    }

    pub fn is_graph(self) -> bool {
        self != LayerKind::Mlp
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<LayerKind> {
        match s {
            "mpgnn" => Ok(LayerKind::Mpgnn),
            "rds" => Ok(LayerKind::Rds),
            "deepset" | "ds" => Ok(LayerKind::Deepset),
            "mlp" => Ok(LayerKind::Mlp),
            other => Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
        }
    }
}

/// Node, edge and global features flowing between passes.
#[derive(Debug, Clone, Copy)]
pub struct GraphState {
    pub x: Var,
    pub e: Var,
    pub u: Var,
}

/// Parameters of one pass of one layer kind.
#[derive(Debug, Clone, PartialEq)]
pub enum PassParams {
    Mpgnn { edge: Mlp, node: Mlp, global: Mlp },
    Rds { node: Mlp, global: Mlp },
    Deepset { node: Mlp },
}

pub(crate) struct Dims {
    pub hidden: usize,
    pub depth: usize,
    pub d_u: usize,
}

impl PassParams {
    /// `u_in` is the width of the incoming global vector.
    pub(crate) fn build<R: Rng + ?Sized>(
        kind: LayerKind,
        store: &mut ParamStore,
        rng: &mut R,
        prefix: &str,
        u_in: usize,
        dims: &Dims,
    ) -> Result<PassParams> {
        let Dims { hidden, depth, d_u } = *dims;
        let mut mlp = |name: &str, i: usize, o: usize| {
            Mlp::build(store, rng, &format!("{prefix}.{name}"), i, hidden, depth, o)
        };
        Ok(match kind {
            LayerKind::Mpgnn => PassParams::Mpgnn {
                edge: mlp("edge", 2 * NODE_DIM + EDGE_DIM + u_in, EDGE_DIM)?,
                node: mlp("node", NODE_DIM + EDGE_DIM + u_in, NODE_DIM)?,
                global: mlp("global", NODE_DIM + u_in, d_u)?,
            },
            LayerKind::Rds => PassParams::Rds {
                node: mlp("node", NODE_DIM + u_in, NODE_DIM)?,
                global: mlp("global", NODE_DIM + u_in, d_u)?,
            },
            LayerKind::Deepset => PassParams::Deepset {
                node: mlp("node", NODE_DIM, d_u)?,
            },
            LayerKind::Mlp => {
                return Err(Error::InvalidParameter(
                    "the MLP baseline has no graph layer".into(),
                ))
            }
        })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &[Var],
        graph: &GraphBatch,
        state: GraphState,
    ) -> Result<GraphState> {
        match self {
            PassParams::Mpgnn { edge, node, global } => {
                mpgnn_pass(tape, params, graph, state, edge, node, global)
            }
            PassParams::Rds { node, global } => rds_pass(tape, params, graph, state, node, global),
            PassParams::Deepset { node } => ds_pass(tape, params, graph, state, node),
        }
    }
}

/// `E'_{i→j} = MLP_E([X_i‖X_j‖E_{i→j}‖u])`,
/// `X'_j = MLP_X([X_j‖Σ_i E'_{i→j}‖u])`, `u' = MLP_u([Σ_i X'_i‖u])`.
pub fn mpgnn_pass(
    tape: &mut Tape,
    params: &[Var],
    graph: &GraphBatch,
    state: GraphState,
    edge: &Mlp,
    node: &Mlp,
    global: &Mlp,
) -> Result<GraphState> {
    let n_nodes = graph.graph_index.len();
    let n_graphs = graph.n_graphs();

    let xs = tape.gather_rows(state.x, &graph.senders)?;
    let xr = tape.gather_rows(state.x, &graph.receivers)?;
    let ue = tape.gather_rows(state.u, &graph.edge_graph)?;
    let edge_in = tape.concat(&[xs, xr, state.e, ue])?;
    let e_new = edge.forward(tape, params, edge_in)?;

    let incoming = tape.segment_sum(e_new, &graph.receivers, n_nodes)?;
    let un = tape.gather_rows(state.u, &graph.graph_index)?;
    let node_in = tape.concat(&[state.x, incoming, un])?;
    let x_new = node.forward(tape, params, node_in)?;

    let pooled = tape.segment_sum(x_new, &graph.graph_index, n_graphs)?;
    let global_in = tape.concat(&[pooled, state.u])?;
    let u_new = global.forward(tape, params, global_in)?;
    Ok(GraphState {
        x: x_new,
        e: e_new,
        u: u_new,
    })
}

/// `X'_j = MLP_X([X_j‖u])`, `u' = MLP_u([Σ_i X'_i‖u])`.
pub fn rds_pass(
    tape: &mut Tape,
    params: &[Var],
    graph: &GraphBatch,
    state: GraphState,
    node: &Mlp,
    global: &Mlp,
) -> Result<GraphState> {
    let un = tape.gather_rows(state.u, &graph.graph_index)?;
    let node_in = tape.concat(&[state.x, un])?;
    let x_new = node.forward(tape, params, node_in)?;
    let pooled = tape.segment_sum(x_new, &graph.graph_index, graph.n_graphs())?;
    let global_in = tape.concat(&[pooled, state.u])?;
    let u_new = global.forward(tape, params, global_in)?;
    Ok(GraphState {
        x: x_new,
        e: state.e,
        u: u_new,
    })
}

/// `X'_j = MLP_X(X_j)`, `u' = Σ_i X'_i`.
pub fn ds_pass(
    tape: &mut Tape,
    params: &[Var],
    graph: &GraphBatch,
    state: GraphState,
    node: &Mlp,
) -> Result<GraphState> {
    let x_new = node.forward(tape, params, state.x)?;
    let u_new = tape.segment_sum(x_new, &graph.graph_index, graph.n_graphs())?;
    Ok(GraphState {
        x: x_new,
        e: state.e,
        u: u_new,
    })
}

/// One graph tower: a first pass (global input width `NODE_DIM`) and, for
/// `passes > 1`, a shared recurrent pass (global input width `d_u`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub kind: LayerKind,
    pub first: PassParams,
    pub recurrent: Option<PassParams>,
    pub passes: usize,
}

impl Tower {
    pub(crate) fn build<R: Rng + ?Sized>(
        kind: LayerKind,
        store: &mut ParamStore,
        rng: &mut R,
        prefix: &str,
        passes: usize,
        dims: &Dims,
    ) -> Result<Tower> {
        // The deep set has no recurrence.
        let passes = if kind == LayerKind::Deepset { 1 } else { passes };
        let first = PassParams::build(kind, store, rng, &format!("{prefix}.pass0"), NODE_DIM, dims)?;
        let recurrent = if passes > 1 {
            Some(PassParams::build(
                kind,
                store,
                rng,
                &format!("{prefix}.rec"),
                dims.d_u,
                dims,
            )?)
        } else {
            None
        };
        Ok(Tower {
            kind,
            first,
            recurrent,
            passes,
        })
    }

    /// Run all passes from the initial graph features.
    pub fn forward(&self, tape: &mut Tape, params: &[Var], graph: &GraphBatch) -> Result<GraphState> {
        let mut state = GraphState {
            x: tape.constant(graph.x.clone()),
            e: tape.constant(graph.e.clone()),
            u: tape.constant(graph.u.clone()),
        };
        state = self.first.forward(tape, params, graph, state)?;
        if let Some(rec) = &self.recurrent {
            for _ in 1..self.passes {
                state = rec.forward(tape, params, graph, state)?;
            }
        }
        Ok(state)
    }
}
