//! Complete directed scene graphs and segment-indexed batching.

use crate::autograd::Tensor;
use crate::error::{Error, Result};
use crate::geometry::{Configuration, FEATURE_DIM};

/// Node feature width.
pub const NODE_DIM: usize = FEATURE_DIM;
/// Initial edge feature width (`[X_sender || X_receiver]`).
pub const EDGE_DIM: usize = 2 * FEATURE_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GraphOptions {
    pub self_loops: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub x: Tensor,
    pub e: Tensor,
    pub senders: Vec<usize>,
    pub receivers: Vec<usize>,
    /// Initial global vector, `1 × NODE_DIM`.
    pub u: Tensor,
}

impl Graph {
    pub fn n_nodes(&self) -> usize {
        self.x.rows()
    }

    pub fn n_edges(&self) -> usize {
        self.senders.len()
    }
}

pub fn build_graph(config: &Configuration) -> Result<Graph> {
    build_graph_with(config, GraphOptions::default())
}

/// Sender-major enumeration of ordered pairs; `u` is the mean node feature
/// and each edge starts as `[X_i || X_j]`.
pub fn build_graph_with(config: &Configuration, opts: GraphOptions) -> Result<Graph> {
    if config.is_empty() {
        return Err(Error::EmptyConfiguration);
    }
    let n = config.len();
    let x = Tensor::new(n, NODE_DIM, config.features())?;

    let mut u = vec![0.0; NODE_DIM];
    for r in 0..n {
        for (acc, v) in u.iter_mut().zip(x.row_slice(r)) {
            *acc += v;
        }
    }
    u.iter_mut().for_each(|v| *v /= n as f64);

    let mut senders = Vec::with_capacity(n * n);
    let mut receivers = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i != j || opts.self_loops {
                senders.push(i);
                receivers.push(j);
            }
        }
    }
    let mut e = Vec::with_capacity(senders.len() * EDGE_DIM);
    for (&i, &j) in senders.iter().zip(&receivers) {
        e.extend_from_slice(x.row_slice(i));
        e.extend_from_slice(x.row_slice(j));
    }
    let e = Tensor::new(senders.len(), EDGE_DIM, e)?;
    Ok(Graph {
        x,
        e,
        senders,
        receivers,
        u: Tensor::row(u),
    })
}

/// Several graphs stacked into one disjoint union.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    pub x: Tensor,
    pub e: Tensor,
    /// Global node indices.
    pub senders: Vec<usize>,
    pub receivers: Vec<usize>,
    /// Graph of each node (non-decreasing).
    pub graph_index: Vec<usize>,
    /// Graph of each edge (non-decreasing).
    pub edge_graph: Vec<usize>,
    /// `n_graphs × NODE_DIM` initial globals.
    pub u: Tensor,
    pub n_nodes: Vec<usize>,
    pub n_edges: Vec<usize>,
}

impl GraphBatch {
    pub fn n_graphs(&self) -> usize {
        self.n_nodes.len()
    }
}

pub fn batch_graphs(graphs: &[Graph]) -> Result<GraphBatch> {
    batch_graph_refs(&graphs.iter().collect::<Vec<_>>())
}

pub fn batch_graph_refs(graphs: &[&Graph]) -> Result<GraphBatch> {
    if graphs.is_empty() {
        return Err(Error::InvalidParameter("cannot batch zero graphs".into()));
    }
    let total_nodes: usize = graphs.iter().map(|g| g.n_nodes()).sum();
    let total_edges: usize = graphs.iter().map(|g| g.n_edges()).sum();
    let edge_dim = graphs[0].e.cols();
    let mut x = Vec::with_capacity(total_nodes * NODE_DIM);
    let mut e = Vec::with_capacity(total_edges * edge_dim);
    let mut u = Vec::with_capacity(graphs.len() * NODE_DIM);
    let mut senders = Vec::with_capacity(total_edges);
    let mut receivers = Vec::with_capacity(total_edges);
    let mut graph_index = Vec::with_capacity(total_nodes);
    let mut edge_graph = Vec::with_capacity(total_edges);
    let mut offset = 0;
    for (gi, g) in graphs.iter().enumerate() {
        if g.e.cols() != edge_dim && g.n_edges() > 0 {
            return Err(Error::ShapeMismatch {
                op: "batch_graphs",
                left: graphs[0].e.shape(),
                right: g.e.shape(),
            });
        }
        x.extend_from_slice(g.x.data());
        e.extend_from_slice(g.e.data());
        u.extend_from_slice(g.u.data());
        senders.extend(g.senders.iter().map(|s| s + offset));
        receivers.extend(g.receivers.iter().map(|r| r + offset));
        graph_index.extend(std::iter::repeat_n(gi, g.n_nodes()));
        edge_graph.extend(std::iter::repeat_n(gi, g.n_edges()));
        offset += g.n_nodes();
    }
    Ok(GraphBatch {
        x: Tensor::new(total_nodes, NODE_DIM, x)?,
        e: Tensor::new(total_edges, edge_dim, e)?,
        senders,
        receivers,
        graph_index,
        edge_graph,
        u: Tensor::new(graphs.len(), NODE_DIM, u)?,
        n_nodes: graphs.iter().map(|g| g.n_nodes()).collect(),
        n_edges: graphs.iter().map(|g| g.n_edges()).collect(),
    })
}

pub fn unbatch(batch: &GraphBatch) -> Vec<Graph> {
    let mut out = Vec::with_capacity(batch.n_graphs());
    let mut node_off = 0;
    let mut edge_off = 0;
    let edge_dim = batch.e.cols();
    for (gi, (&nn, &ne)) in batch.n_nodes.iter().zip(&batch.n_edges).enumerate() {
        let x = batch.x.data()[node_off * NODE_DIM..(node_off + nn) * NODE_DIM].to_vec();
        let e = batch.e.data()[edge_off * edge_dim..(edge_off + ne) * edge_dim].to_vec();
        out.push(Graph {
            x: Tensor::new(nn, NODE_DIM, x).expect("consistent batch"),
            e: Tensor::new(ne, edge_dim, e).expect("consistent batch"),
            senders: batch.senders[edge_off..edge_off + ne]
                .iter()
                .map(|s| s - node_off)
                .collect(),
            receivers: batch.receivers[edge_off..edge_off + ne]
                .iter()
                .map(|r| r - node_off)
                .collect(),
            u: Tensor::row(batch.u.row_slice(gi).to_vec()),
        });
        node_off += nn;
        edge_off += ne;
    }
    out
}
