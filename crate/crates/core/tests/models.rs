use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spatialsim::autograd::{ParamStore, Tape, Tensor, Var};
use spatialsim::datagen::{
    gen_comparison_set, gen_identification, sample_reference, CompSample, GenConfig, IdentSample,
    Sample, Task,
};
use spatialsim::geometry::Configuration;
use spatialsim::graph::{batch_graphs, build_graph, GraphBatch, EDGE_DIM, NODE_DIM};
use spatialsim::models::{
    ds_pass, mpgnn_pass, GraphState, LayerKind, Mlp, Model, ModelConfig, PassParams,
};
use spatialsim::rng::purpose;
use spatialsim::trainer::evaluate;

fn config(n: usize, seed: u64) -> Configuration {
    sample_reference(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn permuted(c: &Configuration, perm: &[usize]) -> Configuration {
    Configuration::new(perm.iter().map(|&i| c.objects[i]).collect())
}

fn random_perm(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

fn ident(c: Configuration) -> Sample {
    Sample::Ident(IdentSample { label: 1, config: c })
}

fn comp(a: Configuration, b: Configuration) -> Sample {
    Sample::Comp(CompSample {
        label: 1,
        config1: a,
        config2: b,
    })
}

fn logits(m: &Model, s: &Sample) -> [f64; 2] {
    m.logits(&[s]).unwrap()[0]
}

fn assert_close(a: [f64; 2], b: [f64; 2], tol: f64) {
    assert!((a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol, "{a:?} vs {b:?}");
}

#[test]
fn graph_models_are_permutation_invariant() {
    for kind in LayerKind::GRAPH_KINDS {
        let m = Model::new(ModelConfig::graph(kind, Task::Identification), 5).unwrap();
        let mc = Model::new(ModelConfig::graph(kind, Task::Comparison), 6).unwrap();
        for trial in 0..20 {
            let n = 1 + trial % 9;
            let c = config(n, trial as u64);
            let d = config(n + 1, 100 + trial as u64);
            let pc = permuted(&c, &random_perm(n, trial as u64));
            let pd = permuted(&d, &random_perm(n + 1, 7 + trial as u64));
            assert_close(logits(&m, &ident(c.clone())), logits(&m, &ident(pc.clone())), 1e-9);
            assert_close(
                logits(&mc, &comp(c.clone(), d.clone())),
                logits(&mc, &comp(pc, pd)),
                1e-9,
            );
        }
    }
}

#[test]
fn logits_have_two_finite_entries_for_all_sizes() {
    for kind in LayerKind::GRAPH_KINDS {
        let m = Model::new(ModelConfig::graph(kind, Task::Identification), 1).unwrap();
        let samples: Vec<Sample> = (1..=30).map(|n| ident(config(n, n as u64))).collect();
        let refs: Vec<&Sample> = samples.iter().collect();
        let out = m.logits(&refs).unwrap();
        assert_eq!(out.len(), 30);
        assert!(out.iter().flatten().all(|v| v.is_finite()));
    }
}

#[test]
fn batched_equals_single_evaluation() {
    let m = Model::new(ModelConfig::graph(LayerKind::Mpgnn, Task::Identification), 2).unwrap();
    let samples: Vec<Sample> = (1..8).map(|n| ident(config(n, 40 + n as u64))).collect();
    let refs: Vec<&Sample> = samples.iter().collect();
    let batched = m.logits(&refs).unwrap();
    for (s, b) in samples.iter().zip(batched) {
        assert_eq!(logits(&m, s), b);
    }
}

fn first_pass(m: &Model) -> &PassParams {
    &m.towers()[0].first
}

fn run_pass(m: &Model, g: &GraphBatch) -> (Tensor, Tensor) {
    let mut tape = Tape::new();
    let params = m.param_vars(&mut tape);
    let state = GraphState {
        x: tape.constant(g.x.clone()),
        e: tape.constant(g.e.clone()),
        u: tape.constant(g.u.clone()),
    };
    let out = first_pass(m).forward(&mut tape, &params, g, state).unwrap();
    (tape.value(out.x).clone(), tape.value(out.u).clone())
}

#[test]
fn mpgnn_node_update_is_equivariant() {
    let m = Model::new(ModelConfig::graph(LayerKind::Mpgnn, Task::Identification), 9).unwrap();
    for trial in 0..10 {
        let n = 2 + trial;
        let c = config(n, trial as u64);
        let perm = random_perm(n, 50 + trial as u64);
        let g = batch_graphs(&[build_graph(&c).unwrap()]).unwrap();
        let gp = batch_graphs(&[build_graph(&permuted(&c, &perm)).unwrap()]).unwrap();
        let (x, u) = run_pass(&m, &g);
        let (xp, up) = run_pass(&m, &gp);
        for (row, &src) in perm.iter().enumerate() {
            for k in 0..NODE_DIM {
                assert!((xp.get(row, k) - x.get(src, k)).abs() < 1e-9);
            }
        }
        for (a, b) in u.data().iter().zip(up.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn single_node_mpgnn_uses_zero_messages() {
    let m = Model::new(ModelConfig::graph(LayerKind::Mpgnn, Task::Identification), 3).unwrap();
    let g = batch_graphs(&[build_graph(&config(1, 0)).unwrap()]).unwrap();
    assert_eq!(g.e.rows(), 0);
    let (x, _) = run_pass(&m, &g);
    let PassParams::Mpgnn { node, .. } = first_pass(&m) else {
        panic!("not an MPGNN pass")
    };
    let mut tape = Tape::new();
    let params = m.param_vars(&mut tape);
    let xin = tape.constant(g.x.clone());
    let zeros = tape.constant(Tensor::zeros(1, EDGE_DIM));
    let u = tape.constant(g.u.clone());
    let cat = tape.concat(&[xin, zeros, u]).unwrap();
    let expected = node.forward(&mut tape, &params, cat).unwrap();
    assert_eq!(tape.value(expected).data(), x.data());
}

/// Single linear layers whose weights select input slices.
fn selector(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, pick: &[(usize, usize)]) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mlp = Mlp::build(store, &mut rng, name, in_dim, 1, 0, out_dim).unwrap();
    let w = store.lookup(&format!("{name}.l0.w")).unwrap();
    let mut t = Tensor::zeros(in_dim, out_dim);
    for &(i, o) in pick {
        t.data_mut()[i * out_dim + o] = 1.0;
    }
    *store.value_mut(w) = t;
    mlp
}

#[test]
fn hand_computed_two_node_mpgnn_pass() {
    // MLP_E copies [X_s ‖ X_r]; MLP_X keeps the sender half of the incoming
    // sum; MLP_u outputs [ΣX' ‖ first six entries of u].
    let mut store = ParamStore::new();
    let e_in = 2 * NODE_DIM + EDGE_DIM + NODE_DIM;
    let edge = selector(&mut store, "e", e_in, EDGE_DIM, &(0..20).map(|k| (k, k)).collect::<Vec<_>>());
    let x_in = NODE_DIM + EDGE_DIM + NODE_DIM;
    let node = selector(&mut store, "x", x_in, NODE_DIM, &(0..10).map(|k| (10 + k, k)).collect::<Vec<_>>());
    let mut pick: Vec<(usize, usize)> = (0..10).map(|k| (k, k)).collect();
    pick.extend((0..6).map(|k| (10 + k, 10 + k)));
    let global = selector(&mut store, "u", 2 * NODE_DIM, 16, &pick);

    let c = config(2, 77);
    let f0 = c.objects[0].feature_vector();
    let f1 = c.objects[1].feature_vector();
    let g = batch_graphs(&[build_graph(&c).unwrap()]).unwrap();
    let mut tape = Tape::new();
    let params: Vec<Var> = (0..store.len()).map(|i| tape.param(&store, i)).collect();
    let state = GraphState {
        x: tape.constant(g.x.clone()),
        e: tape.constant(g.e.clone()),
        u: tape.constant(g.u.clone()),
    };
    let out = mpgnn_pass(&mut tape, &params, &g, state, &edge, &node, &global).unwrap();

    // Node 0 receives edge 1→0 = [f1 ‖ f0], so X'_0 = f1 and X'_1 = f0.
    let x = tape.value(out.x);
    assert_eq!(x.row_slice(0), &f1);
    assert_eq!(x.row_slice(1), &f0);
    let u = tape.value(out.u);
    for k in 0..10 {
        assert!((u.get(0, k) - (f0[k] + f1[k])).abs() < 1e-12);
    }
    for k in 0..6 {
        assert!((u.get(0, 10 + k) - (f0[k] + f1[k]) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn deepset_sum_is_additive_and_stateless() {
    let m = Model::new(ModelConfig::graph(LayerKind::Deepset, Task::Identification), 4).unwrap();
    let PassParams::Deepset { node } = first_pass(&m) else {
        panic!("not a deep set")
    };
    let c = config(4, 8);
    let mut dup = c.clone();
    dup.objects.push(c.objects[2]);
    let u_of = |cfg: &Configuration| {
        let g = batch_graphs(&[build_graph(cfg).unwrap()]).unwrap();
        let mut tape = Tape::new();
        let params = m.param_vars(&mut tape);
        let state = GraphState {
            x: tape.constant(g.x.clone()),
            e: tape.constant(g.e.clone()),
            u: tape.constant(g.u.clone()),
        };
        let out = ds_pass(&mut tape, &params, &g, state, node).unwrap();
        tape.value(out.u).clone()
    };
    let image = {
        let mut tape = Tape::new();
        let params = m.param_vars(&mut tape);
        let x = tape.constant(Tensor::row(c.objects[2].feature_vector().to_vec()));
        let y = node.forward(&mut tape, &params, x).unwrap();
        tape.value(y).clone()
    };
    let u = u_of(&c);
    let ud = u_of(&dup);
    for k in 0..u.cols() {
        assert!((ud.get(0, k) - u.get(0, k) - image.get(0, k)).abs() < 1e-12);
    }
    assert_eq!(u_of(&c), u);
}

#[test]
fn comparison_towers_are_not_shared() {
    for kind in [LayerKind::Mpgnn, LayerKind::Rds, LayerKind::Deepset, LayerKind::Mlp] {
        let cfg = match kind {
            LayerKind::Mlp => ModelConfig::mlp_baseline(Task::Comparison, 5.0, 5),
            _ => ModelConfig::graph(kind, Task::Comparison),
        };
        let m = Model::new(cfg, 12).unwrap();
        let a = config(5, 1);
        let b = config(5, 2);
        let ab = logits(&m, &comp(a.clone(), b.clone()));
        let ba = logits(&m, &comp(b, a));
        assert!((ab[0] - ba[0]).abs() > 1e-9 || (ab[1] - ba[1]).abs() > 1e-9, "{kind}");
    }
}

#[test]
fn mlp_baseline_shape_and_order_sensitivity() {
    let cfg = ModelConfig::mlp_baseline(Task::Identification, 5.0, 5);
    assert_eq!(cfg.hidden, 80);
    let comp_cfg = ModelConfig::mlp_baseline(Task::Comparison, 5.0, 8);
    assert_eq!(comp_cfg.hidden, 160);
    let m = Model::new(cfg, 3).unwrap();
    let c = config(5, 9);
    let p = permuted(&c, &[4, 3, 2, 1, 0]);
    let a = logits(&m, &ident(c));
    let b = logits(&m, &ident(p));
    assert!((a[0] - b[0]).abs() > 1e-9);
    assert!(m.logits(&[&ident(config(6, 1))]).is_err());
}

#[test]
fn mlp_zero_padding_is_inert() {
    // Padded slots carry zeros, so a smaller configuration equals the same
    // configuration fed through a model whose padded-slot weights are zero.
    let m = Model::new(ModelConfig::mlp_baseline(Task::Identification, 3.0, 5), 4).unwrap();
    let mut zeroed = m.clone();
    let first = zeroed.params().lookup("mlp.l0.w").expect("first layer weight");
    let w = zeroed.params_mut().value_mut(first);
    let cols = w.cols();
    for r in 30..50 {
        for v in &mut w.row_slice_mut(r)[..cols] {
            *v = 0.0;
        }
    }
    let c = config(3, 6);
    assert_eq!(logits(&m, &ident(c.clone())), logits(&zeroed, &ident(c)));
}

fn mlp_params(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[test]
fn parameter_counts_match_summation_oracle() {
    let (h, du, x, e) = (16, 16, 10, 20);
    let mpgnn = mlp_params(&[3 * x + e, h, e])
        + mlp_params(&[x + e + x, h, x])
        + mlp_params(&[x + x, h, du])
        + mlp_params(&[du, h, 2]);
    let rds = mlp_params(&[x + x, h, h, x]) + mlp_params(&[x + x, h, h, du]) + mlp_params(&[du, h, h, 2]);
    let ds = mlp_params(&[x, h, h, h, h, du]) + mlp_params(&[du, h, h, h, h, 2]);
    for (kind, expected) in [(LayerKind::Mpgnn, mpgnn), (LayerKind::Rds, rds), (LayerKind::Deepset, ds)] {
        let m = Model::new(ModelConfig::graph(kind, Task::Identification), 0).unwrap();
        assert_eq!(m.count_params(), expected, "{kind}");
        assert_eq!(m.params().num_scalars(), expected);
    }
    assert_eq!((mpgnn, rds, ds), (2896, 2236, 2386));
}

/// Negates the last layer of the output head, which negates both logits.
fn flipped(m: &Model) -> Model {
    let mut f = m.clone();
    let last = f
        .params()
        .names()
        .filter(|n| n.starts_with("out.l"))
        .map(|n| n[5..].split('.').next().unwrap().parse::<usize>().unwrap())
        .max()
        .unwrap();
    for suffix in ["w", "b"] {
        let i = f.params().lookup(&format!("out.l{last}.{suffix}")).unwrap();
        for v in f.params_mut().value_mut(i).data_mut() {
            *v = -*v;
        }
    }
    f
}

// A single random network is a fixed function and can separate positives
// from negatives by accident (0.55 happens). Initialization is symmetric
// under negating the output layer, so the expected accuracy over seeds is
// exactly one half: acc(m) + acc(-m) = 1 away from ties.
#[test]
fn untrained_models_are_at_chance() {
    let gen = GenConfig::identification_defaults(31).with_counts(10, 5000);
    let test = gen_identification(5, &gen).unwrap().test;
    let cgen = GenConfig::comparison_defaults(31).with_counts(10, 5000);
    let ctest = gen_comparison_set("c", (3, 8), std::f64::consts::TAU, 5000, purpose::TEST, &cgen).unwrap();
    for (task, data) in [(Task::Identification, &test), (Task::Comparison, &ctest)] {
        for kind in LayerKind::GRAPH_KINDS {
            let mut total = 0.0;
            let seeds = 8;
            for seed in 0..seeds {
                let m = Model::new(ModelConfig::graph(kind, task), seed).unwrap();
                let acc = evaluate(&m, data).unwrap();
                total += acc;
                if seed < 2 {
                    let flip = evaluate(&flipped(&m), data).unwrap();
                    let ties = m
                        .logits(&data.samples.iter().collect::<Vec<_>>())
                        .unwrap()
                        .iter()
                        .filter(|l| l[0] == l[1])
                        .count();
                    let slack = ties as f64 / data.len() as f64;
                    assert!((acc + flip - 1.0).abs() <= slack + 1e-12, "{kind} {acc} {flip}");
                }
            }
            let mean = total / seeds as f64;
            assert!((mean - 0.5).abs() <= 0.03, "{task:?} {kind} mean {mean}");
        }
    }
}

#[test]
fn checkpoint_roundtrip_preserves_logits() {
    let m = Model::new(ModelConfig::graph(LayerKind::Rds, Task::Comparison), 17).unwrap();
    let ck = spatialsim::models::Checkpoint::from_model(&m);
    let text = serde_json::to_string(&ck).unwrap();
    let back: spatialsim::models::Checkpoint = serde_json::from_str(&text).unwrap();
    let m2 = back.to_model().unwrap();
    let s = comp(config(4, 1), config(6, 2));
    assert_eq!(logits(&m, &s), logits(&m2, &s));
}

#[test]
fn task_mismatch_is_rejected() {
    let m = Model::new(ModelConfig::graph(LayerKind::Mpgnn, Task::Identification), 0).unwrap();
    let s = comp(config(3, 0), config(3, 1));
    assert!(matches!(m.logits(&[&s]), Err(spatialsim::Error::TaskMismatch { .. })));
}
