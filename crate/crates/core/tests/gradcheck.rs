//! Central finite differences (h = 1e-6) against the tape's adjoints, for
//! every primitive and every model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spatialsim::autograd::{AdamConfig, ParamStore, Tape, Tensor, Var};
use spatialsim::datagen::{gen_comparison_set, gen_identification, GenConfig, Sample, Task};
use spatialsim::models::{target_class, LayerKind, Model, ModelConfig};
use spatialsim::rng::purpose;

const H: f64 = 1e-6;

/// Relative tolerance 1e-5 with an absolute floor at the finite-difference
/// round-off level.
fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-5 * analytic.abs().max(numeric.abs()) + 1e-9
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    // Kept away from zero so ReLU kinks are not straddled by ±h.
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.gen_range(0.05..1.0);
            if rng.gen() {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// Checks d f / d inputs for a scalar-valued tape function.
fn check_inputs(inputs: Vec<Tensor>, f: impl Fn(&mut Tape, &[Var]) -> Var) {
    let eval = |vals: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.variable(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();
    for (i, v) in vars.iter().enumerate() {
        let g = grads.get(*v).expect("input gradient");
        for k in 0..inputs[i].len() {
            let mut plus = inputs.clone();
            plus[i].data_mut()[k] += H;
            let mut minus = inputs.clone();
            minus[i].data_mut()[k] -= H;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * H);
            let analytic = g.data()[k];
            assert!(close(analytic, numeric), "input {i}[{k}]: {analytic} vs {numeric}");
        }
    }
}

/// Weighted sum so every output entry gets a distinct adjoint.
fn weighted_sum(tape: &mut Tape, x: Var, seed: u64) -> Var {
    let (r, c) = (tape.value(x).rows(), tape.value(x).cols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(random_tensor(&mut rng, r, c));
    let p = tape.mul(x, w).unwrap();
    tape.sum_all(p)
}

#[test]
fn matmul_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_tensor(&mut rng, 3, 4);
    let b = random_tensor(&mut rng, 4, 2);
    check_inputs(vec![a, b], |t, v| {
        let m = t.matmul(v[0], v[1]).unwrap();
        weighted_sum(t, m, 10)
    });
}

#[test]
fn add_row_and_add_adjoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_tensor(&mut rng, 4, 3);
    let bias = random_tensor(&mut rng, 1, 3);
    let c = random_tensor(&mut rng, 4, 3);
    check_inputs(vec![a, bias, c], |t, v| {
        let x = t.add_row(v[0], v[1]).unwrap();
        let y = t.add(x, v[2]).unwrap();
        weighted_sum(t, y, 11)
    });
}

#[test]
fn mul_and_relu_adjoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_tensor(&mut rng, 5, 2);
    let b = random_tensor(&mut rng, 5, 2);
    check_inputs(vec![a, b], |t, v| {
        let p = t.mul(v[0], v[1]).unwrap();
        let r = t.relu(p);
        weighted_sum(t, r, 12)
    });
}

#[test]
fn concat_distributes_to_both_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_tensor(&mut rng, 3, 2);
    let b = random_tensor(&mut rng, 3, 5);
    check_inputs(vec![a, b], |t, v| {
        let c = t.concat(&[v[0], v[1], v[0]]).unwrap();
        weighted_sum(t, c, 13)
    });
}

#[test]
fn gather_segment_and_mean_adjoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_tensor(&mut rng, 5, 3);
    check_inputs(vec![a], |t, v| {
        let g = t.gather_rows(v[0], &[4, 0, 0, 2, 3, 1, 4]).unwrap();
        let s = t.segment_sum(g, &[0, 0, 1, 1, 1, 2, 2], 4).unwrap();
        let m = t.mean_rows(s).unwrap();
        weighted_sum(t, m, 14)
    });
}

#[test]
fn softmax_cross_entropy_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let logits = random_tensor(&mut rng, 6, 3);
    check_inputs(vec![logits], |t, v| {
        t.softmax_cross_entropy(v[0], &[0, 2, 1, 1, 0, 2]).unwrap()
    });
}

#[test]
fn randomized_primitive_probes() {
    // 100 random compositions of the primitives.
    for probe in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + probe);
        let n = rng.gen_range(2..6);
        let k = rng.gen_range(1..5);
        let a = random_tensor(&mut rng, n, k);
        let w = random_tensor(&mut rng, k, 3);
        let b = random_tensor(&mut rng, 1, 3);
        let segs: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let targets: Vec<usize> = (0..2).map(|_| rng.gen_range(0..3)).collect();
        check_inputs(vec![a, w, b], move |t, v| {
            let z = t.matmul(v[0], v[1]).unwrap();
            let z = t.add_row(z, v[2]).unwrap();
            let z = t.relu(z);
            let z = t.concat(&[z, v[0]]).unwrap();
            let s = t.segment_sum(z, &segs, 2).unwrap();
            let s = t.gather_rows(s, &[0, 1]).unwrap();
            let cols = t.value(s).cols();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let proj = t.constant(random_tensor(&mut rng, cols, 3));
            let logits = t.matmul(s, proj).unwrap();
            t.softmax_cross_entropy(logits, &targets).unwrap()
        });
    }
}

#[test]
fn two_layer_relu_net_params() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut store = ParamStore::new();
    let w1 = store.init_weight("w1", 4, 6, &mut rng).unwrap();
    let b1 = store.init_bias("b1", 6).unwrap();
    let w2 = store.init_weight("w2", 6, 2, &mut rng).unwrap();
    let b2 = store.init_bias("b2", 2).unwrap();
    for i in [b1, b2] {
        for v in store.value_mut(i).data_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
    let x = random_tensor(&mut rng, 5, 4);
    let targets = [0, 1, 1, 0, 1];
    let loss = |store: &ParamStore, tape: &mut Tape| {
        let p: Vec<Var> = (0..store.len()).map(|i| tape.param(store, i)).collect();
        let xin = tape.constant(x.clone());
        let h = tape.matmul(xin, p[w1]).unwrap();
        let h = tape.add_row(h, p[b1]).unwrap();
        let h = tape.relu(h);
        let o = tape.matmul(h, p[w2]).unwrap();
        let o = tape.add_row(o, p[b2]).unwrap();
        (tape.softmax_cross_entropy(o, &targets).unwrap(), p)
    };
    check_store(&mut store, &loss);
}

type LossFn<'a> = dyn Fn(&ParamStore, &mut Tape) -> (Var, Vec<Var>) + 'a;

/// Compare accumulated parameter gradients with finite differences over
/// every scalar of every parameter.
fn check_store(store: &mut ParamStore, loss: &LossFn<'_>) {
    let mut tape = Tape::new();
    let (l, _) = loss(store, &mut tape);
    let grads = tape.backward(l).unwrap();
    store.zero_grad();
    tape.accumulate_param_grads(&grads, store);
    for i in 0..store.len() {
        let analytic = store.grad(i).clone();
        for k in 0..store.value(i).len() {
            let orig = store.value(i).data()[k];
            let mut at = |v: f64| {
                store.value_mut(i).data_mut()[k] = v;
                let mut t = Tape::new();
                let (l, _) = loss(store, &mut t);
                t.value(l).item()
            };
            let numeric = (at(orig + H) - at(orig - H)) / (2.0 * H);
            store.value_mut(i).data_mut()[k] = orig;
            let a = analytic.data()[k];
            assert!(close(a, numeric), "{}[{k}]: {a} vs {numeric}", store.name(i));
        }
    }
}

fn model_batch(task: Task) -> Vec<Sample> {
    match task {
        Task::Identification => {
            let gen = GenConfig::identification_defaults(4).with_counts(6, 6);
            gen_identification(4, &gen).unwrap().train.samples
        }
        Task::Comparison => {
            let gen = GenConfig::comparison_defaults(4).with_counts(6, 6);
            gen_comparison_set("g", (2, 5), 1.0, 6, purpose::TRAIN, &gen)
                .unwrap()
                .samples
        }
    }
}

fn check_model(kind: LayerKind, task: Task) {
    let samples = model_batch(task);
    let refs: Vec<&Sample> = samples.iter().collect();
    let config = match kind {
        LayerKind::Mlp => ModelConfig::mlp_baseline(task, 3.5, 5),
        _ => ModelConfig::graph(kind, task),
    };
    let mut model = Model::new(config, 21).unwrap();
    // Non-zero biases so every bias path is exercised.
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for i in 0..model.params().len() {
        if model.params().name(i).ends_with(".b") {
            for v in model.params_mut().value_mut(i).data_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
    }
    let input = model.prepare(&refs).unwrap();
    let targets: Vec<usize> = samples.iter().map(|s| target_class(s.label())).collect();
    let probe = model.clone();
    let loss = |store: &ParamStore, tape: &mut Tape| {
        let p: Vec<Var> = (0..store.len()).map(|i| tape.param(store, i)).collect();
        let logits = probe.forward(tape, &p, &input).unwrap();
        (tape.softmax_cross_entropy(logits, &targets).unwrap(), p)
    };
    check_store(model.params_mut(), &loss);
}

#[test]
fn mpgnn_identification_gradients() {
    check_model(LayerKind::Mpgnn, Task::Identification);
}

#[test]
fn rds_identification_gradients() {
    check_model(LayerKind::Rds, Task::Identification);
}

#[test]
fn deepset_identification_gradients() {
    check_model(LayerKind::Deepset, Task::Identification);
}

#[test]
fn mlp_identification_gradients() {
    check_model(LayerKind::Mlp, Task::Identification);
}

#[test]
fn dual_input_gradients() {
    for kind in [LayerKind::Mpgnn, LayerKind::Rds, LayerKind::Deepset, LayerKind::Mlp] {
        check_model(kind, Task::Comparison);
    }
}

#[test]
fn adam_closed_form_first_step() {
    let mut store = ParamStore::new();
    let i = store.insert("p", Tensor::scalar(0.5)).unwrap();
    let mut tape = Tape::new();
    let p = tape.param(&store, i);
    let l = tape.sum_all(p); // dL/dp = 1
    let g = tape.backward(l).unwrap();
    tape.accumulate_param_grads(&g, &mut store);
    store.adam_step(1e-3, &AdamConfig::default());
    // m̂ = g, v̂ = g², step = lr·g/(|g| + eps)
    let expected = 0.5 - 1e-3 * 1.0 / (1.0 + 1e-8);
    assert!((store.value(i).item() - expected).abs() < 1e-15);
    assert!(store.grad(i).data().iter().all(|&g| g == 0.0));
}

#[test]
fn adam_zero_gradient_is_noop() {
    let mut store = ParamStore::new();
    let i = store.insert("p", Tensor::row(vec![1.0, -2.0])).unwrap();
    store.adam_step(1e-3, &AdamConfig::default());
    assert_eq!(store.value(i).data(), &[1.0, -2.0]);
}

#[test]
fn adam_decreases_convex_quadratic() {
    let mut store = ParamStore::new();
    let i = store.insert("p", Tensor::row(vec![3.0, -1.5, 0.7])).unwrap();
    let target = Tensor::row(vec![-1.0, 2.0, 0.0]);
    let mut prev = f64::INFINITY;
    for _ in 0..100 {
        let mut tape = Tape::new();
        let p = tape.param(&store, i);
        let neg = tape.constant(Tensor::row(target.data().iter().map(|v| -v).collect()));
        let d = tape.add(p, neg).unwrap();
        let sq = tape.mul(d, d).unwrap();
        let l = tape.sum_all(sq);
        let value = tape.value(l).item();
        assert!(value < prev, "{value} !< {prev}");
        prev = value;
        let g = tape.backward(l).unwrap();
        tape.accumulate_param_grads(&g, &mut store);
        store.adam_step(1e-2, &AdamConfig::default());
    }
}
