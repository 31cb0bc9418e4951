use super::*;
use crate::rng::rng;
use crate::tensor::{Optimizer, OptimizerKind};

fn config(fusion: Fusion, layers: usize, mlp: Vec<usize>) -> ModelConfig {
    ModelConfig {
        input_dim: 20,
        embed_dim: 6,
        hidden_dim: 8,
        n_gru_layers: layers,
        fusion,
        mlp_hidden_dims: mlp,
        domain_dim: 4,
        embedding: EmbeddingMode::Linear,
        seed: 7,
    }
}

fn random_steps(t: usize, seed: u64) -> Vec<Step> {
    use rand::Rng as _;
    let mut r = rng(seed);
    (0..t)
        .map(|k| {
            let mut x: Vec<u32> = (0..3).map(|_| r.random_range(0..20)).collect();
            x.sort();
            x.dedup();
            Step { day_offset: k as i32 - t as i32, x }
        })
        .collect()
}

fn zero_model(cfg: ModelConfig) -> Model {
    let mut m = Model::new(cfg).unwrap();
    for p in m.params_mut() {
        p.data_mut().fill(0.0);
    }
    m
}

#[test]
fn embedding_is_row_select_plus_bias() {
    let m = Model::new(config(Fusion::None, 1, vec![])).unwrap();
    let mut tape = Tape::new();
    let bp = m.bind(&mut tape, false).unwrap();
    let e = tape.embed_sum(bp.vars[m.layout.w_e], &[vec![3], vec![3, 11]]).unwrap();
    let e = tape.add_row(e, bp.vars[m.layout.b_e]).unwrap();
    let w = m.embedding();
    let b = m.param("b_e").unwrap();
    for c in 0..6 {
        let one = w.get(3, c) + b.data()[c];
        let two = w.get(3, c) + w.get(11, c) + b.data()[c];
        assert!((tape.value(e).get(0, c) - one).abs() < 1e-15);
        assert!((tape.value(e).get(1, c) - two).abs() < 1e-15);
    }
}

#[test]
fn gru_zero_weights_halves_state() {
    let m = zero_model(config(Fusion::None, 1, vec![]));
    let mut tape = Tape::new();
    let bp = m.bind(&mut tape, false).unwrap();
    let v: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
    let h = tape.constant(Tensor::row(v.clone()));
    let x = tape.constant(Tensor::zeros(1, 24));
    let next = m.gru_step(&mut tape, &bp, 0, x, Some(h)).unwrap();
    for (a, b) in tape.value(next).data().iter().zip(&v) {
        assert!((a - 0.5 * b).abs() < 1e-15);
    }
}

#[test]
fn gru_closed_update_gate_carries_state() {
    let mut m = Model::new(config(Fusion::None, 1, vec![])).unwrap();
    m.param_mut("gru0.b_z").unwrap().data_mut().fill(-60.0);
    let mut tape = Tape::new();
    let bp = m.bind(&mut tape, false).unwrap();
    let v: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
    let h = tape.constant(Tensor::row(v.clone()));
    let x = tape.constant(Tensor::zeros(1, 24));
    let x = tape.add_row(x, bp.gru_b[0]).unwrap();
    let next = m.gru_step(&mut tape, &bp, 0, x, Some(h)).unwrap();
    for (a, b) in tape.value(next).data().iter().zip(&v) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn attention_cases() {
    let m = Model::new(config(Fusion::None, 1, vec![])).unwrap();

    let mut tape = Tape::new();
    let h1 = tape.constant(Tensor::row(vec![0.3; 8]));
    let (a, o) = m.attend(&mut tape, h1).unwrap();
    assert_eq!(tape.value(a).data(), &[1.0]);
    assert_eq!(tape.value(o).data(), tape.value(h1).data());

    let mut tape = Tape::new();
    let row = vec![0.2, -0.1, 0.4, 0.0, 0.3, 0.9, -0.5, 0.1];
    let same = tape.constant(Tensor::new(3, 8, row.repeat(3)).unwrap());
    let (a, o) = m.attend(&mut tape, same).unwrap();
    for v in tape.value(a).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    for (x, y) in tape.value(o).data().iter().zip(&row) {
        assert!((x - y).abs() < 1e-15);
    }

    // d = 2, h1 = (1, 0), h2 = (0, 1): s = (0, 1/sqrt 2)
    let mut tape = Tape::new();
    let hs = tape.constant(Tensor::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let (a, o) = m.attend(&mut tape, hs).unwrap();
    let s2 = 1.0 / 2f64.sqrt();
    let a1 = 1.0 / (1.0 + s2.exp());
    let a2 = s2.exp() / (1.0 + s2.exp());
    assert!((tape.value(a).data()[0] - a1).abs() < 1e-15);
    assert!((tape.value(a).data()[1] - a2).abs() < 1e-15);
    assert!((tape.value(o).data()[0] - a1).abs() < 1e-15);
    assert!((tape.value(o).data()[1] - a2).abs() < 1e-15);
}

#[test]
fn attention_weights_form_a_distribution() {
    let m = Model::new(config(Fusion::Early, 2, vec![5])).unwrap();
    for seed in 0..20 {
        let steps = random_steps(1 + (seed as usize % 7), seed);
        let p = m.predict(&steps, &[0.5, -1.0, 2.0, 0.0]).unwrap();
        assert!(p.attention.iter().all(|&a| a >= 0.0));
        assert!((p.attention.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(p.probability > 0.0 && p.probability < 1.0);
    }
}

#[test]
fn zero_summary_and_bias_give_one_half() {
    let m = zero_model(config(Fusion::None, 1, vec![]));
    let mut tape = Tape::new();
    let bp = m.bind(&mut tape, false).unwrap();
    let o = tape.constant(Tensor::zeros(1, 8));
    let logit = m.head(&mut tape, &bp, o, None).unwrap();
    assert_eq!(sigmoid(tape.value(logit).data()[0]), 0.5);
}

#[test]
fn no_fusion_ignores_z() {
    let m = Model::new(config(Fusion::None, 2, vec![])).unwrap();
    let steps = random_steps(4, 1);
    let a = m.predict(&steps, &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = m.predict(&steps, &[-9.0, 0.0, 1e3, 7.0]).unwrap();
    assert_eq!(a.logit.to_bits(), b.logit.to_bits());
}

#[test]
fn shallow_fusion_is_logistic_on_concatenation() {
    let steps = random_steps(5, 2);
    let z = [0.3, -0.7, 1.1, 0.0];
    for fusion in [Fusion::Early, Fusion::Late] {
        let m = Model::new(config(fusion, 1, vec![])).unwrap();
        let mut tape = Tape::new();
        let bp = m.bind(&mut tape, false).unwrap();
        let vars = m.forward_batch(&mut tape, &bp, &[(&steps, &z)]).unwrap();
        let attention = tape.value(vars[0].attention).clone();

        // Recompute o from the attention weights and rebuild the logit by hand.
        let none = Model::from_tensors(
            ModelConfig { fusion: Fusion::None, ..m.config().clone() },
            {
                let mut t = m.named_tensors();
                let w_o = m.param("W_o").unwrap();
                let pos = t.iter().position(|(n, _)| n == "W_o").unwrap();
                t[pos].1 = Tensor::new(8, 1, w_o.data()[..8].to_vec()).unwrap();
                t
            },
        )
        .unwrap();
        let mut tape2 = Tape::new();
        let bp2 = none.bind(&mut tape2, false).unwrap();
        let v2 = none.forward_batch(&mut tape2, &bp2, &[(&steps, &z)]).unwrap();
        assert_eq!(tape2.value(v2[0].attention), &attention);
        let o_part = tape2.value(v2[0].logit).data()[0];
        let w_o = m.param("W_o").unwrap().data();
        let z_part: f64 = z.iter().zip(&w_o[8..]).map(|(a, b)| a * b).sum();
        let expected = o_part + z_part;
        assert!((tape.value(vars[0].logit).data()[0] - expected).abs() < 1e-12, "{fusion:?}");
    }
}

#[test]
fn order_matters_and_batching_is_exact() {
    let m = Model::new(config(Fusion::Late, 2, vec![3])).unwrap();
    let z = [0.1, 0.2, 0.3, 0.4];
    let steps = random_steps(6, 3);
    let mut reversed = steps.clone();
    reversed.reverse();
    let a = m.predict(&steps, &z).unwrap();
    let b = m.predict(&reversed, &z).unwrap();
    assert_ne!(a.logit, b.logit);

    let other = random_steps(2, 4);
    let batch = m.predict_batch(&[(&steps, &z), (&other, &z), (&reversed, &z)]).unwrap();
    assert_eq!(batch[0], a);
    assert_eq!(batch[2], b);
    assert_eq!(batch[1], m.predict(&other, &z).unwrap());
}

#[test]
fn golden_forward_value() {
    let m = Model::new(config(Fusion::Early, 2, vec![5])).unwrap();
    let p = m.predict(&random_steps(5, 9), &[0.5, -0.25, 1.0, 2.0]).unwrap();
    let again = Model::new(config(Fusion::Early, 2, vec![5])).unwrap();
    assert_eq!(again.predict(&random_steps(5, 9), &[0.5, -0.25, 1.0, 2.0]).unwrap(), p);
    assert!((p.probability - GOLDEN).abs() < 1e-12, "{}", p.probability);
}

const GOLDEN: f64 = 0.3991763211224323;

fn batch_loss(m: &Model, tape: &mut Tape, bp: &BoundParams, data: &[(Vec<Step>, Vec<f64>, f64)]) -> Var {
    let batch: Vec<(&[Step], &[f64])> = data.iter().map(|(s, z, _)| (s.as_slice(), z.as_slice())).collect();
    let vars = m.forward_batch(tape, bp, &batch).unwrap();
    let logits: Vec<Var> = vars.iter().map(|v| v.logit).collect();
    let stacked = tape.concat_rows(&logits).unwrap();
    let p = tape.sigmoid(stacked).unwrap();
    let targets: Vec<f64> = data.iter().map(|d| d.2).collect();
    tape.weighted_bce(p, &targets, 2.0, 1.0).unwrap()
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let data: Vec<(Vec<Step>, Vec<f64>, f64)> = (0..3)
        .map(|i| {
            let z = vec![0.5 - i as f64, 0.2 * i as f64, 1.0, -0.3];
            (random_steps(5, 20 + i), z, (i % 2) as f64)
        })
        .collect();
    for (fusion, layers, mlp) in [
        (Fusion::None, 1, vec![]),
        (Fusion::Early, 2, vec![5]),
        (Fusion::Late, 1, vec![4, 3]),
    ] {
        let m = Model::new(config(fusion, layers, mlp)).unwrap();
        let mut tape = Tape::new();
        let bp = m.bind(&mut tape, true).unwrap();
        let loss = batch_loss(&m, &mut tape, &bp, &data);
        tape.backward(loss).unwrap();

        let eval = |model: &Model| {
            let mut t = Tape::new();
            let b = model.bind(&mut t, false).unwrap();
            let l = batch_loss(model, &mut t, &b, &data);
            t.value(l).data()[0]
        };
        let h = 1e-5;
        for (k, name) in m.names().iter().enumerate() {
            let analytic = tape.grad_or_zeros(bp.vars[k]);
            for i in 0..m.params()[k].len() {
                let mut plus = m.clone();
                plus.params_mut()[k].data_mut()[i] += h;
                let mut minus = m.clone();
                minus.params_mut()[k].data_mut()[i] -= h;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic.data()[i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
                assert!(rel <= 1e-4, "{fusion:?} {name}[{i}]: {a} vs {numeric}");
            }
        }
    }
}

#[test]
fn pretrained_embedding_stays_frozen() {
    let cfg = config(Fusion::Early, 1, vec![4]);
    let w_e = Tensor::uniform(20, 6, 0.5, &mut rng(99));
    let mut m = Model::with_pretrained_embedding(cfg, w_e.clone()).unwrap();
    let data = vec![(random_steps(4, 1), vec![1.0, 0.0, 0.0, 1.0], 1.0), (random_steps(3, 2), vec![0.0; 4], 0.0)];
    let mut opt = Optimizer::new(OptimizerKind::Adam, 0.05);
    let before = m.clone();
    for _ in 0..10 {
        let mut tape = Tape::new();
        let bp = m.bind(&mut tape, true).unwrap();
        let loss = batch_loss(&m, &mut tape, &bp, &data);
        tape.backward(loss).unwrap();
        let grads: Vec<Tensor> = bp.vars.iter().map(|v| tape.grad_or_zeros(*v)).collect();
        let mut params: Vec<&mut Tensor> = m.params_mut().iter_mut().collect();
        opt.step(&mut params, &grads);
    }
    assert_eq!(m.embedding(), &w_e);
    assert_ne!(m.param("W_o"), before.param("W_o"));
}

#[test]
fn config_errors() {
    let mut cfg = config(Fusion::Early, 1, vec![]);
    cfg.domain_dim = 0;
    assert!(matches!(Model::new(cfg), Err(Error::FusionWithoutDomain("early"))));
    let mut cfg = config(Fusion::None, 4, vec![]);
    assert!(Model::new(cfg.clone()).is_err());
    cfg.n_gru_layers = 1;
    cfg.hidden_dim = 200;
    assert!(Model::new(cfg).is_err());
    let bad = Tensor::zeros(3, 3);
    assert!(Model::with_pretrained_embedding(config(Fusion::None, 1, vec![]), bad).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let m = Model::new(config(Fusion::Late, 2, vec![3])).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    m.to_checkpoint(serde_json::json!({"note": 1})).unwrap().write(&path).unwrap();
    let (back, extra) = Model::from_checkpoint(&Checkpoint::read(&path).unwrap()).unwrap();
    assert_eq!(back, m);
    assert_eq!(extra["note"], 1);
}
