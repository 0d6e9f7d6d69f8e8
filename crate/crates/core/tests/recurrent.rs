use magop_core::operators::Params;
use magop_core::recurrent::{Cell, DecodeMode, EdLstmConfig, RecurrentConfig};
use magop_core::{Arch, ModelConfig, Pass};
use magop_tensor::{Tape, Tensor};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn set(p: &mut Params, name: &str, values: &[f64]) {
    p.get_mut(name).unwrap().data_mut().copy_from_slice(values);
}

fn zero_params(specs: &[magop_core::operators::ParamSpec]) -> Params {
    let mut p = Params::init(specs, 0).unwrap();
    for t in p.tensors_mut() {
        t.data_mut().fill(0.0);
    }
    p
}

#[test]
fn lstm_matches_hand_trace() {
    let cfg = RecurrentConfig {
        cell: Cell::Lstm,
        hidden: 1,
        features: 1,
        t_len: 2,
    };
    let mut p = Params::init(&cfg.param_specs(), 0).unwrap();
    // Gate order i, f, g, o.
    let w_ih = [0.5, -0.3, 0.8, 0.2];
    let w_hh = [0.1, 0.4, -0.6, 0.7];
    let b_ih = [0.05, 0.1, -0.2, 0.3];
    let b_hh = [-0.1, 0.2, 0.15, -0.05];
    set(&mut p, "cell.w_ih", &w_ih);
    set(&mut p, "cell.w_hh", &w_hh);
    set(&mut p, "cell.b_ih", &b_ih);
    set(&mut p, "cell.b_hh", &b_hh);
    set(&mut p, "out.w", &[1.5]);
    set(&mut p, "out.b", &[-0.25]);

    let xs = [0.9, -0.4];
    let (mut h, mut c) = (0.0, 0.0);
    let mut expect = Vec::new();
    for &x in &xs {
        let a: Vec<f64> = (0..4).map(|k| x * w_ih[k] + b_ih[k] + h * w_hh[k] + b_hh[k]).collect();
        c = sigmoid(a[1]) * c + sigmoid(a[0]) * a[2].tanh();
        h = sigmoid(a[3]) * c.tanh();
        expect.push(1.5 * h - 0.25);
    }

    let mut tape = Tape::new();
    let b = p.bind_constant(&mut tape);
    let y = cfg.forward(&mut tape, &b, &Tensor::new([1, 2], xs.to_vec()).unwrap()).unwrap();
    let got = tape.value(y).data();
    for (g, e) in got.iter().zip(&expect) {
        assert!((g - e).abs() < 1e-14, "{g} vs {e}");
    }
}

#[test]
fn gru_matches_hand_trace() {
    let cfg = RecurrentConfig {
        cell: Cell::Gru,
        hidden: 1,
        features: 1,
        t_len: 2,
    };
    let mut p = Params::init(&cfg.param_specs(), 0).unwrap();
    // Gate order r, z, n.
    let w_ih = [0.3, -0.7, 0.9];
    let w_hh = [0.5, 0.2, -0.4];
    let b_ih = [0.1, 0.0, -0.3];
    let b_hh = [0.2, -0.1, 0.25];
    set(&mut p, "cell.w_ih", &w_ih);
    set(&mut p, "cell.w_hh", &w_hh);
    set(&mut p, "cell.b_ih", &b_ih);
    set(&mut p, "cell.b_hh", &b_hh);
    set(&mut p, "out.w", &[2.0]);
    set(&mut p, "out.b", &[0.0]);

    let xs = [0.6, 1.1];
    let mut h: f64 = 0.0;
    let mut expect = Vec::new();
    for &x in &xs {
        let r = sigmoid(x * w_ih[0] + b_ih[0] + h * w_hh[0] + b_hh[0]);
        let z = sigmoid(x * w_ih[1] + b_ih[1] + h * w_hh[1] + b_hh[1]);
        let n = (x * w_ih[2] + b_ih[2] + r * (h * w_hh[2] + b_hh[2])).tanh();
        h = (1.0 - z) * n + z * h;
        expect.push(2.0 * h);
    }

    let mut tape = Tape::new();
    let b = p.bind_constant(&mut tape);
    let y = cfg.forward(&mut tape, &b, &Tensor::new([1, 2], xs.to_vec()).unwrap()).unwrap();
    for (g, e) in tape.value(y).data().iter().zip(&expect) {
        assert!((g - e).abs() < 1e-14);
    }
}

#[test]
fn rnn_zero_input_gives_zero_output() {
    let cfg = RecurrentConfig::new(Cell::Rnn, 7, 30);
    // Xavier weights, zero biases.
    let p = Params::init(&cfg.param_specs(), 11).unwrap();
    let mut tape = Tape::new();
    let b = p.bind_constant(&mut tape);
    let y = cfg.forward(&mut tape, &b, &Tensor::zeros([7, 30])).unwrap();
    assert_eq!(tape.value(y).shape(), [7, 30]);
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
}

#[test]
fn recurrent_default_shape_and_feature_check() {
    let cfg = ModelConfig::default_for(Arch::Lstm, 198, 50);
    let p = Params::init(&cfg.param_specs().unwrap(), 1).unwrap();
    let h = Tensor::from_fn([50, 198], |i| (i as f64 * 0.01).sin());
    let mut tape = Tape::new();
    let b = p.bind_constant(&mut tape);
    let y = cfg.forward(&mut tape, &b, &h, &[], Pass::Eval).unwrap();
    assert_eq!(tape.value(y).shape(), [50, 198]);
    let err = cfg
        .forward(&mut tape, &b, &Tensor::zeros([49, 198]), &[], Pass::Eval)
        .unwrap_err();
    assert!(err.to_string().contains("[50, 198]"), "{err}");
}

#[test]
fn edlstm_zero_parameters_give_zero_output_in_both_modes() {
    let cfg = EdLstmConfig::new(4, 12);
    let p = zero_params(&cfg.param_specs());
    let h = Tensor::from_fn([4, 12], |i| i as f64 * 0.1 - 1.0);
    let target = Tensor::from_fn([4, 12], |i| (i as f64).cos());
    let mut tape = Tape::new();
    let b = p.bind_constant(&mut tape);
    let ar = cfg.forward(&mut tape, &b, &h, None, DecodeMode::Autoregressive).unwrap();
    let tf = cfg
        .forward(&mut tape, &b, &h, Some(&target), DecodeMode::TeacherForced)
        .unwrap();
    assert!(tape.value(ar).data().iter().all(|&v| v == 0.0));
    assert_eq!(tape.value(ar), tape.value(tf));
}

#[test]
fn edlstm_teacher_forcing_needs_targets() {
    let cfg = EdLstmConfig::new(3, 5);
    let p = Params::init(&cfg.param_specs(), 0).unwrap();
    let mut tape = Tape::new();
    let b = p.bind_constant(&mut tape);
    let err = cfg
        .forward(&mut tape, &b, &Tensor::zeros([3, 5]), None, DecodeMode::TeacherForced)
        .unwrap_err();
    assert!(err.to_string().contains("teacher forcing"), "{err}");
}

#[test]
fn edlstm_output_depends_on_every_input_step() {
    let cfg = EdLstmConfig::new(3, 10);
    let p = Params::init(&cfg.param_specs(), 5).unwrap();
    let base = Tensor::from_fn([3, 10], |i| (i as f64 * 0.3).sin());
    let eval = |h: &Tensor| {
        let mut tape = Tape::new();
        let b = p.bind_constant(&mut tape);
        let y = cfg.forward(&mut tape, &b, h, None, DecodeMode::Autoregressive).unwrap();
        tape.value(y).clone()
    };
    let y0 = eval(&base);
    for step in 0..10 {
        let mut h = base.clone();
        h.data_mut()[step] += 0.1;
        assert_ne!(eval(&h), y0, "step {step}");
    }
}
