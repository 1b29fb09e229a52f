//! Finite-difference harnesses for every layer's backward pass in `f64`.

use firecast_core::models::{Mode, Model, ModelSpec, Variant};
use firecast_core::nn::gradcheck::{gradcheck, GradCheckConfig, GradCheckReport};
use firecast_core::nn::{
    bce_grad, bce_loss, relu, relu_backward, sigmoid, sigmoid_backward, BatchNorm2d, Conv2d,
    ConvLstmCell, Linear, LstmCell, MaxPool2d, Module, NnError, Param, Tensor, BCE_EPS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INSTANCES: u64 = 10;
pub const LAYER_TOL: f64 = 1e-5;
pub const MODEL_TOL: f64 = 1e-4;

pub type LayerCheck = fn(u64) -> GradCheckReport;

pub const LAYERS: [(&str, LayerCheck); 8] = [
    ("conv2d", conv2d),
    ("maxpool", maxpool),
    ("batchnorm", batchnorm),
    ("linear", linear),
    ("lstm_cell", lstm_cell),
    ("convlstm_cell", convlstm_cell),
    ("sigmoid/relu", sigmoid_and_relu),
    ("bce", bce),
];

/// Worst report over all instances of one layer.
pub fn worst_case(check: LayerCheck) -> GradCheckReport {
    (0..INSTANCES)
        .map(check)
        .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
        .expect("at least one instance")
}

/// A layer plus its inputs, all exposed as trainable parameters so input
/// gradients are checked alongside weight gradients.
struct Harness<L> {
    layer: L,
    inputs: Vec<Param<f64>>,
    proj: Vec<f64>,
}

impl<L: Module<f64>> Module<f64> for Harness<L> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<f64>)) {
        self.layer.visit(prefix, f);
        for (i, p) in self.inputs.iter().enumerate() {
            f(&format!("input{i}"), p);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
        self.layer.visit_mut(prefix, f);
        for (i, p) in self.inputs.iter_mut().enumerate() {
            f(&format!("input{i}"), p);
        }
    }
}

struct Stateless;

impl Module<f64> for Stateless {
    fn visit(&self, _: &str, _: &mut dyn FnMut(&str, &Param<f64>)) {}
    fn visit_mut(&mut self, _: &str, _: &mut dyn FnMut(&str, &mut Param<f64>)) {}
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn input(shape: &[usize], r: &mut ChaCha8Rng) -> Param<f64> {
    Param::new(Tensor::uniform(shape, 1.0, r))
}

fn harness<L>(layer: L, inputs: Vec<Param<f64>>, out_len: usize, r: &mut ChaCha8Rng) -> Harness<L> {
    let proj = (0..out_len).map(|_| r.gen_range(-1.0..1.0)).collect();
    Harness {
        layer,
        inputs,
        proj,
    }
}

fn dot(y: &Tensor<f64>, proj: &[f64]) -> f64 {
    y.data().iter().zip(proj).map(|(a, b)| a * b).sum()
}

fn dy(y: &Tensor<f64>, proj: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(y.shape(), proj.to_vec()).unwrap()
}

pub fn conv2d(seed: u64) -> GradCheckReport {
    {
        let mut r = rng(seed);
        let (stride, padding) = [(1, 0), (1, 1), (2, 1), (2, 0)][seed as usize % 4];
        let k = if seed % 2 == 0 { 3 } else { 2 };
        let conv = Conv2d::new(2, 3, k, stride, padding, &mut r);
        let x = input(&[2, 2, 5, 6], &mut r);
        let out = conv.forward(&x.value).unwrap().len();
        let mut h = harness(conv, vec![x], out, &mut r);
        let report = gradcheck(&mut h, &GradCheckConfig::default(), |h, back| {
            let y = h.layer.forward(&h.inputs[0].value)?;
            if back {
                let dx = h.layer.backward(&h.inputs[0].value, &dy(&y, &h.proj))?;
                h.inputs[0].grad.add_assign(&dx);
            }
            Ok(dot(&y, &h.proj))
        })
        .unwrap();
        report
    }
}

pub fn maxpool(seed: u64) -> GradCheckReport {
    {
        let mut r = rng(100 + seed);
        let pool = if seed % 2 == 0 {
            MaxPool2d::new(2, 2)
        } else {
            MaxPool2d::new(3, 2)
        };
        let x = input(&[2, 3, 7, 6], &mut r);
        let out = pool.forward(&x.value).unwrap().len();
        let mut h = harness(Stateless, vec![x], out, &mut r);
        let report = gradcheck(&mut h, &GradCheckConfig::default(), |h, back| {
            let (y, cache) = pool.forward_cached(&h.inputs[0].value)?;
            if back {
                let dx = pool.backward(&cache, &dy(&y, &h.proj))?;
                h.inputs[0].grad.add_assign(&dx);
            }
            Ok(dot(&y, &h.proj))
        })
        .unwrap();
        report
    }
}

pub fn batchnorm(seed: u64) -> GradCheckReport {
    {
        let mut r = rng(200 + seed);
        let mut bn = BatchNorm2d::new(3);
        bn.gamma.value = Tensor::uniform(&[3], 1.0, &mut r).map(|v| v + 1.5);
        bn.beta.value = Tensor::uniform(&[3], 1.0, &mut r);
        let x = input(&[3, 3, 2, 3], &mut r);
        let out = x.value.len();
        let mut h = harness(bn, vec![x], out, &mut r);
        let report = gradcheck(&mut h, &GradCheckConfig::default(), |h, back| {
            let (y, cache) = h.layer.forward_train(&h.inputs[0].value)?;
            if back {
                let dx = h.layer.backward(&cache, &dy(&y, &h.proj))?;
                h.inputs[0].grad.add_assign(&dx);
            }
            Ok(dot(&y, &h.proj))
        })
        .unwrap();
        report
    }
}

pub fn linear(seed: u64) -> GradCheckReport {
    {
        let mut r = rng(300 + seed);
        let lin = Linear::new(5, 4, &mut r);
        let x = input(&[3, 5], &mut r);
        let mut h = harness(lin, vec![x], 12, &mut r);
        let report = gradcheck(&mut h, &GradCheckConfig::default(), |h, back| {
            let y = h.layer.forward(&h.inputs[0].value)?;
            if back {
                let dx = h.layer.backward(&h.inputs[0].value, &dy(&y, &h.proj))?;
                h.inputs[0].grad.add_assign(&dx);
            }
            Ok(dot(&y, &h.proj))
        })
        .unwrap();
        report
    }
}

/// Scores both outputs of a recurrent cell: `proj` covers `h` then `c`.
fn cell_loss(h: &Tensor<f64>, c: &Tensor<f64>, proj: &[f64]) -> f64 {
    dot(h, proj) + dot(c, &proj[h.len()..])
}

pub fn lstm_cell(seed: u64) -> GradCheckReport {
    {
        let mut r = rng(400 + seed);
        let cell = LstmCell::new(4, 3, &mut r);
        let inputs = vec![
            input(&[2, 4], &mut r),
            input(&[2, 3], &mut r),
            input(&[2, 3], &mut r),
        ];
        let mut h = harness(cell, inputs, 12, &mut r);
        let report = gradcheck(&mut h, &GradCheckConfig::default(), |h, back| {
            let [x, h0, c0] = [&h.inputs[0].value, &h.inputs[1].value, &h.inputs[2].value];
            let (hn, cn, cache) = h.layer.forward_cached(x, h0, c0)?;
            let loss = cell_loss(&hn, &cn, &h.proj);
            if back {
                let dh = Tensor::from_vec(hn.shape(), h.proj[..6].to_vec())?;
                let dc = Tensor::from_vec(cn.shape(), h.proj[6..].to_vec())?;
                let (dx, dh0, dc0) = h.layer.backward(&cache, &dh, &dc)?;
                h.inputs[0].grad.add_assign(&dx);
                h.inputs[1].grad.add_assign(&dh0);
                h.inputs[2].grad.add_assign(&dc0);
            }
            Ok(loss)
        })
        .unwrap();
        report
    }
}

pub fn convlstm_cell(seed: u64) -> GradCheckReport {
    {
        let mut r = rng(500 + seed);
        let k = if seed % 2 == 0 { 3 } else { 1 };
        let cell = ConvLstmCell::new(2, 2, k, &mut r);
        let shape = [2, 2, 3, 4];
        let inputs = vec![
            input(&shape, &mut r),
            input(&shape, &mut r),
            input(&shape, &mut r),
        ];
        let mut h = harness(cell, inputs, 96, &mut r);
        let report = gradcheck(&mut h, &GradCheckConfig::default(), |h, back| {
            let [x, h0, c0] = [&h.inputs[0].value, &h.inputs[1].value, &h.inputs[2].value];
            let (hn, cn, cache) = h.layer.forward_cached(x, h0, c0)?;
            let loss = cell_loss(&hn, &cn, &h.proj);
            if back {
                let dh = Tensor::from_vec(hn.shape(), h.proj[..48].to_vec())?;
                let dc = Tensor::from_vec(cn.shape(), h.proj[48..].to_vec())?;
                let (dx, dh0, dc0) = h.layer.backward(&cache, &dh, &dc)?;
                h.inputs[0].grad.add_assign(&dx);
                h.inputs[1].grad.add_assign(&dh0);
                h.inputs[2].grad.add_assign(&dc0);
            }
            Ok(loss)
        })
        .unwrap();
        report
    }
}

pub fn sigmoid_and_relu(seed: u64) -> GradCheckReport {
    {
        let mut r = rng(600 + seed);
        // Keep relu inputs away from the kink.
        let x = Param::new(Tensor::uniform(&[4, 5], 2.0, &mut r).map(|v: f64| {
            if v.abs() < 0.05 {
                v + 0.1
            } else {
                v
            }
        }));
        let mut h = harness(Stateless, vec![x], 20, &mut r);
        let report = gradcheck(&mut h, &GradCheckConfig::default(), |h, back| {
            let s = sigmoid(&h.inputs[0].value);
            let y = relu(&s.map(|v: f64| 4.0 * v - 2.0));
            if back {
                let dpre = relu_backward(&y, &dy(&y, &h.proj)).map(|v: f64| 4.0 * v);
                h.inputs[0].grad.add_assign(&sigmoid_backward(&s, &dpre));
            }
            Ok(dot(&y, &h.proj))
        })
        .unwrap();
        report
    }
}

pub fn bce(seed: u64) -> GradCheckReport {
    {
        let mut r = rng(700 + seed);
        let p = Param::new(Tensor::uniform(&[12], 0.45, &mut r).map(|v| v + 0.5));
        let target: Vec<f64> = (0..12).map(|_| f64::from(r.gen_bool(0.5) as u8)).collect();
        let mut h = harness(Stateless, vec![p], 0, &mut r);
        let report = gradcheck(&mut h, &GradCheckConfig::default(), |h, back| {
            let pred = h.inputs[0].value.data().to_vec();
            if back {
                let g = Tensor::from_vec(&[12], bce_grad(&pred, &target, BCE_EPS)?)?;
                h.inputs[0].grad.add_assign(&g);
            }
            bce_loss(&pred, &target, BCE_EPS)
        })
        .unwrap();
        report
    }
}

/// End-to-end check of the toy AOI model, batch of two.
pub fn full_aoi_model() -> GradCheckReport {
    let spec = ModelSpec::toy(Variant::Aoi);
    let mut r = rng(800);
    let mut model = Model::<f64>::new(spec.clone(), &mut r).unwrap();
    let frames: Vec<Tensor<f64>> = (0..spec.t_obs)
        .map(|_| Tensor::uniform(&[2, 3, 8, 8], 1.0, &mut r).map(|v: f64| v.abs()))
        .collect();
    let target: Vec<f64> = (0..2 * spec.t_pred)
        .map(|i| f64::from((i % 7 < 3) as u8))
        .collect();
    let cfg = GradCheckConfig {
        max_entries: Some(12),
        seed: 3,
        ..GradCheckConfig::default()
    };
    let unwrap_nn = |e: firecast_core::models::ModelError| match e {
        firecast_core::models::ModelError::Nn(e) => e,
        other => panic!("{other}"),
    };
    gradcheck(&mut model, &cfg, |m, back| {
        let (probs, tape) = m.forward(&frames, Mode::Train).map_err(unwrap_nn)?;
        let loss = bce_loss(probs.data(), &target, BCE_EPS)?;
        if back {
            let d = Tensor::from_vec(probs.shape(), bce_grad(probs.data(), &target, BCE_EPS)?)?;
            m.backward(tape.as_ref().unwrap(), &d).map_err(unwrap_nn)?;
        }
        Ok::<f64, NnError>(loss)
    })
    .unwrap()
}
