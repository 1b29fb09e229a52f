mod common;

use common::grad::{self, LAYERS, LAYER_TOL, MODEL_TOL};

fn check(name: &str) {
    let (_, f) = LAYERS
        .iter()
        .find(|(n, _)| *n == name)
        .expect("known layer");
    for seed in 0..grad::INSTANCES {
        let report = f(seed);
        assert!(report.checked > 0, "{name} #{seed}: nothing checked");
        assert!(report.passes(LAYER_TOL), "{name} #{seed}: {report:?}");
    }
}

#[test]
fn conv2d() {
    check("conv2d");
}

#[test]
fn maxpool() {
    check("maxpool");
}

#[test]
fn batchnorm() {
    check("batchnorm");
}

#[test]
fn linear() {
    check("linear");
}

#[test]
fn lstm_cell() {
    check("lstm_cell");
}

#[test]
fn convlstm_cell() {
    check("convlstm_cell");
}

#[test]
fn sigmoid_and_relu() {
    check("sigmoid/relu");
}

#[test]
fn bce() {
    check("bce");
}

#[test]
fn full_aoi_model_on_toy_frames() {
    let report = grad::full_aoi_model();
    assert!(report.checked > 100, "{report:?}");
    assert!(report.passes(MODEL_TOL), "{report:?}");
}
