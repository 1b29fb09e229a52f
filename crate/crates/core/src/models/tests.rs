use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::nn::{sigmoid_scalar, Module};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn frames<T: Scalar>(spec: &ModelSpec, n: usize, seed: u64) -> Vec<Tensor<T>> {
    let mut r = rng(seed);
    (0..spec.t_obs)
        .map(|_| {
            Tensor::<T>::uniform(&[n, 3, spec.height, spec.width], 1.0, &mut r).map(|v| v.abs())
        })
        .collect()
}

#[test]
fn paper_encoder_trace() {
    let spec = ModelSpec::paper(Variant::Aoi);
    assert_eq!(spec.encoder_trace().unwrap(), vec![123, 61, 30, 14, 6, 2]);
    assert_eq!(spec.feature_dim().unwrap(), 160 * 4);
    let c = ModelSpec::paper(Variant::ConvLstm);
    assert_eq!(c.encoder_output().unwrap(), (32, 61, 61));
}

#[test]
fn desk_and_toy_shapes() {
    assert_eq!(
        ModelSpec::desk(Variant::Aoi).encoder_trace().unwrap(),
        vec![32, 15, 8, 3, 2]
    );
    assert_eq!(
        ModelSpec::desk(Variant::ConvLstm).encoder_output().unwrap(),
        (16, 8, 8)
    );
    assert_eq!(
        ModelSpec::desk(Variant::ConvLstm).decoder_extent((8, 8)),
        (64, 64)
    );
    for v in Variant::ALL {
        ModelSpec::toy(v).validate().unwrap();
        ModelSpec::desk(v).validate().unwrap();
        ModelSpec::paper(v).validate().unwrap();
    }
}

#[test]
fn too_small_input_is_rejected() {
    let mut spec = ModelSpec::paper(Variant::Aoi);
    spec.height = 100;
    spec.width = 100;
    assert!(matches!(
        spec.validate(),
        Err(ModelError::InputTooSmall { block: 2, .. })
    ));
}

#[test]
fn hidden_width_is_fixed() {
    let mut spec = ModelSpec::toy(Variant::Aoi);
    spec.hidden = 32;
    assert!(matches!(
        spec.validate(),
        Err(ModelError::InvalidSpec {
            field: "hidden",
            ..
        })
    ));
}

#[test]
fn closed_form_params_match_instantiated_models() {
    for profile in ["toy", "desk", "paper"] {
        for v in Variant::ALL {
            let spec = ModelSpec::named(profile, v).unwrap();
            let model = Model::<f32>::new(spec.clone(), &mut rng(1)).unwrap();
            let n = model.num_trainable() as u64;
            assert_eq!(count_params(&spec).unwrap(), n, "{profile} {v}");
            assert_eq!(model.to_checkpoint().trainable_elements() as u64, n);
        }
    }
}

#[test]
fn paper_params_near_reference_budgets() {
    let expect = [
        (Variant::Aoi, 262_700.0),
        (Variant::Reconstruction, 295_600.0),
        (Variant::ConvLstm, 250_600.0),
    ];
    for (v, reference) in expect {
        let n = count_params(&ModelSpec::paper(v)).unwrap() as f64;
        assert!(
            (n / reference - 1.0).abs() <= 0.15,
            "{v}: {n} vs {reference}"
        );
    }
    assert_eq!(
        count_params(&ModelSpec::paper(Variant::Aoi)).unwrap(),
        254_145
    );
}

#[test]
fn lstm_parameter_arithmetic() {
    let p = cost::param_breakdown(&ModelSpec::paper(Variant::Aoi)).unwrap();
    assert_eq!(p.iter().find(|(n, _)| *n == "lstm").unwrap().1, 33_280);
}

#[test]
fn activation_ordering_and_ratio() {
    let a = |v| count_activations(&ModelSpec::paper(v), 10, 50).unwrap();
    let (aoi, rec, conv) = (
        a(Variant::Aoi),
        a(Variant::Reconstruction),
        a(Variant::ConvLstm),
    );
    assert!(aoi.total() < rec.total() && rec.total() < conv.total());
    assert!(conv.total() as f64 / aoi.total() as f64 >= 5.0);
    assert_eq!(conv.get("recurrent_state"), 60 * 2 * 64 * 61 * 61);
    assert_eq!(
        aoi.get("gates") + aoi.get("recurrent_state"),
        60 * (4 * 64 + 2 * 64)
    );
    assert!(conv.get("recurrent_state") > aoi.total());
}

#[test]
fn observation_only_activations() {
    for v in Variant::ALL {
        let spec = ModelSpec::paper(v);
        let t = count_activations(&spec, 10, 0).unwrap();
        assert_eq!(t.get("decoder") + t.get("head"), 0);
        assert!(t.total() < count_activations(&spec, 10, 50).unwrap().total());
    }
}

#[test]
fn output_shapes_and_ranges() {
    for v in Variant::ALL {
        let spec = ModelSpec::toy(v);
        let mut model = Model::<f64>::new(spec.clone(), &mut rng(2)).unwrap();
        for mode in [Mode::Eval, Mode::Train] {
            let (p, tape) = model.forward(&frames(&spec, 2, 3), mode).unwrap();
            let expected = if v.is_map() {
                vec![2, 50, 8, 8]
            } else {
                vec![2, 50]
            };
            assert_eq!(p.shape(), &expected[..]);
            assert!(p.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
            assert_eq!(tape.is_some(), mode == Mode::Train);
        }
    }
}

#[test]
fn wrong_observation_length_is_rejected() {
    let spec = ModelSpec::toy(Variant::Aoi);
    let mut model = Model::<f32>::new(spec.clone(), &mut rng(2)).unwrap();
    let mut f = frames::<f32>(&spec, 1, 1);
    f.pop();
    assert!(matches!(
        model.forward(&f, Mode::Eval),
        Err(ModelError::ObservationLength {
            expected: 10,
            got: 9
        })
    ));
}

#[test]
fn zeroed_network_outputs_head_bias() {
    let spec = ModelSpec::toy(Variant::Aoi);
    let mut model = AoiModel::<f64>::new(spec.clone(), &mut rng(4)).unwrap();
    model.visit_mut("", &mut |_, p| {
        if p.is_trainable() {
            p.value.fill(0.0);
        }
    });
    model.head2.bias.value.fill(-1.3);
    let (p, _) = model.forward(&frames(&spec, 3, 5), Mode::Eval).unwrap();
    let expected = sigmoid_scalar(-1.3f64);
    assert!(p.data().iter().all(|&x| (x - expected).abs() < 1e-15));
}

#[test]
fn black_frame_features_depend_only_on_biases() {
    let spec = ModelSpec::desk(Variant::Aoi);
    let black = Tensor::<f64>::zeros(&[1, 3, 64, 64]);
    let mut a = DenseCore::<f64>::new(&spec, &mut rng(6)).unwrap();
    let mut b = DenseCore::<f64>::new(&spec, &mut rng(7)).unwrap();
    for (ba, bb) in a.encoder.iter().zip(b.encoder.iter_mut()) {
        bb.conv.bias = ba.conv.bias.clone();
    }
    // Only the first block sees a black input; deeper blocks see bias maps.
    let fa = a.encoder[0].forward(&black, Mode::Eval).unwrap().0;
    let fb = b.encoder[0].forward(&black, Mode::Eval).unwrap().0;
    assert_eq!(fa, fb);
    let bias = a.encoder[0].conv.bias.value.data()[0].max(0.0) / (1.0 + crate::nn::BN_EPS).sqrt();
    assert!((fa.data()[0] - bias).abs() < 1e-12);
}

#[test]
fn distant_pixel_outside_receptive_field() {
    let spec = ModelSpec::desk(Variant::Aoi);
    let mut core = DenseCore::<f64>::new(&spec, &mut rng(8)).unwrap();
    let x = Tensor::<f64>::uniform(&[1, 3, 64, 64], 1.0, &mut rng(9));
    let mut y = x.clone();
    // Pixel (63, 63) of channel 0.
    y.data_mut()[63 * 64 + 63] += 5.0;
    let a = core.encoder[0].forward(&x, Mode::Eval).unwrap().0;
    let b = core.encoder[0].forward(&y, Mode::Eval).unwrap().0;
    // Unit (0, 0) of the pooled map sees input rows and columns 0..=7.
    for c in 0..16 {
        assert_eq!(a.data()[c * 15 * 15], b.data()[c * 15 * 15]);
    }
    assert_ne!(a, b);
}

#[test]
fn map_variants_extract_aoi_pixel() {
    let spec = ModelSpec::toy(Variant::Reconstruction);
    let mut model = Model::<f64>::new(spec.clone(), &mut rng(10)).unwrap();
    let (p, _) = model.forward(&frames(&spec, 2, 1), Mode::Eval).unwrap();
    let q = model.aoi_probabilities(&p, AoiSpec::new(3, 5)).unwrap();
    assert_eq!(q.shape(), &[2, 50]);
    assert_eq!(q.data()[50 + 7], p.data()[((50 + 7) * 8 + 5) * 8 + 3]);
}

#[test]
fn checkpoint_round_trip_rebuilds_model() {
    for v in Variant::ALL {
        let spec = ModelSpec::toy(v);
        let model = Model::<f32>::new(spec, &mut rng(11)).unwrap();
        let bytes = model.to_checkpoint().encode();
        let back =
            Model::<f32>::from_checkpoint(&crate::nn::Checkpoint::decode(&bytes).unwrap()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_checkpoint().encode(), bytes);
    }
}

#[test]
fn train_and_eval_modes_agree_on_batch_statistics_free_parts() {
    // With a fresh model the running stats are (0, 1); a train-mode pass must
    // move them while leaving the parameters alone.
    let spec = ModelSpec::toy(Variant::Aoi);
    let mut model = AoiModel::<f64>::new(spec.clone(), &mut rng(12)).unwrap();
    let before = model.clone();
    model.forward(&frames(&spec, 2, 13), Mode::Train).unwrap();
    assert_ne!(
        model.core.encoder[0].bn.running_mean,
        before.core.encoder[0].bn.running_mean
    );
    assert_eq!(model.core.encoder[0].conv, before.core.encoder[0].conv);
}
