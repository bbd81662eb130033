use gmc::loss::{LossVariant, Temperature};
use gmc::model::{check_pipeline_gradients, Activation, GmcModel, ModelConfig, Pathway};
use gmc::synthdata::{generate, SynthConfig};
use gmc::Tensor;

fn tiny_config(activation: Activation) -> ModelConfig {
    ModelConfig {
        intermediate_dim: 4,
        latent_dim: 4,
        encoder_hidden: vec![8],
        head_hidden: vec![6],
        activation,
    }
}

fn tiny_data() -> gmc::synthdata::MultimodalDataset {
    generate(&SynthConfig {
        n_samples: 12,
        n_classes: 3,
        modality_dims: vec![5, 3],
        style_dim: 2,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let ds = tiny_data();
    let batch = ds.batch(&[0, 1, 2, 3, 4]).unwrap();
    for (variant, act) in [
        (LossVariant::Full, Activation::Swish),
        (LossVariant::Ablated, Activation::Swish),
    ] {
        let model = GmcModel::new(&ds.input_dims(), &tiny_config(act), 5).unwrap();
        let report = check_pipeline_gradients(
            &model,
            &batch,
            Temperature::new(0.5).unwrap(),
            variant,
            1e-6,
        )
        .unwrap();
        assert_eq!(report.elements_checked, model.param_count());
        assert!(report.passed(1e-5), "{variant}: {report:?}");
    }
}

#[test]
fn relu_encoders_also_check_out() {
    // Random weights keep pre-activations far from the kink for this input.
    let ds = tiny_data();
    let batch = ds.batch(&[5, 6, 7, 8]).unwrap();
    let model = GmcModel::new(&ds.input_dims(), &tiny_config(Activation::Relu), 2).unwrap();
    let report = check_pipeline_gradients(
        &model,
        &batch,
        Temperature::default(),
        LossVariant::Full,
        1e-6,
    )
    .unwrap();
    assert!(report.passed(1e-5), "{report:?}");
}

#[test]
fn golden_latents() {
    let model = GmcModel::new(&[3, 2], &tiny_config(Activation::Swish), 42).unwrap();
    let x = Tensor::from_rows(&[[0.5, -1.0, 2.0], [0.0, 0.25, -0.75]]).unwrap();
    let z = model.encode(Pathway::Modality(0), &x).unwrap();
    let xc = Tensor::from_rows(&[[0.5, -1.0, 2.0, 1.0, -1.0]]).unwrap();
    let zc = model.encode(Pathway::Complete, &xc).unwrap();
    // Recorded from the first build.
    const GOLDEN_Z: [f64; 8] = [
        0.32849209118497985,
        0.009142372814748726,
        -0.37048156237025653,
        -0.26333322328575587,
        0.08059788920696909,
        -0.2143089906703223,
        -0.2302081291510911,
        -0.27930829573538457,
    ];
    const GOLDEN_ZC: [f64; 4] = [
        0.25171588427109104,
        -0.06327755522180106,
        -0.37032125287365825,
        -0.2508762893333377,
    ];
    for (a, b) in z.data().iter().zip(GOLDEN_Z) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    for (a, b) in zc.data().iter().zip(GOLDEN_ZC) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}
