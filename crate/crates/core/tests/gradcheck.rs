use radview_core::archzoo::{build_mini_resnet, MiniResNetConfig};
use radview_core::engine::gradcheck::{finite_diff_check, widened_check, Objective};
use radview_core::engine::{BatchNorm2d, Conv2d, Graph, LayerSpec, Linear, Mode, Model, Pool2d, Scalar, Tensor};
use radview_core::rng::rng_from_seed;
use rand::Rng;

const TOL_F64: f64 = 1e-6;
const TOL_F32: f64 = 1e-3;
const EPS_F64: f64 = 1e-5;

fn random<T: Scalar>(shape: &[usize], seed: u64) -> Tensor<T> {
    let mut rng = rng_from_seed(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_f64(shape, &v).unwrap()
}

/// Single layer of `spec` (optionally behind a conv so it has parameters
/// upstream), then flatten and a linear head so cross-entropy applies.
fn single_layer(spec: LayerSpec, input: &[usize]) -> Graph {
    let mut g = Graph::new(input);
    g.chain("layer", spec).unwrap();
    let flat: usize = g.output_shape().iter().product();
    if g.output_shape().len() > 1 {
        g.chain("flatten", LayerSpec::Flatten).unwrap();
    }
    g.chain("head", LayerSpec::Linear(Linear { in_features: flat, out_features: 3, bias: true }))
        .unwrap();
    g
}

fn residual_add() -> Graph {
    let mut g = Graph::new(&[2, 4, 4]);
    let input = g.output();
    let conv = g
        .chain("conv", LayerSpec::Conv2d(Conv2d::new(2, 2, 3, 1, 1).with_bias()))
        .unwrap();
    g.push("add", LayerSpec::Add, &[conv, input]).unwrap();
    g.chain("flatten", LayerSpec::Flatten).unwrap();
    g.chain("head", LayerSpec::Linear(Linear { in_features: 32, out_features: 3, bias: true }))
        .unwrap();
    g
}

fn cases() -> Vec<(&'static str, Graph, Mode)> {
    let img = [2, 5, 5];
    vec![
        ("conv2d", single_layer(LayerSpec::Conv2d(Conv2d::new(2, 3, 3, 1, 1).with_bias()), &img), Mode::Eval),
        ("conv2d_strided", single_layer(LayerSpec::Conv2d(Conv2d::new(2, 3, 3, 2, 1)), &img), Mode::Eval),
        ("conv2d_1x1", single_layer(LayerSpec::Conv2d(Conv2d::new(2, 4, 1, 1, 0)), &img), Mode::Eval),
        ("relu", single_layer(LayerSpec::Relu, &img), Mode::Eval),
        (
            "maxpool2d",
            single_layer(LayerSpec::MaxPool2d(Pool2d { kernel: 3, stride: 2, padding: 1 }), &img),
            Mode::Eval,
        ),
        ("global_avg_pool", single_layer(LayerSpec::GlobalAvgPool, &img), Mode::Eval),
        ("flatten", single_layer(LayerSpec::Flatten, &img), Mode::Eval),
        ("linear", single_layer(LayerSpec::Linear(Linear { in_features: 6, out_features: 4, bias: true }), &[6]), Mode::Eval),
        ("batchnorm2d_train", single_layer(LayerSpec::BatchNorm2d(BatchNorm2d { channels: 2 }), &img), Mode::Train),
        ("batchnorm2d_eval", single_layer(LayerSpec::BatchNorm2d(BatchNorm2d { channels: 2 }), &img), Mode::Eval),
        ("add", residual_add(), Mode::Eval),
    ]
}

fn check_f64(graph: Graph, mode: Mode, seed: u64) -> f64 {
    let model: Model<f64> = Model::new(graph, seed).unwrap();
    let mut shape = vec![3];
    shape.extend_from_slice(model.graph().input_shape());
    let x = random::<f64>(&shape, seed + 100);
    finite_diff_check(&model, &x, Objective::CrossEntropy(&[0, 2, 1]), mode, EPS_F64)
        .unwrap()
        .max_relative_error
}

fn check_f32(graph: Graph, mode: Mode, seed: u64) -> f64 {
    let model: Model<f32> = Model::new(graph, seed).unwrap();
    let mut shape = vec![3];
    shape.extend_from_slice(model.graph().input_shape());
    let x = random::<f32>(&shape, seed + 100);
    widened_check(&model, &x, Objective::CrossEntropy(&[0, 2, 1]), mode, EPS_F64)
        .unwrap()
        .max_relative_error
}

#[test]
fn every_layer_kind_f64() {
    for (name, g, mode) in cases() {
        let err = check_f64(g, mode, 1);
        assert!(err <= TOL_F64, "{name}: {err:e}");
    }
}

#[test]
fn every_layer_kind_f32() {
    for (name, g, mode) in cases() {
        let err = check_f32(g, mode, 1);
        assert!(err <= TOL_F32, "{name}: {err:e}");
    }
}

fn two_block_config() -> MiniResNetConfig {
    MiniResNetConfig {
        stage_blocks: vec![1, 1],
        base_channels: 3,
        input_side: 8,
        input_channels: 1,
        num_classes: 4,
    }
}

fn resnet_error_f64(mode: Mode) -> f64 {
    let model = build_mini_resnet::<f64>(&two_block_config(), 5).unwrap();
    let x = random::<f64>(&[3, 1, 8, 8], 6);
    finite_diff_check(&model, &x, Objective::CrossEntropy(&[3, 0, 1]), mode, EPS_F64)
        .unwrap()
        .max_relative_error
}

fn resnet_error_f32(mode: Mode) -> f64 {
    let model = build_mini_resnet::<f32>(&two_block_config(), 5).unwrap();
    let x = random::<f32>(&[3, 1, 8, 8], 6);
    widened_check(&model, &x, Objective::CrossEntropy(&[3, 0, 1]), mode, EPS_F64)
        .unwrap()
        .max_relative_error
}

#[test]
fn two_block_mini_resnet_f64() {
    for mode in [Mode::Train, Mode::Eval] {
        let err = resnet_error_f64(mode);
        assert!(err <= TOL_F64, "{mode:?}: {err:e}");
    }
}

#[test]
fn two_block_mini_resnet_f32() {
    for mode in [Mode::Train, Mode::Eval] {
        let err = resnet_error_f32(mode);
        assert!(err <= TOL_F32, "{mode:?}: {err:e}");
    }
}
