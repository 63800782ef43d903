use radview_core::archzoo::{build_mini_resnet, MiniResNetConfig};
use radview_core::augment::AugmentConfig;
use radview_core::engine::OptimizerConfig;
use radview_core::synthgen::{generate_corpus, PhantomConfig};
use radview_core::trainer::{evaluate, train, LabeledImage, TrainConfig};

#[test]
fn memorizes_one_image_per_class() {
    let side = 32;
    let cfg = PhantomConfig { side, ..PhantomConfig::default() };
    let data: Vec<LabeledImage> = generate_corpus(1, &cfg)
        .into_iter()
        .map(|(m, p)| LabeledImage { image: p.image, label: m.label.class_index() })
        .collect();
    assert_eq!(data.len(), 48);
    let mc = MiniResNetConfig {
        stage_blocks: vec![1, 1],
        base_channels: 8,
        input_side: side,
        input_channels: 1,
        num_classes: 48,
    };
    let mut model = build_mini_resnet::<f32>(&mc, 1).unwrap();
    let tc = TrainConfig {
        epochs: 250,
        batch_size: 4,
        optimizer: OptimizerConfig { lr: 0.05, momentum: 0.9 },
        seed: 2,
        augment: AugmentConfig::disabled(side),
        augment_enabled: false,
    };
    let out = train(&mut model, &data, &[], &tc, |_, _| {}).unwrap();
    let last = out.history.last().unwrap();
    assert_eq!(last.train_acc, 1.0);
    assert!(last.train_loss < 0.01, "{}", last.train_loss);
    let e = evaluate(&model, &data, side).unwrap();
    assert!(e.predictions.iter().zip(&data).all(|(p, s)| *p == s.label));
}
