//! The trainable mini-ResNet and static layer-graph descriptors of the six
//! reference classification architectures.
//!
//! Descriptors follow the reference implementations layer for layer, so
//! [`count_parameters`] reproduces their published sizes exactly: batch norm
//! contributes scale and shift per channel, running statistics are excluded,
//! and convolutions are bias-free except inside squeeze-excite blocks.
//! MobileNet V3 is the Large variant; Inception V3 includes the auxiliary
//! classifier.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::engine::{BatchNorm2d, Conv2d, EngineError, Graph, LayerSpec, Linear, Model, NodeId, Pool2d, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArchError {
    #[error("unknown architecture {0:?}")]
    UnknownArchitecture(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("Inception V3 count is required as the baseline")]
    MissingBaseline,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchName {
    DenseNet121,
    InceptionV3,
    MobileNetV3,
    ResNet18,
    ResNet34,
    ResNet50,
}

impl ArchName {
    pub const ALL: [ArchName; 6] = [
        ArchName::DenseNet121,
        ArchName::InceptionV3,
        ArchName::MobileNetV3,
        ArchName::ResNet18,
        ArchName::ResNet34,
        ArchName::ResNet50,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            ArchName::DenseNet121 => "DenseNet-121",
            ArchName::InceptionV3 => "Inception V3",
            ArchName::MobileNetV3 => "MobileNet V3",
            ArchName::ResNet18 => "ResNet-18",
            ArchName::ResNet34 => "ResNet-34",
            ArchName::ResNet50 => "ResNet-50",
        }
    }

    /// Native input side of the reference implementation.
    pub fn input_side(self) -> usize {
        match self {
            ArchName::InceptionV3 => 299,
            _ => 224,
        }
    }

    /// Whether the architecture can be built as a trainable [`Model`].
    pub fn is_trainable(self) -> bool {
        matches!(self, ArchName::ResNet18 | ArchName::ResNet34 | ArchName::ResNet50)
    }
}

impl fmt::Display for ArchName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for ArchName {
    type Err = ArchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_uppercase())
            .collect();
        match key.as_str() {
            "DENSENET121" => Ok(ArchName::DenseNet121),
            "INCEPTIONV3" => Ok(ArchName::InceptionV3),
            "MOBILENETV3" | "MOBILENETV3LARGE" => Ok(ArchName::MobileNetV3),
            "RESNET18" => Ok(ArchName::ResNet18),
            "RESNET34" => Ok(ArchName::ResNet34),
            "RESNET50" => Ok(ArchName::ResNet50),
            _ => Err(ArchError::UnknownArchitecture(s.into())),
        }
    }
}

/// Static layer graph of a named architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchDescriptor {
    pub name: ArchName,
    pub graph: Graph,
    pub num_classes: usize,
    pub input_channels: usize,
}

impl ArchDescriptor {
    pub fn parameter_count(&self) -> u64 {
        count_parameters(&self.graph)
    }
}

/// Learnable parameter count of a layer graph.
pub fn count_parameters(graph: &Graph) -> u64 {
    graph.parameter_count()
}

/// Ratio of each count to the Inception V3 count, rounded to two decimals.
pub fn relative_parameters(counts: &[(ArchName, u64)]) -> Result<Vec<(ArchName, f64)>, ArchError> {
    let base = counts
        .iter()
        .find(|(n, _)| *n == ArchName::InceptionV3)
        .map(|(_, c)| *c)
        .filter(|&c| c > 0)
        .ok_or(ArchError::MissingBaseline)?;
    Ok(counts
        .iter()
        .map(|&(n, c)| (n, libm::round(c as f64 / base as f64 * 100.0) / 100.0))
        .collect())
}

pub fn describe_architecture(name: ArchName, num_classes: usize, input_channels: usize) -> Result<ArchDescriptor, ArchError> {
    if num_classes == 0 || input_channels == 0 {
        return Err(ArchError::BadConfig(format!(
            "num_classes {num_classes}, input_channels {input_channels}"
        )));
    }
    let side = name.input_side();
    let graph = match name {
        ArchName::ResNet18 => resnet(Block::Basic, [2, 2, 2, 2], num_classes, input_channels, side)?,
        ArchName::ResNet34 => resnet(Block::Basic, [3, 4, 6, 3], num_classes, input_channels, side)?,
        ArchName::ResNet50 => resnet(Block::Bottleneck, [3, 4, 6, 3], num_classes, input_channels, side)?,
        ArchName::DenseNet121 => densenet121(num_classes, input_channels, side)?,
        ArchName::InceptionV3 => inception_v3(num_classes, input_channels, side)?,
        ArchName::MobileNetV3 => mobilenet_v3_large(num_classes, input_channels, side)?,
    };
    Ok(ArchDescriptor {
        name,
        graph,
        num_classes,
        input_channels,
    })
}

/// Graph builder with helpers for the common conv → BN → activation pattern.
struct Net {
    g: Graph,
}

#[derive(Clone, Copy, PartialEq)]
enum Act {
    None,
    Relu,
    Hardswish,
}

impl Net {
    fn new(channels: usize, side: usize) -> Self {
        Net {
            g: Graph::new(&[channels, side, side]),
        }
    }

    fn channels(&self, id: NodeId) -> usize {
        self.g.shape_of(id)[0]
    }

    fn add(&mut self, name: &str, spec: LayerSpec, inputs: &[NodeId]) -> Result<NodeId, ArchError> {
        Ok(self.g.push(name, spec, inputs)?)
    }

    fn act(&mut self, name: &str, x: NodeId, act: Act) -> Result<NodeId, ArchError> {
        match act {
            Act::None => Ok(x),
            Act::Relu => self.add(&format!("{name}.relu"), LayerSpec::Relu, &[x]),
            Act::Hardswish => self.add(&format!("{name}.hswish"), LayerSpec::Hardswish, &[x]),
        }
    }

    fn conv_bn(&mut self, name: &str, x: NodeId, conv: Conv2d, act: Act) -> Result<NodeId, ArchError> {
        let c = self.add(&format!("{name}.conv"), LayerSpec::Conv2d(conv), &[x])?;
        let b = self.add(
            &format!("{name}.bn"),
            LayerSpec::BatchNorm2d(BatchNorm2d { channels: conv.out_channels }),
            &[c],
        )?;
        self.act(name, b, act)
    }

    fn conv_bn_relu(&mut self, name: &str, x: NodeId, out: usize, k: usize, s: usize, p: usize) -> Result<NodeId, ArchError> {
        let cin = self.channels(x);
        self.conv_bn(name, x, Conv2d::new(cin, out, k, s, p), Act::Relu)
    }

    fn rect_bn_relu(&mut self, name: &str, x: NodeId, out: usize, kh: usize, kw: usize) -> Result<NodeId, ArchError> {
        let cin = self.channels(x);
        self.conv_bn(name, x, Conv2d::rect(cin, out, kh, kw), Act::Relu)
    }

    fn maxpool(&mut self, name: &str, x: NodeId, kernel: usize, stride: usize, padding: usize) -> Result<NodeId, ArchError> {
        self.add(name, LayerSpec::MaxPool2d(Pool2d { kernel, stride, padding }), &[x])
    }

    fn avgpool(&mut self, name: &str, x: NodeId, kernel: usize, stride: usize, padding: usize) -> Result<NodeId, ArchError> {
        self.add(name, LayerSpec::AvgPool2d(Pool2d { kernel, stride, padding }), &[x])
    }

    fn head(&mut self, x: NodeId, num_classes: usize) -> Result<NodeId, ArchError> {
        let pooled = self.add("avgpool", LayerSpec::GlobalAvgPool, &[x])?;
        self.linear("fc", pooled, num_classes)
    }

    fn linear(&mut self, name: &str, x: NodeId, out: usize) -> Result<NodeId, ArchError> {
        let in_features = self.g.shape_of(x)[0];
        self.add(
            name,
            LayerSpec::Linear(Linear {
                in_features,
                out_features: out,
                bias: true,
            }),
            &[x],
        )
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Block {
    Basic,
    Bottleneck,
}

fn resnet(block: Block, layers: [usize; 4], num_classes: usize, channels: usize, side: usize) -> Result<Graph, ArchError> {
    let mut net = Net::new(channels, side);
    let mut x = net.conv_bn("stem", NodeId::INPUT, Conv2d::new(channels, 64, 7, 2, 3), Act::Relu)?;
    x = net.maxpool("stem.pool", x, 3, 2, 1)?;
    let expansion = if block == Block::Basic { 1 } else { 4 };
    for (stage, &blocks) in layers.iter().enumerate() {
        let width = 64 << stage;
        for b in 0..blocks {
            let stride = if stage > 0 && b == 0 { 2 } else { 1 };
            let name = format!("layer{}.{b}", stage + 1);
            let cin = net.channels(x);
            let out = width * expansion;
            let body = match block {
                Block::Basic => {
                    let h = net.conv_bn_relu(&format!("{name}.1"), x, width, 3, stride, 1)?;
                    net.conv_bn(&format!("{name}.2"), h, Conv2d::new(width, width, 3, 1, 1), Act::None)?
                }
                Block::Bottleneck => {
                    let h = net.conv_bn_relu(&format!("{name}.1"), x, width, 1, 1, 0)?;
                    let h = net.conv_bn_relu(&format!("{name}.2"), h, width, 3, stride, 1)?;
                    net.conv_bn(&format!("{name}.3"), h, Conv2d::new(width, out, 1, 1, 0), Act::None)?
                }
            };
            let shortcut = if stride != 1 || cin != out {
                net.conv_bn(&format!("{name}.down"), x, Conv2d::new(cin, out, 1, stride, 0), Act::None)?
            } else {
                x
            };
            let sum = net.add(&format!("{name}.add"), LayerSpec::Add, &[body, shortcut])?;
            x = net.act(&name, sum, Act::Relu)?;
        }
    }
    net.head(x, num_classes)?;
    Ok(net.g)
}

fn densenet121(num_classes: usize, channels: usize, side: usize) -> Result<Graph, ArchError> {
    const GROWTH: usize = 32;
    const BN_SIZE: usize = 4;
    let mut net = Net::new(channels, side);
    let mut x = net.conv_bn("features.0", NodeId::INPUT, Conv2d::new(channels, 64, 7, 2, 3), Act::Relu)?;
    x = net.maxpool("features.pool0", x, 3, 2, 1)?;
    let blocks = [6, 12, 24, 16];
    for (bi, &layers) in blocks.iter().enumerate() {
        let mut features = alloc::vec![x];
        for li in 0..layers {
            let name = format!("denseblock{}.layer{}", bi + 1, li + 1);
            let cat = if features.len() == 1 {
                features[0]
            } else {
                net.add(&format!("{name}.cat"), LayerSpec::Concat, &features)?
            };
            let cin = net.channels(cat);
            // Pre-activation: BN → ReLU → conv.
            let n1 = net.add(&format!("{name}.norm1"), LayerSpec::BatchNorm2d(BatchNorm2d { channels: cin }), &[cat])?;
            let r1 = net.act(&format!("{name}.1"), n1, Act::Relu)?;
            let c1 = net.add(
                &format!("{name}.conv1"),
                LayerSpec::Conv2d(Conv2d::new(cin, BN_SIZE * GROWTH, 1, 1, 0)),
                &[r1],
            )?;
            let n2 = net.add(
                &format!("{name}.norm2"),
                LayerSpec::BatchNorm2d(BatchNorm2d { channels: BN_SIZE * GROWTH }),
                &[c1],
            )?;
            let r2 = net.act(&format!("{name}.2"), n2, Act::Relu)?;
            let c2 = net.add(
                &format!("{name}.conv2"),
                LayerSpec::Conv2d(Conv2d::new(BN_SIZE * GROWTH, GROWTH, 3, 1, 1)),
                &[r2],
            )?;
            features.push(c2);
        }
        x = net.add(&format!("denseblock{}.out", bi + 1), LayerSpec::Concat, &features)?;
        let c = net.channels(x);
        if bi + 1 < blocks.len() {
            let name = format!("transition{}", bi + 1);
            let n = net.add(&format!("{name}.norm"), LayerSpec::BatchNorm2d(BatchNorm2d { channels: c }), &[x])?;
            let r = net.act(&name, n, Act::Relu)?;
            let cv = net.add(&format!("{name}.conv"), LayerSpec::Conv2d(Conv2d::new(c, c / 2, 1, 1, 0)), &[r])?;
            x = net.avgpool(&format!("{name}.pool"), cv, 2, 2, 0)?;
        } else {
            let n = net.add("norm5", LayerSpec::BatchNorm2d(BatchNorm2d { channels: c }), &[x])?;
            x = net.act("norm5", n, Act::Relu)?;
        }
    }
    net.head(x, num_classes)?;
    Ok(net.g)
}

fn inception_v3(num_classes: usize, channels: usize, side: usize) -> Result<Graph, ArchError> {
    let mut net = Net::new(channels, side);
    let mut x = net.conv_bn_relu("Conv2d_1a_3x3", NodeId::INPUT, 32, 3, 2, 0)?;
    x = net.conv_bn_relu("Conv2d_2a_3x3", x, 32, 3, 1, 0)?;
    x = net.conv_bn_relu("Conv2d_2b_3x3", x, 64, 3, 1, 1)?;
    x = net.maxpool("maxpool1", x, 3, 2, 0)?;
    x = net.conv_bn_relu("Conv2d_3b_1x1", x, 80, 1, 1, 0)?;
    x = net.conv_bn_relu("Conv2d_4a_3x3", x, 192, 3, 1, 0)?;
    x = net.maxpool("maxpool2", x, 3, 2, 0)?;
    x = inception_a(&mut net, "Mixed_5b", x, 32)?;
    x = inception_a(&mut net, "Mixed_5c", x, 64)?;
    x = inception_a(&mut net, "Mixed_5d", x, 64)?;
    x = inception_b(&mut net, "Mixed_6a", x)?;
    x = inception_c(&mut net, "Mixed_6b", x, 128)?;
    x = inception_c(&mut net, "Mixed_6c", x, 160)?;
    x = inception_c(&mut net, "Mixed_6d", x, 160)?;
    x = inception_c(&mut net, "Mixed_6e", x, 192)?;

    // Auxiliary classifier branching off Mixed_6e.
    let a = net.avgpool("AuxLogits.pool", x, 5, 3, 0)?;
    let a = net.conv_bn_relu("AuxLogits.conv0", a, 128, 1, 1, 0)?;
    let a = net.conv_bn_relu("AuxLogits.conv1", a, 768, 5, 1, 0)?;
    let a = net.add("AuxLogits.gap", LayerSpec::GlobalAvgPool, &[a])?;
    net.linear("AuxLogits.fc", a, num_classes)?;

    x = inception_d(&mut net, "Mixed_7a", x)?;
    x = inception_e(&mut net, "Mixed_7b", x)?;
    x = inception_e(&mut net, "Mixed_7c", x)?;
    net.head(x, num_classes)?;
    Ok(net.g)
}

fn inception_a(net: &mut Net, name: &str, x: NodeId, pool_features: usize) -> Result<NodeId, ArchError> {
    let b1 = net.conv_bn_relu(&format!("{name}.branch1x1"), x, 64, 1, 1, 0)?;
    let b5 = net.conv_bn_relu(&format!("{name}.branch5x5_1"), x, 48, 1, 1, 0)?;
    let b5 = net.conv_bn_relu(&format!("{name}.branch5x5_2"), b5, 64, 5, 1, 2)?;
    let b3 = net.conv_bn_relu(&format!("{name}.branch3x3dbl_1"), x, 64, 1, 1, 0)?;
    let b3 = net.conv_bn_relu(&format!("{name}.branch3x3dbl_2"), b3, 96, 3, 1, 1)?;
    let b3 = net.conv_bn_relu(&format!("{name}.branch3x3dbl_3"), b3, 96, 3, 1, 1)?;
    let bp = net.avgpool(&format!("{name}.pool"), x, 3, 1, 1)?;
    let bp = net.conv_bn_relu(&format!("{name}.branch_pool"), bp, pool_features, 1, 1, 0)?;
    net.add(&format!("{name}.cat"), LayerSpec::Concat, &[b1, b5, b3, bp])
}

fn inception_b(net: &mut Net, name: &str, x: NodeId) -> Result<NodeId, ArchError> {
    let b3 = net.conv_bn_relu(&format!("{name}.branch3x3"), x, 384, 3, 2, 0)?;
    let bd = net.conv_bn_relu(&format!("{name}.branch3x3dbl_1"), x, 64, 1, 1, 0)?;
    let bd = net.conv_bn_relu(&format!("{name}.branch3x3dbl_2"), bd, 96, 3, 1, 1)?;
    let bd = net.conv_bn_relu(&format!("{name}.branch3x3dbl_3"), bd, 96, 3, 2, 0)?;
    let bp = net.maxpool(&format!("{name}.pool"), x, 3, 2, 0)?;
    net.add(&format!("{name}.cat"), LayerSpec::Concat, &[b3, bd, bp])
}

fn inception_c(net: &mut Net, name: &str, x: NodeId, c7: usize) -> Result<NodeId, ArchError> {
    let b1 = net.conv_bn_relu(&format!("{name}.branch1x1"), x, 192, 1, 1, 0)?;
    let b7 = net.conv_bn_relu(&format!("{name}.branch7x7_1"), x, c7, 1, 1, 0)?;
    let b7 = net.rect_bn_relu(&format!("{name}.branch7x7_2"), b7, c7, 1, 7)?;
    let b7 = net.rect_bn_relu(&format!("{name}.branch7x7_3"), b7, 192, 7, 1)?;
    let bd = net.conv_bn_relu(&format!("{name}.branch7x7dbl_1"), x, c7, 1, 1, 0)?;
    let bd = net.rect_bn_relu(&format!("{name}.branch7x7dbl_2"), bd, c7, 7, 1)?;
    let bd = net.rect_bn_relu(&format!("{name}.branch7x7dbl_3"), bd, c7, 1, 7)?;
    let bd = net.rect_bn_relu(&format!("{name}.branch7x7dbl_4"), bd, c7, 7, 1)?;
    let bd = net.rect_bn_relu(&format!("{name}.branch7x7dbl_5"), bd, 192, 1, 7)?;
    let bp = net.avgpool(&format!("{name}.pool"), x, 3, 1, 1)?;
    let bp = net.conv_bn_relu(&format!("{name}.branch_pool"), bp, 192, 1, 1, 0)?;
    net.add(&format!("{name}.cat"), LayerSpec::Concat, &[b1, b7, bd, bp])
}

fn inception_d(net: &mut Net, name: &str, x: NodeId) -> Result<NodeId, ArchError> {
    let b3 = net.conv_bn_relu(&format!("{name}.branch3x3_1"), x, 192, 1, 1, 0)?;
    let b3 = net.conv_bn_relu(&format!("{name}.branch3x3_2"), b3, 320, 3, 2, 0)?;
    let b7 = net.conv_bn_relu(&format!("{name}.branch7x7x3_1"), x, 192, 1, 1, 0)?;
    let b7 = net.rect_bn_relu(&format!("{name}.branch7x7x3_2"), b7, 192, 1, 7)?;
    let b7 = net.rect_bn_relu(&format!("{name}.branch7x7x3_3"), b7, 192, 7, 1)?;
    let b7 = net.conv_bn_relu(&format!("{name}.branch7x7x3_4"), b7, 192, 3, 2, 0)?;
    let bp = net.maxpool(&format!("{name}.pool"), x, 3, 2, 0)?;
    net.add(&format!("{name}.cat"), LayerSpec::Concat, &[b3, b7, bp])
}

fn inception_e(net: &mut Net, name: &str, x: NodeId) -> Result<NodeId, ArchError> {
    let b1 = net.conv_bn_relu(&format!("{name}.branch1x1"), x, 320, 1, 1, 0)?;
    let b3 = net.conv_bn_relu(&format!("{name}.branch3x3_1"), x, 384, 1, 1, 0)?;
    let b3a = net.rect_bn_relu(&format!("{name}.branch3x3_2a"), b3, 384, 1, 3)?;
    let b3b = net.rect_bn_relu(&format!("{name}.branch3x3_2b"), b3, 384, 3, 1)?;
    let bd = net.conv_bn_relu(&format!("{name}.branch3x3dbl_1"), x, 448, 1, 1, 0)?;
    let bd = net.conv_bn_relu(&format!("{name}.branch3x3dbl_2"), bd, 384, 3, 1, 1)?;
    let bda = net.rect_bn_relu(&format!("{name}.branch3x3dbl_3a"), bd, 384, 1, 3)?;
    let bdb = net.rect_bn_relu(&format!("{name}.branch3x3dbl_3b"), bd, 384, 3, 1)?;
    let bp = net.avgpool(&format!("{name}.pool"), x, 3, 1, 1)?;
    let bp = net.conv_bn_relu(&format!("{name}.branch_pool"), bp, 192, 1, 1, 0)?;
    net.add(&format!("{name}.cat"), LayerSpec::Concat, &[b1, b3a, b3b, bda, bdb, bp])
}

/// Rounds to the nearest multiple of 8, never dropping more than 10%.
fn make_divisible(v: usize) -> usize {
    let rounded = ((v + 4) / 8 * 8).max(8);
    if (rounded as f64) < 0.9 * v as f64 {
        rounded + 8
    } else {
        rounded
    }
}

fn mobilenet_v3_large(num_classes: usize, channels: usize, side: usize) -> Result<Graph, ArchError> {
    // (kernel, expanded, out, squeeze-excite, hardswish, stride)
    const BLOCKS: [(usize, usize, usize, bool, bool, usize); 15] = [
        (3, 16, 16, false, false, 1),
        (3, 64, 24, false, false, 2),
        (3, 72, 24, false, false, 1),
        (5, 72, 40, true, false, 2),
        (5, 120, 40, true, false, 1),
        (5, 120, 40, true, false, 1),
        (3, 240, 80, false, true, 2),
        (3, 200, 80, false, true, 1),
        (3, 184, 80, false, true, 1),
        (3, 184, 80, false, true, 1),
        (3, 480, 112, true, true, 1),
        (3, 672, 112, true, true, 1),
        (5, 672, 160, true, true, 2),
        (5, 960, 160, true, true, 1),
        (5, 960, 160, true, true, 1),
    ];
    let mut net = Net::new(channels, side);
    let mut x = net.conv_bn("features.0", NodeId::INPUT, Conv2d::new(channels, 16, 3, 2, 1), Act::Hardswish)?;
    for (i, &(k, exp, out, se, hs, stride)) in BLOCKS.iter().enumerate() {
        let name = format!("features.{}", i + 1);
        let act = if hs { Act::Hardswish } else { Act::Relu };
        let cin = net.channels(x);
        let mut h = x;
        if exp != cin {
            h = net.conv_bn(&format!("{name}.expand"), h, Conv2d::new(cin, exp, 1, 1, 0), act)?;
        }
        h = net.conv_bn(
            &format!("{name}.dw"),
            h,
            Conv2d::new(exp, exp, k, stride, (k - 1) / 2).with_groups(exp),
            act,
        )?;
        if se {
            let squeeze = make_divisible(exp / 4);
            let s = net.add(&format!("{name}.se.pool"), LayerSpec::GlobalAvgPool, &[h])?;
            let s = net.linear(&format!("{name}.se.fc1"), s, squeeze)?;
            let s = net.add(&format!("{name}.se.relu"), LayerSpec::Relu, &[s])?;
            let s = net.linear(&format!("{name}.se.fc2"), s, exp)?;
            let s = net.add(&format!("{name}.se.hsig"), LayerSpec::Hardsigmoid, &[s])?;
            h = net.add(&format!("{name}.se.scale"), LayerSpec::ChannelScale, &[h, s])?;
        }
        h = net.conv_bn(&format!("{name}.project"), h, Conv2d::new(exp, out, 1, 1, 0), Act::None)?;
        x = if stride == 1 && cin == out {
            net.add(&format!("{name}.add"), LayerSpec::Add, &[h, x])?
        } else {
            h
        };
    }
    let cin = net.channels(x);
    x = net.conv_bn("features.16", x, Conv2d::new(cin, 6 * cin, 1, 1, 0), Act::Hardswish)?;
    let pooled = net.add("avgpool", LayerSpec::GlobalAvgPool, &[x])?;
    let h = net.linear("classifier.0", pooled, 1280)?;
    let h = net.add("classifier.1", LayerSpec::Hardswish, &[h])?;
    net.linear("classifier.3", h, num_classes)?;
    Ok(net.g)
}

/// Hyperparameters of the trainable mini-ResNet.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MiniResNetConfig {
    /// Basic blocks per stage; stage `i` has `base_channels << i` channels.
    pub stage_blocks: Vec<usize>,
    pub base_channels: usize,
    pub input_side: usize,
    pub input_channels: usize,
    pub num_classes: usize,
}

impl MiniResNetConfig {
    /// Sides of at least this size get the 7×7/2 stem with a 3×3/2 max pool.
    pub const LARGE_STEM_MIN_SIDE: usize = 128;

    pub fn validate(&self) -> Result<(), ArchError> {
        if self.stage_blocks.is_empty() || self.stage_blocks.contains(&0) {
            return Err(ArchError::BadConfig(format!("stage_blocks {:?}", self.stage_blocks)));
        }
        if self.base_channels == 0 || self.input_channels == 0 || self.num_classes == 0 || self.input_side == 0 {
            return Err(ArchError::BadConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Layer graph of the mini-ResNet: stem, basic residual blocks (identity or
/// 1×1-projection shortcut), global average pool, linear head.
pub fn mini_resnet_graph(cfg: &MiniResNetConfig) -> Result<Graph, ArchError> {
    cfg.validate()?;
    let mut g = Graph::new(&[cfg.input_channels, cfg.input_side, cfg.input_side]);
    let bn = |c| LayerSpec::BatchNorm2d(BatchNorm2d { channels: c });
    let base = cfg.base_channels;
    if cfg.input_side >= MiniResNetConfig::LARGE_STEM_MIN_SIDE {
        g.chain("conv1", LayerSpec::Conv2d(Conv2d::new(cfg.input_channels, base, 7, 2, 3)))?;
        g.chain("bn1", bn(base))?;
        g.chain("relu1", LayerSpec::Relu)?;
        g.chain("maxpool", LayerSpec::MaxPool2d(Pool2d { kernel: 3, stride: 2, padding: 1 }))?;
    } else {
        g.chain("conv1", LayerSpec::Conv2d(Conv2d::new(cfg.input_channels, base, 3, 1, 1)))?;
        g.chain("bn1", bn(base))?;
        g.chain("relu1", LayerSpec::Relu)?;
    }
    let mut channels = base;
    for (stage, &blocks) in cfg.stage_blocks.iter().enumerate() {
        let width = base << stage;
        for b in 0..blocks {
            let stride = if stage > 0 && b == 0 { 2 } else { 1 };
            let p = format!("layer{}.{b}", stage + 1);
            let input = g.output();
            g.chain(format!("{p}.conv1"), LayerSpec::Conv2d(Conv2d::new(channels, width, 3, stride, 1)))?;
            g.chain(format!("{p}.bn1"), bn(width))?;
            g.chain(format!("{p}.relu1"), LayerSpec::Relu)?;
            g.chain(format!("{p}.conv2"), LayerSpec::Conv2d(Conv2d::new(width, width, 3, 1, 1)))?;
            let body = g.chain(format!("{p}.bn2"), bn(width))?;
            let shortcut = if stride != 1 || channels != width {
                g.push(
                    format!("{p}.downsample.conv"),
                    LayerSpec::Conv2d(Conv2d::new(channels, width, 1, stride, 0)),
                    &[input],
                )?;
                g.chain(format!("{p}.downsample.bn"), bn(width))?
            } else {
                input
            };
            g.push(format!("{p}.add"), LayerSpec::Add, &[body, shortcut])?;
            g.chain(format!("{p}.relu2"), LayerSpec::Relu)?;
            channels = width;
        }
    }
    g.chain("avgpool", LayerSpec::GlobalAvgPool)?;
    g.chain(
        "fc",
        LayerSpec::Linear(Linear {
            in_features: channels,
            out_features: cfg.num_classes,
            bias: true,
        }),
    )?;
    Ok(g)
}

pub fn build_mini_resnet<T: Scalar>(cfg: &MiniResNetConfig, seed: u64) -> Result<Model<T>, ArchError> {
    Ok(Model::new(mini_resnet_graph(cfg)?, seed)?)
}
