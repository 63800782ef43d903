//! Static layer graphs and trainable models built on them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layer::{layer_backward, layer_forward, BnState, LayerCache, LayerSpec, Mode};
use super::{shape_err, EngineError, Result, Scalar, Tensor};

/// Index of a value in a [`Graph`]: `0` is the graph input, `i + 1` is the
/// output of node `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const INPUT: NodeId = NodeId(0);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub spec: LayerSpec,
    pub inputs: Vec<NodeId>,
    /// Per-sample output shape.
    pub shape: Vec<usize>,
}

/// A DAG of layers in topological order with per-sample shape annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    input_shape: Vec<usize>,
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new(input_shape: &[usize]) -> Self {
        Graph {
            input_shape: input_shape.to_vec(),
            nodes: Vec::new(),
        }
    }

    /// Appends a node; inputs must already exist, which keeps the graph acyclic.
    pub fn push(&mut self, name: impl Into<String>, spec: LayerSpec, inputs: &[NodeId]) -> Result<NodeId> {
        let name = name.into();
        let next = self.nodes.len() + 1;
        if let Some(bad) = inputs.iter().find(|id| id.0 >= next) {
            return Err(shape_err(format!("node {name} refers to unknown input {bad:?}")));
        }
        if self.nodes.iter().any(|n| n.name == name) {
            return Err(EngineError::BadLayer(format!("duplicate node name {name}")));
        }
        let shapes: Vec<&[usize]> = inputs.iter().map(|&id| self.shape_of(id)).collect();
        let shape = spec
            .output_shape(&shapes)
            .map_err(|e| shape_err(format!("{name}: {e}")))?;
        self.nodes.push(Node {
            name,
            spec,
            inputs: inputs.to_vec(),
            shape,
        });
        Ok(NodeId(next))
    }

    /// Appends a node fed by the most recent value.
    pub fn chain(&mut self, name: impl Into<String>, spec: LayerSpec) -> Result<NodeId> {
        let last = self.output();
        self.push(name, spec, &[last])
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        id.0.checked_sub(1).and_then(|i| self.nodes.get(i))
    }

    pub fn shape_of(&self, id: NodeId) -> &[usize] {
        match self.node(id) {
            Some(n) => &n.shape,
            None => &self.input_shape,
        }
    }

    /// The last value in the graph.
    pub fn output(&self) -> NodeId {
        NodeId(self.nodes.len())
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shape_of(self.output())
    }

    pub fn parameter_count(&self) -> u64 {
        self.nodes.iter().map(|n| n.spec.parameter_count()).sum()
    }

    pub fn is_trainable(&self) -> bool {
        self.nodes.iter().all(|n| n.spec.is_trainable_kind())
    }

    /// Nodes that read the value `id`.
    pub fn consumers(&self, id: NodeId) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.inputs.contains(&id))
            .map(|(i, n)| (NodeId(i + 1), n))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Slots {
    params: Range<usize>,
    buffers: Range<usize>,
}

/// A trainable graph with its parameters and batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    graph: Graph,
    params: Vec<Tensor<T>>,
    param_names: Vec<String>,
    buffers: Vec<Tensor<T>>,
    buffer_names: Vec<String>,
    slots: Vec<Slots>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    input: Tensor<T>,
    outputs: Vec<Tensor<T>>,
    caches: Vec<LayerCache<T>>,
}

impl<T: Scalar> ForwardPass<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.outputs.last().unwrap_or(&self.input)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        match id.0 {
            0 => &self.input,
            i => &self.outputs[i - 1],
        }
    }
}

/// Gradients aligned with [`Model::params`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub params: Vec<Tensor<T>>,
    pub input: Option<Tensor<T>>,
}

impl<T: Scalar> Model<T> {
    /// Allocates parameters: He-normal conv/linear weights, zero biases,
    /// batch-norm scale 1 and shift 0, running mean 0 and variance 1.
    pub fn new(graph: Graph, seed: u64) -> Result<Self> {
        if let Some(bad) = graph.nodes.iter().find(|n| !n.spec.is_trainable_kind()) {
            return Err(EngineError::Unsupported(bad.spec.kind_name()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut param_names = Vec::new();
        let mut buffers = Vec::new();
        let mut buffer_names = Vec::new();
        let mut slots = Vec::with_capacity(graph.nodes.len());
        for node in &graph.nodes {
            let p0 = params.len();
            for (suffix, shape) in node.spec.param_shapes() {
                let tensor = match (&node.spec, suffix) {
                    (LayerSpec::Conv2d(_) | LayerSpec::Linear(_), "weight") => {
                        let fan_in: usize = shape[1..].iter().product();
                        let std = libm::sqrt(2.0 / fan_in as f64);
                        let values: Vec<T> = (0..shape.iter().product::<usize>())
                            .map(|_| {
                                let z = crate::rng::standard_normal(&mut rng);
                                T::from_f64_lossy(z * std)
                            })
                            .collect();
                        Tensor::from_vec(&shape, values)?
                    }
                    (LayerSpec::BatchNorm2d(_), "weight") => Tensor::full(&shape, T::one()),
                    _ => Tensor::zeros(&shape),
                };
                params.push(tensor);
                param_names.push(format!("{}.{suffix}", node.name));
            }
            let b0 = buffers.len();
            for (suffix, shape) in node.spec.buffer_shapes() {
                let init = if suffix == "running_var" { T::one() } else { T::zero() };
                buffers.push(Tensor::full(&shape, init));
                buffer_names.push(format!("{}.{suffix}", node.name));
            }
            slots.push(Slots {
                params: p0..params.len(),
                buffers: b0..buffers.len(),
            });
        }
        Ok(Model {
            graph,
            params,
            param_names,
            buffers,
            buffer_names,
            slots,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn buffers(&self) -> &[Tensor<T>] {
        &self.buffers
    }

    pub fn parameter_count(&self) -> u64 {
        self.params.iter().map(|p| p.len() as u64).sum()
    }

    /// Parameters for node `index` (0-based position in `graph().nodes()`).
    pub fn node_params(&self, index: usize) -> &[Tensor<T>] {
        &self.params[self.slots[index].params.clone()]
    }

    /// Parameters followed by buffers, each with its unique name.
    pub fn named_tensors(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.param_names
            .iter()
            .map(String::as_str)
            .zip(&self.params)
            .chain(self.buffer_names.iter().map(String::as_str).zip(&self.buffers))
    }

    /// Replaces a parameter or buffer by name; the shape must match.
    pub fn set_tensor(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let slot = if let Some(i) = self.param_names.iter().position(|n| n == name) {
            &mut self.params[i]
        } else if let Some(i) = self.buffer_names.iter().position(|n| n == name) {
            &mut self.buffers[i]
        } else {
            return Err(EngineError::UnknownTensor(name.into()));
        };
        if slot.shape() != value.shape() {
            return Err(shape_err(format!(
                "{name}: expected {:?}, got {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    /// Training-mode forward pass; batch-norm running statistics are updated.
    pub fn forward_train(&mut self, input: &Tensor<T>) -> Result<ForwardPass<T>> {
        let Model {
            graph,
            params,
            buffers,
            slots,
            ..
        } = self;
        run(graph, params, slots, input, Mode::Train, BnState::Tracking(buffers))
    }

    /// Forward pass that never touches model state. With [`Mode::Train`] it
    /// uses batch statistics without updating the running averages.
    pub fn forward(&self, input: &Tensor<T>, mode: Mode) -> Result<ForwardPass<T>> {
        run(&self.graph, &self.params, &self.slots, input, mode, BnState::Frozen(&self.buffers))
    }

    /// Evaluation-mode logits.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut pass = self.forward(input, Mode::Eval)?;
        Ok(pass.outputs.pop().unwrap_or(pass.input))
    }

    /// Reverse pass from `grad_output` (gradient of the loss with respect to
    /// the graph output). Parameter gradients are summed in reverse node
    /// order, fan-in contributions in input order.
    pub fn backward(&self, pass: &ForwardPass<T>, grad_output: &Tensor<T>, need_input_grad: bool) -> Result<Gradients<T>> {
        if grad_output.shape() != pass.output().shape() {
            return Err(shape_err(format!(
                "output gradient {:?} for output {:?}",
                grad_output.shape(),
                pass.output().shape()
            )));
        }
        let n = self.graph.nodes.len();
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; n + 1];
        grads[n] = Some(grad_output.clone());
        let mut param_grads: Vec<Option<Tensor<T>>> = vec![None; self.params.len()];
        for i in (0..n).rev() {
            let Some(g) = grads[i + 1].take() else {
                continue;
            };
            let node = &self.graph.nodes[i];
            let wants_input = node.inputs.iter().any(|id| id.0 != 0 || need_input_grad);
            let slot = &self.slots[i];
            let lg = layer_backward(&node.spec, &pass.caches[i], &self.params[slot.params.clone()], &g, wants_input)?;
            for (dst, p) in param_grads[slot.params.clone()].iter_mut().zip(lg.params) {
                *dst = Some(p);
            }
            for (&id, gi) in node.inputs.iter().zip(lg.inputs) {
                let Some(gi) = gi else { continue };
                match &mut grads[id.0] {
                    Some(acc) => acc.add_assign(&gi)?,
                    empty => *empty = Some(gi),
                }
            }
        }
        let params = param_grads
            .into_iter()
            .zip(&self.params)
            .map(|(g, p)| g.unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect();
        let input = if need_input_grad {
            Some(grads[0].take().unwrap_or_else(|| Tensor::zeros(pass.input.shape())))
        } else {
            None
        };
        Ok(Gradients { params, input })
    }
}

fn run<T: Scalar>(
    graph: &Graph,
    params: &[Tensor<T>],
    slots: &[Slots],
    input: &Tensor<T>,
    mode: Mode,
    mut buffers: BnState<'_, T>,
) -> Result<ForwardPass<T>> {
    if input.rank() < 2 || &input.shape()[1..] != graph.input_shape() {
        return Err(shape_err(format!(
            "model expects [N, {:?}], got {:?}",
            graph.input_shape(),
            input.shape()
        )));
    }
    let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(graph.nodes.len());
    let mut caches = Vec::with_capacity(graph.nodes.len());
    for (node, slot) in graph.nodes.iter().zip(slots) {
        let inputs: Vec<&Tensor<T>> = node
            .inputs
            .iter()
            .map(|id| match id.0 {
                0 => input,
                i => &outputs[i - 1],
            })
            .collect();
        let (y, cache) = layer_forward(
            &node.spec,
            &inputs,
            &params[slot.params.clone()],
            match &mut buffers {
                BnState::Frozen(b) => BnState::Frozen(&b[slot.buffers.clone()]),
                BnState::Tracking(b) => BnState::Tracking(&mut b[slot.buffers.clone()]),
            },
            mode,
        )?;
        outputs.push(y);
        caches.push(cache);
    }
    Ok(ForwardPass {
        input: input.clone(),
        outputs,
        caches,
    })
}
