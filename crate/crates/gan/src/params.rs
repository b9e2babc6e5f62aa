use nn::{Graph, NodeId, Scalar, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::TrainConfig;

/// An ordered, named collection of parameter tensors. Order is the identity
/// of a parameter across checkpoints and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<S: Scalar> {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<S>>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Inserts every parameter into a graph as a leaf.
    pub fn leaves(&self, graph: &mut Graph<S>, trainable: bool) -> Vec<NodeId> {
        self.tensors.iter().map(|t| graph.leaf(t.clone(), trainable)).collect()
    }
}

impl<S: Scalar> Default for ParamSet<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Builds parameter sets with fan-in-scaled uniform initialization, one
/// deterministic stream per parameter.
pub struct ParamBuilder<S: Scalar> {
    set: ParamSet<S>,
    seed: u64,
}

impl<S: Scalar> ParamBuilder<S> {
    pub fn new(seed: u64) -> Self {
        Self { set: ParamSet::new(), seed }
    }

    /// Conv weight [cout, cin, k, k], uniform in ±sqrt(1/fan_in).
    pub fn conv(&mut self, name: &str, cout: usize, cin: usize, k: usize) -> usize {
        let fan_in = (cin * k * k) as f64;
        let limit = (1.0 / fan_in).sqrt();
        let shape = [cout, cin, k, k];
        let index = self.set.tensors.len();
        let mut rng = ChaCha8Rng::seed_from_u64(param_stream(self.seed, index as u64));
        let data: Vec<S> = (0..shape.iter().product::<usize>())
            .map(|_| S::from_f64(rng.random_range(-limit..limit)))
            .collect();
        self.set.names.push(name.to_string());
        self.set.tensors.push(Tensor::from_vec(&shape, data));
        index
    }

    pub fn finish(self) -> ParamSet<S> {
        self.set
    }
}

fn param_stream(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    z = (z ^ (z >> 32)).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    z ^ (z >> 32)
}

/// Layer indices of the coarse and fine generator stacks.
#[derive(Debug, Clone)]
pub struct GeneratorLayout {
    pub coarse: Vec<usize>,
    pub fine_conv: Vec<usize>,
    pub fine_attn: Vec<usize>,
    pub fine_merge: Vec<usize>,
}

pub struct GeneratorParams<S: Scalar> {
    pub set: ParamSet<S>,
    pub layout: GeneratorLayout,
}

/// Coarse stage: encode, dilate, decode. Fine stage: a conv branch and an
/// attention branch merged before decoding. All layers are 3x3 except the
/// 5x5 stem convs; widths scale from `config.gen_width`.
pub fn init_generator<S: Scalar>(config: &TrainConfig, seed: u64) -> GeneratorParams<S> {
    let c = config.gen_width;
    let mut b = ParamBuilder::new(seed);

    // Strided stems keep every activation at half resolution or below; the
    // only full-resolution convolution is the linear output layer.
    let mut coarse = Vec::new();
    coarse.push(b.conv("coarse.stem", c, 4, 5));
    coarse.push(b.conv("coarse.enc1", 2 * c, c, 3));
    coarse.push(b.conv("coarse.down2", 4 * c, 2 * c, 3));
    coarse.push(b.conv("coarse.enc2", 4 * c, 4 * c, 3));
    for (i, _) in config.dilation_rates.iter().enumerate() {
        coarse.push(b.conv(&format!("coarse.dilated{i}"), 4 * c, 4 * c, 3));
    }
    coarse.push(b.conv("coarse.post", 4 * c, 4 * c, 3));
    coarse.push(b.conv("coarse.up1", 2 * c, 4 * c, 3));
    coarse.push(b.conv("coarse.up2", c, 2 * c, 3));
    coarse.push(b.conv("coarse.out", 3, c, 3));

    let mut fine_conv = Vec::new();
    fine_conv.push(b.conv("fine.conv.stem", c, 4, 5));
    fine_conv.push(b.conv("fine.conv.enc1", 2 * c, c, 3));
    fine_conv.push(b.conv("fine.conv.down2", 4 * c, 2 * c, 3));
    for (i, _) in config.dilation_rates.iter().enumerate() {
        fine_conv.push(b.conv(&format!("fine.conv.dilated{i}"), 4 * c, 4 * c, 3));
    }

    let mut fine_attn = Vec::new();
    fine_attn.push(b.conv("fine.attn.stem", 2 * c, 4, 5));
    fine_attn.push(b.conv("fine.attn.down2", 4 * c, 2 * c, 3));
    fine_attn.push(b.conv("fine.attn.post", 4 * c, 4 * c, 3));

    let mut fine_merge = Vec::new();
    fine_merge.push(b.conv("fine.merge", 4 * c, 8 * c, 3));
    fine_merge.push(b.conv("fine.up1", 2 * c, 4 * c, 3));
    fine_merge.push(b.conv("fine.up2", c, 2 * c, 3));
    fine_merge.push(b.conv("fine.out", 3, c, 3));

    GeneratorParams {
        set: b.finish(),
        layout: GeneratorLayout { coarse, fine_conv, fine_attn, fine_merge },
    }
}

/// Strided 5x5 stacks ending in a global mean pool and a 1x1 projection.
pub struct CriticParams<S: Scalar> {
    pub set: ParamSet<S>,
    pub global: Vec<usize>,
    pub local: Vec<usize>,
}

pub fn init_critic<S: Scalar>(config: &TrainConfig, seed: u64) -> CriticParams<S> {
    let d = config.critic_width;
    let mut b = ParamBuilder::new(seed);
    let mut global = Vec::new();
    global.push(b.conv("global.c1", d, 3, 5));
    global.push(b.conv("global.c2", 2 * d, d, 5));
    global.push(b.conv("global.c3", 4 * d, 2 * d, 5));
    global.push(b.conv("global.c4", 4 * d, 4 * d, 5));
    global.push(b.conv("global.head", 1, 4 * d, 1));
    let mut local = Vec::new();
    local.push(b.conv("local.c1", 2 * d, 3, 5));
    local.push(b.conv("local.c2", 4 * d, 2 * d, 5));
    local.push(b.conv("local.head", 1, 4 * d, 1));
    CriticParams { set: b.finish(), global, local }
}
