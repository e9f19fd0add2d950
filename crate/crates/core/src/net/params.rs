use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NetConfig;
use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Indices of a fully connected layer's weight `[in, out]` and bias `[out]`
/// in the flat parameter list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: usize,
    pub bias: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseBlockParams {
    pub compress: Linear,
    pub layers: Vec<Linear>,
}

/// Layout of one upsampling unit inside [`NetworkParams`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitParams {
    pub init: Linear,
    pub blocks: Vec<DenseBlockParams>,
    /// Expansion MLP; the last layer is the linear residual head.
    pub expand: Vec<Linear>,
    pub range: Range<usize>,
}

/// All trainable tensors of a cascade, addressed by path
/// (`unit2/block0/dense1/weight`) or by flat index.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    config: NetConfig,
    tensors: Vec<Tensor>,
    paths: Vec<String>,
    units: Vec<UnitParams>,
    frozen: Vec<bool>,
}

struct Builder {
    tensors: Vec<Tensor>,
    paths: Vec<String>,
}

impl Builder {
    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> Linear {
        let weight = self.tensors.len();
        self.tensors.push(Tensor::zeros([fan_in, fan_out]));
        self.paths.push(format!("{prefix}/weight"));
        self.tensors.push(Tensor::zeros([fan_out]));
        self.paths.push(format!("{prefix}/bias"));
        Linear {
            weight,
            bias: weight + 1,
            fan_in,
            fan_out,
        }
    }
}

impl NetworkParams {
    /// Builds the layout for `config` with every tensor zeroed.
    pub fn zeroed(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        let mut b = Builder {
            tensors: Vec::new(),
            paths: Vec::new(),
        };
        let mut units = Vec::with_capacity(config.levels);
        for u in 1..=config.levels {
            let start = b.tensors.len();
            let init = b.linear(&format!("unit{u}/init"), config.dim, config.compress_width);
            let blocks = (0..config.blocks)
                .map(|k| {
                    let compress = b.linear(
                        &format!("unit{u}/block{k}/compress"),
                        config.block_input_width(k),
                        config.compress_width,
                    );
                    let layers = (0..config.dense_layers)
                        .map(|j| {
                            let (i, o) = config.dense_layer_widths(j);
                            b.linear(&format!("unit{u}/block{k}/dense{j}"), i, o)
                        })
                        .collect();
                    DenseBlockParams { compress, layers }
                })
                .collect();
            let mut widths = vec![config.feature_width() + 1];
            widths.extend(&config.expand_hidden);
            widths.push(config.dim);
            let expand = widths
                .windows(2)
                .enumerate()
                .map(|(i, w)| b.linear(&format!("unit{u}/expand{i}"), w[0], w[1]))
                .collect();
            units.push(UnitParams {
                init,
                blocks,
                expand,
                range: start..b.tensors.len(),
            });
        }
        Ok(NetworkParams {
            config: config.clone(),
            tensors: b.tensors,
            paths: b.paths,
            frozen: vec![false; units.len()],
            units,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn paths(&self) -> &[String] {
        &self.paths
    }

    pub fn get(&self, path: &str) -> Option<&Tensor> {
        self.paths
            .iter()
            .position(|p| p == path)
            .map(|i| &self.tensors[i])
    }

    /// Layout of unit `u` (0-based).
    pub fn unit(&self, u: usize) -> &UnitParams {
        &self.units[u]
    }

    pub fn units(&self) -> usize {
        self.units.len()
    }

    /// Unit owning the flat tensor index `i`.
    pub fn unit_of(&self, i: usize) -> usize {
        self.units
            .iter()
            .position(|u| u.range.contains(&i))
            .expect("tensor index outside every unit")
    }

    pub fn is_frozen(&self, u: usize) -> bool {
        self.frozen[u]
    }

    pub fn set_frozen(&mut self, u: usize, frozen: bool) {
        self.frozen[u] = frozen;
    }

    /// Scalar parameter count of the whole cascade.
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Scalar parameter count of unit `u`.
    pub fn unit_param_count(&self, u: usize) -> usize {
        self.tensors[self.units[u].range.clone()]
            .iter()
            .map(Tensor::numel)
            .sum()
    }

    /// Replaces the tensor at `i`, which must keep its shape.
    pub fn set_tensor(&mut self, i: usize, t: Tensor) -> Result<()> {
        let slot = self.tensors.get_mut(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.paths.len(),
        })?;
        if slot.shape() != t.shape() {
            return Err(Error::shape(format!(
                "{}: expected {:?}, got {:?}",
                self.paths[i],
                slot.shape(),
                t.shape()
            )));
        }
        *slot = t;
        Ok(())
    }

    /// Records the tensors of units `0..count` on `tape`. Parameters of
    /// frozen units, or all of them when `trainable` is false, enter as
    /// constants. Tensors of later units are left unbound.
    pub fn bind(&self, tape: &mut Tape, count: usize, trainable: bool) -> Vec<Option<Var>> {
        let mut vars = vec![None; self.tensors.len()];
        for (u, unit) in self.units.iter().take(count).enumerate() {
            let learn = trainable && !self.frozen[u];
            for i in unit.range.clone() {
                let t = self.tensors[i].clone();
                vars[i] = Some(if learn {
                    tape.param(t)
                } else {
                    tape.constant(t)
                });
            }
        }
        vars
    }
}

/// Glorot-uniform weights, zero biases, and a zero residual head so every
/// fresh unit starts as point duplication.
pub fn init_network(config: &NetConfig, seed: u64) -> Result<NetworkParams> {
    let mut params = NetworkParams::zeroed(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heads: Vec<usize> = params
        .units
        .iter()
        .map(|u| u.expand.last().expect("expansion has a head").weight)
        .collect();
    let linears: Vec<Linear> = params
        .units
        .iter()
        .flat_map(|u| {
            std::iter::once(u.init)
                .chain(
                    u.blocks
                        .iter()
                        .flat_map(|b| std::iter::once(b.compress).chain(b.layers.iter().copied())),
                )
                .chain(u.expand.iter().copied())
        })
        .collect();
    for lin in linears {
        if heads.contains(&lin.weight) {
            continue;
        }
        let limit = (6.0 / (lin.fan_in + lin.fan_out) as f64).sqrt();
        for w in params.tensors[lin.weight].data_mut() {
            *w = rng.random_range(-limit..limit);
        }
    }
    Ok(params)
}
