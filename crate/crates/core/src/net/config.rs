use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    /// Leaky ReLU with the given negative slope.
    LeakyRelu(f64),
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::LeakyRelu(s) => write!(f, "leaky_relu:{s}"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "leaky_relu" => Ok(Activation::LeakyRelu(0.2)),
            _ => match s.strip_prefix("leaky_relu:").map(str::parse::<f64>) {
                Some(Ok(slope)) => Ok(Activation::LeakyRelu(slope)),
                _ => Err(Error::Config(format!("unknown activation {s:?}"))),
            },
        }
    }
}

/// Architecture of the cascade. Every unit shares it.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Number of 2× units.
    pub levels: usize,
    pub dim: usize,
    /// Channels after each block's compression layer (C′).
    pub compress_width: usize,
    /// Output channels of each dense layer (G).
    pub growth: usize,
    pub blocks: usize,
    pub dense_layers: usize,
    /// Neighborhood size inside dense blocks.
    pub feature_k: usize,
    /// Neighborhood size of the inter-level interpolation.
    pub interp_k: usize,
    /// Hidden widths of the expansion MLP between `C + 1` and `dim`.
    pub expand_hidden: Vec<usize>,
    pub activation: Activation,
    pub use_feature_knn: bool,
    pub use_dense_links: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            levels: 4,
            dim: 3,
            compress_width: 24,
            growth: 12,
            blocks: 4,
            dense_layers: 2,
            feature_k: 32,
            interp_k: 5,
            expand_hidden: vec![192, 96],
            activation: Activation::Relu,
            use_feature_knn: true,
            use_dense_links: true,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.levels == 0 {
            return fail("levels must be at least 1".into());
        }
        if !(self.dim == 2 || self.dim == 3) {
            return fail(format!("dimension {} (expected 2 or 3)", self.dim));
        }
        if self.compress_width == 0
            || self.growth == 0
            || self.blocks == 0
            || self.dense_layers == 0
        {
            return fail("block widths and counts must be positive".into());
        }
        if self.feature_k == 0 || self.interp_k == 0 {
            return fail("neighborhood sizes must be positive".into());
        }
        if self.expand_hidden.contains(&0) {
            return fail("expansion widths must be positive".into());
        }
        Ok(())
    }

    /// Per-point width of a dense block's output (`C′ + layers · G`).
    pub fn block_output_width(&self) -> usize {
        self.compress_width + self.dense_layers * self.growth
    }

    /// Width `C` of the extracted features.
    pub fn feature_width(&self) -> usize {
        self.compress_width + self.blocks * self.block_output_width()
    }

    pub(crate) fn block_input_width(&self, block: usize) -> usize {
        if self.use_dense_links {
            self.dim + self.compress_width + block * self.block_output_width()
        } else if block == 0 {
            self.dim + self.compress_width
        } else {
            self.dim + self.block_output_width()
        }
    }

    /// (input, output) widths of dense layer `j` inside a block.
    pub(crate) fn dense_layer_widths(&self, j: usize) -> (usize, usize) {
        if self.use_dense_links {
            (self.compress_width + j * self.growth, self.growth)
        } else {
            let input = if j == 0 {
                self.compress_width
            } else {
                self.growth
            };
            let output = if j + 1 == self.dense_layers {
                self.block_output_width()
            } else {
                self.growth
            };
            (input, output)
        }
    }

    pub fn to_kv(&self) -> Vec<(&'static str, String)> {
        let hidden: Vec<String> = self.expand_hidden.iter().map(ToString::to_string).collect();
        vec![
            ("levels", self.levels.to_string()),
            ("dim", self.dim.to_string()),
            ("compress_width", self.compress_width.to_string()),
            ("growth", self.growth.to_string()),
            ("blocks", self.blocks.to_string()),
            ("dense_layers", self.dense_layers.to_string()),
            ("feature_k", self.feature_k.to_string()),
            ("interp_k", self.interp_k.to_string()),
            ("expand_hidden", hidden.join(",")),
            ("activation", self.activation.to_string()),
            ("use_feature_knn", self.use_feature_knn.to_string()),
            ("use_dense_links", self.use_dense_links.to_string()),
        ]
    }

    /// Applies one `key = value` setting; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "levels" => self.levels = num(key, value)?,
            "dim" => self.dim = num(key, value)?,
            "compress_width" => self.compress_width = num(key, value)?,
            "growth" => self.growth = num(key, value)?,
            "blocks" => self.blocks = num(key, value)?,
            "dense_layers" => self.dense_layers = num(key, value)?,
            "feature_k" => self.feature_k = num(key, value)?,
            "interp_k" => self.interp_k = num(key, value)?,
            "expand_hidden" => {
                self.expand_hidden = if value.trim().is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|v| num(key, v.trim()))
                        .collect::<Result<_>>()?
                }
            }
            "activation" => self.activation = value.parse()?,
            "use_feature_knn" => self.use_feature_knn = num(key, value)?,
            "use_dense_links" => self.use_dense_links = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown network key {key:?}"))),
        }
        Ok(())
    }
}
