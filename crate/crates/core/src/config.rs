use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the selection and editing branch outputs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FusionStrategy {
    /// Concatenate all branch features into a single head.
    Early,
    SumLinear,
    SumSigmoid,
    MulSigmoid,
    SumTanh,
    MulTanh,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 6] = [
        FusionStrategy::Early,
        FusionStrategy::SumLinear,
        FusionStrategy::SumSigmoid,
        FusionStrategy::MulSigmoid,
        FusionStrategy::SumTanh,
        FusionStrategy::MulTanh,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionStrategy::Early => "EARLY",
            FusionStrategy::SumLinear => "SUM_LINEAR",
            FusionStrategy::SumSigmoid => "SUM_SIGMOID",
            FusionStrategy::MulSigmoid => "MUL_SIGMOID",
            FusionStrategy::SumTanh => "SUM_TANH",
            FusionStrategy::MulTanh => "MUL_TANH",
        }
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown fusion strategy {s:?}")))
    }
}

/// Feature groups that can be switched off for ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Components {
    pub sen: bool,
    pub sem: bool,
    pub spa: bool,
    pub tem: bool,
}

impl Default for Components {
    fn default() -> Self {
        Self::ALL
    }
}

impl Components {
    pub const ALL: Components = Components {
        sen: true,
        sem: true,
        spa: true,
        tem: true,
    };
    pub const SELECTION: Components = Components {
        sen: true,
        sem: true,
        spa: false,
        tem: false,
    };
    pub const EDITING: Components = Components {
        sen: false,
        sem: false,
        spa: true,
        tem: true,
    };

    pub fn selection_active(&self) -> bool {
        self.sen || self.sem
    }

    pub fn editing_active(&self) -> bool {
        self.spa || self.tem
    }

    pub fn is_empty(&self) -> bool {
        !(self.selection_active() || self.editing_active())
    }

    pub fn count(&self) -> usize {
        [self.sen, self.sem, self.spa, self.tem].iter().filter(|&&b| b).count()
    }

    /// Comma-separated list such as `SEN,SPA`.
    pub fn label(&self) -> String {
        let names: Vec<&str> = [(self.sen, "SEN"), (self.sem, "SEM"), (self.spa, "SPA"), (self.tem, "TEM")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        names.join(",")
    }
}

impl FromStr for Components {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut c = Components {
            sen: false,
            sem: false,
            spa: false,
            tem: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_uppercase().as_str() {
                "SEN" => c.sen = true,
                "SEM" => c.sem = true,
                "SPA" => c.spa = true,
                "TEM" => c.tem = true,
                "MSAM" => {
                    c.sen = true;
                    c.sem = true;
                }
                "MEAM" => {
                    c.spa = true;
                    c.tem = true;
                }
                other => return Err(Error::InvalidArgument(format!("unknown component {other:?}"))),
            }
        }
        if c.is_empty() {
            return Err(Error::InvalidArgument("component set is empty".into()));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Width shared by the sentiment, semantic and temporal paths.
    pub model_dim: usize,
    pub heads: usize,
    pub co_attention_heads: usize,
    pub ffn_dim: usize,
    /// Width of the two-way prompt/image blocks.
    pub spatial_dim: usize,
    pub spatial_heads: usize,
    pub two_way_mlp_dim: usize,
    pub two_way_blocks: usize,
    pub conv_kernel: usize,
    pub conv_channels: [usize; 2],
    pub head_depth: usize,
    pub head_hidden: usize,
    pub dropout: f64,
    pub duration_bins: usize,
    pub alpha: f64,
    pub beta: f64,
    pub fusion: FusionStrategy,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; `None` trains
    /// for `max_epochs`.
    pub patience: Option<usize>,
    pub seed: u64,
    pub components: Components,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            model_dim: 128,
            heads: 8,
            co_attention_heads: 4,
            ffn_dim: 512,
            spatial_dim: 256,
            spatial_heads: 8,
            two_way_mlp_dim: 2048,
            two_way_blocks: 2,
            conv_kernel: 3,
            conv_channels: [64, 32],
            head_depth: 3,
            head_hidden: 128,
            dropout: 0.1,
            duration_bins: 10,
            alpha: 0.1,
            beta: 2.0,
            fusion: FusionStrategy::MulTanh,
            learning_rate: 1e-3,
            batch_size: 128,
            max_epochs: 30,
            patience: Some(5),
            seed: 0,
            components: Components::ALL,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.model_dim == 0 || self.model_dim % 2 == 1 {
            return bad(format!("model_dim {} must be positive and even", self.model_dim));
        }
        for (name, width, heads) in [
            ("heads", self.model_dim, self.heads),
            ("co_attention_heads", self.model_dim, self.co_attention_heads),
            ("spatial_heads", self.spatial_dim, self.spatial_heads),
        ] {
            if heads == 0 || width % heads != 0 {
                return bad(format!("{name}={heads} must divide width {width}"));
            }
        }
        if self.spatial_dim == 0 || self.spatial_dim % 2 == 1 {
            return bad(format!("spatial_dim {} must be positive and even", self.spatial_dim));
        }
        if [self.ffn_dim, self.two_way_mlp_dim, self.head_hidden, self.conv_channels[0], self.conv_channels[1]]
            .contains(&0)
        {
            return bad("layer widths must be positive".into());
        }
        if self.two_way_blocks == 0 {
            return bad("two_way_blocks must be at least 1".into());
        }
        if !(1..=3).contains(&self.conv_kernel) {
            return bad(format!("conv_kernel {} must be 1, 2 or 3", self.conv_kernel));
        }
        if self.head_depth == 0 {
            return bad("head_depth must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} must lie in [0, 1)", self.dropout));
        }
        if self.duration_bins < 2 {
            return bad("duration_bins must be at least 2".into());
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return bad("alpha and beta must be finite and non-negative".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.patience == Some(0) {
            return bad("patience must be at least 1".into());
        }
        if self.components.is_empty() {
            return bad("at least one component must be enabled".into());
        }
        Ok(())
    }
}
