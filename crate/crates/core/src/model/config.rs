use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of the temporal attention mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Step `i` attends to steps `j <= i`.
    #[default]
    Causal,
    /// Step `i` attends to steps `j >= i`.
    Literal,
}

/// Architecture variant; everything but `Full` removes one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Full,
    /// Node features pass through one trainable linear map instead of
    /// neighbor attention.
    NoLocal,
    /// Local outputs go straight to the temporal block.
    NoGlobal,
    /// Global outputs are used directly as the per-step embeddings.
    NoTemporal,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoLocal, Variant::NoGlobal, Variant::NoTemporal];

    /// Row label used in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "original",
            Variant::NoLocal => "no-local",
            Variant::NoGlobal => "no-global",
            Variant::NoTemporal => "no-temporal",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" | "full" => Ok(Variant::Full),
            "no-local" => Ok(Variant::NoLocal),
            "no-global" => Ok(Variant::NoGlobal),
            "no-temporal" => Ok(Variant::NoTemporal),
            other => Err(Error::config(format!("unknown variant `{other}`"))),
        }
    }
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskMode::Causal => "causal",
            MaskMode::Literal => "literal",
        })
    }
}

impl FromStr for MaskMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "causal" => Ok(MaskMode::Causal),
            "literal" => Ok(MaskMode::Literal),
            other => Err(Error::config(format!("unknown mask mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Width of the trainable node feature table (ignored with `one_hot`).
    pub input_dim: usize,
    /// Output width of the local layer.
    pub local_dim: usize,
    /// Output width of the global layer.
    pub global_dim: usize,
    /// Final embedding width.
    pub embed_dim: usize,
    pub heads: usize,
    pub leaky_relu_slope: f64,
    pub use_position_embedding: bool,
    pub mask: MaskMode,
    pub variant: Variant,
    /// Fixed identity features instead of a trainable table.
    pub one_hot: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::with_dim(128, 8)
    }
}

impl ModelConfig {
    /// All layer widths set to `dim`.
    pub fn with_dim(dim: usize, heads: usize) -> Self {
        Self {
            input_dim: dim,
            local_dim: dim,
            global_dim: dim,
            embed_dim: dim,
            heads,
            leaky_relu_slope: 0.2,
            use_position_embedding: true,
            mask: MaskMode::Causal,
            variant: Variant::Full,
            one_hot: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 {
            return Err(Error::config("heads must be positive"));
        }
        for (name, d) in [
            ("input_dim", self.input_dim),
            ("local_dim", self.local_dim),
            ("global_dim", self.global_dim),
            ("embed_dim", self.embed_dim),
        ] {
            if d == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        for (name, d) in [
            ("local_dim", self.local_dim),
            ("global_dim", self.effective_global_dim()),
            ("embed_dim", self.output_dim()),
        ] {
            if d % self.heads != 0 {
                return Err(Error::config(format!(
                    "{name} = {d} is not divisible by {} heads",
                    self.heads
                )));
            }
        }
        if !self.leaky_relu_slope.is_finite() {
            return Err(Error::config("leaky_relu_slope must be finite"));
        }
        Ok(())
    }

    /// Width fed to the local layer.
    pub fn feature_dim(&self, num_nodes: usize) -> usize {
        if self.one_hot {
            num_nodes
        } else {
            self.input_dim
        }
    }

    /// Width of the global block output, which equals the local width when
    /// the global block is removed.
    pub fn effective_global_dim(&self) -> usize {
        match self.variant {
            Variant::NoGlobal => self.local_dim,
            _ => self.global_dim,
        }
    }

    /// Width of the final embeddings.
    pub fn output_dim(&self) -> usize {
        match self.variant {
            Variant::NoTemporal => self.effective_global_dim(),
            _ => self.embed_dim,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_setup() {
        let c = ModelConfig::default();
        assert_eq!((c.embed_dim, c.heads), (128, 8));
        assert_eq!(c.leaky_relu_slope, 0.2);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn indivisible_dims_rejected() {
        assert!(ModelConfig::with_dim(10, 4).validate().is_err());
        assert!(ModelConfig::with_dim(16, 0).validate().is_err());
        for heads in [1, 2, 4, 8, 16] {
            assert!(ModelConfig::with_dim(128, heads).validate().is_ok());
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.label().parse::<Variant>().unwrap(), v);
        }
        assert!("bogus".parse::<Variant>().is_err());
    }
}
