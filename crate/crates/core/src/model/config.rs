use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::BackboneKind;

/// Pooling that turns consistency embeddings into the graph summary vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    #[default]
    Mean,
    Min,
    Max,
    /// Softmax-weighted sum with weights scored by a linear layer.
    Attention,
}

impl Readout {
    pub const ALL: [Readout; 4] = [Readout::Mean, Readout::Min, Readout::Max, Readout::Attention];

    pub fn name(self) -> &'static str {
        match self {
            Readout::Mean => "mean",
            Readout::Min => "min",
            Readout::Max => "max",
            Readout::Attention => "attention",
        }
    }
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Readout::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown readout `{s}`")))
    }
}

/// Encoder arrangement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// GNN plus the two auxiliary encoders.
    #[default]
    Full,
    /// The GNN output stands in for both auxiliary encoders.
    Shared,
    /// Only the two auxiliary encoders; no consistency representation.
    Separated,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Full, Architecture::Shared, Architecture::Separated];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Full => "full",
            Architecture::Shared => "shared",
            Architecture::Separated => "separated",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown architecture `{s}`")))
    }
}

/// How two embedding matrices are reduced to one correlation coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationReduction {
    /// One Pearson coefficient over the flattened matrices.
    #[default]
    Flatten,
    /// Mean of per-column absolute Pearson coefficients.
    ColumnMean,
}

/// Component switches. A disabled term contributes exactly zero to both the
/// objective and the anomaly score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablations {
    pub attr_recon: bool,
    pub topo_recon: bool,
    pub cons_align: bool,
    pub correlation: bool,
}

impl Default for Ablations {
    fn default() -> Self {
        Self {
            attr_recon: true,
            topo_recon: true,
            cons_align: true,
            correlation: true,
        }
    }
}

impl Ablations {
    /// Parses a comma list of disabled components: `ar`, `tr`, `ca`, `cc`.
    pub fn from_disabled(list: &str) -> Result<Self> {
        let mut a = Self::default();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.to_ascii_lowercase().as_str() {
                "ar" => a.attr_recon = false,
                "tr" => a.topo_recon = false,
                "ca" => a.cons_align = false,
                "cc" => a.correlation = false,
                other => return Err(Error::Config(format!("unknown ablation `{other}`"))),
            }
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct G3adConfig {
    pub embed_dim: usize,
    /// Weight of attribute versus topology reconstruction, in `[0, 1]`.
    pub lambda1: f64,
    /// Weight of the consistency alignment term, `>= 0`.
    pub lambda2: f64,
    pub backbone: BackboneKind,
    pub readout: Readout,
    /// Additive floor inside the alignment logarithm.
    pub cons_floor: f64,
    pub ablations: Ablations,
    pub arch: Architecture,
    /// Whether a node attends to itself in the GAT backbone.
    pub attention_self_loops: bool,
    pub correlation_reduction: CorrelationReduction,
}

impl Default for G3adConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            lambda1: 0.8,
            lambda2: 0.2,
            backbone: BackboneKind::Gat,
            readout: Readout::Mean,
            cons_floor: std::f64::consts::E,
            ablations: Ablations::default(),
            arch: Architecture::Full,
            attention_self_loops: true,
            correlation_reduction: CorrelationReduction::Flatten,
        }
    }
}

impl G3adConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda1) {
            return Err(Error::Config(format!("lambda1 = {} is outside [0, 1]", self.lambda1)));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::Config(format!("lambda2 = {} must be finite and >= 0", self.lambda2)));
        }
        if !(self.cons_floor > 0.0 && self.cons_floor.is_finite()) {
            return Err(Error::Config("cons_floor must be positive".into()));
        }
        let a = self.ablations;
        if !(a.attr_recon || a.topo_recon || a.cons_align) {
            return Err(Error::Config("at least one of AR, TR, CA must stay enabled".into()));
        }
        if self.arch == Architecture::Separated && !(a.attr_recon || a.topo_recon) {
            return Err(Error::Config(
                "the separated architecture has no consistency branch; enable AR or TR".into(),
            ));
        }
        Ok(())
    }

    /// Whether the consistency representation exists under this architecture.
    pub fn has_consistency(&self) -> bool {
        self.arch != Architecture::Separated
    }

    pub(crate) fn uses_attr(&self) -> bool {
        self.ablations.attr_recon
    }

    pub(crate) fn uses_topo(&self) -> bool {
        self.ablations.topo_recon
    }

    pub(crate) fn uses_cons(&self) -> bool {
        self.ablations.cons_align && self.has_consistency()
    }

    /// The correlation term is constant when every pair is the same matrix,
    /// so the shared architecture drops it.
    pub(crate) fn uses_correlation(&self) -> bool {
        self.ablations.correlation && self.arch != Architecture::Shared
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = G3adConfig::default();
        c.validate().unwrap();
        assert_eq!(c.embed_dim, 64);
        assert_eq!(c.cons_floor, std::f64::consts::E);
    }

    #[test]
    fn rejects_bad_weights() {
        let c = G3adConfig {
            lambda1: 1.5,
            ..G3adConfig::default()
        };
        assert!(c.validate().is_err());
        let c = G3adConfig {
            lambda2: -0.1,
            ..G3adConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn all_tasks_disabled_is_rejected() {
        let c = G3adConfig {
            ablations: Ablations::from_disabled("ar,tr,ca").unwrap(),
            ..G3adConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn ablation_list_parsing() {
        let a = Ablations::from_disabled("tr, cc").unwrap();
        assert!(a.attr_recon && !a.topo_recon && a.cons_align && !a.correlation);
        assert!(Ablations::from_disabled("xx").is_err());
        assert_eq!(Ablations::from_disabled("").unwrap(), Ablations::default());
    }

    #[test]
    fn parse_enums() {
        assert_eq!("MAX".parse::<Readout>().unwrap(), Readout::Max);
        assert_eq!("separated".parse::<Architecture>().unwrap(), Architecture::Separated);
        assert!("median".parse::<Readout>().is_err());
    }
}
