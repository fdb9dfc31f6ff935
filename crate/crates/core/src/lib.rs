//! Unsupervised node anomaly detection on attributed graphs with a guarded
//! graph neural network.
//!
//! A GNN encoder learns the attribute/topology patterns shared by most
//! nodes, while two neighbor-free auxiliary encoders absorb what is
//! specific to each source. Correlation penalties keep the three embedding
//! spaces apart, learned gates decide per node how much of each reaches the
//! attribute and topology decoders, and a graph-level readout anchors the
//! consistent embeddings. Nodes are ranked by a weighted sum of
//! reconstruction errors and distance to that anchor.
//!
//! ```no_run
//! use g3ad::{inject, seeded_rng, synth_base_graph, train, G3adConfig, InjectionConfig, SynthConfig, TrainOptions};
//!
//! let (base, _) = synth_base_graph(&SynthConfig::new(500, 32, 8.0, 5), &mut seeded_rng(1))?;
//! let (graph, labels) = inject(&base, &InjectionConfig::default())?;
//! let out = train(&graph, &G3adConfig::default(), &TrainOptions::default())?;
//! let auc = g3ad::eval::roc_auc(out.artifacts.scores.as_slice().unwrap(), &labels)?;
//! # Ok::<(), g3ad::Error>(())
//! ```

pub mod error;
pub mod eval;
pub mod graph;
pub mod injection;
pub mod model;
pub mod nn;
pub mod numerics;
pub mod par;

pub use error::{Error, Result};
pub use graph::{
    load_graph, load_labels, save_graph, save_labels, AnomalyGroundTruth, AnomalyKind, AnomalyRecord, Graph, GraphLoad,
};
pub use injection::{inject, synth_base_graph, InjectionConfig, InjectionProvenance, SynthConfig};
pub use model::{
    train, Ablations, Architecture, Checkpoint, CorrelationReduction, G3adConfig, G3adModel, Readout, TrainOptions,
    TrainOutcome,
};
pub use nn::BackboneKind;
pub use numerics::seeded_rng;
pub use par::Execution;
