//! Order-invariant incremental density-peak clustering over streams of
//! sparse descriptor vectors, with noyau aggregation for expert curation and
//! a recall/precision harness.
//!
//! Documents arrive one at a time. Each is Hellinger-normalized, linked to
//! its K nearest neighbors (ties included), and the densities and head lists
//! of the nodes it disturbs are repaired locally. The resulting state does
//! not depend on the order in which documents arrived.
//!
//! ```
//! use germen_core::{Config, Engine, RawDocument};
//!
//! let mut engine = Engine::new(Config::default()).unwrap();
//! engine.ingest(&RawDocument::new("d1", [("shear", 2), ("rock", 1)])).unwrap();
//! engine.ingest(&RawDocument::new("d2", [("shear", 1), ("rock", 1)])).unwrap();
//! assert_eq!(engine.len(), 2);
//! ```

pub mod aggregation;
pub mod config;
pub mod corpus;
pub mod density;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod knn_graph;
pub mod labeling;
pub mod permutation;
pub mod saliency;
pub mod sum;
pub mod vector_space;

pub use aggregation::{
    build_noyau_graph, components, components_by_key, size_distribution, Component, ComponentId, ComponentStatus,
    CurationAction, CurationSession, ExportOptions, Journal, JournalAction, JournalEntry, NoyauGraph,
    ValenceMode,
};
pub use config::{Config, DensityKind, Rule, SurplombantMode};
pub use corpus::{read_corpus, RawDocument};
pub use engine::{Engine, EngineSnapshot, IngestReport, NodeFingerprint};
pub use error::{Error, Result};
pub use evaluation::{evaluate, Classification, EvaluationReport, LabeledGroup};
pub use knn_graph::{Link, NeighborGraph, NodeId, PerturbationSet};
pub use labeling::{LabelingState, NodeCategory};
pub use permutation::{permutation_test, PermutationOutcome};
pub use saliency::{render_class_report, term_contributions, ClassProfile};
pub use sum::{exact_sum, ExactSum};
pub use vector_space::{
    hellinger_distance, normalize, similarity, DescriptorId, DescriptorRegistry, DocumentVector,
    NormalizedVector,
};
