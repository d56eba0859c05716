//! Semantic maps of a pivot concept from verse-aligned parallel corpora.

pub mod aligner;
pub mod assoc;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evalharness;
pub mod geofilter;
pub mod kriging;
pub mod ngram;
pub mod pipeline;
pub mod semmap;
pub mod synth;

pub use error::{Error, Result};

/// Label for a usage point with no parallel in a language.
pub const NOMATCH: &str = "NOMATCH";

pub use aligner::{AlignerSettings, LanguageAlignment, UsagePoint, UsageSet};
pub use assoc::{AssociationScore, ContingencyTable};
pub use config::PipelineConfig;
pub use corpus::{LanguageMeta, ParallelCorpus, VerseMap, VerseText};
pub use evalharness::{GoldLabel, GoldSample, MarkerSuffixes, Prf};
pub use geofilter::Region;
pub use kriging::{ContourSet, KrigeSettings, KrigingGrid, LabelSurface, VariogramParams};
pub use ngram::{DependencyDoc, LanguageResult, NgramCluster, NgramSettings};
pub use semmap::{DistanceMatrix, Embedding, MapPoint, SemanticMap};
