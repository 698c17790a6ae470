pub mod config;
pub mod dataset;
pub mod decision;
pub mod eg;
pub mod etg;
pub mod leg;
pub mod project;
pub mod lexicon;
pub mod text;

mod kv;
#[cfg(test)]
mod testing;

pub use config::Config;
pub use dataset::{Dataset, DatasetId, DatasetMeta};
pub use decision::{DecisionId, DecisionKind, ReviewStatus};
pub use eg::{Eg, EgError, Entity, EntityId};
pub use etg::{Etg, EtgError, EtypeId, PropertyId};
pub use leg::{Leg, Locus, SenseDecision, SenseStatus, Term};
pub use lexicon::{ConceptId, EnrichRequest, LanguageTag, LexicalResource, LexiconError, Pos};
pub use project::{Phase, Project, ProjectError, Resolution, Workspace};
