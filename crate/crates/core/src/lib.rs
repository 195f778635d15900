//! Learning temporal relations between annotated event pairs.
//!
//! The crate provides two learners and the machinery around them:
//!
//! * an EM-based temporal relation learner over categorical event-pair
//!   features with add-1 smoothing and three initialization regimes
//!   ([`emtrl`]),
//! * a bootstrapped cross-document classifier that specializes a general
//!   one-vs-one margin model per test document using topically related
//!   documents ([`bcdc`], [`classifier`]),
//! * Allen interval algebra with path consistency and a realizability
//!   oracle ([`algebra`]), plus greedy and exact-ILP repair of predicted
//!   relation sets into globally consistent labelings ([`consistency`]),
//! * evaluation tools including the stratified shuffling significance
//!   test ([`eval`]) and a synthetic corpus generator with planted,
//!   provably consistent ground truth ([`synth`]).

pub mod algebra;
pub mod bcdc;
pub mod classifier;
pub mod consistency;
pub mod corpus;
pub mod emtrl;
pub mod eval;
pub mod features;
pub mod synth;

pub use corpus::{
    Corpus, CoarseRelation, Document, EventInstance, NormRelation, RawRelation, RelationLabel,
    Scheme, TLink,
};
