//! Core of a harness for planting inconsistencies in regulatory clause
//! corpora, detecting them, and scoring detections against the plant record.
//!
//! Everything here is pure and `no_std` (with `alloc`); file formats, the
//! HTTP transport, the review service and the CLI live in the `regconflict`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adjudication;
pub mod analysis;
pub mod baseline;
pub mod chunk;
pub mod clause_id;
pub mod corpus;
pub mod eval;
pub mod finding;
pub mod injector;
pub mod prompt;
pub mod quantity;
pub mod response;
pub mod synthetic;
mod sampling;
pub mod text;

pub use clause_id::ClauseId;
pub use corpus::{Clause, Corpus, CorpusError, Span};
pub use finding::{ConflictKind, Finding};
