//! Allocation-only core of the `retok` vocabulary retrofit toolkit.
//!
//! Everything here is pure computation over in-memory data: the byte-level
//! BPE model and encoder, Unicode-block script tables, the script-prune crop,
//! corpus fire counting and dead-slot analysis, the concave slot allocator,
//! vocabulary surgery, structural verification checks and compression
//! metrics. File formats, corpus readers, parallel drivers and the CLI live in
//! the `retok` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod allocation;
pub mod audit;
pub mod bijection;
pub mod bpe;
pub mod crop;
pub mod eval;
pub mod model;
pub mod pretokenize;
pub mod script;
pub mod surgery;
pub mod verify;

#[cfg(test)]
pub(crate) mod testutil;

pub use bijection::ByteBijection;
pub use bpe::{DecodeError, Encoder, TokenSequence, Tokenizer};
pub use model::{Merge, ModelError, SpecialToken, TokenAlphabet, TokenizerModel};
pub use pretokenize::{Gpt2Split, PreTokenize};
pub use script::{CodepointClass, ScriptTable, TokenProfile};

/// Token identifier.
pub type TokenId = u32;
