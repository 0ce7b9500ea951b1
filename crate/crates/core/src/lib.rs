//! Snippet-level comment generation for C and C++ sources.

pub mod analysis;
pub mod classify;
pub mod llm;
pub mod pipeline;
pub mod prompt;
pub mod source;
pub mod templates;
pub mod weave;
