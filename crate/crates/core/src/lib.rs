//! Turns publicly disclosed web-vulnerability information into candidate
//! proof-of-concept exploits.
//!
//! The pipeline starts from a corpus record (vulnerability description, patch,
//! affected source files), statically analyses the PHP application to recover
//! attack-vector and navigation context, decomposes PoC construction into
//! per-weakness sub-task plans, drives an LLM through chain-of-thought prompts,
//! and validates the result with two runtime feedback loops: an attack-payload
//! harness and an execution-path trace differ. A benchmark harness runs the
//! whole thing over a corpus and scores success and failure-cause rates.

pub mod assemble;
pub mod bench;
pub mod context;
pub mod corpus;
pub mod llm;
pub mod payload;
pub mod php;
pub mod prompt;
pub mod subtask;
pub mod trace;
