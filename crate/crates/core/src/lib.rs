//! Humor classification and joke generation toolkit.
//!
//! The pipeline reads a joke corpus ([`corpus`]), annotates it either from
//! CoNLL-U parser output or heuristically ([`annotate`]), and then feeds
//! three consumers: the feature-based classifiers ([`features`],
//! [`classify`]), the n-gram and LSTM generators ([`markov`], [`neural`]),
//! and the template-infilling generator ([`template`], [`infill`]).
//! [`eval`] runs and scores double-blind human evaluations.

pub mod annotate;
pub mod classify;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod infill;
pub mod lexicons;
pub mod markov;
pub mod neural;
pub mod template;
