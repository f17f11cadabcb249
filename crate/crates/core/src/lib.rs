//! Exact model counting and projected model counting by dynamic programming on tree
//! decompositions, with nested and hybrid solving.

pub mod counting_dp;
pub mod decompose;
pub mod dump;
pub mod error;
pub mod formula;
pub mod graphs;
pub mod hybrid;
pub mod nested_dp;
pub mod oracle;
pub mod projected_dp;
