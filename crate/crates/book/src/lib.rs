//! Guide snippets, compiled and run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/codecs.md")]
pub mod codecs {}

#[doc = include_str!("../../../book/src/execution.md")]
pub mod execution {}

#[doc = include_str!("../../../book/src/cost-model.md")]
pub mod cost_model {}

#[doc = include_str!("../../../book/src/scheduling.md")]
pub mod scheduling {}

#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}

#[doc = include_str!("../../../docs/formats.md")]
pub mod formats {}
