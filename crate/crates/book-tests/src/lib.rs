//! Runs the guide's Rust listings as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/channel.md")]
pub mod channel {}

#[doc = include_str!("../../../book/src/mechanism.md")]
pub mod mechanism {}

#[doc = include_str!("../../../book/src/budget.md")]
pub mod budget {}

#[doc = include_str!("../../../book/src/accounting.md")]
pub mod accounting {}

#[doc = include_str!("../../../book/src/adversary.md")]
pub mod adversary {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
