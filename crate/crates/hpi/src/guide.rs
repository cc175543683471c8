//! Compiles every example in the book (and the README) as a doctest, so
//! the guide cannot drift from the library.

#[doc = include_str!("../../../README.md")]
mod readme {}

#[doc = include_str!("../../../book/src/getting-started.md")]
mod getting_started {}

#[doc = include_str!("../../../book/src/spaces-and-oracles.md")]
mod spaces_and_oracles {}

#[doc = include_str!("../../../book/src/games.md")]
mod games {}

#[doc = include_str!("../../../book/src/indices.md")]
mod indices {}

#[doc = include_str!("../../../book/src/optimizers.md")]
mod optimizers {}

#[doc = include_str!("../../../book/src/determinism.md")]
mod determinism {}

#[doc = include_str!("../../../book/src/file-formats.md")]
mod file_formats {}
