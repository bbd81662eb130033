//! Geometric multimodal contrastive (GMC) representation learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense `f64` tensors with a reverse-mode tape.
//! - [`loss`]: the multimodal NT-Xent objective and its ablated variant.
//! - [`model`]: per-modality base encoders, the shared projection head and
//!   the training loop.
//! - [`synthdata`]: a seeded synthetic multimodal benchmark.
//! - [`dca`]: neighbourhood-graph alignment scores between a reference and an
//!   evaluation embedding set.
//! - [`downstream`]: the missing-modality classifier probe.
//!
//! A narrative guide with runnable snippets lives in the `book/` directory of
//! the repository; its code blocks are compiled as doc-tests of this crate.

pub mod dca;
pub mod downstream;
mod error;
pub mod loss;
pub mod model;
pub mod rng;
pub mod synthdata;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Tape, Tensor, Var};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/loss.md")]
    mod loss {}
    #[doc = include_str!("../../../book/src/architecture.md")]
    mod architecture {}
    #[doc = include_str!("../../../book/src/synthetic_data.md")]
    mod synthetic_data {}
    #[doc = include_str!("../../../book/src/dca.md")]
    mod dca {}
    #[doc = include_str!("../../../book/src/probe.md")]
    mod probe {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
