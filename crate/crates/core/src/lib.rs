// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circular;
pub mod em;
pub mod error;
pub mod metrics;
pub mod nmf;
pub mod phase;
pub mod pipeline;
pub mod signal;
pub mod synthetic;
pub mod wiener;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/stft.md")]
    mod stft {}
    #[doc = include_str!("../../../book/src/circular.md")]
    mod circular {}
    #[doc = include_str!("../../../book/src/nmf.md")]
    mod nmf {}
    #[doc = include_str!("../../../book/src/phase.md")]
    mod phase {}
    #[doc = include_str!("../../../book/src/em.md")]
    mod em {}
    #[doc = include_str!("../../../book/src/filters.md")]
    mod filters {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
