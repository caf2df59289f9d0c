//! Information complexity of linear problems observed through noisy
//! functionals.
//!
//! A problem is a family of compact operators `S_d` between Hilbert spaces,
//! described by the eigenvalues of `S_d^* S_d`. Each observation of a linear
//! functional of norm at most one is paid for according to a cost function
//! `$(sigma, d)` of its precision. The crate computes
//!
//! * radii and errors of observation designs under bounded noise
//!   ([`bounded`]) and Gaussian noise ([`gaussian`], [`design`]),
//! * optimal precision profiles and the resulting complexity bounds,
//! * the auxiliary cost of estimating one number under Gaussian noise
//!   ([`cost`]),
//! * the planar rotated-functional construction ([`rotation`]),
//! * numeric tractability diagnostics over `(eps, d)` grids ([`classify`]).
//!
//! ```
//! use noisy_ibc::spectra::SpectrumModel;
//!
//! let model = SpectrumModel::polynomial(1.0, 2.0)?;
//! assert_eq!(model.n_exact(0.5, 1)?.n, 1);
//! # Ok::<(), noisy_ibc::Error>(())
//! ```

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounded;
pub mod classify;
pub mod cost;
pub mod design;
pub mod error;
pub mod gaussian;
pub mod numeric;
pub mod rotation;
pub mod spectra;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/costs.md")]
    mod costs {}
    #[doc = include_str!("../../../book/src/bounded.md")]
    mod bounded {}
    #[doc = include_str!("../../../book/src/gaussian.md")]
    mod gaussian {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/rotation.md")]
    mod rotation {}
    #[doc = include_str!("../../../book/src/tractability.md")]
    mod tractability {}
}
