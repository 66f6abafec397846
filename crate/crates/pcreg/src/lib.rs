//! # pcreg
//!
//! Probabilistic circuits with tractable regularization.
//!
//! A probabilistic circuit (PC) is a DAG of input, sum, and product units
//! encoding a probability distribution: sum units mix their children, product
//! units factorize them. Under the usual structural properties (smoothness,
//! decomposability, and optionally determinism) many inference queries that
//! are intractable for most density estimators become linear-time circuit
//! passes. This crate implements:
//!
//! - circuit construction, validation, and a text serialization format
//!   ([`circuit`]);
//! - batched forward/backward passes computing likelihoods, circuit flows,
//!   and expected flows, with optional *data softening* — evaluating against
//!   an implicitly noise-injected dataset at no extra cost ([`evaluate`]);
//! - exact entropy of deterministic circuits and top-down probabilities
//!   ([`entropy`]);
//! - closed-form maximum likelihood, EM for latent-variable circuits, a
//!   hybrid mini-/full-batch EM schedule, and *entropy regularization* via a
//!   coordinate ascent with a Newton inner solver ([`learn`]);
//! - Chow-Liu trees and the hidden Chow-Liu tree (HCLT) structure
//!   ([`structure`]);
//! - dataset ingestion for the standard twenty density-estimation benchmarks
//!   ([`data`]).
//!
//! The `pcreg` command-line tool drives training, evaluation, and
//! diagnostics on top of this library.
//!
//! ```
//! use pcreg::circuit::CircuitBuilder;
//! use pcreg::data::WeightedDataset;
//! use pcreg::evaluate::{loglikelihood};
//!
//! // p(X) = 0.3·[X=1] + 0.7·[X=0]
//! let mut b = CircuitBuilder::new();
//! let hi = b.input(0, 1);
//! let lo = b.input(0, 0);
//! let root = b.sum_with_params(&[hi, lo], &[0.3f64.ln(), 0.7f64.ln()]);
//! let (circuit, params) = b.build_with_params(root).unwrap();
//!
//! let data = WeightedDataset::from_rows(&[vec![1]], vec![2]).unwrap();
//! let ll = loglikelihood(&circuit, &params, &data).unwrap();
//! assert!((ll.mean - 0.3f64.ln()).abs() < 1e-12);
//! ```

pub mod circuit;
pub mod data;
pub mod entropy;
pub mod error;
pub mod evaluate;
pub mod learn;
pub mod math;
pub mod randgen;
pub mod structure;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    //! The chapters of the guide double as doc-tests so the book's code
    //! blocks stay in sync with the library.
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(circuits, "../../../book/src/circuits.md");
    chapter!(flows, "../../../book/src/flows.md");
    chapter!(softening, "../../../book/src/softening.md");
    chapter!(entropy_ch, "../../../book/src/entropy.md");
    chapter!(learning, "../../../book/src/learning.md");
    chapter!(entreg, "../../../book/src/entropy-regularization.md");
    chapter!(structures, "../../../book/src/structures.md");
    chapter!(cli, "../../../book/src/cli.md");
}
