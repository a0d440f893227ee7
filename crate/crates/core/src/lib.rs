//! Random-matrix models, traffic-graph expansions, amalgamated free sums over
//! the diagonal, and diagonal-valued Cauchy transforms.
//!
//! The crate revolves around one comparison: take two deterministic Hermitian
//! matrices A and B, form the infinite rooted-graph operator a + b whose
//! constituents are free with amalgamation over the diagonal, and measure how
//! close the diagonal resolvent of the plain matrix sum A + B is to that of
//! a + b. Everything else supports this comparison:
//!
//! * [`models`] samples the matrix ensembles (Erdos-Renyi, diluted Wigner,
//!   certified-sparse, permutation sums) reproducibly from 64-bit seeds.
//! * [`traffic`] evaluates labeled test graphs in matrices: graph monomials,
//!   injective traces, colored components, and the bipartite component-vs-
//!   connector view with its tree test.
//! * [`freesum`] builds the lazily expanded rooted graph of alternating
//!   tuples realizing the amalgamated free sum, walks its moments, and
//!   measures colored girth on the matrix side.
//! * [`resolvent`] computes diagonal-valued Cauchy transforms three ways
//!   (moment series, truncated graph sections, subordination fixed point)
//!   plus the exact matrix-side diagonal resolvent.
//! * [`verify`] holds the lemma checkers, growth-assumption estimators, and
//!   counting-ratio diagnostics used by the test suites and the CLI.
//! * [`experiment`] drives seeded Monte Carlo sweeps over dimension grids and
//!   writes CSV/JSON records.

pub mod error;
pub mod freesum;
pub mod matrix;
pub mod models;
pub mod resolvent;
pub mod rng;
pub mod traffic;
pub mod verify;

#[cfg(test)]
pub(crate) mod test_util;

pub use error::{CoreError, Result};
