//! Runtime repair of null dereferences by balancing exploitation of known
//! runtime patches against exploration of new ones.
//!
//! - [`minilang`]: parser and interpreter whose null dereferences are decision points.
//! - [`patchmodel`]: the six decision families, their canonical enumeration and application.
//! - [`engine`]: the epsilon-greedy selection loop and the portfolio of runtime patches.
//! - [`explorer`]: exhaustive construction of the decision tree and search-space metrics.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod engine;
pub mod explorer;
pub mod minilang;
pub mod patchmodel;
