//! Multi-granularity prototype memory for cross-modality retrieval.
//!
//! The crate is `no_std` (it needs `alloc`). It carries everything that is
//! pure computation: a dense matrix type with a small reverse-mode
//! differentiation tape, the hierarchical prototype memory and its
//! regulation losses, a toy two-stream stripe encoder, synthetic
//! cross-modality data, an SGD trainer and CMC/mAP evaluation. File formats
//! and the command-line driver live in the `mgmra` crate.
//!
//! ```
//! use mgmra_core::memory::{MemoryConfig, PrototypeMemory};
//! use mgmra_core::numerics::{Matrix, Rng};
//!
//! let cfg = MemoryConfig::new(6, 5, 1, 4, 8).unwrap();
//! assert_eq!(cfg.level_rows(), (240, 40, 4));
//!
//! let mut rng = Rng::new(7);
//! let memory = PrototypeMemory::init(cfg, &mut rng);
//! let queries = Matrix::random_uniform(3, 8, -1.0, 1.0, &mut rng);
//! let readout = memory.read(&queries).unwrap();
//! assert_eq!(readout.w_part.shape(), (3, 240));
//! ```
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ablation;
pub mod data;
pub mod encoder;
mod error;
pub mod eval;
pub mod gradsuite;
pub mod losses;
pub mod memory;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};
