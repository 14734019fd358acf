//! Dense matrices, a reverse-mode differentiation tape and a central
//! difference gradient checker.

mod gradcheck;
mod graph;
mod matrix;
mod rng;

pub use gradcheck::{grad_check, GradCheck};
pub use graph::{Gradients, Graph, Var};
pub use matrix::{cosine_rows, softmax_rows, Matrix, NORM_FLOOR};
pub use rng::Rng;
