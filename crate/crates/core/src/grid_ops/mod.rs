//! Grids, image and flow containers, difference operators and the flow system.

mod grid;
mod sparse;
mod system;

pub use grid::{devectorize, vectorize, FlowField, GridSpec, ImageField, Matrix};
pub use sparse::{SparseOperator, SparsePair};
pub use system::{
    assemble_system, build_diff_matrix, build_qx_qy, build_regularizer, image_gradients, zero_unknowns, FlowSystem,
};
