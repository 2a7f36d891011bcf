//! Polynomial transfer functions, the additive model parametrization,
//! state-space realizations, ZOH discretization and Sylvester matrices.

pub mod model;
pub mod ss;
pub mod sylvester;
pub mod tf;

pub use model::{
    additive_to_unfactored, pack_parameters, reflect_unstable_roots, unpack_parameters, AdditiveModel, CtSubmodel,
    ModelStructure, ParameterVector,
};
pub use ss::{zoh_discretize, DiscreteStateSpace, StateSpace};
pub use sylvester::sylvester_matrix;
pub use tf::{CtTransferFunction, DtTransferFunction};
