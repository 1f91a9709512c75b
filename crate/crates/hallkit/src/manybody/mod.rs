//! Fixed-N fermion sector: basis, sparse operators, Hamiltonians, twists and gauge moves.

pub mod basis;
pub mod hamiltonian;
pub mod hopping;
pub mod operator;

pub use basis::{matrix_element_hop, FockBasis};
pub use hamiltonian::{
    build_hamiltonian, diagonal_from_cut, diagonal_from_weights, gauge_move_operator,
    gauge_move_state, hop_operator, number_operator, region_charge, HamiltonianSpec, Interaction,
    InteractionSet,
};
pub use hopping::{gauge_generator, Bond, HoppingBuilder, HoppingSet, Twist, TwistConfig};
pub use operator::SparseOperator;
