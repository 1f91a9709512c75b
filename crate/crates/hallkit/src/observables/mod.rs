//! Currents, charges, time evolution, correlations, energy filters and
//! Lieb-Robinson diagnostics.

pub mod currents;
pub mod evolution;
pub mod filter;
pub mod locality;
pub mod norm;

pub use currents::{
    charge_current, current, deformed_current, i_commutator_with_number, local_current,
    windowed_current, CurrentSpec,
};
pub use evolution::{corr, from_eigenbasis, heisenberg, to_eigenbasis, Time};
pub use filter::{energy_filter, excitation_ratio, FilterResult, FilterSpec, TruncationCheck};
pub use locality::{
    commutator_growth, fit_envelope, restricted_evolution_gap, GrowthSample, LrEnvelope,
    RestrictedSample,
};
pub use norm::spectral_norm;
