//! Hall conductance by the Kubo sum, the projector trace and the time-domain
//! response; flux-torus averaging and deformation checks.

pub mod deform;
pub mod flux;
pub mod kubo;
pub mod time_domain;
pub mod trace;

use serde::{Deserialize, Serialize};

pub use deform::{deformation_invariance, DeformationEntry, DeformationReport};
pub use flux::{
    average_over_flux, gap_scan, grid_point, FluxAverage, FluxGridOptions, GapNode, GapScan,
    NodeSettings, NodeSolver, TwistFamily,
};
pub use kubo::{kubo_sum, kubo_sum_complex};
pub use time_domain::{adiabatic_bound, s_exp_integral, time_domain, TimeDomainParams, TimeDomainResult};
pub use trace::{projector_trace, TraceResult, DEFAULT_FD_STEP};

/// One inequality or agreement check: lhs <= rhs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        BoundCheck {
            name: name.into(),
            lhs,
            rhs,
            pass: lhs <= rhs,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridInfo {
    pub size: usize,
    pub refined: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConductanceReport {
    pub sigma_kubo: Option<f64>,
    pub sigma_trace: Option<f64>,
    pub sigma_time: Option<f64>,
    pub p: Option<i64>,
    pub q: Option<usize>,
    pub sigma_averaged: Option<f64>,
    pub bound_checks: Vec<BoundCheck>,
    pub grid: Option<GridInfo>,
    pub persistent_current: Option<f64>,
    pub warnings: Vec<String>,
}
