use serde::{Deserialize, Serialize};

use super::flux::{average_over_flux, FluxAverage, FluxGridOptions, NodeSettings, NodeSolver, TwistFamily};
use crate::error::Result;
use crate::lattice::CutFunction;
use crate::spectra::EigenCache;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeformationEntry {
    pub label: String,
    pub p: i64,
    pub q: usize,
    pub grid: usize,
    pub refined: bool,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeformationReport {
    pub baseline: DeformationEntry,
    pub entries: Vec<DeformationEntry>,
    pub pass: bool,
}

fn entry(label: String, r: &FluxAverage, baseline: Option<(i64, usize)>) -> DeformationEntry {
    DeformationEntry {
        label,
        p: r.p,
        q: r.q,
        grid: r.n,
        refined: r.refined,
        residual: r.residual,
        pass: baseline.map_or(true, |b| b == (r.p, r.q)),
    }
}

/// Recomputes p for each α (deformation e^{-iαφ1 n_x}) and for each deformed
/// cut, and compares with the undeformed family.
pub fn deformation_invariance(
    family: &TwistFamily,
    alphas: &[f64],
    site: usize,
    cuts: &[CutFunction],
    settings: &NodeSettings,
    grid: &FluxGridOptions,
    cache: Option<&EigenCache>,
) -> Result<DeformationReport> {
    let run = |f: &TwistFamily| -> Result<FluxAverage> {
        let solver = NodeSolver::new(f, settings.clone(), cache)?;
        average_over_flux(&solver, grid)
    };
    let base = run(family)?;
    let key = Some((base.p, base.q));
    let mut entries = Vec::new();
    for &a in alphas {
        let f = family.clone().with_alpha(a, site)?;
        entries.push(entry(format!("alpha={a} site={site}"), &run(&f)?, key));
    }
    for (i, c) in cuts.iter().enumerate() {
        let f = family.clone().with_cut(c)?;
        entries.push(entry(format!("deformed cut #{i} (direction {}, k={})", u8::from(c.dir), c.k), &run(&f)?, key));
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(DeformationReport {
        baseline: entry("undeformed".into(), &base, None),
        entries,
        pass,
    })
}
