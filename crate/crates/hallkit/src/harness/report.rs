use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentKind;
use crate::error::Result;
use crate::hall::{ConductanceReport, DeformationReport, FluxAverage, GapScan, TimeDomainResult};
use crate::observables::{LrEnvelope, RestrictedSample};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSummary {
    pub preset: String,
    pub l1: usize,
    pub l2: usize,
    pub n_particles: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultipletSummary {
    pub q: usize,
    pub energies: Vec<f64>,
    pub delta_e: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub phi: [f64; 2],
    pub values: Vec<f64>,
    pub multiplet: Option<MultipletSummary>,
    /// Why detection failed, when it did.
    pub detection_failure: Option<String>,
}

/// One (η, T) entry of the convergence table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeRow {
    pub eta: f64,
    pub t: f64,
    pub sigma: f64,
    /// |σ(η,T) - σ(0,∞)|
    pub deviation: f64,
    pub bound: f64,
    pub i_cor: f64,
    pub i_cor_bound: f64,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoutePoint {
    pub phi: [f64; 2],
    pub multiplet: MultipletSummary,
    pub conductance: ConductanceReport,
    /// Kubo sum of the windowed current against J(Γ) = i[H, χ(Γ)].
    pub sigma_kubo_window: f64,
    pub time_limit: TimeDomainResult,
    pub time_table: Vec<TimeRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChernSection {
    pub conductance: ConductanceReport,
    pub flux: FluxAverage,
    pub deformation: Option<DeformationReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrRow {
    pub site: usize,
    pub distance: f64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrDecay {
    pub source: usize,
    pub multiplet: MultipletSummary,
    pub rows: Vec<CorrRow>,
    pub monotone: bool,
    /// log|value| = a - κ·distance
    pub kappa: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalitySection {
    pub observable_site: usize,
    pub omega: Vec<usize>,
    pub restricted: Vec<RestrictedSample>,
    pub restricted_pass: bool,
    pub growth: LrEnvelope,
    pub growth_zero_at_origin: bool,
    pub growth_bounded: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub model: ModelSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<SpectrumPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chern: Option<ChernSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub routes: Option<Vec<RoutePoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_scan: Option<GapScan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub locality: Option<LocalitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corr_decay: Option<CorrDecay>,
    pub warnings: Vec<String>,
}

impl Report {
    /// Every failed bound check in the report, as (name, lhs, rhs).
    pub fn failed_checks(&self) -> Vec<(String, f64, f64)> {
        let mut out = Vec::new();
        let mut push = |c: &ConductanceReport| {
            for b in c.bound_checks.iter().filter(|b| !b.pass) {
                out.push((b.name.clone(), b.lhs, b.rhs));
            }
        };
        if let Some(c) = &self.chern {
            push(&c.conductance);
        }
        for r in self.routes.iter().flatten() {
            push(&r.conductance);
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CacheLedger {
    pub enabled: bool,
    pub root: Option<String>,
    pub hits: usize,
    pub misses: usize,
    pub spot_checks: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub tool_version: String,
    pub kind: ExperimentKind,
    pub workers: usize,
    pub stages: Vec<Stage>,
    pub cache: CacheLedger,
    pub tolerances: BTreeMap<String, f64>,
}

fn csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Writes the CSV tables that exist for this report; returns their file names.
pub fn emit_plotdata(report: &Report, dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    if let Some(c) = &report.chern {
        csv(
            &dir.join("curvature.csv"),
            "phi1,phi2,F",
            c.flux.curvature_rows().iter().map(|[a, b, f]| format!("{a:.17e},{b:.17e},{f:.17e}")),
        )?;
        files.push("curvature.csv".into());
    }
    if let Some(points) = &report.routes {
        let mut rows = Vec::new();
        for p in points {
            for r in &p.time_table {
                let mut line = String::new();
                let _ = write!(
                    line,
                    "{:.17e},{:.17e},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    p.phi[0], p.phi[1], r.eta, r.t, r.sigma, r.deviation, r.bound, r.i_cor, r.i_cor_bound
                );
                rows.push(line);
            }
        }
        csv(&dir.join("sigma_eta_t.csv"), "phi1,phi2,eta,T,sigma,deviation,bound,i_cor,i_cor_bound", rows)?;
        files.push("sigma_eta_t.csv".into());
    }
    if let Some(g) = &report.gap_scan {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.17e}")).unwrap_or_default();
        csv(
            &dir.join("gap_scan.csv"),
            "phi1,phi2,q,gap,delta_e",
            g.nodes.iter().map(|n| {
                format!(
                    "{:.17e},{:.17e},{},{},{}",
                    n.phi[0],
                    n.phi[1],
                    n.q.map(|q| q.to_string()).unwrap_or_default(),
                    opt(n.gap),
                    opt(n.delta_e)
                )
            }),
        )?;
        files.push("gap_scan.csv".into());
    }
    if let Some(c) = &report.corr_decay {
        csv(
            &dir.join("corr_decay.csv"),
            "distance,site,value,log_abs_value",
            c.rows.iter().map(|r| format!("{},{},{:.17e},{:.17e}", r.distance, r.site, r.abs, r.abs.ln())),
        )?;
        files.push("corr_decay.csv".into());
    }
    if let Some(l) = &report.locality {
        csv(
            &dir.join("locality.csv"),
            "distance,time,value,bound",
            l.growth
                .samples
                .iter()
                .map(|s| format!("{},{:.17e},{:.17e},{:.17e}", s.distance, s.t, s.norm, s.bound)),
        )?;
        csv(
            &dir.join("restricted_evolution.csv"),
            "time,lhs,rhs,quadrature_tol,pass",
            l.restricted
                .iter()
                .map(|s| format!("{:.17e},{:.17e},{:.17e},{:.3e},{}", s.t, s.lhs, s.rhs, s.quadrature_tol, s.pass)),
        )?;
        files.push("locality.csv".into());
        files.push("restricted_evolution.csv".into());
    }
    Ok(files)
}
