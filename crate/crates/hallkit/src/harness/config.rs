use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::manybody::{Bond, HamiltonianSpec, HoppingSet, Interaction, InteractionSet};
use crate::models::{self, Flux};
use crate::spectra::{DetectOptions, SolverOptions, DEFAULT_DENSE_THRESHOLD};
use crate::C64;

fn one() -> f64 {
    1.0
}

/// A raw bond `amp · c†_{from+disp} c_from`; Hermitian partners must be listed too.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopEntry {
    pub from: [usize; 2],
    pub disp: [i32; 2],
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// hofstadter | hofstadter_hubbard | atomic_insulator | chain | explicit
    pub preset: String,
    pub l1: Option<usize>,
    pub l2: Option<usize>,
    /// Flux per plaquette as [n, m].
    pub flux: Option<[i64; 2]>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default)]
    pub v_nn: f64,
    pub n: Option<usize>,
    /// Onsite energies, one per site. Required by atomic_insulator, added on
    /// top of every other preset.
    pub potentials: Option<Vec<f64>>,
    #[serde(default)]
    pub periodic: Option<bool>,
    pub hoppings: Option<Vec<HopEntry>>,
    pub interactions: Option<Vec<Interaction>>,
    pub range: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spectrum,
    Chern,
    KuboVsTime,
    GapScan,
    Locality,
    CorrDecay,
}

impl ExperimentKind {
    /// Kinds whose pipeline needs every eigenpair.
    pub fn needs_full_spectrum(self, kubo_average: bool) -> bool {
        match self {
            ExperimentKind::KuboVsTime | ExperimentKind::Locality | ExperimentKind::CorrDecay => true,
            ExperimentKind::Chern => kubo_average,
            ExperimentKind::Spectrum | ExperimentKind::GapScan => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformedCutConfig {
    /// Direction 1 or 2.
    #[serde(default = "default_dir")]
    pub dir: u8,
    pub k: usize,
    pub anchor: [usize; 2],
    #[serde(default = "default_r0")]
    pub r0: f64,
    /// (site index, value) pairs replacing the step near the anchor.
    pub values: Vec<(usize, f64)>,
}

fn default_dir() -> u8 {
    1
}
fn default_r0() -> f64 {
    crate::lattice::DEFAULT_AGREEMENT_RADIUS
}
fn default_ratio() -> f64 {
    crate::spectra::multiplet::DEFAULT_RATIO_THRESHOLD
}
fn default_q_max() -> usize {
    crate::spectra::multiplet::DEFAULT_Q_MAX
}
fn default_grid() -> usize {
    crate::hall::flux::DEFAULT_GRID
}
fn default_refine() -> usize {
    crate::hall::flux::DEFAULT_REFINED_GRID
}
fn default_phi() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0]]
}
fn default_eta() -> Vec<f64> {
    vec![0.1, 0.05]
}
fn default_t_switch() -> Vec<f64> {
    vec![50.0, 100.0]
}
fn default_half() -> usize {
    1
}
fn default_fd() -> f64 {
    crate::hall::DEFAULT_FD_STEP
}
fn default_t_max() -> f64 {
    2.0
}
fn default_samples() -> usize {
    21
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub q_hint: Option<usize>,
    #[serde(default = "default_ratio")]
    pub ratio_threshold: f64,
    #[serde(default = "default_q_max")]
    pub q_max: usize,
    /// Twist lines [k1, k2]; defaults to [0, 0].
    pub cut: Option<[usize; 2]>,
    #[serde(default)]
    pub gauge_moves: [usize; 2],
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Grid used when the first one fails integrality; 0 disables refinement.
    #[serde(default = "default_refine")]
    pub refine_to: usize,
    #[serde(default)]
    pub kubo_average: bool,
    pub mixing_seed: Option<u64>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    pub deform_site: Option<usize>,
    #[serde(default)]
    pub deformed_cuts: Vec<DeformedCutConfig>,
    /// Eigenvalues to report in a spectrum run; all of them when absent.
    pub levels: Option<usize>,
    #[serde(default = "default_phi")]
    pub phi: Vec<[f64; 2]>,
    #[serde(default = "default_eta")]
    pub eta: Vec<f64>,
    #[serde(default = "default_t_switch")]
    pub t_switch: Vec<f64>,
    #[serde(default = "default_half")]
    pub window: usize,
    #[serde(default = "default_half")]
    pub region: usize,
    /// Cut anchor (k, ℓ) for the time-domain response; defaults to the cut.
    pub anchor: Option<[usize; 2]>,
    #[serde(default = "default_fd")]
    pub fd_step: f64,
    /// Locality: observable n_x and restriction region Ω.
    pub observable_site: Option<usize>,
    #[serde(default)]
    pub omega: Vec<usize>,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Locality and correlation decay: source site and probe sites.
    pub source: Option<usize>,
    #[serde(default)]
    pub probes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_dense")]
    pub dense_threshold: usize,
    pub tol: Option<f64>,
    pub max_restarts: Option<usize>,
}

fn default_dense() -> usize {
    DEFAULT_DENSE_THRESHOLD
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            tol: None,
            max_restarts: None,
        }
    }
}

fn default_out() -> String {
    "hallkit-out".into()
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: String,
    #[serde(default = "yes")]
    pub cache: bool,
    /// Cache root; `$HALLKIT_CACHE_DIR` or `.hallkit-cache` when absent.
    pub cache_dir: Option<String>,
    /// Worker threads; all available cores when absent.
    pub workers: Option<usize>,
    /// Accept odd lattice dimensions.
    #[serde(default)]
    pub allow_odd: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out(),
            cache: true,
            cache_dir: None,
            workers: None,
            allow_odd: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Sets `a.b.c = value` in a TOML table. The value is parsed as TOML and
/// falls back to a plain string.
fn set_path(root: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key '{key}'")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}': '{p}' is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parses the config text and applies `key=value` overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not of the form key=value")))?;
            set_path(&mut table, k.trim(), v.trim())?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Canonical serialization used for hashing.
    pub fn canonical(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        let m = &self.model;
        let l1 = m.l1.ok_or_else(|| Error::Config("model.l1 is required".into()))?;
        let l2 = if m.preset == "chain" { 1 } else { m.l2.ok_or_else(|| Error::Config("model.l2 is required".into()))? };
        LatticeSpec::new(l1, l2)
    }

    pub fn build_model(&self) -> Result<HamiltonianSpec> {
        let m = &self.model;
        let lat = self.lattice()?;
        let n = m.n.ok_or_else(|| Error::Config("model.n (particle number) is required".into()))?;
        let flux = || -> Result<Flux> {
            let [a, b] = m.flux.ok_or_else(|| Error::Config(format!("preset {} needs model.flux", m.preset)))?;
            Flux::new(a, b)
        };
        let mut spec = match m.preset.as_str() {
            "hofstadter" => models::hofstadter(lat.l1, lat.l2, flux()?, m.t, n)?,
            "hofstadter_hubbard" => models::hofstadter_hubbard(lat.l1, lat.l2, flux()?, m.t, m.v_nn, n)?,
            "atomic_insulator" => {
                let p = m
                    .potentials
                    .as_ref()
                    .ok_or_else(|| Error::Config("atomic_insulator needs model.potentials".into()))?;
                return models::atomic_insulator(lat.l1, lat.l2, p, n);
            }
            "chain" => models::chain(lat.l1, m.t, m.v_nn, n, m.periodic.unwrap_or(true))?,
            "explicit" => {
                let bonds = m
                    .hoppings
                    .iter()
                    .flatten()
                    .map(|h| {
                        let to = lat.wrap([h.from[0] as i64 + h.disp[0] as i64, h.from[1] as i64 + h.disp[1] as i64]);
                        if h.from[0] >= lat.l1 || h.from[1] >= lat.l2 {
                            return Err(Error::InvalidInput(format!("hopping origin {:?} outside lattice", h.from)));
                        }
                        Ok(Bond {
                            to: lat.index(to),
                            from: lat.index(h.from),
                            disp: h.disp,
                            amp: C64::new(h.re, h.im),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let range = m.range.unwrap_or(1);
                let hs = HoppingSet::new(lat, range, bonds)?;
                let inter = InteractionSet::new(&lat, range, m.interactions.clone().unwrap_or_default())?;
                HamiltonianSpec::new(hs, inter, n)?
            }
            other => return Err(Error::Config(format!("unknown model preset '{other}'"))),
        };
        if let Some(p) = &m.potentials {
            if p.len() != lat.n_sites() {
                return Err(Error::InvalidInput(format!(
                    "expected {} potentials, got {}",
                    lat.n_sites(),
                    p.len()
                )));
            }
            let pot: Vec<(usize, f64)> = p.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
            spec = spec.with_potential(&pot)?;
        }
        Ok(spec)
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions {
            dense_threshold: self.solver.dense_threshold,
            ..Default::default()
        };
        if let Some(t) = self.solver.tol {
            o.tol = t;
        }
        if let Some(r) = self.solver.max_restarts {
            o.max_restarts = r;
        }
        o
    }

    pub fn detect_options(&self) -> DetectOptions {
        DetectOptions {
            q_hint: self.experiment.q_hint,
            ratio_threshold: self.experiment.ratio_threshold,
            q_max: self.experiment.q_max,
        }
    }

    pub fn cut(&self) -> [usize; 2] {
        self.experiment.cut.unwrap_or([0, 0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[model]
preset = "hofstadter"
l1 = 6
l2 = 3
flux = [1, 3]
n = 6

[experiment]
kind = "chern"
grid = 8
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::parse(BASIC, &[]).unwrap();
        assert_eq!(c.experiment.kind, ExperimentKind::Chern);
        assert_eq!(c.experiment.grid, 8);
        assert_eq!(c.experiment.refine_to, 24);
        assert!(c.output.cache);
        assert_eq!(c.build_model().unwrap().n_particles, 6);
    }

    #[test]
    fn overrides_apply() {
        let c = ExperimentConfig::parse(
            BASIC,
            &["experiment.grid=12".into(), "output.dir=elsewhere".into(), "model.t=0.5".into()],
        )
        .unwrap();
        assert_eq!(c.experiment.grid, 12);
        assert_eq!(c.output.dir, "elsewhere");
        assert_eq!(c.model.t, 0.5);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::parse(BASIC, &["experiment.gird=3".into()]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
