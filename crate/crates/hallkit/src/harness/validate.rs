use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::lattice::LatticeSpec;
use crate::manybody::FockBasis;
use crate::models::Flux;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub items: Vec<Diagnostic>,
}

impl Diagnostics {
    fn error(&mut self, field: &str, message: impl Into<String>) {
        self.items.push(Diagnostic {
            severity: Severity::Error,
            field: field.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, field: &str, message: impl Into<String>) {
        self.items.push(Diagnostic {
            severity: Severity::Warning,
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.items.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn summary(&self) -> String {
        self.errors()
            .map(|d| format!("{}: {}", d.field, d.message))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Static checks on a parsed config. Never stops at the first problem.
pub fn validate(cfg: &ExperimentConfig) -> Diagnostics {
    let mut d = Diagnostics::default();
    let m = &cfg.model;
    let e = &cfg.experiment;
    let chain = m.preset == "chain";

    let known = ["hofstadter", "hofstadter_hubbard", "atomic_insulator", "chain", "explicit"];
    if !known.contains(&m.preset.as_str()) {
        d.error("model.preset", format!("unknown preset '{}'; expected one of {}", m.preset, known.join(", ")));
    }

    let dims = [("model.l1", m.l1), ("model.l2", if chain { Some(1) } else { m.l2 })];
    for (name, v) in dims {
        match v {
            None => d.error(name, "missing lattice dimension"),
            Some(0) => d.error(name, "lattice dimension must be positive"),
            Some(l) if l % 2 == 1 && !cfg.output.allow_odd && !(chain && name == "model.l2") => d.error(
                name,
                format!("{name} = {l} is odd; the torus sides must be positive even integers (set output.allow_odd = true to accept it)"),
            ),
            _ => {}
        }
    }
    if chain && m.l2.is_some_and(|l| l != 1) {
        d.error("model.l2", "a chain has l2 = 1");
    }
    let lat = cfg.lattice().ok();

    if m.n.is_none() {
        d.error("model.n", "particle number is required");
    }
    if m.v_nn < 0.0 {
        d.error("model.v_nn", "nearest-neighbour repulsion must be nonnegative");
    }
    if let (Some(lat), Some([a, b])) = (lat, m.flux) {
        match Flux::new(a, b).and_then(|f| f.check_commensurate(&lat)) {
            Ok(()) => {}
            Err(err) => d.error("model.flux", err.to_string()),
        }
    } else if matches!(m.preset.as_str(), "hofstadter" | "hofstadter_hubbard") && m.flux.is_none() {
        d.error("model.flux", "flux [n, m] is required for this preset");
    }
    if m.preset == "explicit" && m.hoppings.is_none() {
        d.error("model.hoppings", "an explicit model needs a hopping list");
    }

    let mut dim = None;
    if lat.is_some() && m.n.is_some() && known.contains(&m.preset.as_str()) {
        match cfg.build_model() {
            Ok(spec) => match FockBasis::new(&spec.lattice, spec.n_particles) {
                Ok(b) => dim = Some(b.dim()),
                Err(err) => d.error("model.n", err.to_string()),
            },
            Err(err) => d.error("model", err.to_string()),
        }
    }

    if let Some(lat) = lat {
        check_sites(&mut d, &lat, cfg);
    }

    if e.grid < 2 {
        d.error("experiment.grid", "flux grid needs at least 2 points per side");
    }
    if e.refine_to != 0 && e.refine_to <= e.grid {
        d.error("experiment.refine_to", "refinement grid must be finer than experiment.grid (or 0 to disable)");
    }
    if e.q_hint == Some(0) || e.q_max == 0 {
        d.error("experiment.q_hint", "multiplet size must be at least 1");
    }
    if !(e.ratio_threshold > 1.0) {
        d.error("experiment.ratio_threshold", "ratio threshold must exceed 1");
    }
    if !(e.fd_step > 0.0) {
        d.error("experiment.fd_step", "finite-difference step must be positive");
    }
    if e.kind == ExperimentKind::KuboVsTime {
        if e.phi.is_empty() {
            d.error("experiment.phi", "at least one twist point is required");
        }
        if e.eta.iter().any(|x| !(*x > 0.0)) {
            d.error("experiment.eta", "switching rates must be positive");
        }
        if e.t_switch.iter().any(|x| !(*x > 0.0)) {
            d.error("experiment.t_switch", "switching times must be positive");
        }
        for &eta in &e.eta {
            for &t in &e.t_switch {
                if eta * t < crate::hall::time_domain::ETA_T_WARNING {
                    d.warn("experiment.eta", format!("eta*T = {:.3} is small; the limit ordering is poorly approximated", eta * t));
                }
            }
        }
    }
    if matches!(e.kind, ExperimentKind::Locality | ExperimentKind::CorrDecay) {
        if e.source.is_none() {
            d.error("experiment.source", "source site is required");
        }
        if e.probes.is_empty() {
            d.error("experiment.probes", "at least one probe site is required");
        }
    }
    if e.kind == ExperimentKind::Locality {
        if e.observable_site.is_none() {
            d.error("experiment.observable_site", "observable site is required");
        }
        if e.omega.is_empty() {
            d.error("experiment.omega", "restriction region is required");
        }
        if !(e.t_max > 0.0) || e.samples < 2 {
            d.error("experiment.samples", "time grid needs t_max > 0 and at least 2 samples");
        }
    }
    if cfg.output.workers == Some(0) {
        d.error("output.workers", "worker count must be positive");
    }
    if let Some(t) = cfg.solver.tol {
        if !(t > 0.0) {
            d.error("solver.tol", "tolerance must be positive");
        }
    }

    if let Some(n) = dim {
        if e.kind.needs_full_spectrum(e.kubo_average) && n > cfg.solver.dense_threshold {
            d.error(
                "solver.dense_threshold",
                format!(
                    "experiment '{:?}' needs full spectra but the basis dimension {n} exceeds dense_threshold = {}",
                    e.kind, cfg.solver.dense_threshold
                ),
            );
        }
    }
    d
}

fn check_sites(d: &mut Diagnostics, lat: &LatticeSpec, cfg: &ExperimentConfig) {
    let e = &cfg.experiment;
    let ns = lat.n_sites();
    if let Some([k1, k2]) = e.cut {
        if k1 >= lat.l1 || k2 >= lat.l2 {
            d.error("experiment.cut", format!("cut [{k1}, {k2}] outside the {}x{} lattice", lat.l1, lat.l2));
        }
    }
    if let Some([a, b]) = e.anchor {
        if a >= lat.l1 || b >= lat.l2 {
            d.error("experiment.anchor", format!("anchor [{a}, {b}] outside the lattice"));
        }
    }
    for (i, c) in e.deformed_cuts.iter().enumerate() {
        let f = format!("experiment.deformed_cuts[{i}]");
        if c.dir != 1 && c.dir != 2 {
            d.error(&f, "direction must be 1 or 2");
        } else if c.k >= if c.dir == 1 { lat.l1 } else { lat.l2 } {
            d.error(&f, format!("cut line {} outside the lattice", c.k));
        }
        if c.anchor[0] >= lat.l1 || c.anchor[1] >= lat.l2 {
            d.error(&f, "anchor outside the lattice");
        }
        if c.values.iter().any(|(s, _)| *s >= ns) {
            d.error(&f, "deformation site outside the lattice");
        }
    }
    let singles = [
        ("experiment.deform_site", e.deform_site),
        ("experiment.observable_site", e.observable_site),
        ("experiment.source", e.source),
    ];
    for (name, s) in singles {
        if let Some(s) = s {
            if s >= ns {
                d.error(name, format!("site {s} outside the {ns}-site lattice"));
            }
        }
    }
    for (name, list) in [("experiment.omega", &e.omega), ("experiment.probes", &e.probes)] {
        if let Some(s) = list.iter().find(|s| **s >= ns) {
            d.error(name, format!("site {s} outside the {ns}-site lattice"));
        }
    }
    if !e.alphas.is_empty() && e.deform_site.is_none() {
        d.error("experiment.deform_site", "alphas need a deformation site");
    }
    if let (Some(x), false) = (e.observable_site, e.omega.is_empty()) {
        if !e.omega.contains(&x) {
            d.error("experiment.omega", "the observable site must lie inside the restriction region");
        }
    }
    if let Some(p) = &cfg.model.potentials {
        if p.len() != ns {
            d.error("model.potentials", format!("expected {ns} onsite energies, got {}", p.len()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &[&str]) -> ExperimentConfig {
        let text = r#"
[model]
preset = "hofstadter"
l1 = 4
l2 = 4
flux = [1, 4]
n = 4

[experiment]
kind = "chern"
"#;
        let o: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        ExperimentConfig::parse(text, &o).unwrap()
    }

    #[test]
    fn valid_config_is_clean() {
        assert!(validate(&cfg(&[])).items.is_empty());
    }

    #[test]
    fn odd_side_cites_even_requirement() {
        let d = validate(&cfg(&["model.l2=3"]));
        assert!(d.has_errors());
        assert!(d.summary().contains("even"), "{}", d.summary());
        assert!(!validate(&cfg(&["model.l2=3", "output.allow_odd=true"])).has_errors());
    }

    #[test]
    fn dense_feasibility_names_threshold() {
        let d = validate(&cfg(&["experiment.kind=\"kubo_vs_time\"", "solver.dense_threshold=100"]));
        assert!(d.summary().contains("dense_threshold = 100"), "{}", d.summary());
    }

    #[test]
    fn errors_are_aggregated() {
        let d = validate(&cfg(&["model.l1=5", "model.flux=[1,3]", "experiment.cut=[9,0]"]));
        assert!(d.errors().count() >= 3, "{:?}", d.items);
    }

    #[test]
    fn non_hermitian_explicit_hoppings() {
        let text = r#"
[model]
preset = "explicit"
l1 = 2
l2 = 2
n = 1
hoppings = [{ from = [0, 0], disp = [1, 0], re = 1.0 }]

[experiment]
kind = "spectrum"
"#;
        let c = ExperimentConfig::parse(text, &[]).unwrap();
        let d = validate(&c);
        assert!(d.summary().to_lowercase().contains("hermit"), "{}", d.summary());
    }
}
