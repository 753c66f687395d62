//! Scenario configuration: one JSON document, validated and fully defaulted.
//!
//! Parsing rejects unknown keys (listing all of them) and every stability
//! guard violation, naming the guard. The normalized [`ScenarioConfig`] spells
//! out every field, so `parse(emit(c)) == c`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::ensemble::PROPAGATION_GUARD;
use crate::error::{Error, Result};
pub use crate::experiments::custom::ObservableSpec;
use crate::experiments::fig1::default_fig1_steps;
use crate::io::content_hash;
use crate::trajectory::STABILITY_GUARD;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig1,
    NoSignalling,
    AppendixA,
    Custom,
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| Error::config(format!("unknown experiment {s:?}; expected fig1, no_signalling, appendix_a or custom")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Master,
    Trajectories,
    Both,
}

impl Mode {
    pub fn master(self) -> bool {
        matches!(self, Mode::Master | Mode::Both)
    }

    pub fn trajectories(self) -> bool {
        matches!(self, Mode::Trajectories | Mode::Both)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| Error::config(format!("unknown mode {s:?}; expected master, trajectories or both")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub experiment: Experiment,
    pub mode: Mode,
    pub seed: u64,
    /// Dimension of the system (of `A` for no-signalling).
    pub dim: usize,
    /// Dimension of `B` for no-signalling.
    pub dim_b: usize,
    pub alpha_eff: f64,
    /// Couplings swept by fig1.
    pub alpha_grid: Vec<f64>,
    pub j_eff: f64,
    pub sectors: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub sample_stride: usize,
    pub ensemble_size: usize,
    /// Steps of the fig1 trajectory cross-check.
    pub trajectory_steps: usize,
    pub spectrum_range: (f64, f64),
    pub spacing_std: f64,
    pub mean_fraction: f64,
    pub init_state_std: f64,
    pub random_phases: bool,
    /// `O₁` levels for fig1 (`null`: lowest and highest window members).
    pub pair: Option<(usize, usize)>,
    pub observables: Vec<ObservableSpec>,
    pub out: String,
    /// Worker threads (`null`: hardware parallelism).
    pub workers: Option<usize>,
}

const KEYS: &[&str] = &[
    "experiment",
    "mode",
    "seed",
    "dim",
    "dim_b",
    "alpha_eff",
    "alpha_grid",
    "j_eff",
    "sectors",
    "dt",
    "n_steps",
    "sample_stride",
    "ensemble_size",
    "trajectory_steps",
    "spectrum_range",
    "spacing_std",
    "mean_fraction",
    "init_state_std",
    "random_phases",
    "pair",
    "observables",
    "out",
    "workers",
];

impl ScenarioConfig {
    /// Defaults for `experiment`, with `n_steps` matched to the default couplings.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = ScenarioConfig {
            experiment,
            mode: Mode::Master,
            seed: 0,
            dim: 8,
            dim_b: 8,
            alpha_eff: 1.0,
            alpha_grid: vec![0.0, 0.5, 1.0, 2.0],
            j_eff: 0.0,
            sectors: 2,
            dt: 1e-3,
            n_steps: 2000,
            sample_stride: 20,
            ensemble_size: 500,
            trajectory_steps: 10_000,
            spectrum_range: (0.0, 10.0),
            spacing_std: 0.3 * 10.0 / 7.0,
            mean_fraction: 0.6,
            init_state_std: 0.2,
            random_phases: true,
            pair: None,
            observables: vec![ObservableSpec::Energy, ObservableSpec::RandomHermitian { seed: 0 }],
            out: "out".into(),
            workers: None,
        };
        match experiment {
            Experiment::Fig1 => ScenarioConfig {
                dim: 25,
                dim_b: 25,
                dt: 1e-4,
                n_steps: default_fig1_steps(&base.alpha_grid, 1e-4),
                sample_stride: 50,
                ensemble_size: 200,
                spacing_std: 0.01,
                observables: Vec::new(),
                ..base
            },
            Experiment::NoSignalling => ScenarioConfig {
                dim: 4,
                dim_b: 4,
                n_steps: 5000,
                sample_stride: 10,
                observables: Vec::new(),
                ..base
            },
            Experiment::AppendixA => ScenarioConfig {
                mode: Mode::Trajectories,
                j_eff: 1.0,
                n_steps: 8000,
                sample_stride: 200,
                ensemble_size: 2000,
                observables: Vec::new(),
                ..base
            },
            Experiment::Custom => ScenarioConfig {
                mode: Mode::Both,
                j_eff: 0.5,
                ..base
            },
        }
    }

    /// Canonical JSON text.
    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical JSON.
    pub fn hash(&self) -> String {
        content_hash(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        let couplings = std::iter::once(("alpha_eff", self.alpha_eff))
            .chain(std::iter::once(("j_eff", self.j_eff)))
            .chain(self.alpha_grid.iter().map(|&a| ("alpha_grid", a)));
        for (name, v) in couplings {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("dt must be > 0, got {}", self.dt));
        }
        if self.dim < 2 || self.dim_b < 1 {
            return fail(format!("dim must be >= 2 and dim_b >= 1 (got {}, {})", self.dim, self.dim_b));
        }
        if self.sample_stride == 0 {
            return fail("sample_stride must be >= 1".into());
        }
        if self.sectors == 0 || self.sectors > self.dim {
            return fail(format!("sectors must be in 1..={}, got {}", self.dim, self.sectors));
        }
        if !(self.spectrum_range.1 > self.spectrum_range.0) || self.spacing_std < 0.0 || self.init_state_std < 0.0 {
            return fail("spectrum_range must be increasing; spacing_std and init_state_std must be >= 0".into());
        }
        if self.workers == Some(0) {
            return fail("workers must be >= 1 (or null)".into());
        }
        let alphas: Vec<f64> = match self.experiment {
            Experiment::Fig1 => self.alpha_grid.clone(),
            _ => vec![self.alpha_eff],
        };
        let j = if matches!(self.experiment, Experiment::AppendixA | Experiment::Custom) {
            self.j_eff
        } else {
            0.0
        };
        let uses_trajectories = match self.experiment {
            Experiment::AppendixA => true,
            Experiment::NoSignalling => false,
            _ => self.mode.trajectories(),
        };
        let uses_master = match self.experiment {
            Experiment::AppendixA | Experiment::NoSignalling => true,
            _ => self.mode.master(),
        };
        for &a in &alphas {
            if uses_trajectories && a * self.dt > STABILITY_GUARD {
                return fail(format!(
                    "stability guard alpha_eff·dt <= {STABILITY_GUARD} violated: {a}·{} = {}",
                    self.dt,
                    a * self.dt
                ));
            }
            if uses_master && (a + j) * self.dt > PROPAGATION_GUARD {
                return fail(format!(
                    "propagation guard (alpha_eff + j_eff)·dt <= {PROPAGATION_GUARD} violated: ({a} + {j})·{} = {}",
                    self.dt,
                    (a + j) * self.dt
                ));
            }
        }
        if uses_trajectories && j * self.dt > STABILITY_GUARD {
            return fail(format!(
                "stability guard j_eff·dt <= {STABILITY_GUARD} violated: {j}·{} = {}",
                self.dt,
                j * self.dt
            ));
        }
        match self.experiment {
            Experiment::Fig1 if self.alpha_grid.is_empty() => fail("fig1 needs a nonempty alpha_grid".into()),
            Experiment::NoSignalling if self.mode == Mode::Trajectories => {
                fail("no_signalling is a master-equation experiment; mode must be master or both".into())
            }
            Experiment::AppendixA if !(self.alpha_eff > 0.0 && self.j_eff > 0.0) => {
                fail("appendix_a needs alpha_eff > 0 and j_eff > 0".into())
            }
            Experiment::AppendixA if self.ensemble_size < crate::diagnostics::MIN_MARTINGALE_SAMPLES => fail(format!(
                "appendix_a needs ensemble_size >= {}",
                crate::diagnostics::MIN_MARTINGALE_SAMPLES
            )),
            Experiment::Custom if self.mode.trajectories() && self.ensemble_size == 0 => {
                fail("trajectory mode needs ensemble_size >= 1".into())
            }
            _ => Ok(()),
        }
    }
}

/// Parse and normalize one JSON document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    if text.trim().is_empty() {
        return Err(Error::config("config text is empty"));
    }
    let value: Value = serde_json::from_str(text).map_err(|e| Error::config(format!("config is not valid JSON: {e}")))?;
    normalize(value)
}

pub fn parse_config_file(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Normalize a raw JSON object: reject unknown keys, fill defaults, validate.
pub fn normalize(value: Value) -> Result<ScenarioConfig> {
    let Value::Object(raw) = value else {
        return Err(Error::config("config must be a JSON object"));
    };
    let unknown: Vec<&str> = raw.keys().map(String::as_str).filter(|k| !KEYS.contains(k)).collect();
    if !unknown.is_empty() {
        return Err(Error::config(format!("unknown config keys: {}", unknown.join(", "))));
    }
    let experiment: Experiment = match raw.get("experiment") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::config(format!("experiment: {e}")))?,
        None => return Err(Error::config("missing required key: experiment")),
    };
    let mut merged: Map<String, Value> = match serde_json::to_value(ScenarioConfig::defaults(experiment))? {
        Value::Object(m) => m,
        _ => unreachable!("config serializes to an object"),
    };
    // A user-chosen coupling grid or step size without an explicit step count re-derives it.
    if experiment == Experiment::Fig1 && !raw.contains_key("n_steps") {
        let grid: Vec<f64> = match raw.get("alpha_grid") {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::config(format!("alpha_grid: {e}")))?,
            None => ScenarioConfig::defaults(experiment).alpha_grid,
        };
        let dt: f64 = match raw.get("dt") {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::config(format!("dt: {e}")))?,
            None => 1e-4,
        };
        if dt > 0.0 && dt.is_finite() && grid.iter().all(|a| a.is_finite()) {
            merged.insert("n_steps".into(), Value::from(default_fig1_steps(&grid, dt)));
        }
    }
    for (k, v) in raw {
        merged.insert(k, v);
    }
    let cfg: ScenarioConfig =
        serde_json::from_value(Value::Object(merged)).map_err(|e| Error::config(format!("invalid config value: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_fig1_is_fully_defaulted() {
        let c = parse_config(r#"{"experiment":"fig1","seed":7}"#).unwrap();
        assert_eq!((c.dim, c.dt, c.seed), (25, 1e-4, 7));
        assert_eq!(c.n_steps, 800_000);
        let text = c.emit();
        for k in KEYS {
            assert!(text.contains(&format!("\"{k}\"")), "{k} missing from normalized output");
        }
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let e = parse_config(r#"{"experiment":"fig1","colour":1,"size":2}"#).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("colour") && msg.contains("size"), "{msg}");
    }

    #[test]
    fn negative_coupling_rejected() {
        assert!(parse_config(r#"{"experiment":"custom","alpha_eff":-1}"#).is_err());
        assert!(parse_config(r#"{"experiment":"fig1","alpha_grid":[0,-0.5]}"#).is_err());
    }

    #[test]
    fn guard_violation_names_the_guard() {
        let e = parse_config(r#"{"experiment":"custom","alpha_eff":100,"dt":0.01}"#).unwrap_err();
        assert!(e.to_string().contains("guard"), "{e}");
    }

    #[test]
    fn round_trip_is_exact() {
        for exp in ["fig1", "no_signalling", "appendix_a", "custom"] {
            let c = parse_config(&format!(r#"{{"experiment":"{exp}","seed":3,"dt":0.0003}}"#)).unwrap();
            assert_eq!(parse_config(&c.emit()).unwrap(), c);
        }
    }

    #[test]
    fn experiment_is_required() {
        assert!(parse_config(r#"{"seed":1}"#).is_err());
        assert!(parse_config("  ").is_err());
    }
}
