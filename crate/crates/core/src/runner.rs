//! Experiment dispatch and the artifact tree.
//!
//! ```text
//! out/provenance.json   config, hash, version, stream scheme, interpretation flags, artifacts
//! out/curves/*.csv      one file per curve
//! out/summary.txt       PASS/FAIL per check, then a RESULT line
//! ```

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{Experiment, ScenarioConfig};
use crate::diagnostics::{MartingaleReport, Verdict};
use crate::error::{Error, Result};
use crate::experiments::appendix_a::{run_appendix_a, AppendixAReport, AppendixAScenario};
use crate::experiments::custom::{run_custom, CustomOutput, CustomScenario};
use crate::experiments::fig1::{random_spectrum, run_fig1, Fig1Output, Fig1Scenario};
use crate::experiments::no_signalling::{maximally_entangled, run_no_signalling, NoSignallingReport, SignallingGenerator};
use crate::experiments::Check;
use crate::io::{ensemble_table, fmt_f64, write_csv_file, write_json_file};
use crate::montecarlo::{Moment, TrajectoryEnsemble};
use crate::quantum::DensityMatrix;
use crate::suite::{run_suite, SuiteLevel};

pub const STREAM_SCHEME: &str = "ChaCha8 seeded by the master seed; trajectory i draws thermal increments from stream 2i \
     and reduction increments from stream 2i+1; scenario builders use streams with the top bit set";

/// Result of one run: the checks and the files written, relative to the output root.
#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub passed: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Artifacts {
    root: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root.join("curves"))?;
        Ok(Artifacts {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn curve(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        self.table(name, header, rows)
    }

    fn table(&mut self, name: &str, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<()> {
        let rel = format!("curves/{name}.csv");
        write_csv_file(&self.root.join(&rel), &header, &rows)?;
        self.written.push(rel);
        Ok(())
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Internal(format!("worker pool: {e}")))
}

fn interpretation_flags(cfg: &ScenarioConfig) -> serde_json::Value {
    json!({
        "mean_energy": format!("{} of the spectral range above its minimum", cfg.mean_fraction),
        "initial_state_width": format!(
            "energy-domain standard deviation {} of the spectral range, amplitude profile exp(-(E-mean)^2/(4 sigma^2))",
            cfg.init_state_std
        ),
        "random_phases": cfg.random_phases,
        "energy_shell": "window [E0 - sqrt(V0), E0 + sqrt(V0)] from the initial energy variance",
        "spectrum": "sorted random gaps, non-positive gaps truncated at 1e-6, endpoints rescaled to spectrum_range",
        "alpha_grid": "artifact default couplings, not values read from a published figure",
        "fig1_propagation": "master equation; trajectory averaging as an optional cross-check",
        "entropy_law_error": "max |forward difference - predicted rate| over the window, divided by the largest predicted rate",
    })
}

fn moments_rows(times: &[f64], series: &[&[Moment]], n: usize) -> Vec<Vec<String>> {
    (0..times.len())
        .map(|k| {
            let mut row = vec![fmt_f64(times[k])];
            for s in series {
                row.push(fmt_f64(s[k].mean));
                row.push(fmt_f64(s[k].std_error(n)));
            }
            row
        })
        .collect()
}

fn ensemble_curve(art: &mut Artifacts, name: &str, e: &TrajectoryEnsemble, sectors: bool) -> Result<()> {
    let comps = if sectors {
        e.sectors.first().map_or(0, Vec::len)
    } else {
        e.populations.first().map_or(0, Vec::len)
    };
    let label = if sectors { "sector" } else { "population" };
    let mut header = vec!["t".to_string()];
    for c in 0..comps {
        header.push(format!("{label}_{c}_mean"));
        header.push(format!("{label}_{c}_se"));
    }
    let rows = (0..e.times.len())
        .map(|k| {
            let src = if sectors { &e.sectors[k] } else { &e.populations[k] };
            let mut row = vec![fmt_f64(e.times[k])];
            for m in src {
                row.push(fmt_f64(m.mean));
                row.push(fmt_f64(m.std_error(e.trajectories)));
            }
            row
        })
        .collect();
    art.table(name, header, rows)
}

fn observable_curves(art: &mut Artifacts, prefix: &str, e: &TrajectoryEnsemble) -> Result<()> {
    let mut header = vec!["t".to_string(), "energy_mean".into(), "energy_se".into()];
    let mut series: Vec<&[Moment]> = vec![&e.energy];
    for (label, m) in &e.observables {
        header.push(format!("{label}_mean"));
        header.push(format!("{label}_se"));
        series.push(m);
    }
    art.table(&format!("{prefix}_observables"), header, moments_rows(&e.times, &series, e.trajectories))
}

fn fig1_artifacts(art: &mut Artifacts, out: &Fig1Output) -> Result<()> {
    for c in &out.curves {
        for label in ["O1", "O2"] {
            let series = c
                .record
                .observable(label)
                .ok_or_else(|| Error::Internal(format!("fig1 record lacks {label}")))?;
            let rows = c.record.times.iter().zip(series).map(|(t, v)| vec![fmt_f64(*t), fmt_f64(*v)]).collect();
            art.curve(&format!("fig1_{label}_alpha_{}", c.alpha_eff), &["t", label], rows)?;
        }
    }
    Ok(())
}

fn no_signalling_artifacts(art: &mut Artifacts, reports: &[NoSignallingReport]) -> Result<()> {
    for r in reports {
        let name = match r.generator {
            SignallingGenerator::Linear => "no_signalling_linear",
            SignallingGenerator::NonlinearMutant => "no_signalling_mutant",
        };
        let rows = r.times.iter().zip(&r.deviations).map(|(t, d)| vec![fmt_f64(*t), fmt_f64(*d)]).collect();
        art.curve(name, &["t", "deviation"], rows)?;
    }
    Ok(())
}

fn appendix_artifacts(art: &mut Artifacts, r: &AppendixAReport) -> Result<()> {
    ensemble_curve(art, "appendix_a_reduction_sectors", &r.reduction_ensemble, true)?;
    ensemble_curve(art, "appendix_a_reduction_populations", &r.reduction_ensemble, false)?;
    ensemble_curve(art, "appendix_a_thermal_populations", &r.thermal_ensemble, false)?;
    observable_curves(art, "appendix_a_thermal", &r.thermal_ensemble)
}

fn custom_artifacts(art: &mut Artifacts, out: &CustomOutput) -> Result<()> {
    if let Some(rec) = &out.master {
        let (header, rows) = ensemble_table(rec);
        art.table("custom_master", header, rows)?;
    }
    if let Some(e) = &out.trajectories {
        observable_curves(art, "custom_trajectories", e)?;
        ensemble_curve(art, "custom_trajectory_populations", e, false)?;
    }
    Ok(())
}

fn verdict_matrix(r: &AppendixAReport) -> Vec<String> {
    let row = |label: &str, rep: &MartingaleReport, want: Verdict| {
        format!("  {label:<24} {:<22} (expected {want})", rep.verdict.to_string())
    };
    vec![
        "verdict matrix:".to_string(),
        row("SUV / sector basis", &r.reduction_sectors, Verdict::MartingaleConsistent),
        row("SUV / energy basis", &r.reduction_energy, Verdict::MartingaleConsistent),
        row("OQT / energy basis", &r.thermal_energy, Verdict::Drifting),
        format!(
            "  SUV terminal D = {:.6e} (master {:.6e}), Born-weight distance {:.6e}",
            r.reduction_terminal_distance, r.reduction_terminal_distance_master, r.born_distance
        ),
    ]
}

/// `summary.txt`: header, check lines, extra report lines, then `RESULT`.
fn write_summary(root: &Path, title: &str, checks: &[Check], extra: &[String]) -> Result<()> {
    let failed = checks.iter().filter(|c| !c.passed).count();
    let mut text = format!("{title}\n");
    for c in checks {
        text.push_str(&c.line());
        text.push('\n');
    }
    for l in extra {
        text.push_str(l);
        text.push('\n');
    }
    text.push_str(&if failed == 0 {
        format!("RESULT: PASS ({} checks)\n", checks.len())
    } else {
        format!("RESULT: FAIL ({failed} of {} checks failed)\n", checks.len())
    });
    std::fs::write(root.join("summary.txt"), text)?;
    Ok(())
}

fn fig1_scenario(cfg: &ScenarioConfig) -> Fig1Scenario {
    Fig1Scenario {
        dim: cfg.dim,
        dt: cfg.dt,
        spectrum_range: cfg.spectrum_range,
        spacing_std: cfg.spacing_std,
        mean_fraction: cfg.mean_fraction,
        init_state_std: cfg.init_state_std,
        random_phases: cfg.random_phases,
        alpha_grid: cfg.alpha_grid.clone(),
        pair: cfg.pair,
        seed: cfg.seed,
        sample_stride: cfg.sample_stride,
        n_steps: Some(cfg.n_steps),
        trajectories: if cfg.mode.trajectories() { cfg.ensemble_size } else { 0 },
        trajectory_steps: cfg.trajectory_steps,
    }
}

fn appendix_scenario(cfg: &ScenarioConfig) -> AppendixAScenario {
    AppendixAScenario {
        dim: cfg.dim,
        sectors: cfg.sectors,
        alpha_eff: cfg.alpha_eff,
        j_eff: cfg.j_eff,
        dt: cfg.dt,
        n_steps: cfg.n_steps,
        samples: (cfg.n_steps / cfg.sample_stride).max(2),
        trajectories: cfg.ensemble_size,
        seed: cfg.seed,
        spectrum_range: cfg.spectrum_range,
        spacing_std: cfg.spacing_std,
        mean_fraction: cfg.mean_fraction,
        init_state_std: cfg.init_state_std,
    }
}

fn custom_scenario(cfg: &ScenarioConfig) -> CustomScenario {
    CustomScenario {
        dim: cfg.dim,
        alpha_eff: cfg.alpha_eff,
        j_eff: cfg.j_eff,
        sectors: cfg.sectors,
        dt: cfg.dt,
        n_steps: cfg.n_steps,
        sample_stride: cfg.sample_stride,
        master: cfg.mode.master(),
        trajectories: if cfg.mode.trajectories() { cfg.ensemble_size } else { 0 },
        seed: cfg.seed,
        spectrum_range: cfg.spectrum_range,
        spacing_std: cfg.spacing_std,
        mean_fraction: cfg.mean_fraction,
        init_state_std: cfg.init_state_std,
        random_phases: cfg.random_phases,
        observables: cfg.observables.clone(),
    }
}

pub const NO_SIGNALLING_TOL: f64 = 1e-9;
pub const MUTANT_FLOOR: f64 = 1e-3;
/// Round-off level below which deviations are indistinguishable.
pub const DEVIATION_FLOOR: f64 = 1e-12;

/// Linear and mutant runs on a maximally entangled pair with random spectra for both halves.
fn no_signalling(cfg: &ScenarioConfig) -> Result<(Vec<NoSignallingReport>, Vec<Check>)> {
    let d = cfg.dim.min(cfg.dim_b);
    let (a, _) = random_spectrum(cfg.seed, cfg.dim, cfg.spectrum_range, cfg.spacing_std)?;
    let (b, _) = random_spectrum(cfg.seed.wrapping_add(1), cfg.dim_b, cfg.spectrum_range, cfg.spacing_std)?;
    // Maximally entangled on the first d levels of each half.
    let psi = maximally_entangled(d)?;
    let mut amps = vec![crate::C64::new(0.0, 0.0); cfg.dim * cfg.dim_b];
    for i in 0..d {
        amps[i * cfg.dim_b + i] = psi.amplitudes()[i * d + i];
    }
    let rho = DensityMatrix::pure(&crate::StateVector::new(amps)?);
    let run = |alpha, g| run_no_signalling(&a, &b, &rho, alpha, cfg.dt, cfg.n_steps, cfg.sample_stride, g);
    let lin = run(cfg.alpha_eff, SignallingGenerator::Linear)?;
    let bad = run(cfg.alpha_eff, SignallingGenerator::NonlinearMutant)?;
    let mut checks = vec![
        Check::at_most("no_signalling.linear_deviation", lin.max_deviation, NO_SIGNALLING_TOL),
        Check::at_least("no_signalling.mutant_detected", bad.max_deviation, MUTANT_FLOOR),
    ];
    if 2.0 * cfg.alpha_eff * cfg.dt <= crate::ensemble::PROPAGATION_GUARD {
        let doubled = run(2.0 * cfg.alpha_eff, SignallingGenerator::Linear)?;
        let change = (doubled.max_deviation - lin.max_deviation).abs();
        checks.push(Check::new(
            "no_signalling.coupling_independent",
            change <= lin.max_deviation.max(DEVIATION_FLOOR),
            format!("doubling alpha_eff changes the deviation by {change:.3e} (deviation {:.3e})", lin.max_deviation),
        ));
    }
    Ok((vec![lin, bad], checks))
}

/// Run one configured experiment and write the artifact tree under `out`.
pub fn run(cfg: &ScenarioConfig, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut art = Artifacts::new(out)?;
    let mut extra = Vec::new();
    let checks = pool(cfg.workers)?.install(|| -> Result<Vec<Check>> {
        Ok(match cfg.experiment {
            Experiment::Fig1 => {
                let o = run_fig1(&fig1_scenario(cfg))?;
                fig1_artifacts(&mut art, &o)?;
                extra.push(format!("window members {:?}, horizon t = {}", o.target.members(), o.horizon));
                o.checks
            }
            Experiment::NoSignalling => {
                let (reports, checks) = no_signalling(cfg)?;
                no_signalling_artifacts(&mut art, &reports)?;
                checks
            }
            Experiment::AppendixA => {
                let r = run_appendix_a(&appendix_scenario(cfg))?;
                appendix_artifacts(&mut art, &r)?;
                extra.extend(verdict_matrix(&r));
                r.checks
            }
            Experiment::Custom => {
                let o = run_custom(&custom_scenario(cfg))?;
                custom_artifacts(&mut art, &o)?;
                o.checks
            }
        })
    })?;
    finish(art, cfg, checks, &extra)
}

fn finish(mut art: Artifacts, cfg: &ScenarioConfig, checks: Vec<Check>, extra: &[String]) -> Result<RunOutcome> {
    let passed = checks.iter().all(|c| c.passed);
    let title = format!("oqt {:?} seed {} config {}", cfg.experiment, cfg.seed, cfg.hash());
    write_summary(&art.root, &title, &checks, extra)?;
    art.written.push("summary.txt".into());
    let mut files = art.written.clone();
    files.push("provenance.json".into());
    let provenance = json!({
        "tool": "oqt",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "config_hash": cfg.hash(),
        "stream_scheme": STREAM_SCHEME,
        "interpretation": interpretation_flags(cfg),
        "artifacts": files,
        "passed": passed,
    });
    write_json_file(&art.root.join("provenance.json"), &provenance)?;
    art.written.push("provenance.json".into());
    Ok(RunOutcome {
        checks,
        artifacts: art.written,
        passed,
    })
}

/// Run a self-test suite and write `summary.txt` and `provenance.json`.
pub fn run_suite_to(level: SuiteLevel, seed: u64, workers: Option<usize>, out: &Path) -> Result<RunOutcome> {
    let art = Artifacts::new(out)?;
    let checks = pool(workers)?.install(|| run_suite(level, seed));
    let passed = checks.iter().all(|c| c.passed);
    write_summary(&art.root, &format!("oqt suite {level:?} seed {seed}"), &checks, &[])?;
    let provenance = json!({
        "tool": "oqt",
        "version": env!("CARGO_PKG_VERSION"),
        "suite": level,
        "seed": seed,
        "workers": workers,
        "stream_scheme": STREAM_SCHEME,
        "artifacts": ["summary.txt", "provenance.json"],
        "passed": passed,
    });
    write_json_file(&art.root.join("provenance.json"), &provenance)?;
    Ok(RunOutcome {
        checks,
        artifacts: vec!["summary.txt".into(), "provenance.json".into()],
        passed,
    })
}
