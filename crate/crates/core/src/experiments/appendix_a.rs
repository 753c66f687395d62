//! Collapse alone cannot thermalize.
//!
//! Three trajectory ensembles from one non-uniform initial state: reduction
//! only (judged in the sector basis and in the energy basis) and
//! thermalization only (energy basis). Reduction keeps every diagonal a
//! martingale, so the ensemble remembers its Born weights and stays away from
//! `χ`; thermalization drifts every diagonal toward `χ` at rate `α̃`.

use serde::Serialize;

use crate::diagnostics::{martingale_report, MartingaleBasis, MartingaleInput, MartingaleReport, Verdict};
use crate::ensemble::{propagate, GKSLModel, PropagateOptions};
use crate::error::{Error, Result};
use crate::measures::distance_sq;
use crate::montecarlo::{run_ensemble, EnsembleSpec, TrajectoryEnsemble};
use crate::quantum::DensityMatrix;
use crate::targets::{as_density, build_microcanonical, Target};
use crate::trajectory::{Generators, OQTGenerator, SUVGenerator};

use super::fig1::{gaussian_state, random_spectrum};
use super::Check;

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct AppendixAScenario {
    pub dim: usize,
    pub sectors: usize,
    pub alpha_eff: f64,
    pub j_eff: f64,
    pub dt: f64,
    /// Steps of both ensembles.
    pub n_steps: usize,
    pub samples: usize,
    pub trajectories: usize,
    pub seed: u64,
    /// Random spectrum and wave packet, as in [`random_spectrum`] and [`gaussian_state`].
    pub spectrum_range: (f64, f64),
    pub spacing_std: f64,
    pub mean_fraction: f64,
    pub init_state_std: f64,
}

impl Default for AppendixAScenario {
    fn default() -> Self {
        AppendixAScenario {
            dim: 8,
            sectors: 2,
            alpha_eff: 1.0,
            j_eff: 1.0,
            dt: 1e-3,
            n_steps: 8000,
            samples: 40,
            trajectories: 2000,
            seed: 0,
            spectrum_range: (0.0, 10.0),
            spacing_std: 0.3 * 10.0 / 7.0,
            mean_fraction: 0.6,
            init_state_std: 0.2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AppendixAReport {
    pub seed: u64,
    pub energies: Vec<f64>,
    pub born_weights: Vec<f64>,
    pub target_weights: Vec<f64>,
    pub reduction_sectors: MartingaleReport,
    pub reduction_energy: MartingaleReport,
    pub thermal_energy: MartingaleReport,
    /// `Tr[(ρ − χ)²]` at the end of the reduction run, from trajectories and from the master equation.
    pub reduction_terminal_distance: f64,
    pub reduction_terminal_distance_master: f64,
    /// `Tr[(diag(Born) − χ)²]`.
    pub born_distance: f64,
    /// `max_{μ∈W} |z_μ(t_end) − 1/Ω|/σ_μ` for the thermal run.
    pub thermal_terminal_sigmas: f64,
    #[serde(skip)]
    pub reduction_ensemble: TrajectoryEnsemble,
    #[serde(skip)]
    pub thermal_ensemble: TrajectoryEnsemble,
    pub checks: Vec<Check>,
}

/// Relative tolerance on the fitted thermal relaxation rate.
pub const RATE_REL_TOL: f64 = 0.10;

pub fn run_appendix_a(sc: &AppendixAScenario) -> Result<AppendixAReport> {
    if !(sc.alpha_eff > 0.0 && sc.j_eff > 0.0) {
        return Err(Error::config("appendix_a needs alpha_eff > 0 and j_eff > 0"));
    }
    if sc.dim < 2 || sc.sectors < 2 || sc.sectors > sc.dim || sc.n_steps == 0 || sc.samples < 2 {
        return Err(Error::config("appendix_a needs dim >= sectors >= 2, n_steps >= 1 and samples >= 2"));
    }
    let (model, _) = random_spectrum(sc.seed, sc.dim, sc.spectrum_range, sc.spacing_std)?;
    let psi0 = gaussian_state(&model, sc.mean_fraction, sc.init_state_std, Some(sc.seed))?;
    let target = build_microcanonical(&psi0, &model)?;
    let chi = as_density(&target);
    let born = psi0.populations();
    let born_distance: f64 = born.iter().zip(target.weights()).map(|(p, w)| (p - w).powi(2)).sum();

    let suv = SUVGenerator::contiguous(sc.j_eff, sc.dim, sc.sectors)?;
    let oqt = OQTGenerator::new(sc.alpha_eff, &target)?;

    let spec_for = |projector: bool| EnsembleSpec {
        seed: sc.seed,
        trajectories: sc.trajectories,
        dt: sc.dt,
        n_steps: sc.n_steps,
        sample_steps: EnsembleSpec::even_samples(sc.n_steps, sc.samples),
        track_projector: projector,
        observables: Vec::new(),
    };
    let reduction = run_ensemble(&psi0, Generators::reduction(&suv), &model, &spec_for(true))?;
    let thermal = run_ensemble(&psi0, Generators::thermal(&oqt), &model, &spec_for(false))?;

    let reduction_sectors = martingale_report(MartingaleInput::Trajectories(&reduction), MartingaleBasis::Sector)?;
    let reduction_energy = martingale_report(MartingaleInput::Trajectories(&reduction), MartingaleBasis::Energy)?;
    let thermal_energy = martingale_report(MartingaleInput::Trajectories(&thermal), MartingaleBasis::Energy)?;

    let mean_end = reduction.projector_mean.last().ok_or_else(|| Error::Internal("no samples".into()))?;
    let reduction_terminal_distance = distance_sq(mean_end, chi.matrix());
    let master = propagate(
        &DensityMatrix::pure(&psi0),
        &GKSLModel::new(&model, None, Some(&suv))?,
        sc.dt,
        sc.n_steps,
        &PropagateOptions {
            sample_stride: sc.n_steps.max(1),
            keep_states: true,
            ..PropagateOptions::default()
        },
    )?;
    let master_end = master.states.last().ok_or_else(|| Error::Internal("no samples".into()))?;
    let reduction_terminal_distance_master = distance_sq(master_end.matrix(), chi.matrix());

    let last = thermal.populations.last().ok_or_else(|| Error::Internal("no samples".into()))?;
    let thermal_terminal_sigmas = target
        .members()
        .iter()
        .map(|&mu| {
            let m = last[mu];
            (m.mean - target.weights()[mu]).abs() / m.std_error(thermal.trajectories).max(1e-12)
        })
        .fold(0.0f64, f64::max);

    let mut r = AppendixAReport {
        seed: sc.seed,
        energies: model.energies().to_vec(),
        born_weights: born,
        target_weights: target.weights().to_vec(),
        reduction_sectors,
        reduction_energy,
        thermal_energy,
        reduction_terminal_distance,
        reduction_terminal_distance_master,
        born_distance,
        thermal_terminal_sigmas,
        reduction_ensemble: reduction,
        thermal_ensemble: thermal,
        checks: Vec::new(),
    };
    r.checks = appendix_checks(&r, sc);
    Ok(r)
}

fn appendix_checks(r: &AppendixAReport, sc: &AppendixAScenario) -> Vec<Check> {
    let verdict = |name: &str, rep: &MartingaleReport, want: Verdict| {
        let worst = rep.components.iter().map(|c| c.sigmas).fold(0.0f64, f64::max);
        Check::new(
            format!("appendix_a.{name}"),
            rep.verdict == want,
            format!("{} (expected {want}); largest drift {worst:.2}σ", rep.verdict),
        )
    };
    let mut checks = vec![
        verdict("reduction_sector_verdict", &r.reduction_sectors, Verdict::MartingaleConsistent),
        verdict("reduction_energy_verdict", &r.reduction_energy, Verdict::MartingaleConsistent),
        verdict("thermal_energy_verdict", &r.thermal_energy, Verdict::Drifting),
    ];
    let rate = r.thermal_energy.relaxation_rate.unwrap_or(f64::NAN);
    let rel = (rate - sc.alpha_eff).abs() / sc.alpha_eff;
    checks.push(Check::new(
        "appendix_a.thermal_rate",
        rel <= RATE_REL_TOL,
        format!("fitted {rate:.4} vs {}: relative error {rel:.3e} <= {RATE_REL_TOL}", sc.alpha_eff),
    ));
    let bound = 0.9 * r.born_distance;
    checks.push(Check::new(
        "appendix_a.reduction_stays_away",
        r.reduction_terminal_distance > bound && r.reduction_terminal_distance_master > bound && r.born_distance > 0.01,
        format!(
            "D(trajectories) {:.4e}, D(master) {:.4e} > 0.9·{:.4e}",
            r.reduction_terminal_distance, r.reduction_terminal_distance_master, r.born_distance
        ),
    ));
    checks.push(Check::at_most(
        "appendix_a.thermal_terminal_sigmas",
        r.thermal_terminal_sigmas,
        3.0,
    ));
    checks
}
