//! Free-form runs: any couplings, master equation and/or trajectories.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{residual_bias, ResidualBias};
use crate::ensemble::{propagate, sector_populations, EnsembleRecord, GKSLModel, PropagateOptions};
use crate::error::{Error, Result};
use crate::measures::energy_stats;
use crate::montecarlo::{run_ensemble, EnsembleSpec, TrajectoryEnsemble};
use crate::quantum::{CMatrix, DensityMatrix, Observable, SpectralModel, StateVector, C64};
use crate::targets::{build_microcanonical, MicrocanonicalTarget};
use crate::trajectory::{Generators, OQTGenerator, SUVGenerator};

use super::fig1::{gaussian_state, random_spectrum};
use super::Check;

/// Observables for the custom experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    /// `|i⟩⟨j| + |j⟩⟨i|`.
    Coherence { i: usize, j: usize },
    /// `|k⟩⟨k|`.
    Population { index: usize },
    Energy,
    /// Ginibre draw scaled to unit spectral radius.
    RandomHermitian { seed: u64 },
}

impl ObservableSpec {
    pub fn build(&self, model: &SpectralModel) -> Result<Observable> {
        let d = model.dim();
        let one = C64::new(1.0, 0.0);
        match *self {
            ObservableSpec::Coherence { i, j } => {
                if i >= d || j >= d || i == j {
                    return Err(Error::config(format!("coherence ({i}, {j}) needs distinct indices below {d}")));
                }
                let mut m = CMatrix::zeros(d, d);
                m[(i, j)] = one;
                m[(j, i)] = one;
                Observable::new(m, format!("coherence_{i}_{j}"))
            }
            ObservableSpec::Population { index } => {
                if index >= d {
                    return Err(Error::config(format!("population index {index} out of range 0..{d}")));
                }
                let mut v = vec![0.0; d];
                v[index] = 1.0;
                Ok(Observable::diagonal(&v, format!("population_{index}")))
            }
            ObservableSpec::Energy => Ok(Observable::diagonal(model.energies(), "energy")),
            ObservableSpec::RandomHermitian { seed } => {
                let obs = super::fig1::random_hermitian(d, seed)?;
                Observable::new(obs.matrix().clone(), format!("random_{seed}"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomScenario {
    pub dim: usize,
    pub alpha_eff: f64,
    pub j_eff: f64,
    pub sectors: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub sample_stride: usize,
    pub master: bool,
    /// Trajectory count; 0 skips the trajectory ensemble.
    pub trajectories: usize,
    pub seed: u64,
    pub spectrum_range: (f64, f64),
    pub spacing_std: f64,
    pub mean_fraction: f64,
    pub init_state_std: f64,
    pub random_phases: bool,
    pub observables: Vec<ObservableSpec>,
}

#[derive(Clone, Debug)]
pub struct CustomOutput {
    pub model: SpectralModel,
    pub psi0: StateVector,
    pub target: MicrocanonicalTarget,
    pub master: Option<EnsembleRecord>,
    pub trajectories: Option<TrajectoryEnsemble>,
    pub residual_bias: Option<ResidualBias>,
    pub checks: Vec<Check>,
}

pub const ENTROPY_SLACK: f64 = 1e-10;
pub const POSITIVITY_BOUND: f64 = -1e-9;
pub const CONSERVATION_TOL: f64 = 1e-10;
pub const ENERGY_BOOKKEEPING_TOL: f64 = 1e-9;

pub fn run_custom(sc: &CustomScenario) -> Result<CustomOutput> {
    let (model, _) = random_spectrum(sc.seed, sc.dim, sc.spectrum_range, sc.spacing_std)?;
    let psi0 = gaussian_state(&model, sc.mean_fraction, sc.init_state_std, sc.random_phases.then_some(sc.seed))?;
    let target = build_microcanonical(&psi0, &model)?;
    let observables = sc.observables.iter().map(|o| o.build(&model)).collect::<Result<Vec<_>>>()?;
    let oqt = (sc.alpha_eff > 0.0).then(|| OQTGenerator::new(sc.alpha_eff, &target)).transpose()?;
    let suv = (sc.j_eff > 0.0)
        .then(|| SUVGenerator::contiguous(sc.j_eff, sc.dim, sc.sectors))
        .transpose()?;
    let mut checks = Vec::new();

    let master = if sc.master {
        let gksl = match (&oqt, &suv) {
            (None, None) => GKSLModel::unitary(&model),
            _ => GKSLModel::new(&model, oqt.as_ref(), suv.as_ref())?,
        };
        let rec = propagate(
            &DensityMatrix::pure(&psi0),
            &gksl,
            sc.dt,
            sc.n_steps,
            &PropagateOptions {
                sample_stride: sc.sample_stride,
                observables: observables.clone(),
                relative_entropy: oqt.is_some(),
                ..PropagateOptions::default()
            },
        )?;
        let min = rec.min_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least("custom.positivity", min, POSITIVITY_BOUND));
        // S can overshoot ln Ω when ψ₀ has weight outside the window; monotone growth
        // holds when the initial support lies inside it, or when J̃ = 0 dephasing is absent.
        let inside = psi0.populations().iter().enumerate().all(|(k, &p)| target.contains(k) || p <= 1e-14);
        if oqt.is_none() || inside {
            let worst_drop = rec.entropy.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max);
            checks.push(Check::at_most("custom.entropy_monotone", worst_drop, ENTROPY_SLACK));
        }
        if let Some(rel) = &rec.relative_entropy {
            let worst_rise = rel
                .windows(2)
                .filter(|w| w[0].is_finite())
                .map(|w| w[1] - w[0])
                .fold(0.0f64, f64::max);
            checks.push(Check::at_most("custom.relative_entropy_monotone", worst_rise, ENTROPY_SLACK));
        }
        if let (Some(term), None) = (gksl.reduction_term(), &oqt) {
            let p0 = sector_populations(&DensityMatrix::pure(&psi0), term);
            let worst = rec
                .diagonals
                .iter()
                .map(|d| {
                    let w = sector_populations(&DensityMatrix::diagonal(d).expect("diagonal of a state"), term);
                    w.iter().zip(&p0).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max)
                })
                .fold(0.0f64, f64::max);
            checks.push(Check::at_most("custom.sector_populations_conserved", worst, CONSERVATION_TOL));
        }
        if oqt.is_some() && suv.is_none() {
            let e0 = energy_stats(&psi0, &model)?.mean;
            let e_chi = e0 + target.energy_offset();
            let worst = rec
                .times
                .iter()
                .zip(&rec.energy)
                .map(|(t, e)| (e - (e_chi + (e0 - e_chi) * (-sc.alpha_eff * t).exp())).abs())
                .fold(0.0f64, f64::max);
            checks.push(Check::at_most("custom.energy_bookkeeping", worst, ENERGY_BOOKKEEPING_TOL));
        }
        Some(rec)
    } else {
        None
    };

    let trajectories = if sc.trajectories > 0 {
        let gens = Generators {
            oqt: oqt.as_ref(),
            suv: suv.as_ref(),
        };
        let sample_steps: Vec<usize> = (0..=sc.n_steps).step_by(sc.sample_stride).collect();
        let spec = EnsembleSpec {
            seed: sc.seed,
            trajectories: sc.trajectories,
            dt: sc.dt,
            n_steps: sc.n_steps,
            sample_steps,
            track_projector: false,
            observables: observables.clone(),
        };
        Some(run_ensemble(&psi0, gens, &model, &spec)?)
    } else {
        None
    };

    let bias = match &trajectories {
        Some(e) if e.trajectories >= 2 && sc.n_steps > 0 => {
            let b = residual_bias(&e.residuals, sc.alpha_eff + sc.j_eff, sc.dt)?;
            checks.push(Check::new(
                "custom.norm_residual_bias",
                b.consistent,
                format!(
                    "mean residual {:.3e} within 3·{:.3e} + {:.3e}",
                    b.mean_signed, b.std_error, b.allowance
                ),
            ));
            Some(b)
        }
        _ => None,
    };

    if let (Some(rec), Some(ens)) = (&master, &trajectories) {
        let mut total = 0;
        let mut outside = 0;
        for (label, moments) in &ens.observables {
            let Some(series) = rec.observable(label) else { continue };
            for (k, m) in moments.iter().enumerate() {
                if k < series.len() {
                    total += 1;
                    if (m.mean - series[k]).abs() > 3.0 * m.std_error(ens.trajectories) + 1e-12 {
                        outside += 1;
                    }
                }
            }
        }
        let frac = outside as f64 / total.max(1) as f64;
        checks.push(Check::new(
            "custom.trajectory_master_agreement",
            total > 0 && frac <= 0.05,
            format!("{outside}/{total} samples outside 3σ (allowed 5%)"),
        ));
    }

    Ok(CustomOutput {
        model,
        psi0,
        target,
        master,
        trajectories,
        residual_bias: bias,
        checks,
    })
}
