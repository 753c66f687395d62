//! Local thermalization on one half of an entangled pair leaves the other
//! half's reduced state untouched.
//!
//! The joint state evolves under `H_A ⊗ I + I ⊗ H_B` plus a thermal term acting
//! on `A` alone. The witness is the largest Frobenius distance between `ρ_B(t)`
//! and its free evolution. A deliberately nonlinear control generator (the
//! noiseless thermal drift with state-dependent expectation values) shows the
//! witness is sensitive.

use serde::Serialize;

use crate::ensemble::{propagate, GKSLModel, PropagateOptions};
use crate::error::{check_dim, Error, Result};
use crate::measures::{partial_trace_matrix, Keep};
use crate::quantum::{hermitize, CMatrix, DensityMatrix, SpectralModel, StateVector, C64};
use crate::targets::{build_microcanonical_from_density, MicrocanonicalTarget, Target};
use crate::trajectory::STABILITY_GUARD;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SignallingGenerator {
    /// Linear GKSL generator embedded as `L^A_{μν} ⊗ I_B`.
    Linear,
    /// Noise-free nonlinear drift `ρ̇ = Gρ + ρG − 2Tr[Gρ]ρ`, `G = diag(A) ⊗ I`.
    NonlinearMutant,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoSignallingReport {
    pub generator: SignallingGenerator,
    pub dims: (usize, usize),
    pub alpha_eff: f64,
    pub target_members: Vec<usize>,
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

/// `(1/√d) Σ_k |k⟩|k⟩`.
pub fn maximally_entangled(d: usize) -> Result<StateVector> {
    let mut amps = vec![C64::new(0.0, 0.0); d * d];
    for k in 0..d {
        amps[k * d + k] = C64::new(1.0, 0.0);
    }
    StateVector::new(amps)
}

/// Joint product model `E_a + E_b` in the index order `k = a·d_B + b`.
pub fn joint_energies(a: &SpectralModel, b: &SpectralModel) -> Vec<f64> {
    let db = b.dim();
    (0..a.dim() * db).map(|k| a.energies()[k / db] + b.energies()[k % db]).collect()
}

/// Target for `A` built from the reduced state `ρ_A`.
pub fn local_target(model_a: &SpectralModel, model_b: &SpectralModel, rho_ab: &DensityMatrix) -> Result<MicrocanonicalTarget> {
    let rho_a = partial_trace_matrix(rho_ab.matrix(), (model_a.dim(), model_b.dim()), Keep::A)?;
    build_microcanonical_from_density(&DensityMatrix::new(rho_a)?, model_a)
}

fn free_reduced(rho_b0: &CMatrix, model_b: &SpectralModel, t: f64) -> CMatrix {
    let e = model_b.energies();
    CMatrix::from_fn(rho_b0.nrows(), rho_b0.ncols(), |i, j| {
        C64::from_polar(1.0, -(e[i] - e[j]) * t) * rho_b0[(i, j)]
    })
}

#[allow(clippy::too_many_arguments)]
pub fn run_no_signalling(
    model_a: &SpectralModel,
    model_b: &SpectralModel,
    rho_ab: &DensityMatrix,
    alpha_eff: f64,
    dt: f64,
    n_steps: usize,
    sample_stride: usize,
    generator: SignallingGenerator,
) -> Result<NoSignallingReport> {
    let dims = (model_a.dim(), model_b.dim());
    check_dim("joint state", dims.0 * dims.1, rho_ab.dim())?;
    if sample_stride == 0 {
        return Err(Error::config("sample_stride must be >= 1"));
    }
    let target = local_target(model_a, model_b, rho_ab)?;
    let rho_b0 = partial_trace_matrix(rho_ab.matrix(), dims, Keep::B)?;

    let (times, states): (Vec<f64>, Vec<CMatrix>) = match generator {
        SignallingGenerator::Linear => {
            let m = GKSLModel::local_thermal(model_a, model_b, alpha_eff, &target)?;
            let rec = propagate(
                rho_ab,
                &m,
                dt,
                n_steps,
                &PropagateOptions {
                    sample_stride,
                    keep_states: true,
                    ..PropagateOptions::default()
                },
            )?;
            (rec.times, rec.states.into_iter().map(DensityMatrix::into_matrix).collect())
        }
        SignallingGenerator::NonlinearMutant => {
            if alpha_eff * dt > STABILITY_GUARD {
                return Err(Error::StepSize(format!("alpha_eff·dt = {} exceeds {STABILITY_GUARD}", alpha_eff * dt)));
            }
            let energies = joint_energies(model_a, model_b);
            let g: Vec<f64> = (0..energies.len())
                .map(|k| alpha_eff * target.weights()[k / dims.1])
                .collect();
            let mut rho = rho_ab.matrix().clone();
            let mut times = vec![0.0];
            let mut states = vec![rho.clone()];
            for k in 1..=n_steps {
                rho = hermitize(&rk4(&rho, dt, |r| mutant_rhs(r, &energies, &g)));
                if k % sample_stride == 0 || k == n_steps {
                    times.push(k as f64 * dt);
                    states.push(rho.clone());
                }
            }
            (times, states)
        }
    };

    let deviations = times
        .iter()
        .zip(&states)
        .map(|(&t, rho)| {
            let rb = partial_trace_matrix(rho, dims, Keep::B)?;
            Ok((rb - free_reduced(&rho_b0, model_b, t)).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_deviation = deviations.iter().fold(0.0f64, |m, &x| m.max(x));
    Ok(NoSignallingReport {
        generator,
        dims,
        alpha_eff,
        target_members: target.members().to_vec(),
        times,
        deviations,
        max_deviation,
    })
}

fn mutant_rhs(rho: &CMatrix, e: &[f64], g: &[f64]) -> CMatrix {
    let c: f64 = (0..e.len()).map(|k| g[k] * rho[(k, k)].re).sum();
    CMatrix::from_fn(e.len(), e.len(), |i, j| {
        rho[(i, j)] * (C64::new(0.0, -(e[i] - e[j])) + (g[i] + g[j] - 2.0 * c))
    })
}

fn rk4(rho: &CMatrix, dt: f64, f: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let h = C64::new(dt, 0.0);
    let half = C64::new(0.5 * dt, 0.0);
    let k1 = f(rho);
    let k2 = f(&(rho + &k1 * half));
    let k3 = f(&(rho + &k2 * half));
    let k4 = f(&(rho + &k3 * h));
    rho + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * (h / 6.0)
}
