//! Relaxation of two observables in a 25-level random spectrum.
//!
//! A Gaussian wave packet in the energy basis is propagated under the
//! thermalization master equation for a grid of couplings. The coherence
//! observable `O₁ = |i⟩⟨j| + |j⟩⟨i|` oscillates at `E_j − E_i` with envelope
//! `e^{−α̃t}` and relaxes to 0; a random Hermitian `O₂` relaxes to `Tr[χ O₂]`.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{envelope_decay, EnvelopeFit};
use crate::ensemble::{propagate, EnsembleRecord, GKSLModel, PropagateOptions};
use crate::error::{Error, Result};
use crate::measures::expectation;
use crate::montecarlo::{run_ensemble, EnsembleSpec, TrajectoryEnsemble};
use crate::noise::builder_rng;
use crate::quantum::{hermitian_eigenvalues, CMatrix, DensityMatrix, Observable, SpectralModel, StateVector, C64};
use crate::targets::{as_density, build_microcanonical, MicrocanonicalTarget};
use crate::trajectory::{Generators, OQTGenerator};

use super::Check;

const PURPOSE_SPECTRUM: u64 = 1;
const PURPOSE_PHASES: u64 = 2;
const PURPOSE_OBSERVABLE: u64 = 3;

/// Peaks used for envelope fits lie at `α̃t ≤` this value.
pub const ENVELOPE_FIT_SPAN: f64 = 8.0;
/// Horizon in units of the slowest relaxation time.
pub const RELAXATION_HORIZON: f64 = 40.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Scenario {
    pub dim: usize,
    pub dt: f64,
    pub spectrum_range: (f64, f64),
    pub spacing_std: f64,
    /// Packet centre as a fraction of the spectral range.
    pub mean_fraction: f64,
    /// Packet width (probability SD) as a fraction of the spectral range.
    pub init_state_std: f64,
    pub random_phases: bool,
    pub alpha_grid: Vec<f64>,
    /// Levels for `O₁`; defaults to the lowest and highest window members.
    pub pair: Option<(usize, usize)>,
    pub seed: u64,
    /// Steps between master-equation samples.
    pub sample_stride: usize,
    /// Master-equation steps; `None` runs to `40/min α̃` (or `t = 40` for a unitary-only grid).
    pub n_steps: Option<usize>,
    /// Trajectory cross-check: ensemble size and step count (0 trajectories disables it).
    pub trajectories: usize,
    pub trajectory_steps: usize,
}

impl Default for Fig1Scenario {
    fn default() -> Self {
        Fig1Scenario {
            dim: 25,
            dt: 1e-4,
            spectrum_range: (0.0, 10.0),
            spacing_std: 0.01,
            mean_fraction: 0.6,
            init_state_std: 0.2,
            random_phases: true,
            alpha_grid: vec![0.0, 0.5, 1.0, 2.0],
            pair: None,
            seed: 0,
            sample_stride: 50,
            n_steps: None,
            trajectories: 0,
            trajectory_steps: 10_000,
        }
    }
}

/// Random spectrum with near-regular spacing, pinned to `range`.
///
/// Returns the model and the raw gaps before rescaling.
pub fn random_spectrum(seed: u64, dim: usize, range: (f64, f64), spacing_std: f64) -> Result<(SpectralModel, Vec<f64>)> {
    if dim < 2 || !(range.1 > range.0) || spacing_std < 0.0 {
        return Err(Error::config(format!(
            "spectrum needs dim >= 2, a nonempty range and spacing_std >= 0 (dim {dim}, range {range:?}, std {spacing_std})"
        )));
    }
    let mean = (range.1 - range.0) / (dim - 1) as f64;
    let normal = Normal::new(mean, spacing_std).map_err(|e| Error::config(e.to_string()))?;
    let mut rng = builder_rng(seed, PURPOSE_SPECTRUM);
    let gaps: Vec<f64> = (0..dim - 1).map(|_| normal.sample(&mut rng)).collect();
    let mut e = vec![0.0; dim];
    for k in 1..dim {
        e[k] = e[k - 1] + gaps[k - 1].max(1e-6);
    }
    let scale = (range.1 - range.0) / e[dim - 1];
    let mut scaled: Vec<f64> = e.iter().map(|x| range.0 + x * scale).collect();
    scaled[dim - 1] = range.1;
    Ok((SpectralModel::new(scaled)?, gaps))
}

/// The 25-level spectrum on `[0, 10]` with gap SD 0.01.
pub fn build_fig1_hamiltonian(seed: u64) -> Result<SpectralModel> {
    Ok(random_spectrum(seed, 25, (0.0, 10.0), 0.01)?.0)
}

/// Wave packet `c_μ ∝ exp(−(E_μ − Ē)²/4σ²)` with `Ē`, `σ` given as fractions
/// of the spectral range, optionally with uniform random phases.
pub fn gaussian_state(
    model: &SpectralModel,
    mean_fraction: f64,
    std_fraction: f64,
    phase_seed: Option<u64>,
) -> Result<StateVector> {
    let (lo, hi) = (model.e_min(), model.e_max());
    let centre = lo + mean_fraction * (hi - lo);
    let sigma = std_fraction * (hi - lo);
    let profile: Vec<f64> = if sigma > 0.0 {
        model
            .energies()
            .iter()
            .map(|e| (-(e - centre).powi(2) / (4.0 * sigma * sigma)).exp())
            .collect()
    } else {
        let nearest = (0..model.dim())
            .min_by(|&a, &b| {
                (model.energies()[a] - centre)
                    .abs()
                    .total_cmp(&(model.energies()[b] - centre).abs())
            })
            .unwrap_or(0);
        (0..model.dim()).map(|k| if k == nearest { 1.0 } else { 0.0 }).collect()
    };
    let amps: Vec<C64> = match phase_seed {
        Some(seed) => {
            let mut rng = builder_rng(seed, PURPOSE_PHASES);
            profile.iter().map(|&a| C64::from_polar(a, rng.random::<f64>() * TAU)).collect()
        }
        None => profile.iter().map(|&a| C64::new(a, 0.0)).collect(),
    };
    StateVector::new(amps)?.bound_to(model)
}

pub fn build_fig1_state(model: &SpectralModel, seed: u64, random_phases: bool) -> Result<StateVector> {
    gaussian_state(model, 0.6, 0.2, random_phases.then_some(seed))
}

/// `O₁ = |i⟩⟨j| + |j⟩⟨i|` on window members and a random Hermitian `O₂`
/// scaled to unit spectral radius.
pub fn build_observables(
    model: &SpectralModel,
    target: &MicrocanonicalTarget,
    pair: Option<(usize, usize)>,
    seed: u64,
) -> Result<(Observable, Observable)> {
    let d = model.dim();
    let members = target.members();
    let (i, j) = match pair {
        Some(p) => p,
        None => (members[0], members[members.len() - 1]),
    };
    if i == j || !target.contains(i) || !target.contains(j) {
        return Err(Error::config(format!(
            "O1 pair ({i}, {j}) must be two distinct window members; window members are {members:?}"
        )));
    }
    let mut m1 = CMatrix::zeros(d, d);
    m1[(i, j)] = C64::new(1.0, 0.0);
    m1[(j, i)] = C64::new(1.0, 0.0);
    let o1 = Observable::new(m1, "O1")?;

    let o2 = Observable::new(random_hermitian(d, seed)?.matrix().clone(), "O2")?;
    Ok((o1, o2))
}

/// `(M + M†)/2` for a complex Ginibre `M`, scaled to unit spectral radius.
pub fn random_hermitian(d: usize, seed: u64) -> Result<Observable> {
    let mut rng = builder_rng(seed, PURPOSE_OBSERVABLE);
    let g = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    let radius = hermitian_eigenvalues(&h).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Observable::new(h.unscale(radius), "random_hermitian")
}

#[derive(Clone, Debug, Serialize)]
pub struct Fig1Curve {
    pub alpha_eff: f64,
    pub record: EnsembleRecord,
    /// Envelope fit of `⟨O₁⟩`; for `α̃ = 0` over the whole horizon.
    pub envelope: Option<EnvelopeFit>,
    pub trajectories: Option<TrajectoryEnsemble>,
}

#[derive(Clone, Debug)]
pub struct Fig1Output {
    pub model: SpectralModel,
    pub psi0: StateVector,
    pub target: MicrocanonicalTarget,
    pub o1: Observable,
    pub o2: Observable,
    pub horizon: f64,
    pub curves: Vec<Fig1Curve>,
    pub checks: Vec<Check>,
}

impl Fig1Output {
    pub fn plateau_o2(&self) -> f64 {
        expectation(&as_density(&self.target), &self.o2).unwrap_or(f64::NAN)
    }
}

/// Steps needed so the slowest positive coupling reaches `α̃t = 40`.
pub fn default_fig1_steps(alpha_grid: &[f64], dt: f64) -> usize {
    let min_alpha = alpha_grid.iter().copied().filter(|a| *a > 0.0).fold(f64::INFINITY, f64::min);
    let horizon = if min_alpha.is_finite() { RELAXATION_HORIZON / min_alpha } else { RELAXATION_HORIZON };
    (horizon / dt).round() as usize
}

pub fn run_fig1(sc: &Fig1Scenario) -> Result<Fig1Output> {
    if sc.alpha_grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(Error::config("alpha_grid values must be finite and >= 0"));
    }
    let (model, _) = random_spectrum(sc.seed, sc.dim, sc.spectrum_range, sc.spacing_std)?;
    let psi0 = gaussian_state(&model, sc.mean_fraction, sc.init_state_std, sc.random_phases.then_some(sc.seed))?;
    let target = build_microcanonical(&psi0, &model)?;
    let (o1, o2) = build_observables(&model, &target, sc.pair, sc.seed)?;
    let n_steps = sc.n_steps.unwrap_or_else(|| default_fig1_steps(&sc.alpha_grid, sc.dt));
    let horizon = n_steps as f64 * sc.dt;
    let rho0 = DensityMatrix::pure(&psi0);
    let opts = PropagateOptions {
        sample_stride: sc.sample_stride,
        observables: vec![o1.clone(), o2.clone()],
        ..PropagateOptions::default()
    };

    let curves: Vec<Fig1Curve> = sc
        .alpha_grid
        .par_iter()
        .map(|&alpha| -> Result<Fig1Curve> {
            let gksl = if alpha > 0.0 {
                GKSLModel::thermal(&model, alpha, &target)?
            } else {
                GKSLModel::unitary(&model)
            };
            let record = propagate(&rho0, &gksl, sc.dt, n_steps, &opts)?;
            let series = record.observable("O1").unwrap_or(&[]);
            let span = if alpha > 0.0 { ENVELOPE_FIT_SPAN / alpha } else { horizon };
            let envelope = envelope_decay(&record.times, series, span).ok();
            let trajectories = if sc.trajectories > 0 && alpha > 0.0 {
                let oqt = OQTGenerator::new(alpha, &target)?;
                let steps = sc.trajectory_steps;
                let spec = EnsembleSpec {
                    seed: sc.seed,
                    trajectories: sc.trajectories,
                    dt: sc.dt,
                    n_steps: steps,
                    sample_steps: EnsembleSpec::even_samples(steps, 10),
                    track_projector: false,
                    observables: vec![o1.clone(), o2.clone()],
                };
                Some(run_ensemble(&psi0, Generators::thermal(&oqt), &model, &spec)?)
            } else {
                None
            };
            Ok(Fig1Curve {
                alpha_eff: alpha,
                record,
                envelope,
                trajectories,
            })
        })
        .collect::<Result<_>>()?;

    let mut out = Fig1Output {
        model,
        psi0,
        target,
        o1,
        o2,
        horizon,
        curves,
        checks: Vec::new(),
    };
    out.checks = fig1_checks(&out, sc);
    Ok(out)
}

/// Envelope spread and rate bounds for the unitary curve.
pub const UNITARY_SPREAD_TOL: f64 = 1e-4;
pub const UNITARY_RATE_TOL: f64 = 1e-6;
pub const RATE_REL_TOL: f64 = 0.05;
pub const PLATEAU_TOL: f64 = 1e-6;

fn fig1_checks(out: &Fig1Output, sc: &Fig1Scenario) -> Vec<Check> {
    let mut checks = Vec::new();
    let plateau2 = out.plateau_o2();
    let mut fitted: Vec<(f64, f64)> = Vec::new();
    for c in &out.curves {
        let a = c.alpha_eff;
        let tag = format!("fig1.alpha={a}");
        match (&c.envelope, a > 0.0) {
            (None, _) => checks.push(Check::new(format!("{tag}.envelope"), false, "too few peaks to fit")),
            (Some(env), false) => checks.push(Check::new(
                format!("{tag}.constant_envelope"),
                env.spread <= UNITARY_SPREAD_TOL && env.rate.abs() <= UNITARY_RATE_TOL,
                format!(
                    "peak spread {:.3e} <= {UNITARY_SPREAD_TOL:.0e}, rate {:.3e} within ±{UNITARY_RATE_TOL:.0e} over {} peaks",
                    env.spread, env.rate, env.peaks
                ),
            )),
            (Some(env), true) => {
                let rel = (env.rate - a).abs() / a;
                fitted.push((a, env.rate));
                checks.push(Check::new(
                    format!("{tag}.envelope_rate"),
                    rel <= RATE_REL_TOL,
                    format!("fitted {:.6} vs {a}: relative error {rel:.3e} <= {RATE_REL_TOL}", env.rate),
                ));
            }
        }
        if a > 0.0 {
            let last = c.record.times.len() - 1;
            let v1 = c.record.observable("O1").map_or(f64::NAN, |s| s[last]);
            let v2 = c.record.observable("O2").map_or(f64::NAN, |s| s[last]);
            checks.push(Check::at_most(format!("{tag}.O1_plateau"), v1.abs(), PLATEAU_TOL));
            checks.push(Check::at_most(format!("{tag}.O2_plateau"), (v2 - plateau2).abs(), PLATEAU_TOL));
        }
        if let Some(traj) = &c.trajectories {
            checks.push(trajectory_cross_check(&tag, c, traj, sc));
        }
    }
    fitted.sort_by(|x, y| x.0.total_cmp(&y.0));
    if fitted.len() >= 2 {
        let monotone = fitted.windows(2).all(|w| w[0].1 < w[1].1);
        checks.push(Check::new(
            "fig1.rate_ordering",
            monotone,
            format!("fitted rates {:?}", fitted.iter().map(|f| f.1).collect::<Vec<_>>()),
        ));
    }
    checks
}

/// Trajectory means of `⟨O₁⟩`, `⟨O₂⟩` against the master curves.
fn trajectory_cross_check(tag: &str, c: &Fig1Curve, traj: &TrajectoryEnsemble, sc: &Fig1Scenario) -> Check {
    let mut failures = 0;
    let mut total = 0;
    for (label, moments) in &traj.observables {
        let Some(master) = c.record.observable(label) else { continue };
        for (t, m) in traj.times.iter().zip(moments) {
            let k = (t / (sc.dt * sc.sample_stride as f64)).round() as usize;
            if k >= master.len() || (c.record.times[k] - t).abs() > 0.5 * sc.dt {
                continue;
            }
            total += 1;
            if (m.mean - master[k]).abs() > 3.0 * m.std_error(traj.trajectories) + 1e-12 {
                failures += 1;
            }
        }
    }
    let rate = failures as f64 / total.max(1) as f64;
    Check::new(
        format!("{tag}.trajectory_cross_check"),
        total > 0 && rate <= 0.05,
        format!("{failures}/{total} samples outside 3σ (allowed 5%)"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_is_pinned_and_sorted() {
        for seed in 0..20 {
            let m = build_fig1_hamiltonian(seed).unwrap();
            assert_eq!(m.dim(), 25);
            assert_eq!(m.e_min(), 0.0);
            assert_eq!(m.e_max(), 10.0);
            assert!(m.energies().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn zero_spread_gives_ladder() {
        let (m, _) = random_spectrum(3, 25, (0.0, 10.0), 0.0).unwrap();
        for (k, e) in m.energies().iter().enumerate() {
            assert!((e - k as f64 * 10.0 / 24.0).abs() < 1e-12);
        }
    }

    #[test]
    fn real_variant_is_positive() {
        let m = build_fig1_hamiltonian(1).unwrap();
        let psi = build_fig1_state(&m, 1, false).unwrap();
        assert!(psi.amplitudes().iter().all(|a| a.im == 0.0 && a.re > 0.0));
    }

    #[test]
    fn narrow_packet_concentrates() {
        let m = build_fig1_hamiltonian(2).unwrap();
        let psi = gaussian_state(&m, 0.6, 0.0, Some(2)).unwrap();
        let pops = psi.populations();
        let k = pops.iter().position(|&p| p > 0.999).unwrap();
        let nearest = (0..25).min_by(|&a, &b| (m.energies()[a] - 6.0).abs().total_cmp(&(m.energies()[b] - 6.0).abs()));
        assert_eq!(Some(k), nearest);
    }

    #[test]
    fn observables_have_expected_structure() {
        let m = build_fig1_hamiltonian(4).unwrap();
        let psi = build_fig1_state(&m, 4, true).unwrap();
        let t = build_microcanonical(&psi, &m).unwrap();
        let (o1, o2) = build_observables(&m, &t, None, 4).unwrap();
        let ev = o1.eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[24] - 1.0).abs() < 1e-12);
        assert!(ev[1..24].iter().all(|v| v.abs() < 1e-12));
        let radius = o2.eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((radius - 1.0).abs() < 1e-12);
        let outside = (0..25).find(|k| !t.contains(*k)).unwrap();
        assert!(build_observables(&m, &t, Some((t.members()[0], outside)), 4).is_err());
    }
}
