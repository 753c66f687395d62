//! Self-test suites.
//!
//! `quick` runs the exact and analytic-oracle checks at `d ≤ 8`; `full` adds
//! the Monte Carlo consistency studies and the named experiments at their
//! default sizes. Mutation checks pass when the corrupted model is caught.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::diagnostics::{entropy_law_check, log_decay_rate, residual_bias, DifferenceScheme};
use crate::ensemble::{
    analytic_oqt_solution, gksl_rhs, hybrid_steady_state, propagate, sector_populations, GKSLModel, PropagateOptions,
};
use crate::error::Result;
use crate::experiments::appendix_a::{run_appendix_a, AppendixAScenario};
use crate::experiments::fig1::{gaussian_state, random_spectrum, run_fig1, Fig1Scenario};
use crate::experiments::no_signalling::{maximally_entangled, run_no_signalling, SignallingGenerator};
use crate::experiments::Check;
use crate::measures::{distance_sq, von_neumann_entropy};
use crate::montecarlo::{run_ensemble, EnsembleSpec};
use crate::noise::{builder_rng, WienerSource};
use crate::quantum::{CMatrix, DensityMatrix, SpectralModel, StateVector, C64};
use crate::targets::{as_density, build_microcanonical, MicrocanonicalTarget, Target};
use crate::trajectory::{oqt_drift, oqt_step, step, sui_step, suv_step, Generators, OQTGenerator, SUVGenerator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteLevel {
    Quick,
    Full,
}

impl std::str::FromStr for SuiteLevel {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(SuiteLevel::Quick),
            "full" => Ok(SuiteLevel::Full),
            _ => Err(crate::Error::config(format!("unknown suite {s:?}; expected quick or full"))),
        }
    }
}

/// A small system shared by the quick checks.
struct Bench {
    model: SpectralModel,
    psi: StateVector,
    target: MicrocanonicalTarget,
}

fn bench(seed: u64, dim: usize) -> Result<Bench> {
    let (model, _) = random_spectrum(seed, dim, (0.0, 10.0), 0.3 * 10.0 / (dim - 1) as f64)?;
    let psi = gaussian_state(&model, 0.6, 0.2, Some(seed))?;
    let target = build_microcanonical(&psi, &model)?;
    Ok(Bench { model, psi, target })
}

fn random_density(d: usize, seed: u64, trace: f64) -> CMatrix {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = builder_rng(seed, 99);
    let g = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    m * C64::new(trace / tr, 0.0)
}

fn guarded(name: &str, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::new(name, false, format!("error: {e}")))
}

/// Trace of the generator image must vanish for any input, normalized or not.
pub fn trace_annihilation_check(name: &str, rhs: &dyn Fn(&CMatrix) -> CMatrix, probe: &CMatrix) -> Check {
    let tr = rhs(probe).trace().norm();
    Check::new(name, tr <= 1e-12, format!("|Tr L(ρ)| = {tr:.3e} for Tr ρ = {:.3}", probe.trace().re))
}

/// Mutation probe: a check that must fail on the corrupted model.
fn caught(name: &str, inner: Check) -> Check {
    Check::new(
        name,
        !inner.passed,
        format!("mutant {} ({})", if inner.passed { "survived" } else { "caught" }, inner.detail),
    )
}

/// Signed norm-residual bias over `runs` trajectories of `steps` steps.
fn norm_bias_check(name: &str, b: &Bench, gen: &OQTGenerator, dt: f64, runs: usize, steps: usize, seed: u64) -> Result<Check> {
    let spec = EnsembleSpec {
        seed,
        trajectories: runs,
        dt,
        n_steps: steps,
        sample_steps: vec![steps],
        track_projector: false,
        observables: Vec::new(),
    };
    let e = run_ensemble(&b.psi, Generators::thermal(gen), &b.model, &spec)?;
    let r = residual_bias(&e.residuals, gen.alpha_eff(), dt)?;
    Ok(Check::new(
        name,
        r.consistent,
        format!("mean residual {:.3e} vs 3·{:.2e} + {:.2e}", r.mean_signed, r.std_error, r.allowance),
    ))
}

pub fn quick_checks(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let b = match bench(seed, 8) {
        Ok(b) => b,
        Err(e) => return vec![Check::new("suite.setup", false, e.to_string())],
    };
    let alpha = 1.0;
    let d = b.model.dim();
    let rho0 = DensityMatrix::pure(&b.psi);
    let chi = as_density(&b.target);

    out.push(guarded("quick.fixed_point", || {
        let m = GKSLModel::thermal(&b.model, alpha, &b.target)?;
        let suv = SUVGenerator::contiguous(0.7, d, 2)?;
        let oqt = OQTGenerator::new(alpha, &b.target)?;
        let h = GKSLModel::new(&b.model, Some(&oqt), Some(&suv))?;
        let worst = gksl_rhs(chi.matrix(), &m).norm().max(gksl_rhs(chi.matrix(), &h).norm());
        Ok(Check::at_most("quick.fixed_point", worst, 1e-14))
    }));

    out.push(guarded("quick.lindblad_sum", || {
        let m = GKSLModel::thermal(&b.model, alpha, &b.target)?;
        let rho = random_density(d, seed, 1.0);
        let w = b.target.weights();
        let e = b.model.energies();
        let mut naive = CMatrix::from_fn(d, d, |i, j| C64::new(0.0, -(e[i] - e[j])) * rho[(i, j)]);
        for mu in 0..d {
            for nu in 0..d {
                // χ^μ (L ρ L† − ½{L†L, ρ}) with L = |μ⟩⟨ν|.
                naive[(mu, mu)] += rho[(nu, nu)] * (alpha * w[mu]);
                for k in 0..d {
                    naive[(nu, k)] -= rho[(nu, k)] * (0.5 * alpha * w[mu]);
                    naive[(k, nu)] -= rho[(k, nu)] * (0.5 * alpha * w[mu]);
                }
            }
        }
        Ok(Check::at_most("quick.lindblad_sum", (naive - gksl_rhs(&rho, &m)).norm(), 1e-12))
    }));

    out.push(guarded("quick.drift_closed_form", || {
        let oqt = OQTGenerator::new(alpha, &b.target)?;
        let psi = b.psi.amplitudes();
        let a = oqt.drift_rates();
        let mut naive = CMatrix::zeros(d, 1);
        for &mu in b.target.members() {
            for nu in 0..d {
                // A^μ[⟨L†⟩L − ½L†L − ½⟨L⟩⟨L†⟩]ψ, L = |μ⟩⟨ν|, ⟨L⟩ = ψ̄_μψ_ν.
                let l = psi[mu].conj() * psi[nu];
                naive[(mu, 0)] += l.conj() * psi[nu] * a[mu];
                naive[(nu, 0)] -= psi[nu] * (0.5 * a[mu]);
                for k in 0..d {
                    naive[(k, 0)] -= psi[k] * (l * l.conj() * 0.5 * a[mu]);
                }
            }
        }
        let closed = oqt_drift(psi, &oqt);
        let err = (0..d).map(|k| (naive[(k, 0)] - closed[k]).norm()).fold(0.0, f64::max);
        Ok(Check::at_most("quick.drift_closed_form", err, 1e-12))
    }));

    out.push(guarded("quick.analytic_oracle", || {
        let m = GKSLModel::thermal(&b.model, alpha, &b.target)?;
        let dt = 1e-3;
        let rec = propagate(&rho0, &m, dt, 10_000, &PropagateOptions { sample_stride: 500, keep_states: true, ..Default::default() })?;
        let mut worst = 0.0f64;
        for (t, s) in rec.times.iter().zip(&rec.states) {
            let exact = analytic_oqt_solution(&rho0, &b.target, &b.model, alpha, *t)?;
            worst = worst.max((s.matrix() - exact.matrix()).camax());
        }
        Ok(Check::at_most("quick.analytic_oracle", worst, 1e-8))
    }));

    out.push(guarded("quick.trace_distance_rate", || {
        let t: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let dist = t
            .iter()
            .map(|&s| Ok(distance_sq(analytic_oqt_solution(&rho0, &b.target, &b.model, alpha, s)?.matrix(), chi.matrix())))
            .collect::<Result<Vec<f64>>>()?;
        let w = log_decay_rate(&t, &dist, (0.0, 5.0))?;
        let rel = (w - 2.0 * alpha).abs() / (2.0 * alpha);
        Ok(Check::at_most("quick.trace_distance_rate", rel, 1e-3))
    }));

    out.push(guarded("quick.entropy_law", || {
        let m = GKSLModel::thermal(&b.model, alpha, &b.target)?;
        let opts = PropagateOptions { relative_entropy: true, ..Default::default() };
        let errs = [1e-3, 5e-4]
            .iter()
            .map(|&dt| {
                let rec = propagate(&rho0, &m, dt, (2.0 / dt).round() as usize + 1, &opts)?;
                Ok(entropy_law_check(&rec, b.target.omega(), DifferenceScheme::Forward, (0.1, 2.0))?.max_relative_error)
            })
            .collect::<Result<Vec<f64>>>()?;
        let ratio = errs[1] / errs[0];
        Ok(Check::new(
            "quick.entropy_law",
            errs[0] <= 0.02 && (0.375..=0.625).contains(&ratio),
            format!("max relative error {:.3e}, halving ratio {ratio:.3}", errs[0]),
        ))
    }));

    out.push(guarded("quick.equilibrium_entropy", || {
        let s = von_neumann_entropy(&analytic_oqt_solution(&rho0, &b.target, &b.model, alpha, 40.0)?)?;
        let m = GKSLModel::thermal(&b.model, alpha, &b.target)?;
        let rec = propagate(&rho0, &m, 1e-2, 4000, &PropagateOptions { sample_stride: 4000, ..Default::default() })?;
        let log_omega = (b.target.omega() as f64).ln();
        let worst = (s - log_omega).abs().max((rec.entropy[rec.entropy.len() - 1] - log_omega).abs());
        Ok(Check::at_most("quick.equilibrium_entropy", worst, 1e-6))
    }));

    out.push(guarded("quick.energy_bookkeeping", || {
        let m = GKSLModel::thermal(&b.model, alpha, &b.target)?;
        let dt = 1e-3;
        let rec = propagate(&rho0, &m, dt, 3000, &PropagateOptions { sample_stride: 100, ..Default::default() })?;
        let e0 = crate::measures::energy_stats(&b.psi, &b.model)?.mean;
        let e_chi = b.target.mean_energy(&b.model);
        let offset = (e_chi - e0 - b.target.energy_offset()).abs();
        let worst = rec
            .times
            .iter()
            .zip(&rec.energy)
            .map(|(t, e)| (e - e_chi - (e0 - e_chi) * (-alpha * t).exp()).abs())
            .fold(offset, f64::max);
        Ok(Check::at_most("quick.energy_bookkeeping", worst, 1e-9))
    }));

    out.push(guarded("quick.sector_conservation", || {
        let suv = SUVGenerator::contiguous(0.8, d, 2)?;
        let m = GKSLModel::new(&b.model, None, Some(&suv))?;
        let rec = propagate(&rho0, &m, 1e-3, 5000, &PropagateOptions { sample_stride: 250, ..Default::default() })?;
        let term = m.reduction_term().expect("reduction present");
        let p0 = sector_populations(&rho0, term);
        let mut worst = 0.0f64;
        for diag in &rec.diagonals {
            let p = sector_populations(&DensityMatrix::diagonal(diag)?, term);
            worst = worst.max(p.iter().zip(&p0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        }
        Ok(Check::at_most("quick.sector_conservation", worst, 1e-10))
    }));

    out.push(guarded("quick.unitary_limit", || {
        let e = b.model.energies();
        let mut noise = WienerSource::new(seed, 0);
        let dt = 1e-3;
        let mut psi = b.psi.clone();
        for _ in 0..1000 {
            psi = step(&psi, &Generators::unitary(), &b.model, dt, &mut noise)?.state;
        }
        let worst = (0..d)
            .map(|k| (psi.amplitudes()[k] - b.psi.amplitudes()[k] * C64::from_polar(1.0, -e[k] * 1.0)).norm())
            .fold(0.0, f64::max);
        Ok(Check::at_most("quick.unitary_limit", worst, 1e-9))
    }));

    out.push(guarded("quick.generator_additivity", || {
        let oqt = OQTGenerator::new(alpha, &b.target)?;
        let oqt0 = OQTGenerator::new(0.0, &b.target)?;
        let suv = SUVGenerator::contiguous(0.5, d, 2)?;
        let suv0 = SUVGenerator::contiguous(0.0, d, 2)?;
        let dt = 1e-3;
        let (mut n1, mut n2, mut n3, mut n4) = (
            WienerSource::new(seed, 7),
            WienerSource::new(seed, 7),
            WienerSource::new(seed, 7),
            WienerSource::new(seed, 7),
        );
        let (mut a, mut h1, mut s, mut h2) = (b.psi.clone(), b.psi.clone(), b.psi.clone(), b.psi.clone());
        for _ in 0..200 {
            a = oqt_step(&a, &oqt, &b.model, dt, &mut n1)?.state;
            h1 = sui_step(&h1, &oqt, &suv0, &b.model, dt, &mut n2)?.state;
            s = suv_step(&s, &suv, &b.model, dt, &mut n3)?.state;
            h2 = sui_step(&h2, &oqt0, &suv, &b.model, dt, &mut n4)?.state;
        }
        let exact = a.amplitudes() == h1.amplitudes() && s.amplitudes() == h2.amplitudes();
        Ok(Check::new("quick.generator_additivity", exact, "J̃ = 0 and α̃ = 0 hybrids bit-identical to single-generator steps"))
    }));

    out.push(guarded("quick.no_signalling", || {
        let a = SpectralModel::ladder(4, 1.0)?;
        let bm = SpectralModel::new(vec![0.0, 0.7, 1.5, 2.6])?;
        let rho = DensityMatrix::pure(&maximally_entangled(4)?);
        let lin = run_no_signalling(&a, &bm, &rho, 1.0, 1e-3, 2000, 20, SignallingGenerator::Linear)?;
        let bad = run_no_signalling(&a, &bm, &rho, 1.0, 1e-3, 2000, 20, SignallingGenerator::NonlinearMutant)?;
        Ok(Check::new(
            "quick.no_signalling",
            lin.max_deviation <= 1e-9 && bad.max_deviation >= 1e-3,
            format!("linear {:.3e} <= 1e-9, mutant {:.3e} >= 1e-3", lin.max_deviation, bad.max_deviation),
        ))
    }));

    out.push(guarded("quick.hybrid_steady_state", || {
        let oqt = OQTGenerator::new(0.5, &b.target)?;
        let suv = SUVGenerator::contiguous(1.5, d, 2)?;
        let m = GKSLModel::new(&b.model, Some(&oqt), Some(&suv))?;
        let ss = hybrid_steady_state(&m)?;
        let dt = 1e-2;
        let n = (40.0 / 0.5 / dt) as usize;
        let rec = propagate(&rho0, &m, dt, n, &PropagateOptions { sample_stride: n, keep_states: true, ..Default::default() })?;
        let gap = (rec.states[rec.states.len() - 1].matrix() - ss.state.matrix()).camax();
        Ok(Check::new(
            "quick.hybrid_steady_state",
            ss.residual <= 1e-10 && gap <= 1e-6 && !ss.degenerate,
            format!("residual {:.3e} <= 1e-10, time-march gap {gap:.3e} <= 1e-6", ss.residual),
        ))
    }));

    out.push(guarded("quick.reproducibility", || {
        let oqt = OQTGenerator::new(alpha, &b.target)?;
        let obs = crate::trajectory::Observers::default();
        let run = || crate::trajectory::integrate_trajectory(&b.psi, Generators::thermal(&oqt), &b.model, 1e-3, 300, WienerSource::new(seed, 3), &obs);
        Ok(Check::new("quick.reproducibility", run()? == run()?, "identical (seed, stream) give identical records"))
    }));

    // Mutation probes.
    out.push(guarded("quick.mutant_fdr", || {
        let oqt = OQTGenerator::new(alpha, &b.target)?;
        let w = oqt.drift_rates().to_vec();
        let broken = OQTGenerator::with_coefficients(alpha, &b.target, w.clone(), w)?;
        let good = norm_bias_check("quick.fdr_bias", &b, &oqt, 1e-3, 200, 200, seed)?;
        let bad = norm_bias_check("quick.fdr_bias", &b, &broken, 1e-3, 200, 200, seed)?;
        Ok(Check::new(
            "quick.mutant_fdr",
            good.passed && !bad.passed,
            format!("correct: {}; noise A instead of √A: {}", good.detail, bad.detail),
        ))
    }));

    out.push({
        let probe = random_density(d, seed + 1, 2.5);
        let w = b.target.weights().to_vec();
        let model = GKSLModel::thermal(&b.model, alpha, &b.target);
        match model {
            Ok(m) => {
                let good = trace_annihilation_check("quick.trace_annihilation", &|r| gksl_rhs(r, &m), &probe);
                let mutant = move |r: &CMatrix| {
                    let mut out = r * C64::new(-alpha, 0.0);
                    for (i, x) in w.iter().enumerate() {
                        out[(i, i)] += alpha * x;
                    }
                    out
                };
                let bad = caught("quick.mutant_missing_trace", trace_annihilation_check("trace", &mutant, &probe));
                Check::new(
                    "quick.mutant_missing_trace",
                    good.passed && bad.passed,
                    format!("correct: {}; {}", good.detail, bad.detail),
                )
            }
            Err(e) => Check::new("quick.mutant_missing_trace", false, e.to_string()),
        }
    });
    out
}

/// Monte Carlo and default-size experiment checks.
pub fn full_checks(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let b = match bench(seed, 8) {
        Ok(b) => b,
        Err(e) => return vec![Check::new("suite.setup", false, e.to_string())],
    };
    let d = b.model.dim();

    out.push(guarded("full.trajectory_master_consistency", || {
        let oqt = OQTGenerator::new(1.0, &b.target)?;
        let dt = 2e-4;
        let n = 5000;
        let spec = EnsembleSpec {
            seed,
            trajectories: 2000,
            dt,
            n_steps: n,
            sample_steps: (1..=5).map(|k| k * n / 5).collect(),
            track_projector: true,
            observables: Vec::new(),
        };
        let e = run_ensemble(&b.psi, Generators::thermal(&oqt), &b.model, &spec)?;
        let rho0 = DensityMatrix::pure(&b.psi);
        let (mut total, mut outside) = (0usize, 0usize);
        for (k, &step_k) in spec.sample_steps.iter().enumerate() {
            let exact = analytic_oqt_solution(&rho0, &b.target, &b.model, 1.0, step_k as f64 * dt)?;
            let (vr, vi): &(DMatrix<f64>, DMatrix<f64>) = &e.projector_var[k];
            for i in 0..d {
                for j in 0..d {
                    let diff = e.projector_mean[k][(i, j)] - exact.matrix()[(i, j)];
                    for (delta, var) in [(diff.re, vr[(i, j)]), (diff.im, vi[(i, j)])] {
                        if var == 0.0 && delta.abs() < 1e-12 {
                            continue;
                        }
                        total += 1;
                        if delta.abs() > 3.0 * (var / 2000.0).sqrt() {
                            outside += 1;
                        }
                    }
                }
            }
        }
        let rate = outside as f64 / total.max(1) as f64;
        Ok(Check::at_most(format!("full.trajectory_master_consistency ({outside}/{total})"), rate, 0.01))
    }));

    out.push(guarded("full.fdr_scaling", || {
        let oqt = OQTGenerator::new(1.0, &b.target)?;
        let mean_abs = |dt: f64, steps: usize| -> Result<f64> {
            let spec = EnsembleSpec {
                seed,
                trajectories: 100,
                dt,
                n_steps: steps,
                sample_steps: vec![steps],
                track_projector: false,
                observables: Vec::new(),
            };
            let e = run_ensemble(&b.psi, Generators::thermal(&oqt), &b.model, &spec)?;
            Ok(e.residuals.iter().map(|r| r.mean_abs).sum::<f64>() / e.residuals.len() as f64)
        };
        let (r1, r2) = (mean_abs(1e-3, 1000)?, mean_abs(5e-4, 2000)?);
        let ratio = r2 / r1;
        Ok(Check::new(
            "full.fdr_scaling",
            (0.4..=0.6).contains(&ratio),
            format!("mean |residual| {r1:.3e} → {r2:.3e}, ratio {ratio:.3} in [0.4, 0.6]"),
        ))
    }));

    out.push(guarded("full.collapse_statistics", || {
        let suv = SUVGenerator::contiguous(5.0, d, 2)?;
        let n = 4000;
        let spec = EnsembleSpec {
            seed,
            trajectories: 2000,
            dt: 2e-3,
            n_steps: n,
            sample_steps: vec![0, n],
            track_projector: false,
            observables: Vec::new(),
        };
        let e = run_ensemble(&b.psi, Generators::reduction(&suv), &b.model, &spec)?;
        let born = suv.sector_weights(b.psi.amplitudes())[0];
        let worst = e.terminal_sectors.iter().map(|w| w[0].min(1.0 - w[0])).fold(0.0, f64::max);
        let freq = e.terminal_sectors.iter().filter(|w| w[0] > 0.5).count() as f64 / 2000.0;
        let sigma = (born * (1.0 - born) / 2000.0).sqrt();
        Ok(Check::new(
            "full.collapse_statistics",
            worst <= 1e-6 && (freq - born).abs() <= 3.0 * sigma,
            format!("max distance from {{0,1}} {worst:.2e}; selection {freq:.4} vs Born {born:.4} (3σ = {:.4})", 3.0 * sigma),
        ))
    }));

    match run_appendix_a(&AppendixAScenario { seed, ..Default::default() }) {
        Ok(r) => out.extend(r.checks),
        Err(e) => out.push(Check::new("full.appendix_a", false, e.to_string())),
    }
    match run_fig1(&Fig1Scenario { seed, ..Default::default() }) {
        Ok(r) => out.extend(r.checks),
        Err(e) => out.push(Check::new("full.fig1", false, e.to_string())),
    }
    out
}

pub fn run_suite(level: SuiteLevel, seed: u64) -> Vec<Check> {
    let mut checks = quick_checks(seed);
    if level == SuiteLevel::Full {
        checks.extend(full_checks(seed));
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let checks = quick_checks(0);
        let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(Check::line).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
