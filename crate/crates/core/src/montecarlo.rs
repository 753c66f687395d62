//! Ensembles of independent trajectories with reproducible statistics.
//!
//! Trajectory `i` draws its noise from stream `i` of the master seed, so
//! growing the ensemble never changes earlier trajectories. Trajectories run
//! in parallel blocks; their contributions are then folded sequentially in
//! index order, which makes every moment independent of the worker count.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::WienerSource;
use crate::measures::expectation;
use crate::quantum::{CMatrix, Observable, SpectralModel, StateVector, C64};
use crate::trajectory::{Generators, ResidualStats, TrajectoryIntegrator};

const BLOCK: usize = 64;

#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub seed: u64,
    pub trajectories: usize,
    pub dt: f64,
    pub n_steps: usize,
    /// Step indices at which moments are taken (ascending, each ≤ `n_steps`).
    pub sample_steps: Vec<usize>,
    /// Also accumulate `|ψ⟩⟨ψ|` elementwise (costs `d²` per sample).
    pub track_projector: bool,
    /// Observables whose per-trajectory expectations are accumulated.
    pub observables: Vec<Observable>,
}

impl EnsembleSpec {
    /// `count + 1` evenly spaced samples from `0` to `n_steps`.
    pub fn even_samples(n_steps: usize, count: usize) -> Vec<usize> {
        let count = count.max(1);
        let mut s: Vec<usize> = (0..=count).map(|k| k * n_steps / count).collect();
        s.dedup();
        s
    }
}

/// Sample mean and unbiased variance of one scalar across trajectories.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Moment {
    pub mean: f64,
    pub variance: f64,
}

impl Moment {
    pub fn std_error(&self, n: usize) -> f64 {
        (self.variance / n as f64).sqrt()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryEnsemble {
    pub seed: u64,
    pub trajectories: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `[sample][component]` moments of `|ψ_μ|²`.
    pub populations: Vec<Vec<Moment>>,
    /// `[sample][sector]` moments of `‖P_k ψ‖²` (empty without reduction).
    pub sectors: Vec<Vec<Moment>>,
    /// `[sample]` moments of `⟨H⟩`.
    pub energy: Vec<Moment>,
    /// `(label, [sample] moments)` for each requested observable.
    pub observables: Vec<(String, Vec<Moment>)>,
    #[serde(skip)]
    pub projector_mean: Vec<CMatrix>,
    /// Variances of real and imaginary parts of `|ψ⟩⟨ψ|`.
    #[serde(skip)]
    pub projector_var: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    /// Per-trajectory residual statistics, in trajectory order.
    pub residuals: Vec<ResidualStats>,
    /// Per-trajectory sector weights at the last step.
    pub terminal_sectors: Vec<Vec<f64>>,
}

impl TrajectoryEnsemble {
    pub fn population_series(&self, mu: usize) -> Vec<Moment> {
        self.populations.iter().map(|row| row[mu]).collect()
    }

    pub fn sector_series(&self, k: usize) -> Vec<Moment> {
        self.sectors.iter().map(|row| row[k]).collect()
    }
}

struct Sampled {
    pops: Vec<Vec<f64>>,
    sectors: Vec<Vec<f64>>,
    energy: Vec<f64>,
    projectors: Vec<CMatrix>,
    observables: Vec<Vec<f64>>,
    residuals: ResidualStats,
}

fn run_one(
    psi0: &StateVector,
    gens: Generators<'_>,
    model: &SpectralModel,
    spec: &EnsembleSpec,
    index: usize,
) -> Result<Sampled> {
    let noise = WienerSource::new(spec.seed, index as u64);
    let mut integ = TrajectoryIntegrator::new(psi0, gens, model, spec.dt, noise)?;
    let n_samples = spec.sample_steps.len();
    let mut out = Sampled {
        pops: Vec::with_capacity(n_samples),
        sectors: Vec::with_capacity(n_samples),
        energy: Vec::with_capacity(n_samples),
        projectors: Vec::new(),
        observables: vec![Vec::with_capacity(n_samples); spec.observables.len()],
        residuals: ResidualStats::default(),
    };
    let mut next = 0;
    for k in 0..=spec.n_steps {
        if k > 0 {
            integ.step()?;
        }
        while next < n_samples && spec.sample_steps[next] == k {
            let psi = integ.amplitudes();
            let pops: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
            out.energy.push(pops.iter().zip(model.energies()).map(|(p, e)| p * e).sum());
            if let Some(g) = gens.suv {
                out.sectors.push(g.sector_weights(psi));
            }
            if spec.track_projector {
                out.projectors.push(psi * psi.adjoint());
            }
            if !spec.observables.is_empty() {
                let state = integ.state();
                for (o, series) in spec.observables.iter().zip(out.observables.iter_mut()) {
                    series.push(expectation(&state, o)?);
                }
            }
            out.pops.push(pops);
            next += 1;
        }
    }
    out.residuals = integ.residuals();
    Ok(out)
}

#[derive(Clone)]
struct Acc {
    n: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Acc {
    fn new(len: usize) -> Self {
        Acc {
            n: 0,
            sum: vec![0.0; len],
            sq: vec![0.0; len],
        }
    }

    fn push(&mut self, xs: impl Iterator<Item = f64>) {
        self.n += 1;
        for ((s, q), x) in self.sum.iter_mut().zip(self.sq.iter_mut()).zip(xs) {
            *s += x;
            *q += x * x;
        }
    }

    fn moments(&self) -> Vec<Moment> {
        let n = self.n as f64;
        self.sum
            .iter()
            .zip(&self.sq)
            .map(|(&s, &q)| {
                let mean = s / n;
                let variance = if self.n > 1 {
                    ((q - n * mean * mean) / (n - 1.0)).max(0.0)
                } else {
                    0.0
                };
                Moment { mean, variance }
            })
            .collect()
    }
}

/// Run `spec.trajectories` trajectories from `psi0` on the current rayon pool.
pub fn run_ensemble(
    psi0: &StateVector,
    gens: Generators<'_>,
    model: &SpectralModel,
    spec: &EnsembleSpec,
) -> Result<TrajectoryEnsemble> {
    if spec.trajectories == 0 {
        return Err(Error::config("ensemble needs at least one trajectory"));
    }
    if spec.sample_steps.windows(2).any(|w| w[0] >= w[1]) || spec.sample_steps.iter().any(|&k| k > spec.n_steps) {
        return Err(Error::config("sample_steps must be strictly ascending and within n_steps"));
    }
    let d = psi0.dim();
    let ns = spec.sample_steps.len();
    let ks = gens.suv.map_or(0, |g| g.sector_count());
    let mut pops = vec![Acc::new(d); ns];
    let mut secs = vec![Acc::new(ks); ns];
    let mut energy = Acc::new(ns);
    let mut proj = vec![Acc::new(2 * d * d); if spec.track_projector { ns } else { 0 }];
    let mut obs = vec![Acc::new(ns); spec.observables.len()];
    let mut residuals = Vec::with_capacity(spec.trajectories);
    let mut terminal_sectors = Vec::with_capacity(spec.trajectories);

    let final_sample = spec.sample_steps.last() == Some(&spec.n_steps);
    for start in (0..spec.trajectories).step_by(BLOCK) {
        let end = (start + BLOCK).min(spec.trajectories);
        let block: Vec<Result<Sampled>> = (start..end)
            .into_par_iter()
            .map(|i| run_one(psi0, gens, model, spec, i))
            .collect();
        for r in block {
            let s = r?;
            for (acc, p) in pops.iter_mut().zip(&s.pops) {
                acc.push(p.iter().copied());
            }
            for (acc, w) in secs.iter_mut().zip(&s.sectors) {
                acc.push(w.iter().copied());
            }
            energy.push(s.energy.iter().copied());
            for (acc, v) in obs.iter_mut().zip(&s.observables) {
                acc.push(v.iter().copied());
            }
            for (acc, m) in proj.iter_mut().zip(&s.projectors) {
                acc.push(m.iter().map(|z| z.re).chain(m.iter().map(|z| z.im)));
            }
            if final_sample {
                if let Some(w) = s.sectors.last() {
                    terminal_sectors.push(w.clone());
                }
            }
            residuals.push(s.residuals);
        }
    }

    let (projector_mean, projector_var) = proj
        .iter()
        .map(|acc| {
            let m = acc.moments();
            let dd = d * d;
            let mean = CMatrix::from_fn(d, d, |i, j| {
                let k = i + j * d;
                C64::new(m[k].mean, m[dd + k].mean)
            });
            let var_re = DMatrix::from_fn(d, d, |i, j| m[i + j * d].variance);
            let var_im = DMatrix::from_fn(d, d, |i, j| m[dd + i + j * d].variance);
            (mean, (var_re, var_im))
        })
        .unzip();

    Ok(TrajectoryEnsemble {
        seed: spec.seed,
        trajectories: spec.trajectories,
        dt: spec.dt,
        times: spec.sample_steps.iter().map(|&k| k as f64 * spec.dt).collect(),
        populations: pops.iter().map(Acc::moments).collect(),
        sectors: if ks > 0 { secs.iter().map(Acc::moments).collect() } else { Vec::new() },
        energy: energy.moments(),
        observables: spec
            .observables
            .iter()
            .zip(&obs)
            .map(|(o, acc)| (o.label().to_string(), acc.moments()))
            .collect(),
        projector_mean,
        projector_var,
        residuals,
        terminal_sectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::build_microcanonical;
    use crate::trajectory::{OQTGenerator, SUVGenerator};

    fn setup() -> (SpectralModel, StateVector) {
        let model = SpectralModel::new(vec![0.0, 0.4, 1.0, 1.7]).unwrap();
        let psi = StateVector::new(vec![
            C64::new(0.5, 0.1),
            C64::new(0.3, -0.4),
            C64::new(0.2, 0.5),
            C64::new(-0.4, 0.1),
        ])
        .unwrap()
        .bound_to(&model)
        .unwrap();
        (model, psi)
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let (model, psi) = setup();
        let target = build_microcanonical(&psi, &model).unwrap();
        let oqt = OQTGenerator::new(1.0, &target).unwrap();
        let suv = SUVGenerator::contiguous(0.5, 4, 2).unwrap();
        let spec = EnsembleSpec {
            seed: 5,
            trajectories: 150,
            dt: 1e-3,
            n_steps: 200,
            sample_steps: EnsembleSpec::even_samples(200, 4),
            track_projector: true,
            observables: Vec::new(),
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ensemble(&psi, Generators::hybrid(&oqt, &suv), &model, &spec).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.populations, b.populations);
        assert_eq!(a.projector_mean, b.projector_mean);
        assert_eq!(a.terminal_sectors, b.terminal_sectors);
    }

    #[test]
    fn unitary_ensemble_has_no_spread() {
        let (model, psi) = setup();
        let spec = EnsembleSpec {
            seed: 1,
            trajectories: 3,
            dt: 1e-2,
            n_steps: 10,
            sample_steps: vec![0, 10],
            track_projector: false,
            observables: vec![model.hamiltonian()],
        };
        let e = run_ensemble(&psi, Generators::unitary(), &model, &spec).unwrap();
        for (m, p) in e.populations[1].iter().zip(psi.populations()) {
            assert!((m.mean - p).abs() < 1e-12);
            assert!(m.variance < 1e-24);
        }
        let e0 = crate::measures::energy_stats(&psi, &model).unwrap().mean;
        assert!((e.observables[0].1[1].mean - e0).abs() < 1e-12);
        assert!((e.energy[1].mean - e0).abs() < 1e-12);
    }

    #[test]
    fn even_samples_cover_endpoints() {
        assert_eq!(EnsembleSpec::even_samples(10, 5), vec![0, 2, 4, 6, 8, 10]);
        assert_eq!(EnsembleSpec::even_samples(3, 5), vec![0, 1, 2, 3]);
    }
}
