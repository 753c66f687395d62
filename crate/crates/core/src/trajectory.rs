//! Itô stochastic Schrödinger trajectories for single systems.
//!
//! Three processes share one Euler–Maruyama kernel:
//!
//! * thermalization, driven by the transition operators `L_{μν} = |μ⟩⟨ν|` with
//!   drift rates `A^μ = α̃·χ^μ` and noise amplitudes `√A^μ`;
//! * reduction, driven by the sector projectors `P_k` with rate `J̃`;
//! * the hybrid process, which adds both increments within one step.
//!
//! The unitary part is applied as exact phases `e^{−iE_μ dt}` after the
//! stochastic increment, and the state is renormalized every step. The
//! pre-renormalization residual `‖ψ‖² − 1` is returned as the
//! fluctuation–dissipation diagnostic: with `noise² = drift` it vanishes in
//! expectation up to `O(dt²)`.
//!
//! Noise ordering: thermal channels row-major over `(μ ∈ W ascending,
//! ν ascending)` from the thermal stream, sector channels `k` ascending from the
//! reduction stream (see [`WienerSource`]).

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::measures::{expectation, moments};
use crate::noise::WienerSource;
use crate::quantum::{CVector, Observable, SpectralModel, StateVector, C64};
use crate::targets::{MicrocanonicalTarget, Target};

/// Largest permitted `rate·dt` for one step.
pub const STABILITY_GUARD: f64 = 0.1;

/// Thermalization generator.
#[derive(Clone, Debug)]
pub struct OQTGenerator {
    alpha_eff: f64,
    target: MicrocanonicalTarget,
    drift: Vec<f64>,
    noise: Vec<f64>,
}

impl OQTGenerator {
    pub fn new(alpha_eff: f64, target: &MicrocanonicalTarget) -> Result<Self> {
        check_rate("alpha_eff", alpha_eff)?;
        let drift: Vec<f64> = target.weights().iter().map(|w| alpha_eff * w).collect();
        let noise = drift.iter().map(|a| a.sqrt()).collect();
        Ok(OQTGenerator {
            alpha_eff,
            target: target.clone(),
            drift,
            noise,
        })
    }

    /// Generator with arbitrary per-row drift and noise coefficients.
    ///
    /// Rows outside the target's member set are ignored. Unless
    /// `noise[μ]² = drift[μ]` the process does not preserve the norm; this is
    /// what the falsification checks use.
    pub fn with_coefficients(
        alpha_eff: f64,
        target: &MicrocanonicalTarget,
        drift: Vec<f64>,
        noise: Vec<f64>,
    ) -> Result<Self> {
        check_rate("alpha_eff", alpha_eff)?;
        check_dim("drift coefficients", target.dim(), drift.len())?;
        check_dim("noise coefficients", target.dim(), noise.len())?;
        Ok(OQTGenerator {
            alpha_eff,
            target: target.clone(),
            drift,
            noise,
        })
    }

    pub fn alpha_eff(&self) -> f64 {
        self.alpha_eff
    }

    pub fn target(&self) -> &MicrocanonicalTarget {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    /// `A^μ`.
    pub fn drift_rates(&self) -> &[f64] {
        &self.drift
    }

    pub fn noise_amplitudes(&self) -> &[f64] {
        &self.noise
    }

    /// `Ω·d` Wiener channels per step.
    pub fn channel_count(&self) -> usize {
        self.target.omega() * self.dim()
    }

    pub fn satisfies_fdr(&self) -> bool {
        self.target
            .members()
            .iter()
            .all(|&m| (self.noise[m] * self.noise[m] - self.drift[m]).abs() <= 1e-12 * self.drift[m].max(1.0))
    }
}

/// Reduction generator over a partition of the basis into sectors.
#[derive(Clone, Debug)]
pub struct SUVGenerator {
    j_eff: f64,
    sectors: Vec<Vec<usize>>,
    sector_of: Vec<usize>,
}

impl SUVGenerator {
    pub fn new(j_eff: f64, sectors: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        check_rate("j_eff", j_eff)?;
        let mut sector_of = vec![usize::MAX; dim];
        for (k, s) in sectors.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::config(format!("sector {k} is empty")));
            }
            for &i in s {
                if i >= dim {
                    return Err(Error::config(format!("sector {k} index {i} >= d = {dim}")));
                }
                if sector_of[i] != usize::MAX {
                    return Err(Error::config(format!("index {i} appears in two sectors")));
                }
                sector_of[i] = k;
            }
        }
        if let Some(i) = sector_of.iter().position(|&k| k == usize::MAX) {
            return Err(Error::config(format!("index {i} is not covered by any sector")));
        }
        let mut sectors = sectors;
        for s in &mut sectors {
            s.sort_unstable();
        }
        Ok(SUVGenerator {
            j_eff,
            sectors,
            sector_of,
        })
    }

    /// Split `0..dim` into `count` contiguous sectors of near-equal size.
    pub fn contiguous(j_eff: f64, dim: usize, count: usize) -> Result<Self> {
        if count == 0 || count > dim {
            return Err(Error::config(format!("cannot split d = {dim} into {count} sectors")));
        }
        let sectors = (0..count)
            .map(|k| (k * dim / count..(k + 1) * dim / count).collect())
            .collect();
        Self::new(j_eff, sectors, dim)
    }

    pub fn j_eff(&self) -> f64 {
        self.j_eff
    }

    pub fn sectors(&self) -> &[Vec<usize>] {
        &self.sectors
    }

    pub fn sector_of(&self, i: usize) -> usize {
        self.sector_of[i]
    }

    pub fn dim(&self) -> usize {
        self.sector_of.len()
    }

    pub fn sector_count(&self) -> usize {
        self.sectors.len()
    }

    /// `⟨P_k⟩` for every sector.
    pub fn sector_weights(&self, psi: &CVector) -> Vec<f64> {
        let mut w = vec![0.0; self.sectors.len()];
        for (i, a) in psi.iter().enumerate() {
            w[self.sector_of[i]] += a.norm_sqr();
        }
        w
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// Which generators drive a trajectory.
#[derive(Clone, Copy, Debug, Default)]
pub struct Generators<'a> {
    pub oqt: Option<&'a OQTGenerator>,
    pub suv: Option<&'a SUVGenerator>,
}

impl<'a> Generators<'a> {
    pub fn unitary() -> Self {
        Generators::default()
    }

    pub fn thermal(oqt: &'a OQTGenerator) -> Self {
        Generators { oqt: Some(oqt), suv: None }
    }

    pub fn reduction(suv: &'a SUVGenerator) -> Self {
        Generators { oqt: None, suv: Some(suv) }
    }

    pub fn hybrid(oqt: &'a OQTGenerator, suv: &'a SUVGenerator) -> Self {
        Generators { oqt: Some(oqt), suv: Some(suv) }
    }

    fn total_rate(&self) -> f64 {
        self.oqt.map_or(0.0, |g| g.alpha_eff) + self.suv.map_or(0.0, |g| g.j_eff)
    }

    fn validate(&self, dim: usize, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::contract(format!("dt must be > 0, got {dt}")));
        }
        if let Some(g) = self.oqt {
            check_dim("thermal generator", dim, g.dim())?;
            if g.alpha_eff * dt > STABILITY_GUARD {
                return Err(Error::StepSize(format!(
                    "alpha_eff·dt = {} exceeds {STABILITY_GUARD}",
                    g.alpha_eff * dt
                )));
            }
        }
        if let Some(g) = self.suv {
            check_dim("reduction generator", dim, g.dim())?;
            if g.j_eff * dt > STABILITY_GUARD {
                return Err(Error::StepSize(format!(
                    "j_eff·dt = {} exceeds {STABILITY_GUARD}",
                    g.j_eff * dt
                )));
            }
        }
        Ok(())
    }
}

/// Result of one step: the renormalized state and the residual `‖ψ‖² − 1`
/// before renormalization.
#[derive(Clone, Debug)]
pub struct Stepped {
    pub state: StateVector,
    pub norm_residual: f64,
}

#[derive(Clone, Debug, Default)]
struct Scratch {
    dw_thermal: Vec<f64>,
    dw_reduction: Vec<f64>,
    delta: Vec<C64>,
    rows: Vec<C64>,
}

/// Thermalization drift `Σ_{μ∈W,ν} A^μ[⟨L†⟩L − ½L†L − ½⟨L⟩⟨L†⟩]ψ` in closed form
/// (uses `‖ψ‖ = 1`): `A∘ψ − ½(ΣA)ψ − ½(Σ_μ A^μ|ψ_μ|²)ψ`.
pub fn oqt_drift(psi: &CVector, gen: &OQTGenerator) -> CVector {
    let members = gen.target.members();
    let total: f64 = members.iter().map(|&m| gen.drift[m]).sum();
    let weighted: f64 = members.iter().map(|&m| gen.drift[m] * psi[m].norm_sqr()).sum();
    let mut out = psi * C64::new(-0.5 * (total + weighted), 0.0);
    for &m in members {
        out[m] += psi[m] * gen.drift[m];
    }
    out
}

fn add_oqt_increment(psi: &CVector, gen: &OQTGenerator, dt: f64, noise: &mut WienerSource, s: &mut Scratch) {
    let d = psi.len();
    let members = gen.target.members();
    s.dw_thermal.resize(members.len() * d, 0.0);
    noise.fill_thermal(dt, &mut s.dw_thermal);

    let total: f64 = members.iter().map(|&m| gen.drift[m]).sum();
    let weighted: f64 = members.iter().map(|&m| gen.drift[m] * psi[m].norm_sqr()).sum();
    let shrink = -0.5 * (total + weighted) * dt;

    // X_μ = Σ_ν ψ_ν dW^{μν}; noise = Σ_μ √A^μ X_μ|μ⟩ − (Σ_μ √A^μ ψ̄_μ X_μ) ψ.
    s.rows.clear();
    let mut mean_term = C64::new(0.0, 0.0);
    for (r, &m) in members.iter().enumerate() {
        let dw = &s.dw_thermal[r * d..(r + 1) * d];
        let x = psi.iter().zip(dw).fold(C64::new(0.0, 0.0), |acc, (p, w)| acc + p * *w);
        let scaled = x * gen.noise[m];
        mean_term += psi[m].conj() * scaled;
        s.rows.push(scaled);
    }
    for i in 0..d {
        s.delta[i] += psi[i] * (shrink - mean_term) ;
    }
    for (r, &m) in members.iter().enumerate() {
        s.delta[m] += psi[m] * (gen.drift[m] * dt) + s.rows[r];
    }
}

fn add_suv_increment(psi: &CVector, gen: &SUVGenerator, dt: f64, noise: &mut WienerSource, s: &mut Scratch) {
    let k = gen.sector_count();
    s.dw_reduction.resize(k, 0.0);
    noise.fill_reduction(dt, &mut s.dw_reduction);
    let p = gen.sector_weights(psi);
    let sum_sq: f64 = p.iter().map(|x| x * x).sum();
    let mean_dw: f64 = p.iter().zip(&s.dw_reduction).map(|(a, b)| a * b).sum();
    let j = gen.j_eff;
    let amp = j.sqrt();
    for (i, a) in psi.iter().enumerate() {
        let ks = gen.sector_of[i];
        // Σ_k (P_k − p_k)² acting on a component of sector s.
        let quad = 1.0 - 2.0 * p[ks] + sum_sq;
        let coeff = -0.5 * j * quad * dt + amp * (s.dw_reduction[ks] - mean_dw);
        s.delta[i] += a * coeff;
    }
}

fn advance(
    psi: &mut CVector,
    phases: &[C64],
    gens: &Generators<'_>,
    dt: f64,
    noise: &mut WienerSource,
    s: &mut Scratch,
) -> Result<f64> {
    let d = psi.len();
    s.delta.clear();
    s.delta.resize(d, C64::new(0.0, 0.0));
    if let Some(g) = gens.oqt {
        add_oqt_increment(psi, g, dt, noise, s);
    }
    if let Some(g) = gens.suv {
        add_suv_increment(psi, g, dt, noise, s);
    }
    for i in 0..d {
        psi[i] = phases[i] * (psi[i] + s.delta[i]);
    }
    let n2 = psi.norm_squared();
    let residual = n2 - 1.0;
    let bound = 10.0 * dt.sqrt() * gens.total_rate() + 1e-12;
    if !(residual.abs() <= bound) {
        return Err(Error::StepSize(format!(
            "norm residual {residual:.3e} exceeds {bound:.3e}; reduce dt"
        )));
    }
    psi.unscale_mut(n2.sqrt());
    Ok(residual)
}

fn phase_factors(model: &SpectralModel, dt: f64) -> Vec<C64> {
    model
        .energies()
        .iter()
        .map(|&e| C64::from_polar(1.0, -e * dt))
        .collect()
}

/// One step of any combination of generators.
pub fn step(
    psi: &StateVector,
    gens: &Generators<'_>,
    model: &SpectralModel,
    dt: f64,
    noise: &mut WienerSource,
) -> Result<Stepped> {
    psi.check_model(model)?;
    gens.validate(psi.dim(), dt)?;
    if !psi.is_normalized() {
        return Err(Error::contract("trajectory step requires a normalized state"));
    }
    let mut amps = psi.amplitudes().clone();
    let mut scratch = Scratch::default();
    let residual = advance(&mut amps, &phase_factors(model, dt), gens, dt, noise, &mut scratch)?;
    Ok(Stepped {
        state: StateVector::from_raw(amps, psi.tag()),
        norm_residual: residual,
    })
}

/// Thermalization-only step.
pub fn oqt_step(
    psi: &StateVector,
    gen: &OQTGenerator,
    model: &SpectralModel,
    dt: f64,
    noise: &mut WienerSource,
) -> Result<Stepped> {
    step(psi, &Generators::thermal(gen), model, dt, noise)
}

/// Reduction-only step (with the Hamiltonian phases of `model`).
pub fn suv_step(
    psi: &StateVector,
    gen: &SUVGenerator,
    model: &SpectralModel,
    dt: f64,
    noise: &mut WienerSource,
) -> Result<Stepped> {
    step(psi, &Generators::reduction(gen), model, dt, noise)
}

/// Hybrid step: reduction and thermalization increments added within one step.
pub fn sui_step(
    psi: &StateVector,
    oqt: &OQTGenerator,
    suv: &SUVGenerator,
    model: &SpectralModel,
    dt: f64,
    noise: &mut WienerSource,
) -> Result<Stepped> {
    step(psi, &Generators::hybrid(oqt, suv), model, dt, noise)
}

/// Running statistics of the per-step norm residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ResidualStats {
    pub steps: u64,
    pub mean_abs: f64,
    pub mean_signed: f64,
    pub mean_sq: f64,
}

impl ResidualStats {
    fn push(&mut self, r: f64) {
        self.steps += 1;
        let n = self.steps as f64;
        self.mean_abs += (r.abs() - self.mean_abs) / n;
        self.mean_signed += (r - self.mean_signed) / n;
        self.mean_sq += (r * r - self.mean_sq) / n;
    }
}

/// Stateful integrator for one trajectory; reuses buffers across steps.
pub struct TrajectoryIntegrator<'a> {
    psi: CVector,
    tag: crate::quantum::BasisTag,
    gens: Generators<'a>,
    phases: Vec<C64>,
    dt: f64,
    steps: u64,
    noise: WienerSource,
    scratch: Scratch,
    residuals: ResidualStats,
    last_residual: f64,
}

impl<'a> TrajectoryIntegrator<'a> {
    pub fn new(
        psi0: &StateVector,
        gens: Generators<'a>,
        model: &SpectralModel,
        dt: f64,
        noise: WienerSource,
    ) -> Result<Self> {
        psi0.check_model(model)?;
        gens.validate(psi0.dim(), dt)?;
        if !psi0.is_normalized() {
            return Err(Error::contract("initial state must be normalized"));
        }
        Ok(TrajectoryIntegrator {
            psi: psi0.amplitudes().clone(),
            tag: psi0.tag(),
            gens,
            phases: phase_factors(model, dt),
            dt,
            steps: 0,
            noise,
            scratch: Scratch::default(),
            residuals: ResidualStats::default(),
            last_residual: 0.0,
        })
    }

    pub fn step(&mut self) -> Result<f64> {
        let r = advance(&mut self.psi, &self.phases, &self.gens, self.dt, &mut self.noise, &mut self.scratch)?;
        self.steps += 1;
        self.residuals.push(r);
        self.last_residual = r;
        Ok(r)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.psi
    }

    pub fn state(&self) -> StateVector {
        StateVector::from_raw(self.psi.clone(), self.tag)
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn residuals(&self) -> ResidualStats {
        self.residuals
    }

    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }
}

/// What to sample along a trajectory.
#[derive(Clone, Debug)]
pub struct Observers {
    /// Stride (in steps) of the core diagnostics.
    pub sample_stride: usize,
    /// Observables with their own sampling stride.
    pub observables: Vec<(Observable, usize)>,
    pub record_populations: bool,
}

impl Default for Observers {
    fn default() -> Self {
        Observers {
            sample_stride: 1,
            observables: Vec::new(),
            record_populations: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub label: String,
    pub stride: usize,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream_id: u64,
    pub dt: f64,
    pub sample_stride: usize,
    pub times: Vec<f64>,
    /// Residual of the step that produced each sample (0 at t = 0).
    pub norm_residual: Vec<f64>,
    pub energy_mean: Vec<f64>,
    pub energy_var: Vec<f64>,
    pub sector_weights: Vec<Vec<f64>>,
    pub populations: Option<Vec<Vec<f64>>>,
    pub observables: Vec<ObservableSeries>,
    pub residual_stats: ResidualStats,
}

/// Integrate `n_steps` and record the requested samples.
pub fn integrate_trajectory(
    psi0: &StateVector,
    gens: Generators<'_>,
    model: &SpectralModel,
    dt: f64,
    n_steps: usize,
    noise: WienerSource,
    observers: &Observers,
) -> Result<TrajectoryRecord> {
    if observers.sample_stride == 0 || observers.observables.iter().any(|(_, s)| *s == 0) {
        return Err(Error::config("sampling strides must be >= 1"));
    }
    for (o, _) in &observers.observables {
        check_dim("observer", psi0.dim(), o.dim())?;
    }
    let (seed, stream_id) = (noise.seed(), noise.stream_id());
    let mut integ = TrajectoryIntegrator::new(psi0, gens, model, dt, noise)?;
    let mut rec = TrajectoryRecord {
        seed,
        stream_id,
        dt,
        sample_stride: observers.sample_stride,
        times: Vec::new(),
        norm_residual: Vec::new(),
        energy_mean: Vec::new(),
        energy_var: Vec::new(),
        sector_weights: Vec::new(),
        populations: observers.record_populations.then(Vec::new),
        observables: observers
            .observables
            .iter()
            .map(|(o, s)| ObservableSeries {
                label: o.label().to_string(),
                stride: *s,
                times: Vec::new(),
                values: Vec::new(),
            })
            .collect(),
        residual_stats: ResidualStats::default(),
    };
    let sample = |integ: &TrajectoryIntegrator<'_>, k: usize, rec: &mut TrajectoryRecord| -> Result<()> {
        let t = k as f64 * dt;
        if k.is_multiple_of(observers.sample_stride) {
            let pops: Vec<f64> = integ.amplitudes().iter().map(|a| a.norm_sqr()).collect();
            let stats = moments(&pops, model.energies());
            rec.times.push(t);
            rec.norm_residual.push(if k == 0 { 0.0 } else { integ.last_residual() });
            rec.energy_mean.push(stats.mean);
            rec.energy_var.push(stats.variance);
            if let Some(g) = gens.suv {
                rec.sector_weights.push(g.sector_weights(integ.amplitudes()));
            }
            if let Some(p) = rec.populations.as_mut() {
                p.push(pops);
            }
        }
        for ((obs, stride), series) in observers.observables.iter().zip(rec.observables.iter_mut()) {
            if k.is_multiple_of(*stride) {
                series.times.push(t);
                series.values.push(expectation(&integ.state(), obs)?);
            }
        }
        Ok(())
    };
    sample(&integ, 0, &mut rec)?;
    for k in 1..=n_steps {
        integ.step()?;
        sample(&integ, k, &mut rec)?;
    }
    rec.residual_stats = integ.residuals();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::build_microcanonical;

    fn setup() -> (SpectralModel, StateVector, OQTGenerator) {
        let model = SpectralModel::new(vec![0.0, 0.7, 1.1, 1.9, 2.6, 3.0]).unwrap();
        let psi = StateVector::new(
            (0..6)
                .map(|k| C64::from_polar(1.0 / (1.0 + (k as f64 - 2.5).powi(2)), 0.9 * k as f64))
                .collect(),
        )
        .unwrap()
        .bound_to(&model)
        .unwrap();
        let target = build_microcanonical(&psi, &model).unwrap();
        let gen = OQTGenerator::new(1.3, &target).unwrap();
        (model, psi, gen)
    }

    #[test]
    fn generator_rates_sum_to_alpha() {
        let (_, _, gen) = setup();
        let sum: f64 = gen.drift_rates().iter().sum();
        assert!((sum - 1.3).abs() < 1e-12);
        for mu in 0..gen.dim() {
            if !gen.target().contains(mu) {
                assert_eq!(gen.drift_rates()[mu], 0.0);
            }
        }
        assert!(gen.satisfies_fdr());
    }

    #[test]
    fn unitary_limit_is_exact_phase() {
        let (model, psi, base) = setup();
        let gen = OQTGenerator::new(0.0, base.target()).unwrap();
        let dt = 1e-3;
        let out = oqt_step(&psi, &gen, &model, dt, &mut WienerSource::new(1, 0)).unwrap();
        for (i, (a, b)) in out.state.amplitudes().iter().zip(psi.amplitudes().iter()).enumerate() {
            let expected = C64::from_polar(1.0, -model.energies()[i] * dt) * b;
            assert!((a - expected).norm() < 1e-15);
        }
        assert!(out.norm_residual.abs() < 1e-14);
    }

    #[test]
    fn eigenstate_is_stable() {
        let model = SpectralModel::new(vec![0.0, 1.0, 2.5, 4.0]).unwrap();
        let psi = StateVector::basis(4, 2).unwrap().bound_to(&model).unwrap();
        let target = build_microcanonical(&psi, &model).unwrap();
        let gen = OQTGenerator::new(5.0, &target).unwrap();
        let mut noise = WienerSource::new(3, 9);
        let mut s = psi.clone();
        for _ in 0..500 {
            s = oqt_step(&s, &gen, &model, 1e-3, &mut noise).unwrap().state;
        }
        assert!((s.amplitudes()[2].norm() - 1.0).abs() < 1e-12);
        for i in [0, 1, 3] {
            assert!(s.amplitudes()[i].norm() < 1e-12);
        }
    }

    #[test]
    fn collapsed_state_is_suv_fixed_point() {
        let model = SpectralModel::ladder(4, 0.0).unwrap();
        let suv = SUVGenerator::contiguous(3.0, 4, 2).unwrap();
        let psi = StateVector::new(vec![
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.8),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ])
        .unwrap();
        let out = suv_step(&psi, &suv, &model, 1e-2, &mut WienerSource::new(5, 5)).unwrap();
        assert!((out.state.amplitudes() - psi.amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn guards_reject_large_steps() {
        let (model, psi, gen) = setup();
        let mut noise = WienerSource::new(1, 1);
        assert!(matches!(oqt_step(&psi, &gen, &model, 0.1, &mut noise), Err(Error::StepSize(_))));
        assert!(oqt_step(&psi, &gen, &model, 0.0, &mut noise).is_err());
        let suv = SUVGenerator::contiguous(50.0, 6, 3).unwrap();
        assert!(matches!(suv_step(&psi, &suv, &model, 0.01, &mut noise), Err(Error::StepSize(_))));
    }

    #[test]
    fn sector_partition_validation() {
        assert!(SUVGenerator::new(1.0, vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(SUVGenerator::new(1.0, vec![vec![0, 1]], 3).is_err());
        assert!(SUVGenerator::new(1.0, vec![vec![0], vec![], vec![1, 2]], 3).is_err());
        assert!(SUVGenerator::new(-1.0, vec![vec![0, 1, 2]], 3).is_err());
        let g = SUVGenerator::contiguous(1.0, 5, 2).unwrap();
        assert_eq!(g.sectors(), &[vec![0, 1], vec![2, 3, 4]]);
    }

    #[test]
    fn zero_step_record_has_initial_sample() {
        let (model, psi, gen) = setup();
        let rec = integrate_trajectory(
            &psi,
            Generators::thermal(&gen),
            &model,
            1e-3,
            0,
            WienerSource::new(1, 0),
            &Observers::default(),
        )
        .unwrap();
        assert_eq!(rec.times, vec![0.0]);
        assert_eq!(rec.norm_residual, vec![0.0]);
    }
}
