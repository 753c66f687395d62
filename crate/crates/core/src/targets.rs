//! Equilibrium targets the dynamics relaxes to.
//!
//! The microcanonical target is built from the initial state's energy
//! statistics: every eigenstate with energy in `[E_ψ − √V_ψ, E_ψ + √V_ψ]` gets
//! weight `1/Ω`. Degenerate levels at a window edge enter or leave together so
//! the target always commutes with the Hamiltonian. The canonical target
//! `e^{−βH}/Z` is provided for comparison.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::measures::{energy_stats, energy_stats_density, moments, EnergyStats};
use crate::quantum::{DensityMatrix, SpectralModel, StateVector};

/// Slack on closed-window comparisons.
pub const WINDOW_SLACK: f64 = 1e-12;

/// Diagonal equilibrium distribution, viewed as weights in the energy basis.
pub trait Target {
    fn weights(&self) -> &[f64];

    fn dim(&self) -> usize {
        self.weights().len()
    }

    /// `Tr[χ Ĥ]`.
    fn mean_energy(&self, model: &SpectralModel) -> f64 {
        self.weights()
            .iter()
            .zip(model.energies())
            .map(|(w, e)| w * e)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrocanonicalTarget {
    members: Vec<usize>,
    omega: usize,
    weights: Vec<f64>,
    window: (f64, f64),
    charge_window: Option<(f64, f64)>,
    /// `E_ψ` of the state the window was built from.
    source_energy: f64,
    /// `ε_E = Tr[χ Ĥ] − E_ψ`; the uniform window average need not equal `E_ψ`.
    energy_offset: f64,
}

impl MicrocanonicalTarget {
    /// Uniform distribution over an explicit member set.
    pub fn from_members(model: &SpectralModel, members: Vec<usize>) -> Result<Self> {
        let mut members = members;
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::config("microcanonical target needs at least one member"));
        }
        if let Some(&bad) = members.iter().find(|&&m| m >= model.dim()) {
            return Err(Error::config(format!("member {bad} out of range")));
        }
        let e = model.energies();
        let lo = members.iter().map(|&m| e[m]).fold(f64::INFINITY, f64::min);
        let hi = members.iter().map(|&m| e[m]).fold(f64::NEG_INFINITY, f64::max);
        let mean = members.iter().map(|&m| e[m]).sum::<f64>() / members.len() as f64;
        Ok(Self::assemble(model, members, (lo, hi), None, mean))
    }

    fn assemble(
        model: &SpectralModel,
        members: Vec<usize>,
        window: (f64, f64),
        charge_window: Option<(f64, f64)>,
        source_energy: f64,
    ) -> Self {
        let omega = members.len();
        let w = 1.0 / omega as f64;
        let mut weights = vec![0.0; model.dim()];
        for &m in &members {
            weights[m] = w;
        }
        let mean: f64 = members.iter().map(|&m| model.energies()[m]).sum::<f64>() / omega as f64;
        MicrocanonicalTarget {
            members,
            omega,
            weights,
            window,
            charge_window,
            source_energy,
            energy_offset: mean - source_energy,
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn omega(&self) -> usize {
        self.omega
    }

    pub fn contains(&self, mu: usize) -> bool {
        self.members.binary_search(&mu).is_ok()
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn charge_window(&self) -> Option<(f64, f64)> {
        self.charge_window
    }

    pub fn source_energy(&self) -> f64 {
        self.source_energy
    }

    pub fn energy_offset(&self) -> f64 {
        self.energy_offset
    }

    /// `H_χ = log Ω`.
    pub fn entropy(&self) -> f64 {
        (self.omega as f64).ln()
    }
}

impl Target for MicrocanonicalTarget {
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Microcanonical target from a pure initial state.
pub fn build_microcanonical(psi0: &StateVector, model: &SpectralModel) -> Result<MicrocanonicalTarget> {
    let stats = energy_stats(psi0, model)?;
    microcanonical_from_stats(stats, model)
}

/// Microcanonical target from the energy statistics of a mixed state.
pub fn build_microcanonical_from_density(
    rho: &DensityMatrix,
    model: &SpectralModel,
) -> Result<MicrocanonicalTarget> {
    let stats = energy_stats_density(rho, model)?;
    microcanonical_from_stats(stats, model)
}

fn microcanonical_from_stats(stats: EnergyStats, model: &SpectralModel) -> Result<MicrocanonicalTarget> {
    let delta = stats.variance.sqrt();
    let window = (stats.mean - delta, stats.mean + delta);
    let members = window_members(model, window);
    if members.is_empty() {
        // The window always contains at least one populated level; an empty set
        // only arises from numerical pathology.
        return Err(Error::Internal(format!(
            "empty microcanonical window [{}, {}]",
            window.0, window.1
        )));
    }
    Ok(MicrocanonicalTarget::assemble(model, members, window, None, stats.mean))
}

/// Indices whose degenerate cluster lies in the closed window.
///
/// Levels are grouped into clusters of consecutive values within the model's
/// degeneracy tolerance; a cluster is a member iff its mean lies in the window.
fn window_members(model: &SpectralModel, (lo, hi): (f64, f64)) -> Vec<usize> {
    let e = model.energies();
    let tol = model.degeneracy_tolerance();
    let mut members = Vec::new();
    let mut start = 0;
    while start < e.len() {
        let mut end = start + 1;
        while end < e.len() && e[end] - e[end - 1] <= tol {
            end += 1;
        }
        let centre = e[start..end].iter().sum::<f64>() / (end - start) as f64;
        if centre >= lo - WINDOW_SLACK && centre <= hi + WINDOW_SLACK {
            members.extend(start..end);
        }
        start = end;
    }
    members
}

/// Restrict a target to the conserved-charge sector of `psi0`.
pub fn apply_charge_filter(
    target: &MicrocanonicalTarget,
    psi0: &StateVector,
    model: &SpectralModel,
) -> Result<MicrocanonicalTarget> {
    let charge = model
        .charge()
        .ok_or_else(|| Error::contract("apply_charge_filter needs a model with a charge"))?;
    check_dim("charge filter", model.dim(), target.dim())?;
    psi0.check_model(model)?;
    let stats = moments(&psi0.populations(), charge);
    let ds = stats.variance.sqrt();
    let cw = (stats.mean - ds, stats.mean + ds);
    let members: Vec<usize> = target
        .members
        .iter()
        .copied()
        .filter(|&m| charge[m] >= cw.0 - WINDOW_SLACK && charge[m] <= cw.1 + WINDOW_SLACK)
        .collect();
    if members.is_empty() {
        return Err(Error::config(format!(
            "charge filter removed every member: energy window [{}, {}], charge window [{}, {}]",
            target.window.0, target.window.1, cw.0, cw.1
        )));
    }
    Ok(MicrocanonicalTarget::assemble(
        model,
        members,
        target.window,
        Some(cw),
        target.source_energy,
    ))
}

/// `χ_β = e^{−βH}/Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalTarget {
    beta: f64,
    weights: Vec<f64>,
    /// `Z` with energies measured from the reference level `E_ref`.
    partition: f64,
    reference_energy: f64,
}

impl CanonicalTarget {
    pub fn at_beta(beta: f64, model: &SpectralModel) -> Self {
        let e = model.energies();
        // Shift by the level that dominates so the exponentials stay bounded.
        let reference = if beta >= 0.0 { model.e_min() } else { model.e_max() };
        let raw: Vec<f64> = e.iter().map(|&x| (-beta * (x - reference)).exp()).collect();
        let z: f64 = raw.iter().sum();
        CanonicalTarget {
            beta,
            weights: raw.iter().map(|w| w / z).collect(),
            partition: z,
            reference_energy: reference,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Partition function relative to `reference_energy`, i.e. `Z·e^{β E_ref}`.
    pub fn partition(&self) -> f64 {
        self.partition
    }

    pub fn reference_energy(&self) -> f64 {
        self.reference_energy
    }

    /// `ln Z` with absolute energies.
    pub fn log_partition(&self) -> f64 {
        self.partition.ln() - self.beta * self.reference_energy
    }
}

impl Target for CanonicalTarget {
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Solve `Tr[χ_β H] = target_energy` for `β` by bisection.
pub fn build_canonical(target_energy: f64, model: &SpectralModel) -> Result<CanonicalTarget> {
    let (lo, hi) = (model.e_min(), model.e_max());
    let d = model.dim() as f64;
    let mean = model.energies().iter().sum::<f64>() / d;
    let scale = (hi - lo).max(target_energy.abs()).max(f64::MIN_POSITIVE);
    if (target_energy - mean).abs() <= 1e-15 * scale {
        return Ok(CanonicalTarget::at_beta(0.0, model));
    }
    if !(target_energy > lo && target_energy < hi) {
        return Err(Error::Domain(format!(
            "target energy {target_energy} outside the open spectral range ({lo}, {hi})"
        )));
    }
    let beta_max = 1e4 / (hi - lo);
    let energy_at = |b: f64| CanonicalTarget::at_beta(b, model).mean_energy(model);
    // Mean energy decreases monotonically in β.
    let (mut b_lo, mut b_hi) = (-beta_max, beta_max);
    let tol = 1e-10 * scale;
    let mut beta = 0.0;
    for _ in 0..400 {
        beta = 0.5 * (b_lo + b_hi);
        let e = energy_at(beta);
        if (e - target_energy).abs() <= tol {
            break;
        }
        if e > target_energy {
            b_lo = beta;
        } else {
            b_hi = beta;
        }
        if b_hi - b_lo <= f64::EPSILON * beta.abs().max(1.0) {
            break;
        }
    }
    Ok(CanonicalTarget::at_beta(beta, model))
}

/// Diagonal density matrix carrying the target's weights.
pub fn as_density<T: Target + ?Sized>(target: &T) -> DensityMatrix {
    DensityMatrix::diagonal(target.weights()).expect("target weights form a distribution")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder() -> SpectralModel {
        SpectralModel::new(vec![0.0, 2.0, 10.0, 11.0, 12.0]).unwrap()
    }

    #[test]
    fn eigenstate_gives_singleton() {
        let m = ladder();
        let t = build_microcanonical(&StateVector::basis(5, 3).unwrap(), &m).unwrap();
        assert_eq!(t.members(), &[3]);
        assert_eq!(t.omega(), 1);
        assert_eq!(t.weights()[3], 1.0);
    }

    #[test]
    fn two_level_window() {
        let m = ladder();
        let psi = StateVector::from_real(&[1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let t = build_microcanonical(&psi, &m).unwrap();
        let (lo, hi) = t.window();
        assert!(lo.abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
        assert_eq!(t.members(), &[0, 1]);
        assert_eq!(t.omega(), 2);
        assert!((t.energy_offset()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_edge_cluster_moves_together() {
        // Levels 1 and 2 are degenerate at the window edge.
        let m = SpectralModel::new(vec![0.0, 2.0, 2.0 + 1e-13, 5.0])
            .unwrap()
            .with_degeneracy_tolerance(1e-11)
            .unwrap();
        let psi = StateVector::from_real(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        let t = build_microcanonical(&psi, &m).unwrap();
        assert_eq!(t.members(), &[0, 1, 2]);
    }

    #[test]
    fn canonical_at_mean_is_infinite_temperature() {
        let m = SpectralModel::new(vec![-1.0, 1.0]).unwrap();
        let c = build_canonical(0.0, &m).unwrap();
        assert_eq!(c.beta(), 0.0);
        assert_eq!(c.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn canonical_outside_range_is_domain_error() {
        let m = SpectralModel::new(vec![0.0, 1.0, 3.0]).unwrap();
        assert!(matches!(build_canonical(3.0, &m), Err(Error::Domain(_))));
        assert!(matches!(build_canonical(-0.1, &m), Err(Error::Domain(_))));
    }

    #[test]
    fn canonical_concentrates_near_ground_state() {
        let m = SpectralModel::new(vec![0.0, 1.0, 3.0]).unwrap();
        let mut last_beta = f64::NEG_INFINITY;
        let mut last_ground = 0.0;
        for target in [1.0, 0.5, 0.1, 0.01, 1e-4] {
            let c = build_canonical(target, &m).unwrap();
            assert!(c.beta() > last_beta);
            assert!(c.weights()[0] > last_ground);
            last_beta = c.beta();
            last_ground = c.weights()[0];
        }
        assert!(last_ground > 0.999);
    }

    #[test]
    fn as_density_extremes() {
        let m = ladder();
        let single = MicrocanonicalTarget::from_members(&m, vec![2]).unwrap();
        let p = as_density(&single);
        assert_eq!(p.purity(), 1.0);
        let all = MicrocanonicalTarget::from_members(&m, (0..5).collect()).unwrap();
        let mixed = as_density(&all);
        assert!((mixed.matrix() - crate::quantum::CMatrix::identity(5, 5).unscale(5.0)).norm() < 1e-15);
    }

    #[test]
    fn charge_filter_requires_charge() {
        let m = ladder();
        let psi = StateVector::basis(5, 0).unwrap();
        let t = build_microcanonical(&psi, &m).unwrap();
        assert!(apply_charge_filter(&t, &psi, &m).is_err());
    }

    #[test]
    fn constant_charge_leaves_target_unchanged() {
        let m = ladder().with_charge(vec![1.0; 5]).unwrap();
        let psi = StateVector::from_real(&[0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let t = build_microcanonical(&psi, &m).unwrap();
        let f = apply_charge_filter(&t, &psi, &m).unwrap();
        assert_eq!(f.members(), t.members());
        assert_eq!(f.weights(), t.weights());
    }

    #[test]
    fn joint_eigenstate_filters_to_singleton() {
        // Energies 10, 10 are degenerate; the charge separates them.
        let m = SpectralModel::new(vec![0.0, 10.0, 10.0, 12.0])
            .unwrap()
            .with_charge(vec![0.0, -1.0, 1.0, 0.0])
            .unwrap();
        let psi = StateVector::basis(4, 2).unwrap();
        let t = build_microcanonical(&psi, &m).unwrap();
        assert_eq!(t.members(), &[1, 2]);
        let f = apply_charge_filter(&t, &psi, &m).unwrap();
        assert_eq!(f.members(), &[2]);
        assert_eq!(f.weights()[2], 1.0);
    }

    #[test]
    fn json_round_trip() {
        let m = ladder();
        let psi = StateVector::from_real(&[0.0, 1.0, 2.0, 1.0, 0.0]).unwrap();
        let t = build_microcanonical(&psi, &m).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: MicrocanonicalTarget = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
