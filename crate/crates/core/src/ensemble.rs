//! Deterministic ensemble dynamics: the GKSL master equation
//!
//! ```text
//! ∂ρ/∂t = −i[H, ρ] + J̃ Λ_R(ρ) + α̃ Λ_χ(ρ)
//! Λ_χ(ρ) = χ Tr[ρ] − ρ            (thermalization)
//! Λ_R(ρ) = Σ_k P_k ρ P_k − ρ       (reduction)
//! ```
//!
//! in the energy eigenbasis, integrated with classical RK4. The closed-form
//! thermalization propagator is the reference every numerical path is checked
//! against.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::measures::{
    distance_sq, entropy_of_spectrum, expectation, partial_trace_matrix, relative_entropy, Keep,
};
use crate::quantum::{
    hermitian_eigenvalues, hermitize, CMatrix, DensityMatrix, Observable, SpectralModel, C64,
};
use crate::targets::{MicrocanonicalTarget, Target};
use crate::trajectory::{OQTGenerator, SUVGenerator};

/// Largest permitted `(α̃ + J̃)·dt` for RK4 propagation.
pub const PROPAGATION_GUARD: f64 = 0.05;
/// Smallest eigenvalue below which a sampled state signals a step-size problem.
pub const POSITIVITY_FLOOR: f64 = -1e-7;

/// How the thermalization target acts on the state space.
#[derive(Clone, Debug, PartialEq)]
pub enum ThermalAction {
    /// `Λ_χ(ρ) = χ Tr[ρ] − ρ` on the full space.
    Global,
    /// Operators `L^A_{μν} ⊗ I_B` on `H_A ⊗ H_B`:
    /// `Λ(ρ) = χ_A ⊗ Tr_A[ρ] − ρ`.
    LocalOnA { dims: (usize, usize) },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalTerm {
    pub alpha_eff: f64,
    /// Target weights on the space the operators act on (`H_A` for `LocalOnA`).
    pub weights: Vec<f64>,
    pub action: ThermalAction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionTerm {
    pub j_eff: f64,
    pub sector_of: Vec<usize>,
    pub sector_count: usize,
}

/// Master-equation model: diagonal Hamiltonian plus optional generators.
#[derive(Clone, Debug, PartialEq)]
pub struct GKSLModel {
    energies: Vec<f64>,
    thermal: Option<ThermalTerm>,
    reduction: Option<ReductionTerm>,
}

impl GKSLModel {
    /// At least one generator is required; use [`GKSLModel::unitary`] for pure
    /// Hamiltonian evolution.
    pub fn new(model: &SpectralModel, oqt: Option<&OQTGenerator>, suv: Option<&SUVGenerator>) -> Result<Self> {
        if oqt.is_none() && suv.is_none() {
            return Err(Error::config(
                "GKSL model needs a generator; use GKSLModel::unitary for pure evolution",
            ));
        }
        let d = model.dim();
        let thermal = oqt
            .map(|g| {
                check_dim("thermal generator", d, g.dim())?;
                Ok::<_, Error>(ThermalTerm {
                    alpha_eff: g.alpha_eff(),
                    weights: g.target().weights().to_vec(),
                    action: ThermalAction::Global,
                })
            })
            .transpose()?;
        let reduction = suv
            .map(|g| {
                check_dim("reduction generator", d, g.dim())?;
                Ok::<_, Error>(ReductionTerm {
                    j_eff: g.j_eff(),
                    sector_of: (0..d).map(|i| g.sector_of(i)).collect(),
                    sector_count: g.sector_count(),
                })
            })
            .transpose()?;
        Ok(GKSLModel {
            energies: model.energies().to_vec(),
            thermal,
            reduction,
        })
    }

    pub fn unitary(model: &SpectralModel) -> Self {
        GKSLModel {
            energies: model.energies().to_vec(),
            thermal: None,
            reduction: None,
        }
    }

    pub fn thermal(model: &SpectralModel, alpha_eff: f64, target: &MicrocanonicalTarget) -> Result<Self> {
        Self::new(model, Some(&OQTGenerator::new(alpha_eff, target)?), None)
    }

    /// Two non-interacting subsystems, `H = H_A ⊗ I + I ⊗ H_B`, with the
    /// thermalization operators supported on A only.
    pub fn local_thermal(
        model_a: &SpectralModel,
        model_b: &SpectralModel,
        alpha_eff: f64,
        target_a: &MicrocanonicalTarget,
    ) -> Result<Self> {
        check_dim("local target", model_a.dim(), target_a.dim())?;
        if !(alpha_eff >= 0.0 && alpha_eff.is_finite()) {
            return Err(Error::config("alpha_eff must be >= 0"));
        }
        let (da, db) = (model_a.dim(), model_b.dim());
        let energies = (0..da * db)
            .map(|k| model_a.energies()[k / db] + model_b.energies()[k % db])
            .collect();
        Ok(GKSLModel {
            energies,
            thermal: Some(ThermalTerm {
                alpha_eff,
                weights: target_a.weights().to_vec(),
                action: ThermalAction::LocalOnA { dims: (da, db) },
            }),
            reduction: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn thermal_term(&self) -> Option<&ThermalTerm> {
        self.thermal.as_ref()
    }

    pub fn reduction_term(&self) -> Option<&ReductionTerm> {
        self.reduction.as_ref()
    }

    pub fn alpha_eff(&self) -> f64 {
        self.thermal.as_ref().map_or(0.0, |t| t.alpha_eff)
    }

    pub fn j_eff(&self) -> f64 {
        self.reduction.as_ref().map_or(0.0, |r| r.j_eff)
    }

    /// Full-space target weights, when the thermal action is global.
    pub fn global_target(&self) -> Option<&[f64]> {
        match &self.thermal {
            Some(ThermalTerm {
                weights,
                action: ThermalAction::Global,
                ..
            }) => Some(weights),
            _ => None,
        }
    }
}

/// `∂ρ/∂t` for a (not necessarily normalized) matrix `ρ`.
pub fn gksl_rhs(rho: &CMatrix, m: &GKSLModel) -> CMatrix {
    let d = m.dim();
    let e = &m.energies;
    let mut out = CMatrix::from_fn(d, d, |i, j| C64::new(0.0, -(e[i] - e[j])) * rho[(i, j)]);
    if let Some(r) = &m.reduction {
        for i in 0..d {
            for j in 0..d {
                if r.sector_of[i] != r.sector_of[j] {
                    out[(i, j)] -= rho[(i, j)] * r.j_eff;
                }
            }
        }
    }
    if let Some(t) = &m.thermal {
        let a = t.alpha_eff;
        out -= rho * C64::new(a, 0.0);
        match t.action {
            ThermalAction::Global => {
                let tr = rho.trace();
                for (i, w) in t.weights.iter().enumerate() {
                    out[(i, i)] += tr * (a * w);
                }
            }
            ThermalAction::LocalOnA { dims: (da, db) } => {
                let reduced = partial_trace_matrix(rho, (da, db), Keep::B).expect("dims checked at construction");
                for (mu, w) in t.weights.iter().enumerate() {
                    if *w == 0.0 {
                        continue;
                    }
                    let mut block = out.view_mut((mu * db, mu * db), (db, db));
                    block += &reduced * C64::new(a * w, 0.0);
                }
            }
        }
    }
    out
}

/// What [`propagate`] samples.
#[derive(Clone, Debug)]
pub struct PropagateOptions {
    pub sample_stride: usize,
    pub keep_states: bool,
    pub observables: Vec<Observable>,
    /// Also record `D[χ‖ρ]` (needs a global thermal target).
    pub relative_entropy: bool,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions {
            sample_stride: 1,
            keep_states: false,
            observables: Vec::new(),
            relative_entropy: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleRecord {
    pub dt: f64,
    pub alpha_eff: f64,
    pub j_eff: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<DensityMatrix>,
    pub entropy: Vec<f64>,
    /// `Tr[(ρ − χ)²]` when a global thermal target exists.
    pub trace_distance: Option<Vec<f64>>,
    pub relative_entropy: Option<Vec<f64>>,
    pub energy: Vec<f64>,
    pub diagonals: Vec<Vec<f64>>,
    pub min_eigenvalue: Vec<f64>,
    pub observables: Vec<(String, Vec<f64>)>,
}

impl EnsembleRecord {
    pub fn observable(&self, label: &str) -> Option<&[f64]> {
        self.observables
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
    }
}

fn rk4_step(rho: &CMatrix, m: &GKSLModel, dt: f64) -> CMatrix {
    let h = C64::new(dt, 0.0);
    let half = C64::new(0.5 * dt, 0.0);
    let k1 = gksl_rhs(rho, m);
    let k2 = gksl_rhs(&(rho + &k1 * half), m);
    let k3 = gksl_rhs(&(rho + &k2 * half), m);
    let k4 = gksl_rhs(&(rho + &k3 * h), m);
    rho + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * (h / 6.0)
}

/// RK4 propagation of the master equation, re-Hermitized every step.
pub fn propagate(
    rho0: &DensityMatrix,
    m: &GKSLModel,
    dt: f64,
    n_steps: usize,
    opts: &PropagateOptions,
) -> Result<EnsembleRecord> {
    check_dim("propagate", m.dim(), rho0.dim())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::contract(format!("dt must be > 0, got {dt}")));
    }
    let rate = m.alpha_eff() + m.j_eff();
    if rate * dt > PROPAGATION_GUARD {
        return Err(Error::StepSize(format!(
            "(alpha_eff + j_eff)·dt = {} exceeds {PROPAGATION_GUARD}",
            rate * dt
        )));
    }
    if opts.sample_stride == 0 {
        return Err(Error::config("sample_stride must be >= 1"));
    }
    for o in &opts.observables {
        check_dim("observable", m.dim(), o.dim())?;
    }
    let chi = m.global_target().map(DensityMatrix::diagonal).transpose()?;
    if opts.relative_entropy && chi.is_none() {
        return Err(Error::config("relative entropy tracking needs a global thermal target"));
    }

    let mut rec = EnsembleRecord {
        dt,
        alpha_eff: m.alpha_eff(),
        j_eff: m.j_eff(),
        times: Vec::new(),
        states: Vec::new(),
        entropy: Vec::new(),
        trace_distance: chi.as_ref().map(|_| Vec::new()),
        relative_entropy: opts.relative_entropy.then(Vec::new),
        energy: Vec::new(),
        diagonals: Vec::new(),
        min_eigenvalue: Vec::new(),
        observables: opts.observables.iter().map(|o| (o.label().to_string(), Vec::new())).collect(),
    };

    let sample = |rho: &CMatrix, k: usize, rec: &mut EnsembleRecord| -> Result<()> {
        let spectrum = hermitian_eigenvalues(rho);
        let min = spectrum[0];
        let t = k as f64 * dt;
        if min < POSITIVITY_FLOOR {
            return Err(Error::StepSize(format!(
                "smallest eigenvalue {min:.3e} at t = {t}; reduce dt"
            )));
        }
        rec.times.push(t);
        rec.entropy.push(entropy_of_spectrum(&spectrum));
        rec.min_eigenvalue.push(min);
        let state = DensityMatrix::from_integrator(rho.clone(), spectrum, rho0.tag());
        let diag = state.diagonal_weights();
        rec.energy.push(diag.iter().zip(&m.energies).map(|(p, e)| p * e).sum());
        rec.diagonals.push(diag);
        if let (Some(chi), Some(td)) = (&chi, rec.trace_distance.as_mut()) {
            td.push(distance_sq(rho, chi.matrix()));
        }
        if let (Some(chi), Some(re)) = (&chi, rec.relative_entropy.as_mut()) {
            re.push(relative_entropy(chi, &state)?);
        }
        for (o, (_, series)) in opts.observables.iter().zip(rec.observables.iter_mut()) {
            series.push(expectation(&state, o)?);
        }
        if opts.keep_states {
            rec.states.push(state);
        }
        Ok(())
    };

    let mut rho = rho0.matrix().clone();
    sample(&rho, 0, &mut rec)?;
    for k in 1..=n_steps {
        rho = hermitize(&rk4_step(&rho, m, dt));
        let tr = rho.trace().re;
        if (tr - 1.0).abs() > 1e-12 {
            rho.unscale_mut(tr);
        }
        if k % opts.sample_stride == 0 || k == n_steps {
            sample(&rho, k, &mut rec)?;
        }
    }
    Ok(rec)
}

/// Closed-form thermalization propagator (valid because `[H, χ] = 0`):
/// `ρ(t) = e^{−α̃t} U(t)ρ₀U†(t) + (1 − e^{−α̃t}) χ`.
pub fn analytic_oqt_solution(
    rho0: &DensityMatrix,
    target: &dyn Target,
    model: &SpectralModel,
    alpha_eff: f64,
    t: f64,
) -> Result<DensityMatrix> {
    check_dim("analytic solution", model.dim(), rho0.dim())?;
    check_dim("analytic solution target", model.dim(), target.dim())?;
    let e = model.energies();
    let decay = (-alpha_eff * t).exp();
    let r = rho0.matrix();
    let w = target.weights();
    let m = CMatrix::from_fn(model.dim(), model.dim(), |i, j| {
        let coherent = C64::from_polar(decay, -(e[i] - e[j]) * t) * r[(i, j)];
        if i == j {
            coherent + C64::new((1.0 - decay) * w[i], 0.0)
        } else {
            coherent
        }
    });
    DensityMatrix::with_tag(m, rho0.tag())
}

/// Dense `d²×d²` superoperator acting on column-stacked `vec(ρ)`.
pub fn superoperator(m: &GKSLModel) -> CMatrix {
    let d = m.dim();
    let n = d * d;
    let mut sup = CMatrix::zeros(n, n);
    let mut basis = CMatrix::zeros(d, d);
    for col in 0..n {
        let (i, j) = (col % d, col / d);
        basis[(i, j)] = C64::new(1.0, 0.0);
        let image = gksl_rhs(&basis, m);
        basis[(i, j)] = C64::new(0.0, 0.0);
        for (row, z) in image.iter().enumerate() {
            sup[(row, col)] = *z;
        }
    }
    sup
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadyStateReport {
    #[serde(serialize_with = "crate::io::serialize_density")]
    pub state: DensityMatrix,
    /// `‖L(ρ_∞)‖_F`.
    pub residual: f64,
    pub smallest_singular_values: Vec<f64>,
    /// Number of singular values below the null-space tolerance.
    pub null_dimension: usize,
    pub degenerate: bool,
    /// Every null-space basis vector (as matrices) when degenerate.
    #[serde(skip)]
    pub null_basis: Vec<CMatrix>,
}

/// Relative singular-value threshold for null-space membership.
pub const NULL_SPACE_TOLERANCE: f64 = 1e-10;

/// Steady state `L(ρ_∞) = 0`, `Tr ρ_∞ = 1`, from the superoperator null space.
pub fn hybrid_steady_state(m: &GKSLModel) -> Result<SteadyStateReport> {
    if m.alpha_eff() <= 0.0 {
        return Err(Error::contract("hybrid steady state requires alpha_eff > 0"));
    }
    let d = m.dim();
    let sup = superoperator(m);
    let svd = sup.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Internal("SVD without V".into()))?;
    let sv = &svd.singular_values;
    let scale = sv.max().max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let null_idx: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&k| sv[k] <= NULL_SPACE_TOLERANCE * scale)
        .collect();
    let to_matrix = |k: usize| -> CMatrix {
        // Row k of V† is the conjugate of the right singular vector.
        let row = v_t.row(k);
        CMatrix::from_fn(d, d, |i, j| row[j * d + i].conj())
    };
    let pick = order[0];
    let raw = to_matrix(pick);
    let tr = raw.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::Internal("null vector has zero trace".into()));
    }
    let rho = hermitize(&(raw / tr));
    let state = DensityMatrix::new(rho)?;
    let residual = gksl_rhs(state.matrix(), m).norm();
    let null_dimension = null_idx.len();
    Ok(SteadyStateReport {
        residual,
        smallest_singular_values: order.iter().take(4).map(|&k| sv[k]).collect(),
        null_dimension,
        degenerate: null_dimension > 1,
        null_basis: if null_dimension > 1 {
            null_idx.into_iter().map(to_matrix).collect()
        } else {
            Vec::new()
        },
        state,
    })
}

/// `Tr[P_k ρ P_k]` for every sector of a reduction term.
pub fn sector_populations(rho: &DensityMatrix, r: &ReductionTerm) -> Vec<f64> {
    let mut out = vec![0.0; r.sector_count];
    for (i, p) in rho.diagonal_weights().iter().enumerate() {
        out[r.sector_of[i]] += p;
    }
    out
}

/// Target density for a model with a global thermal term.
pub fn target_density(m: &GKSLModel) -> Option<DensityMatrix> {
    m.global_target().and_then(|w| DensityMatrix::diagonal(w).ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::StateVector;
    use crate::targets::{as_density, build_microcanonical};

    fn small() -> (SpectralModel, StateVector, MicrocanonicalTarget) {
        let model = SpectralModel::new(vec![0.0, 0.5, 1.3, 2.0, 2.2]).unwrap();
        let psi = StateVector::new(
            (0..5).map(|k| C64::from_polar(1.0 + k as f64 * 0.3, 0.7 * k as f64)).collect(),
        )
        .unwrap();
        let target = build_microcanonical(&psi, &model).unwrap();
        (model, psi, target)
    }

    #[test]
    fn target_is_fixed_point() {
        let (model, _, target) = small();
        let m = GKSLModel::thermal(&model, 2.0, &target).unwrap();
        let chi = as_density(&target);
        assert!(gksl_rhs(chi.matrix(), &m).norm() < 1e-15);
    }

    #[test]
    fn joint_fixed_point_with_reduction() {
        let (model, _, target) = small();
        let oqt = OQTGenerator::new(1.0, &target).unwrap();
        let suv = SUVGenerator::contiguous(3.0, 5, 2).unwrap();
        let m = GKSLModel::new(&model, Some(&oqt), Some(&suv)).unwrap();
        assert!(gksl_rhs(as_density(&target).matrix(), &m).norm() < 1e-15);
    }

    #[test]
    fn model_without_generators_is_rejected() {
        let (model, _, _) = small();
        assert!(GKSLModel::new(&model, None, None).is_err());
    }

    #[test]
    fn analytic_limits() {
        let (model, psi, target) = small();
        let rho0 = psi.projector();
        let at0 = analytic_oqt_solution(&rho0, &target, &model, 1.5, 0.0).unwrap();
        assert_eq!(at0.matrix(), rho0.matrix());
        let late = analytic_oqt_solution(&rho0, &target, &model, 1.5, 40.0 / 1.5).unwrap();
        assert!((late.matrix() - as_density(&target).matrix()).camax() < 1e-15);
    }

    #[test]
    fn propagate_guard_and_stride() {
        let (model, psi, target) = small();
        let m = GKSLModel::thermal(&model, 1.0, &target).unwrap();
        let rho0 = psi.projector();
        assert!(matches!(
            propagate(&rho0, &m, 0.06, 1, &PropagateOptions::default()),
            Err(Error::StepSize(_))
        ));
        let opts = PropagateOptions {
            sample_stride: 3,
            ..Default::default()
        };
        let rec = propagate(&rho0, &m, 1e-3, 10, &opts).unwrap();
        // Samples at 0, 3, 6, 9 and the final step.
        assert_eq!(rec.times.len(), 5);
        assert!((rec.times[4] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn steady_state_without_reduction_is_target() {
        let (model, _, target) = small();
        let m = GKSLModel::thermal(&model, 0.8, &target).unwrap();
        let rep = hybrid_steady_state(&m).unwrap();
        assert!(rep.residual < 1e-10);
        assert!(!rep.degenerate);
        assert!((rep.state.matrix() - as_density(&target).matrix()).camax() < 1e-10);
    }

    #[test]
    fn steady_state_requires_thermalization() {
        let (model, _, _) = small();
        let suv = SUVGenerator::contiguous(1.0, 5, 2).unwrap();
        let m = GKSLModel::new(&model, None, Some(&suv)).unwrap();
        assert!(hybrid_steady_state(&m).is_err());
    }
}
