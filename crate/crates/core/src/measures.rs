//! Measurement-free functionals: expectations, entropies, distances, partial trace.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::quantum::{hermitian_eigen, CMatrix, DensityMatrix, Observable, SpectralModel, StateVector, C64};

/// Eigenvalues below this are treated as exactly zero in `−λ log λ`.
pub const ENTROPY_EIGEN_FLOOR: f64 = 1e-14;
/// Eigenvalue threshold defining the support of a density matrix.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
const IMAGINARY_RESIDUE: f64 = 1e-9;

/// Anything an observable can be evaluated on.
pub trait Expectation {
    fn expectation(&self, obs: &Observable) -> Result<f64>;
}

impl Expectation for StateVector {
    fn expectation(&self, obs: &Observable) -> Result<f64> {
        check_dim("expectation", obs.dim(), self.dim())?;
        let psi = self.amplitudes();
        let z = psi.dotc(&(obs.matrix() * psi));
        real_part(z)
    }
}

impl Expectation for DensityMatrix {
    fn expectation(&self, obs: &Observable) -> Result<f64> {
        check_dim("expectation", obs.dim(), self.dim())?;
        real_part(trace_of_product(self.matrix(), obs.matrix()))
    }
}

/// `⟨ψ|Ô|ψ⟩` or `Tr[ρÔ]`.
pub fn expectation<S: Expectation + ?Sized>(state: &S, obs: &Observable) -> Result<f64> {
    state.expectation(obs)
}

fn real_part(z: C64) -> Result<f64> {
    if z.im.abs() > IMAGINARY_RESIDUE * z.re.abs().max(1.0) {
        return Err(Error::contract(format!(
            "expectation has imaginary residue {:.3e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// `Tr[A B]` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let d = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Energy mean and variance of a normalized state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyStats {
    pub mean: f64,
    pub variance: f64,
}

pub fn energy_stats(state: &StateVector, model: &SpectralModel) -> Result<EnergyStats> {
    state.check_model(model)?;
    if !state.is_normalized() {
        return Err(Error::contract("energy_stats requires a normalized state"));
    }
    Ok(moments(&state.populations(), model.energies()))
}

/// Energy mean and variance of an ensemble state (uses the diagonal only).
pub fn energy_stats_density(rho: &DensityMatrix, model: &SpectralModel) -> Result<EnergyStats> {
    check_dim("energy_stats", model.dim(), rho.dim())?;
    Ok(moments(&rho.diagonal_weights(), model.energies()))
}

/// Mean and variance of `values` under the distribution `weights`.
pub(crate) fn moments(weights: &[f64], values: &[f64]) -> EnergyStats {
    let mean: f64 = weights.iter().zip(values).map(|(p, e)| p * e).sum();
    let second: f64 = weights.iter().zip(values).map(|(p, e)| p * e * e).sum();
    let mut variance = second - mean * mean;
    if (-1e-12..0.0).contains(&variance) {
        variance = 0.0;
    }
    EnergyStats { mean, variance }
}

/// `S = −Tr[ρ log ρ]` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    if rho.min_eigenvalue() < -crate::quantum::PSD_TOLERANCE {
        return Err(Error::contract("entropy of a non-PSD matrix"));
    }
    Ok(entropy_of_spectrum(rho.eigenvalues()))
}

pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    -eigenvalues
        .iter()
        .filter(|&&l| l > ENTROPY_EIGEN_FLOOR)
        .map(|&l| l * l.ln())
        .sum::<f64>()
}

/// Umegaki relative entropy `D[χ‖ρ]`; `+∞` when `supp χ ⊄ supp ρ`.
pub fn relative_entropy(chi: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    check_dim("relative_entropy", chi.dim(), rho.dim())?;
    let chi_log_chi = -entropy_of_spectrum(chi.eigenvalues());
    let (vals, vecs) = hermitian_eigen(rho.matrix());
    let c = chi.matrix();
    let mut cross = 0.0;
    let mut outside = 0.0;
    for (k, &lambda) in vals.iter().enumerate() {
        let v = vecs.column(k);
        let weight = v.dotc(&(c * v)).re;
        if lambda > SUPPORT_THRESHOLD {
            cross += weight * lambda.ln();
        } else {
            outside += weight;
        }
    }
    if outside > SUPPORT_THRESHOLD {
        return Ok(f64::INFINITY);
    }
    let d = chi_log_chi - cross;
    if d < -1e-9 {
        return Err(Error::Internal(format!("relative entropy {d:.3e} < 0")));
    }
    Ok(d.max(0.0))
}

/// Squared Hilbert–Schmidt distance `Tr[(ρ − χ)²] = Σ|ρ_ij − χ_ij|²`.
pub fn trace_distance_sq(rho: &DensityMatrix, chi: &DensityMatrix) -> Result<f64> {
    check_dim("trace_distance_sq", rho.dim(), chi.dim())?;
    Ok(distance_sq(rho.matrix(), chi.matrix()))
}

pub(crate) fn distance_sq(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Which factor of `H_A ⊗ H_B` to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Keep {
    A,
    B,
}

/// Reduced state of one factor; joint index `k = a·d_B + b`.
pub fn partial_trace(rho: &DensityMatrix, dims: (usize, usize), keep: Keep) -> Result<DensityMatrix> {
    let m = partial_trace_matrix(rho.matrix(), dims, keep)?;
    DensityMatrix::new(m)
}

/// Partial trace on a raw matrix (no density-matrix invariants required).
pub fn partial_trace_matrix(m: &CMatrix, (da, db): (usize, usize), keep: Keep) -> Result<CMatrix> {
    check_dim("partial_trace", da * db, m.nrows())?;
    let zero = C64::new(0.0, 0.0);
    Ok(match keep {
        Keep::B => {
            let mut out = CMatrix::from_element(db, db, zero);
            for a in 0..da {
                let view = m.view((a * db, a * db), (db, db));
                out += view;
            }
            out
        }
        Keep::A => CMatrix::from_fn(da, da, |a1, a2| {
            (0..db).fold(zero, |acc, b| acc + m[(a1 * db + b, a2 * db + b)])
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{tensor_product, CVector};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn eigenvector_expectation() {
        let psi = StateVector::basis(3, 0).unwrap();
        let o = Observable::diagonal(&[5.0, 1.0, 1.0], "O");
        assert_eq!(expectation(&psi, &o).unwrap(), 5.0);
    }

    #[test]
    fn maximally_mixed_expectation_is_mean_trace() {
        let rho = DensityMatrix::maximally_mixed(3).unwrap();
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = c(2.0);
        m[(1, 1)] = c(-1.0);
        m[(2, 2)] = c(0.5);
        m[(0, 2)] = C64::new(0.3, 0.2);
        m[(2, 0)] = C64::new(0.3, -0.2);
        let o = Observable::new(m, "O").unwrap();
        assert!((expectation(&rho, &o).unwrap() - 1.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let psi = StateVector::basis(2, 0).unwrap();
        assert!(matches!(
            expectation(&psi, &Observable::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn eigenstate_has_zero_variance() {
        let m = SpectralModel::new(vec![0.0, 1.5, 4.0]).unwrap();
        let s = energy_stats(&StateVector::basis(3, 1).unwrap(), &m).unwrap();
        assert_eq!(s.mean, 1.5);
        assert_eq!(s.variance, 0.0);
    }

    #[test]
    fn symmetric_superposition_stats() {
        let m = SpectralModel::new(vec![0.0, 2.0]).unwrap();
        let psi = StateVector::from_real(&[1.0, 1.0]).unwrap();
        let s = energy_stats(&psi, &m).unwrap();
        assert!((s.mean - 1.0).abs() < 1e-15);
        assert!((s.variance - 1.0).abs() < 1e-15);
    }

    #[test]
    fn energy_stats_rejects_unnormalized() {
        let m = SpectralModel::new(vec![0.0, 2.0]).unwrap();
        let raw = StateVector::from_raw(
            CVector::from_vec(vec![c(1.0), c(1.0)]),
            crate::quantum::BasisTag::ANY,
        );
        assert!(energy_stats(&raw, &m).is_err());
    }

    #[test]
    fn entropy_limits() {
        let pure = StateVector::from_real(&[1.0, 2.0, 3.0]).unwrap().projector();
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(25).unwrap();
        assert!((von_neumann_entropy(&mixed).unwrap() - 25f64.ln()).abs() < 1e-12);
        assert!((25f64.ln() - 3.218_875_824_868_201).abs() < 1e-15);
    }

    #[test]
    fn relative_entropy_identical_and_support() {
        let rho = DensityMatrix::diagonal(&[0.2, 0.3, 0.5]).unwrap();
        assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-12);
        let chi = DensityMatrix::diagonal(&[0.5, 0.5, 0.0]).unwrap();
        let narrow = DensityMatrix::diagonal(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(relative_entropy(&chi, &narrow).unwrap(), f64::INFINITY);
        // The reverse direction is finite: supp(narrow) ⊆ supp(chi).
        assert!((relative_entropy(&narrow, &chi).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_projectors_distance_two() {
        let p0 = StateVector::basis(2, 0).unwrap().projector();
        let p1 = StateVector::basis(2, 1).unwrap().projector();
        assert!((trace_distance_sq(&p0, &p1).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(trace_distance_sq(&p0, &p0).unwrap(), 0.0);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let s = 0.5f64.sqrt();
        let bell = StateVector::new(vec![c(s), c(0.0), c(0.0), c(s)]).unwrap().projector();
        let rb = partial_trace(&bell, (2, 2), Keep::B).unwrap();
        let ra = partial_trace(&bell, (2, 2), Keep::A).unwrap();
        for r in [rb, ra] {
            assert!((r.matrix() - CMatrix::identity(2, 2).unscale(2.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let ra = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let rb = StateVector::new(vec![c(1.0), C64::new(0.0, 1.0), c(0.5)]).unwrap().projector();
        let joint = tensor_product(&ra, &rb);
        let back_b = partial_trace(&joint, (2, 3), Keep::B).unwrap();
        let back_a = partial_trace(&joint, (2, 3), Keep::A).unwrap();
        assert!((back_b.matrix() - rb.matrix()).norm() < 1e-15);
        assert!((back_a.matrix() - ra.matrix()).norm() < 1e-15);
        assert!(partial_trace(&joint, (3, 3), Keep::A).is_err());
    }
}
