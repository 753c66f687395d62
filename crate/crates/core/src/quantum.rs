//! State and operator representations in the energy eigenbasis.
//!
//! Everything in this crate works permanently in the eigenbasis `{|μ⟩}` of the
//! Hamiltonian, so the Hamiltonian is just its ordered spectrum and observables
//! are supplied already expressed in that basis. Units have `ħ = 1`.
//!
//! Composite spaces use the joint index `k = a·d_B + b` everywhere (tensor
//! products and partial traces agree on it).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const NORM_TOLERANCE: f64 = 1e-10;
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-9;
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Binds states to the spectral model whose eigenbasis they are expressed in.
///
/// `BasisTag::ANY` is compatible with every other tag; it is used for states
/// built without reference to a model (reduced states, synthetic probes).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisTag(pub u64);

impl BasisTag {
    pub const ANY: BasisTag = BasisTag(0);

    pub fn compatible(self, other: BasisTag) -> bool {
        self == BasisTag::ANY || other == BasisTag::ANY || self == other
    }

    fn of_values(values: &[f64]) -> BasisTag {
        // FNV-1a over the bit patterns; 0 is reserved for ANY.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in values {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        BasisTag(h.max(1))
    }
}

/// The Hamiltonian as its ordered spectrum, plus an optional commuting charge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    energies: Vec<f64>,
    charge: Option<Vec<f64>>,
    degeneracy_tolerance: f64,
    tag: BasisTag,
}

impl SpectralModel {
    pub const DEFAULT_DEGENERACY_TOLERANCE: f64 = 1e-10;

    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::contract("spectral model needs at least one level"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::contract("energies must be finite"));
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::contract("energies must be sorted nondecreasing"));
        }
        let tag = BasisTag::of_values(&energies);
        Ok(SpectralModel {
            energies,
            charge: None,
            degeneracy_tolerance: Self::DEFAULT_DEGENERACY_TOLERANCE,
            tag,
        })
    }

    /// Evenly spaced ladder `E_μ = μ·spacing`.
    pub fn ladder(dim: usize, spacing: f64) -> Result<Self> {
        Self::new((0..dim).map(|k| k as f64 * spacing).collect())
    }

    /// Attach the diagonal of a conserved charge commuting with the Hamiltonian.
    pub fn with_charge(mut self, charge: Vec<f64>) -> Result<Self> {
        check_dim("charge diagonal", self.dim(), charge.len())?;
        if charge.iter().any(|s| !s.is_finite()) {
            return Err(Error::contract("charge values must be finite"));
        }
        self.charge = Some(charge);
        Ok(self)
    }

    pub fn with_degeneracy_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::contract("degeneracy tolerance must be finite and >= 0"));
        }
        self.degeneracy_tolerance = tol;
        Ok(self)
    }

    /// Shift every level by `c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let mut m = Self::new(self.energies.iter().map(|e| e + c).collect())?;
        m.charge = self.charge.clone();
        m.degeneracy_tolerance = self.degeneracy_tolerance;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn charge(&self) -> Option<&[f64]> {
        self.charge.as_deref()
    }

    pub fn degeneracy_tolerance(&self) -> f64 {
        self.degeneracy_tolerance
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn e_min(&self) -> f64 {
        self.energies[0]
    }

    pub fn e_max(&self) -> f64 {
        self.energies[self.dim() - 1]
    }

    pub fn hamiltonian(&self) -> Observable {
        Observable::diagonal(&self.energies, "H")
    }
}

/// Normalized pure state of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: CVector,
    tag: BasisTag,
}

impl StateVector {
    /// Normalizes `amps`. Fails on an empty or zero vector.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let mut s = StateVector {
            amps: CVector::from_vec(amps),
            tag: BasisTag::ANY,
        };
        if s.amps.is_empty() {
            return Err(Error::contract("state vector needs d >= 1"));
        }
        if !s.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::contract("state amplitudes must be finite"));
        }
        s.normalize()?;
        Ok(s)
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::contract(format!("basis index {k} out of range for d = {dim}")));
        }
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[k] = C64::new(1.0, 0.0);
        Self::new(v)
    }

    /// Bind to a model's eigenbasis; the dimensions must agree.
    pub fn bound_to(mut self, model: &SpectralModel) -> Result<Self> {
        check_dim("state vs spectral model", model.dim(), self.dim())?;
        self.tag = model.tag();
        Ok(self)
    }

    pub(crate) fn from_raw(amps: CVector, tag: BasisTag) -> Self {
        StateVector { amps, tag }
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.amps.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::contract("cannot normalize a zero or non-finite state"));
        }
        self.amps.unscale_mut(n);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Born weights `|ψ_μ|²`.
    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn projector(&self) -> DensityMatrix {
        let m = &self.amps * self.amps.adjoint();
        DensityMatrix::from_parts(m, vec![], self.tag).with_spectrum_computed()
    }

    pub(crate) fn check_model(&self, model: &SpectralModel) -> Result<()> {
        check_dim("state vs spectral model", model.dim(), self.dim())?;
        if !self.tag.compatible(model.tag()) {
            return Err(Error::contract("state is bound to a different spectral model"));
        }
        Ok(())
    }
}

/// Hermitian, unit-trace, positive-semidefinite ensemble state.
///
/// The eigenvalues are computed once at construction and cached.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
    spectrum: Vec<f64>,
    tag: BasisTag,
}

impl DensityMatrix {
    /// Validates every invariant: Hermitian, unit trace, PSD.
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tag(m, BasisTag::ANY)
    }

    pub fn with_tag(m: CMatrix, tag: BasisTag) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::contract("density matrix must be square and non-empty"));
        }
        let herm = hermiticity_defect(&m);
        if herm > HERMITIAN_TOLERANCE {
            return Err(Error::contract(format!(
                "density matrix not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::contract(format!("density matrix trace {tr} != 1")));
        }
        let rho = DensityMatrix::from_parts(hermitize(&m), vec![], tag).with_spectrum_computed();
        let min = rho.min_eigenvalue();
        if min < -PSD_TOLERANCE {
            return Err(Error::contract(format!(
                "density matrix not positive semidefinite (min eigenvalue {min:.3e})"
            )));
        }
        Ok(rho)
    }

    pub fn pure(psi: &StateVector) -> Self {
        psi.projector()
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        let d = weights.len();
        let m = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(weights[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self::new(m)
    }

    pub fn bound_to(mut self, model: &SpectralModel) -> Result<Self> {
        check_dim("density matrix vs spectral model", model.dim(), self.dim())?;
        self.tag = model.tag();
        Ok(self)
    }

    fn from_parts(m: CMatrix, spectrum: Vec<f64>, tag: BasisTag) -> Self {
        DensityMatrix { m, spectrum, tag }
    }

    /// Integrator output: Hermitian with unit trace, spectrum already known and
    /// screened by the caller against its own positivity floor.
    pub(crate) fn from_integrator(m: CMatrix, spectrum: Vec<f64>, tag: BasisTag) -> Self {
        Self::from_parts(m, spectrum, tag)
    }

    fn with_spectrum_computed(mut self) -> Self {
        self.spectrum = hermitian_eigenvalues(&self.m);
        self
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.first().copied().unwrap_or(0.0)
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn diagonal_weights(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)].re).collect()
    }

    pub fn purity(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Hermitian observable in the energy eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
    label: String,
}

impl Observable {
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::contract("observable must be square and non-empty"));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOLERANCE {
            return Err(Error::contract(format!(
                "observable not Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(Observable {
            matrix,
            label: label.into(),
        })
    }

    pub fn diagonal(values: &[f64], label: impl Into<String>) -> Self {
        let d = values.len();
        let matrix = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Observable {
            matrix,
            label: label.into(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim], "I")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }
}

/// `max |m_ij − conj(m_ji)|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M†)/2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).unscale(2.0)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigen-decomposition of a Hermitian matrix: (eigenvalues, eigenvectors as columns).
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Kronecker product, joint index `a·d_B + b`.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Self {
        let m = self.m.kronecker(&other.m);
        DensityMatrix::from_parts(m, vec![], BasisTag::ANY).with_spectrum_computed()
    }
}

impl Tensor for Observable {
    fn tensor(&self, other: &Self) -> Self {
        Observable {
            matrix: self.matrix.kronecker(&other.matrix),
            label: format!("{}⊗{}", self.label, other.label),
        }
    }
}

pub fn tensor_product<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}
