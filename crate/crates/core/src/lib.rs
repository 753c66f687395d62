//! Stochastic thermalization and collapse dynamics for isolated quantum systems.
//!
//! The crate simulates three related models, all in the energy eigenbasis
//! with `ħ = 1`:
//!
//! * **thermalization**: Itô trajectories driven by the transition operators
//!   `|μ⟩⟨ν|`, whose ensembles obey `∂ρ/∂t = −i[H,ρ] + α̃(χ Tr ρ − ρ)` and
//!   relax to a microcanonical target `χ`;
//! * **reduction**: trajectories driven by sector projectors, whose ensembles
//!   lose inter-sector coherence while sector populations stay martingales;
//! * **hybrid**: both generators at once.
//!
//! Modules, bottom-up:
//!
//! | module | contents |
//! |---|---|
//! | [`quantum`] | states, density matrices, spectra, observables |
//! | [`measures`] | expectations, entropies, distances, partial trace |
//! | [`targets`] | microcanonical and canonical targets |
//! | [`noise`], [`trajectory`] | Wiener sources and the Euler–Maruyama stepper |
//! | [`montecarlo`] | deterministic parallel trajectory ensembles |
//! | [`ensemble`] | GKSL right-hand side, RK4, analytic propagator, steady state |
//! | [`diagnostics`] | entropy-law and martingale reports, curve fits |
//! | [`experiments`] | spectrum/state builders and the named experiments |
//! | [`config`], [`runner`], [`suite`], [`io`] | orchestration and artifacts |
//!
//! The runnable examples under `examples/` show one capability each.

pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod io;
pub mod measures;
pub mod montecarlo;
pub mod noise;
pub mod quantum;
pub mod runner;
pub mod suite;
pub mod targets;
pub mod trajectory;

pub use error::{Error, Result};
pub use quantum::{BasisTag, CMatrix, CVector, DensityMatrix, Observable, SpectralModel, StateVector, C64};
