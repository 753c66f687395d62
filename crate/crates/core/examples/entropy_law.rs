//! Finite-difference entropy production against the relative-entropy rate law.

use oqt::diagnostics::{entropy_law_check, DifferenceScheme};
use oqt::ensemble::{propagate, GKSLModel, PropagateOptions};
use oqt::experiments::fig1::{build_fig1_hamiltonian, build_fig1_state};
use oqt::targets::build_microcanonical;
use oqt::DensityMatrix;

fn main() -> oqt::Result<()> {
    let model = build_fig1_hamiltonian(0)?;
    let psi = build_fig1_state(&model, 0, true)?;
    let target = build_microcanonical(&psi, &model)?;
    let m = GKSLModel::thermal(&model, 1.0, &target)?;
    let opts = PropagateOptions { relative_entropy: true, ..Default::default() };
    for dt in [4e-4, 2e-4, 1e-4] {
        let rec = propagate(&DensityMatrix::pure(&psi), &m, dt, (2.0 / dt) as usize + 1, &opts)?;
        for scheme in [DifferenceScheme::Forward, DifferenceScheme::Central] {
            let r = entropy_law_check(&rec, target.omega(), scheme, (0.1, 2.0))?;
            println!("dt = {dt:.0e} {scheme:?}: max relative error {:.3e} over {} samples", r.max_relative_error, r.checked);
        }
    }
    Ok(())
}
