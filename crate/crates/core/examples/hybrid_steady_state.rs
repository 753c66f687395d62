//! Null space of the combined thermalization and reduction generator.

use oqt::ensemble::{hybrid_steady_state, propagate, GKSLModel, PropagateOptions};
use oqt::experiments::fig1::{gaussian_state, random_spectrum};
use oqt::targets::{as_density, build_microcanonical};
use oqt::trajectory::{OQTGenerator, SUVGenerator};
use oqt::DensityMatrix;

fn main() -> oqt::Result<()> {
    let (model, _) = random_spectrum(3, 8, (0.0, 10.0), 0.4)?;
    let psi = gaussian_state(&model, 0.6, 0.2, Some(3))?;
    let target = build_microcanonical(&psi, &model)?;
    let chi = as_density(&target);
    for (alpha, j) in [(0.5, 0.5), (1.0, 2.0), (2.0, 0.1)] {
        let oqt = OQTGenerator::new(alpha, &target)?;
        let suv = SUVGenerator::contiguous(j, 8, 2)?;
        let m = GKSLModel::new(&model, Some(&oqt), Some(&suv))?;
        let ss = hybrid_steady_state(&m)?;
        let n = (40.0 / alpha / 1e-2) as usize;
        let rec = propagate(
            &DensityMatrix::pure(&psi),
            &m,
            1e-2,
            n,
            &PropagateOptions { sample_stride: n, keep_states: true, ..Default::default() },
        )?;
        let marched = rec.states.last().unwrap();
        println!(
            "α̃ = {alpha}, J̃ = {j}: residual {:.2e}, null dim {}, |ρ∞ − χ| = {:.2e}, |ρ(T) − ρ∞| = {:.2e}",
            ss.residual,
            ss.null_dimension,
            (ss.state.matrix() - chi.matrix()).camax(),
            (marched.matrix() - ss.state.matrix()).camax()
        );
    }
    Ok(())
}
