//! Thermalizing half of a maximally entangled pair, with and without a
//! nonlinear control generator.

use oqt::experiments::no_signalling::{maximally_entangled, run_no_signalling, SignallingGenerator};
use oqt::{DensityMatrix, SpectralModel};

fn main() -> oqt::Result<()> {
    let a = SpectralModel::ladder(4, 1.0)?;
    let b = SpectralModel::new(vec![0.0, 0.7, 1.5, 2.6])?;
    let rho = DensityMatrix::pure(&maximally_entangled(4)?);
    for g in [SignallingGenerator::Linear, SignallingGenerator::NonlinearMutant] {
        let r = run_no_signalling(&a, &b, &rho, 1.0, 1e-3, 5000, 500, g)?;
        println!("{g:?}: window on A = {:?}", r.target_members);
        for (t, dev) in r.times.iter().zip(&r.deviations) {
            println!("  t = {t:4.1}  ‖ρ_B − ρ_B^free‖ = {dev:.3e}");
        }
    }
    Ok(())
}
