//! Canonical state matched to an initial energy, and relaxation towards it.

use oqt::ensemble::analytic_oqt_solution;
use oqt::experiments::fig1::{build_fig1_hamiltonian, build_fig1_state};
use oqt::measures::{energy_stats, energy_stats_density, von_neumann_entropy};
use oqt::targets::{as_density, build_canonical, build_microcanonical, Target};
use oqt::DensityMatrix;

fn main() -> oqt::Result<()> {
    let model = build_fig1_hamiltonian(0)?;
    let psi = build_fig1_state(&model, 0, true)?;
    let e0 = energy_stats(&psi, &model)?.mean;
    let canonical = build_canonical(e0, &model)?;
    let micro = build_microcanonical(&psi, &model)?;
    println!("E0 = {e0:.6}, β = {:.6}, ln Z = {:.6}", canonical.beta(), canonical.log_partition());
    println!(
        "S(χ_β) = {:.6}, ln Ω = {:.6}",
        von_neumann_entropy(&as_density(&canonical))?,
        (micro.omega() as f64).ln()
    );
    let rho0 = DensityMatrix::pure(&psi);
    for t in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let rho = analytic_oqt_solution(&rho0, &canonical, &model, 1.0, t)?;
        println!("t = {t:4.1}: <H> = {:.6}, S = {:.6}", energy_stats_density(&rho, &model)?.mean, von_neumann_entropy(&rho)?);
    }
    println!("Tr[χ_β H] − E0 = {:.2e}", canonical.mean_energy(&model) - e0);
    Ok(())
}
