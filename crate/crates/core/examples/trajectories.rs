//! One thermalizing and one collapsing trajectory, printed as CSV.

use oqt::experiments::fig1::{gaussian_state, random_spectrum};
use oqt::io::{trajectory_table, write_csv};
use oqt::noise::WienerSource;
use oqt::targets::build_microcanonical;
use oqt::trajectory::{integrate_trajectory, Generators, OQTGenerator, Observers, SUVGenerator};

fn main() -> oqt::Result<()> {
    let (model, _) = random_spectrum(1, 8, (0.0, 10.0), 0.4)?;
    let psi = gaussian_state(&model, 0.6, 0.2, Some(1))?;
    let target = build_microcanonical(&psi, &model)?;
    let oqt = OQTGenerator::new(1.0, &target)?;
    let suv = SUVGenerator::contiguous(2.0, 8, 2)?;
    let obs = Observers { sample_stride: 500, ..Observers::default() };
    for (name, gens) in [("thermal", Generators::thermal(&oqt)), ("reduction", Generators::reduction(&suv))] {
        let rec = integrate_trajectory(&psi, gens, &model, 1e-3, 5000, WienerSource::new(42, 0), &obs)?;
        println!("# {name}, mean |residual| {:.2e}", rec.residual_stats.mean_abs);
        let (header, rows) = trajectory_table(&rec);
        write_csv(std::io::stdout().lock(), &header, &rows)?;
    }
    Ok(())
}
