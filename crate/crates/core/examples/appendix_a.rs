//! Martingale verdicts for reduction-only and thermalization-only ensembles.

use oqt::experiments::appendix_a::{run_appendix_a, AppendixAScenario};

fn main() -> oqt::Result<()> {
    let sc = AppendixAScenario {
        trajectories: 500,
        n_steps: 4000,
        samples: 20,
        ..AppendixAScenario::default()
    };
    let r = run_appendix_a(&sc)?;
    println!("Born weights  {:.3?}", r.born_weights);
    println!("target        {:.3?}", r.target_weights);
    println!("SUV sectors:  {}", r.reduction_sectors.verdict);
    println!("SUV energy:   {}", r.reduction_energy.verdict);
    println!("OQT energy:   {} (fitted rate {:?})", r.thermal_energy.verdict, r.thermal_energy.relaxation_rate);
    println!(
        "SUV terminal distance to χ: {:.4} (Born distance {:.4})",
        r.reduction_terminal_distance, r.born_distance
    );
    for c in &r.checks {
        println!("{}", c.line());
    }
    Ok(())
}
