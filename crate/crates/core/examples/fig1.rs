//! Observable relaxation on a 25-level random spectrum for a small coupling grid.
//!
//! `cargo run --release --example fig1`

use oqt::experiments::fig1::{run_fig1, Fig1Scenario};

fn main() -> oqt::Result<()> {
    let sc = Fig1Scenario {
        dt: 1e-3,
        alpha_grid: vec![0.0, 1.0, 2.0],
        sample_stride: 5,
        ..Fig1Scenario::default()
    };
    let out = run_fig1(&sc)?;
    println!("window {:?} (Ω = {}), horizon t = {}", out.target.members(), out.target.omega(), out.horizon);
    println!("plateau Tr[χ O2] = {:.6}", out.plateau_o2());
    for c in &out.curves {
        let o2 = c.record.observable("O2").unwrap();
        match &c.envelope {
            Some(env) => println!(
                "alpha {:>4}: envelope rate {:.5} from {} peaks, final <O2> = {:.6}",
                c.alpha_eff,
                env.rate,
                env.peaks,
                o2[o2.len() - 1]
            ),
            None => println!("alpha {:>4}: no envelope", c.alpha_eff),
        }
    }
    for check in &out.checks {
        println!("{}", check.line());
    }
    Ok(())
}
