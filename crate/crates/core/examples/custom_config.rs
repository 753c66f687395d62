//! Parse a JSON scenario, echo its normalized form and run it into a temp directory.

use oqt::config::parse_config;
use oqt::runner::run;

fn main() -> oqt::Result<()> {
    let cfg = parse_config(
        r#"{
            "experiment": "custom",
            "mode": "both",
            "alpha_eff": 1.0,
            "j_eff": 0.3,
            "n_steps": 1000,
            "ensemble_size": 200,
            "observables": [{"kind": "energy"}, {"kind": "coherence", "i": 2, "j": 5}]
        }"#,
    )?;
    println!("{}", cfg.emit());
    println!("hash {}", cfg.hash());
    let dir = std::env::temp_dir().join("oqt_custom_example");
    let outcome = run(&cfg, &dir)?;
    for c in &outcome.checks {
        println!("{}", c.line());
    }
    println!("wrote {:?} under {}", outcome.artifacts, dir.display());
    Ok(())
}
