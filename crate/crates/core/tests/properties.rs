use proptest::prelude::*;

use oqt::config::{normalize, parse_config, Experiment, Mode, ScenarioConfig};
use oqt::ensemble::{analytic_oqt_solution, gksl_rhs, propagate, GKSLModel, PropagateOptions};
use oqt::experiments::fig1::{gaussian_state, random_spectrum};
use oqt::measures::{partial_trace_matrix, relative_entropy, von_neumann_entropy, Keep};
use oqt::noise::WienerSource;
use oqt::quantum::{hermiticity_defect, tensor_product};
use oqt::targets::{as_density, build_microcanonical};
use oqt::trajectory::{step, Generators, OQTGenerator, SUVGenerator};
use oqt::{CMatrix, DensityMatrix, StateVector, C64};

fn amplitudes(d: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn mixed(d: usize) -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec(amplitudes(d), 1..4).prop_flat_map(move |vs| {
        prop::collection::vec(0.05f64..1.0, vs.len()).prop_map(move |ws| {
            let total: f64 = ws.iter().sum();
            let mut m = CMatrix::zeros(d, d);
            for (v, w) in vs.iter().zip(&ws) {
                let psi = StateVector::new(v.clone()).unwrap();
                m += DensityMatrix::pure(&psi).matrix() * C64::new(w / total, 0.0);
            }
            DensityMatrix::new(m).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_preserves_norm(seed in 0u64..1000, alpha in 0.0f64..3.0, j in 0.0f64..3.0, stream in 0u64..50) {
        let (model, _) = random_spectrum(seed, 6, (0.0, 10.0), 0.5).unwrap();
        let psi = gaussian_state(&model, 0.6, 0.2, Some(seed)).unwrap();
        let target = build_microcanonical(&psi, &model).unwrap();
        let oqt = OQTGenerator::new(alpha, &target).unwrap();
        let suv = SUVGenerator::contiguous(j, 6, 3).unwrap();
        let mut noise = WienerSource::new(seed, stream);
        let mut s = psi;
        for _ in 0..20 {
            let out = step(&s, &Generators::hybrid(&oqt, &suv), &model, 1e-3, &mut noise).unwrap();
            prop_assert!(out.norm_residual.abs() < 10.0 * (1e-3f64).sqrt() * (alpha + j) + 1e-12);
            s = out.state;
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_is_trace_free_and_hermitian(rho in mixed(5), scale in 0.1f64..4.0, seed in 0u64..200, alpha in 0.0f64..2.0, j in 0.0f64..2.0) {
        let (model, psi) = {
            let (m, _) = random_spectrum(seed, 5, (0.0, 10.0), 0.5).unwrap();
            let p = gaussian_state(&m, 0.5, 0.3, None).unwrap();
            (m, p)
        };
        let target = build_microcanonical(&psi, &model).unwrap();
        let oqt = OQTGenerator::new(alpha, &target).unwrap();
        let suv = SUVGenerator::contiguous(j, 5, 2).unwrap();
        let m = GKSLModel::new(&model, Some(&oqt), Some(&suv)).unwrap();
        let probe = rho.matrix() * C64::new(scale, 0.0);
        let out = gksl_rhs(&probe, &m);
        prop_assert!(out.trace().norm() < 1e-12);
        prop_assert!(hermiticity_defect(&out) < 1e-12);
    }

    #[test]
    fn entropies_are_bounded(rho in mixed(6), sigma in mixed(6)) {
        let s = von_neumann_entropy(&rho).unwrap();
        prop_assert!(s >= -1e-9 && s <= (6f64).ln() + 1e-9);
        let d = relative_entropy(&sigma, &rho).unwrap();
        prop_assert!(d.is_infinite() || d >= 0.0);
        prop_assert!(relative_entropy(&rho, &rho).unwrap() < 1e-8);
    }

    #[test]
    fn partial_trace_of_product_recovers_factors(a in mixed(3), b in mixed(4)) {
        let joint = tensor_product(&a, &b).into_matrix();
        let ra = partial_trace_matrix(&joint, (3, 4), Keep::A).unwrap();
        let rb = partial_trace_matrix(&joint, (3, 4), Keep::B).unwrap();
        prop_assert!((ra - a.matrix()).camax() < 1e-14);
        prop_assert!((rb - b.matrix()).camax() < 1e-14);
    }

    #[test]
    fn analytic_solution_stays_a_state(seed in 0u64..500, t in 0.0f64..20.0, alpha in 0.0f64..3.0) {
        let (model, _) = random_spectrum(seed, 8, (0.0, 10.0), 0.4).unwrap();
        let psi = gaussian_state(&model, 0.6, 0.2, Some(seed)).unwrap();
        let target = build_microcanonical(&psi, &model).unwrap();
        let rho = analytic_oqt_solution(&DensityMatrix::pure(&psi), &target, &model, alpha, t).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.min_eigenvalue() > -1e-12);
        let s = von_neumann_entropy(&rho).unwrap();
        prop_assert!(s <= ((target.omega() + 1) as f64).ln() + 1e-9);
    }

    #[test]
    fn rk4_trace_distance_never_grows(seed in 0u64..200) {
        let (model, _) = random_spectrum(seed, 6, (0.0, 10.0), 0.5).unwrap();
        let psi = gaussian_state(&model, 0.6, 0.2, Some(seed)).unwrap();
        let target = build_microcanonical(&psi, &model).unwrap();
        let m = GKSLModel::thermal(&model, 1.0, &target).unwrap();
        let rec = propagate(&DensityMatrix::pure(&psi), &m, 2e-3, 1500, &PropagateOptions { sample_stride: 50, ..Default::default() }).unwrap();
        let td = rec.trace_distance.unwrap();
        prop_assert!(td.windows(2).all(|w| w[1] <= w[0] + 1e-14));
        let chi = as_density(&target);
        prop_assert_eq!(chi.dim(), 6);
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), dt in 1e-5f64..1e-2, alpha in 0.0f64..4.0, j in 0.0f64..4.0,
                          n in 1usize..5000, mode in prop::sample::select(vec![Mode::Master, Mode::Trajectories, Mode::Both]),
                          exp in prop::sample::select(vec![Experiment::Fig1, Experiment::AppendixA, Experiment::Custom])) {
        let mut c = ScenarioConfig::defaults(exp);
        c.seed = seed;
        c.dt = dt;
        c.alpha_eff = alpha.max(0.01);
        c.j_eff = j.max(0.01);
        c.n_steps = n;
        c.mode = mode;
        prop_assume!(c.validate().is_ok());
        let back = parse_config(&c.emit()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
        let v = serde_json::to_value(&c).unwrap();
        prop_assert_eq!(normalize(v).unwrap(), c);
    }
}
