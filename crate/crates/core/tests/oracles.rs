//! Library routines checked against brute-force reimplementations.

use nalgebra::DMatrix;
use oqt::C64 as C;
use oqt::ensemble::{analytic_oqt_solution, gksl_rhs, propagate, superoperator, GKSLModel, PropagateOptions};
use oqt::experiments::fig1::{gaussian_state, random_spectrum};
use oqt::measures::{partial_trace_matrix, relative_entropy, von_neumann_entropy, Keep};
use oqt::targets::{as_density, build_canonical, build_microcanonical, Target};
use oqt::trajectory::{oqt_drift, OQTGenerator, SUVGenerator};
use oqt::{CMatrix, DensityMatrix, SpectralModel, StateVector};

fn ket_bra(d: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(i, j)] = C::new(1.0, 0.0);
    m
}

fn random_rho(d: usize, salt: u64) -> CMatrix {
    // Deterministic pseudo-random positive matrix from a scrambled counter.
    let mut x = 0x9e37_79b9_7f4a_7c15u64 ^ salt;
    let mut next = || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let g = CMatrix::from_fn(d, d, |_, _| C::new(next(), next()));
    let m = &g * g.adjoint();
    let tr = m.trace();
    m / tr
}

fn setup(seed: u64, d: usize) -> (SpectralModel, StateVector) {
    let (model, _) = random_spectrum(seed, d, (0.0, 10.0), 0.3 * 10.0 / (d - 1) as f64).unwrap();
    let psi = gaussian_state(&model, 0.6, 0.2, Some(seed)).unwrap();
    (model, psi)
}

/// `Σ_j γ_j (L_j ρ L_j† − ½{L_j†L_j, ρ})` with explicit matrix products.
fn naive_gksl(h: &CMatrix, jumps: &[(f64, CMatrix)], rho: &CMatrix) -> CMatrix {
    let i = C::new(0.0, 1.0);
    let mut out = -(h * rho - rho * h) * i;
    for (g, l) in jumps {
        let ld = l.adjoint();
        let ldl = &ld * l;
        out += (l * rho * &ld - (&ldl * rho + rho * &ldl) * C::new(0.5, 0.0)) * C::new(*g, 0.0);
    }
    out
}

#[test]
fn master_equation_matches_explicit_jump_sum() {
    let d = 6;
    let (model, psi) = setup(4, d);
    let target = build_microcanonical(&psi, &model).unwrap();
    let (alpha, j) = (0.8, 1.3);
    let oqt = OQTGenerator::new(alpha, &target).unwrap();
    let suv = SUVGenerator::new(j, vec![vec![0, 3], vec![1, 2, 5], vec![4]], d).unwrap();
    let m = GKSLModel::new(&model, Some(&oqt), Some(&suv)).unwrap();

    let h = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, model.energies().iter().map(|&e| C::new(e, 0.0))));
    let mut jumps = Vec::new();
    for mu in 0..d {
        for nu in 0..d {
            jumps.push((alpha * target.weights()[mu], ket_bra(d, mu, nu)));
        }
    }
    for s in suv.sectors() {
        let mut p = CMatrix::zeros(d, d);
        for &k in s {
            p[(k, k)] = C::new(1.0, 0.0);
        }
        jumps.push((j, p));
    }
    for salt in 0..4 {
        let rho = random_rho(d, salt) * C::new(1.0 + salt as f64, 0.0);
        let err = (naive_gksl(&h, &jumps, &rho) - gksl_rhs(&rho, &m)).camax();
        assert!(err < 1e-12, "salt {salt}: {err:e}");
    }
}

#[test]
fn drift_matches_double_sum_over_jumps() {
    let d = 7;
    let (model, psi) = setup(9, d);
    let target = build_microcanonical(&psi, &model).unwrap();
    let gen = OQTGenerator::new(1.7, &target).unwrap();
    let a = gen.drift_rates();
    let v = psi.amplitudes();
    let col = DMatrix::from_column_slice(d, 1, v.as_slice());
    let mut naive = DMatrix::<C>::zeros(d, 1);
    for mu in 0..d {
        for nu in 0..d {
            let l = ket_bra(d, mu, nu);
            let ld = l.adjoint();
            let exp_l = (col.adjoint() * &l * &col)[(0, 0)];
            let exp_ld = exp_l.conj();
            let term = &l * &col * exp_ld - &ld * &l * &col * C::new(0.5, 0.0) - &col * (exp_l * exp_ld * 0.5);
            naive += term * C::new(a[mu], 0.0);
        }
    }
    let closed = oqt_drift(v, &gen);
    for k in 0..d {
        assert!((naive[(k, 0)] - closed[k]).norm() < 1e-12);
    }
}

#[test]
fn partial_trace_matches_index_loops() {
    let (da, db) = (3, 4);
    let rho = random_rho(da * db, 77);
    let a = partial_trace_matrix(&rho, (da, db), Keep::A).unwrap();
    let b = partial_trace_matrix(&rho, (da, db), Keep::B).unwrap();
    for i in 0..da {
        for j in 0..da {
            let mut s = C::new(0.0, 0.0);
            for k in 0..db {
                s += rho[(i * db + k, j * db + k)];
            }
            assert!((s - a[(i, j)]).norm() < 1e-15);
        }
    }
    for i in 0..db {
        for j in 0..db {
            let mut s = C::new(0.0, 0.0);
            for k in 0..da {
                s += rho[(k * db + i, k * db + j)];
            }
            assert!((s - b[(i, j)]).norm() < 1e-15);
        }
    }
}

#[test]
fn relative_entropy_of_diagonals_is_kl_divergence() {
    let p = [0.1f64, 0.2, 0.3, 0.4];
    let q = [0.25f64, 0.25, 0.4, 0.1];
    let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
    let got = relative_entropy(&DensityMatrix::diagonal(&p).unwrap(), &DensityMatrix::diagonal(&q).unwrap()).unwrap();
    assert!((got - kl).abs() < 1e-13, "{got} vs {kl}");
    let shannon: f64 = -p.iter().map(|x| x * x.ln()).sum::<f64>();
    assert!((von_neumann_entropy(&DensityMatrix::diagonal(&p).unwrap()).unwrap() - shannon).abs() < 1e-13);
}

#[test]
fn window_members_match_direct_scan() {
    for seed in 0..50u64 {
        let (model, psi) = setup(seed, 12);
        let target = build_microcanonical(&psi, &model).unwrap();
        let p = psi.populations();
        let e = model.energies();
        let mean: f64 = p.iter().zip(e).map(|(a, b)| a * b).sum();
        let var: f64 = p.iter().zip(e).map(|(a, b)| a * (b - mean).powi(2)).sum();
        let scan: Vec<usize> = (0..12).filter(|&k| (e[k] - mean).abs() <= var.sqrt() + 1e-12).collect();
        assert_eq!(target.members(), scan.as_slice(), "seed {seed}");
        let w = 1.0 / scan.len() as f64;
        for k in 0..12 {
            let want = if scan.contains(&k) { w } else { 0.0 };
            assert!((target.weights()[k] - want).abs() < 1e-15);
        }
    }
}

#[test]
fn raw_spectrum_gaps_have_requested_statistics() {
    let (d, sd) = (25, 0.01);
    let mut n = 0usize;
    let (mut s1, mut s2) = (0.0, 0.0);
    for seed in 0..10_000u64 {
        let (model, gaps) = random_spectrum(seed, d, (0.0, 10.0), sd).unwrap();
        assert_eq!(model.energies()[0], 0.0);
        assert_eq!(model.energies()[d - 1], 10.0);
        for g in gaps {
            n += 1;
            s1 += g;
            s2 += g * g;
        }
    }
    let mean = s1 / n as f64;
    let std = (s2 / n as f64 - mean * mean).sqrt();
    assert!((mean - 10.0 / 24.0).abs() < 4.0 * sd / (n as f64).sqrt(), "mean gap {mean}");
    assert!((std / sd - 1.0).abs() < 0.02, "gap sd {std}");
}

#[test]
fn canonical_beta_solves_energy_equation() {
    let (model, _) = setup(2, 10);
    for target_e in [1.0, 3.7, 5.0, 8.9] {
        let c = build_canonical(target_e, &model).unwrap();
        let e = model.energies();
        let z: f64 = e.iter().map(|x| (-c.beta() * x).exp()).sum();
        let mean: f64 = e.iter().map(|x| x * (-c.beta() * x).exp()).sum::<f64>() / z;
        assert!((mean - target_e).abs() < 1e-8, "{mean} vs {target_e}");
        assert!((c.log_partition() - z.ln()).abs() < 1e-10);
    }
}

#[test]
fn plateau_is_window_average_of_diagonal() {
    let (model, psi) = setup(5, 10);
    let target = build_microcanonical(&psi, &model).unwrap();
    let o = oqt::experiments::fig1::random_hermitian(10, 5).unwrap();
    let avg: f64 = target.members().iter().map(|&k| o.matrix()[(k, k)].re).sum::<f64>() / target.omega() as f64;
    let rho = analytic_oqt_solution(&DensityMatrix::pure(&psi), &target, &model, 1.0, 60.0).unwrap();
    let value = (rho.matrix() * o.matrix()).trace().re;
    assert!((value - avg).abs() < 1e-12);
    assert!(((as_density(&target).matrix() * o.matrix()).trace().re - avg).abs() < 1e-14);
}

#[test]
fn propagation_matches_superoperator_exponential() {
    let d = 4;
    let (model, psi) = setup(6, d);
    let target = build_microcanonical(&psi, &model).unwrap();
    let oqt = OQTGenerator::new(0.9, &target).unwrap();
    let suv = SUVGenerator::contiguous(1.1, d, 2).unwrap();
    let rho0 = DensityMatrix::pure(&psi);
    for m in [
        GKSLModel::thermal(&model, 0.9, &target).unwrap(),
        GKSLModel::new(&model, Some(&oqt), Some(&suv)).unwrap(),
    ] {
        let t = 2.0;
        let prop = (superoperator(&m) * C::new(t, 0.0)).exp();
        let v = nalgebra::DVector::from_column_slice(rho0.matrix().as_slice());
        let exact = CMatrix::from_column_slice(d, d, (prop * v).as_slice());
        let rec = propagate(&rho0, &m, 1e-3, 2000, &PropagateOptions { sample_stride: 2000, keep_states: true, ..Default::default() }).unwrap();
        let err = (rec.states.last().unwrap().matrix() - &exact).camax();
        assert!(err < 1e-10, "{err:e}");
    }
    let exact = analytic_oqt_solution(&rho0, &target, &model, 0.9, 2.0).unwrap();
    let sup = (superoperator(&GKSLModel::thermal(&model, 0.9, &target).unwrap()) * C::new(2.0, 0.0)).exp();
    let v = nalgebra::DVector::from_column_slice(rho0.matrix().as_slice());
    let via_exp = CMatrix::from_column_slice(d, d, (sup * v).as_slice());
    assert!((exact.matrix() - via_exp).camax() < 1e-12);
}
