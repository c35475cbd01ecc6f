use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use skinlab::dynamics::{evolve, EvolveOptions};
use skinlab::linalg::ode::OdeOptions;
use skinlab::manybody::*;
use skinlab::model::{binomial, Boundary, ModelSpec};
use skinlab::steady::DensityMatrix;

fn arb_spec(lo: usize, hi: usize) -> impl Strategy<Value = ModelSpec> {
    (lo..=hi, any::<bool>(), 0.05f64..2.5, any::<bool>()).prop_map(|(l, pbc, g, fb)| {
        ModelSpec::new(l, if pbc { Boundary::Pbc } else { Boundary::Obc }, g, fb).unwrap()
    })
}

fn domain_wall_rho(ops: &SectorOperators) -> Array2<C64> {
    let d = ops.dim();
    let i = ops.basis.index_of(ops.basis.domain_wall()).unwrap();
    let mut r = Array2::zeros((d, d));
    r[[i, i]] = C64::new(1.0, 0.0);
    r
}

#[test]
fn one_particle_sector_reproduces_site_dynamics() {
    for fb in [true, false] {
        let s = ModelSpec::new(7, Boundary::Obc, 0.8, fb).unwrap();
        let ops = build_sector_operators(&s, 1).unwrap();
        let times = [0.0, 1.0, 3.0, 8.0];
        let ev = evolve_sector(
            &ops,
            domain_wall_rho(&ops).view(),
            &times,
            OdeOptions::default(),
            None,
        )
        .unwrap();
        let single = evolve(
            &s,
            &DensityMatrix::site(7, 6),
            &times,
            &EvolveOptions::default(),
        )
        .unwrap();
        for (a, b) in ev
            .densities
            .iter()
            .flatten()
            .zip(single.observables.iter().flatten())
        {
            assert!((a - b).abs() < 1e-7, "fb={fb}: {a} vs {b}");
        }
    }
}

#[test]
fn sector_relaxation_reaches_the_skin_state() {
    let s = ModelSpec::new(6, Boundary::Obc, 0.8, true).unwrap();
    let times: Vec<f64> = (0..=60).map(|t| t as f64).collect();
    let res = sector_relaxation(&s, 3, &times, OdeOptions::default()).unwrap();
    assert!(res.distances[0] > 1.5, "domain wall sits on the far side");
    assert!(*res.distances.last().unwrap() < 1e-3);
    let last = res.observables.last().unwrap();
    assert!(imbalance_of_profile(last) > 0.5, "{last:?}");
}

#[test]
fn krylov_steady_state_matches_long_time_limit() {
    let s = ModelSpec::new(6, Boundary::Pbc, 1.3, true).unwrap();
    let ops = build_sector_operators(&s, 2).unwrap();
    let ss = sector_steady_state(&ops).unwrap();
    let ev = evolve_sector(
        &ops,
        domain_wall_rho(&ops).view(),
        &[0.0, 400.0],
        OdeOptions::default(),
        Some(ss.view()),
    )
    .unwrap();
    assert!(ev.distances.unwrap()[1] < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sector_generator_preserves_trace_and_number(s in arb_spec(3, 7), nf in 0.0f64..1.0) {
        let n = 1 + ((s.l - 1) as f64 * nf) as usize % (s.l - 1);
        let ops = build_sector_operators(&s, n).unwrap();
        prop_assert_eq!(ops.dim(), binomial(s.l, n));
        let times = [0.0, 0.5, 2.0];
        let ev = evolve_sector(&ops, domain_wall_rho(&ops).view(), &times, OdeOptions::default(), None).unwrap();
        prop_assert!(ev.max_trace_error < 1e-8);
        prop_assert!(ev.max_hermiticity_error < 1e-8);
        for p in &ev.densities {
            prop_assert!((p.iter().sum::<f64>() - n as f64).abs() < 1e-8);
            prop_assert!(p.iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
        }
    }

    #[test]
    fn trajectories_conserve_particle_number(s in arb_spec(4, 8), seed in 0u64..1000, gaussian in any::<bool>()) {
        let n = s.l / 2;
        let backend = if gaussian { Backend::Gaussian } else { Backend::StateVector };
        let opts = TrajectoryOptions { t_max: 2.0, n_traj: 6, base_seed: seed, backend, ..Default::default() };
        let ens = run_trajectories(&s, n, &opts).unwrap();
        for (m, se) in ens.mean.iter().zip(&ens.stderr) {
            prop_assert!((m.iter().sum::<f64>() - n as f64).abs() < 1e-9);
            prop_assert!(se.iter().all(|&x| x >= 0.0));
        }
        let eta = ens.imbalance();
        prop_assert!(eta.eta.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn backends_agree_record_by_record(s in arb_spec(4, 7), seed in 0u64..1000) {
        let n = s.l / 2;
        let run = |backend| {
            let o = TrajectoryOptions { t_max: 1.5, n_traj: 4, base_seed: seed, backend, ..Default::default() };
            run_trajectories(&s, n, &o).unwrap()
        };
        let (a, b) = (run(Backend::StateVector), run(Backend::Gaussian));
        prop_assert_eq!(&a.jump_counts, &b.jump_counts);
        // The two RK4 propagators differ at O(dt⁴), up to ~3e-8 at γ = 2.5.
        for (x, y) in a.mean.iter().flatten().zip(b.mean.iter().flatten()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn imbalance_is_antisymmetric_under_reflection(p in prop::collection::vec(0.0f64..1.0, 2..30)) {
        prop_assume!(p.len() % 2 == 0 && p.iter().sum::<f64>() > 1e-6);
        let r: Vec<f64> = p.iter().rev().copied().collect();
        prop_assert!((imbalance_of_profile(&p) + imbalance_of_profile(&r)).abs() < 1e-12);
    }
}
