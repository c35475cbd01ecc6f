use ndarray::Array1;
use ndarray_linalg::Eig;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use skinlab::model::{self, plane_wave, Boundary, ModelSpec};
use skinlab::perturb::*;
use skinlab::superop::{vectorize, Lindbladian};

fn ring(l: usize, g: f64, fb: bool) -> ModelSpec {
    ModelSpec::new(l, Boundary::Pbc, g, fb).unwrap()
}

/// Exact eigenvector of 𝓛₀ + ε𝓛₁ continuing the pair `p`, normalized so
/// that its overlap with |k⟩⊗|k′⟩* is one.
fn exact_mode(spec: &ModelSpec, p: MomentumPair, eps: f64) -> Array1<C64> {
    let base = Lindbladian::from_spec(spec).unwrap();
    let lv = Lindbladian::new(
        base.basis,
        base.h_eff.clone(),
        base.jumps.clone(),
        spec.gamma * eps,
    );
    let m = vectorize(&lv).unwrap().entries;
    let (vals, vecs) = m.eig().unwrap();
    let target = zeroth_order_pbc(p, spec.gamma)
        + eps * spec.gamma * first_order_pbc(p, spec.gamma, spec.feedback);
    let best = (0..vals.len())
        .min_by(|&a, &b| {
            (vals[a] - target)
                .norm()
                .total_cmp(&(vals[b] - target).norm())
        })
        .unwrap();
    let l = spec.l;
    let (u, v) = (plane_wave(l, p.j), plane_wave(l, p.jp));
    let v0 = Array1::from_shape_fn(l * l, |k| u[k / l] * v[k % l].conj());
    let x = vecs.column(best).to_owned();
    let ov: C64 = v0.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum();
    x.mapv(|z| z / ov)
}

#[test]
fn eigenvector_correction_matches_finite_difference_in_the_jump_coupling() {
    let h = 1e-4;
    for fb in [true, false] {
        let s = ring(6, 0.5, fb);
        let singles: Vec<MomentumPair> = degeneracy_classes_pbc(6)
            .into_iter()
            .filter(|c| c.len() == 1)
            .map(|c| c[0])
            .collect();
        let mut checked = 0;
        let mut largest = 0.0f64;
        for p in singles.into_iter().filter(|p| p.j != p.jp) {
            let corr = first_order_eigenvector_pbc(p, &s).unwrap();
            let plus = exact_mode(&s, p, h);
            let minus = exact_mode(&s, p, -h);
            let fd = (&plus - &minus).mapv(|z| z / (2.0 * h));
            let err = fd
                .iter()
                .zip(corr.iter())
                .map(|(a, b)| (a - b * s.gamma).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-4, "fb={fb} pair ({}, {}): {err:e}", p.j, p.jp);
            checked += 1;
            largest = largest.max(corr.iter().map(|z| z.norm()).fold(0.0, f64::max) * s.gamma);
        }
        assert!(checked >= 4);
        assert!(largest > 1e-2, "{largest}");
    }
}

#[test]
fn eigenvector_correction_decays_with_size() {
    // Fixed momenta k = π/2, k′ = π; the measured decay is close to L^{-1/2}.
    let mut ls = Vec::new();
    let mut norms = Vec::new();
    for l in (8..=32).step_by(4) {
        let s = ring(l, 0.5, true);
        let p = MomentumPair::new(l as i64 / 4, l as i64 / 2, l);
        let c = first_order_eigenvector_pbc(p, &s).unwrap();
        ls.push(l as f64);
        norms.push(s.gamma * c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    }
    let slope = skinlab::dynamics::log_log_slope(&ls, &norms);
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    assert!((-0.65..=-0.35).contains(&slope), "slope {slope}");
}

#[test]
fn first_order_spectrum_tracks_exact_at_weak_monitoring() {
    let s = ring(12, 0.01, true);
    let ps = first_order_spectrum(&s).unwrap();
    let exact =
        skinlab::superop::model_eigenvalues(&s, skinlab::superop::Precision::Double).unwrap();
    let m = ps.match_exact(&exact.eigenvalues);
    assert!(m.max_distance < 2e-3, "{}", m.max_distance);
}

#[test]
fn hamiltonian_commutes_with_total_loss_under_pbc() {
    for fb in [true, false] {
        let s = ring(9, 0.7, fb);
        let h = model::build_hamiltonian(&s).unwrap().entries;
        let loss = model::build_jump_operators(&s)
            .unwrap()
            .iter()
            .fold(ndarray::Array2::<C64>::zeros((9, 9)), |acc, j| {
                acc + j.adjoint().entries.dot(&j.entries)
            });
        let c = h.dot(&loss) - loss.dot(&h);
        assert!(c.iter().all(|z| z.norm() < 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugation_symmetry_all_orders(l in 3usize..14, j in 1i64..14, jp in 1i64..14, g in 0.01f64..2.0, fb in any::<bool>()) {
        let s = ring(l, g, fb);
        let p = MomentumPair::new(j, jp, l);
        let q = MomentumPair::new(jp, j, l);
        prop_assert!((zeroth_order_pbc(p, g) - zeroth_order_pbc(q, g).conj()).norm() < 1e-14);
        prop_assert!((first_order_pbc(p, g, fb) - first_order_pbc(q, g, fb).conj()).norm() < 1e-14);
        if let (Ok(a), Ok(b)) = (second_order_pbc(p, &s), second_order_pbc(q, &s)) {
            prop_assert!((a - b.conj()).norm() < 1e-10 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn diagonal_pairs_decay(l in 2usize..40, j in 1i64..40, g in 0.0f64..3.0) {
        let z = zeroth_order_pbc(MomentumPair::new(j, j, l), g);
        prop_assert!(z.im.abs() < 1e-15 && z.re <= 1e-15);
    }

    #[test]
    fn classes_partition_all_pairs(l in 2usize..24) {
        let classes = degeneracy_classes_pbc(l);
        let mut all: Vec<MomentumPair> = classes.iter().flatten().copied().collect();
        prop_assert_eq!(all.len(), l * l);
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), l * l);
    }

    #[test]
    fn obc_zeroth_order_real_part_below_one_is_minus_gamma(k in 0.0f64..3.2, kp in 0.0f64..3.2, g in 0.0f64..0.99) {
        prop_assert!((zeroth_order_obc(k, kp, g).re + g).abs() < 1e-14);
    }
}
