use crossnet::dynamics::{
    eval_rhs, integrate, rhs_inf_norm, IntegratorConfig, NetworkState, SktNetwork, POSITIVITY_SLACK,
};
use crossnet::experiments::{ensemble_report, SweepParameter, SweepSpec};
use crossnet::graphs::{gen_path, gen_ring, GraphFamily, GraphSpec};
use crossnet::spectra::{
    eig_symmetric, path_spectrum_closed_form, ring_spectrum_closed_form, stats_from_spectra,
    SpectralStats,
};
use crossnet::stability::{
    analyze, characteristic_matrix, classify_modes, det_polynomials, Equilibrium, GeneralModel,
    SktParams,
};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = GraphFamily> {
    prop_oneof![
        (3usize..40)
            .prop_flat_map(|n| (Just(n), 1..=(n - 1) / 2))
            .prop_map(|(n, k)| GraphFamily::Ring { n, k }),
        (2usize..40).prop_map(|n| GraphFamily::Path { n }),
        (2usize..7, 2usize..7)
            .prop_map(|(rows, cols)| GraphFamily::TriangularLattice { rows, cols }),
        (2usize..7, 2usize..7).prop_map(|(rows, cols)| GraphFamily::SquareLattice { rows, cols }),
        (2usize..7, 2usize..7)
            .prop_map(|(rows, cols)| GraphFamily::HexagonalLattice { rows, cols }),
        (5usize..20, 0usize..3).prop_map(|(h, d)| GraphFamily::RegularRandom {
            n: 2 * h,
            degree: d + 2
        }),
        (8usize..40, 1usize..4, 0.0..1.0f64).prop_map(|(n, k, p)| GraphFamily::WattsStrogatz {
            n,
            k,
            p
        }),
        (2usize..40, 0.0..1.0f64).prop_map(|(n, p)| GraphFamily::ErdosRenyi { n, p }),
        (5usize..40, 1usize..4).prop_map(|(n, m)| GraphFamily::BarabasiAlbert { n, m }),
    ]
}

fn weak_params() -> impl Strategy<Value = SktParams> {
    (
        (
            1.0..6.0f64,
            1.0..6.0f64,
            1.0..4.0f64,
            1.0..4.0f64,
            0.0..1.5f64,
            0.0..1.5f64,
        ),
        (
            0.0..0.5f64,
            0.0..0.5f64,
            0.0..1.0f64,
            0.0..1.0f64,
            0.0..4.0f64,
            0.0..4.0f64,
        ),
    )
        .prop_map(
            |((r1, r2, a1, a2, b1, b2), (d1, d2, d11, d22, d12, d21))| SktParams {
                r1,
                r2,
                a1,
                a2,
                b1,
                b2,
                d1,
                d2,
                d11,
                d22,
                d12,
                d21,
            },
        )
        .prop_filter("weak competition with coexistence", |p| {
            Equilibrium::skt(p).is_ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_invariants(fam in family(), seed in any::<u64>()) {
        let spec = GraphSpec::new(fam).with_seed(seed);
        let g = spec.generate().unwrap();
        prop_assert_eq!(&g, &spec.generate().unwrap());
        let l = g.laplacian();
        let n = l.dim();
        for i in 0..n {
            prop_assert_eq!((0..n).map(|j| l.get(i, j)).sum::<f64>(), 0.0);
            for j in 0..n {
                prop_assert_eq!(l.get(i, j), l.get(j, i));
            }
        }
        prop_assert_eq!(l.trace(), 2.0 * g.n_edges() as f64);

        let s = eig_symmetric(&l, n <= 30).unwrap();
        prop_assert!(s.eigenvalues[0].abs() < 1e-9);
        prop_assert!(s.eigenvalues.iter().all(|&x| x >= -1e-9 && x <= n as f64 + 1e-9));
        let sum: f64 = s.eigenvalues.iter().sum();
        prop_assert!((sum - l.trace()).abs() <= 1e-8 * n as f64);
        if s.eigenvectors.is_some() {
            for a in 0..n {
                let va = s.eigenvector(a).unwrap();
                let mut lv = vec![0.0; n];
                l.apply(&va, &mut lv);
                for i in 0..n {
                    prop_assert!((lv[i] - s.eigenvalues[a] * va[i]).abs() < 1e-9);
                }
                for b in a..n {
                    let vb = s.eigenvector(b).unwrap();
                    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn homogeneous_equilibrium_is_fixed_point(fam in family(), seed in any::<u64>(), p in weak_params()) {
        let g = GraphSpec::new(fam).with_seed(seed).generate().unwrap();
        let eq = Equilibrium::skt(&p).unwrap();
        let model = SktNetwork::new(p, g.laplacian()).unwrap();
        let state = NetworkState::homogeneous(g.n_nodes(), eq.u_star, eq.v_star);
        let (du, dv) = eval_rhs(&model, &state).unwrap();
        prop_assert!(rhs_inf_norm(&du, &dv) < 1e-12);
    }

    #[test]
    fn determinant_expansions_agree(p in weak_params(), lambda in 0.0..80.0f64) {
        let eq = Equilibrium::skt(&p).unwrap();
        let poly = det_polynomials(&p, &eq);
        let m = characteristic_matrix(&eq.jacobian, &eq.diffusion, lambda).unwrap();
        let direct = m.det();
        let scale = direct.abs().max(1.0);
        prop_assert!((poly.eval_lambda(lambda) - direct).abs() <= 1e-10 * scale);
        if let Some(e) = poly.in_d {
            prop_assert!((e.eval(lambda, p.d1) - direct).abs() <= 1e-10 * scale);
        }
        prop_assert!(m.trace() < 0.0);
    }

    #[test]
    fn region_matches_determinant_sign(p in weak_params()) {
        let rep = analyze(&p, None).unwrap();
        let eq = Equilibrium::skt(&p).unwrap();
        prop_assert!(classify_modes(&[0.0], &rep).is_empty());
        for i in 0..2000 {
            let lambda = i as f64 * 0.05;
            let det = characteristic_matrix(&eq.jacobian, &eq.diffusion, lambda).unwrap().det();
            let inside = rep.region().is_some_and(|(lo, hi)| lambda > lo && lambda < hi);
            let near_edge = rep
                .region()
                .is_some_and(|(lo, hi)| (lambda - lo).abs() < 1e-6 || (lambda - hi).abs() < 1e-6);
            if !near_edge {
                prop_assert_eq!(inside, det < 0.0, "lambda = {}", lambda);
            }
        }
    }

    #[test]
    fn general_framework_reproduces_skt(p in weak_params()) {
        let p = SktParams { d11: 0.0, d22: 0.0, ..p };
        let eq = Equilibrium::skt(&p).unwrap();
        let m = GeneralModel::from_skt(&p);
        let d = m.diffusion_linearization(eq.u_star, eq.v_star);
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((d.0[i][j] - eq.diffusion.0[i][j]).abs() < 1e-6);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn closed_forms_match_numeric(n in 3usize..=200, kk in 1usize..=25) {
        let k = kk.min((n - 1) / 2);
        let mut closed = ring_spectrum_closed_form(n, k).unwrap();
        closed.sort_by(f64::total_cmp);
        let numeric = eig_symmetric(&gen_ring(n, k).unwrap().laplacian(), false).unwrap().eigenvalues;
        for (a, b) in closed.iter().zip(&numeric) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
        let closed = path_spectrum_closed_form(n).unwrap();
        let numeric = eig_symmetric(&gen_path(n).unwrap().laplacian(), false).unwrap().eigenvalues;
        for (a, b) in closed.iter().zip(&numeric) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn positivity_from_nonnegative_data(
        fam in family(),
        seed in any::<u64>(),
        p in weak_params(),
        data in proptest::collection::vec(0.0..3.0f64, 80),
    ) {
        let g = GraphSpec::new(fam).with_seed(seed).generate().unwrap();
        let n = g.n_nodes();
        let u: Vec<f64> = data[..n].iter().map(|&x| if x < 0.3 { 0.0 } else { x }).collect();
        let v: Vec<f64> = data[40..40 + n].to_vec();
        let cfg = IntegratorConfig { t_max: 20.0, sample_stride: 1, ..Default::default() };
        let model = SktNetwork::new(p, g.laplacian()).unwrap();
        let res = integrate(&model, &NetworkState::new(0.0, u, v).unwrap(), &cfg).unwrap();
        prop_assert!(!res.positivity_violation);
        let floor = -POSITIVITY_SLACK * cfg.abs_tol;
        prop_assert!(res.trajectory.iter().all(|s| s.min_entry() >= floor));
        if res.converged {
            let (du, dv) = eval_rhs(&model, &res.final_state).unwrap();
            prop_assert!(rhs_inf_norm(&du, &dv) <= cfg.steady_state_tol);
        }
    }

    #[test]
    fn stats_merge_order_independent(
        spectra in proptest::collection::vec(proptest::collection::vec(0.0..50.0f64, 6), 1..40),
        cuts in proptest::collection::vec(any::<prop::sample::Index>(), 0..5),
    ) {
        let spectra: Vec<Vec<f64>> = spectra.into_iter().map(|mut s| { s.sort_by(f64::total_cmp); s }).collect();
        let whole = stats_from_spectra(&spectra);
        let mut bounds: Vec<usize> = cuts.iter().map(|c| c.index(spectra.len() + 1)).collect();
        bounds.extend([0, spectra.len()]);
        bounds.sort_unstable();
        let mut parts: Vec<SpectralStats> = bounds
            .windows(2)
            .map(|w| {
                let mut s = SpectralStats::new(6);
                for x in &spectra[w[0]..w[1]] {
                    s.push(x);
                }
                s
            })
            .collect();
        parts.reverse();
        let mut merged = SpectralStats::new(6);
        for p in &parts {
            merged.merge(p);
        }
        prop_assert_eq!(merged.realizations, whole.realizations);
        for (a, b) in merged.mean.iter().zip(&whole.mean) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in merged.variance().iter().zip(whole.variance()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn ensemble_independent_of_thread_count() {
    let mut spec = SweepSpec::new(
        GraphSpec::new(GraphFamily::WattsStrogatz {
            n: 40,
            k: 3,
            p: 0.2,
        }),
        SweepParameter::P,
        vec![0.1, 0.3],
    );
    spec.realizations = 24;
    spec.seed = 5;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ensemble_report(&spec).unwrap())
    };
    assert_eq!(run(1), run(4));
}
