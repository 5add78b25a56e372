use proptest::prelude::*;
use roughpde::measures::{
    build_drift, evaluate_xi, sample_reference, GaussianReference, PcnSampler, PotentialPair, XiScheme,
};
use roughpde::rng::StreamId;
use roughpde::rough::SmoothMap;

/// `G_i(u) = Σ_j a_ij sin(u_j + b_i)`, `F(u) = Σ_i c_i cos u_i`.
fn random_pair(n: usize, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> PotentialPair {
    let (a2, b2) = (a.clone(), b.clone());
    let (a3, b3) = (a.clone(), b.clone());
    let g = SmoothMap::new(
        n,
        n,
        move |u, _, o| {
            for i in 0..n {
                o[i] = (0..n).map(|j| a[i * n + j] * (u[j] + b[i]).sin()).sum();
            }
        },
        move |u, _, o| {
            for i in 0..n {
                for j in 0..n {
                    o[i * n + j] = a2[i * n + j] * (u[j] + b2[i]).cos();
                }
            }
        },
    )
    .with_hessian(move |u, _, o| {
        o.fill(0.0);
        for i in 0..n {
            for j in 0..n {
                o[(i * n + j) * n + j] = -a3[i * n + j] * (u[j] + b3[i]).sin();
            }
        }
    });
    let (c2, c3) = (c.clone(), c.clone());
    let f = SmoothMap::new(
        n,
        1,
        move |u, _, o| o[0] = (0..n).map(|i| c[i] * u[i].cos()).sum(),
        move |u, _, o| {
            for i in 0..n {
                o[i] = -c2[i] * u[i].sin();
            }
        },
    )
    .with_hessian(move |u, _, o| {
        o.fill(0.0);
        for i in 0..n {
            o[i * n + i] = -c3[i] * u[i].cos();
        }
    });
    PotentialPair::new(g, f).unwrap()
}

fn pair_strategy() -> impl Strategy<Value = PotentialPair> {
    (1usize..4).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0..1.0f64, n * n),
            prop::collection::vec(0.0..6.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
        )
            .prop_map(move |(a, b, c)| random_pair(n, a, b, c))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn drift_coupling_is_antisymmetric(pair in pair_strategy(), u in prop::collection::vec(-5.0..5.0f64, 3)) {
        let n = pair.dim();
        let (_, g) = build_drift(&pair);
        let m = g.eval(&u[..n], 0.3);
        for i in 0..n {
            prop_assert_eq!(m[i * n + i], 0.0);
            for j in 0..n {
                prop_assert_eq!(m[i * n + j], -m[j * n + i]);
            }
        }
        if n == 1 {
            prop_assert_eq!(m[0], 0.0);
        }
    }

    #[test]
    fn xi_is_invariant_under_cyclic_relabelling(pair in pair_strategy(), seed in 0u64..1000, shift in 1usize..32) {
        let m = 32;
        let n = pair.dim();
        let reference = GaussianReference::for_grid(m, n, 0.0).unwrap();
        let w = sample_reference(&reference, m, &mut StreamId::new(seed, 0).rng()).unwrap();
        let mut rolled = vec![0.0; w.len()];
        for c in 0..n {
            for j in 0..m {
                rolled[c * m + j] = w[c * m + (j + shift) % m];
            }
        }
        // F here does not depend on x, so relabelling is a symmetry
        for scheme in [XiScheme::Midpoint, XiScheme::Trapezoid] {
            prop_assert_eq!(evaluate_xi(&w, m, &pair, scheme), evaluate_xi(&rolled, m, &pair, scheme));
        }
    }

    #[test]
    fn flat_potential_accepts_every_proposal(rho in 0.01..1.0f64, n in 1usize..4, seed in 0u64..1000) {
        let pair = PotentialPair::zero(n);
        let mut rng = StreamId::new(seed, 1).rng();
        let reference = GaussianReference::for_grid(16, n, 0.0).unwrap();
        let mut chain = PcnSampler::new(reference, &pair, 16, rho, &mut rng).unwrap();
        for _ in 0..50 {
            chain.step(&mut rng).unwrap();
        }
        prop_assert_eq!(chain.acceptance_rate(), 1.0);
    }
}

#[test]
fn sampler_rejects_bad_step_size() {
    let pair = PotentialPair::zero(1);
    let mut rng = StreamId::new(0, 0).rng();
    for rho in [0.0, -0.5, 1.5, f64::NAN] {
        let reference = GaussianReference::for_grid(16, 1, 0.0).unwrap();
        assert!(PcnSampler::new(reference, &pair, 16, rho, &mut rng).is_err());
    }
}
