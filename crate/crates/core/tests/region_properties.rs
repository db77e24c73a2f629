use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vendingrd_core::closed_form::{appendix_b_policy, case1_r1, case3_r1, CaseTag, ExampleCase};
use vendingrd_core::model::binary_erasure_spec;
use vendingrd_core::prob::check_markov;
use vendingrd_core::region::{assemble_joint, evaluate_point, minimize_r1, sweep_gamma, OptimizerConfig, Targets};
use vendingrd_core::{var, ErasureParams, Policy, ProblemSpec};

fn spec(eps: f64) -> ProblemSpec {
    binary_erasure_spec(ErasureParams::new(eps).unwrap())
}

fn perm(n: usize, shift: usize) -> Vec<usize> {
    (0..n).map(|i| (i + shift) % n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn relabeling_is_invisible(seed in any::<u64>(), nu in 1usize..5, nv in 1usize..5, su in 0usize..5, sv in 0usize..5) {
        let s = spec(0.3);
        let p = Policy::random(&s, nu, nv, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let q = p.permuted(&perm(nu, su), &perm(nv, sv)).unwrap();
        let (a, b) = (evaluate_point(&s, &p).unwrap(), evaluate_point(&s, &q).unwrap());
        for (x, y) in [(a.r1, b.r1), (a.r2, b.r2), (a.d1, b.d1), (a.d2, b.d2), (a.gamma, b.gamma)] {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn assembled_joints_are_markov(seed in any::<u64>(), eps in 0.0f64..1.0) {
        let s = spec(eps);
        let p = Policy::random(&s, 3, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let j = assemble_joint(&s, &p).unwrap();
        prop_assert!(check_markov(&j, &[var::U], &[var::Z, var::A], &[var::Y], 1e-10).unwrap().holds);
        prop_assert!(check_markov(&j, &[var::V], &[var::A, var::U, var::Y], &[var::X], 1e-10).unwrap().holds);
    }

    #[test]
    fn rates_are_non_negative(seed in any::<u64>(), nu in 1usize..6, nv in 1usize..6) {
        let s = spec(0.2);
        let p = Policy::random(&s, nu, nv, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let pt = evaluate_point(&s, &p).unwrap();
        prop_assert!(pt.r1 >= 0.0 && pt.r2 >= 0.0);
        prop_assert!((0.0..=1.0).contains(&pt.gamma));
        prop_assert!(pt.d1 <= 0.5 + 1e-12 && pt.d2 <= 1.0);
    }

    #[test]
    fn case1_family_respects_the_converse(p0 in 0.0f64..1.0, p1 in 0.0f64..1.0, pe in 0.0f64..1.0, eps in 0.05f64..0.95) {
        let s = spec(eps);
        let pa = [p0, p1, pe];
        let p = Policy::from_fn(
            &s,
            s.z().renamed(var::U),
            vendingrd_core::Alphabet::indexed(var::V, "v", 1).unwrap(),
            |z, a, u, _| if u != z { 0.0 } else if a == 1 { pa[z] } else { 1.0 - pa[z] },
            |_, _, _, _, _| 1.0,
        ).unwrap();
        let pt = evaluate_point(&s, &p).unwrap();
        prop_assert_eq!(pt.d2, 0.0);
        prop_assert!(pt.r1 >= case1_r1(eps, pt.gamma) - 1e-9);
    }
}

#[test]
fn seeds_are_never_beaten_for_the_worse() {
    let s = spec(0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = OptimizerConfig {
        restarts: 3,
        max_iters: 60,
        penalty_schedule: vec![1e2, 1e4, 1e6],
        cardinality_override: Some((3, 3)),
        ..OptimizerConfig::default()
    };
    for _ in 0..4 {
        let seeds: Vec<Policy> = (0..2).map(|_| Policy::random(&s, 2, 3, &mut rng).unwrap()).collect();
        let pts: Vec<_> = seeds.iter().map(|p| evaluate_point(&s, p).unwrap()).collect();
        let t = Targets {
            d1: pts[0].d1.max(pts[1].d1),
            d2: pts[0].d2.max(pts[1].d2),
            d3: None,
            gamma: pts[0].gamma.max(pts[1].gamma),
        };
        let o = minimize_r1(&s, &t, &cfg, &seeds).unwrap();
        assert!(o.point.r1 <= pts[0].r1.min(pts[1].r1) + 1e-12);
    }
}

#[test]
fn seeded_case3_sweep_tracks_the_closed_form() {
    let s = spec(0.2);
    let t = Targets { d1: 0.0, d2: 0.0, d3: None, gamma: 0.0 };
    let grid = [0.2, 0.4, 0.6, 0.8, 1.0];
    let cfg = OptimizerConfig { restarts: 1, ..OptimizerConfig::default() };
    let seeds = |g: f64| vec![appendix_b_policy(&ExampleCase::new(CaseTag::Case3, 0.2, g, None).unwrap()).unwrap()];
    let pts = sweep_gamma(&s, &t, &grid, &cfg, &seeds).unwrap();
    for p in pts {
        let r1 = p.optimum.unwrap().point.r1;
        assert!((r1 - case3_r1(0.2, p.gamma).unwrap()).abs() < 1e-4, "gamma {}", p.gamma);
    }
}
