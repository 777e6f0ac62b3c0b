use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use tremble::compiler::reference_f_eps;
use tremble::game::fixtures::{coordination3, matching_pennies, weak_domination};
use tremble::game::{is_eps_pe, ratio, Game, MixedProfile};
use tremble::solver::{
    approximate_pe, grid_oracle, grid_oracle_with_budget, residual, solve_fixed_point, SolveConfig, SolveError,
    SolveStatus,
};

fn near(x: &MixedProfile, blocks: &[Vec<(i64, i64)>], tol: BigRational) -> bool {
    let y = MixedProfile::from_ratios(blocks).unwrap();
    x.linf_distance(&y).unwrap() <= tol
}

#[test]
fn weak_domination_converges_to_known_fixed_point() {
    let out = solve_fixed_point(&weak_domination(), &ratio(1, 8), &SolveConfig::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    assert!(out.residual <= ratio(1, 1_000_000_000_000));
    assert!(near(
        &out.profile,
        &[vec![(7, 8), (1, 8)], vec![(7, 8), (1, 8)]],
        ratio(1, 1_000_000_000)
    ));
}

#[test]
fn matching_pennies_returns_uniform() {
    let out = solve_fixed_point(&matching_pennies(), &ratio(1, 10), &SolveConfig::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    assert_eq!(out.profile, MixedProfile::uniform(&[2, 2]));
    assert!(out.residual.is_zero());
}

#[test]
fn coordination_converges() {
    let out = solve_fixed_point(&coordination3(), &ratio(1, 16), &SolveConfig::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    assert!(near(
        &out.profile,
        &vec![vec![(15, 16), (1, 16)]; 3],
        ratio(1, 1_000_000_000)
    ));
}

#[test]
fn relaxed_certificate_holds_on_solutions() {
    let cfg = SolveConfig::default();
    for (g, eps) in [
        (weak_domination(), ratio(1, 8)),
        (matching_pennies(), ratio(1, 10)),
        (coordination3(), ratio(1, 16)),
    ] {
        let out = solve_fixed_point(&g, &eps, &cfg).unwrap();
        let max_m = *g.strategy_counts().iter().max().unwrap() as i64;
        let slack = &cfg.residual_tol * BigRational::from_integer((2 + max_m).into());
        assert!(is_eps_pe(&g, &out.profile, &eps, &slack).unwrap().0);
    }
}

#[test]
fn pipeline_refines_to_perfect_equilibrium() {
    let delta = ratio(1, 1000);
    let out = approximate_pe(&weak_domination(), &delta, &SolveConfig::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    assert!(near(
        &out.profile,
        &[vec![(1, 1), (0, 1)], vec![(1, 1), (0, 1)]],
        delta.clone()
    ));
    assert!(!near(
        &out.profile,
        &[vec![(0, 1), (1, 1)], vec![(0, 1), (1, 1)]],
        ratio(1, 2)
    ));
    for w in out.trace.stages.windows(2) {
        assert_eq!(&w[0].eps / BigRational::from_integer(2.into()), w[1].eps);
    }

    let out = approximate_pe(&matching_pennies(), &delta, &SolveConfig::default()).unwrap();
    assert!(near(
        &out.profile,
        &[vec![(1, 2), (1, 2)], vec![(1, 2), (1, 2)]],
        delta.clone()
    ));

    let out = approximate_pe(&coordination3(), &delta, &SolveConfig::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    assert!(near(&out.profile, &vec![vec![(1, 1), (0, 1)]; 3], delta));
}

#[test]
fn trace_residuals_match_snapshots() {
    let out = approximate_pe(&weak_domination(), &ratio(1, 100), &SolveConfig::default()).unwrap();
    for stage in &out.trace.stages {
        assert_eq!(
            residual(&weak_domination(), &stage.profile, &stage.eps).unwrap(),
            stage.residual
        );
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let g = Game::from_integers(
        vec![3, 2],
        &[vec![3, 0], vec![0, 2], vec![1, 1], vec![2, 3], vec![0, 1], vec![2, 0]],
    )
    .unwrap();
    let base = SolveConfig {
        seed: 7,
        ..SolveConfig::default()
    };
    let one = approximate_pe(
        &g,
        &ratio(1, 100),
        &SolveConfig {
            threads: Some(1),
            ..base.clone()
        },
    )
    .unwrap();
    let four = approximate_pe(
        &g,
        &ratio(1, 100),
        &SolveConfig {
            threads: Some(4),
            ..base
        },
    )
    .unwrap();
    assert_eq!(one.trace.to_string(), four.trace.to_string());
}

#[test]
fn grid_oracle_examples() {
    let g = weak_domination();
    let x = grid_oracle(&g, &ratio(1, 8), 64).unwrap();
    assert!(near(&x, &[vec![(7, 8), (1, 8)], vec![(7, 8), (1, 8)]], ratio(1, 64)));
    let x = grid_oracle(&matching_pennies(), &ratio(1, 10), 64).unwrap();
    assert!(near(&x, &[vec![(1, 2), (1, 2)], vec![(1, 2), (1, 2)]], ratio(1, 64)));
    let coarse = grid_oracle(&g, &ratio(1, 8), 1).unwrap();
    assert!(residual(&g, &coarse, &ratio(1, 8)).unwrap().is_positive());
    assert!(matches!(
        grid_oracle_with_budget(&coordination3(), &ratio(1, 16), 64, 1000),
        Err(SolveError::GridTooLarge { .. })
    ));
}

fn arb_two_player() -> impl Strategy<Value = Game> {
    prop::collection::vec(prop::collection::vec(-3i64..=3, 2), 4)
        .prop_map(|rows| Game::from_integers(vec![2, 2], &rows).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn damped_combinations_stay_above_alpha_eps(g in arb_two_player(), a in 0i64..=16, b in 0i64..=16) {
        let eps = ratio(1, 8);
        let alpha = ratio(1, 2);
        let x = MixedProfile::from_ratios(&[vec![(a, 16), (16 - a, 16)], vec![(b, 16), (16 - b, 16)]]).unwrap();
        let fx = reference_f_eps(&g, &x, &eps).unwrap();
        prop_assert!(fx.min_probability() >= eps);
        let mixed: Vec<BigRational> = x
            .flatten()
            .iter()
            .zip(fx.flatten())
            .map(|(u, v)| (BigRational::from_integer(1.into()) - &alpha) * u + &alpha * v)
            .collect();
        prop_assert!(mixed.iter().all(|v| *v >= &alpha * &eps));
    }

    #[test]
    fn residual_is_relabeling_invariant(g in arb_two_player(), a in 0i64..=16, b in 0i64..=16) {
        let eps = ratio(1, 10);
        let x = MixedProfile::from_ratios(&[vec![(a, 16), (16 - a, 16)], vec![(b, 16), (16 - b, 16)]]).unwrap();
        // swap player 1's strategies
        let rows: Vec<Vec<BigRational>> = g
            .profiles()
            .map(|mut p| {
                p[0] = 1 - p[0];
                vec![g.payoff(&p, 0).clone(), g.payoff(&p, 1).clone()]
            })
            .collect();
        let swapped = Game::new(vec![2, 2], rows).unwrap();
        let mut blocks = x.blocks().to_vec();
        blocks[0].reverse();
        let sx = MixedProfile::new(blocks).unwrap();
        prop_assert_eq!(residual(&g, &x, &eps).unwrap(), residual(&swapped, &sx, &eps).unwrap());
    }
}
