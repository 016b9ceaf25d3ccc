use congestion_tax::forge::{random_instance, RandomInstanceParams};
use congestion_tax::kernel::{mu_factor, poisson_kernel, rho_factor, KernelConfig};
use congestion_tax::learning::best_response_dynamics;
use congestion_tax::oracle::{enumerate_pure_nash, is_pure_nash, DEFAULT_ENUMERATION_CAP};
use congestion_tax::relaxation::{check_feasible, solve_relaxation, SolverOptions};
use congestion_tax::tax::{build_tax_profile, f_value};
use congestion_tax::{Allocation, BasisFunction, GameInstance, Resource, StepRule, TaxProfile};
use proptest::prelude::*;

fn mono(d: f64) -> BasisFunction {
    BasisFunction::monomial(d).unwrap()
}

fn small_instance(seed: u64, players: usize, resources: usize, degree: f64) -> GameInstance {
    let params = RandomInstanceParams {
        players,
        resources,
        basis: vec![mono(0.0), mono(degree)],
        strategy_count: (1, 3),
        strategy_size: (1, resources),
        coeff_range: (0.0, 2.0),
    };
    random_instance(&params, seed).unwrap()
}

fn instance_strategy() -> impl Strategy<Value = GameInstance> {
    (
        any::<u64>(),
        1usize..=4,
        2usize..=4,
        prop::sample::select(vec![0.5, 1.0, 2.0, 3.0]),
    )
        .prop_map(|(seed, n, m, d)| small_instance(seed, n, m, d))
}

fn allocation_for(g: &GameInstance, picks: &[usize]) -> Allocation {
    Allocation::new(
        g.strategy_counts()
            .iter()
            .zip(picks)
            .map(|(&s, &p)| p % s)
            .collect(),
    )
}

fn designed_taxes(g: &GameInstance) -> TaxProfile {
    let cfg = KernelConfig::default();
    let opts = SolverOptions {
        step_rule: StepRule::Pairwise,
        ..SolverOptions::default()
    };
    let fp = solve_relaxation(g, &opts, &cfg).unwrap();
    build_tax_profile(g, &fp.v, &cfg).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn social_cost_is_sum_of_player_costs(g in instance_strategy(), picks in prop::collection::vec(0usize..3, 4)) {
        let a = allocation_for(&g, &picks);
        let sc = g.social_cost(&a).unwrap();
        let total: f64 = (0..g.num_players()).map(|i| g.player_cost(None, &a, i).unwrap()).sum();
        prop_assert!((sc - total).abs() <= 1e-9 * sc.max(1.0));
    }

    #[test]
    fn potential_tracks_unilateral_deviations(
        g in instance_strategy(),
        picks in prop::collection::vec(0usize..3, 4),
        mover in 0usize..4,
        target in 0usize..3,
        taxed in any::<bool>(),
    ) {
        let taxes = if taxed { Some(designed_taxes(&g)) } else { None };
        let a = allocation_for(&g, &picks);
        let i = mover % g.num_players();
        let mut choices = a.choices.clone();
        choices[i] = target % g.strategies(i).len();
        let b = Allocation::new(choices);
        let d_phi = g.rosenthal_potential(taxes.as_ref(), &b).unwrap() - g.rosenthal_potential(taxes.as_ref(), &a).unwrap();
        let d_cost = g.player_cost(taxes.as_ref(), &b, i).unwrap() - g.player_cost(taxes.as_ref(), &a, i).unwrap();
        prop_assert!((d_phi - d_cost).abs() <= 1e-9 * d_cost.abs().max(1.0));
    }

    #[test]
    fn tax_function_identities(d in 0.0f64..3.0, v in 0.05f64..8.0) {
        let cfg = KernelConfig::default();
        let b = mono(d);
        let p = poisson_kernel(&b, v, &cfg).unwrap();
        let f: Vec<f64> = (0..=26).map(|x| f_value(&b, x, v, &cfg).unwrap()).collect();
        for x in 0..=25usize {
            let residual = (v * f[x + 1] - x as f64 * f[x] - p + b.cost(x)).abs() / p.max(1.0);
            let round = 1e-12 * f[x + 1].abs().max(1.0);
            prop_assert!(residual <= 1e-8, "residual {} at x = {}", residual, x);
            prop_assert!(f[x + 1] >= f[x] - round, "f decreases at x = {}", x);
            prop_assert!(f[x] >= b.value(x) - round, "f below b at x = {}", x);
        }
    }

    #[test]
    fn equilibria_survive_cost_scaling(g in instance_strategy(), scale in 0.1f64..10.0) {
        let scaled_resources: Vec<Resource> = g
            .resources()
            .iter()
            .map(|r| Resource { coeffs: r.coeffs.iter().map(|c| c * scale).collect() })
            .collect();
        let h = GameInstance::new(g.basis().to_vec(), scaled_resources, g.players().to_vec()).unwrap();
        let ne_g = enumerate_pure_nash(&g, None, DEFAULT_ENUMERATION_CAP).unwrap();
        let ne_h = enumerate_pure_nash(&h, None, DEFAULT_ENUMERATION_CAP).unwrap();
        prop_assert_eq!(ne_g, ne_h);
    }

    #[test]
    fn best_response_fixpoints_are_equilibria(g in instance_strategy(), seed in any::<u64>(), taxed in any::<bool>()) {
        let taxes = if taxed { Some(designed_taxes(&g)) } else { None };
        let out = best_response_dynamics(&g, taxes.as_ref(), None, seed, 100_000).unwrap();
        prop_assert!(is_pure_nash(&g, taxes.as_ref(), &out.allocation).unwrap());
        prop_assert!(out.potentials.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn generated_instances_are_well_formed(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=6, smax in 1usize..=4) {
        let params = RandomInstanceParams {
            players: n,
            resources: m,
            basis: vec![mono(1.0)],
            strategy_count: (1, smax),
            strategy_size: (1, m),
            coeff_range: (0.5, 1.5),
        };
        if smax > (1usize << m) - 1 {
            prop_assert!(matches!(random_instance(&params, seed), Err(congestion_tax::Error::InfeasibleParams(_))));
            return Ok(());
        }
        let g = random_instance(&params, seed).unwrap();
        prop_assert_eq!(g.num_players(), n);
        let mut used = vec![false; m];
        for p in g.players() {
            prop_assert!((1..=smax).contains(&p.strategies.len()));
            for (k, s) in p.strategies.iter().enumerate() {
                prop_assert!(!p.strategies[..k].contains(s));
                for &r in s {
                    used[r] = true;
                }
            }
        }
        prop_assert!(used.iter().all(|&u| u));
        let text = serde_json::to_string(&g).unwrap();
        let back: GameInstance = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn relaxation_iterates_stay_feasible(g in instance_strategy(), rule in prop::sample::select(vec![StepRule::Classic, StepRule::LineSearch, StepRule::Pairwise])) {
        let cfg = KernelConfig::default();
        let opts = SolverOptions { step_rule: rule, max_iters: 500, tol_gap: 1e-6 };
        let fp = match solve_relaxation(&g, &opts, &cfg) {
            Ok(fp) => fp,
            Err(congestion_tax::Error::MaxItersExceeded { best }) => *best,
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(check_feasible(&g, &fp.y).is_ok());
        prop_assert!(fp.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let tight = solve_relaxation(
            &g,
            &SolverOptions { step_rule: StepRule::Pairwise, tol_gap: 1e-10, max_iters: 10_000 },
            &cfg,
        );
        if let Ok(tight) = tight {
            prop_assert!(fp.objective - tight.objective <= fp.gap + 1e-9 * fp.objective.abs().max(1.0));
        }
    }

    #[test]
    fn taxed_profiles_round_trip(g in instance_strategy()) {
        let taxes = designed_taxes(&g);
        let text = serde_json::to_string(&taxes).unwrap();
        let back: TaxProfile = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, taxes);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn mu_dominates_rho(d in 0.0f64..3.0) {
        let cfg = KernelConfig::default();
        let b = mono(d);
        let rho = rho_factor(&b, 1000, &cfg).value();
        let mu = mu_factor(&b, &cfg).unwrap();
        prop_assert!(rho >= 1.0 - 1e-12);
        prop_assert!(mu >= rho * (1.0 - 1e-9));
    }
}
