use agnostic_core::regret::{
    dyadic_net, epsilon_efficiency_certificate, regret_profile, CostVector, EfficiencyVerdict,
};
use agnostic_core::{
    minimax_prior_search, regret, solve_bellman_shared, worst_case_regret, Atom, DiscretePrior, McParams,
    MinimaxConfig, RegretKind, Scenario, SolverGrid, Strategy,
};

fn grid() -> SolverGrid {
    SolverGrid::with_cfl(4.0, 81, 6.0, 21, 6.0, 11, 1.0, 11, 1.0, 3.0).unwrap()
}

fn mc(n_paths: usize) -> McParams {
    McParams {
        n_paths,
        dt: 0.01,
        seed: 21,
    }
}

fn scenario() -> Scenario {
    Scenario::new(1.0, 1.0).unwrap()
}

fn bayes(atoms: &[(f64, f64)]) -> Strategy {
    let prior = DiscretePrior::normalized(atoms.iter().map(|&(a, p)| Atom { a, p }).collect(), 1.0).unwrap();
    Strategy::bayes(solve_bellman_shared(&prior, &grid()).unwrap())
}

#[test]
fn search_certificate_and_challenger_comparison() {
    let net = [-1.0, 0.0, 1.0];
    let kind = RegretKind::Additive;
    let mut cfg = MinimaxConfig::new(0.05, 1.0, grid(), mc(3000));
    cfg.max_rounds = 25;
    let sol = minimax_prior_search(&net, kind, &scenario(), &cfg).unwrap();
    assert!(sol.certified, "{}", sol.report_text());

    let low = sol
        .profile
        .iter()
        .filter(|r| sol.support.contains(&r.a))
        .min_by(|x, y| x.regret.total_cmp(&y.regret))
        .unwrap();
    let top = sol.profile.iter().max_by(|x, y| x.regret.total_cmp(&y.regret)).unwrap();
    let se = (top.std_error.powi(2) + low.std_error.powi(2)).sqrt();
    assert!(top.regret <= low.regret + sol.epsilon + 2.0 * se);

    let uniform = DiscretePrior::normalized(net.iter().map(|&a| Atom { a, p: 1.0 }).collect(), 1.0).unwrap();
    for challenger in [
        Strategy::certainty_equivalent(uniform),
        Strategy::KnownA(0.0),
        Strategy::KnownA(1.0),
    ] {
        let found = sol.support.iter().any(|&a0| {
            let ours = regret(&sol.strategy, a0, kind, &scenario(), &cfg.mc).unwrap();
            let theirs = regret(&challenger, a0, kind, &scenario(), &cfg.mc).unwrap();
            let se = (ours.std_error.powi(2) + theirs.std_error.powi(2)).sqrt();
            ours.regret <= theirs.regret + sol.epsilon + 2.0 * se
        });
        assert!(found, "{} beats the solution on its whole support", challenger.label());
    }
}

#[test]
fn dropping_a_negligible_atom_barely_changes_worst_case_regret() {
    let net = [-1.0, 0.0, 1.0];
    let kind = RegretKind::Hybrid(1.0);
    let params = mc(3000);
    let with_atom = bayes(&[(-1.0, 0.49995), (0.0, 5e-5), (1.0, 0.5)]);
    let pruned = bayes(&[(-1.0, 0.5), (1.0, 0.5)]);
    let x = worst_case_regret(&with_atom, &net, kind, &scenario(), &params).unwrap();
    let y = worst_case_regret(&pruned, &net, kind, &scenario(), &params).unwrap();
    let se = (x.sup_std_error.powi(2) + y.sup_std_error.powi(2)).sqrt();
    assert!(y.sup - x.sup <= 0.05 + 2.0 * se, "{} vs {}", y.sup, x.sup);
}

#[test]
fn regret_profile_interpolates_smoothly_and_grows_past_the_interval() {
    let strategy = bayes(&[(-1.0, 0.5), (1.0, 0.5)]);
    let kind = RegretKind::Hybrid(1.0);
    let params = mc(4000);
    let coarse_net = dyadic_net(1.0, 2).unwrap();
    let fine_net = dyadic_net(1.0, 3).unwrap();
    let coarse = regret_profile(&strategy, &coarse_net, kind, &scenario(), &params).unwrap();
    let fine = regret_profile(&strategy, &fine_net, kind, &scenario(), &params).unwrap();
    for r in &fine {
        let i = coarse.partition_point(|c| c.a <= r.a).clamp(1, coarse.len() - 1);
        let (lo, hi) = (&coarse[i - 1], &coarse[i]);
        let w = (r.a - lo.a) / (hi.a - lo.a);
        let interp = (1.0 - w) * lo.regret + w * hi.regret;
        let se = (r.std_error.powi(2) + lo.std_error.max(hi.std_error).powi(2)).sqrt();
        assert!((r.regret - interp).abs() <= 3.0 * se, "a={}: {} vs {interp}", r.a, r.regret);
    }

    let outside = regret_profile(&strategy, &[1.5, 2.0, 2.5], kind, &scenario(), &params).unwrap();
    assert!(outside.windows(2).all(|w| w[1].regret > w[0].regret), "{outside:?}");
}

#[test]
fn known_drift_law_is_not_dominated_by_the_bayes_law() {
    let net = vec![-1.0, 1.0];
    let params = mc(4000);
    let candidate = CostVector::measure(&Strategy::KnownA(1.0), &net, &scenario(), &params).unwrap();
    let challenger = CostVector::measure(&bayes(&[(-1.0, 0.5), (1.0, 0.5)]), &net, &scenario(), &params).unwrap();
    let verdict = epsilon_efficiency_certificate(&candidate, &[challenger], 0.05).unwrap();
    assert_eq!(verdict, EfficiencyVerdict::Unfalsified);
}
