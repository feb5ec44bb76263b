use std::sync::Arc;

use multiess::stopping::{check_univariate, run_sequential_with};
use multiess::{
    default_nstar, evaluate, min_ess, run_sequential, simulate_var1, ChainSampler, Error, IidGaussianSampler,
    ResumeOutcome, ResumeState, StoppingConfig, StoppingMetric, TerminationReason, Var1Model,
};

#[test]
fn iid_terminates_near_min_ess() {
    let config = StoppingConfig::new(0.05, 0.1, 1000);
    let w = min_ess(5, 0.1, 0.05).unwrap();
    assert!((w - 7179.27).abs() < 0.5, "{w}");
    let finals: Vec<f64> = (0..20)
        .map(|seed| {
            let mut s = IidGaussianSampler::new(5, seed);
            run_sequential(&mut s, &config).unwrap().result.n_final as f64
        })
        .collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    assert!(mean > 0.9 * w && mean < 1.3 * w, "mean termination {mean}, threshold {w}");
}

#[test]
fn one_dimension_multivariate_equals_univariate() {
    let model = Var1Model::new(multiess::Matrix::diag(&[0.7]), multiess::Matrix::diag(&[1.0])).unwrap();
    let chain = simulate_var1(&model, 200_000, 5).unwrap();
    let config = StoppingConfig::new(0.02, 0.1, 1000);
    let mut n = 1000;
    while n <= chain.n() {
        let prefix = chain.prefix(n).unwrap();
        let multi = evaluate(&prefix, &config).verdict;
        let uni = check_univariate(&prefix, &config, false);
        let bonf = check_univariate(&prefix, &config, true);
        assert_eq!(multi, uni, "n = {n}");
        assert_eq!(uni, bonf, "n = {n}");
        n += n / 10;
    }
}

#[test]
fn huge_tolerance_stops_at_nstar() {
    let mut s = IidGaussianSampler::new(3, 1);
    let config = StoppingConfig::new(1e3, 0.1, 1234);
    let r = run_sequential(&mut s, &config).unwrap().result;
    assert!(r.terminated);
    assert_eq!(r.n_final, 1234);
    assert_eq!(r.checkpoints, 1);
    assert_eq!(r.reason, TerminationReason::CriterionMet);
}

#[test]
fn exhaustion_reports_partial_result() {
    let mut s = IidGaussianSampler::new(3, 1);
    let config = StoppingConfig {
        n_max: 5000,
        ..StoppingConfig::new(1e-4, 0.1, 1000)
    };
    let r = run_sequential(&mut s, &config).unwrap().result;
    assert!(!r.terminated);
    assert_eq!(r.n_final, 5000);
    assert_eq!(r.reason, TerminationReason::NMaxReached);
    assert!(r.ess_at_termination.is_some());
}

#[test]
fn byte_budget_is_enforced() {
    let mut s = IidGaussianSampler::new(10, 1);
    let config = StoppingConfig {
        byte_budget: 8 * 10 * 500,
        ..StoppingConfig::new(0.05, 0.1, 1000)
    };
    assert!(matches!(run_sequential(&mut s, &config), Err(Error::ChainTooLarge { .. })));
    let config = StoppingConfig {
        byte_budget: 8 * 10 * 3000,
        ..StoppingConfig::new(1e-4, 0.1, 1000)
    };
    let run = run_sequential(&mut s, &config).unwrap();
    assert_eq!(run.result.n_final, 3000);
    assert_eq!(run.result.reason, TerminationReason::NMaxReached);
}

#[test]
fn rule_is_never_evaluated_before_nstar() {
    let mut s = IidGaussianSampler::new(2, 9);
    let config = StoppingConfig::new(0.1, 0.1, 1500);
    let mut seen = Vec::new();
    run_sequential_with(&mut s, &config, |chain, cfg| {
        seen.push(chain.n());
        evaluate(chain, cfg)
    })
    .unwrap();
    assert_eq!(seen[0], 1500);
    for w in seen.windows(2) {
        assert_eq!(w[1], w[0] + (w[0] as f64 * 0.1).ceil() as usize);
    }
}

#[test]
fn tighter_tolerance_runs_longer() {
    let model = Arc::new(Var1Model::benchmark());
    let mean_final = |eps: f64, metric: StoppingMetric| {
        let config = StoppingConfig::new(eps, 0.1, 1000).with_metric(metric);
        (0..8)
            .map(|seed| run_sequential(&mut model.sampler(seed), &config).unwrap().result.n_final as f64)
            .sum::<f64>()
            / 8.0
    };
    let loose = mean_final(0.1, StoppingMetric::RelativeSd);
    let tight = mean_final(0.05, StoppingMetric::RelativeSd);
    assert!(tight > 2.5 * loose, "{loose} {tight}");
    assert!(mean_final(0.1, StoppingMetric::UnivariateBonferroni) > loose);
}

#[test]
fn resume_state_reproduces_in_process_run() {
    let model = Arc::new(Var1Model::benchmark());
    let config = StoppingConfig::new(0.1, 0.1, 1000);
    let direct = run_sequential(&mut model.sampler(31), &config).unwrap().result;

    let full = simulate_var1(&model, direct.n_final + 10, 31).unwrap();
    let mut state = ResumeState::new(config).unwrap();
    let mut have = 10;
    let n = loop {
        let chain = full.prefix(have).unwrap();
        let json = serde_json::to_string(&state).unwrap();
        state = serde_json::from_str(&json).unwrap();
        match state.step(&chain) {
            ResumeOutcome::NeedMore { next_checkpoint, .. } | ResumeOutcome::Continue { next_checkpoint, .. } => {
                have = next_checkpoint
            }
            ResumeOutcome::Terminated { checkpoint } => break checkpoint.n,
        }
    };
    assert_eq!(n, direct.n_final);
    assert_eq!(state.history.len(), direct.checkpoints);
}

#[test]
fn default_nstar_values() {
    use multiess::BatchPolicy;
    assert_eq!(default_nstar(5, 0.05, 0.05, BatchPolicy::Exponent(0.5)).unwrap(), 8605);
    assert_eq!(multiess::n_pos(5, BatchPolicy::Exponent(0.5)).unwrap(), 24);
    assert_eq!(multiess::n_pos(5, BatchPolicy::Fixed(100)).unwrap(), 600);
}

#[test]
fn sampler_dimension_zero_is_rejected() {
    struct Empty;
    impl ChainSampler for Empty {
        fn dim(&self) -> usize {
            0
        }
        fn extend(&mut self, _: usize, _: &mut Vec<f64>) -> multiess::Result<()> {
            Ok(())
        }
    }
    assert!(run_sequential(&mut Empty, &StoppingConfig::default()).is_err());
}
