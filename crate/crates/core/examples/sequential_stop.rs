// Run a VAR(1) sampler until the relative standard deviation rule is met,
// then the same stream under the Bonferroni univariate rule.
//
//     cargo run --release --example sequential_stop

use std::sync::Arc;

use multiess::{
    min_ess, run_sequential, Result, StoppingConfig, StoppingMetric, StoppingResult, Var1Model,
};

pub fn run_example() -> Result<(StoppingResult, StoppingResult)> {
    let model = Arc::new(Var1Model::benchmark());
    let config = StoppingConfig::new(0.1, 0.1, 1000);

    let mut sampler = model.sampler(2024);
    let multi = run_sequential(&mut sampler, &config)?.result;
    println!("relative-sd rule, eps = {}: stopped at n = {}", config.epsilon, multi.n_final);
    println!("  ESS {:.0} (minimum {:.0})", multi.ess_at_termination.unwrap_or(f64::NAN), min_ess(5, 0.1, 0.1)?);
    println!("  {} checkpoints", multi.checkpoints);

    let uni_config = config.clone().with_metric(StoppingMetric::UnivariateBonferroni);
    let mut sampler = model.sampler(2024);
    let uni = run_sequential(&mut sampler, &uni_config)?.result;
    println!("Bonferroni univariate rule: stopped at n = {}", uni.n_final);
    Ok((multi, uni))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
