// Random-walk Metropolis on a Bayesian logistic regression posterior with
// the bundled dataset, followed by ESS and a region for the posterior mean.
//
//     cargo run --release --example logistic_rwm

use multiess::{
    column_means, ess_report, rwm_logistic, BatchPolicy, ConfidenceRegion, InitialState, LogisticModel, Result,
};

pub struct LogisticExample {
    pub mean: Vec<f64>,
    pub acceptance_rate: f64,
    pub ess: f64,
}

pub fn run_example() -> Result<LogisticExample> {
    let model = LogisticModel::bundled();
    let out = rwm_logistic(&model, 100_000, 42, InitialState::PriorDraw)?;
    let report = ess_report(&out.chain, BatchPolicy::default(), 0.1, 0.05)?;
    let region = ConfidenceRegion::from_chain(&out.chain, BatchPolicy::default(), 0.1)?;
    let mean = column_means(&out.chain).0;

    println!("acceptance rate {:.3}", out.acceptance_rate);
    println!("posterior mean {:?}", mean.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>());
    println!("ESS {:.0} of {} draws, minimum {:.0}", report.ess_multivariate, report.n, report.min_ess);
    println!("90% region volume^(1/p) {:.5}", region.volume_root());
    Ok(LogisticExample {
        mean,
        acceptance_rate: out.acceptance_rate,
        ess: report.ess_multivariate,
    })
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
