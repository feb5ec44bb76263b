// Multivariate ESS of a correlated VAR(1) chain against the minimum ESS
// needed for a 90% region with relative precision eps = .05.
//
//     cargo run --release --example ess_report

use multiess::{ess_report, min_ess, simulate_var1, BatchPolicy, EssReport, Result, Var1Model};

pub fn run_example() -> Result<EssReport> {
    let model = Var1Model::benchmark();
    let chain = simulate_var1(&model, 50_000, 7)?;
    let report = ess_report(&chain, BatchPolicy::Exponent(0.5), 0.1, 0.05)?;

    println!("n = {}, p = {}", report.n, report.p);
    println!("batch size {} x {} batches", report.batch_size, report.batch_count);
    println!("multivariate ESS   {:>10.1}", report.ess_multivariate);
    for (i, e) in report.ess_univariate.iter().enumerate() {
        println!("  component {i} ESS  {e:>10.1}");
    }
    println!("minimum ESS        {:>10.0}", report.min_ess.ceil());
    println!("enough samples: {}", report.sufficient);

    // the threshold depends only on (p, alpha, eps)
    println!("for reference, p = 5, alpha = .05, eps = .05 needs {:.0}", min_ess(5, 0.05, 0.05)?.round());
    Ok(report)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
