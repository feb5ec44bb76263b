// The VAR(1) process has a closed-form CLT covariance. Compare it with the
// mBM estimate as n grows.
//
//     cargo run --release --example var1_oracle

use multiess::{batch_size, mbm, simulate_var1, BatchPolicy, Result, Var1Model};

pub fn run_example() -> Result<Vec<(usize, f64)>> {
    let model = Var1Model::benchmark();
    println!("Lyapunov residual {:.2e}", model.lyapunov_residual());
    println!("true Sigma diagonal {:?}", model.sigma_true.diagonal().iter().map(|d| (d * 100.0).round() / 100.0).collect::<Vec<_>>());

    let chain = simulate_var1(&model, 1_000_000, 3)?;
    let norm = model.sigma_true.frobenius_norm();
    let mut errors = Vec::new();
    for n in [10_000, 100_000, 1_000_000] {
        let est = mbm(&chain.prefix(n)?, batch_size(n, BatchPolicy::default()))?;
        let err = est.matrix.sub(&model.sigma_true).frobenius_norm() / norm;
        println!("n = {n:>8}: relative error {err:.4}");
        errors.push((n, err));
    }
    Ok(errors)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
