// Confidence ellipsoid for the mean of a VAR(1) chain: volume, membership
// of the true mean, simultaneous Scheffe intervals, and a 2-D boundary.
//
//     cargo run --release --example confidence_region

use multiess::{simulate_var1, BatchPolicy, ConfidenceRegion, Result, UnivariateBox, Var1Model};

pub struct RegionExample {
    pub region: ConfidenceRegion,
    pub covers_truth: bool,
    pub boundary: Vec<(f64, f64)>,
    pub box_volume_root: f64,
}

pub fn run_example() -> Result<RegionExample> {
    let model = Var1Model::benchmark();
    let chain = simulate_var1(&model, 100_000, 11)?;
    let region = ConfidenceRegion::from_chain(&chain, BatchPolicy::default(), 0.1)?;
    let truth = vec![0.0; 5];
    let covers_truth = region.contains(&truth)?;

    let s = region.summary();
    println!("90% region from n = {} draws, {} batches of {}", s.n, s.batch_count, s.batch_size);
    println!("T^2 cutoff {:.4}, log volume {:.4}, volume^(1/p) {:.5}", s.cutoff, s.log_volume, s.volume_root);
    println!("contains the true mean: {covers_truth}");

    for i in 0..region.p() {
        let mut a = vec![0.0; region.p()];
        a[i] = 1.0;
        let (lo, hi) = region.scheffe_interval(&a)?;
        println!("  theta_{i} in ({lo:+.4}, {hi:+.4})");
    }
    let (lo, hi) = region.scheffe_interval(&[1.0, -1.0, 0.0, 0.0, 0.0])?;
    println!("  theta_0 - theta_1 in ({lo:+.4}, {hi:+.4})");

    let boundary = region.ellipse_boundary(0, 1, 60)?;
    println!("boundary of the (0, 1) marginal region, first points:");
    for (x, y) in boundary.iter().take(3) {
        println!("  {x:+.5}, {y:+.5}");
    }

    let bx = UnivariateBox::from_chain(&chain, region.shape.batch_size, 0.1, true)?;
    println!("Bonferroni box volume^(1/p) {:.5}", bx.volume_root());
    Ok(RegionExample {
        region,
        covers_truth,
        boundary,
        box_volume_root: bx.volume_root(),
    })
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
