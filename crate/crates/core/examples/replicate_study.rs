// A small coverage study: three methods under the sequential rules on the
// VAR(1) benchmark, replications spread over the rayon pool.
//
//     cargo run --release --example replicate_study

use multiess::{coverage_study, Result, StudyReport, StudySpec};

const STUDY: &str = r#"
name = "var1-small"
replications = 20
seed_base = 500
alpha = 0.1
methods = ["mbm", "ubm_bonferroni", "ubm"]

[model]
kind = "var1"
p = 5

[design]
kind = "sequential"
epsilons = [0.1]
n_star = 1000
"#;

pub fn run_example() -> Result<StudyReport> {
    let spec = StudySpec::from_toml_str(STUDY)?;
    let report = coverage_study(&spec)?;
    print!("{}", report.render_table());
    Ok(report)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
