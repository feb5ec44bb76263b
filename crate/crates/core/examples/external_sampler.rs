// A sampler living in another program writes its chain to disk; the rule
// state is kept between evaluations (the `stop --chain --resume` flow).
//
//     cargo run --release --example external_sampler

use multiess::{
    load_chain, simulate_var1, write_chain, ChainFormat, ResumeOutcome, ResumeState, Result, StoppingConfig,
    Var1Model,
};

pub fn run_example() -> Result<usize> {
    let model = Var1Model::benchmark();
    // stands in for the external program's full output
    let full = simulate_var1(&model, 400_000, 99)?;
    let dir = std::env::temp_dir().join(format!("multiess-external-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("chain.csv");

    let mut state = ResumeState::new(StoppingConfig::new(0.1, 0.1, 1000))?;
    let mut have = 500;
    let stopped_at = loop {
        let mut buf = Vec::new();
        write_chain(&full.prefix(have)?, &mut buf, ChainFormat::Csv)?;
        std::fs::write(&path, &buf)?;

        let chain = load_chain(std::io::BufReader::new(std::fs::File::open(&path)?), ChainFormat::Csv)?;
        match state.step(&chain) {
            ResumeOutcome::NeedMore { next_checkpoint, .. } => {
                println!("{have} rows on disk, need {next_checkpoint}");
                have = next_checkpoint;
            }
            ResumeOutcome::Continue { checkpoint, next_checkpoint } => {
                println!("n = {}: not yet, next at {next_checkpoint}", checkpoint.n);
                have = next_checkpoint;
            }
            ResumeOutcome::Terminated { checkpoint } => {
                println!("n = {}: rule met, ESS {:.0}", checkpoint.n, checkpoint.ess.unwrap_or(f64::NAN));
                break checkpoint.n;
            }
        }
        if have > full.n() {
            break full.n();
        }
    };
    // the state round-trips through JSON, as the CLI sidecar does
    let json = serde_json::to_string(&state).expect("state serializes");
    let back: ResumeState = serde_json::from_str(&json).expect("state parses");
    assert_eq!(back, state);
    std::fs::remove_dir_all(&dir)?;
    Ok(stopped_at)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
