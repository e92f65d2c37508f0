//! Wall-clock timings. Hardware dependent, informational only.

use std::time::Instant;

use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ritm_core::authdict::verify_status;
use ritm_sim::experiments::{time_prove, SignedDictionary};
use ritm_sim::START;

#[derive(Parser)]
#[command(name = "ritm-bench", about = "Time prove and verify on a synthetic dictionary")]
struct Cli {
    #[arg(long, default_value_t = 339_557)]
    dict_size: usize,
    #[arg(long, default_value_t = 10_000)]
    calls: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    let t = Instant::now();
    let timing = time_prove(cli.dict_size, cli.calls, cli.seed);
    println!("dictionary size: {}", cli.dict_size);
    println!("prove: {} calls, mean {:.2} us", timing.calls, timing.mean().as_secs_f64() * 1e6);

    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let sd = SignedDictionary::random(cli.dict_size.max(1), &mut rng);
    let key = sd.key.public();
    let queries: Vec<_> = (0..cli.calls.min(2000)).map(|_| sd.absent_serial(&mut rng)).collect();
    let statuses: Vec<_> = queries
        .iter()
        .map(|q| sd.dict.prove(q, &sd.signed_root, &sd.freshness).expect("root matches"))
        .collect();
    let v = Instant::now();
    for (st, q) in statuses.iter().zip(&queries) {
        std::hint::black_box(verify_status(st, q, &key, START, 60));
    }
    let per = v.elapsed().as_secs_f64() / statuses.len().max(1) as f64;
    println!("verify: {} calls, mean {:.2} us", statuses.len(), per * 1e6);
    println!("total wall time: {:.2} s", t.elapsed().as_secs_f64());
}
