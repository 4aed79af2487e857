//! The strategy Hamiltonian keeps the correlation part fixed for the day and
//! refreshes only the deviation terms on each tick. Day writes grow as
//! n² and tick writes as n, so the ratio printed here grows with n.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sbtrade::bench::random_instance;
use sbtrade::strategy::{build_split, StrategyParams};

fn main() -> sbtrade::Result<()> {
    let params = StrategyParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (dev, corr) = random_instance(64, &mut rng);
    let (next_dev, _) = random_instance(64, &mut rng);

    let morning = build_split(&dev, &corr, &params)?;
    let tick = morning.update_tick(next_dev.sgn(), next_dev.abs())?;

    assert!(Arc::ptr_eq(morning.day(), tick.day()));
    let w = tick.writes();
    println!("day writes  {}", w.day);
    println!(
        "tick writes {} (per update {})",
        w.tick,
        w.tick - morning.writes().tick
    );
    println!(
        "ratio       {:.1}",
        w.day as f64 / (w.tick - morning.writes().tick) as f64
    );
    Ok(())
}
