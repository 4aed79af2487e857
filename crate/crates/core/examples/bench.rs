//! Solver timing at N = 128 and a small comparison against exhaustive
//! search. Run with `--release` for representative numbers.

use sbtrade::bench::{oracle_sweep, run_bench};
use sbtrade::sb::SbParams;
use sbtrade::strategy::StrategyParams;

fn main() -> sbtrade::Result<()> {
    let sb = SbParams::default();
    let strategy = StrategyParams::default();

    let r = run_bench(128, &sb, &strategy)?;
    println!("mean run {:?}, max run {:?}", r.mean_run(), r.max_run());
    println!("write ratio {:.1}", r.write_ratio());

    let sweep = oracle_sweep(10, 12, &sb, &strategy, 9)?;
    println!(
        "{}/{} optimal, worst gap {:.3}",
        sweep.optimal, sweep.instances, sweep.worst_gap
    );
    Ok(())
}
