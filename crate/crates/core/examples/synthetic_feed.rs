//! Generate a reproducible tick feed and write it in the replay format.

use sbtrade::market::MarketState;
use sbtrade::synth::{generate, write_synth, SynthSpec};

fn main() -> sbtrade::Result<()> {
    let spec = SynthSpec {
        n_stocks: 4,
        days: 2,
        session_seconds: 600,
        ..SynthSpec::default()
    };
    let feed = generate(&spec, 42)?;

    for (d, events) in feed.days.iter().enumerate() {
        let mut m = MarketState::new(feed.universe.clone());
        let mut changes = 0;
        for e in events {
            changes += m.apply_event(e)?.is_some() as usize;
        }
        println!("day {d}: {} events, {changes} quote changes", events.len());
    }

    let dir = std::env::temp_dir().join("sbtrade-synthetic-feed");
    write_synth(&dir, &feed)?;
    println!("written to {}", dir.display());
    Ok(())
}
