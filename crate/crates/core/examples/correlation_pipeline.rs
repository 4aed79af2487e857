//! From a few synthetic sessions to the averaged correlation matrix used
//! by the strategy.

use sbtrade::market::sample_day;
use sbtrade::strategy::{correlation_matrix, daily_correlation_matrix, CORRELATION_WINDOW};
use sbtrade::synth::{generate, SynthSpec};

fn main() -> sbtrade::Result<()> {
    let spec = SynthSpec {
        n_stocks: 6,
        days: CORRELATION_WINDOW,
        session_seconds: 1800,
        market_correlation: 0.6,
        ..SynthSpec::default()
    };
    let feed = generate(&spec, 2)?;

    let mut daily = Vec::new();
    for events in &feed.days {
        let series = sample_day(&feed.universe, events, 0, spec.session_us())?;
        daily.push(daily_correlation_matrix(series.per_stock()));
    }
    let corr = correlation_matrix(&daily, CORRELATION_WINDOW)?;

    for i in 0..corr.n() {
        let row: Vec<String> = (0..corr.n())
            .map(|j| format!("{:.4}", corr.get(i, j)))
            .collect();
        println!("{}", row.join(" "));
    }
    Ok(())
}
