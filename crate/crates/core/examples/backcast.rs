//! Multi-day backcast over a generated feed, with the first days used to
//! build correlation history.

use sbtrade::backcast::run_backcast;
use sbtrade::config::RunConfig;
use sbtrade::synth::{day_name, generate, SynthSpec};

fn main() -> sbtrade::Result<()> {
    let spec = SynthSpec {
        n_stocks: 12,
        days: 6,
        session_seconds: 1800,
        deviation_sd: 0.02,
        ..SynthSpec::default()
    };
    let feed = generate(&spec, 1)?;
    let days: Vec<_> = feed
        .days
        .iter()
        .enumerate()
        .map(|(d, e)| (day_name(d), e.clone()))
        .collect();

    let mut cfg = RunConfig::default();
    cfg.session.close = spec.session_us();
    cfg.warmup_days = 2;
    cfg.sb.restarts = 4;

    let out = run_backcast(&feed.universe, &cfg, Vec::new(), &days)?;
    print!("{}", out.report.format_rows());
    print!("{}", out.report.format_summary());
    Ok(())
}
