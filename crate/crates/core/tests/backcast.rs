mod common;

use std::collections::HashMap;

use sbtrade::backcast::{run_backcast, BackcastOutput};
use sbtrade::config::RunConfig;
use sbtrade::engine::{Direction, LogAction};
use sbtrade::matrix::SquareMatrix;
use sbtrade::strategy::{Stock, Universe};
use sbtrade::synth::{day_name, generate, FeedBuilder, SynthSpec};

fn small_cfg(session_seconds: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.session.close = session_seconds as i64 * 1_000_000;
    cfg.sb.restarts = 3;
    cfg.warmup_days = 1;
    cfg
}

fn run(spec: &SynthSpec, seed: u64, cfg: &RunConfig) -> (Universe, BackcastOutput) {
    let feed = generate(spec, seed).unwrap();
    let days: Vec<_> = feed
        .days
        .iter()
        .enumerate()
        .map(|(d, e)| (day_name(d), e.clone()))
        .collect();
    let out = run_backcast(&feed.universe, cfg, Vec::new(), &days).unwrap();
    (feed.universe, out)
}

/// Day pnl rebuilt from the fill rows of the order log alone.
fn pnl_from_log(out: &BackcastOutput, universe: &Universe, commission_rate: f64) -> Vec<f64> {
    out.days
        .iter()
        .map(|day| {
            let mut entry: HashMap<&str, (Direction, f64, u64)> = HashMap::new();
            let mut pnl = 0.0;
            for r in &day.order_log {
                let lot = universe.stock(universe.index_of(&r.code).unwrap()).min_lot;
                let shares = (r.lots * lot) as f64;
                match r.action {
                    LogAction::OpenFill => {
                        entry.insert(&r.code, (r.direction, r.price, r.lots));
                        pnl -= commission_rate * r.price * shares;
                    }
                    LogAction::CloseFill => {
                        let (dir, open, lots) = entry.remove(r.code.as_str()).unwrap();
                        assert_eq!(lots, r.lots);
                        assert_ne!(dir, r.direction);
                        let sign = if dir == Direction::Buy { 1.0 } else { -1.0 };
                        pnl += sign * (r.price - open) * shares;
                        pnl -= commission_rate * r.price * shares;
                    }
                    _ => {}
                }
            }
            assert!(entry.is_empty(), "{}: positions left open", day.row.date);
            pnl
        })
        .collect()
}

#[test]
fn pnl_matches_order_log_accounting() {
    let spec = SynthSpec {
        n_stocks: 10,
        days: 3,
        session_seconds: 900,
        quote_rate: 0.3,
        trade_rate: 0.3,
        deviation_sd: 0.02,
        ..SynthSpec::default()
    };
    let mut cfg = small_cfg(900);
    cfg.commission_rate = 0.0002;
    let (universe, out) = run(&spec, 10, &cfg);
    let recomputed = pnl_from_log(&out, &universe, cfg.commission_rate);
    let mut trades = 0;
    for (row, pnl) in out.report.rows.iter().zip(recomputed) {
        assert!(
            (row.pnl - pnl).abs() <= 1e-6,
            "{}: {} vs {pnl}",
            row.date,
            row.pnl
        );
        trades += row.n_trades;
    }
    assert!(trades > 0, "fixture produced no trades");
    let cum = out.report.cumulative();
    let total: f64 = out.report.rows.iter().map(|r| r.pnl).sum();
    assert!((cum.last().unwrap().2 - total).abs() <= 1e-6);
}

#[test]
fn every_day_ends_flat() {
    let spec = SynthSpec {
        n_stocks: 12,
        days: 3,
        session_seconds: 900,
        quote_rate: 0.3,
        trade_rate: 0.3,
        ..SynthSpec::default()
    };
    let mut cfg = small_cfg(900);
    cfg.strategy.n_s = 2;
    cfg.strategy.p_max = 6;
    let (_, out) = run(&spec, 4, &cfg);
    for day in &out.days {
        common::audit_day(day, &cfg.strategy).unwrap();
    }
}

#[test]
fn warmup_days_do_not_trade() {
    let spec = SynthSpec {
        n_stocks: 8,
        days: 3,
        session_seconds: 300,
        quote_rate: 0.5,
        trade_rate: 0.5,
        ..SynthSpec::default()
    };
    let mut cfg = small_cfg(300);
    cfg.warmup_days = 2;
    let (_, out) = run(&spec, 1, &cfg);
    assert!(!out.report.rows[0].traded && !out.report.rows[1].traded);
    assert!(out.report.rows[2].traded);
    assert_eq!(out.report.rows[0].n_trades + out.report.rows[1].n_trades, 0);
}

/// Zero spread, zero commission and no mean reversion: the strategy has no
/// edge, so the mean pnl over many seeds must be statistically zero.
#[test]
fn random_walk_has_no_edge() {
    let spec = SynthSpec {
        n_stocks: 8,
        days: 2,
        session_seconds: 600,
        quote_rate: 0.5,
        trade_rate: 0.5,
        half_spread_bps: 0.0,
        tick_size: 1e-9,
        deviation_sd: 0.0,
        drift_vol: 5e-4,
        ..SynthSpec::default()
    };
    let mut cfg = small_cfg(600);
    cfg.strategy.accept_threshold = 1e9;
    let pnls: Vec<f64> = (0..30)
        .map(|seed| run(&spec, seed, &cfg).1.report.rows[1].pnl)
        .collect();
    let n = pnls.len() as f64;
    let mean = pnls.iter().sum::<f64>() / n;
    let sd = (pnls.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(sd > 0.0, "no trades at all");
    assert!(
        mean.abs() <= 3.0 * sd / n.sqrt(),
        "mean {mean}, se {}",
        sd / n.sqrt()
    );
}

#[test]
fn one_sided_market_never_trades() {
    let universe = Universe::new(
        (0..6)
            .map(|i| Stock {
                code: format!("S{i}"),
                base_price: 1000.0,
                min_lot: 100,
            })
            .collect(),
    )
    .unwrap();
    let mut b = FeedBuilder::new();
    for i in 0..6 {
        b = b.trade(0, &format!("S{i}"), 1000.0, 10_000);
    }
    // every stock trades below its VWAP: only long candidates
    for (k, i) in (0..6).cycle().take(60).enumerate() {
        let mid = 990.0 - k as f64 * 0.1;
        b = b.quote(
            2_000_000 + k as i64 * 1000,
            &format!("S{i}"),
            mid + 0.5,
            mid - 0.5,
        );
    }
    let cfg = small_cfg(600);
    let prior = vec![SquareMatrix::from_fn(
        6,
        |i, j| if i == j { 1.0 } else { 0.0 },
    )];
    let out = run_backcast(&universe, &cfg, prior, &[("d".into(), b.build())]).unwrap();
    assert!(out.report.rows[0].traded);
    assert_eq!(out.report.rows[0].n_trades, 0);
    assert_eq!(out.report.rows[0].pnl, 0.0);
}
