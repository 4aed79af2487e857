//! Drive the event loop by hand. Four stocks drift apart from their VWAP
//! and come back, and every order is filled at its quoted price.

use sbtrade::config::RunConfig;
use sbtrade::engine::{Engine, Fill};
use sbtrade::matrix::SquareMatrix;
use sbtrade::strategy::{CorrelationMatrix, Stock, Universe};
use sbtrade::synth::{linear_mid_path, FeedBuilder};

fn main() -> sbtrade::Result<()> {
    let codes = ["A", "B", "C", "D"];
    let universe = Universe::new(
        codes
            .iter()
            .map(|c| Stock {
                code: c.to_string(),
                base_price: 1000.0,
                min_lot: 100,
            })
            .collect(),
    )?;
    let corr = CorrelationMatrix::new(SquareMatrix::from_fn(
        4,
        |i, j| if i == j { 1.0 } else { 0.1 },
    ))?;

    let mut cfg = RunConfig::default();
    cfg.session.close = 600_000_000;
    cfg.strategy.n_s = 2;
    cfg.strategy.accept_threshold = -1.0;

    // trade every stock at 1000 so the VWAP is known, then move the mids
    let mut feed = FeedBuilder::new();
    for c in codes {
        feed = feed.trade(0, c, 1000.0, 1000);
    }
    let away = [-0.025, -0.02, 0.025, 0.02];
    for (c, d) in codes.iter().zip(away) {
        feed = feed.extend(linear_mid_path(
            c, 1000.0, 0.0, d, 0.5, 5, 2_000_000, 20_000_000,
        ));
        feed = feed.extend(linear_mid_path(
            c,
            1000.0,
            d,
            -0.2 * d,
            0.5,
            10,
            100_000_000,
            200_000_000,
        ));
    }
    let events = feed.build();

    let mut engine = Engine::new(universe, corr, cfg)?;
    for e in &events {
        for order in engine.on_event(e)? {
            let price = order.intended_price;
            engine.on_fill(Fill {
                order: order.id,
                price,
                ts: e.ts,
            })?;
        }
    }
    let last = events.last().map_or(0, |e| e.ts);
    for order in engine.finish(last) {
        engine.on_fill(Fill {
            order: order.id,
            price: order.intended_price,
            ts: last,
        })?;
    }

    for p in engine.positions() {
        println!(
            "{} {:?} lots {} pnl {:.0}",
            p.code,
            p.side,
            p.lots,
            p.pnl().unwrap_or(0.0)
        );
    }
    println!("{:?}", engine.stats());
    Ok(())
}
