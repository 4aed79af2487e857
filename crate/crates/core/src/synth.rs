//! Synthetic tick feeds.
//!
//! Each stock's fair value follows a log random walk and its mid price
//! carries a mean-reverting (Ornstein-Uhlenbeck) deviation on top. Both
//! shocks mix a common market factor with an idiosyncratic one, so the
//! strength of cross-stock correlation is a single knob. Quotes and trades
//! arrive as independent Poisson processes per stock; prices are read off a
//! one-second state grid.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::market::{format_feed, TickEvent, MICROS_PER_SECOND};
use crate::strategy::{Stock, Universe};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_stocks: usize,
    pub days: usize,
    pub session_seconds: u64,
    /// Quote arrivals per stock per second.
    pub quote_rate: f64,
    /// Trade arrivals per stock per second.
    pub trade_rate: f64,
    pub price_min: f64,
    pub price_max: f64,
    pub min_lot: u64,
    pub tick_size: f64,
    pub half_spread_bps: f64,
    /// Fair-value volatility per √second, as a fraction of price.
    pub drift_vol: f64,
    /// Stationary standard deviation of the mid/fair-value gap.
    pub deviation_sd: f64,
    /// Reversion rate of the gap per second.
    pub reversion: f64,
    /// Weight of the common factor in every shock, in `[0, 1]`.
    pub market_correlation: f64,
    /// Largest trade size in lots; sizes are uniform on `1..=max_trade_lots`.
    pub max_trade_lots: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_stocks: 16,
            days: 8,
            session_seconds: 9000,
            quote_rate: 0.05,
            trade_rate: 0.05,
            price_min: 500.0,
            price_max: 5000.0,
            min_lot: 100,
            tick_size: 0.5,
            half_spread_bps: 2.0,
            drift_vol: 2e-4,
            deviation_sd: 0.01,
            reversion: 0.002,
            market_correlation: 0.3,
            max_trade_lots: 10,
        }
    }
}

impl SynthSpec {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            msg: e.message().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?, path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n_stocks == 0 || self.n_stocks > 9000 {
            return bad(format!(
                "n_stocks must be in 1..=9000, got {}",
                self.n_stocks
            ));
        }
        if self.session_seconds == 0 {
            return bad("session_seconds must be positive".into());
        }
        for (name, v) in [
            ("quote_rate", self.quote_rate),
            ("trade_rate", self.trade_rate),
            ("half_spread_bps", self.half_spread_bps),
            ("drift_vol", self.drift_vol),
            ("deviation_sd", self.deviation_sd),
            ("reversion", self.reversion),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.tick_size > 0.0 && self.tick_size.is_finite()) {
            return bad(format!(
                "tick_size must be positive, got {}",
                self.tick_size
            ));
        }
        if !(self.price_min >= 2.0 * self.tick_size && self.price_max >= self.price_min) {
            return bad("need 2 * tick_size <= price_min <= price_max".into());
        }
        if !(0.0..=1.0).contains(&self.market_correlation) {
            return bad(format!(
                "market_correlation must be in [0, 1], got {}",
                self.market_correlation
            ));
        }
        if self.min_lot == 0 || self.max_trade_lots == 0 {
            return bad("min_lot and max_trade_lots must be >= 1".into());
        }
        Ok(())
    }

    pub fn session_us(&self) -> i64 {
        self.session_seconds as i64 * MICROS_PER_SECOND
    }
}

/// Feed file stem for day `d` (zero-based): `day001`, `day002`, ...
pub fn day_name(d: usize) -> String {
    format!("day{:03}", d + 1)
}

fn round_to(x: f64, tick: f64) -> f64 {
    (x / tick).round() * tick
}

/// Generated universe plus one event list per day.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFeed {
    pub universe: Universe,
    pub days: Vec<Vec<TickEvent>>,
}

pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthFeed> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stocks = (0..spec.n_stocks)
        .map(|i| Stock {
            code: format!("{}", 1000 + i),
            base_price: round_to(
                rng.random_range(spec.price_min..=spec.price_max),
                spec.tick_size,
            ),
            min_lot: spec.min_lot,
        })
        .collect();
    let universe = Universe::new(stocks)?;

    let mut fair: Vec<f64> = vec![0.0; spec.n_stocks];
    let mut days = Vec::with_capacity(spec.days);
    for d in 0..spec.days {
        let mut day_rng = ChaCha8Rng::seed_from_u64(seed);
        day_rng.set_stream(d as u64 + 1);
        days.push(generate_day(spec, &universe, &mut fair, &mut day_rng));
    }
    Ok(SynthFeed { universe, days })
}

/// One session. `fair` holds the log fair-value offsets and carries over
/// between days.
fn generate_day(
    spec: &SynthSpec,
    universe: &Universe,
    fair: &mut [f64],
    rng: &mut ChaCha8Rng,
) -> Vec<TickEvent> {
    let n = spec.n_stocks;
    let secs = spec.session_seconds as usize;
    let rho = spec.market_correlation;
    let (wm, wi) = (rho.sqrt(), (1.0 - rho).sqrt());
    let decay = (-spec.reversion).exp();
    let gap_kick = spec.deviation_sd * (1.0 - decay * decay).sqrt();

    // mids[k * n + i]: mid of stock i during second k.
    let mut mids = vec![0.0; secs * n];
    let mut gap: Vec<f64> = (0..n)
        .map(|_| spec.deviation_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    for k in 0..secs {
        let zm: f64 = rng.sample(StandardNormal);
        let wmk: f64 = rng.sample(StandardNormal);
        for i in 0..n {
            let zi: f64 = rng.sample(StandardNormal);
            let wik: f64 = rng.sample(StandardNormal);
            let base = universe.stock(i).base_price;
            mids[k * n + i] = base * fair[i].exp() * (1.0 + gap[i]);
            gap[i] = gap[i] * decay + gap_kick * (wm * zm + wi * zi);
            fair[i] += spec.drift_vol * (wm * wmk + wi * wik);
        }
    }

    let session = spec.session_us();
    let arrivals = |rate: f64, rng: &mut ChaCha8Rng| -> Vec<i64> {
        let mut out = Vec::new();
        if rate <= 0.0 {
            return out;
        }
        let exp = Exp::new(rate).expect("positive rate");
        let mut t = 0.0;
        loop {
            t += exp.sample(rng);
            let ts = (t * MICROS_PER_SECOND as f64) as i64;
            if ts >= session {
                return out;
            }
            out.push(ts);
        }
    };

    let half = spec.half_spread_bps * 1e-4;
    let tick = spec.tick_size;
    let quote_at = |mid: f64| {
        let bid = ((mid * (1.0 - half) / tick).floor() * tick).max(tick);
        let ask = ((mid * (1.0 + half) / tick).ceil() * tick).max(bid + tick);
        (ask, bid)
    };

    // (ts, stock, order within stock) keeps the sort total and stable.
    let mut keyed: Vec<(i64, usize, usize, TickEvent)> = Vec::new();
    for i in 0..n {
        let code = &universe.stock(i).code;
        let mid_at = |ts: i64| mids[(ts / MICROS_PER_SECOND) as usize * n + i];
        let (ask, bid) = quote_at(mid_at(0));
        keyed.push((0, i, 0, TickEvent::quote(0, code.as_str(), ask, bid)));
        for ts in arrivals(spec.quote_rate, rng) {
            let (ask, bid) = quote_at(mid_at(ts));
            keyed.push((
                ts,
                i,
                keyed.len(),
                TickEvent::quote(ts, code.as_str(), ask, bid),
            ));
        }
        for ts in arrivals(spec.trade_rate, rng) {
            let (ask, bid) = quote_at(mid_at(ts));
            let price = if rng.random::<bool>() { ask } else { bid };
            let volume = spec.min_lot * rng.random_range(1..=spec.max_trade_lots);
            keyed.push((
                ts,
                i,
                keyed.len(),
                TickEvent::trade(ts, code.as_str(), price, volume),
            ));
        }
    }
    keyed.sort_by_key(|(ts, i, k, _)| (*ts, *i, *k));
    keyed.into_iter().map(|(_, _, _, e)| e).collect()
}

/// Writes `universe.csv` and `feeds/dayNNN.csv` under `out`.
pub fn write_synth(out: &Path, feed: &SynthFeed) -> Result<()> {
    let feeds = out.join("feeds");
    std::fs::create_dir_all(&feeds)?;
    feed.universe.write_csv(&out.join("universe.csv"))?;
    for (d, events) in feed.days.iter().enumerate() {
        std::fs::write(
            feeds.join(format!("{}.csv", day_name(d))),
            format_feed(events),
        )?;
    }
    Ok(())
}

/// Hand-built event lists for engineered scenarios.
#[derive(Debug, Clone, Default)]
pub struct FeedBuilder {
    events: Vec<TickEvent>,
}

impl FeedBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn quote(mut self, ts: i64, code: &str, ask: f64, bid: f64) -> Self {
        self.events.push(TickEvent::quote(ts, code, ask, bid));
        self
    }

    pub fn trade(mut self, ts: i64, code: &str, price: f64, volume: u64) -> Self {
        self.events.push(TickEvent::trade(ts, code, price, volume));
        self
    }

    pub fn extend(mut self, events: impl IntoIterator<Item = TickEvent>) -> Self {
        self.events.extend(events);
        self
    }

    /// Events sorted by timestamp; equal timestamps keep insertion order.
    pub fn build(mut self) -> Vec<TickEvent> {
        self.events.sort_by_key(|e| e.ts);
        self.events
    }
}

/// Quotes for one stock whose mid moves linearly from `base·(1 + from)` to
/// `base·(1 + to)` in `steps` equal steps over `[start, end]`, with a fixed
/// half spread. With the VWAP pinned at `base` this is a deviation path that
/// crosses zero once when `from` and `to` have opposite signs.
pub fn linear_mid_path(
    code: &str,
    base: f64,
    from: f64,
    to: f64,
    half_spread: f64,
    steps: usize,
    start: i64,
    end: i64,
) -> Vec<TickEvent> {
    let steps = steps.max(1);
    (0..=steps)
        .map(|k| {
            let f = k as f64 / steps as f64;
            let ts = start + ((end - start) as f64 * f) as i64;
            let mid = base * (1.0 + from + (to - from) * f);
            TickEvent::quote(ts, code, mid + half_spread, mid - half_spread)
        })
        .collect()
}
