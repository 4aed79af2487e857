//! Tick feeds: the CSV schema, replay, best-quote buffer, VWAP
//! accumulation with one-second publishing, and per-second deviation
//! sampling for the correlation pipeline.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::strategy::{mid_price, StockSnapshot, Universe};

pub const MICROS_PER_SECOND: i64 = 1_000_000;

pub const FEED_HEADER: &str = "ts_us,code,kind,p1,p2";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Quote { ask: f64, bid: f64 },
    Trade { price: f64, volume: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickEvent {
    /// Microseconds since session open.
    pub ts: i64,
    pub code: String,
    pub kind: EventKind,
}

impl TickEvent {
    pub fn quote(ts: i64, code: impl Into<String>, ask: f64, bid: f64) -> Self {
        TickEvent {
            ts,
            code: code.into(),
            kind: EventKind::Quote { ask, bid },
        }
    }

    pub fn trade(ts: i64, code: impl Into<String>, price: f64, volume: u64) -> Self {
        TickEvent {
            ts,
            code: code.into(),
            kind: EventKind::Trade { price, volume },
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::parse(path, line, e.to_string())
}

/// Parses a feed, rejecting malformed rows and timestamp regressions.
pub fn parse_feed<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<TickEvent>> {
    #[derive(Deserialize)]
    struct Row {
        ts_us: i64,
        code: String,
        kind: String,
        p1: f64,
        p2: f64,
    }

    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?;
    if headers.iter().collect::<Vec<_>>().join(",") != FEED_HEADER {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `{FEED_HEADER}`"),
        ));
    }
    let mut events = Vec::new();
    let mut prev = i64::MIN;
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: Row = record
            .deserialize(None)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        if row.ts_us < prev {
            return Err(Error::TimestampRegression {
                line,
                ts: row.ts_us,
                prev,
            });
        }
        prev = row.ts_us;
        let kind = match row.kind.as_str() {
            "quote" => EventKind::Quote {
                ask: row.p1,
                bid: row.p2,
            },
            "trade" => {
                if !(row.p2 >= 1.0 && row.p2.fract() == 0.0 && row.p2 < u64::MAX as f64) {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("bad trade volume {}", row.p2),
                    ));
                }
                EventKind::Trade {
                    price: row.p1,
                    volume: row.p2 as u64,
                }
            }
            other => return Err(Error::parse(path, line, format!("unknown kind `{other}`"))),
        };
        events.push(TickEvent {
            ts: row.ts_us,
            code: row.code,
            kind,
        });
    }
    Ok(events)
}

/// Replays a feed file: every event in file order.
pub fn replay(path: &Path) -> Result<Vec<TickEvent>> {
    let file = std::fs::File::open(path)?;
    parse_feed(std::io::BufReader::new(file), path)
}

pub fn format_feed(events: &[TickEvent]) -> String {
    let mut out = String::with_capacity(32 * (events.len() + 1));
    out.push_str(FEED_HEADER);
    out.push('\n');
    for e in events {
        let _ = match e.kind {
            EventKind::Quote { ask, bid } => {
                writeln!(out, "{},{},quote,{},{}", e.ts, e.code, ask, bid)
            }
            EventKind::Trade { price, volume } => {
                writeln!(out, "{},{},trade,{},{}", e.ts, e.code, price, volume)
            }
        };
    }
    out
}

pub fn write_feed(path: &Path, events: &[TickEvent]) -> Result<()> {
    std::fs::write(path, format_feed(events))?;
    Ok(())
}

/// Latest best quote per stock.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceBuffer {
    quotes: Vec<Option<(f64, f64)>>,
}

impl PriceBuffer {
    pub fn new(n: usize) -> Self {
        PriceBuffer {
            quotes: vec![None; n],
        }
    }

    pub fn quote(&self, i: usize) -> Option<(f64, f64)> {
        self.quotes[i]
    }

    pub fn mid(&self, i: usize) -> Option<f64> {
        self.quotes[i].and_then(|(a, b)| mid_price(a, b).ok())
    }

    /// Returns whether ask or bid changed.
    fn update(&mut self, i: usize, ask: f64, bid: f64) -> bool {
        let changed = self.quotes[i] != Some((ask, bid));
        self.quotes[i] = Some((ask, bid));
        changed
    }
}

/// Cumulative `Σ price·volume` and `Σ volume` per stock, plus the snapshot
/// last published at the one-second cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct VwapAccumulator {
    notional: Vec<f64>,
    volume: Vec<u64>,
    base: Vec<f64>,
    published: Vec<f64>,
    traded_at_publish: Vec<bool>,
    last_publish: Option<i64>,
}

impl VwapAccumulator {
    /// `base` supplies the placeholder VWAP for stocks without trades.
    pub fn new(base: Vec<f64>) -> Self {
        let n = base.len();
        VwapAccumulator {
            notional: vec![0.0; n],
            volume: vec![0; n],
            published: base.clone(),
            traded_at_publish: vec![false; n],
            base,
            last_publish: None,
        }
    }

    pub fn add_trade(&mut self, i: usize, price: f64, volume: u64) {
        self.notional[i] += price * volume as f64;
        self.volume[i] += volume;
    }

    /// Live VWAP; `None` before the first trade.
    pub fn vwap(&self, i: usize) -> Option<f64> {
        (self.volume[i] > 0).then(|| self.notional[i] / self.volume[i] as f64)
    }

    pub fn volume(&self, i: usize) -> u64 {
        self.volume[i]
    }

    /// Snapshot as of the last publish.
    pub fn published(&self) -> &[f64] {
        &self.published
    }

    /// Whether stock `i` had trades at the last publish, i.e. its published
    /// value is a real VWAP rather than the base-price placeholder.
    pub fn is_traded(&self, i: usize) -> bool {
        self.traded_at_publish[i]
    }

    /// Publishes a new snapshot iff at least one second has passed since
    /// the previous one (the first call always publishes).
    pub fn publish(&mut self, now: i64) -> Option<&[f64]> {
        if let Some(last) = self.last_publish {
            if now - last < MICROS_PER_SECOND {
                return None;
            }
        }
        self.last_publish = Some(now);
        for i in 0..self.base.len() {
            self.published[i] = self.vwap(i).unwrap_or(self.base[i]);
            self.traded_at_publish[i] = self.volume[i] > 0;
        }
        Some(&self.published)
    }
}

/// Per-second `mid - VWAP` samples; `None` where the stock had no valid
/// quote or no trades yet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampledSeries {
    per_stock: Vec<Vec<Option<f64>>>,
}

impl SampledSeries {
    pub fn new(n: usize) -> Self {
        SampledSeries {
            per_stock: vec![Vec::new(); n],
        }
    }

    pub fn per_stock(&self) -> &[Vec<Option<f64>>] {
        &self.per_stock
    }

    pub fn sample_count(&self, i: usize) -> usize {
        self.per_stock[i].iter().filter(|s| s.is_some()).count()
    }

    pub fn push(&mut self, buffer: &PriceBuffer, acc: &VwapAccumulator) {
        for (i, series) in self.per_stock.iter_mut().enumerate() {
            let sample = match (buffer.mid(i), acc.vwap(i)) {
                (Some(mid), Some(vwap)) => Some(mid - vwap),
                _ => None,
            };
            series.push(sample);
        }
    }
}

/// Buffer, accumulator and sampler for one universe.
#[derive(Debug, Clone)]
pub struct MarketState {
    universe: Universe,
    buffer: PriceBuffer,
    vwap: VwapAccumulator,
    series: SampledSeries,
    rejected: u64,
}

impl MarketState {
    pub fn new(universe: Universe) -> Self {
        let n = universe.n();
        MarketState {
            buffer: PriceBuffer::new(n),
            vwap: VwapAccumulator::new(universe.base_prices()),
            series: SampledSeries::new(n),
            rejected: 0,
            universe,
        }
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn buffer(&self) -> &PriceBuffer {
        &self.buffer
    }

    pub fn vwap(&self) -> &VwapAccumulator {
        &self.vwap
    }

    pub fn series(&self) -> &SampledSeries {
        &self.series
    }

    pub fn into_series(self) -> SampledSeries {
        self.series
    }

    /// Count of crossed or non-positive quotes that were dropped.
    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    /// Applies one event. Returns the stock index when its ask or bid
    /// changed; trades only feed the VWAP and never report a change.
    pub fn apply_event(&mut self, e: &TickEvent) -> Result<Option<usize>> {
        let i = self
            .universe
            .index_of(&e.code)
            .ok_or_else(|| Error::UnknownCode(e.code.clone()))?;
        match e.kind {
            EventKind::Quote { ask, bid } => {
                if mid_price(ask, bid).is_err() {
                    self.rejected += 1;
                    return Ok(None);
                }
                Ok(self.buffer.update(i, ask, bid).then_some(i))
            }
            EventKind::Trade { price, volume } => {
                if price > 0.0 && price.is_finite() && volume > 0 {
                    self.vwap.add_trade(i, price, volume);
                } else {
                    self.rejected += 1;
                }
                Ok(None)
            }
        }
    }

    pub fn publish_vwap(&mut self, now: i64) -> bool {
        self.vwap.publish(now).is_some()
    }

    pub fn sample(&mut self) {
        self.series.push(&self.buffer, &self.vwap);
    }

    /// Quote plus published VWAP for every stock. Stocks still on the
    /// placeholder get no VWAP, so they are masked from selection.
    pub fn snapshot(&self) -> Vec<StockSnapshot> {
        (0..self.universe.n())
            .map(|i| StockSnapshot {
                quote: self.buffer.quote(i),
                vwap: self.vwap.is_traded(i).then(|| self.vwap.published()[i]),
            })
            .collect()
    }
}

/// Whole-second boundaries crossed as the clock advances.
#[derive(Debug, Clone)]
pub struct SecondClock {
    next: i64,
}

impl SecondClock {
    pub fn new(start: i64) -> Self {
        SecondClock {
            next: start.div_euclid(MICROS_PER_SECOND) * MICROS_PER_SECOND + MICROS_PER_SECOND,
        }
    }

    /// Boundaries `≤ ts` not yet reported, oldest first.
    pub fn advance(&mut self, ts: i64) -> impl Iterator<Item = i64> + '_ {
        std::iter::from_fn(move || {
            (self.next <= ts).then(|| {
                let b = self.next;
                self.next += MICROS_PER_SECOND;
                b
            })
        })
    }
}

/// Market state driven through one session: whole-second boundaries up to
/// the close publish the VWAP snapshot and append a sample before the event
/// that crosses them is applied.
#[derive(Debug, Clone)]
pub struct Replay {
    state: MarketState,
    clock: SecondClock,
    close: i64,
    events: u64,
}

impl Replay {
    pub fn new(universe: Universe, open: i64, close: i64) -> Self {
        let mut state = MarketState::new(universe);
        state.publish_vwap(open);
        Replay {
            state,
            clock: SecondClock::new(open),
            close,
            events: 0,
        }
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn step(&mut self, e: &TickEvent) -> Result<Option<usize>> {
        for b in self.clock.advance(e.ts.min(self.close)) {
            self.state.publish_vwap(b);
            self.state.sample();
        }
        self.events += 1;
        self.state.apply_event(e)
    }

    pub fn into_series(self) -> SampledSeries {
        self.state.into_series()
    }
}

/// Replays a whole day without trading and returns its sampled series.
pub fn sample_day(
    universe: &Universe,
    events: &[TickEvent],
    open: i64,
    close: i64,
) -> Result<SampledSeries> {
    let mut replay = Replay::new(universe.clone(), open, close);
    for e in events {
        replay.step(e)?;
    }
    Ok(replay.into_series())
}
