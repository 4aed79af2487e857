//! Backcast simulation: replay per-day feeds through the engine with every
//! order filled immediately at its intended price, and account the result.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::engine::{format_order_log, Engine, Fill, LogRow, OpenedGroup, Position, PositionState};
use crate::error::{Error, Result};
use crate::market::{replay, sample_day, TickEvent};
use crate::matrix::SquareMatrix;
use crate::strategy::{correlation_matrix, daily_correlation_matrix, Universe};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Annualized statistics of a daily return series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpeStats {
    pub sharpe: f64,
    pub ann_return: f64,
    pub ann_risk: f64,
}

/// `None` for fewer than two returns or zero sample deviation.
pub fn sharpe(returns: &[f64], periods_per_year: f64) -> Option<SharpeStats> {
    let n = returns.len();
    if n < 2 {
        return None;
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    if !(std > 0.0) {
        return None;
    }
    let ann_return = mean * periods_per_year;
    let ann_risk = std * periods_per_year.sqrt();
    Some(SharpeStats {
        sharpe: ann_return / ann_risk,
        ann_return,
        ann_risk,
    })
}

/// Executed price times shares.
pub fn transaction_amount(price: f64, lots: u64, shares_per_lot: u64) -> f64 {
    price * (lots * shares_per_lot) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayRow {
    pub date: String,
    pub transaction_amount: f64,
    pub pnl: f64,
    pub n_trades: u64,
    pub commission: f64,
    pub traded: bool,
}

impl DayRow {
    fn empty(date: &str, traded: bool) -> Self {
        DayRow {
            date: date.to_string(),
            transaction_amount: 0.0,
            pnl: 0.0,
            n_trades: 0,
            commission: 0.0,
            traded,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DayResult {
    pub row: DayRow,
    pub order_log: Vec<LogRow>,
    pub positions: Vec<Position>,
    pub groups: Vec<OpenedGroup>,
    pub max_open: usize,
    /// Daily correlation factors of this day's sampled series.
    pub daily_corr: Option<SquareMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackcastReport {
    pub rows: Vec<DayRow>,
    pub capital: f64,
    pub sharpe: Option<SharpeStats>,
}

impl BackcastReport {
    /// Returns of the days that traded, as pnl over the fixed capital.
    pub fn daily_returns(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.traded)
            .map(|r| r.pnl / self.capital)
            .collect()
    }

    /// Running `(date, transactions, pnl)` sums.
    pub fn cumulative(&self) -> Vec<(String, f64, f64)> {
        let (mut tx, mut pnl) = (0.0, 0.0);
        self.rows
            .iter()
            .map(|r| {
                tx += r.transaction_amount;
                pnl += r.pnl;
                (r.date.clone(), tx, pnl)
            })
            .collect()
    }

    pub fn format_rows(&self) -> String {
        let mut out = String::from("date,transaction_amount,pnl,n_trades\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.date, r.transaction_amount, r.pnl, r.n_trades
            );
        }
        out
    }

    pub fn format_cumulative(&self) -> String {
        let mut out = String::from("date,cum_transaction_amount,cum_pnl\n");
        for (date, tx, pnl) in self.cumulative() {
            let _ = writeln!(out, "{date},{tx},{pnl}");
        }
        out
    }

    pub fn format_summary(&self) -> String {
        let total = |f: fn(&DayRow) -> f64| self.rows.iter().map(f).fold(0.0, |a, b| a + b);
        let mut out = String::new();
        let _ = writeln!(out, "days={}", self.rows.len());
        let _ = writeln!(
            out,
            "trading_days={}",
            self.rows.iter().filter(|r| r.traded).count()
        );
        let _ = writeln!(
            out,
            "n_trades={}",
            self.rows.iter().map(|r| r.n_trades).sum::<u64>()
        );
        let _ = writeln!(
            out,
            "total_transaction_amount={}",
            total(|r| r.transaction_amount)
        );
        let _ = writeln!(out, "total_commission={}", total(|r| r.commission));
        let _ = writeln!(out, "total_pnl={}", total(|r| r.pnl));
        let _ = writeln!(out, "capital={}", self.capital);
        match self.sharpe {
            Some(s) => {
                let _ = writeln!(out, "sharpe={}", s.sharpe);
                let _ = writeln!(out, "ann_return={}", s.ann_return);
                let _ = writeln!(out, "ann_risk={}", s.ann_risk);
            }
            None => out.push_str("sharpe=undefined\nann_return=undefined\nann_risk=undefined\n"),
        }
        out
    }
}

/// Day-by-day driver that carries the correlation history forward.
pub struct Backcast {
    universe: Universe,
    cfg: RunConfig,
    history: Vec<SquareMatrix>,
    has_prior: bool,
    day_index: usize,
}

impl Backcast {
    pub fn new(universe: Universe, cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Backcast {
            universe,
            cfg,
            history: Vec::new(),
            has_prior: false,
            day_index: 0,
        })
    }

    /// Daily correlation matrices from before the first feed day. With any
    /// supplied, trading starts on the first day.
    pub fn with_prior(mut self, prior: Vec<SquareMatrix>) -> Result<Self> {
        if let Some(m) = prior.iter().find(|m| m.n() != self.universe.n()) {
            return Err(Error::DimensionMismatch {
                expected: self.universe.n(),
                found: m.n(),
            });
        }
        self.has_prior = !prior.is_empty();
        self.history = prior;
        Ok(self)
    }

    pub fn history(&self) -> &[SquareMatrix] {
        &self.history
    }

    fn trading_enabled(&self) -> bool {
        !self.history.is_empty() && (self.has_prior || self.day_index >= self.cfg.warmup_days)
    }

    pub fn run_day(&mut self, date: &str, events: &[TickEvent]) -> Result<DayResult> {
        let traded = self.trading_enabled();
        let session = self.cfg.session;
        let result = if events.is_empty() {
            DayResult {
                row: DayRow::empty(date, traded),
                order_log: Vec::new(),
                positions: Vec::new(),
                groups: Vec::new(),
                max_open: 0,
                daily_corr: None,
            }
        } else if !traded {
            let series = sample_day(&self.universe, events, session.open, session.close)?;
            DayResult {
                row: DayRow::empty(date, false),
                order_log: Vec::new(),
                positions: Vec::new(),
                groups: Vec::new(),
                max_open: 0,
                daily_corr: Some(daily_correlation_matrix(series.per_stock())),
            }
        } else {
            self.trade_day(date, events)?
        };
        if let Some(m) = &result.daily_corr {
            self.history.push(m.clone());
        }
        self.day_index += 1;
        Ok(result)
    }

    fn trade_day(&self, date: &str, events: &[TickEvent]) -> Result<DayResult> {
        let corr = correlation_matrix(&self.history, self.cfg.corr_window)?;
        let mut engine = Engine::new(self.universe.clone(), corr, self.cfg.clone())?;
        let fill_all = |engine: &mut Engine, orders: Vec<crate::engine::Order>| -> Result<()> {
            for o in orders {
                engine.on_fill(Fill {
                    order: o.id,
                    price: o.intended_price,
                    ts: o.ts,
                })?;
            }
            Ok(())
        };
        for e in events {
            let orders = engine.on_event(e)?;
            fill_all(&mut engine, orders)?;
        }
        let last = events.last().map_or(session_end(&self.cfg), |e| e.ts);
        let orders = engine.finish(last);
        fill_all(&mut engine, orders)?;

        let positions = engine.positions().to_vec();
        debug_assert!(positions.iter().all(|p| p.state == PositionState::Closed));
        let mut row = DayRow::empty(date, true);
        for p in &positions {
            for price in [p.open_price, p.close_price].into_iter().flatten() {
                row.transaction_amount += transaction_amount(price, p.lots, p.shares_per_lot);
                row.n_trades += 1;
            }
            row.pnl += p.pnl().unwrap_or(0.0);
        }
        row.commission = self.cfg.commission_rate * row.transaction_amount;
        row.pnl -= row.commission;

        let order_log = engine.order_log().to_vec();
        let groups = engine.groups().to_vec();
        let max_open = engine.stats().max_open;
        let series = engine.into_series();
        Ok(DayResult {
            row,
            order_log,
            positions,
            groups,
            max_open,
            daily_corr: Some(daily_correlation_matrix(series.per_stock())),
        })
    }
}

fn session_end(cfg: &RunConfig) -> i64 {
    cfg.session.close
}

#[derive(Debug, Clone)]
pub struct BackcastOutput {
    pub report: BackcastReport,
    pub days: Vec<DayResult>,
}

pub fn run_backcast(
    universe: &Universe,
    cfg: &RunConfig,
    prior: Vec<SquareMatrix>,
    days: &[(String, Vec<TickEvent>)],
) -> Result<BackcastOutput> {
    let mut bc = Backcast::new(universe.clone(), cfg.clone())?.with_prior(prior)?;
    let mut results = Vec::with_capacity(days.len());
    for (date, events) in days {
        results.push(bc.run_day(date, events)?);
    }
    let capital = cfg.strategy.a_trans * cfg.strategy.p_max as f64;
    let mut report = BackcastReport {
        rows: results.iter().map(|d| d.row.clone()).collect(),
        capital,
        sharpe: None,
    };
    report.sharpe = sharpe(&report.daily_returns(), TRADING_DAYS_PER_YEAR);
    Ok(BackcastOutput {
        report,
        days: results,
    })
}

/// `*.csv` files in `dir`, sorted by name, each paired with its stem.
pub fn list_feeds(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut feeds = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            feeds.push((stem, path));
        }
    }
    feeds.sort();
    Ok(feeds)
}

/// Runs every feed in `feed_dir` and writes `report.csv`, `cumulative.csv`,
/// `summary.txt` and `orders/<date>.csv` under `out`.
pub fn run_backcast_dir(
    feed_dir: &Path,
    universe: &Universe,
    cfg: &RunConfig,
    prior: Vec<SquareMatrix>,
    out: &Path,
) -> Result<BackcastOutput> {
    let days = list_feeds(feed_dir)?
        .into_iter()
        .map(|(date, path)| Ok((date, replay(&path)?)))
        .collect::<Result<Vec<_>>>()?;
    let output = run_backcast(universe, cfg, prior, &days)?;
    write_outputs(out, &output)?;
    Ok(output)
}

pub fn write_outputs(out: &Path, output: &BackcastOutput) -> Result<()> {
    let orders = out.join("orders");
    std::fs::create_dir_all(&orders)?;
    std::fs::write(out.join("report.csv"), output.report.format_rows())?;
    std::fs::write(
        out.join("cumulative.csv"),
        output.report.format_cumulative(),
    )?;
    std::fs::write(out.join("summary.txt"), output.report.format_summary())?;
    for day in &output.days {
        if day.row.traded {
            std::fs::write(
                orders.join(format!("{}.csv", day.row.date)),
                format_order_log(&day.order_log),
            )?;
        }
    }
    Ok(())
}
