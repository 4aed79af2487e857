//! Event-driven trading engine.
//!
//! Every quote change recomputes the deviation vector (open stocks masked),
//! rewrites the tick part of the solver problem, and runs the solver up to
//! the restart budget. Accepted groups are judged as a unit and turned into
//! orders. Positions close when their deviation crosses zero or when the
//! forced-unwind time is reached.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::market::{MarketState, Replay, SampledSeries, TickEvent};
use crate::sb::{self, SbParams, SplitProblem};
use crate::strategy::{
    build_day, compute_deviation, evaluate_candidate, lot_size, mid_price, CorrelationMatrix,
    DeviationVector, Pick, Side, Universe, Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Buy,
    Sell,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Buy => "buy",
            Direction::Sell => "sell",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PositionState {
    PendingOpen,
    Open,
    PendingClose,
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub index: usize,
    pub code: String,
    pub side: Side,
    pub lots: u64,
    pub shares_per_lot: u64,
    /// Deviation at the time the group was accepted.
    pub entry_dp: f64,
    pub group: usize,
    pub state: PositionState,
    pub open_price: Option<f64>,
    pub open_ts: Option<i64>,
    pub close_price: Option<f64>,
    pub close_ts: Option<i64>,
}

impl Position {
    pub fn shares(&self) -> u64 {
        self.lots * self.shares_per_lot
    }

    /// `side · (close − open) · shares` once closed.
    pub fn pnl(&self) -> Option<f64> {
        Some(self.side.sign() * (self.close_price? - self.open_price?) * self.shares() as f64)
    }

    fn advance(&mut self, from: PositionState, to: PositionState) {
        assert_eq!(
            self.state, from,
            "{}: illegal transition to {to:?}",
            self.code
        );
        self.state = to;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderAction {
    Open,
    Close,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Order {
    pub id: u64,
    pub position: usize,
    pub code: String,
    pub direction: Direction,
    pub lots: u64,
    pub ts: i64,
    pub intended_price: f64,
    pub action: OrderAction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fill {
    pub order: u64,
    pub price: f64,
    pub ts: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogAction {
    OpenOrder,
    CloseOrder,
    OpenFill,
    CloseFill,
}

impl fmt::Display for LogAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogAction::OpenOrder => "open_order",
            LogAction::CloseOrder => "close_order",
            LogAction::OpenFill => "open_fill",
            LogAction::CloseFill => "close_fill",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub ts: i64,
    pub code: String,
    pub direction: Direction,
    pub lots: u64,
    pub price: f64,
    pub action: LogAction,
}

pub const ORDER_LOG_HEADER: &str = "ts_us,code,side,lots,price,action";

pub fn format_order_log(rows: &[LogRow]) -> String {
    let mut out = String::from(ORDER_LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.ts, r.code, r.direction, r.lots, r.price, r.action
        );
    }
    out
}

pub fn write_order_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    std::fs::write(path, format_order_log(rows))?;
    Ok(())
}

/// A group that passed judgment.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenedGroup {
    pub ts: i64,
    pub cost: f64,
    pub picks: Vec<Pick>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub events: u64,
    pub quote_changes: u64,
    /// Quote changes that reached the solver.
    pub solve_events: u64,
    pub solver_runs: u64,
    pub diverged: u64,
    pub accepted: u64,
    pub rejected_groups: u64,
    pub max_open: usize,
}

pub struct Engine {
    cfg: RunConfig,
    replay: Replay,
    corr: CorrelationMatrix,
    split: SplitProblem,
    lots: Vec<u64>,
    open_list: BTreeSet<usize>,
    positions: Vec<Position>,
    outstanding: BTreeMap<u64, Order>,
    next_order: u64,
    log: Vec<LogRow>,
    groups: Vec<OpenedGroup>,
    stats: EngineStats,
}

impl Engine {
    /// Builds the day part of the solver problem from `corr`.
    pub fn new(universe: Universe, corr: CorrelationMatrix, cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let n = universe.n();
        if corr.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: corr.n(),
            });
        }
        let day = build_day(&corr, &cfg.strategy)?;
        let split = SplitProblem::new(
            day,
            vec![0; n],
            vec![0.0; n],
            cfg.strategy.c1,
            cfg.strategy.c3,
        )?;
        let lots = universe
            .stocks()
            .iter()
            .map(|s| lot_size(cfg.strategy.a_trans, s.min_lot, s.base_price))
            .collect();
        Ok(Engine {
            replay: Replay::new(universe, cfg.session.open, cfg.session.close),
            cfg,
            corr,
            split,
            lots,
            open_list: BTreeSet::new(),
            positions: Vec::new(),
            outstanding: BTreeMap::new(),
            next_order: 0,
            log: Vec::new(),
            groups: Vec::new(),
            stats: EngineStats::default(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn market(&self) -> &MarketState {
        self.replay.state()
    }

    pub fn universe(&self) -> &Universe {
        self.replay.state().universe()
    }

    pub fn split(&self) -> &SplitProblem {
        &self.split
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    /// Indices of stocks with a non-closed position.
    pub fn open_list(&self) -> &BTreeSet<usize> {
        &self.open_list
    }

    pub fn outstanding(&self) -> impl Iterator<Item = &Order> {
        self.outstanding.values()
    }

    pub fn order_log(&self) -> &[LogRow] {
        &self.log
    }

    pub fn groups(&self) -> &[OpenedGroup] {
        &self.groups
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn into_series(self) -> SampledSeries {
        self.replay.into_series()
    }

    /// Current deviation vector with open stocks masked.
    pub fn deviation(&self) -> Result<DeviationVector> {
        let market = self.replay.state();
        let open: Vec<bool> = (0..self.lots.len())
            .map(|i| self.open_list.contains(&i))
            .collect();
        compute_deviation(
            market.universe(),
            &market.snapshot(),
            &open,
            &self.cfg.strategy,
        )
    }

    /// Processes one feed event and returns the orders it caused.
    pub fn on_event(&mut self, e: &TickEvent) -> Result<Vec<Order>> {
        self.stats.events += 1;
        let changed = self.replay.step(e)?;
        let session = self.cfg.session;
        if e.ts >= session.unwind_at() {
            return Ok(self.close_all(e.ts));
        }
        let Some(_) = changed else {
            return Ok(Vec::new());
        };
        self.stats.quote_changes += 1;
        if e.ts < session.open {
            return Ok(Vec::new());
        }
        let mut orders = self.close_converged(e.ts);
        orders.extend(self.on_quote_change(e.ts)?);
        Ok(orders)
    }

    /// Closes everything still open; called when the feed ends.
    pub fn finish(&mut self, ts: i64) -> Vec<Order> {
        self.close_all(ts)
    }

    fn on_quote_change(&mut self, ts: i64) -> Result<Vec<Order>> {
        let strat = self.cfg.strategy.clone();
        let params = SbParams {
            seed: self.cfg.sb.seed.wrapping_add(self.stats.solve_events),
            ..self.cfg.sb.clone()
        };
        let mut orders = Vec::new();
        let mut dev: Option<DeviationVector> = None;
        let mut counted = false;
        for r in 0..params.restarts as u64 {
            if self.open_list.len() + strat.n_s > strat.p_max {
                break;
            }
            if dev.is_none() {
                let d = self.deviation()?;
                self.split.update_tick_in_place(&d.sgn(), &d.abs())?;
                dev = Some(d);
            }
            let d = dev.as_ref().expect("preprocessed above");
            if !has_feasible_group(d, strat.n_s) {
                break;
            }
            if !counted {
                self.stats.solve_events += 1;
                counted = true;
            }
            let sol = match sb::run(&self.split, &params, r) {
                Ok(sol) => sol,
                Err(Error::Diverged { .. }) => {
                    self.stats.diverged += 1;
                    break;
                }
                Err(e) => return Err(e),
            };
            self.stats.solver_runs += 1;
            if let Verdict::Accept { cost, picks } =
                evaluate_candidate(&sol, d, &self.corr, &strat)?
            {
                let issued = self.judge_open(&picks, cost, ts);
                if !issued.is_empty() {
                    dev = None;
                    orders.extend(issued);
                }
            }
        }
        Ok(orders)
    }

    /// Opens the whole group or nothing.
    pub fn judge_open(&mut self, picks: &[Pick], cost: f64, ts: i64) -> Vec<Order> {
        let strat = &self.cfg.strategy;
        let fits = self.open_list.len() + picks.len() <= strat.p_max;
        let fresh = picks.iter().all(|p| !self.open_list.contains(&p.index));
        let quoted = picks.iter().all(|p| {
            self.replay.state().buffer().quote(p.index).is_some() && self.lots[p.index] > 0
        });
        if !(fits && fresh && quoted) {
            self.stats.rejected_groups += 1;
            return Vec::new();
        }
        self.stats.accepted += 1;
        let group = self.groups.len();
        let mut orders = Vec::with_capacity(picks.len());
        for p in picks {
            let stock = self.replay.state().universe().stock(p.index).clone();
            let (ask, bid) = self
                .replay
                .state()
                .buffer()
                .quote(p.index)
                .expect("checked");
            let (direction, price) = match p.side {
                Side::Long => (Direction::Buy, ask),
                Side::Short => (Direction::Sell, bid),
            };
            self.positions.push(Position {
                index: p.index,
                code: stock.code,
                side: p.side,
                lots: self.lots[p.index],
                shares_per_lot: stock.min_lot,
                entry_dp: p.dp,
                group,
                state: PositionState::PendingOpen,
                open_price: None,
                open_ts: None,
                close_price: None,
                close_ts: None,
            });
            self.open_list.insert(p.index);
            orders.push(self.issue(
                self.positions.len() - 1,
                direction,
                price,
                ts,
                OrderAction::Open,
            ));
        }
        self.groups.push(OpenedGroup {
            ts,
            cost,
            picks: picks.to_vec(),
        });
        self.stats.max_open = self.stats.max_open.max(self.open_list.len());
        orders
    }

    fn issue(
        &mut self,
        position: usize,
        direction: Direction,
        price: f64,
        ts: i64,
        action: OrderAction,
    ) -> Order {
        let pos = &self.positions[position];
        let order = Order {
            id: self.next_order,
            position,
            code: pos.code.clone(),
            direction,
            lots: pos.lots,
            ts,
            intended_price: price,
            action,
        };
        self.next_order += 1;
        self.log.push(LogRow {
            ts,
            code: order.code.clone(),
            direction,
            lots: order.lots,
            price,
            action: match action {
                OrderAction::Open => LogAction::OpenOrder,
                OrderAction::Close => LogAction::CloseOrder,
            },
        });
        self.outstanding.insert(order.id, order.clone());
        order
    }

    pub fn on_fill(&mut self, fill: Fill) -> Result<()> {
        let order = self
            .outstanding
            .remove(&fill.order)
            .ok_or(Error::UnmatchedFill(fill.order))?;
        let pos = &mut self.positions[order.position];
        let action = match order.action {
            OrderAction::Open => {
                pos.advance(PositionState::PendingOpen, PositionState::Open);
                pos.open_price = Some(fill.price);
                pos.open_ts = Some(fill.ts);
                LogAction::OpenFill
            }
            OrderAction::Close => {
                pos.advance(PositionState::PendingClose, PositionState::Closed);
                pos.close_price = Some(fill.price);
                pos.close_ts = Some(fill.ts);
                self.open_list.remove(&pos.index);
                LogAction::CloseFill
            }
        };
        self.log.push(LogRow {
            ts: fill.ts,
            code: order.code,
            direction: order.direction,
            lots: order.lots,
            price: fill.price,
            action,
        });
        Ok(())
    }

    fn current_dp(&self, i: usize) -> Option<f64> {
        let market = self.replay.state();
        let (ask, bid) = market.buffer().quote(i)?;
        let mid = mid_price(ask, bid).ok()?;
        Some((mid - market.vwap().published()[i]) / market.universe().stock(i).base_price)
    }

    fn close_position(&mut self, k: usize, ts: i64) -> Option<Order> {
        let pos = &self.positions[k];
        let (ask, bid) = self.replay.state().buffer().quote(pos.index)?;
        let (direction, price) = match pos.side {
            Side::Long => (Direction::Sell, bid),
            Side::Short => (Direction::Buy, ask),
        };
        self.positions[k].advance(PositionState::Open, PositionState::PendingClose);
        Some(self.issue(k, direction, price, ts, OrderAction::Close))
    }

    /// Take-profit on convergence: close once the deviation has crossed
    /// (or touched) zero since entry.
    pub fn close_converged(&mut self, ts: i64) -> Vec<Order> {
        let mut orders = Vec::new();
        for k in 0..self.positions.len() {
            let pos = &self.positions[k];
            if pos.state != PositionState::Open {
                continue;
            }
            let Some(dp) = self.current_dp(pos.index) else {
                continue;
            };
            if pos.entry_dp * dp <= 0.0 {
                orders.extend(self.close_position(k, ts));
            }
        }
        orders
    }

    fn close_all(&mut self, ts: i64) -> Vec<Order> {
        let mut orders = Vec::new();
        for k in 0..self.positions.len() {
            if self.positions[k].state == PositionState::Open {
                orders.extend(self.close_position(k, ts));
            }
        }
        orders
    }
}

/// Whether at least `n_s / 2` longs and `n_s / 2` shorts are available.
fn has_feasible_group(dev: &DeviationVector, n_s: usize) -> bool {
    let sgn = dev.sgn();
    let longs = sgn.iter().filter(|&&s| s < 0).count();
    let shorts = sgn.iter().filter(|&&s| s > 0).count();
    longs >= n_s / 2 && shorts >= n_s / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SquareMatrix;
    use crate::strategy::Stock;

    fn universe(n: usize) -> Universe {
        Universe::new(
            (0..n)
                .map(|i| Stock {
                    code: format!("S{i}"),
                    base_price: 1000.0,
                    min_lot: 100,
                })
                .collect(),
        )
        .unwrap()
    }

    fn engine(n: usize, p_max: usize) -> Engine {
        let mut cfg = RunConfig::default();
        cfg.strategy.p_max = p_max;
        let corr = CorrelationMatrix::new(SquareMatrix::from_fn(
            n,
            |i, j| {
                if i == j {
                    1.0
                } else {
                    0.5
                }
            },
        ))
        .unwrap();
        Engine::new(universe(n), corr, cfg).unwrap()
    }

    fn quote_all(e: &mut Engine, mids: &[f64]) {
        for (i, m) in mids.iter().enumerate() {
            let ev = TickEvent::quote(0, format!("S{i}"), m + 0.5, m - 0.5);
            e.replay.step(&ev).unwrap();
        }
    }

    fn pick(index: usize, side: Side) -> Pick {
        Pick {
            index,
            side,
            dp: -side.sign() * 0.01,
        }
    }

    fn group(idx: [usize; 4]) -> Vec<Pick> {
        vec![
            pick(idx[0], Side::Long),
            pick(idx[1], Side::Long),
            pick(idx[2], Side::Short),
            pick(idx[3], Side::Short),
        ]
    }

    #[test]
    fn judge_open_issues_one_order_per_stock() {
        let mut e = engine(8, 4);
        quote_all(&mut e, &[1000.0; 8]);
        let orders = e.judge_open(&group([0, 1, 2, 3]), -1.0, 5);
        assert_eq!(orders.len(), 4);
        assert_eq!(e.open_list().len(), 4);
        assert_eq!(orders[0].direction, Direction::Buy);
        assert_eq!(orders[0].intended_price, 1000.5);
        assert_eq!(orders[2].direction, Direction::Sell);
        assert_eq!(orders[2].intended_price, 999.5);
        // 4e6 / (100 * 1000)
        assert!(orders.iter().all(|o| o.lots == 40));
    }

    #[test]
    fn full_open_list_rejects_group() {
        let mut e = engine(8, 4);
        quote_all(&mut e, &[1000.0; 8]);
        assert_eq!(e.judge_open(&group([0, 1, 2, 3]), -1.0, 0).len(), 4);
        assert!(e.judge_open(&group([4, 5, 6, 7]), -1.0, 0).is_empty());
        assert_eq!(e.stats().rejected_groups, 1);
        assert_eq!(e.open_list().len(), 4);
    }

    #[test]
    fn larger_budget_accepts_second_group() {
        let mut e = engine(8, 8);
        quote_all(&mut e, &[1000.0; 8]);
        assert_eq!(e.judge_open(&group([0, 1, 2, 3]), -1.0, 0).len(), 4);
        assert_eq!(e.judge_open(&group([4, 5, 6, 7]), -1.0, 0).len(), 4);
        assert_eq!(e.open_list().len(), 8);
    }

    #[test]
    fn duplicate_rejects_whole_group() {
        let mut e = engine(8, 8);
        quote_all(&mut e, &[1000.0; 8]);
        e.judge_open(&group([0, 1, 2, 3]), -1.0, 0);
        assert!(e.judge_open(&group([4, 5, 6, 3]), -1.0, 0).is_empty());
        assert_eq!(e.open_list().len(), 4);
    }

    #[test]
    fn fills_drive_the_state_machine() {
        let mut e = engine(8, 4);
        quote_all(&mut e, &[1000.0; 8]);
        let orders = e.judge_open(&group([0, 1, 2, 3]), -1.0, 0);
        for o in &orders {
            e.on_fill(Fill {
                order: o.id,
                price: o.intended_price,
                ts: 1,
            })
            .unwrap();
        }
        assert!(e.positions().iter().all(|p| p.state == PositionState::Open));
        assert_eq!(e.positions()[0].open_price, Some(1000.5));

        let closes = e.finish(2);
        assert_eq!(closes.len(), 4);
        assert_eq!(closes[0].direction, Direction::Sell);
        e.on_fill(Fill {
            order: closes[0].id,
            price: closes[0].intended_price,
            ts: 2,
        })
        .unwrap();
        assert_eq!(e.open_list().len(), 3);
        assert!(matches!(
            e.on_fill(Fill {
                order: 999,
                price: 1.0,
                ts: 2
            }),
            Err(Error::UnmatchedFill(999))
        ));
    }

    #[test]
    fn sign_cross_closes_position() {
        let mut e = engine(4, 4);
        quote_all(&mut e, &[980.0, 985.0, 1015.0, 1020.0]);
        let picks = vec![
            Pick {
                index: 0,
                side: Side::Long,
                dp: -0.02,
            },
            Pick {
                index: 1,
                side: Side::Long,
                dp: -0.015,
            },
            Pick {
                index: 2,
                side: Side::Short,
                dp: 0.015,
            },
            Pick {
                index: 3,
                side: Side::Short,
                dp: 0.02,
            },
        ];
        for o in e.judge_open(&picks, -1.0, 0) {
            e.on_fill(Fill {
                order: o.id,
                price: o.intended_price,
                ts: 0,
            })
            .unwrap();
        }
        assert!(e.close_converged(1).is_empty());
        e.replay
            .step(&TickEvent::quote(2, "S0", 1001.5, 1000.5))
            .unwrap();
        let closes = e.close_converged(2);
        assert_eq!(closes.len(), 1);
        assert_eq!(closes[0].code, "S0");
        assert_eq!(closes[0].intended_price, 1000.5);
    }

    #[test]
    fn forced_unwind_before_close() {
        let mut e = engine(4, 4);
        quote_all(&mut e, &[980.0, 985.0, 1015.0, 1020.0]);
        for o in e.judge_open(&group([0, 1, 2, 3]), -1.0, 0) {
            e.on_fill(Fill {
                order: o.id,
                price: o.intended_price,
                ts: 0,
            })
            .unwrap();
        }
        let unwind = e.config().session.unwind_at();
        let orders = e
            .on_event(&TickEvent::trade(unwind, "S0", 980.0, 100))
            .unwrap();
        assert_eq!(orders.len(), 4);
        assert!(orders.iter().all(|o| o.action == OrderAction::Close));
    }

    #[test]
    fn nothing_open_means_nothing_to_close() {
        let mut e = engine(4, 4);
        assert!(e.finish(10).is_empty());
        assert!(e.close_converged(10).is_empty());
    }

    #[test]
    fn flat_market_opens_nothing() {
        let mut e = engine(4, 4);
        for i in 0..4 {
            let orders = e
                .on_event(&TickEvent::quote(0, format!("S{i}"), 1000.5, 999.5))
                .unwrap();
            assert!(orders.is_empty());
        }
        assert_eq!(e.stats().solver_runs, 0);
        assert!(e.open_list().is_empty());
    }
}
