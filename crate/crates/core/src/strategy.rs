//! Selection-problem assembly: deviations from VWAP, the daily correlation
//! pipeline, the QUBO with its count and balance penalties, and candidate
//! evaluation.
//!
//! The QUBO expands
//!
//! ```text
//! H = Σ_i -c1|Δp_i| b_i + Σ_{i≠j} σ_ij b_i b_j
//!   + c2 (Σ_i b_i - N_s)² + c3 (Σ_i sgn(Δp_i) b_i)²
//! ```
//!
//! into `Σ_ij Q_ij b_i b_j` (using `b² = b`), dropping the constant
//! `c2 N_s²` (see [`penalty_constant`]).

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{BitVector, IsingProblem, QuboProblem};
use crate::matrix::SquareMatrix;
use crate::sb::{SbSolution, SplitProblem};

/// Correlation history window in business days.
pub const CORRELATION_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stock {
    pub code: String,
    pub base_price: f64,
    pub min_lot: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Universe {
    stocks: Vec<Stock>,
    index: HashMap<String, usize>,
}

impl Universe {
    pub fn new(stocks: Vec<Stock>) -> Result<Self> {
        let mut index = HashMap::with_capacity(stocks.len());
        for (i, s) in stocks.iter().enumerate() {
            if !(s.base_price > 0.0 && s.base_price.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{}: base price {} must be positive",
                    s.code, s.base_price
                )));
            }
            if s.min_lot == 0 {
                return Err(Error::InvalidParams(format!(
                    "{}: min_lot must be >= 1",
                    s.code
                )));
            }
            if index.insert(s.code.clone(), i).is_some() {
                return Err(Error::InvalidParams(format!("duplicate code {}", s.code)));
            }
        }
        Ok(Universe { stocks, index })
    }

    /// Reads a CSV with header `code,base_price,min_lot`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["code", "base_price", "min_lot"] {
            return Err(Error::parse(
                path,
                1,
                "expected header `code,base_price,min_lot`",
            ));
        }
        let stocks = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<Stock>, _>>()?;
        Self::new(stocks)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for s in &self.stocks {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.stocks.len()
    }

    pub fn stocks(&self) -> &[Stock] {
        &self.stocks
    }

    pub fn stock(&self, i: usize) -> &Stock {
        &self.stocks[i]
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn base_prices(&self) -> Vec<f64> {
        self.stocks.iter().map(|s| s.base_price).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    pub n_s: usize,
    pub p_max: usize,
    pub a_trans: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub accept_threshold: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            n_s: 4,
            p_max: 4,
            a_trans: 4_000_000.0,
            c1: 100.0,
            c2: 3.0,
            c3: 3.0,
            accept_threshold: 0.0,
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_s < 2 || self.n_s % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "n_s must be even and >= 2, got {}",
                self.n_s
            )));
        }
        if self.p_max < 1 {
            return Err(Error::InvalidParams("p_max must be >= 1".into()));
        }
        if !(self.a_trans > 0.0) {
            return Err(Error::InvalidParams("a_trans must be positive".into()));
        }
        for (name, c) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be >= 0, got {c}"
                )));
            }
        }
        if self.accept_threshold.is_nan() {
            return Err(Error::InvalidParams("accept_threshold is NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Long,
    Short,
}

impl Side {
    /// Negative deviation is a long candidate, positive a short one.
    pub fn from_deviation(dp: f64) -> Option<Side> {
        if dp < 0.0 {
            Some(Side::Long)
        } else if dp > 0.0 {
            Some(Side::Short)
        } else {
            None
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Long => 1.0,
            Side::Short => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Long => "long",
            Side::Short => "short",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationVector {
    dp: Vec<f64>,
    mask: Vec<bool>,
}

impl DeviationVector {
    /// Masked entries are forced to zero.
    pub fn new(mut dp: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if dp.len() != mask.len() {
            return Err(Error::DimensionMismatch {
                expected: dp.len(),
                found: mask.len(),
            });
        }
        if let Some(i) = dp.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { i, j: 0 });
        }
        for (d, &m) in dp.iter_mut().zip(&mask) {
            if m {
                *d = 0.0;
            }
        }
        Ok(DeviationVector { dp, mask })
    }

    pub fn unmasked(dp: Vec<f64>) -> Result<Self> {
        let n = dp.len();
        Self::new(dp, vec![false; n])
    }

    pub fn n(&self) -> usize {
        self.dp.len()
    }

    pub fn dp(&self) -> &[f64] {
        &self.dp
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn sgn(&self) -> Vec<i8> {
        self.dp
            .iter()
            .map(|&d| match Side::from_deviation(d) {
                Some(Side::Short) => 1,
                Some(Side::Long) => -1,
                None => 0,
            })
            .collect()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.dp.iter().map(|d| d.abs()).collect()
    }

    /// Reads a CSV with header `code,dp,masked` ordered as the universe.
    pub fn read_csv(path: &Path, universe: &Universe) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            code: String,
            dp: f64,
            masked: bool,
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let mut dp = vec![0.0; universe.n()];
        let mut mask = vec![true; universe.n()];
        let mut seen = vec![false; universe.n()];
        for (k, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            let i = universe
                .index_of(&row.code)
                .ok_or_else(|| Error::UnknownCode(row.code.clone()))?;
            if seen[i] {
                return Err(Error::parse(
                    path,
                    k as u64 + 2,
                    format!("duplicate code {}", row.code),
                ));
            }
            seen[i] = true;
            dp[i] = row.dp;
            mask[i] = row.masked;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::parse(
                path,
                0,
                format!("missing code {}", universe.stock(i).code),
            ));
        }
        Self::new(dp, mask)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    sigma: SquareMatrix,
}

impl CorrelationMatrix {
    pub fn new(sigma: SquareMatrix) -> Result<Self> {
        if let Some((i, j)) = sigma.first_non_finite() {
            return Err(Error::NonFinite { i, j });
        }
        if let Some((i, j)) = sigma.first_asymmetry(1e-12) {
            return Err(Error::Asymmetric {
                i,
                j,
                a: sigma.get(i, j),
                b: sigma.get(j, i),
            });
        }
        let n = sigma.n();
        for i in 0..n {
            for j in 0..n {
                let v = sigma.get(i, j);
                if i != j && !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParams(format!(
                        "sigma[{i}][{j}] = {v} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(CorrelationMatrix { sigma })
    }

    pub fn n(&self) -> usize {
        self.sigma.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sigma.get(i, j)
    }

    pub fn sigma(&self) -> &SquareMatrix {
        &self.sigma
    }

    pub fn read(path: &Path) -> Result<(Self, Option<String>)> {
        let (m, manifest) = crate::matrix::read_matrix(path)?;
        Ok((Self::new(m)?, manifest))
    }

    pub fn write(&self, path: &Path, days: &[String]) -> Result<()> {
        crate::matrix::write_matrix(path, &self.sigma, Some(&days.join(",")))
    }
}

pub fn mid_price(ask: f64, bid: f64) -> Result<f64> {
    if !(bid > 0.0 && ask >= bid && ask.is_finite()) {
        return Err(Error::InvalidQuote { ask, bid });
    }
    Ok((ask + bid) / 2.0)
}

/// `⌊A_trans / (S_min · p_b)⌋`; 0 means the stock is priced out.
pub fn lot_size(a_trans: f64, s_min: u64, p_b: f64) -> u64 {
    let q = a_trans / (s_min as f64 * p_b);
    if q.is_finite() && q > 0.0 {
        q.floor() as u64
    } else {
        0
    }
}

/// Per-stock market inputs for one deviation computation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StockSnapshot {
    /// Best `(ask, bid)`, if quoted.
    pub quote: Option<(f64, f64)>,
    pub vwap: Option<f64>,
}

/// `Δp_i = (mid_i - VWAP_i) / p_b`; stocks that are open, priced out, or
/// lack a valid quote or VWAP are masked.
pub fn compute_deviation(
    universe: &Universe,
    snapshot: &[StockSnapshot],
    open: &[bool],
    params: &StrategyParams,
) -> Result<DeviationVector> {
    let n = universe.n();
    for len in [snapshot.len(), open.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let mut dp = vec![0.0; n];
    let mut mask = vec![true; n];
    for (i, stock) in universe.stocks().iter().enumerate() {
        if open[i] || lot_size(params.a_trans, stock.min_lot, stock.base_price) == 0 {
            continue;
        }
        let StockSnapshot {
            quote: Some((ask, bid)),
            vwap: Some(vwap),
        } = snapshot[i]
        else {
            continue;
        };
        let Ok(mid) = mid_price(ask, bid) else {
            continue;
        };
        dp[i] = (mid - vwap) / stock.base_price;
        mask[i] = false;
    }
    DeviationVector::new(dp, mask)
}

/// Daily correlation factor of two deviation series `d = p - VWAP`:
/// `Σ d_i d_j / (Σ|d_i| · Σ|d_j|)`, or 0 when either series is flat.
pub fn daily_correlation(d_i: &[f64], d_j: &[f64]) -> Result<f64> {
    if d_i.len() != d_j.len() {
        return Err(Error::DimensionMismatch {
            expected: d_i.len(),
            found: d_j.len(),
        });
    }
    let num: f64 = d_i.iter().zip(d_j).map(|(a, b)| a * b).sum();
    let ai: f64 = d_i.iter().map(|v| v.abs()).sum();
    let aj: f64 = d_j.iter().map(|v| v.abs()).sum();
    if ai == 0.0 || aj == 0.0 {
        return Ok(0.0);
    }
    Ok((num / (ai * aj)).clamp(-1.0, 1.0))
}

/// Pairwise daily correlation over one day's sampled series, using only
/// the seconds where both stocks have a sample. Diagonal is 1.
pub fn daily_correlation_matrix(series: &[Vec<Option<f64>>]) -> SquareMatrix {
    let n = series.len();
    let mut m = SquareMatrix::zeros(n);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        m.set(i, i, 1.0);
        for j in (i + 1)..n {
            a.clear();
            b.clear();
            for (x, y) in series[i].iter().zip(&series[j]) {
                if let (Some(x), Some(y)) = (x, y) {
                    a.push(*x);
                    b.push(*y);
                }
            }
            let v = daily_correlation(&a, &b).expect("aligned samples");
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

/// Mean of the last `window` daily matrices mapped onto `[0, 1]` by
/// `σ = (mean + 1) / 2`.
pub fn correlation_matrix(daily: &[SquareMatrix], window: usize) -> Result<CorrelationMatrix> {
    let window = window.max(1);
    let recent = &daily[daily.len().saturating_sub(window)..];
    let first = recent.first().ok_or(Error::EmptyHistory)?;
    let n = first.n();
    if let Some(m) = recent.iter().find(|m| m.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.n(),
        });
    }
    let k = recent.len() as f64;
    let sigma = SquareMatrix::from_fn(n, |i, j| {
        let mean = recent.iter().map(|m| m.get(i, j)).sum::<f64>() / k;
        ((mean + 1.0) / 2.0).clamp(0.0, 1.0)
    })
    .symmetrized();
    CorrelationMatrix::new(sigma)
}

fn check_dims(dev: &DeviationVector, corr: &CorrelationMatrix) -> Result<()> {
    if dev.n() != corr.n() {
        return Err(Error::DimensionMismatch {
            expected: corr.n(),
            found: dev.n(),
        });
    }
    Ok(())
}

/// Constant `c2 N_s²` dropped from the quadratic form: the direct
/// objective equals `qubo_energy + penalty_constant`.
pub fn penalty_constant(params: &StrategyParams) -> f64 {
    params.c2 * (params.n_s * params.n_s) as f64
}

/// Day-varying QUBO part: correlations plus the count penalty.
fn day_qubo(corr: &CorrelationMatrix, params: &StrategyParams) -> SquareMatrix {
    let diag = params.c2 * (1.0 - 2.0 * params.n_s as f64);
    SquareMatrix::from_fn(corr.n(), |i, j| {
        if i == j {
            diag
        } else {
            corr.get(i, j) + params.c2
        }
    })
}

pub fn build_qubo(
    dev: &DeviationVector,
    corr: &CorrelationMatrix,
    params: &StrategyParams,
) -> Result<QuboProblem> {
    check_dims(dev, corr)?;
    let sgn = dev.sgn();
    let day = day_qubo(corr, params);
    let q = SquareMatrix::from_fn(dev.n(), |i, j| {
        let s = (sgn[i] * sgn[j]) as f64;
        let tick = if i == j {
            -params.c1 * dev.dp()[i].abs() + params.c3 * s
        } else {
            params.c3 * s
        };
        day.get(i, j) + tick
    });
    QuboProblem::new(q)
}

/// Ising form of the day part alone.
pub fn build_day(corr: &CorrelationMatrix, params: &StrategyParams) -> Result<IsingProblem> {
    QuboProblem::new(day_qubo(corr, params))?.to_ising()
}

pub fn build_split(
    dev: &DeviationVector,
    corr: &CorrelationMatrix,
    params: &StrategyParams,
) -> Result<SplitProblem> {
    check_dims(dev, corr)?;
    SplitProblem::new(
        build_day(corr, params)?,
        dev.sgn(),
        dev.abs(),
        params.c1,
        params.c3,
    )
}

/// Cost and penalty evaluated term by term, without the expanded matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub cost: f64,
    pub penalty: f64,
}

impl Objective {
    pub fn total(&self) -> f64 {
        self.cost + self.penalty
    }
}

pub fn objective(
    b: &BitVector,
    dev: &DeviationVector,
    corr: &CorrelationMatrix,
    params: &StrategyParams,
) -> Result<Objective> {
    check_dims(dev, corr)?;
    if b.len() != dev.n() {
        return Err(Error::DimensionMismatch {
            expected: dev.n(),
            found: b.len(),
        });
    }
    let sel: Vec<usize> = b.selected().collect();
    let mut cost = 0.0;
    for &i in &sel {
        cost -= params.c1 * dev.dp()[i].abs();
        for &j in &sel {
            if i != j {
                cost += corr.get(i, j);
            }
        }
    }
    let count = sel.len() as f64 - params.n_s as f64;
    let sgn = dev.sgn();
    let balance: f64 = sel.iter().map(|&i| sgn[i] as f64).sum();
    Ok(Objective {
        cost,
        penalty: params.c2 * count * count + params.c3 * balance * balance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Count { selected: usize, required: usize },
    Balance { net: i64 },
    Masked { index: usize },
    NoDirection { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Count { selected, required } => {
                write!(f, "selected {selected} stocks, need {required}")
            }
            Violation::Balance { net } => write!(f, "long/short imbalance {net}"),
            Violation::Masked { index } => write!(f, "stock {index} is masked"),
            Violation::NoDirection { index } => write!(f, "stock {index} has zero deviation"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintCheck {
    pub violations: Vec<Violation>,
}

impl ConstraintCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `Σ b = N_s`, `Σ sgn(Δp) b = 0`, and every selected stock unmasked with a
/// nonzero deviation.
pub fn check_constraints(b: &BitVector, dev: &DeviationVector, n_s: usize) -> ConstraintCheck {
    let mut violations = Vec::new();
    let selected = b.count_ones();
    if selected != n_s {
        violations.push(Violation::Count {
            selected,
            required: n_s,
        });
    }
    let sgn = dev.sgn();
    let net: i64 = b
        .selected()
        .map(|i| sgn.get(i).copied().unwrap_or(0) as i64)
        .sum();
    if net != 0 {
        violations.push(Violation::Balance { net });
    }
    for i in b.selected() {
        if dev.mask().get(i).copied().unwrap_or(true) {
            violations.push(Violation::Masked { index: i });
        } else if sgn[i] == 0 {
            violations.push(Violation::NoDirection { index: i });
        }
    }
    ConstraintCheck { violations }
}

/// A stock picked for opening, with its direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub index: usize,
    pub side: Side,
    pub dp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Accept { cost: f64, picks: Vec<Pick> },
    Infeasible(ConstraintCheck),
    AboveThreshold { cost: f64 },
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept { .. })
    }
}

/// Rejects infeasible selections, then accepts iff `H_cost ≤ accept_threshold`.
pub fn evaluate_candidate(
    sol: &SbSolution,
    dev: &DeviationVector,
    corr: &CorrelationMatrix,
    params: &StrategyParams,
) -> Result<Verdict> {
    let b = sol.spins.to_bits();
    if b.len() != dev.n() {
        return Err(Error::DimensionMismatch {
            expected: dev.n(),
            found: b.len(),
        });
    }
    let check = check_constraints(&b, dev, params.n_s);
    if !check.passed() {
        return Ok(Verdict::Infeasible(check));
    }
    let cost = objective(&b, dev, corr, params)?.cost;
    if cost <= params.accept_threshold {
        let picks = b
            .selected()
            .map(|i| Pick {
                index: i,
                side: Side::from_deviation(dev.dp()[i]).expect("feasible picks have direction"),
                dp: dev.dp()[i],
            })
            .collect();
        Ok(Verdict::Accept { cost, picks })
    } else {
        Ok(Verdict::AboveThreshold { cost })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn corr2(s: f64) -> CorrelationMatrix {
        CorrelationMatrix::new(SquareMatrix::from_rows(vec![vec![1.0, s], vec![s, 1.0]]).unwrap())
            .unwrap()
    }

    fn uniform_corr(n: usize, s: f64) -> CorrelationMatrix {
        CorrelationMatrix::new(SquareMatrix::from_fn(
            n,
            |i, j| if i == j { 1.0 } else { s },
        ))
        .unwrap()
    }

    fn solution(bits: &[u8]) -> SbSolution {
        SbSolution {
            spins: BitVector::new(bits.to_vec()).unwrap().to_spins(),
            energy: 0.0,
            run_index: 0,
            elapsed: Duration::ZERO,
        }
    }

    fn universe(prices: &[f64]) -> Universe {
        Universe::new(
            prices
                .iter()
                .enumerate()
                .map(|(i, &p)| Stock {
                    code: format!("S{i}"),
                    base_price: p,
                    min_lot: 100,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn mid_price_examples() {
        assert_eq!(mid_price(101.0, 99.0).unwrap(), 100.0);
        assert_eq!(mid_price(100.0, 100.0).unwrap(), 100.0);
        assert!(mid_price(99.0, 101.0).is_err());
        assert!(mid_price(1.0, 0.0).is_err());
    }

    #[test]
    fn lot_size_examples() {
        assert_eq!(lot_size(4_000_000.0, 100, 5_000.0), 8);
        assert_eq!(lot_size(4_000_000.0, 100, 50_000.0), 0);
        assert_eq!(lot_size(4_000_000.0, 1, 4_000_000.0), 1);
    }

    #[test]
    fn deviation_examples() {
        let u = universe(&[100.0, 100.0, 100.0, 100_000.0, 100.0]);
        let p = StrategyParams::default();
        let snap = [
            StockSnapshot {
                quote: Some((100.5, 99.5)),
                vwap: Some(100.0),
            },
            StockSnapshot {
                quote: Some((100.5, 99.5)),
                vwap: Some(98.0),
            },
            StockSnapshot {
                quote: Some((100.5, 99.5)),
                vwap: Some(98.0),
            },
            StockSnapshot {
                quote: Some((100.5, 99.5)),
                vwap: Some(98.0),
            },
            StockSnapshot {
                quote: None,
                vwap: Some(98.0),
            },
        ];
        let open = [false, false, true, false, false];
        let dev = compute_deviation(&u, &snap, &open, &p).unwrap();
        assert_eq!(dev.dp()[0], 0.0);
        assert!(!dev.mask()[0]);
        assert!((dev.dp()[1] - 0.02).abs() < 1e-15);
        assert_eq!(dev.sgn()[1], 1);
        // open, priced out, unquoted
        for i in [2, 3, 4] {
            assert_eq!(dev.dp()[i], 0.0);
            assert!(dev.mask()[i]);
        }
    }

    #[test]
    fn daily_correlation_examples() {
        assert_eq!(daily_correlation(&[1.0, -1.0], &[1.0, -1.0]).unwrap(), 0.5);
        assert_eq!(daily_correlation(&[1.0, -1.0], &[-1.0, 1.0]).unwrap(), -0.5);
        assert_eq!(daily_correlation(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 0.0);
        assert!(daily_correlation(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn correlation_matrix_examples() {
        let day = |v: f64| SquareMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { v });
        assert_eq!(correlation_matrix(&[day(0.0)], 5).unwrap().get(0, 1), 0.5);
        assert_eq!(
            correlation_matrix(&vec![day(1.0); 3], 5).unwrap().get(0, 1),
            1.0
        );
        assert_eq!(
            correlation_matrix(&vec![day(-1.0); 7], 5)
                .unwrap()
                .get(0, 1),
            0.0
        );
        assert!(matches!(
            correlation_matrix(&[], 5),
            Err(Error::EmptyHistory)
        ));
        // only the last five days count
        let mut hist = vec![day(-1.0); 3];
        hist.extend(vec![day(1.0); 5]);
        assert_eq!(correlation_matrix(&hist, 5).unwrap().get(1, 0), 1.0);
    }

    #[test]
    fn build_qubo_direct_example() {
        let dev = DeviationVector::unmasked(vec![-0.01, 0.02]).unwrap();
        let params = StrategyParams {
            c1: 1.0,
            c2: 0.0,
            c3: 0.0,
            ..StrategyParams::default()
        };
        let q = build_qubo(&dev, &corr2(0.3), &params).unwrap();
        assert!((q.q().get(0, 0) + 0.01).abs() < 1e-15);
        assert!((q.q().get(1, 1) + 0.02).abs() < 1e-15);
        assert_eq!(q.q().get(0, 1), 0.3);
        assert_eq!(q.q().get(1, 0), 0.3);
    }

    #[test]
    fn feasible_selection_has_zero_penalty() {
        let dev = DeviationVector::unmasked(vec![-0.01, 0.02, -0.03, 0.01]).unwrap();
        let obj = objective(
            &BitVector::new(vec![1, 1, 1, 1]).unwrap(),
            &dev,
            &uniform_corr(4, 0.2),
            &StrategyParams::default(),
        )
        .unwrap();
        assert_eq!(obj.penalty, 0.0);
    }

    #[test]
    fn count_penalty_term() {
        let dev = DeviationVector::unmasked(vec![0.0; 4]).unwrap();
        let params = StrategyParams {
            n_s: 2,
            c2: 3.0,
            c3: 0.0,
            ..StrategyParams::default()
        };
        let obj = objective(
            &BitVector::new(vec![1, 1, 1, 0]).unwrap(),
            &dev,
            &uniform_corr(4, 0.0),
            &params,
        )
        .unwrap();
        assert_eq!(obj.penalty, 3.0);
    }

    #[test]
    fn expanded_qubo_matches_direct_objective() {
        let dev = DeviationVector::new(
            vec![-0.012, 0.02, 0.0, 0.004, -0.03, 0.015],
            vec![false, false, false, true, false, false],
        )
        .unwrap();
        let sigma = SquareMatrix::from_fn(6, |i, j| {
            if i == j {
                1.0
            } else {
                ((i * 7 + j * 7) % 10) as f64 / 10.0
            }
        });
        let corr = CorrelationMatrix::new(sigma).unwrap();
        let params = StrategyParams::default();
        let q = build_qubo(&dev, &corr, &params).unwrap();
        for m in 0..64 {
            let b = BitVector::from_index(m, 6);
            let direct = objective(&b, &dev, &corr, &params).unwrap().total();
            let e = q.energy(&b).unwrap() + penalty_constant(&params);
            assert!((direct - e).abs() < 1e-9, "m={m}: {direct} vs {e}");
        }
    }

    #[test]
    fn split_matches_monolithic_conversion() {
        let dev = DeviationVector::unmasked(vec![-0.01, 0.02, -0.005, 0.0]).unwrap();
        let corr = uniform_corr(4, 0.4);
        let params = StrategyParams::default();
        let split = build_split(&dev, &corr, &params).unwrap();
        let mono = build_qubo(&dev, &corr, &params)
            .unwrap()
            .to_ising()
            .unwrap();
        let dense = split.dense_reconstruct();
        for (a, b) in dense.j().as_slice().iter().zip(mono.j().as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in dense.h().iter().zip(mono.h()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((dense.offset() - mono.offset()).abs() < 1e-9);
    }

    #[test]
    fn zero_deviation_has_empty_tick_side() {
        let dev = DeviationVector::unmasked(vec![0.0; 3]).unwrap();
        let split = build_split(&dev, &uniform_corr(3, 0.5), &StrategyParams::default()).unwrap();
        assert!(split.sgn_dp().iter().all(|&s| s == 0));
        assert!(split.h_tick().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn constraint_examples() {
        let dev = DeviationVector::unmasked(vec![-0.01, 0.02, -0.03, 0.01, 0.02]).unwrap();
        let b = |v: &[u8]| BitVector::new(v.to_vec()).unwrap();
        assert!(check_constraints(&b(&[1, 1, 1, 1, 0]), &dev, 4).passed());
        let c = check_constraints(&b(&[1, 1, 1, 0, 0]), &dev, 4);
        assert!(c
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Count { .. })));
        let c = check_constraints(&b(&[1, 1, 1, 0, 0]), &dev, 3);
        assert_eq!(c.violations, vec![Violation::Balance { net: -1 }]);
        let dev3 = DeviationVector::unmasked(vec![-0.01, -0.02, -0.03, 0.01]).unwrap();
        let c = check_constraints(&b(&[1, 1, 1, 1]), &dev3, 4);
        assert_eq!(c.violations, vec![Violation::Balance { net: -2 }]);

        let masked = DeviationVector::new(
            vec![-0.01, 0.02, -0.03, 0.01],
            vec![false, false, true, false],
        )
        .unwrap();
        let c = check_constraints(&b(&[1, 1, 1, 1]), &masked, 4);
        assert!(c.violations.contains(&Violation::Masked { index: 2 }));
    }

    #[test]
    fn evaluate_candidate_examples() {
        let dev = DeviationVector::unmasked(vec![-0.02, 0.02, -0.03, 0.01]).unwrap();
        let corr = uniform_corr(4, 0.1);
        let params = StrategyParams::default();

        let v = evaluate_candidate(&solution(&[1, 1, 1, 0]), &dev, &corr, &params).unwrap();
        assert!(matches!(v, Verdict::Infeasible(_)));

        // cost = -100 * 0.08 + 12 * 0.1 = -6.8
        let v = evaluate_candidate(&solution(&[1, 1, 1, 1]), &dev, &corr, &params).unwrap();
        match v {
            Verdict::Accept { cost, picks } => {
                assert!((cost + 6.8).abs() < 1e-12);
                assert_eq!(picks.len(), 4);
                assert_eq!(picks[0].side, Side::Long);
                assert_eq!(picks[1].side, Side::Short);
            }
            other => panic!("{other:?}"),
        }

        let strict = StrategyParams {
            accept_threshold: -10.0,
            ..params.clone()
        };
        let v = evaluate_candidate(&solution(&[1, 1, 1, 1]), &dev, &corr, &strict).unwrap();
        assert!(matches!(v, Verdict::AboveThreshold { .. }));

        let lax = StrategyParams {
            accept_threshold: f64::INFINITY,
            ..params
        };
        let dev = DeviationVector::unmasked(vec![-0.0001, 0.0001, -0.0001, 0.0001]).unwrap();
        let v = evaluate_candidate(&solution(&[1, 1, 1, 1]), &dev, &uniform_corr(4, 1.0), &lax)
            .unwrap();
        assert!(v.is_accept());
    }

    #[test]
    fn universe_validation() {
        let s = |c: &str, p: f64, l: u64| Stock {
            code: c.into(),
            base_price: p,
            min_lot: l,
        };
        assert!(Universe::new(vec![s("A", 1.0, 1), s("A", 1.0, 1)]).is_err());
        assert!(Universe::new(vec![s("A", 0.0, 1)]).is_err());
        assert!(Universe::new(vec![s("A", 1.0, 0)]).is_err());
        let u = Universe::new(vec![s("A", 1.0, 1), s("B", 2.0, 100)]).unwrap();
        assert_eq!(u.index_of("B"), Some(1));
        assert_eq!(u.index_of("C"), None);
    }

    #[test]
    fn params_validation() {
        assert!(StrategyParams::default().validate().is_ok());
        assert!(StrategyParams {
            n_s: 3,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(StrategyParams {
            n_s: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(StrategyParams {
            c1: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
