//! Oracles and fixtures shared by the integration and acceptance tests.
//! Everything here is computed from first principles rather than through
//! the library's own conversions.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use sbtrade::backcast::DayResult;
use sbtrade::engine::LogAction;
use sbtrade::matrix::SquareMatrix;
use sbtrade::sb::{OscillatorState, SbParams};
use sbtrade::strategy::{CorrelationMatrix, DeviationVector, Side, StrategyParams};

/// `Σ_ij Q_ij b_i b_j` straight from the definition.
pub fn qubo_energy(q: &SquareMatrix, bits: &[u8]) -> f64 {
    let n = q.n();
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            e += q.get(i, j) * bits[i] as f64 * bits[j] as f64;
        }
    }
    e
}

pub fn bits_of(idx: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((idx >> i) & 1) as u8).collect()
}

/// Dense Ising coefficients of a QUBO, derived by substituting
/// `b = (1 + s) / 2` term by term.
pub fn dense_ising(q: &SquareMatrix) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = q.n();
    let mut j = vec![vec![0.0; n]; n];
    let mut h = vec![0.0; n];
    for a in 0..n {
        for b in 0..n {
            let w = q.get(a, b);
            if a == b {
                // w · (1 + s)/2
                h[a] += w / 2.0;
            } else {
                // w · (1 + s_a + s_b + s_a s_b)/4, with H = -½ Σ J s s + Σ h s
                h[a] += w / 4.0;
                h[b] += w / 4.0;
                j[a][b] -= w / 2.0;
            }
        }
    }
    (j, h)
}

/// Reference ballistic step on dense coefficients.
pub fn dense_step(
    j: &[Vec<f64>],
    h: &[f64],
    c0: f64,
    params: &SbParams,
    state: &mut OscillatorState,
) {
    let n = h.len();
    let span = (params.n_step.max(2) - 1) as f64;
    let pump = params.a0 * (state.step as f64 / span).min(1.0);
    let detune = params.a0 - pump;
    let dy: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|k| j[i][k] * state.x[k]).sum::<f64>() - h[i])
        .collect();
    for i in 0..n {
        let y = state.y[i] + (-detune * state.x[i] + c0 * dy[i]) * params.dt;
        let x = state.x[i] + params.a0 * y * params.dt;
        if x.abs() > 1.0 {
            state.x[i] = x.signum();
            state.y[i] = 0.0;
        } else {
            state.x[i] = x;
            state.y[i] = y;
        }
    }
    state.step += 1;
}

/// Strategy instance with a random sign pattern that always has at least
/// `n_s / 2` longs and shorts, random magnitudes, and random correlations.
pub fn random_strategy_instance<R: Rng>(
    n: usize,
    n_s: usize,
    rng: &mut R,
) -> (DeviationVector, CorrelationMatrix) {
    let mut signs: Vec<f64> = (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    for k in 0..n_s.min(n) {
        signs[k] = if k % 2 == 0 { 1.0 } else { -1.0 };
    }
    let dp = signs
        .iter()
        .map(|s| s * rng.random_range(0.001..0.03))
        .collect();
    let mut sigma = SquareMatrix::zeros(n);
    for a in 0..n {
        sigma.set(a, a, 1.0);
        for b in (a + 1)..n {
            let v = rng.random_range(0.0..1.0);
            sigma.set(a, b, v);
            sigma.set(b, a, v);
        }
    }
    (
        DeviationVector::unmasked(dp).unwrap(),
        CorrelationMatrix::new(sigma).unwrap(),
    )
}

/// Direct objective `-c1 Σ|Δp| b + Σ_{i≠j} σ b b`, without penalties.
pub fn direct_cost(bits: &[u8], dp: &[f64], sigma: &SquareMatrix, c1: f64) -> f64 {
    let sel: Vec<usize> = (0..bits.len()).filter(|&i| bits[i] == 1).collect();
    let mut cost = 0.0;
    for &i in &sel {
        cost -= c1 * dp[i].abs();
        for &j in &sel {
            if i != j {
                cost += sigma.get(i, j);
            }
        }
    }
    cost
}

/// `N_s` picks, half with negative and half with positive deviation, none
/// masked.
pub fn is_feasible(bits: &[u8], dp: &[f64], mask: &[bool], n_s: usize) -> bool {
    let sel: Vec<usize> = (0..bits.len()).filter(|&i| bits[i] == 1).collect();
    let longs = sel.iter().filter(|&&i| dp[i] < 0.0).count();
    let shorts = sel.iter().filter(|&&i| dp[i] > 0.0).count();
    sel.len() == n_s && longs == shorts && longs + shorts == n_s && sel.iter().all(|&i| !mask[i])
}

/// Checks every opened group and the open-set size implied by one day's
/// order log. Returns the number of groups checked.
pub fn audit_day(day: &DayResult, params: &StrategyParams) -> Result<usize, String> {
    for g in &day.groups {
        if g.picks.len() != params.n_s {
            return Err(format!(
                "{}: group of {} at {}",
                day.row.date,
                g.picks.len(),
                g.ts
            ));
        }
        let net: f64 = g.picks.iter().map(|p| p.dp.signum()).sum();
        if net != 0.0 {
            return Err(format!("{}: unbalanced group at {}", day.row.date, g.ts));
        }
        for p in &g.picks {
            let expect = if p.dp < 0.0 { Side::Long } else { Side::Short };
            if p.side != expect || p.dp == 0.0 {
                return Err(format!("{}: pick {} has wrong side", day.row.date, p.index));
            }
        }
    }
    let mut open = BTreeSet::new();
    for row in &day.order_log {
        match row.action {
            LogAction::OpenOrder => {
                if !open.insert(row.code.clone()) {
                    return Err(format!("{}: duplicate open of {}", day.row.date, row.code));
                }
                if open.len() > params.p_max {
                    return Err(format!(
                        "{}: {} open > p_max at {}",
                        day.row.date,
                        open.len(),
                        row.ts
                    ));
                }
            }
            LogAction::CloseFill => {
                if !open.remove(&row.code) {
                    return Err(format!("{}: close of unopened {}", day.row.date, row.code));
                }
            }
            LogAction::CloseOrder | LogAction::OpenFill => {}
        }
    }
    if !open.is_empty() {
        return Err(format!(
            "{}: {} positions left open",
            day.row.date,
            open.len()
        ));
    }
    if day.max_open > params.p_max {
        return Err(format!(
            "{}: engine reported max open {}",
            day.row.date, day.max_open
        ));
    }
    Ok(day.groups.len())
}
