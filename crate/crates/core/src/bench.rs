//! Solver timing, write-count instrumentation and a brute-force sweep on
//! small random strategy instances.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::ising::{BitVector, BRUTE_FORCE_MAX_N};
use crate::matrix::SquareMatrix;
use crate::sb::{self, SbParams};
use crate::strategy::{
    build_qubo, build_split, check_constraints, CorrelationMatrix, DeviationVector, StrategyParams,
};
use crate::Error;

/// Random instance with alternating deviation signs (so half the stocks are
/// long candidates), `|Δp|` uniform on `[0.001, 0.03)` and off-diagonal
/// `σ` uniform on `[0, 1)`.
pub fn random_instance<R: Rng>(n: usize, rng: &mut R) -> (DeviationVector, CorrelationMatrix) {
    let dp = (0..n)
        .map(|i| {
            let m = rng.random_range(0.001..0.03);
            if i % 2 == 0 {
                m
            } else {
                -m
            }
        })
        .collect();
    let mut s = SquareMatrix::zeros(n);
    for i in 0..n {
        s.set(i, i, 1.0);
        for j in (i + 1)..n {
            let v = rng.random_range(0.0..1.0);
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    (
        DeviationVector::unmasked(dp).expect("finite deviations"),
        CorrelationMatrix::new(s).expect("valid correlation"),
    )
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub n: usize,
    pub per_run: Vec<Duration>,
    pub best_energy: f64,
    /// Element writes of building the day part.
    pub day_writes: u64,
    /// Element writes of one tick update.
    pub tick_writes: u64,
}

impl BenchReport {
    pub fn write_ratio(&self) -> f64 {
        self.day_writes as f64 / self.tick_writes as f64
    }

    pub fn mean_run(&self) -> Duration {
        self.per_run.iter().sum::<Duration>() / self.per_run.len().max(1) as u32
    }

    pub fn max_run(&self) -> Duration {
        self.per_run.iter().copied().max().unwrap_or_default()
    }
}

pub fn run_bench(n: usize, sb_params: &SbParams, strategy: &StrategyParams) -> Result<BenchReport> {
    sb_params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sb_params.seed);
    let (dev, corr) = random_instance(n, &mut rng);
    let mut split = build_split(&dev, &corr, strategy)?;
    let day_writes = split.writes().day;

    let (dev2, _) = random_instance(n, &mut rng);
    let before = split.writes().tick;
    split.update_tick_in_place(&dev2.sgn(), &dev2.abs())?;
    let tick_writes = split.writes().tick - before;
    if split.writes().day != day_writes {
        return Err(Error::InvalidParams("tick update rewrote day data".into()));
    }

    let mut per_run = Vec::with_capacity(sb_params.restarts);
    let mut best_energy = f64::INFINITY;
    for r in 0..sb_params.restarts as u64 {
        let sol = sb::run(&split, sb_params, r)?;
        per_run.push(sol.elapsed);
        best_energy = best_energy.min(sol.energy);
    }
    Ok(BenchReport {
        n,
        per_run,
        best_energy,
        day_writes,
        tick_writes,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub instances: usize,
    pub feasible: usize,
    pub optimal: usize,
    /// Largest `(E − E_min) / (E_max − E_min)` over the feasible set, among
    /// feasible non-optimal results.
    pub worst_gap: f64,
}

/// Solves `count` random instances of size `n` and compares each result
/// with exhaustive search.
pub fn oracle_sweep(
    count: usize,
    n: usize,
    sb_params: &SbParams,
    strategy: &StrategyParams,
    seed: u64,
) -> Result<SweepReport> {
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SweepReport {
        instances: count,
        ..SweepReport::default()
    };
    for _ in 0..count {
        let (dev, corr) = random_instance(n, &mut rng);
        let qubo = build_qubo(&dev, &corr, strategy)?;
        let (_, e_min) = qubo.brute_force_min()?;
        let mut e_max = f64::NEG_INFINITY;
        for idx in 0..1u64 << n {
            let b = BitVector::from_index(idx, n);
            if check_constraints(&b, &dev, strategy.n_s).passed() {
                e_max = e_max.max(qubo.energy(&b)?);
            }
        }
        let sol = sb::solve(&build_split(&dev, &corr, strategy)?, sb_params)?;
        let b = sol.spins.to_bits();
        if !check_constraints(&b, &dev, strategy.n_s).passed() {
            continue;
        }
        report.feasible += 1;
        let e = qubo.energy(&b)?;
        let scale = 1e-9 * e_min.abs().max(1.0);
        if e <= e_min + scale {
            report.optimal += 1;
        } else if e_max > e_min {
            report.worst_gap = report.worst_gap.max((e - e_min) / (e_max - e_min));
        }
    }
    Ok(report)
}
