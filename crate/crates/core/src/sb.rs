//! Ballistic simulated bifurcation over a day/tick split problem.
//!
//! The Ising problem is held as two parts. The day part `(J^day, h^day)` is
//! a dense matrix that changes once per session. The tick part is the
//! O(n) data `sgn(Δp)`, `|Δp|` plus the coefficients `c1`, `c3`; its
//! couplings `J^tick_ij = -c3 sgn_i sgn_j / 2` are never materialised.
//! Each step the momentum correction is assembled from a dense mat-vec on
//! the day part and an O(n) reduction on the tick part:
//!
//! ```text
//! ΔY      = Σ_j sgn_j x_j
//! Δy_i    = Σ_j J^day_ij x_j - h^day_i
//!         - (c3/2) sgn_i (ΔY - sgn_i x_i) - h^tick_i
//! h^tick_i = -c1 |Δp_i| / 2 + c3 (Σ_j sgn_j / 2) sgn_i
//! ```
//!
//! followed by the ballistic update
//!
//! ```text
//! y_i += [-(a0 - a(t)) x_i + c0 Δy_i] dt
//! x_i += a0 y_i dt
//! |x_i| > 1  =>  x_i = sgn(x_i), y_i = 0
//! ```

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ising::{IsingProblem, SpinVector};
use crate::matrix::SquareMatrix;

const INIT_MOMENTUM: f64 = 0.1;

/// Gain in the default coupling scale `c0 = C0_GAIN · a0 / (√n · rms(J))`.
pub const C0_GAIN: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SbParams {
    pub n_step: usize,
    pub dt: f64,
    /// Detuning amplitude; the pump ramps linearly from 0 to `a0`. With
    /// `dt` and `n_step` fixed it also sets the effective evolution time
    /// `a0 · dt · n_step`.
    pub a0: f64,
    /// Coupling scale. `None` derives it from the problem, see
    /// [`SplitProblem::default_c0`].
    pub c0: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SbParams {
    fn default() -> Self {
        SbParams {
            n_step: 300,
            dt: 0.02,
            a0: 20.0,
            c0: None,
            restarts: 10,
            seed: 0,
        }
    }
}

impl SbParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_step == 0 {
            return Err(Error::InvalidParams("n_step must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "a0 must be positive, got {}",
                self.a0
            )));
        }
        if let Some(c0) = self.c0 {
            if !(c0 > 0.0 && c0.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "c0 must be positive, got {c0}"
                )));
            }
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParams("restarts must be at least 1".into()));
        }
        Ok(())
    }

    /// Pump amplitude `a(t)` at iteration `step`: linear from 0 at the first
    /// step to `a0` at the last.
    pub fn pump(&self, step: usize) -> f64 {
        let span = self.n_step.saturating_sub(1).max(1) as f64;
        self.a0 * (step as f64 / span).min(1.0)
    }
}

/// Element-write counters used to show that tick updates touch O(n) data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteStats {
    pub day: u64,
    pub tick: u64,
}

impl WriteStats {
    pub fn bytes(&self) -> (u64, u64) {
        let w = std::mem::size_of::<f64>() as u64;
        (self.day * w, self.tick * w)
    }
}

#[derive(Debug, PartialEq)]
pub struct DayComponent {
    j: SquareMatrix,
    h: Vec<f64>,
    offset: f64,
}

impl DayComponent {
    pub fn j(&self) -> &SquareMatrix {
        &self.j
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

#[derive(Debug, Clone)]
pub struct SplitProblem {
    day: Arc<DayComponent>,
    sgn_dp: Vec<i8>,
    abs_dp: Vec<f64>,
    h_tick: Vec<f64>,
    c1: f64,
    c3: f64,
    writes: WriteStats,
}

impl PartialEq for SplitProblem {
    fn eq(&self, other: &Self) -> bool {
        self.day == other.day
            && self.sgn_dp == other.sgn_dp
            && self.abs_dp == other.abs_dp
            && self.c1 == other.c1
            && self.c3 == other.c3
    }
}

fn validate_tick(n: usize, sgn_dp: &[i8], abs_dp: &[f64]) -> Result<()> {
    for len in [sgn_dp.len(), abs_dp.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    for (i, (&s, &a)) in sgn_dp.iter().zip(abs_dp).enumerate() {
        if !(-1..=1).contains(&s) {
            return Err(Error::InvalidParams(format!("sgn_dp[{i}] = {s}")));
        }
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidParams(format!("abs_dp[{i}] = {a}")));
        }
        if s == 0 && a != 0.0 {
            return Err(Error::InvalidParams(format!(
                "abs_dp[{i}] = {a} but sgn_dp[{i}] = 0"
            )));
        }
    }
    Ok(())
}

impl SplitProblem {
    pub fn new(
        day: IsingProblem,
        sgn_dp: Vec<i8>,
        abs_dp: Vec<f64>,
        c1: f64,
        c3: f64,
    ) -> Result<Self> {
        let n = day.n();
        validate_tick(n, &sgn_dp, &abs_dp)?;
        for (name, c) in [("c1", c1), ("c3", c3)] {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} = {c}")));
            }
        }
        let day = DayComponent {
            j: day.j().clone(),
            h: day.h().to_vec(),
            offset: day.offset(),
        };
        let mut p = SplitProblem {
            day: Arc::new(day),
            sgn_dp,
            abs_dp,
            h_tick: Vec::new(),
            c1,
            c3,
            writes: WriteStats {
                day: (n * n + n) as u64,
                tick: 2 * n as u64,
            },
        };
        p.h_tick = p.compute_h_tick();
        p.writes.tick += n as u64;
        Ok(p)
    }

    /// A problem with no tick component.
    pub fn from_ising(p: IsingProblem) -> Self {
        let n = p.n();
        SplitProblem::new(p, vec![0; n], vec![0.0; n], 0.0, 0.0)
            .expect("empty tick component is always valid")
    }

    pub fn n(&self) -> usize {
        self.sgn_dp.len()
    }

    pub fn day(&self) -> &Arc<DayComponent> {
        &self.day
    }

    pub fn j_day(&self) -> &SquareMatrix {
        &self.day.j
    }

    pub fn h_day(&self) -> &[f64] {
        &self.day.h
    }

    pub fn sgn_dp(&self) -> &[i8] {
        &self.sgn_dp
    }

    pub fn abs_dp(&self) -> &[f64] {
        &self.abs_dp
    }

    /// Cached `h^tick`, refreshed by every tick update.
    pub fn h_tick(&self) -> &[f64] {
        &self.h_tick
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c3(&self) -> f64 {
        self.c3
    }

    pub fn writes(&self) -> WriteStats {
        self.writes
    }

    /// `h^tick_i = -c1 |Δp_i| / 2 + c3 (Σ_j sgn_j / 2) sgn_i`, computed fresh.
    pub fn compute_h_tick(&self) -> Vec<f64> {
        let half_sum: f64 = self.sgn_dp.iter().map(|&s| s as f64).sum::<f64>() / 2.0;
        self.sgn_dp
            .iter()
            .zip(&self.abs_dp)
            .map(|(&s, &a)| -self.c1 * a / 2.0 + self.c3 * half_sum * s as f64)
            .collect()
    }

    /// Energy constant contributed by the tick terms under the QUBO→Ising map.
    pub fn tick_offset(&self) -> f64 {
        let nonzero = self.sgn_dp.iter().filter(|&&s| s != 0).count() as f64;
        let sum: f64 = self.sgn_dp.iter().map(|&s| s as f64).sum();
        let abs_sum: f64 = self.abs_dp.iter().sum();
        -self.c1 * abs_sum / 2.0 + self.c3 * nonzero / 2.0 + self.c3 * (sum * sum - nonzero) / 4.0
    }

    /// Replaces the tick component, sharing the day part with `self`.
    pub fn update_tick(&self, sgn_dp: Vec<i8>, abs_dp: Vec<f64>) -> Result<Self> {
        let mut next = self.clone();
        next.update_tick_in_place(&sgn_dp, &abs_dp)?;
        Ok(next)
    }

    pub fn update_tick_in_place(&mut self, sgn_dp: &[i8], abs_dp: &[f64]) -> Result<()> {
        let n = self.n();
        validate_tick(n, sgn_dp, abs_dp)?;
        self.sgn_dp.copy_from_slice(sgn_dp);
        self.abs_dp.copy_from_slice(abs_dp);
        self.h_tick = self.compute_h_tick();
        self.writes.tick += 3 * n as u64;
        Ok(())
    }

    /// Monolithic `(J, h, offset)` with the tick couplings made explicit.
    pub fn dense_reconstruct(&self) -> IsingProblem {
        let n = self.n();
        let j = SquareMatrix::from_fn(n, |a, b| {
            if a == b {
                0.0
            } else {
                self.day.j.get(a, b) - self.c3 * (self.sgn_dp[a] * self.sgn_dp[b]) as f64 / 2.0
            }
        });
        let h = self
            .day
            .h
            .iter()
            .zip(&self.h_tick)
            .map(|(d, t)| d + t)
            .collect();
        IsingProblem::new(j, h, self.day.offset + self.tick_offset())
            .expect("split components are symmetric with zero diagonal")
    }

    /// Ising energy of the full problem evaluated through the split form.
    pub fn energy(&self, s: &SpinVector) -> Result<f64> {
        if s.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: s.len(),
            });
        }
        let x = s.as_f64();
        let day = -0.5 * self.day.j.quad_form(&x)
            + self.day.h.iter().zip(&x).map(|(h, s)| h * s).sum::<f64>()
            + self.day.offset;
        // -½ Σ_{i≠j} J^tick_ij s_i s_j = (c3/4) (T² - Σ sgn_i²)
        let t: f64 = self.sgn_dp.iter().zip(&x).map(|(&g, s)| g as f64 * s).sum();
        let nonzero = self.sgn_dp.iter().filter(|&&g| g != 0).count() as f64;
        let tick = self.c3 / 4.0 * (t * t - nonzero)
            + self.h_tick.iter().zip(&x).map(|(h, s)| h * s).sum::<f64>()
            + self.tick_offset();
        Ok(day + tick)
    }

    /// `C0_GAIN · a0 / (√n · rms(J^day nonzeros))`. Falls back to the rms
    /// of the total bias when the day couplings are all zero.
    pub fn default_c0(&self, a0: f64) -> f64 {
        let n = self.n().max(1) as f64;
        let (sq, cnt) = self
            .day
            .j
            .as_slice()
            .iter()
            .filter(|v| **v != 0.0)
            .fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
        let scale = if cnt > 0 {
            (sq / cnt as f64).sqrt()
        } else {
            let h: Vec<f64> = self
                .day
                .h
                .iter()
                .zip(&self.h_tick)
                .map(|(a, b)| a + b)
                .filter(|v| *v != 0.0)
                .collect();
            if h.is_empty() {
                return C0_GAIN * a0;
            }
            (h.iter().map(|v| v * v).sum::<f64>() / h.len() as f64).sqrt()
        };
        C0_GAIN * a0 / (n.sqrt() * scale)
    }
}

/// `ΔY^tick = Σ_i sgn(Δp_i) x_i`.
pub fn compute_dy_tick(sgn_dp: &[i8], x: &[f64]) -> f64 {
    sgn_dp.iter().zip(x).map(|(&s, &x)| s as f64 * x).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub step: usize,
}

impl OscillatorState {
    pub fn zeros(n: usize) -> Self {
        OscillatorState {
            x: vec![0.0; n],
            y: vec![0.0; n],
            step: 0,
        }
    }

    /// `x = 0`, `y ~ U[-0.1, 0.1]`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        OscillatorState {
            x: vec![0.0; n],
            y: (0..n)
                .map(|_| rng.random_range(-INIT_MOMENTUM..=INIT_MOMENTUM))
                .collect(),
            step: 0,
        }
    }
}

/// RNG for restart `run_index`: one ChaCha stream per run under a shared key.
pub fn substream(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

/// Time-evolution kernel bound to one problem and parameter set.
pub struct Stepper<'a> {
    problem: &'a SplitProblem,
    params: &'a SbParams,
    c0: f64,
    dy: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a SplitProblem, params: &'a SbParams) -> Result<Self> {
        params.validate()?;
        let c0 = params.c0.unwrap_or_else(|| problem.default_c0(params.a0));
        Ok(Stepper {
            problem,
            params,
            c0,
            dy: vec![0.0; problem.n()],
        })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Momentum correction for the current positions, day plus tick parts.
    pub fn momentum_correction(&mut self, x: &[f64]) -> &[f64] {
        let p = self.problem;
        p.day.j.matvec_into(x, &mut self.dy);
        let dy_tick = compute_dy_tick(&p.sgn_dp, x);
        let half_c3 = p.c3 / 2.0;
        for i in 0..x.len() {
            let s = p.sgn_dp[i] as f64;
            let tick = -half_c3 * s * (dy_tick - s * x[i]) - p.h_tick[i];
            self.dy[i] += tick - p.day.h[i];
        }
        &self.dy
    }

    pub fn step(&mut self, state: &mut OscillatorState) -> Result<()> {
        let n = self.problem.n();
        if state.x.len() != n || state.y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: state.x.len().min(state.y.len()),
            });
        }
        if state.step >= self.params.n_step {
            return Err(Error::InvalidParams(format!(
                "state already at step {} of {}",
                state.step, self.params.n_step
            )));
        }
        let a0 = self.params.a0;
        let dt = self.params.dt;
        let detune = a0 - self.params.pump(state.step);
        let c0 = self.c0;
        self.momentum_correction(&state.x);
        for i in 0..n {
            let y = state.y[i] + (-detune * state.x[i] + c0 * self.dy[i]) * dt;
            let x = state.x[i] + a0 * y * dt;
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::Diverged { step: state.step });
            }
            if x.abs() > 1.0 {
                state.x[i] = x.signum();
                state.y[i] = 0.0;
            } else {
                state.x[i] = x;
                state.y[i] = y;
            }
        }
        state.step += 1;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SbSolution {
    pub spins: SpinVector,
    pub energy: f64,
    pub run_index: u64,
    pub elapsed: Duration,
}

/// One annealing run from the initial state of substream `run_index`.
pub fn run(p: &SplitProblem, params: &SbParams, run_index: u64) -> Result<SbSolution> {
    let start = Instant::now();
    let mut stepper = Stepper::new(p, params)?;
    let mut rng = substream(params.seed, run_index);
    let mut state = OscillatorState::random(p.n(), &mut rng);
    for _ in 0..params.n_step {
        stepper.step(&mut state)?;
    }
    let spins = SpinVector::from_positions(&state.x);
    let energy = p.energy(&spins)?;
    Ok(SbSolution {
        spins,
        energy,
        run_index,
        elapsed: start.elapsed(),
    })
}

/// Best of `params.restarts` runs; ties go to the lowest run index.
pub fn solve(p: &SplitProblem, params: &SbParams) -> Result<SbSolution> {
    params.validate()?;
    let start = Instant::now();
    let mut best: Option<SbSolution> = None;
    for r in 0..params.restarts as u64 {
        let sol = run(p, params, r)?;
        if best.as_ref().is_none_or(|b| sol.energy < b.energy) {
            best = Some(sol);
        }
    }
    let mut best = best.expect("restarts >= 1");
    best.elapsed = start.elapsed();
    Ok(best)
}
