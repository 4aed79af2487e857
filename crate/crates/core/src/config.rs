//! Flat `key = value` run configuration shared by the engine, the backcast
//! and the command-line tool. Unknown keys are rejected by name.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::sb::SbParams;
use crate::strategy::{StrategyParams, CORRELATION_WINDOW};

pub const DEFAULT_SESSION_US: i64 = 9_000_000_000;
pub const DEFAULT_T_FORCE_US: i64 = 60_000_000;

/// Trading session in microseconds since the feed's time origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Session {
    pub open: i64,
    pub close: i64,
    /// Positions are force-closed at `close - t_force`, and no new groups
    /// open after that instant.
    pub t_force: i64,
}

impl Default for Session {
    fn default() -> Self {
        Session {
            open: 0,
            close: DEFAULT_SESSION_US,
            t_force: DEFAULT_T_FORCE_US,
        }
    }
}

impl Session {
    pub fn validate(&self) -> Result<()> {
        if self.close <= self.open {
            return Err(Error::InvalidParams(
                "session close must follow open".into(),
            ));
        }
        if self.t_force < 0 || self.t_force > self.close - self.open {
            return Err(Error::InvalidParams(format!(
                "t_force must be within the session, got {} us",
                self.t_force
            )));
        }
        Ok(())
    }

    pub fn unwind_at(&self) -> i64 {
        self.close - self.t_force
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub strategy: StrategyParams,
    pub sb: SbParams,
    pub session: Session,
    /// Fraction of notional charged per side.
    pub commission_rate: f64,
    /// Days that only build correlation history before trading starts.
    pub warmup_days: usize,
    pub corr_window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            strategy: StrategyParams::default(),
            sb: SbParams::default(),
            session: Session::default(),
            commission_rate: 0.0,
            warmup_days: CORRELATION_WINDOW,
            corr_window: CORRELATION_WINDOW,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_s: Option<usize>,
    p_max: Option<usize>,
    a_trans: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    c3: Option<f64>,
    accept_threshold: Option<f64>,
    n_step: Option<usize>,
    dt: Option<f64>,
    a0: Option<f64>,
    c0: Option<f64>,
    restarts: Option<usize>,
    seed: Option<u64>,
    session_open_us: Option<i64>,
    session_close_us: Option<i64>,
    t_force_us: Option<i64>,
    commission_rate: Option<f64>,
    warmup_days: Option<usize>,
    corr_window: Option<usize>,
}

macro_rules! overlay {
    ($raw:ident, $dst:expr, $($key:ident),+) => {
        $(if let Some(v) = $raw.$key { $dst.$key = v; })+
    };
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            msg: e.message().to_string(),
        })?;
        let mut cfg = RunConfig::default();
        overlay!(
            raw,
            cfg.strategy,
            n_s,
            p_max,
            a_trans,
            c1,
            c2,
            c3,
            accept_threshold
        );
        overlay!(raw, cfg.sb, n_step, dt, a0, restarts, seed);
        if raw.c0.is_some() {
            cfg.sb.c0 = raw.c0;
        }
        overlay!(raw, cfg, commission_rate, warmup_days, corr_window);
        if let Some(v) = raw.session_open_us {
            cfg.session.open = v;
        }
        if let Some(v) = raw.session_close_us {
            cfg.session.close = v;
        }
        if let Some(v) = raw.t_force_us {
            cfg.session.t_force = v;
        }
        cfg.validate().map_err(|e| Error::Config {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        self.sb.validate()?;
        self.session.validate()?;
        if !(self.commission_rate >= 0.0 && self.commission_rate.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "commission_rate must be >= 0, got {}",
                self.commission_rate
            )));
        }
        if self.corr_window == 0 {
            return Err(Error::InvalidParams("corr_window must be >= 1".into()));
        }
        Ok(())
    }
}
