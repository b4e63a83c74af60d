//! Seeded Monte Carlo ensembles. Trajectory `k` always uses switch stream
//! `k` of the master seed, and results are collected in index order, so the
//! output does not depend on how work lands on threads.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{simulate_events, SwitchedFlow};
use crate::switching::SwitchConfig;
use crate::trajectory::{TimeGrid, TrajectorySample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecPolicy {
    Sequential,
    /// Rayon fan-out; identical to `Sequential` without the `parallel` feature.
    #[default]
    Parallel,
}

/// Evaluates `f(0), …, f(count - 1)` and returns the results in order.
pub fn map_indexed<T, F>(policy: ExecPolicy, count: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    match policy {
        #[cfg(feature = "parallel")]
        ExecPolicy::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
        _ => (0..count).map(f).collect(),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (ignored without the
/// `parallel` feature).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::error::Error::Config(format!("cannot build thread pool: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(f())
    }
}

/// `runs` independent trajectories from `x0`, trajectory `k` driven by
/// stream `k` of `switch`.
pub fn run_ensemble<F>(
    flow: &F,
    x0: &DVector<f64>,
    switch: &SwitchConfig,
    runs: u64,
    grid: &TimeGrid,
    policy: ExecPolicy,
) -> Result<Vec<TrajectorySample>>
where
    F: SwitchedFlow + ?Sized,
{
    run_ensemble_streams(flow, x0, switch, 0..runs, grid, policy)
}

/// Like [`run_ensemble`] over an explicit range of stream ids.
pub fn run_ensemble_streams<F>(
    flow: &F,
    x0: &DVector<f64>,
    switch: &SwitchConfig,
    streams: std::ops::Range<u64>,
    grid: &TimeGrid,
    policy: ExecPolicy,
) -> Result<Vec<TrajectorySample>>
where
    F: SwitchedFlow + ?Sized,
{
    let start = streams.start;
    let count = streams.end.saturating_sub(start);
    map_indexed(policy, count, |k| simulate_events(flow, x0, switch.events(start + k), grid))
}
