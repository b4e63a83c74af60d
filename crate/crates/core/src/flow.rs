//! Piecewise composition of two exactly solvable subflows, and the explicit
//! integrator used for the full (unsplit) subgradient flows.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::switching::{Regime, SwitchEvent, SwitchSchedule};
use crate::trajectory::{TimeGrid, TrajectorySample};

/// A pair of subflows that can each be advanced by an arbitrary time.
pub trait SwitchedFlow: Sync {
    type Workspace: Send;

    fn dim(&self) -> usize;

    fn workspace(&self) -> Self::Workspace;

    /// Advances `state` in place by `dt ≥ 0` under `regime`.
    fn advance(&self, regime: Regime, state: &mut DVector<f64>, dt: f64, ws: &mut Self::Workspace) -> Result<()>;
}

/// Follows `events` from `x0`, recording the state at every grid time.
///
/// Grid points inside an event are evaluated by advancing a copy of the
/// event's initial state by the offset, so the record carries no
/// time-stepping error beyond that of the subflow solvers themselves.
pub fn simulate_events<F, I>(flow: &F, x0: &DVector<f64>, events: I, grid: &TimeGrid) -> Result<TrajectorySample>
where
    F: SwitchedFlow + ?Sized,
    I: IntoIterator<Item = SwitchEvent>,
{
    if x0.len() != flow.dim() {
        return Err(Error::DimensionMismatch {
            expected: flow.dim(),
            found: x0.len(),
        });
    }
    let times = grid.times();
    let mut ws = flow.workspace();
    let mut state = x0.clone();
    let mut start = 0.0;
    let mut next = 0usize;
    let mut states = Vec::with_capacity(times.len());
    let mut regimes = Vec::with_capacity(times.len());

    for event in events {
        let end = start + event.duration;
        while next < times.len() && times[next] <= end {
            let mut probe = state.clone();
            flow.advance(event.regime, &mut probe, times[next] - start, &mut ws)?;
            states.push(probe);
            regimes.push(event.regime);
            next += 1;
        }
        if next == times.len() {
            return Ok(TrajectorySample {
                times: times.to_vec(),
                states,
                regimes: Some(regimes),
            });
        }
        flow.advance(event.regime, &mut state, event.duration, &mut ws)?;
        start = end;
    }
    Err(Error::invalid(format!(
        "switch schedule ends at {start} before the last grid time {}",
        grid.end()
    )))
}

pub fn simulate_schedule<F>(flow: &F, x0: &DVector<f64>, schedule: &SwitchSchedule, grid: &TimeGrid) -> Result<TrajectorySample>
where
    F: SwitchedFlow + ?Sized,
{
    if grid.end() > schedule.horizon() {
        return Err(Error::invalid(format!(
            "grid ends at {} beyond the schedule horizon {}",
            grid.end(),
            schedule.horizon()
        )));
    }
    simulate_events(flow, x0, schedule.events().iter().copied(), grid)
}

/// Explicit Euler on a semi-derivative field with kink clamping: a
/// coordinate whose update crosses one of `kinks` is set to that kink for
/// the step. Whether it stays there is decided by the field at the next
/// step (the field vanishes at sticky kinks).
pub(crate) fn euler_with_kinks<Fld>(
    mut field: Fld,
    kinks: &[f64],
    x0: &DVector<f64>,
    grid: &TimeGrid,
    step: f64,
) -> Result<TrajectorySample>
where
    Fld: FnMut(&DVector<f64>, &mut DVector<f64>),
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    let n = x0.len();
    let mut x = x0.clone();
    let mut v = DVector::zeros(n);
    let mut t = 0.0;
    let mut states = Vec::with_capacity(grid.len());
    for &target in grid.times() {
        while t < target {
            let h = step.min(target - t);
            field(&x, &mut v);
            for i in 0..n {
                let old = x[i];
                let mut new = old + h * v[i];
                for &k in kinks {
                    if (old - k) * (new - k) < 0.0 {
                        new = k;
                    }
                }
                x[i] = new;
            }
            // land exactly on grid times
            t = if target - t <= step { target } else { t + h };
        }
        if x.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("deterministic flow state"));
        }
        states.push(x.clone());
    }
    Ok(TrajectorySample {
        times: grid.times().to_vec(),
        states,
        regimes: None,
    })
}
