use super::{grid_action, ActionId, StateVector};
use crate::{Error, Result};

/// Integer cell of a real grid state, if `state` is one.
pub(super) fn cell(n: usize, state: &[f64]) -> Option<(usize, usize)> {
    let coord = |v: f64| {
        (v.fract() == 0.0 && v >= 0.0 && v < n as f64).then_some(v as usize)
    };
    match state {
        [x, y] => Some((coord(*x)?, coord(*y)?)),
        _ => None,
    }
}

pub(super) fn is_goal(n: usize, state: &[f64]) -> bool {
    let far = (n - 1) as f64;
    state[0] == far && state[1] == far
}

/// Moves one cell; walls clamp, leaving the position unchanged.
pub(super) fn step(n: usize, state: &[f64], action: ActionId) -> Result<StateVector> {
    let (x, y) = cell(n, state)
        .ok_or_else(|| Error::invalid(format!("{state:?} is not a cell of a {n}x{n} grid")))?;
    let last = n - 1;
    let (x, y) = match action {
        grid_action::UP => (x, (y + 1).min(last)),
        grid_action::DOWN => (x, y.saturating_sub(1)),
        grid_action::LEFT => (x.saturating_sub(1), y),
        grid_action::RIGHT => ((x + 1).min(last), y),
        other => return Err(Error::invalid(format!("gridworld action {other}"))),
    };
    Ok(StateVector(vec![x as f64, y as f64]))
}
