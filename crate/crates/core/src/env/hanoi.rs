//! Towers of Hanoi on three pillars.
//!
//! Discs are indexed smallest first. The state holds one one-hot group of
//! three bits per disc marking its pillar; stacking order on a pillar is
//! implied by disc size. Action `3 * disc + pillar` moves `disc` onto
//! `pillar` (both zero-based) when legal and is a no-op otherwise.

use super::{ActionId, StateVector};
use crate::{Error, Result};

/// Encodes one-based pillar indices (one per disc, smallest first).
pub fn encode_hanoi(disc_pillars: &[usize], n: usize) -> Result<StateVector> {
    if disc_pillars.len() != n {
        return Err(Error::invalid(format!(
            "expected {n} disc positions, got {}",
            disc_pillars.len()
        )));
    }
    let mut bits = vec![0.0; 3 * n];
    for (disc, &pillar) in disc_pillars.iter().enumerate() {
        if !(1..=3).contains(&pillar) {
            return Err(Error::invalid(format!("pillar {pillar} not in 1..=3")));
        }
        bits[3 * disc + pillar - 1] = 1.0;
    }
    Ok(StateVector(bits))
}

/// One-based pillar of each disc, or `None` unless every group is exactly one-hot.
pub fn decode_hanoi(state: &[f64]) -> Option<Vec<usize>> {
    if state.is_empty() || state.len() % 3 != 0 {
        return None;
    }
    state
        .chunks_exact(3)
        .map(|g| match g {
            [a, b, c] if *a == 1.0 && *b == 0.0 && *c == 0.0 => Some(1),
            [a, b, c] if *a == 0.0 && *b == 1.0 && *c == 0.0 => Some(2),
            [a, b, c] if *a == 0.0 && *b == 0.0 && *c == 1.0 => Some(3),
            _ => None,
        })
        .collect()
}

pub(super) fn is_goal(state: &[f64]) -> bool {
    state.chunks_exact(3).all(|g| g[0] == 0.0 && g[1] == 0.0 && g[2] == 1.0)
}

/// Whether `disc` may move onto `target` (both one-based pillars in `pillars`).
pub(crate) fn is_legal(pillars: &[usize], disc: usize, target: usize) -> bool {
    let from = pillars[disc];
    if from == target {
        return false;
    }
    // Smaller discs are exactly those with lower index.
    pillars[..disc].iter().all(|&p| p != from && p != target)
}

pub(super) fn step(n: usize, state: &[f64], action: ActionId) -> Result<StateVector> {
    let mut pillars = decode_hanoi(state)
        .filter(|p| p.len() == n)
        .ok_or_else(|| Error::invalid(format!("{state:?} is not a {n}-disc Hanoi state")))?;
    let disc = action.0 / 3;
    let target = action.0 % 3 + 1;
    if is_legal(&pillars, disc, target) {
        pillars[disc] = target;
    }
    encode_hanoi(&pillars, n)
}

/// All `3^n` configurations, pillar of disc 0 varying fastest.
pub(super) fn enumerate(n: usize) -> Vec<StateVector> {
    let total = 3usize.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let pillars: Vec<usize> = (0..n)
                .map(|_| {
                    let p = code % 3 + 1;
                    code /= 3;
                    p
                })
                .collect();
            encode_hanoi(&pillars, n).expect("valid pillars")
        })
        .collect()
}
