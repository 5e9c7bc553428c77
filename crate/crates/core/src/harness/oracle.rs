//! Exact tabular solutions used to validate learned behaviour.

use std::collections::{HashMap, VecDeque};

use crate::env::{ActionId, EnvKind, EnvSpec, StateVector};
use crate::nn::argmax;
use crate::{Error, Result};

/// Largest state space the tabular solvers accept.
pub const MAX_STATES: usize = 1 << 20;

/// Optimal values, action values and greedy policy over every state.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub states: Vec<StateVector>,
    pub values: Vec<f64>,
    /// `q[s][a]`.
    pub q: Vec<Vec<f64>>,
    pub policy: Vec<ActionId>,
    index: HashMap<Vec<u64>, usize>,
}

fn key(state: &[f64]) -> Vec<u64> {
    state.iter().map(|v| v.to_bits()).collect()
}

impl ValueTable {
    pub fn index_of(&self, state: &[f64]) -> Option<usize> {
        self.index.get(&key(state)).copied()
    }

    pub fn value(&self, state: &[f64]) -> Option<f64> {
        self.index_of(state).map(|i| self.values[i])
    }
}

fn state_count(env: &EnvSpec) -> Option<usize> {
    match env.kind {
        EnvKind::Gridworld => env.size.checked_mul(env.size),
        EnvKind::Hanoi => 3usize.checked_pow(env.size as u32),
    }
}

fn check_size(env: &EnvSpec) -> Result<()> {
    env.validate()?;
    match state_count(env) {
        Some(n) if n <= MAX_STATES => Ok(()),
        _ => Err(Error::InvalidInput(format!(
            "{} {} is too large for tabular solution",
            env.kind, env.size
        ))),
    }
}

/// Value iteration with the goal absorbing at value zero:
/// `Q(s, a) = R(s') + gamma * V(s') * [s' not goal]`.
/// Iterates until the sup-norm change is below `1e-10`.
pub fn value_iteration(env: &EnvSpec, gamma: f64) -> Result<ValueTable> {
    check_size(env)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!("gamma {gamma} not in [0, 1)")));
    }
    let states = env.enumerate_states();
    let index: HashMap<_, _> = states.iter().enumerate().map(|(i, s)| (key(s), i)).collect();
    let actions = env.action_count();

    // Successor table: (next index, reward, next is goal).
    let mut succ = Vec::with_capacity(states.len() * actions);
    for s in &states {
        for a in 0..actions {
            let step = env.step(s, ActionId(a))?;
            let j = index[&key(&step.next)];
            succ.push((j, step.reward, step.terminal));
        }
    }
    let goal: Vec<bool> = states.iter().map(|s| env.is_goal(s)).collect();

    let mut values = vec![0.0; states.len()];
    let mut q = vec![vec![0.0; actions]; states.len()];
    loop {
        let mut residual: f64 = 0.0;
        let mut next_values = vec![0.0; states.len()];
        for i in 0..states.len() {
            if goal[i] {
                continue;
            }
            for a in 0..actions {
                let (j, r, terminal) = succ[i * actions + a];
                q[i][a] = r + if terminal { 0.0 } else { gamma * values[j] };
            }
            next_values[i] = q[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            residual = residual.max((next_values[i] - values[i]).abs());
        }
        values = next_values;
        if residual < 1e-10 {
            break;
        }
    }
    // Final action values against the converged V.
    for i in 0..states.len() {
        if goal[i] {
            q[i].iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        for a in 0..actions {
            let (j, r, terminal) = succ[i * actions + a];
            q[i][a] = r + if terminal { 0.0 } else { gamma * values[j] };
        }
    }
    let policy = q.iter().map(|row| ActionId(argmax(row))).collect();
    Ok(ValueTable {
        states,
        values,
        q,
        policy,
        index,
    })
}

/// Steps taken by the greedy policy of `table` from reset to the goal, or
/// `None` if it loops or exceeds the state count.
pub fn greedy_path_length(env: &EnvSpec, table: &ValueTable) -> Result<Option<usize>> {
    let mut s = env.reset();
    for steps in 0..=table.states.len() {
        if env.is_goal(&s) {
            return Ok(Some(steps));
        }
        let i = table
            .index_of(&s)
            .ok_or_else(|| Error::InvalidInput("state missing from table".into()))?;
        s = env.step(&s, table.policy[i])?.next;
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathLength {
    Reachable(usize),
    Unreachable,
}

/// Breadth-first shortest path over an arbitrary successor function.
pub fn bfs<S, F, G>(start: S, successors: F, is_goal: G) -> PathLength
where
    S: Clone + Eq + std::hash::Hash,
    F: Fn(&S) -> Vec<S>,
    G: Fn(&S) -> bool,
{
    let mut seen = std::collections::HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back((start, 0));
    while let Some((s, d)) = queue.pop_front() {
        if is_goal(&s) {
            return PathLength::Reachable(d);
        }
        for n in successors(&s) {
            if seen.insert(n.clone()) {
                queue.push_back((n, d + 1));
            }
        }
    }
    PathLength::Unreachable
}

/// Shortest action count from reset to the goal.
pub fn bfs_shortest_path(env: &EnvSpec) -> Result<PathLength> {
    check_size(env)?;
    let actions = env.action_count();
    let step_err = std::cell::Cell::new(None);
    let result = bfs(
        key(&env.reset()),
        |k| {
            let s: Vec<f64> = k.iter().map(|b| f64::from_bits(*b)).collect();
            (0..actions)
                .filter_map(|a| match env.step(&s, ActionId(a)) {
                    Ok(step) => Some(key(&step.next)),
                    Err(e) => {
                        step_err.set(Some(e));
                        None
                    }
                })
                .collect()
        },
        |k| {
            let s: Vec<f64> = k.iter().map(|b| f64::from_bits(*b)).collect();
            env.is_goal(&s)
        },
    );
    match step_err.into_inner() {
        Some(e) => Err(e),
        None => Ok(result),
    }
}
