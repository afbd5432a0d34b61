//! Sub-channel assignment for several infrastructure users.
//!
//! Each user gets a disjoint set of sub-channels; on its set it runs the
//! sensing-averaged optimal allocation, whose objective is `f(A)`. The
//! exhaustive search minimizes the sum of `f` over all labeled partitions.
//! The greedy heuristic ignores overlap and only tries to keep transmit
//! power low, then reports the overlap of what it picked.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::avg_alloc::solve_p2;
use crate::ctmc::{CtmcParams, Sensed};
use crate::error::{Error, Result};
use crate::frame_alloc::dual::{Term, TermSet, Tolerances};
use crate::frame_alloc::{max_rate, ProblemSpec};

/// Default cap on the number of labeled partitions the exhaustive search visits.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Largest channel count for which every subset is tabulated.
const MAX_CHANNELS: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    /// Gain of this user on every sub-channel.
    pub beta: Vec<f64>,
    /// Rate constraint, nats per frame.
    pub rate: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentProblem {
    pub frame: f64,
    pub bands: Vec<CtmcParams>,
    pub band_of: Vec<usize>,
    pub users: Vec<UserSpec>,
}

impl AssignmentProblem {
    pub fn channels(&self) -> usize {
        self.band_of.len()
    }

    /// Full single-user spec of user `u` over all sub-channels.
    pub fn user_spec(&self, u: usize) -> ProblemSpec {
        let user = &self.users[u];
        ProblemSpec {
            frame: self.frame,
            rate: user.rate,
            power: user.power,
            beta: user.beta.clone(),
            band_of: self.band_of.clone(),
            bands: self.bands.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::InvalidParams("need at least one user".into()));
        }
        if self.channels() > MAX_CHANNELS {
            return Err(Error::SizeLimit {
                what: "sub-channels",
                size: self.channels() as u128,
                limit: MAX_CHANNELS as u128,
            });
        }
        for u in 0..self.users.len() {
            self.user_spec(u).validate()?;
        }
        Ok(())
    }
}

/// One sub-channel set per user, indices ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub sets: Vec<Vec<usize>>,
}

impl Assignment {
    fn from_labels(labels: &[usize], users: usize) -> Self {
        let mut sets = vec![Vec::new(); users];
        for (ch, &u) in labels.iter().enumerate() {
            sets[u].push(ch);
        }
        Self { sets }
    }

    /// Owner of each sub-channel, or an error if the sets are not a partition of `0..channels`.
    pub fn labels(&self, channels: usize) -> Result<Vec<usize>> {
        let mut owner = vec![usize::MAX; channels];
        for (u, set) in self.sets.iter().enumerate() {
            for &ch in set {
                if ch >= channels {
                    return Err(Error::DimensionMismatch(format!("sub-channel {ch} out of range")));
                }
                if owner[ch] != usize::MAX {
                    return Err(Error::InvalidParams(format!("sub-channel {ch} assigned twice")));
                }
                owner[ch] = u;
            }
        }
        if let Some(ch) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::InvalidParams(format!("sub-channel {ch} unassigned")));
        }
        Ok(owner)
    }
}

/// Optimal averaged objective of user `u` restricted to `subset`;
/// `+inf` when its rate cannot be met there.
pub fn f_of_subset(problem: &AssignmentProblem, u: usize, subset: &[usize], tol: Tolerances) -> Result<f64> {
    let spec = problem.user_spec(u);
    if subset.is_empty() {
        return Ok(if spec.rate > 0.0 { f64::INFINITY } else { 0.0 });
    }
    match solve_p2(&spec.restrict(subset)?, tol) {
        Ok(policy) => Ok(policy.objective),
        Err(Error::Infeasible { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn members(mask: usize, channels: usize) -> Vec<usize> {
    (0..channels).filter(|&ch| mask >> ch & 1 == 1).collect()
}

/// Exhaustive search over all `U^N` labeled partitions.
///
/// `f` is tabulated once per (user, subset) in parallel; the enumeration is
/// sequential in lexicographic label order so the first minimum wins ties.
pub fn exhaustive_assign(problem: &AssignmentProblem, tol: Tolerances, budget: u128) -> Result<(Assignment, f64)> {
    problem.validate()?;
    let users = problem.users.len();
    let n = problem.channels();
    let size = (users as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > budget {
        return Err(Error::BudgetExceeded { size, budget });
    }

    let subsets = 1usize << n;
    let table: Vec<Vec<f64>> = (0..users)
        .map(|u| {
            (0..subsets)
                .into_par_iter()
                .map(|mask| f_of_subset(problem, u, &members(mask, n), tol))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut labels = vec![0usize; n];
    let mut best_labels = labels.clone();
    let mut best = f64::INFINITY;
    let mut first = true;
    loop {
        let mut masks = vec![0usize; users];
        for (ch, &u) in labels.iter().enumerate() {
            masks[u] |= 1 << ch;
        }
        let total: f64 = masks.iter().enumerate().map(|(u, &m)| table[u][m]).sum();
        if first || total < best {
            best = total;
            best_labels.copy_from_slice(&labels);
            first = false;
        }
        // Odometer increment, channel 0 most significant.
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok((Assignment::from_labels(&best_labels, users), best));
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < users {
                break;
            }
            labels[pos] = 0;
        }
    }
}

/// Least full-time transmit power that meets user `u`'s rate on `set`, ignoring overlap.
fn min_transmit_power(problem: &AssignmentProblem, u: usize, set: &[usize]) -> Result<f64> {
    let user = &problem.users[u];
    if user.rate <= 0.0 {
        return Ok(0.0);
    }
    if set.is_empty() {
        return Ok(f64::INFINITY);
    }
    let band = CtmcParams::new(1.0, 1.0)?;
    let terms = set
        .iter()
        .map(|&ch| Term { weight: 1.0, beta: user.beta[ch], band, sensed: Sensed::Idle })
        .collect();
    Ok(TermSet::new(problem.frame, terms)?.min_power(user.rate).power)
}

/// Power-minimizing greedy assignment, scored by total average overlap.
///
/// While some user cannot meet its rate within its budget, the unassigned
/// sub-channel and still-infeasible user with the largest drop in minimum
/// transmit power are paired; a user with no channel yet has infinite power,
/// so its first grant ranks ahead and ties go to the lower resulting power.
/// Remaining sub-channels go to the user with the best gain on them. If the
/// channels run out before every user is satisfied the objective is `+inf`.
pub fn greedy_power_assign(problem: &AssignmentProblem, tol: Tolerances) -> Result<(Assignment, f64)> {
    problem.validate()?;
    let users = problem.users.len();
    let n = problem.channels();
    for u in 0..users {
        let cap = max_rate(&problem.user_spec(u))?;
        let rate = problem.users[u].rate;
        if rate > cap + tol.eps_rate * rate {
            return Err(Error::Infeasible { required: rate, max_rate: cap });
        }
    }

    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); users];
    let mut free: Vec<usize> = (0..n).collect();
    let mut current: Vec<f64> = (0..users).map(|u| min_transmit_power(problem, u, &[])).collect::<Result<_>>()?;
    let satisfied = |u: usize, power: f64| power <= problem.users[u].power * (1.0 + tol.eps_power);

    while !free.is_empty() {
        // (first grant, gain in power or negated resulting power, user, slot in free, new power)
        let mut best: Option<(bool, f64, usize, usize, f64)> = None;
        for u in 0..users {
            if satisfied(u, current[u]) {
                continue;
            }
            for (slot, &ch) in free.iter().enumerate() {
                let mut trial = sets[u].clone();
                trial.push(ch);
                let after = min_transmit_power(problem, u, &trial)?;
                let first = current[u].is_infinite();
                let score = if first { -after } else { current[u] - after };
                let better = match best {
                    None => true,
                    Some((bf, bs, ..)) => (first, score) > (bf, bs),
                };
                if better {
                    best = Some((first, score, u, slot, after));
                }
            }
        }
        let Some((_, _, u, slot, after)) = best else { break };
        sets[u].push(free.remove(slot));
        current[u] = after;
    }

    for ch in free {
        let mut owner = 0;
        for u in 1..users {
            if problem.users[u].beta[ch] > problem.users[owner].beta[ch] {
                owner = u;
            }
        }
        sets[owner].push(ch);
    }
    for set in &mut sets {
        set.sort_unstable();
    }

    let mut total = 0.0;
    for (u, set) in sets.iter().enumerate() {
        total += f_of_subset(problem, u, set, tol)?;
    }
    Ok((Assignment { sets }, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(betas: Vec<Vec<f64>>, rate: f64, power: f64) -> AssignmentProblem {
        let n = betas[0].len();
        AssignmentProblem {
            frame: 1.0,
            bands: vec![CtmcParams::new(1.0, 1.0).unwrap()],
            band_of: vec![0; n],
            users: betas.into_iter().map(|beta| UserSpec { beta, rate, power }).collect(),
        }
    }

    #[test]
    fn empty_subset() {
        let p = problem(vec![vec![1.0, 2.0]], 0.5, 1.0);
        assert_eq!(f_of_subset(&p, 0, &[], Tolerances::default()).unwrap(), f64::INFINITY);
        let p = problem(vec![vec![1.0, 2.0]], 0.0, 1.0);
        assert_eq!(f_of_subset(&p, 0, &[], Tolerances::default()).unwrap(), 0.0);
    }

    #[test]
    fn full_subset_equals_p2() {
        let p = problem(vec![vec![1.0, 2.0, 0.7]], 0.6, 1.0);
        let f = f_of_subset(&p, 0, &[0, 1, 2], Tolerances::default()).unwrap();
        let direct = solve_p2(&p.user_spec(0), Tolerances::default()).unwrap().objective;
        assert_eq!(f, direct);
    }

    #[test]
    fn single_user_gets_everything() {
        let p = problem(vec![vec![1.0, 2.0, 0.7]], 0.6, 1.0);
        let tol = Tolerances::default();
        let (a, obj) = exhaustive_assign(&p, tol, DEFAULT_BUDGET).unwrap();
        assert_eq!(a.sets, vec![vec![0, 1, 2]]);
        let (g, gobj) = greedy_power_assign(&p, tol).unwrap();
        assert_eq!(g, a);
        assert_eq!(gobj, obj);
    }

    #[test]
    fn two_by_two_matches_enumeration() {
        let p = problem(vec![vec![3.0, 0.8], vec![3.0, 0.8]], 0.3, 1.0);
        let tol = Tolerances::default();
        let (a, obj) = exhaustive_assign(&p, tol, DEFAULT_BUDGET).unwrap();
        let mut oracle = f64::INFINITY;
        for labels in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let s = Assignment::from_labels(&labels, 2);
            let v = f_of_subset(&p, 0, &s.sets[0], tol).unwrap() + f_of_subset(&p, 1, &s.sets[1], tol).unwrap();
            oracle = oracle.min(v);
        }
        assert_eq!(obj, oracle);
        assert!(obj.is_finite());
        assert_eq!(a.labels(2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn greedy_gives_each_user_its_best_channels() {
        let p = problem(vec![vec![5.0, 4.0, 0.1, 0.2], vec![0.1, 0.2, 5.0, 4.0]], 1.0, 1.0);
        let (a, _) = greedy_power_assign(&p, Tolerances::default()).unwrap();
        assert_eq!(a.sets, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn budget_and_infeasibility() {
        let p = problem(vec![vec![1.0; 5]; 3], 0.2, 1.0);
        assert!(matches!(
            exhaustive_assign(&p, Tolerances::default(), 100),
            Err(Error::BudgetExceeded { size: 243, budget: 100 })
        ));
        let p = problem(vec![vec![0.1, 0.1], vec![1.0, 1.0]], 10.0, 1.0);
        assert!(matches!(greedy_power_assign(&p, Tolerances::default()), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn partition_validation() {
        assert!(Assignment { sets: vec![vec![0], vec![0, 1]] }.labels(2).is_err());
        assert!(Assignment { sets: vec![vec![0], vec![]] }.labels(2).is_err());
        assert!(Assignment { sets: vec![vec![2], vec![0, 1]] }.labels(2).is_err());
        assert_eq!(Assignment { sets: vec![vec![1], vec![0]] }.labels(2).unwrap(), vec![1, 0]);
    }
}
