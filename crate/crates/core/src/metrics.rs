//! GOSPA for sets of points and trajectory GOSPA for sets of trajectories.
//!
//! Both metrics take points in whatever space the caller chooses; project
//! states to positions first to compare positions only. Results are reported
//! as sums of `p`-th powers split into localization, missed and false parts
//! (and switches for trajectories); `total` is the `p`-th root of their sum,
//! so with `p = 1` the parts add up to `total`.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_lap, CostMatrix};
use crate::gaussian::Vector;
use crate::math;
use crate::smoother::Trajectory;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GospaParams {
    pub cutoff: f64,
    pub order: f64,
    pub alpha: f64,
}

impl Default for GospaParams {
    fn default() -> Self {
        Self { cutoff: 10.0, order: 1.0, alpha: 2.0 }
    }
}

impl GospaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.order >= 1.0 && self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::Contract("GOSPA needs c > 0, p >= 1 and 0 < alpha <= 2"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GospaResult {
    pub total: f64,
    pub localization: f64,
    pub missed: f64,
    pub false_det: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TgospaParams {
    pub cutoff: f64,
    pub order: f64,
    /// Cost of a full track switch; a half switch costs half of it.
    pub switch_cost: f64,
}

impl Default for TgospaParams {
    fn default() -> Self {
        Self { cutoff: 10.0, order: 1.0, switch_cost: 1.0 }
    }
}

impl TgospaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.order >= 1.0 && self.switch_cost > 0.0) {
            return Err(Error::Contract("TGOSPA needs c > 0, p >= 1 and gamma > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TgospaResult {
    pub total: f64,
    pub localization: f64,
    pub missed: f64,
    pub false_det: f64,
    pub switch: f64,
}

fn root(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else {
        math::powf(x, 1.0 / p)
    }
}

fn pow(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else {
        math::powf(x, p)
    }
}

/// GOSPA between an estimated and a true point set.
///
/// An unmatched point costs `c^p / alpha`. A matched pair at distance `c` or
/// more costs `c^p` and is reported as one missed and one false point, so
/// for `alpha = 2` the parts are exactly those of the partial-assignment form.
pub fn gospa<const D: usize>(estimate: &[Vector<D>], truth: &[Vector<D>], params: &GospaParams) -> Result<GospaResult> {
    params.validate()?;
    let (c, p) = (params.cutoff, params.order);
    let cp = pow(c, p);
    let unmatched = cp / params.alpha;
    let n = estimate.len().max(truth.len());
    let mut cost = CostMatrix::forbidden(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = match (estimate.get(i), truth.get(j)) {
                (Some(x), Some(y)) => pow((x - y).norm().min(c), p),
                (None, None) => 0.0,
                _ => unmatched,
            };
            cost.set(i, j, v);
        }
    }
    let solution = solve_lap(&cost)?;
    let mut out = GospaResult::default();
    for (i, &j) in solution.columns.iter().enumerate() {
        match (estimate.get(i), truth.get(j)) {
            (Some(x), Some(y)) => {
                let d = (x - y).norm();
                if d < c {
                    out.localization += pow(d, p);
                } else {
                    out.missed += cp / 2.0;
                    out.false_det += cp / 2.0;
                }
            }
            (Some(_), None) => out.false_det += unmatched,
            (None, Some(_)) => out.missed += unmatched,
            (None, None) => {}
        }
    }
    out.total = root(out.localization + out.missed + out.false_det, p);
    Ok(out)
}

/// An estimate/truth pair that is within the cutoff at some common step.
struct Pair {
    est: usize,
    truth: usize,
}

/// Trajectory GOSPA over steps `1..=steps`.
///
/// Each step has its own partial matching between estimated and true
/// trajectories. A step costs `min(d, c)^p` for every matched pair that both
/// exist, `c^p / 2` for every existing trajectory without an existing
/// partner, and nothing for trajectories that do not exist. Changing the
/// matching between consecutive steps costs `gamma^p / 2` per pair that is
/// added or removed: a full switch (one partner to another) costs `gamma^p`,
/// a half switch (to or from unmatched) `gamma^p / 2`.
///
/// The minimum over matching sequences is found exactly by dynamic
/// programming. Pairs that are never within the cutoff at a common step are
/// left out: unmatching them never raises a step or switch cost. What
/// remains splits into independent connected components.
pub fn tgospa<const D: usize>(
    estimate: &[Trajectory<D>],
    truth: &[Trajectory<D>],
    params: &TgospaParams,
    steps: usize,
) -> Result<TgospaResult> {
    params.validate()?;
    for t in estimate.iter().chain(truth) {
        if t.start < 1 || t.end() > steps {
            return Err(Error::Contract("trajectory outside 1..=K"));
        }
    }
    let (c, p) = (params.cutoff, params.order);
    let cp = pow(c, p);
    let half_switch = pow(params.switch_cost, p) / 2.0;

    let admissible = |e: &Trajectory<D>, t: &Trajectory<D>| {
        let lo = e.start.max(t.start);
        let hi = e.end().min(t.end());
        (lo..=hi).any(|k| (e.state_at(k).unwrap() - t.state_at(k).unwrap()).norm() < c)
    };
    let mut pairs = Vec::new();
    for (i, e) in estimate.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            if admissible(e, t) {
                pairs.push(Pair { est: i, truth: j });
            }
        }
    }

    // connected components over estimates (0..ne) and truths (ne..)
    let ne = estimate.len();
    let mut parent: Vec<usize> = (0..ne + truth.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for pair in &pairs {
        let a = find(&mut parent, pair.est);
        let b = find(&mut parent, ne + pair.truth);
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }

    let mut out = TgospaResult::default();
    // with nothing matched, every existing trajectory costs c^p / 2 per step
    for e in estimate {
        out.false_det += cp / 2.0 * e.len() as f64;
    }
    for t in truth {
        out.missed += cp / 2.0 * t.len() as f64;
    }
    let mut roots: Vec<usize> = pairs.iter().map(|q| find(&mut parent, q.est)).collect();
    roots.sort_unstable();
    roots.dedup();
    for root_id in roots {
        let members: Vec<&Pair> = pairs.iter().filter(|q| find(&mut parent, q.est) == root_id).collect();
        let delta = solve_component(&members, estimate, truth, c, p, half_switch, steps)?;
        out.localization += delta.localization;
        out.missed += delta.missed;
        out.false_det += delta.false_det;
        out.switch += delta.switch;
    }
    out.total = root(out.localization + out.missed + out.false_det + out.switch, p);
    Ok(out)
}

/// Change of the decomposition relative to leaving the component unmatched.
fn solve_component<const D: usize>(
    pairs: &[&Pair],
    estimate: &[Trajectory<D>],
    truth: &[Trajectory<D>],
    c: f64,
    p: f64,
    half_switch: f64,
    steps: usize,
) -> Result<TgospaResult> {
    if pairs.len() > 64 {
        return Err(Error::Contract("TGOSPA component too large for exact evaluation"));
    }
    let cp = pow(c, p);
    // all partial matchings as bitmasks over `pairs`
    let mut states: Vec<u64> = vec![0];
    for (bit, q) in pairs.iter().enumerate() {
        let conflicts: u64 = pairs
            .iter()
            .enumerate()
            .filter(|(_, o)| o.est == q.est || o.truth == q.truth)
            .fold(0, |m, (b, _)| m | (1 << b));
        let extra: Vec<u64> = states.iter().filter(|&&s| s & conflicts == 0).map(|&s| s | (1 << bit)).collect();
        states.extend(extra);
    }
    let ns = states.len();

    // per step, the change in (localization, missed, false) of matching a pair
    let pair_delta = |q: &Pair, k: usize| -> (f64, f64, f64) {
        match (estimate[q.est].state_at(k), truth[q.truth].state_at(k)) {
            (Some(x), Some(y)) => {
                let d = (x - y).norm();
                if d < c {
                    (pow(d, p), -cp / 2.0, -cp / 2.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            _ => (0.0, 0.0, 0.0),
        }
    };
    let step_cost = |s: u64, k: usize| -> f64 {
        pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| s & (1 << b) != 0)
            .map(|(_, q)| {
                let (l, m, f) = pair_delta(q, k);
                l + m + f
            })
            .sum()
    };

    let mut cost: Vec<f64> = states.iter().map(|&s| step_cost(s, 1)).collect();
    let mut back: Vec<Vec<u32>> = Vec::with_capacity(steps);
    let mut next = vec![0.0; ns];
    for k in 2..=steps {
        let mut from = vec![0u32; ns];
        for (b, &sb) in states.iter().enumerate() {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (a, &sa) in states.iter().enumerate() {
                let v = cost[a] + half_switch * (sa ^ sb).count_ones() as f64;
                if v < best {
                    best = v;
                    arg = a;
                }
            }
            next[b] = best + step_cost(sb, k);
            from[b] = arg as u32;
        }
        core::mem::swap(&mut cost, &mut next);
        back.push(from);
    }
    let mut state = (0..ns).fold(0, |best, s| if cost[s] < cost[best] { s } else { best });
    let mut path = vec![0usize; steps];
    path[steps - 1] = state;
    for k in (1..steps).rev() {
        state = back[k - 1][state] as usize;
        path[k - 1] = state;
    }

    let mut out = TgospaResult::default();
    for k in 1..=steps {
        let s = states[path[k - 1]];
        for (b, q) in pairs.iter().enumerate() {
            if s & (1 << b) != 0 {
                let (l, m, f) = pair_delta(q, k);
                out.localization += l;
                out.missed += m;
                out.false_det += f;
            }
        }
        if k > 1 {
            out.switch += half_switch * (states[path[k - 2]] ^ s).count_ones() as f64;
        }
    }
    Ok(out)
}
