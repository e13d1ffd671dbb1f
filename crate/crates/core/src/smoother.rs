//! Backward simulation over sets of trajectories.
//!
//! Starting from the final stored PMB, each particle is a set of trajectories
//! that is extended one step at a time toward `k = 1`. At step `k` the
//! trajectories starting at `k + 1` are "live": each is either the
//! continuation of a Bernoulli of the PMB at `k`, or it was born at `k + 1`,
//! or it continues an undetected object of the Poisson part. The joint
//! choice is a global hypothesis; its weight factorizes over Bernoullis, so
//! the hypotheses are ranked with Murty's algorithm on the cost matrix from
//! [`build_cost_matrix`] and one of the best is drawn. Bernoullis that were
//! not matched may still have existed and died at `k`; those spawn
//! length-one trajectories.
//!
//! The per-step quantities that do not depend on the particle live in a
//! [`BackwardKernel`], built once per step and shared by all particles.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::assignment::{murty_kbest, Assignment, CostMatrix};
use crate::gaussian::{
    categorical_sample, chi_square_quantile, poisson_sample, Gaussian, GaussianMixture, LinearConditioner, Matrix,
    SampleFactor, Vector, DEFAULT_GATE_PROBABILITY,
};
use crate::math;
use crate::models::{BirthModel, MotionModel, SystemModel};
use crate::phd::{ForwardRecord, PmbDensity};
use crate::seed;
use crate::{Error, Result};

/// A trajectory: start time and the states at `start, start + 1, …`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Trajectory<const N: usize> {
    pub start: usize,
    pub states: Vec<Vector<N>>,
}

impl<const N: usize> Trajectory<N> {
    pub fn new(start: usize, states: Vec<Vector<N>>) -> Result<Self> {
        if start < 1 || states.is_empty() {
            return Err(Error::Contract("a trajectory needs start >= 1 and at least one state"));
        }
        Ok(Self { start, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Last time step with a state.
    pub fn end(&self) -> usize {
        self.start + self.states.len() - 1
    }

    pub fn state_at(&self, k: usize) -> Option<&Vector<N>> {
        k.checked_sub(self.start).and_then(|i| self.states.get(i))
    }
}

/// States of the trajectories alive at step `k`.
pub fn trajectories_states_at<const N: usize>(trajectories: &[Trajectory<N>], k: usize) -> Vec<Vector<N>> {
    trajectories.iter().filter_map(|t| t.state_at(k).copied()).collect()
}

/// Which stored filtering component a sampled state was drawn from, at the
/// state's own time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum StateOrigin {
    /// Index into the Bernoullis of the stored PMB.
    Bernoulli(usize),
    /// Index into the Poisson components of the stored PMB.
    Ppp(usize),
}

/// One sample of the multi-trajectory posterior.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrajectoryParticle<const N: usize> {
    pub trajectories: Vec<Trajectory<N>>,
    /// Parallel to `trajectories`, one entry per state.
    pub origins: Vec<Vec<StateOrigin>>,
    /// Log-probability of the discrete choices made while sampling.
    /// Particles are equally weighted; this is only used to pick an estimate.
    pub log_weight: f64,
}

impl<const N: usize> TrajectoryParticle<N> {
    fn push(&mut self, trajectory: Trajectory<N>, origin: StateOrigin) {
        self.trajectories.push(trajectory);
        self.origins.push(vec![origin]);
    }

    fn prepend(&mut self, index: usize, state: Vector<N>, origin: StateOrigin) {
        let t = &mut self.trajectories[index];
        t.start -= 1;
        t.states.insert(0, state);
        self.origins[index].insert(0, origin);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SmootherConfig {
    pub particles: usize,
    pub max_hypotheses: usize,
    /// Squared Mahalanobis gate for pairing a Bernoulli with the first state
    /// of a live trajectory.
    pub gate_threshold: f64,
    /// Also sample trajectories that were never detected and ended at `k`.
    pub sample_undetected_ppp: bool,
    /// Particle `p` uses the stream `seed::stream(seed, &[p])`.
    pub seed: u64,
}

impl SmootherConfig {
    /// 1000 particles, at most 100 global hypotheses, and a gate at the 0.9999
    /// chi-squared quantile of the state dimension.
    pub fn for_state_dim(n: usize, seed: u64) -> Self {
        Self {
            particles: 1000,
            max_hypotheses: 100,
            gate_threshold: chi_square_quantile(DEFAULT_GATE_PROBABILITY, n),
            sample_undetected_ppp: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles < 1 || self.max_hypotheses < 1 {
            return Err(Error::Contract("smoother needs at least one particle and one hypothesis"));
        }
        if !(self.gate_threshold > 0.0) {
            return Err(Error::Contract("gate threshold must be positive"));
        }
        Ok(())
    }
}

/// Backward conditioning of one stored filtering Gaussian on the state that
/// follows it.
#[derive(Clone, Debug)]
struct BackwardFactor<const N: usize> {
    conditioner: LinearConditioner<N, N>,
    inverse: Matrix<N, N>,
    /// Squared radius beyond which the gate certainly fails.
    reach: f64,
    conditional: SampleFactor<N>,
}

impl<const N: usize> BackwardFactor<N> {
    fn new(density: &Gaussian<N>, motion: &MotionModel<N>, gate: f64) -> Result<Self> {
        let conditioner = LinearConditioner::new(density, &motion.transition)?;
        let s = conditioner.innovation_cov();
        let inverse = s.try_inverse().ok_or(Error::Singular { what: "backward innovation", condition: f64::INFINITY })?;
        let conditional = SampleFactor::new(conditioner.conditional_cov())?;
        Ok(Self { conditioner, inverse, reach: gate * s.trace(), conditional })
    }

    /// `ln N(y; F m, S)` when `y` passes the gate.
    fn gated_log_likelihood(&self, y: &Vector<N>, gate: f64) -> Option<f64> {
        let r = y - self.conditioner.predicted();
        if r.norm_squared() > self.reach {
            return None;
        }
        let d2 = r.dot(&(self.inverse * r));
        (d2 <= gate).then(|| self.conditioner.log_likelihood(y))
    }

    fn sample<R: Rng + ?Sized>(&self, y: &Vector<N>, rng: &mut R) -> Vector<N> {
        self.conditioner.conditional_mean(y) + self.conditional.sample_offset(rng)
    }
}

#[derive(Clone, Debug)]
struct ForwardBernoulli<const N: usize> {
    /// Index into the stored PMB's Bernoullis.
    index: usize,
    existence: f64,
    density: Gaussian<N>,
    sampler: SampleFactor<N>,
    backward: BackwardFactor<N>,
}

#[derive(Clone, Debug)]
struct PppComponent<const N: usize> {
    log_weight: f64,
    density: Gaussian<N>,
    backward: BackwardFactor<N>,
}

/// The particle-independent part of the backward kernel at one step.
#[derive(Clone, Debug)]
pub struct BackwardKernel<const N: usize> {
    k: usize,
    survival: f64,
    gate: f64,
    bernoullis: Vec<ForwardBernoulli<N>>,
    ppp: Vec<PppComponent<N>>,
    ppp_mass: f64,
    birth: GaussianMixture<N>,
}

impl<const N: usize> BackwardKernel<N> {
    /// Kernel at step `k` from the PMB stored at `k`. Bernoullis with zero
    /// existence are left out: their only hypothesis has weight one.
    pub fn new(
        k: usize,
        pmb: &PmbDensity<N>,
        motion: &MotionModel<N>,
        birth: &BirthModel<N>,
        gate_threshold: f64,
    ) -> Result<Self> {
        let mut bernoullis = Vec::new();
        for (index, b) in pmb.bernoullis.iter().enumerate() {
            if !(b.existence > 0.0) || b.density.is_empty() {
                continue;
            }
            let density = if b.density.len() == 1 {
                b.density.components[0].clone().with_weight(1.0)
            } else {
                b.density.moment_match()?.with_weight(1.0)
            };
            bernoullis.push(ForwardBernoulli {
                index,
                existence: b.existence,
                sampler: SampleFactor::new(&density.cov)?,
                backward: BackwardFactor::new(&density, motion, gate_threshold)?,
                density,
            });
        }
        let ppp = pmb
            .ppp
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| {
                Ok(PppComponent {
                    log_weight: math::ln(c.weight),
                    density: c.clone(),
                    backward: BackwardFactor::new(c, motion, f64::INFINITY)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            survival: motion.survival,
            gate: gate_threshold,
            bernoullis,
            ppp,
            ppp_mass: pmb.ppp.mass(),
            birth: birth.intensity.clone(),
        })
    }

    /// Number of forward Bernoullis taking part in the kernel.
    pub fn bernoulli_count(&self) -> usize {
        self.bernoullis.len()
    }

    /// `ln ⟨λᵖ, g(y | ·)⟩` over the Poisson components, with the index of
    /// each term (used again when the responsible component is sampled).
    fn ppp_terms(&self, y: &Vector<N>) -> Vec<f64> {
        self.ppp.iter().map(|c| c.log_weight + c.backward.conditioner.log_likelihood(y)).collect()
    }
}

/// How one Bernoulli of the backward kernel relates to the particle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HypothesisKind {
    /// Forward Bernoulli not continued by any live trajectory; the object, if
    /// it existed, ended at `k`.
    Ended,
    /// Forward Bernoulli continued by the live trajectory with this index
    /// into the particle.
    Extends(usize),
    /// Bernoulli created by a live trajectory that stays unexplained here.
    Nonexistent(usize),
    /// Live trajectory explained as a birth at `k + 1` or the continuation
    /// of an undetected object.
    NewlyDetected(usize),
    /// Trajectory born after `k + 1`, carried unchanged.
    DeterministicPast(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalHypothesis {
    /// Natural log of the hypothesis weight.
    pub log_weight: f64,
    pub existence: f64,
    pub kind: HypothesisKind,
}

/// The local hypotheses of every Bernoulli of the kernel for one particle.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalHypothesisTable {
    pub k: usize,
    /// Per forward Bernoulli of the kernel: `Ended` first, then one `Extends`
    /// per gated live trajectory.
    pub forward: Vec<Vec<LocalHypothesis>>,
    /// Particle indices of the trajectories starting at `k + 1`.
    pub live: Vec<usize>,
    /// Per live trajectory: `Nonexistent`, then `NewlyDetected`.
    pub created: Vec<[LocalHypothesis; 2]>,
    /// Per live trajectory: `ln λᴮ(y¹)`, the born-at-`k + 1` share of the
    /// `NewlyDetected` weight.
    pub log_birth: Vec<f64>,
    /// Trajectories born after `k + 1`, one `DeterministicPast` each.
    pub later: Vec<LocalHypothesis>,
}

/// Log of the weight of the ended hypothesis, `1 − r pS`, floored so that a
/// certain survivor keeps a finite cost.
fn log_ended_weight(existence: f64, survival: f64) -> f64 {
    math::ln((1.0 - existence * survival).max(f64::MIN_POSITIVE))
}

/// Existence of the ended hypothesis, `r (1 − pS) / (1 − r pS)`.
fn ended_existence(existence: f64, survival: f64) -> f64 {
    let num = existence * (1.0 - survival);
    if num <= 0.0 {
        0.0
    } else {
        (num / (1.0 - existence * survival)).min(1.0)
    }
}

/// Builds the local hypotheses of `kernel` against the trajectories of
/// `particle`, which must all start after `kernel`'s step.
pub fn build_local_hypotheses<const N: usize>(
    kernel: &BackwardKernel<N>,
    particle: &TrajectoryParticle<N>,
) -> Result<LocalHypothesisTable> {
    let k = kernel.k;
    let mut live = Vec::new();
    let mut later = Vec::new();
    for (j, t) in particle.trajectories.iter().enumerate() {
        if t.start <= k {
            return Err(Error::Contract("particle trajectory starts at or before the kernel step"));
        }
        if t.start == k + 1 {
            live.push(j);
        } else {
            later.push(LocalHypothesis { log_weight: 0.0, existence: 1.0, kind: HypothesisKind::DeterministicPast(j) });
        }
    }
    let ps = kernel.survival;
    let log_ps = math::ln(ps);
    let forward = kernel
        .bernoullis
        .iter()
        .map(|b| {
            let mut hyps = vec![LocalHypothesis {
                log_weight: log_ended_weight(b.existence, ps),
                existence: ended_existence(b.existence, ps),
                kind: HypothesisKind::Ended,
            }];
            for &j in &live {
                let y = &particle.trajectories[j].states[0];
                if let Some(ll) = b.backward.gated_log_likelihood(y, kernel.gate) {
                    hyps.push(LocalHypothesis {
                        log_weight: math::ln(b.existence) + log_ps + ll,
                        existence: 1.0,
                        kind: HypothesisKind::Extends(j),
                    });
                }
            }
            hyps
        })
        .collect();
    let mut created = Vec::with_capacity(live.len());
    let mut log_birth = Vec::with_capacity(live.len());
    for &j in &live {
        let y = &particle.trajectories[j].states[0];
        let lb = kernel.birth.log_eval(y)?;
        let lp = math::log_sum_exp(kernel.ppp_terms(y)) + log_ps;
        created.push([
            LocalHypothesis { log_weight: 0.0, existence: 0.0, kind: HypothesisKind::Nonexistent(j) },
            LocalHypothesis { log_weight: math::log_add(lb, lp), existence: 1.0, kind: HypothesisKind::NewlyDetected(j) },
        ]);
        log_birth.push(lb);
    }
    Ok(LocalHypothesisTable { k, forward, live, created, log_birth, later })
}

/// Assignment form of the global hypotheses of a table.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisCosts {
    /// Rows are live trajectories. The first columns are the kernel's forward
    /// Bernoullis; column `forward + j` is row `j`'s newly-detected column.
    pub matrix: CostMatrix,
    /// `Σ ln w` of the ended hypotheses. The log weight of the global
    /// hypothesis of an assignment is `offset − cost`.
    pub offset: f64,
}

pub fn build_cost_matrix(table: &LocalHypothesisTable) -> HypothesisCosts {
    let rows = table.live.len();
    let m = table.forward.len();
    let mut matrix = CostMatrix::forbidden(rows, m + rows);
    let mut offset = 0.0;
    for (i, hyps) in table.forward.iter().enumerate() {
        let ended = hyps[0].log_weight;
        offset += ended;
        for h in &hyps[1..] {
            if let HypothesisKind::Extends(j) = h.kind {
                let row = table.live.iter().position(|&l| l == j).expect("extension of a live trajectory");
                matrix.set(row, i, -(h.log_weight - ended));
            }
        }
    }
    for (row, pair) in table.created.iter().enumerate() {
        matrix.set(row, m + row, -(pair[1].log_weight - pair[0].log_weight));
    }
    HypothesisCosts { matrix, offset }
}

/// A global hypothesis drawn from the ranked list.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledHypothesis {
    pub assignment: Assignment,
    /// Probability of the draw among the ranked hypotheses.
    pub probability: f64,
}

/// Ranks the `max_hypotheses` best assignments and draws one with probability
/// proportional to `exp(−cost)`.
pub fn sample_global_hypothesis<R: Rng + ?Sized>(
    cost: &CostMatrix,
    max_hypotheses: usize,
    rng: &mut R,
) -> Result<SampledHypothesis> {
    let mut ranked = murty_kbest(cost, max_hypotheses);
    if ranked.is_empty() {
        return Err(Error::Infeasible);
    }
    let best = ranked[0].cost;
    let weights: Vec<f64> = ranked.iter().map(|a| math::exp(best - a.cost)).collect();
    let total: f64 = weights.iter().sum();
    let pick = categorical_sample(&weights, rng)?;
    Ok(SampledHypothesis { probability: weights[pick] / total, assignment: ranked.swap_remove(pick) })
}

/// Extends `particle` to step `k` under the sampled global hypothesis.
pub fn sample_backward_step<const N: usize, R: Rng + ?Sized>(
    particle: &mut TrajectoryParticle<N>,
    kernel: &BackwardKernel<N>,
    table: &LocalHypothesisTable,
    hypothesis: &SampledHypothesis,
    sample_undetected_ppp: bool,
    rng: &mut R,
) -> Result<()> {
    let k = kernel.k;
    let m = kernel.bernoullis.len();
    let columns = &hypothesis.assignment.columns;
    if columns.len() != table.live.len() {
        return Err(Error::Contract("assignment does not match the hypothesis table"));
    }
    let mut matched = vec![false; m];
    for (row, &col) in columns.iter().enumerate() {
        let j = table.live[row];
        let y = particle.trajectories[j].states[0];
        if col < m {
            let b = &kernel.bernoullis[col];
            matched[col] = true;
            let x = b.backward.sample(&y, rng);
            particle.prepend(j, x, StateOrigin::Bernoulli(b.index));
        } else if col == m + row {
            let log_w = table.created[row][1].log_weight;
            let keep = math::exp(table.log_birth[row] - log_w);
            if rng.random::<f64>() < keep {
                continue;
            }
            let terms = kernel.ppp_terms(&y);
            let Ok(r) = crate::gaussian::categorical_sample_log(&terms, rng) else {
                // no Poisson mass near y: only the birth explanation remains
                continue;
            };
            let x = kernel.ppp[r].backward.sample(&y, rng);
            particle.prepend(j, x, StateOrigin::Ppp(r));
        } else {
            return Err(Error::Contract("assignment uses another trajectory's new column"));
        }
    }
    for (i, b) in kernel.bernoullis.iter().enumerate() {
        if matched[i] {
            continue;
        }
        let r = ended_existence(b.existence, kernel.survival);
        if r > 0.0 && rng.random::<f64>() < r {
            let x = b.density.mean + b.sampler.sample_offset(rng);
            particle.push(Trajectory { start: k, states: vec![x] }, StateOrigin::Bernoulli(b.index));
        }
    }
    if sample_undetected_ppp {
        sample_ppp_into(particle, kernel, (1.0 - kernel.survival) * kernel.ppp_mass, rng)?;
    }
    particle.log_weight += math::ln(hypothesis.probability);
    Ok(())
}

fn sample_ppp_into<const N: usize, R: Rng + ?Sized>(
    particle: &mut TrajectoryParticle<N>,
    kernel: &BackwardKernel<N>,
    rate: f64,
    rng: &mut R,
) -> Result<()> {
    if kernel.ppp.is_empty() {
        return Ok(());
    }
    let weights: Vec<f64> = kernel.ppp.iter().map(|c| c.density.weight).collect();
    for _ in 0..poisson_sample(rate, rng)? {
        let r = categorical_sample(&weights, rng)?;
        let x = kernel.ppp[r].density.sample(rng)?;
        particle.push(Trajectory { start: kernel.k, states: vec![x] }, StateOrigin::Ppp(r));
    }
    Ok(())
}

fn init_particle<const N: usize, R: Rng + ?Sized>(
    kernel: &BackwardKernel<N>,
    sample_undetected_ppp: bool,
    rng: &mut R,
) -> Result<TrajectoryParticle<N>> {
    let mut particle = TrajectoryParticle::default();
    for b in &kernel.bernoullis {
        if rng.random::<f64>() < b.existence {
            let x = b.density.mean + b.sampler.sample_offset(rng);
            particle.push(Trajectory { start: kernel.k, states: vec![x] }, StateOrigin::Bernoulli(b.index));
            particle.log_weight += math::ln(b.existence);
        } else {
            particle.log_weight += math::ln(1.0 - b.existence);
        }
    }
    if sample_undetected_ppp {
        sample_ppp_into(&mut particle, kernel, kernel.ppp_mass, rng)?;
    }
    Ok(particle)
}

/// Draws `config.particles` trajectory sets at the final step `k` from the
/// PMB stored there.
pub fn init_particles<const N: usize, R: Rng + ?Sized>(
    k: usize,
    pmb: &PmbDensity<N>,
    motion: &MotionModel<N>,
    birth: &BirthModel<N>,
    config: &SmootherConfig,
    rng: &mut R,
) -> Result<Vec<TrajectoryParticle<N>>> {
    config.validate()?;
    let kernel = BackwardKernel::new(k, pmb, motion, birth, config.gate_threshold)?;
    (0..config.particles).map(|_| init_particle(&kernel, config.sample_undetected_ppp, rng)).collect()
}

/// One backward step of one particle: table, costs, hypothesis, extension.
pub fn backward_step<const N: usize, R: Rng + ?Sized>(
    particle: &mut TrajectoryParticle<N>,
    kernel: &BackwardKernel<N>,
    config: &SmootherConfig,
    rng: &mut R,
) -> Result<()> {
    let table = build_local_hypotheses(kernel, particle)?;
    let costs = build_cost_matrix(&table);
    let hypothesis = sample_global_hypothesis(&costs.matrix, config.max_hypotheses, rng)?;
    sample_backward_step(particle, kernel, &table, &hypothesis, config.sample_undetected_ppp, rng)
}

/// Runs the backward simulation over the whole record. Particle `p` draws
/// from `seed::stream(config.seed, &[p])`, so the result does not depend on
/// the order in which particles are processed.
pub fn backward_simulate<const N: usize, const M: usize>(
    record: &ForwardRecord<N, M>,
    model: &SystemModel<N, M>,
    config: &SmootherConfig,
) -> Result<Vec<TrajectoryParticle<N>>> {
    config.validate()?;
    let big_k = record.len();
    if big_k == 0 {
        return Err(Error::Contract("backward simulation needs a nonempty forward record"));
    }
    let kernels = (1..=big_k)
        .map(|k| {
            let pmb = &record.steps[k - 1].pmb;
            BackwardKernel::new(k, pmb, &model.motion, &model.birth, config.gate_threshold)
        })
        .collect::<Result<Vec<_>>>()?;
    (0..config.particles)
        .map(|p| {
            let mut rng = seed::stream(config.seed, &[p as u64]);
            let mut particle = init_particle(&kernels[big_k - 1], config.sample_undetected_ppp, &mut rng)?;
            for kernel in kernels[..big_k - 1].iter().rev() {
                backward_step(&mut particle, kernel, config, &mut rng)?;
            }
            Ok(particle)
        })
        .collect()
}

/// Index of the estimate: among particles with the most frequent number of
/// trajectories (smaller on ties), the one with the largest log weight
/// (first on ties).
pub fn select_estimate<const N: usize>(particles: &[TrajectoryParticle<N>]) -> Result<usize> {
    if particles.is_empty() {
        return Err(Error::Contract("no particles to estimate from"));
    }
    let max_card = particles.iter().map(|p| p.trajectories.len()).max().unwrap_or(0);
    let mut counts = vec![0usize; max_card + 1];
    for p in particles {
        counts[p.trajectories.len()] += 1;
    }
    let mut mode = 0;
    for (n, &c) in counts.iter().enumerate() {
        if c > counts[mode] {
            mode = n;
        }
    }
    let mut best: Option<usize> = None;
    for (i, p) in particles.iter().enumerate() {
        if p.trajectories.len() != mode {
            continue;
        }
        if best.is_none_or(|b| p.log_weight > particles[b].log_weight) {
            best = Some(i);
        }
    }
    Ok(best.expect("the mode has at least one particle"))
}

/// The trajectory set of the particle chosen by [`select_estimate`].
pub fn estimate_trajectories<const N: usize>(particles: &[TrajectoryParticle<N>]) -> Result<Vec<Trajectory<N>>> {
    Ok(particles[select_estimate(particles)?].trajectories.clone())
}

/// Replaces the sampled states of `particle` by their smoothed means given
/// its associations: a Rauch–Tung–Striebel pass over the stored filtering
/// Gaussians named by the particle's state origins.
pub fn smoothed_means<const N: usize, const M: usize>(
    particle: &TrajectoryParticle<N>,
    record: &ForwardRecord<N, M>,
    motion: &MotionModel<N>,
) -> Result<Vec<Trajectory<N>>> {
    let filtering = |k: usize, origin: StateOrigin| -> Result<Gaussian<N>> {
        let step = record.step(k).ok_or(Error::Contract("trajectory outside the forward record"))?;
        let missing = Error::Contract("state origin not in the stored PMB");
        match origin {
            StateOrigin::Bernoulli(i) => {
                let d = &step.pmb.bernoullis.get(i).ok_or(missing)?.density;
                if d.len() == 1 {
                    Ok(d.components[0].clone())
                } else {
                    d.moment_match()
                }
            }
            StateOrigin::Ppp(r) => step.pmb.ppp.components.get(r).cloned().ok_or(missing),
        }
    };
    particle
        .trajectories
        .iter()
        .zip(&particle.origins)
        .map(|(t, origins)| {
            if origins.len() != t.len() {
                return Err(Error::Contract("state origins do not match the trajectory"));
            }
            let last = t.len() - 1;
            let mut states = vec![Vector::<N>::zeros(); t.len()];
            states[last] = filtering(t.end(), origins[last])?.mean;
            for i in (0..last).rev() {
                let g = filtering(t.start + i, origins[i])?;
                let cond = LinearConditioner::new(&g, &motion.transition)?;
                states[i] = cond.conditional_mean(&states[i + 1]);
            }
            Ok(Trajectory { start: t.start, states })
        })
        .collect()
}
