//! Multi-object generative models and the synthetic scenario generator.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::gaussian::{poisson_sample, Gaussian, GaussianMixture, LinearGaussian, Matrix, SampleFactor, Vector};
use crate::smoother::Trajectory;
use crate::{Error, Result};

/// A set of measurements at one time step, in no particular order.
pub type MeasurementSet<const M: usize> = Vec<Vector<M>>;

/// Single-object motion: linear-Gaussian transition plus constant survival
/// probability.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MotionModel<const N: usize> {
    pub transition: LinearGaussian<N, N>,
    pub survival: f64,
}

impl<const N: usize> MotionModel<N> {
    pub fn new(transition: LinearGaussian<N, N>, survival: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&survival) {
            return Err(Error::Contract("survival probability must lie in [0, 1]"));
        }
        Ok(Self { transition, survival })
    }
}

impl MotionModel<4> {
    /// Nearly constant velocity in 2D, state `[px, vx, py, vy]`.
    pub fn nearly_constant_velocity(sample_period: f64, sigma_q: f64, survival: f64) -> Result<Self> {
        let t = sample_period;
        let q = sigma_q * sigma_q;
        let mut f = Matrix::<4, 4>::identity();
        f[(0, 1)] = t;
        f[(2, 3)] = t;
        let mut noise = Matrix::<4, 4>::zeros();
        for axis in [0, 2] {
            noise[(axis, axis)] = q * t * t * t / 3.0;
            noise[(axis, axis + 1)] = q * t * t / 2.0;
            noise[(axis + 1, axis)] = q * t * t / 2.0;
            noise[(axis + 1, axis + 1)] = q * t;
        }
        Self::new(LinearGaussian::new(f, noise)?, survival)
    }
}

/// Single-object measurement: linear-Gaussian observation plus constant
/// detection probability.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MeasurementModel<const N: usize, const M: usize> {
    pub observation: LinearGaussian<M, N>,
    pub detection: f64,
}

impl<const N: usize, const M: usize> MeasurementModel<N, M> {
    pub fn new(observation: LinearGaussian<M, N>, detection: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&detection) {
            return Err(Error::Contract("detection probability must lie in [0, 1]"));
        }
        Ok(Self { observation, detection })
    }
}

impl MeasurementModel<4, 2> {
    /// Position-only observation of a `[px, vx, py, vy]` state.
    pub fn position(sigma_r: f64, detection: f64) -> Result<Self> {
        let mut h = Matrix::<2, 4>::zeros();
        h[(0, 0)] = 1.0;
        h[(1, 2)] = 1.0;
        let r = Matrix::<2, 2>::identity() * (sigma_r * sigma_r);
        Self::new(LinearGaussian::new(h, r)?, detection)
    }
}

/// Poisson birth intensity.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BirthModel<const N: usize> {
    pub intensity: GaussianMixture<N>,
}

impl BirthModel<4> {
    /// Three-component birth intensity of the reference 2D scenario.
    pub fn nominal() -> Self {
        let cov = Matrix::<4, 4>::from_diagonal(&Vector::<4>::new(225.0, 100.0, 225.0, 100.0));
        let means = [
            Vector::<4>::new(85.0, 0.0, 140.0, 0.0),
            Vector::<4>::new(-5.0, 0.0, 220.0, 0.0),
            Vector::<4>::new(7.0, 0.0, 50.0, 0.0),
        ];
        Self {
            intensity: means.iter().map(|&mean| Gaussian { weight: 0.1, mean, cov }).collect(),
        }
    }
}

/// Poisson clutter, uniform over an axis-aligned box in measurement space.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ClutterModel<const M: usize> {
    pub rate: f64,
    pub lower: Vector<M>,
    pub upper: Vector<M>,
}

impl<const M: usize> ClutterModel<M> {
    pub fn new(rate: f64, lower: Vector<M>, upper: Vector<M>) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::Contract("clutter rate must be finite and nonnegative"));
        }
        if (0..M).any(|i| !(upper[i] > lower[i])) {
            return Err(Error::Contract("clutter region must be nonempty"));
        }
        Ok(Self { rate, lower, upper })
    }

    pub fn volume(&self) -> f64 {
        (self.upper - self.lower).product()
    }

    /// Clutter intensity `λᶜ(z) = γᶜ / volume`, the same everywhere.
    pub fn intensity(&self) -> f64 {
        self.rate / self.volume()
    }

    pub fn contains(&self, z: &Vector<M>) -> bool {
        (0..M).all(|i| z[i] >= self.lower[i] && z[i] <= self.upper[i])
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector<M> {
        Vector::<M>::from_fn(|i, _| self.lower[i] + rng.random::<f64>() * (self.upper[i] - self.lower[i]))
    }
}

/// One scripted object of a scenario. Times are 1-based and inclusive.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ObjectSpec {
    pub birth_time: usize,
    pub death_time: usize,
    /// Index into the birth intensity's components.
    pub birth_component: usize,
}

/// The four single-object and multi-object models shared by the scenario
/// generator, the filter and the smoother.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SystemModel<const N: usize, const M: usize> {
    pub motion: MotionModel<N>,
    pub measurement: MeasurementModel<N, M>,
    pub birth: BirthModel<N>,
    pub clutter: ClutterModel<M>,
}

impl SystemModel<4, 2> {
    /// NCV motion (T = 0.5 s, σq = 1.8, pS = 0.99), the three-component birth
    /// intensity, position measurements (σr = 2, pD = 0.9) and 50 clutter
    /// points per scan over [0, 2000] × [0, 2000] m.
    pub fn nominal() -> Self {
        Self {
            motion: MotionModel::nearly_constant_velocity(0.5, 1.8, 0.99).expect("valid nominal motion"),
            measurement: MeasurementModel::position(2.0, 0.9).expect("valid nominal measurement"),
            birth: BirthModel::nominal(),
            clutter: ClutterModel::new(50.0, Vector::<2>::new(0.0, 0.0), Vector::<2>::new(2000.0, 2000.0))
                .expect("valid nominal clutter"),
        }
    }
}

/// Everything needed to generate ground truth and measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig<const N: usize, const M: usize> {
    pub steps: usize,
    pub objects: Vec<ObjectSpec>,
    pub model: SystemModel<N, M>,
    /// Attempts per object at drawing a trajectory whose projected positions
    /// stay inside the clutter region.
    pub max_attempts: usize,
}

impl<const N: usize, const M: usize> ScenarioConfig<N, M> {
    /// Checks the object schedule against the horizon and the birth model.
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Contract("scenario needs at least one step"));
        }
        for (idx, spec) in self.objects.iter().enumerate() {
            if spec.birth_time < 1 || spec.death_time < spec.birth_time || spec.death_time > self.steps {
                return Err(Error::Config(alloc::format!(
                    "object {idx}: need 1 <= birth ({}) <= death ({}) <= K ({})",
                    spec.birth_time,
                    spec.death_time,
                    self.steps
                )));
            }
            if spec.birth_component >= self.model.birth.intensity.len() {
                return Err(Error::Config(alloc::format!("object {idx}: no birth component {}", spec.birth_component)));
            }
        }
        Ok(())
    }
}

impl ScenarioConfig<4, 2> {
    /// The reference scenario: [`SystemModel::nominal`] over 100 steps with
    /// four objects. Objects 1 and 2 appear at step 1, object 3 at step 11 and
    /// object 4 at step 21; object 2 disappears after step 70, object 3 after
    /// step 90, and the others survive to the end.
    pub fn nominal() -> Self {
        let object = |birth_time, death_time, birth_component| ObjectSpec { birth_time, death_time, birth_component };
        Self {
            steps: 100,
            objects: alloc::vec![object(1, 100, 0), object(1, 70, 1), object(11, 90, 2), object(21, 100, 0)],
            model: SystemModel::nominal(),
            max_attempts: 10_000,
        }
    }
}

/// True object trajectories over steps `1..=steps`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GroundTruth<const N: usize> {
    pub steps: usize,
    pub trajectories: Vec<Trajectory<N>>,
}

impl<const N: usize> GroundTruth<N> {
    /// States of the objects alive at step `k`.
    pub fn states_at(&self, k: usize) -> Result<Vec<Vector<N>>> {
        if k < 1 || k > self.steps {
            return Err(Error::Contract("time step outside 1..=K"));
        }
        Ok(self.trajectories.iter().filter_map(|t| t.state_at(k).copied()).collect())
    }
}

/// Free-function form of [`GroundTruth::states_at`].
pub fn truth_states_at<const N: usize>(gt: &GroundTruth<N>, k: usize) -> Result<Vec<Vector<N>>> {
    gt.states_at(k)
}

/// Generates ground truth for `config`: each object starts from a draw of
/// its birth component and moves by sampled transitions until its death.
pub fn build_nominal_scenario<const N: usize, const M: usize, R: Rng + ?Sized>(
    config: &ScenarioConfig<N, M>,
    rng: &mut R,
) -> Result<GroundTruth<N>> {
    config.validate()?;
    let model = &config.model;
    let noise = SampleFactor::new(&model.motion.transition.noise)?;
    let f = &model.motion.transition.matrix;
    let h = &model.measurement.observation.matrix;
    let mut trajectories = Vec::with_capacity(config.objects.len());
    for (idx, spec) in config.objects.iter().enumerate() {
        let component = &model.birth.intensity.components[spec.birth_component];
        let start = SampleFactor::new(&component.cov)?;
        let len = spec.death_time - spec.birth_time + 1;
        let mut accepted = None;
        for _ in 0..config.max_attempts.max(1) {
            let mut states = Vec::with_capacity(len);
            let mut x = component.mean + start.sample_offset(rng);
            states.push(x);
            for _ in 1..len {
                x = f * x + noise.sample_offset(rng);
                states.push(x);
            }
            if states.iter().all(|s| model.clutter.contains(&(h * s))) {
                accepted = Some(states);
                break;
            }
        }
        let states = accepted.ok_or_else(|| {
            Error::Config(alloc::format!("object {idx}: could not keep the trajectory inside the region"))
        })?;
        trajectories.push(Trajectory { start: spec.birth_time, states });
    }
    Ok(GroundTruth { steps: config.steps, trajectories })
}

/// Simulates one measurement set per step: independent detections with
/// probability `pD` and Gaussian noise, plus Poisson clutter uniform on the
/// region, shuffled together.
pub fn simulate_measurements<const N: usize, const M: usize, R: Rng + ?Sized>(
    gt: &GroundTruth<N>,
    meas: &MeasurementModel<N, M>,
    clutter: &ClutterModel<M>,
    rng: &mut R,
) -> Result<Vec<MeasurementSet<M>>> {
    let noise = SampleFactor::new(&meas.observation.noise)?;
    let h = &meas.observation.matrix;
    let mut out = Vec::with_capacity(gt.steps);
    for k in 1..=gt.steps {
        let mut set = Vec::new();
        for x in gt.trajectories.iter().filter_map(|t| t.state_at(k)) {
            if rng.random::<f64>() < meas.detection {
                set.push(h * x + noise.sample_offset(rng));
            }
        }
        for _ in 0..poisson_sample(clutter.rate, rng)? {
            set.push(clutter.sample_point(rng));
        }
        set.shuffle(rng);
        out.push(set);
    }
    Ok(out)
}
