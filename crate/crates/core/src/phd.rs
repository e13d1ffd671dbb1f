//! Forward GM-PHD recursion that keeps the intermediate PMB posterior.
//!
//! A PHD update of a Poisson prior by a measurement set is exactly a Poisson
//! multi-Bernoulli density: a Poisson part for the missed detections and one
//! Bernoulli per measurement. [`phd_update_to_pmb`] returns that density;
//! [`pmb_to_ppp`] then collapses it back to a Poisson intensity, which is the
//! classical PHD update. [`run_forward`] stores the PMB of every step for the
//! backward smoother.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::gaussian::{
    chi_square_quantile, reduce_mixture, Gaussian, GaussianMixture, LinearConditioner, Vector,
    DEFAULT_GATE_PROBABILITY,
};
use crate::math;
use crate::models::{BirthModel, ClutterModel, MeasurementModel, MeasurementSet, MotionModel, SystemModel};
use crate::{Error, Result};

/// A Poisson point process, parameterized by its intensity.
pub type PoissonIntensity<const N: usize> = GaussianMixture<N>;

/// A possibly existing object created by one measurement.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BernoulliComponent<const N: usize> {
    pub existence: f64,
    /// Unit-mass single-object density. Empty only when no predicted
    /// component gated with the measurement, in which case `existence == 0`.
    pub density: GaussianMixture<N>,
    pub measurement_index: usize,
}

/// Poisson part plus one Bernoulli per measurement.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PmbDensity<const N: usize> {
    pub ppp: PoissonIntensity<N>,
    pub bernoullis: Vec<BernoulliComponent<N>>,
}

impl<const N: usize> PmbDensity<N> {
    /// Expected number of objects.
    pub fn expected_cardinality(&self) -> f64 {
        self.ppp.mass() + self.bernoullis.iter().map(|b| b.existence).sum::<f64>()
    }
}

/// Gaussian mixture reduction thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ReductionConfig {
    pub prune_threshold: f64,
    pub merge_threshold: f64,
    pub max_components: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self { prune_threshold: 1e-4, merge_threshold: 4.0, max_components: 30 }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prune_threshold >= 0.0 && self.merge_threshold >= 0.0) || self.max_components < 1 {
            return Err(Error::Contract("reduction thresholds must be nonnegative and the cap at least 1"));
        }
        Ok(())
    }

    pub fn apply<const N: usize>(&self, gm: &GaussianMixture<N>) -> GaussianMixture<N> {
        reduce_mixture(gm, self.prune_threshold, self.merge_threshold, self.max_components)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FilterConfig {
    pub reduction: ReductionConfig,
    /// Squared Mahalanobis gate on the measurement innovation. Infinite
    /// disables gating.
    pub gate_threshold: f64,
}

impl FilterConfig {
    /// Default reduction and a gate at the 0.9999 chi-squared quantile of the
    /// measurement dimension.
    pub fn for_measurement_dim(m: usize) -> Self {
        Self {
            reduction: ReductionConfig::default(),
            gate_threshold: chi_square_quantile(DEFAULT_GATE_PROBABILITY, m),
        }
    }
}

/// One step of the forward pass.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ForwardStep<const N: usize, const M: usize> {
    /// 1-based time step.
    pub k: usize,
    pub measurements: MeasurementSet<M>,
    pub predicted: PoissonIntensity<N>,
    /// Reduced PMB posterior, kept for smoothing.
    pub pmb: PmbDensity<N>,
    /// Reduced PHD posterior after the Poisson approximation.
    pub intensity: PoissonIntensity<N>,
    pub estimates: Vec<Vector<N>>,
    /// Measurements that fell outside the clutter region. The uniform clutter
    /// intensity was used for them anyway.
    pub outside_region: usize,
}

/// The forward pass over steps `1..=K`, indexed from zero.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ForwardRecord<const N: usize, const M: usize> {
    pub steps: Vec<ForwardStep<N, M>>,
}

impl<const N: usize, const M: usize> ForwardRecord<N, M> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The step with 1-based index `k`.
    pub fn step(&self, k: usize) -> Option<&ForwardStep<N, M>> {
        k.checked_sub(1).and_then(|i| self.steps.get(i))
    }
}

/// PHD prediction: birth plus surviving, propagated prior components.
pub fn phd_predict<const N: usize>(
    prior: &PoissonIntensity<N>,
    motion: &MotionModel<N>,
    birth: &BirthModel<N>,
) -> PoissonIntensity<N> {
    let mut out = birth.intensity.clone();
    out.components.extend(
        prior
            .iter()
            .map(|c| c.predict(&motion.transition).with_weight(c.weight * motion.survival)),
    );
    out
}

/// PHD update by `measurements`, returned in its exact PMB form.
///
/// The Poisson part is `(1 − pD) λ`. Measurement `zᵢ` creates a Bernoulli
/// with existence `Lᵢ / (λᶜ + Lᵢ)`, where `Lᵢ = pD Σ w N(zᵢ; H m, S)` runs over
/// the predicted components that pass the gate, and density equal to the
/// normalized Kalman-updated mixture of those components.
pub fn phd_update_to_pmb<const N: usize, const M: usize>(
    predicted: &PoissonIntensity<N>,
    measurements: &[Vector<M>],
    meas: &MeasurementModel<N, M>,
    clutter: &ClutterModel<M>,
    gate_threshold: f64,
) -> Result<PmbDensity<N>> {
    let conditioners = predicted
        .iter()
        .map(|c| LinearConditioner::new(c, &meas.observation))
        .collect::<Result<Vec<_>>>()?;
    let log_pd = math::ln(meas.detection);
    let clutter_intensity = clutter.intensity();

    let mut bernoullis = Vec::with_capacity(measurements.len());
    let mut terms: Vec<(f64, usize)> = Vec::new();
    for (index, z) in measurements.iter().enumerate() {
        terms.clear();
        for (ci, (c, cond)) in predicted.iter().zip(&conditioners).enumerate() {
            if c.weight <= 0.0 || cond.mahalanobis_sq(z) > gate_threshold {
                continue;
            }
            terms.push((math::ln(c.weight) + log_pd + cond.log_likelihood(z), ci));
        }
        let log_mass = math::log_sum_exp(terms.iter().map(|t| t.0));
        if log_mass == f64::NEG_INFINITY {
            bernoullis.push(BernoulliComponent {
                existence: 0.0,
                density: GaussianMixture::new(),
                measurement_index: index,
            });
            continue;
        }
        // r = L / (λᶜ + L) = 1 / (1 + λᶜ / L)
        let existence = if clutter_intensity > 0.0 {
            1.0 / (1.0 + clutter_intensity * math::exp(-log_mass))
        } else {
            1.0
        };
        let density = terms
            .iter()
            .map(|&(log_w, ci)| Gaussian {
                weight: math::exp(log_w - log_mass),
                mean: conditioners[ci].conditional_mean(z),
                cov: *conditioners[ci].conditional_cov(),
            })
            .collect();
        bernoullis.push(BernoulliComponent { existence, density, measurement_index: index });
    }

    Ok(PmbDensity { ppp: predicted.scaled(1.0 - meas.detection), bernoullis })
}

/// Moment-matches every Bernoulli density to a single unit-mass Gaussian and
/// reduces the Poisson mixture. Existence probabilities are untouched.
pub fn reduce_pmb<const N: usize>(pmb: &PmbDensity<N>, reduction: &ReductionConfig) -> Result<PmbDensity<N>> {
    let bernoullis = pmb
        .bernoullis
        .iter()
        .map(|b| {
            let density = if b.density.is_empty() {
                GaussianMixture::new()
            } else {
                let single = b.density.moment_match()?.with_weight(1.0);
                GaussianMixture::from(alloc::vec![single])
            };
            Ok(BernoulliComponent { existence: b.existence, density, measurement_index: b.measurement_index })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PmbDensity { ppp: reduction.apply(&pmb.ppp), bernoullis })
}

/// Best Poisson approximation of a PMB: the Poisson intensity plus every
/// Bernoulli density scaled by its existence probability.
pub fn pmb_to_ppp<const N: usize>(pmb: &PmbDensity<N>) -> PoissonIntensity<N> {
    let mut out = pmb.ppp.clone();
    for b in &pmb.bernoullis {
        out.components.extend(b.density.scaled(b.existence).components);
    }
    out
}

/// State estimates from an intensity: the mode of a Poisson cardinality with
/// the intensity's mass (larger value on ties), then the means of that many
/// heaviest components.
pub fn estimate_states<const N: usize>(intensity: &PoissonIntensity<N>) -> Vec<Vector<N>> {
    let mass = intensity.mass();
    // mode of Poisson(λ) is ⌊λ⌋; for integer λ both λ − 1 and λ are modes
    let count = if mass.is_finite() && mass > 0.0 { math::floor(mass) as usize } else { 0 };
    let mut order: Vec<usize> = (0..intensity.len()).collect();
    order.sort_by(|&a, &b| {
        intensity.components[b]
            .weight
            .partial_cmp(&intensity.components[a].weight)
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    order.into_iter().take(count).map(|i| intensity.components[i].mean).collect()
}

/// Runs the forward pass over all measurement sets, starting from an empty
/// intensity.
pub fn run_forward<const N: usize, const M: usize>(
    measurements: &[MeasurementSet<M>],
    model: &SystemModel<N, M>,
    config: &FilterConfig,
) -> Result<ForwardRecord<N, M>> {
    if measurements.is_empty() {
        return Err(Error::Contract("forward filtering needs at least one step"));
    }
    config.reduction.validate()?;
    let mut prior = PoissonIntensity::<N>::new();
    let mut steps = Vec::with_capacity(measurements.len());
    for (i, z) in measurements.iter().enumerate() {
        let predicted = phd_predict(&prior, &model.motion, &model.birth);
        let pmb = phd_update_to_pmb(&predicted, z, &model.measurement, &model.clutter, config.gate_threshold)?;
        let pmb = reduce_pmb(&pmb, &config.reduction)?;
        let intensity = config.reduction.apply(&pmb_to_ppp(&pmb));
        let estimates = estimate_states(&intensity);
        let outside_region = z.iter().filter(|p| !model.clutter.contains(p)).count();
        prior = intensity.clone();
        steps.push(ForwardStep { k: i + 1, measurements: z.clone(), predicted, pmb, intensity, estimates, outside_region });
    }
    Ok(ForwardRecord { steps })
}
