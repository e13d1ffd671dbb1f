//! Dense Gaussian and Gaussian-mixture primitives.
//!
//! Every intensity and single-object density in the pipeline is a
//! [`GaussianMixture`] over a fixed state dimension `N`, carried as a const
//! generic so that all the small matrix algebra stays on the stack.
//!
//! Covariances produced by a subtraction (Kalman update, backward
//! conditioning) go through [`floor_covariance`]: they are symmetrized and
//! any eigenvalue below [`COVARIANCE_FLOOR`] is lifted to it.

use alloc::vec::Vec;

use nalgebra::{Cholesky, Const};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math::{self, LN_2PI};
use crate::{Error, Result};

pub use crate::math::{chi_square_cdf, chi_square_quantile};

pub type Vector<const N: usize> = nalgebra::SVector<f64, N>;
pub type Matrix<const R: usize, const C: usize> = nalgebra::SMatrix<f64, R, C>;

/// Smallest eigenvalue allowed in a conditioned covariance.
pub const COVARIANCE_FLOOR: f64 = 1e-12;

/// Relative asymmetry tolerated by [`Gaussian::validate`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Default gate probability: the chi-squared quantile used as the gating
/// threshold when none is configured.
pub const DEFAULT_GATE_PROBABILITY: f64 = 0.9999;

/// A weighted Gaussian component.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Gaussian<const N: usize> {
    pub weight: f64,
    pub mean: Vector<N>,
    pub cov: Matrix<N, N>,
}

/// A linear map with additive Gaussian noise, `y = A x + v`, `v ~ N(0, Q)`.
///
/// Used both for motion (`R == C == N`) and observation (`R == M`, `C == N`).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LinearGaussian<const R: usize, const C: usize> {
    pub matrix: Matrix<R, C>,
    pub noise: Matrix<R, R>,
}

impl<const R: usize, const C: usize> LinearGaussian<R, C> {
    pub fn new(matrix: Matrix<R, C>, noise: Matrix<R, R>) -> Result<Self> {
        if !is_symmetric(&noise) || Cholesky::new(noise).is_none() {
            return Err(Error::Contract("noise covariance must be symmetric positive definite"));
        }
        Ok(Self { matrix, noise })
    }
}

fn is_symmetric<const N: usize>(m: &Matrix<N, N>) -> bool {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() <= SYMMETRY_TOLERANCE * scale
}

/// Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi
/// rotations. Columns of the returned matrix are the eigenvectors.
pub(crate) fn symmetric_eigen<const N: usize>(m: &Matrix<N, N>) -> (Vector<N>, Matrix<N, N>) {
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = Matrix::<N, N>::identity();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..N {
            for q in (p + 1)..N {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= f64::EPSILON * f64::EPSILON * a.norm_squared().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..N {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..N {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

fn condition_estimate<const N: usize>(m: &Matrix<N, N>) -> f64 {
    let (values, _) = symmetric_eigen(m);
    let max = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let min = values.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn cholesky<const N: usize>(m: Matrix<N, N>, what: &'static str) -> Result<Cholesky<f64, Const<N>>> {
    Cholesky::new(m).ok_or_else(|| Error::Singular { what, condition: condition_estimate(&m) })
}

/// Symmetrize `p` and clamp its eigenvalues from below at [`COVARIANCE_FLOOR`].
///
/// The eigendecomposition only runs when a Cholesky factorization fails or
/// shows a pivot below the floor.
pub fn floor_covariance<const N: usize>(p: &Matrix<N, N>) -> Matrix<N, N> {
    let sym = (p + p.transpose()) * 0.5;
    if let Some(chol) = Cholesky::new(sym) {
        let l = chol.l_dirty();
        if (0..N).all(|i| l[(i, i)] * l[(i, i)] >= COVARIANCE_FLOOR) {
            return sym;
        }
    }
    let (values, vectors) = symmetric_eigen(&sym);
    let clamped = values.map(|v| v.max(COVARIANCE_FLOOR));
    let rebuilt = vectors * Matrix::<N, N>::from_diagonal(&clamped) * vectors.transpose();
    (rebuilt + rebuilt.transpose()) * 0.5
}

/// Lower Cholesky factor of a (floored) covariance, ready for sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleFactor<const N: usize> {
    lower: Matrix<N, N>,
}

impl<const N: usize> SampleFactor<N> {
    pub fn new(cov: &Matrix<N, N>) -> Result<Self> {
        let chol = cholesky(floor_covariance(cov), "sampling covariance")?;
        Ok(Self { lower: chol.unpack() })
    }

    /// A zero-mean draw with the factor's covariance.
    pub fn sample_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector<N> {
        let xi = Vector::<N>::from_fn(|_, _| StandardNormal.sample(rng));
        self.lower * xi
    }
}

/// Precomputed joint-Gaussian conditioning of `x ~ N(m, P)` on an
/// observation `y = A x + v`, `v ~ N(0, Q)`.
///
/// With `S = A P Aᵀ + Q` and `G = P Aᵀ S⁻¹` the conditional is
/// `N(m + G (y − A m), P − G S Gᵀ)`, and the marginal of `y` is
/// `N(A m, S)`. Everything except the conditional mean is independent of
/// `y`, so one conditioner serves any number of observations.
#[derive(Clone, Debug)]
pub struct LinearConditioner<const N: usize, const D: usize> {
    prior_mean: Vector<N>,
    predicted: Vector<D>,
    innovation: Cholesky<f64, Const<D>>,
    log_norm: f64,
    gain: Matrix<N, D>,
    conditional_cov: Matrix<N, N>,
}

impl<const N: usize, const D: usize> LinearConditioner<N, D> {
    pub fn new(prior: &Gaussian<N>, model: &LinearGaussian<D, N>) -> Result<Self> {
        let a = &model.matrix;
        let ap = a * prior.cov;
        let s = ap * a.transpose() + model.noise;
        let s = (s + s.transpose()) * 0.5;
        let innovation = cholesky(s, "innovation covariance")?;
        // G = P Aᵀ S⁻¹ = (S⁻¹ A P)ᵀ
        let gain = innovation.solve(&ap).transpose();
        let conditional_cov = floor_covariance(&(prior.cov - gain * s * gain.transpose()));
        let log_norm = -0.5 * (D as f64 * LN_2PI + innovation.ln_determinant());
        Ok(Self {
            prior_mean: prior.mean,
            predicted: a * prior.mean,
            innovation,
            log_norm,
            gain,
            conditional_cov,
        })
    }

    /// `A m`, the mean of the observation marginal.
    pub fn predicted(&self) -> &Vector<D> {
        &self.predicted
    }

    /// `S = A P Aᵀ + Q`.
    pub fn innovation_cov(&self) -> Matrix<D, D> {
        let l = self.innovation.l();
        l * l.transpose()
    }

    pub fn mahalanobis_sq(&self, y: &Vector<D>) -> f64 {
        let r = y - self.predicted;
        r.dot(&self.innovation.solve(&r))
    }

    /// `ln N(y; A m, S)`.
    pub fn log_likelihood(&self, y: &Vector<D>) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(y)
    }

    pub fn conditional_mean(&self, y: &Vector<D>) -> Vector<N> {
        self.prior_mean + self.gain * (y - self.predicted)
    }

    pub fn conditional_cov(&self) -> &Matrix<N, N> {
        &self.conditional_cov
    }

    pub fn gain(&self) -> &Matrix<N, D> {
        &self.gain
    }
}

impl<const N: usize> Gaussian<N> {
    pub fn new(weight: f64, mean: Vector<N>, cov: Matrix<N, N>) -> Result<Self> {
        let g = Self { weight, mean, cov };
        g.validate()?;
        Ok(g)
    }

    /// Checks the component invariants: finite nonnegative weight and a
    /// symmetric positive definite covariance.
    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::Contract("component weight must be finite and nonnegative"));
        }
        if !is_symmetric(&self.cov) {
            return Err(Error::Contract("covariance must be symmetric"));
        }
        cholesky(self.cov, "component covariance").map(|_| ())
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    /// Propagates through a linear-Gaussian transition. The weight is unchanged.
    pub fn predict(&self, model: &LinearGaussian<N, N>) -> Self {
        let f = &model.matrix;
        let cov = f * self.cov * f.transpose() + model.noise;
        Self { weight: self.weight, mean: f * self.mean, cov: (cov + cov.transpose()) * 0.5 }
    }

    /// Kalman update by measurement `z`.
    ///
    /// Returns the posterior, whose weight is the prior weight times the
    /// predictive likelihood `N(z; H m, H P Hᵀ + R)`, together with that
    /// likelihood.
    pub fn kalman_update<const M: usize>(
        &self,
        model: &LinearGaussian<M, N>,
        z: &Vector<M>,
    ) -> Result<(Self, f64)> {
        let cond = LinearConditioner::new(self, model)?;
        let likelihood = math::exp(cond.log_likelihood(z));
        let posterior = Self {
            weight: self.weight * likelihood,
            mean: cond.conditional_mean(z),
            cov: cond.conditional_cov,
        };
        Ok((posterior, likelihood))
    }

    /// Conditions this density on the successor state `y` through the
    /// transition `model`: the density proportional to `g(y|x) p(x)`.
    ///
    /// Returns the conditional, weighted like [`Gaussian::kalman_update`],
    /// and the transition likelihood `N(y; F m, F P Fᵀ + Q)`.
    pub fn backward_condition(&self, model: &LinearGaussian<N, N>, y: &Vector<N>) -> Result<(Self, f64)> {
        self.kalman_update(model, y)
    }

    /// True iff `z` lies within squared Mahalanobis distance `threshold`
    /// of the predicted observation.
    pub fn gate<const M: usize>(&self, model: &LinearGaussian<M, N>, z: &Vector<M>, threshold: f64) -> Result<bool> {
        if !(threshold > 0.0) {
            return Err(Error::Contract("gate threshold must be positive"));
        }
        let cond = LinearConditioner::new(self, model)?;
        Ok(cond.mahalanobis_sq(z) <= threshold)
    }

    /// `ln N(x; m, P)`, ignoring the weight.
    pub fn log_pdf(&self, x: &Vector<N>) -> Result<f64> {
        let chol = cholesky(self.cov, "component covariance")?;
        let r = x - self.mean;
        Ok(-0.5 * (N as f64 * LN_2PI + chol.ln_determinant() + r.dot(&chol.solve(&r))))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector<N>> {
        Ok(self.mean + SampleFactor::new(&self.cov)?.sample_offset(rng))
    }
}

/// Free-function form of [`Gaussian::predict`].
pub fn gaussian_predict<const N: usize>(c: &Gaussian<N>, model: &LinearGaussian<N, N>) -> Gaussian<N> {
    c.predict(model)
}

/// Free-function form of [`Gaussian::kalman_update`].
pub fn kalman_update<const N: usize, const M: usize>(
    c: &Gaussian<N>,
    model: &LinearGaussian<M, N>,
    z: &Vector<M>,
) -> Result<(Gaussian<N>, f64)> {
    c.kalman_update(model, z)
}

/// Free-function form of [`Gaussian::backward_condition`].
pub fn backward_condition<const N: usize>(
    c: &Gaussian<N>,
    model: &LinearGaussian<N, N>,
    y: &Vector<N>,
) -> Result<(Gaussian<N>, f64)> {
    c.backward_condition(model, y)
}

/// Free-function form of [`Gaussian::gate`].
pub fn ellipsoidal_gate<const N: usize, const M: usize>(
    c: &Gaussian<N>,
    model: &LinearGaussian<M, N>,
    z: &Vector<M>,
    threshold: f64,
) -> Result<bool> {
    c.gate(model, z, threshold)
}

pub fn sample_gaussian<const N: usize, R: Rng + ?Sized>(c: &Gaussian<N>, rng: &mut R) -> Result<Vector<N>> {
    c.sample(rng)
}

/// Draws a Poisson-distributed count.
pub fn poisson_sample<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<u64> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::Contract("Poisson rate must be finite and nonnegative"));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(rate).map_err(|_| Error::Contract("invalid Poisson rate"))?;
    let draw: f64 = dist.sample(rng);
    Ok(draw as u64)
}

/// Draws an index with probability proportional to `weights`.
pub fn categorical_sample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Contract("categorical weights must be finite and nonnegative"));
        }
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::Contract("categorical weights must have a positive sum"));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_positive)
}

/// [`categorical_sample`] over log-domain weights, normalized by max shift.
pub fn categorical_sample_log<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Result<usize> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Contract("categorical weights must have a positive sum"));
    }
    let weights: Vec<f64> = log_weights.iter().map(|&l| math::exp(l - max)).collect();
    categorical_sample(&weights, rng)
}

/// An ordered list of weighted Gaussian components.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct GaussianMixture<const N: usize> {
    pub components: Vec<Gaussian<N>>,
}

impl<const N: usize> GaussianMixture<N> {
    pub fn new() -> Self {
        Self { components: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Total weight; the expected cardinality when the mixture is an intensity.
    pub fn mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Gaussian<N>> {
        self.components.iter()
    }

    pub fn push(&mut self, c: Gaussian<N>) {
        self.components.push(c);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.clone().with_weight(c.weight * factor)).collect(),
        }
    }

    /// `ln Σᵢ wᵢ N(x; mᵢ, Pᵢ)`.
    pub fn log_eval(&self, x: &Vector<N>) -> Result<f64> {
        let mut acc = f64::NEG_INFINITY;
        for c in &self.components {
            if c.weight > 0.0 {
                acc = math::log_add(acc, math::ln(c.weight) + c.log_pdf(x)?);
            }
        }
        Ok(acc)
    }

    /// Collapses the mixture into one Gaussian with the same mass, mean and
    /// covariance.
    pub fn moment_match(&self) -> Result<Gaussian<N>> {
        moment_match(&self.components)
    }
}

impl<const N: usize> From<Vec<Gaussian<N>>> for GaussianMixture<N> {
    fn from(components: Vec<Gaussian<N>>) -> Self {
        Self { components }
    }
}

impl<const N: usize> FromIterator<Gaussian<N>> for GaussianMixture<N> {
    fn from_iter<I: IntoIterator<Item = Gaussian<N>>>(iter: I) -> Self {
        Self { components: iter.into_iter().collect() }
    }
}

impl<'a, const N: usize> IntoIterator for &'a GaussianMixture<N> {
    type Item = &'a Gaussian<N>;
    type IntoIter = core::slice::Iter<'a, Gaussian<N>>;

    fn into_iter(self) -> Self::IntoIter {
        self.components.iter()
    }
}

/// Mass-preserving single-Gaussian approximation of a set of components.
pub fn moment_match<const N: usize>(components: &[Gaussian<N>]) -> Result<Gaussian<N>> {
    if components.len() == 1 {
        return Ok(components[0].clone());
    }
    let mass: f64 = components.iter().map(|c| c.weight).sum();
    if components.is_empty() || !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::Contract("moment matching needs a nonempty mixture with positive mass"));
    }
    let mean = components.iter().fold(Vector::<N>::zeros(), |acc, c| acc + c.mean * (c.weight / mass));
    let mut cov = Matrix::<N, N>::zeros();
    for c in components {
        let d = c.mean - mean;
        cov += (c.cov + d * d.transpose()) * (c.weight / mass);
    }
    Ok(Gaussian { weight: mass, mean, cov: (cov + cov.transpose()) * 0.5 })
}

/// GM-PHD style mixture reduction.
///
/// Components lighter than `prune_threshold` are dropped. The heaviest
/// remaining component then absorbs every remaining component within squared
/// Mahalanobis distance `merge_threshold` (measured with the heaviest one's
/// covariance), and the group is replaced by its moment match; this repeats
/// until nothing is left. Finally only the `max_components` heaviest results
/// are kept. Output is ordered by decreasing weight. Pruning does not
/// renormalize.
pub fn reduce_mixture<const N: usize>(
    gm: &GaussianMixture<N>,
    prune_threshold: f64,
    merge_threshold: f64,
    max_components: usize,
) -> GaussianMixture<N> {
    let mut remaining: Vec<&Gaussian<N>> = gm.iter().filter(|c| c.weight >= prune_threshold).collect();
    // stable: equal weights keep input order
    remaining.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap_or(core::cmp::Ordering::Equal));

    let mut out = Vec::new();
    let mut group: Vec<Gaussian<N>> = Vec::new();
    while !remaining.is_empty() {
        let anchor = remaining[0];
        group.clear();
        match Cholesky::new(floor_covariance(&anchor.cov)) {
            Some(chol) => {
                let mut rest = Vec::with_capacity(remaining.len());
                for c in remaining.drain(..) {
                    let d = c.mean - anchor.mean;
                    if d.dot(&chol.solve(&d)) <= merge_threshold {
                        group.push(c.clone());
                    } else {
                        rest.push(c);
                    }
                }
                remaining = rest;
            }
            None => {
                group.push(anchor.clone());
                remaining.remove(0);
            }
        }
        // a group always contains its anchor, which has positive weight
        // unless every weight is zero; fall back to the anchor then
        out.push(moment_match(&group).unwrap_or_else(|_| anchor.clone()));
    }
    out.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap_or(core::cmp::Ordering::Equal));
    out.truncate(max_components);
    GaussianMixture { components: out }
}
