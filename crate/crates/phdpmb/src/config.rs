//! Campaign configuration.
//!
//! The file format is TOML:
//!
//! ```text
//! runs = 20
//! scenario.clutter_rate = 30
//! smoother.particles = 500
//! ```
//!
//! Every key is optional. Values are applied in this order: built-in
//! defaults, the file, command-line flags, and finally the overrides of the
//! scenario variant.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use phdpmb_core::gaussian::{chi_square_quantile, Vector};
use phdpmb_core::metrics::{GospaParams, TgospaParams};
use phdpmb_core::models::{
    BirthModel, ClutterModel, MeasurementModel, MotionModel, ObjectSpec, ScenarioConfig, SystemModel,
};
use phdpmb_core::phd::{FilterConfig, ReductionConfig};
use phdpmb_core::SmootherConfig;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Parameter sets of the experiments: the nominal scenario and one change
/// of the clutter rate or detection probability each.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Variant {
    #[default]
    #[serde(rename = "no-change")]
    #[value(name = "no-change")]
    NoChange,
    #[serde(rename = "clutter-10")]
    #[value(name = "clutter-10")]
    Clutter10,
    #[serde(rename = "clutter-100")]
    #[value(name = "clutter-100")]
    Clutter100,
    #[serde(rename = "pd-098")]
    #[value(name = "pd-098")]
    Pd098,
    #[serde(rename = "pd-08")]
    #[value(name = "pd-08")]
    Pd08,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::NoChange => "no-change",
            Variant::Clutter10 => "clutter-10",
            Variant::Clutter100 => "clutter-100",
            Variant::Pd098 => "pd-098",
            Variant::Pd08 => "pd-08",
        }
    }

    pub fn apply(self, scenario: &mut ScenarioSection) {
        match self {
            Variant::NoChange => {}
            Variant::Clutter10 => scenario.clutter_rate = 10.0,
            Variant::Clutter100 => scenario.clutter_rate = 100.0,
            Variant::Pd098 => scenario.detection = 0.98,
            Variant::Pd08 => scenario.detection = 0.8,
        }
    }
}

/// Which trajectories of the chosen particle are reported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Smoothed means given the particle's associations.
    #[default]
    SmoothedMean,
    /// The particle's sampled states.
    Sampled,
}

/// The space metric distances are measured in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Distance {
    /// Position components only.
    #[default]
    Position,
    /// The full state, positions and velocities.
    State,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub steps: usize,
    pub sample_period: f64,
    pub sigma_q: f64,
    pub survival: f64,
    pub sigma_r: f64,
    pub detection: f64,
    pub clutter_rate: f64,
    pub region_lower: [f64; 2],
    pub region_upper: [f64; 2],
    /// `[birth_time, death_time, birth_component]` per object.
    pub objects: Vec<[usize; 3]>,
    pub max_attempts: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let nominal = ScenarioConfig::nominal();
        let model = &nominal.model;
        Self {
            steps: nominal.steps,
            sample_period: 0.5,
            sigma_q: 1.8,
            survival: model.motion.survival,
            sigma_r: 2.0,
            detection: model.measurement.detection,
            clutter_rate: model.clutter.rate,
            region_lower: [model.clutter.lower[0], model.clutter.lower[1]],
            region_upper: [model.clutter.upper[0], model.clutter.upper[1]],
            objects: nominal.objects.iter().map(|o| [o.birth_time, o.death_time, o.birth_component]).collect(),
            max_attempts: nominal.max_attempts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub prune_threshold: f64,
    pub merge_threshold: f64,
    pub max_components: usize,
    /// Probability mass inside the measurement gate.
    pub gate_probability: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let r = ReductionConfig::default();
        Self {
            prune_threshold: r.prune_threshold,
            merge_threshold: r.merge_threshold,
            max_components: r.max_components,
            gate_probability: 0.9999,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmootherSection {
    pub particles: usize,
    pub max_hypotheses: usize,
    /// Probability mass inside the backward gate.
    pub gate_probability: f64,
    pub sample_undetected_ppp: bool,
    pub estimator: Estimator,
}

impl Default for SmootherSection {
    fn default() -> Self {
        Self {
            particles: 1000,
            max_hypotheses: 100,
            gate_probability: 0.9999,
            sample_undetected_ppp: false,
            estimator: Estimator::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    pub cutoff: f64,
    pub order: f64,
    pub alpha: f64,
    pub switch_cost: f64,
    pub distance: Distance,
}

impl Default for MetricSection {
    fn default() -> Self {
        Self { cutoff: 10.0, order: 1.0, alpha: 2.0, switch_cost: 1.0, distance: Distance::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub runs: usize,
    pub seed: u64,
    pub variant: Variant,
    pub out: PathBuf,
    /// Worker threads for runs; 0 uses one per core.
    pub workers: usize,
    pub scenario: ScenarioSection,
    pub filter: FilterSection,
    pub smoother: SmootherSection,
    pub metric: MetricSection,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            seed: 1,
            variant: Variant::default(),
            out: PathBuf::from("results"),
            workers: 0,
            scenario: ScenarioSection::default(),
            filter: FilterSection::default(),
            smoother: SmootherSection::default(),
            metric: MetricSection::default(),
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

impl CampaignConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(config_error)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    /// The scenario parameters with the variant's overrides applied.
    pub fn effective_scenario(&self) -> ScenarioSection {
        let mut s = self.scenario.clone();
        self.variant.apply(&mut s);
        s
    }

    pub fn system_model(&self) -> Result<SystemModel<4, 2>, HarnessError> {
        let s = self.effective_scenario();
        Ok(SystemModel {
            motion: MotionModel::nearly_constant_velocity(s.sample_period, s.sigma_q, s.survival)
                .map_err(config_error)?,
            measurement: MeasurementModel::position(s.sigma_r, s.detection).map_err(config_error)?,
            birth: BirthModel::nominal(),
            clutter: ClutterModel::new(
                s.clutter_rate,
                Vector::<2>::from(s.region_lower),
                Vector::<2>::from(s.region_upper),
            )
            .map_err(config_error)?,
        })
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig<4, 2>, HarnessError> {
        let s = self.effective_scenario();
        Ok(ScenarioConfig {
            steps: s.steps,
            objects: s
                .objects
                .iter()
                .map(|&[birth_time, death_time, birth_component]| ObjectSpec { birth_time, death_time, birth_component })
                .collect(),
            model: self.system_model()?,
            max_attempts: s.max_attempts,
        })
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            reduction: ReductionConfig {
                prune_threshold: self.filter.prune_threshold,
                merge_threshold: self.filter.merge_threshold,
                max_components: self.filter.max_components,
            },
            gate_threshold: chi_square_quantile(self.filter.gate_probability, 2),
        }
    }

    /// Smoother settings for one run; particles draw from streams derived
    /// from `run_seed`.
    pub fn smoother_config(&self, run_seed: u64) -> SmootherConfig {
        SmootherConfig {
            particles: self.smoother.particles,
            max_hypotheses: self.smoother.max_hypotheses,
            gate_threshold: chi_square_quantile(self.smoother.gate_probability, 4),
            sample_undetected_ppp: self.smoother.sample_undetected_ppp,
            seed: run_seed,
        }
    }

    pub fn gospa_params(&self) -> GospaParams {
        GospaParams { cutoff: self.metric.cutoff, order: self.metric.order, alpha: self.metric.alpha }
    }

    pub fn tgospa_params(&self) -> TgospaParams {
        TgospaParams { cutoff: self.metric.cutoff, order: self.metric.order, switch_cost: self.metric.switch_cost }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if self.runs < 1 {
            return fail("runs must be at least 1");
        }
        let probability = |p: f64| p > 0.0 && p < 1.0;
        if !probability(self.filter.gate_probability) || !probability(self.smoother.gate_probability) {
            return fail("gate probabilities must lie in (0, 1)");
        }
        let s = self.effective_scenario();
        if !(s.survival > 0.0 && s.survival <= 1.0 && s.detection > 0.0 && s.detection <= 1.0) {
            return fail("survival and detection probabilities must lie in (0, 1]");
        }
        if !(s.sample_period > 0.0 && s.sigma_q > 0.0 && s.sigma_r > 0.0) {
            return fail("sample period and noise levels must be positive");
        }
        self.filter_config().reduction.validate().map_err(config_error)?;
        self.smoother_config(0).validate().map_err(config_error)?;
        self.gospa_params().validate().map_err(config_error)?;
        self.tgospa_params().validate().map_err(config_error)?;
        self.scenario_config()?.validate().map_err(config_error)?;
        Ok(())
    }
}
