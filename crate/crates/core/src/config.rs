//! Flat `key = value` configuration covering every tunable: surrogate
//! constants, noise model, dataset spec, training, inversion and tracker
//! settings. Unknown keys are errors so typos never pass silently; `#`
//! starts a comment. [`Config::render`] writes the effective settings back
//! in the same format, which is how experiments get pinned.

use std::collections::BTreeMap;
use std::path::Path;

use crate::dataset::{DatasetSpec, GridAxis};
use crate::error::{Error, Result};
use crate::filter::PfConfig;
use crate::invert::InvertOptions;
use crate::net::TrainConfig;
use crate::sim::{FingerGeometry, NoiseModel, Surrogate, DEFAULT_CONTACT_EPSILON, DEFAULT_TIP_DECAY};
use crate::types::{
    default_sigma_map, SensorSpec, NOISE_MU, NOISE_SIGMA_EDGE, NOISE_SIGMA_INTERIOR, POSE_DIMS,
};

/// Surrogate and noise constants in config form.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSection {
    pub finger_radius: f64,
    pub finger_length: f64,
    pub sample_count: usize,
    pub tip_decay: f64,
    pub contact_epsilon: f64,
    /// Calibrated from the touch anchor when absent.
    pub amplitude: Option<f64>,
    pub noise_mu: f64,
    pub noise_sigma_interior: f64,
    pub noise_sigma_edge: f64,
    pub finger_suppression: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let geom = FingerGeometry::default();
        Self {
            finger_radius: geom.radius,
            finger_length: geom.length,
            sample_count: geom.sample_count,
            tip_decay: DEFAULT_TIP_DECAY,
            contact_epsilon: DEFAULT_CONTACT_EPSILON,
            amplitude: None,
            noise_mu: NOISE_MU,
            noise_sigma_interior: NOISE_SIGMA_INTERIOR,
            noise_sigma_edge: NOISE_SIGMA_EDGE,
            finger_suppression: 0.7,
        }
    }
}

/// Training settings plus the validation slice used for the held-out RMSE
/// and the anomaly threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub val_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let cfg = TrainConfig::default();
        Self {
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            epochs: cfg.epochs,
            l2: cfg.l2,
            val_fraction: 0.2,
        }
    }
}

/// The full configuration tree.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Config {
    pub seed: u64,
    pub sim: SimSection,
    pub dataset: DatasetSpec,
    pub train: TrainSection,
    pub invert: InvertOptions,
    pub pf: PfConfig,
}

impl Config {
    /// Builds the surrogate described by the `sim.*` keys.
    pub fn surrogate(&self) -> Result<Surrogate> {
        let geom = FingerGeometry {
            radius: self.sim.finger_radius,
            length: self.sim.finger_length,
            sample_count: self.sim.sample_count,
        };
        Surrogate::with_params(
            SensorSpec::default(),
            geom,
            self.sim.tip_decay,
            self.sim.contact_epsilon,
            self.sim.amplitude,
        )
    }

    /// Builds the noise model described by the `sim.*` keys.
    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(
            self.sim.noise_mu,
            default_sigma_map(self.sim.noise_sigma_interior, self.sim.noise_sigma_edge),
            self.sim.finger_suppression,
        )
    }

    /// Dataset spec with the top-level seed folded in.
    pub fn dataset_spec(&self) -> DatasetSpec {
        let mut spec = self.dataset.clone();
        spec.seed = self.seed;
        spec
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            l2: self.train.l2,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (index, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", index + 1))
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut config = Config::default();
        for (key, value) in entries {
            config.apply(&key, &value)?;
        }
        Ok(config)
    }

    /// Applies one `key = value` assignment; the CLI uses this for flag
    /// overrides as well.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("{key}: invalid {what}: {value:?}"));
        let parse_f64 = |value: &str, what: &str| -> Result<f64> {
            value.parse().map_err(|_| bad(what))
        };
        let parse_usize = |value: &str, what: &str| -> Result<usize> {
            value.parse().map_err(|_| bad(what))
        };
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "sim.finger_radius" => self.sim.finger_radius = parse_f64(value, "number")?,
            "sim.finger_length" => self.sim.finger_length = parse_f64(value, "number")?,
            "sim.sample_count" => self.sim.sample_count = parse_usize(value, "count")?,
            "sim.tip_decay" => self.sim.tip_decay = parse_f64(value, "number")?,
            "sim.contact_epsilon" => self.sim.contact_epsilon = parse_f64(value, "number")?,
            "sim.amplitude" => {
                self.sim.amplitude = if value == "auto" {
                    None
                } else {
                    Some(parse_f64(value, "number or `auto`")?)
                }
            }
            "sim.noise_mu" => self.sim.noise_mu = parse_f64(value, "number")?,
            "sim.noise_sigma_interior" => {
                self.sim.noise_sigma_interior = parse_f64(value, "number")?
            }
            "sim.noise_sigma_edge" => self.sim.noise_sigma_edge = parse_f64(value, "number")?,
            "sim.finger_suppression" => {
                self.sim.finger_suppression = parse_f64(value, "number")?
            }
            "dataset.random_count" => self.dataset.random_count = parse_usize(value, "count")?,
            "dataset.grid_x" => self.dataset.grid_x = parse_axis(key, value)?,
            "dataset.grid_y" => self.dataset.grid_y = parse_axis(key, value)?,
            "dataset.grid_z" => self.dataset.grid_z = parse_axis(key, value)?,
            "dataset.pitch_list" => self.dataset.pitch_list = parse_list(key, value)?,
            "dataset.yaw_list" => self.dataset.yaw_list = parse_list(key, value)?,
            "dataset.noise" => self.dataset.noise = parse_bool(key, value)?,
            "train.batch_size" => self.train.batch_size = parse_usize(value, "count")?,
            "train.learning_rate" => self.train.learning_rate = parse_f64(value, "number")?,
            "train.epochs" => self.train.epochs = parse_usize(value, "count")?,
            "train.l2" => self.train.l2 = parse_f64(value, "number")?,
            "train.val_fraction" => self.train.val_fraction = parse_f64(value, "number")?,
            "invert.restarts" => self.invert.restarts = parse_usize(value, "count")?,
            "invert.max_iters" => self.invert.max_iters = parse_usize(value, "count")?,
            "invert.step_size" => self.invert.step_size = parse_f64(value, "number")?,
            "invert.tol" => self.invert.tol = parse_f64(value, "number")?,
            "pf.particles" => self.pf.particles = parse_usize(value, "count")?,
            "pf.sigma_pos" => self.pf.sigma_pos = parse_f64(value, "number")?,
            "pf.sigma_z" => self.pf.sigma_z = parse_f64(value, "number")?,
            "pf.sigma_ang" => self.pf.sigma_ang = parse_f64(value, "number")?,
            "pf.sigma_f" => self.pf.sigma_f = parse_f64(value, "number")?,
            "pf.lambda" => {
                let list = parse_list(key, value)?;
                if list.len() != POSE_DIMS {
                    return Err(Error::Config(format!(
                        "pf.lambda needs {POSE_DIMS} values, got {}",
                        list.len()
                    )));
                }
                self.pf.lambda.copy_from_slice(&list);
            }
            "pf.ess_fraction" => self.pf.ess_fraction = parse_f64(value, "number")?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Serializes the effective configuration, including the calibrated
    /// amplitude when one was computed, so a run can be reproduced
    /// bit-for-bit from its config file.
    pub fn render(&self) -> String {
        let axis = |a: &GridAxis| format!("{}:{}:{}", a.start, a.step, a.count);
        let list = |l: &[f64]| {
            l.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let amplitude = match self.sim.amplitude {
            Some(a) => a.to_string(),
            None => "auto".to_string(),
        };
        format!(
            "seed = {}\n\
             sim.finger_radius = {}\n\
             sim.finger_length = {}\n\
             sim.sample_count = {}\n\
             sim.tip_decay = {}\n\
             sim.contact_epsilon = {}\n\
             sim.amplitude = {}\n\
             sim.noise_mu = {}\n\
             sim.noise_sigma_interior = {}\n\
             sim.noise_sigma_edge = {}\n\
             sim.finger_suppression = {}\n\
             dataset.random_count = {}\n\
             dataset.grid_x = {}\n\
             dataset.grid_y = {}\n\
             dataset.grid_z = {}\n\
             dataset.pitch_list = {}\n\
             dataset.yaw_list = {}\n\
             dataset.noise = {}\n\
             train.batch_size = {}\n\
             train.learning_rate = {}\n\
             train.epochs = {}\n\
             train.l2 = {}\n\
             train.val_fraction = {}\n\
             invert.restarts = {}\n\
             invert.max_iters = {}\n\
             invert.step_size = {}\n\
             invert.tol = {}\n\
             pf.particles = {}\n\
             pf.sigma_pos = {}\n\
             pf.sigma_z = {}\n\
             pf.sigma_ang = {}\n\
             pf.sigma_f = {}\n\
             pf.lambda = {}\n\
             pf.ess_fraction = {}\n",
            self.seed,
            self.sim.finger_radius,
            self.sim.finger_length,
            self.sim.sample_count,
            self.sim.tip_decay,
            self.sim.contact_epsilon,
            amplitude,
            self.sim.noise_mu,
            self.sim.noise_sigma_interior,
            self.sim.noise_sigma_edge,
            self.sim.finger_suppression,
            self.dataset.random_count,
            axis(&self.dataset.grid_x),
            axis(&self.dataset.grid_y),
            axis(&self.dataset.grid_z),
            list(&self.dataset.pitch_list),
            list(&self.dataset.yaw_list),
            self.dataset.noise,
            self.train.batch_size,
            self.train.learning_rate,
            self.train.epochs,
            self.train.l2,
            self.train.val_fraction,
            self.invert.restarts,
            self.invert.max_iters,
            self.invert.step_size,
            self.invert.tol,
            self.pf.particles,
            self.pf.sigma_pos,
            self.pf.sigma_z,
            self.pf.sigma_ang,
            self.pf.sigma_f,
            list(&self.pf.lambda),
            self.pf.ess_fraction,
        )
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: invalid bool: {value:?}"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: invalid list entry {v:?}")))
        })
        .collect()
}

fn parse_axis(key: &str, value: &str) -> Result<GridAxis> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "{key}: expected start:step:count, got {value:?}"
        )));
    }
    Ok(GridAxis {
        start: parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{key}: invalid start {:?}", parts[0])))?,
        step: parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{key}: invalid step {:?}", parts[1])))?,
        count: parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{key}: invalid count {:?}", parts[2])))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_render_and_parse() {
        let config = Config::default();
        let text = config.render();
        let parsed = Config::parse(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(matches!(
            Config::parse("sim.warp_factor = 9"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let config = Config::parse("# comment\n\nseed = 7 # trailing\n").unwrap();
        assert_eq!(config.seed, 7);
    }

    #[test]
    fn lists_and_axes_parse() {
        let config = Config::parse(
            "dataset.grid_z = 0.5:0.5:3\ndataset.pitch_list = 0, 30, 60\npf.lambda = 1,2,3,4,5\n",
        )
        .unwrap();
        assert_eq!(config.dataset.grid_z, GridAxis::new(0.5, 0.5, 3));
        assert_eq!(config.dataset.pitch_list, vec![0.0, 30.0, 60.0]);
        assert_eq!(config.pf.lambda, [1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn amplitude_auto_means_calibrated() {
        let config = Config::parse("sim.amplitude = auto\n").unwrap();
        assert_eq!(config.sim.amplitude, None);
        let config = Config::parse("sim.amplitude = 0.25\n").unwrap();
        assert_eq!(config.sim.amplitude, Some(0.25));
    }

    #[test]
    fn surrogate_from_config_matches_direct_construction() {
        let config = Config::default();
        let a = config.surrogate().unwrap();
        let b = Surrogate::new(SensorSpec::default(), FingerGeometry::default()).unwrap();
        assert_eq!(a.amplitude, b.amplitude);
    }
}
