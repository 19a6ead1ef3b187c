//! Analytic surrogate for the electrostatic forward model.
//!
//! A finger is a capsule (cylinder capped by a hemisphere at the tip). The
//! capsule axis is sampled at `sample_count` points; each pad responds with
//! an inverse-square sum over those points, weighted geometrically from the
//! tip so that the fingertip dominates and the rest of the hand leaves a
//! fading tail. The response amplitude is calibrated once so that a vertical
//! finger touching a pad centre saturates that pad at 1.0, and frames decay
//! below 0.02 everywhere past the sensing range.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::types::{
    default_sigma_map, validate_pose, FingerPose, SensorFrame, SensorSpec, NOISE_MU,
    NOISE_SIGMA_EDGE, NOISE_SIGMA_INTERIOR, PAD_COUNT,
};

/// Capsule geometry of the simulated finger.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FingerGeometry {
    /// Capsule radius in cm (9 mm diameter by default).
    pub radius: f64,
    /// Total finger length in cm, hemisphere included.
    pub length: f64,
    /// Number of axis sample points.
    pub sample_count: usize,
}

impl Default for FingerGeometry {
    fn default() -> Self {
        Self {
            radius: 0.45,
            length: 10.0,
            sample_count: 64,
        }
    }
}

impl FingerGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::InvalidSpec("finger radius must be > 0".into()));
        }
        if !(self.length > self.radius) {
            return Err(Error::InvalidSpec("finger length must exceed radius".into()));
        }
        if self.sample_count < 8 {
            return Err(Error::InvalidSpec("sample_count must be >= 8".into()));
        }
        Ok(())
    }
}

/// Geometric decay of the axis weights from tip to base.
pub const DEFAULT_TIP_DECAY: f64 = 0.8;
/// Contact gap floor in cm; also the softening term in the denominator.
pub const DEFAULT_CONTACT_EPSILON: f64 = 0.05;
/// Small overdrive applied at calibration so a touch saturates exactly.
const SATURATION_OVERDRIVE: f64 = 1.02;

/// Points along the capsule axis from fingertip to finger base.
///
/// The lowest point of the tip hemisphere sits at `(x, y, z)`, so the axis
/// starts at the hemisphere centre `(x, y, z + radius)` and extends in the
/// direction given by pitch (tilt from vertical) and yaw (rotation about
/// vertical, 0 = +y). Spacing is uniform in arc length. At pitch 0 the
/// direction is exactly vertical, so yaw has no effect on the points.
pub fn finger_axis_points(pose: &FingerPose, geom: &FingerGeometry) -> Vec<[f64; 3]> {
    let pitch = pose.pitch.to_radians();
    let yaw = pose.yaw.to_radians();
    let dir = [
        pitch.sin() * yaw.sin(),
        pitch.sin() * yaw.cos(),
        pitch.cos(),
    ];
    let tip = [pose.x, pose.y, pose.z + geom.radius];
    let axis_len = geom.length - geom.radius;
    let step = axis_len / (geom.sample_count - 1) as f64;
    (0..geom.sample_count)
        .map(|k| {
            let d = k as f64 * step;
            [tip[0] + d * dir[0], tip[1] + d * dir[1], tip[2] + d * dir[2]]
        })
        .collect()
}

/// Calibrated pose-to-frame surrogate.
#[derive(Clone, Debug)]
pub struct Surrogate {
    spec: SensorSpec,
    geom: FingerGeometry,
    /// Geometric decay rate of the axis weights.
    pub tip_decay: f64,
    /// Contact gap floor / denominator softening, in cm.
    pub contact_epsilon: f64,
    /// Response amplitude; calibrated unless supplied explicitly.
    pub amplitude: f64,
    axis_weights: Vec<f64>,
}

impl Surrogate {
    /// Builds a surrogate with default constants and a calibrated amplitude.
    pub fn new(spec: SensorSpec, geom: FingerGeometry) -> Result<Self> {
        Self::with_params(spec, geom, DEFAULT_TIP_DECAY, DEFAULT_CONTACT_EPSILON, None)
    }

    /// Builds a surrogate with explicit constants. `amplitude = None`
    /// calibrates it from the vertical-touch anchor.
    pub fn with_params(
        spec: SensorSpec,
        geom: FingerGeometry,
        tip_decay: f64,
        contact_epsilon: f64,
        amplitude: Option<f64>,
    ) -> Result<Self> {
        geom.validate()?;
        if !(tip_decay > 0.0 && tip_decay < 1.0) {
            return Err(Error::InvalidSpec("tip_decay must be in (0, 1)".into()));
        }
        if !(contact_epsilon > 0.0) {
            return Err(Error::InvalidSpec("contact_epsilon must be > 0".into()));
        }
        let mut weights = Vec::with_capacity(geom.sample_count);
        let mut w = 1.0;
        let mut sum = 0.0;
        for _ in 0..geom.sample_count {
            weights.push(w);
            sum += w;
            w *= tip_decay;
        }
        for w in &mut weights {
            *w /= sum;
        }
        let mut surrogate = Self {
            spec,
            geom,
            tip_decay,
            contact_epsilon,
            amplitude: 1.0,
            axis_weights: weights,
        };
        surrogate.amplitude = match amplitude {
            Some(a) => a,
            None => surrogate.calibrate_amplitude(),
        };
        Ok(surrogate)
    }

    pub fn spec(&self) -> &SensorSpec {
        &self.spec
    }

    pub fn geometry(&self) -> &FingerGeometry {
        &self.geom
    }

    /// Raw (unscaled) response of a single pad to the given axis points.
    fn raw_pad_response(&self, pad: (f64, f64), axis: &[[f64; 3]]) -> f64 {
        let eps = self.contact_epsilon;
        let radius = self.geom.radius;
        let mut sum = 0.0;
        for (k, p) in axis.iter().enumerate() {
            let dx = p[0] - pad.0;
            let dy = p[1] - pad.1;
            let dz = p[2];
            let dist = (dx * dx + dy * dy + dz * dz).sqrt();
            let gap = (dist - radius).max(eps);
            sum += self.axis_weights[k] / (gap * gap + eps);
        }
        sum
    }

    /// Amplitude that makes a vertical touch over a pad centre saturate.
    ///
    /// The touched pad's raw response is independent of which pad is chosen
    /// (the pad grid is uniform), so any centre works as the anchor.
    fn calibrate_amplitude(&self) -> f64 {
        let anchor = self
            .spec
            .pad_center(7 * self.spec.pads_x + 4)
            .expect("anchor pad exists");
        let pose = FingerPose::new(anchor.0, anchor.1, 0.0, 0.0, 0.0);
        let axis = finger_axis_points(&pose, &self.geom);
        SATURATION_OVERDRIVE / self.raw_pad_response(anchor, &axis)
    }

    /// Clean frame for a pose, without validating the pose.
    ///
    /// Total function used internally and by the [`crate::model::ForwardModel`]
    /// impl; prefer [`Surrogate::simulate_clean`] at API boundaries.
    pub fn response(&self, pose: &FingerPose) -> SensorFrame {
        let axis = finger_axis_points(pose, &self.geom);
        let mut frame = SensorFrame::zeros();
        for index in 0..PAD_COUNT {
            if self.spec.is_dead(index) {
                continue;
            }
            let pad = self.spec.pad_center(index).expect("index in range");
            let v = self.amplitude * self.raw_pad_response(pad, &axis);
            frame.as_mut_slice()[index] = v.clamp(0.0, 1.0);
        }
        frame
    }

    /// Pose to clean frame; fails with `InvalidPose` on bound violations.
    pub fn simulate_clean(&self, pose: &FingerPose) -> Result<SensorFrame> {
        let violations = validate_pose(pose);
        if !violations.is_empty() {
            let text = violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::InvalidPose(text));
        }
        Ok(self.response(pose))
    }

    /// Clean frames for a batch of poses; runs in parallel when the
    /// `parallel` feature is enabled. Output order matches input order.
    pub fn simulate_batch(&self, poses: &[FingerPose]) -> Vec<SensorFrame> {
        map_indexed(poses, |_, pose| self.response(pose))
    }
}

/// Additive pad noise: positive mean offset plus per-pad Gaussian whose
/// spread shrinks where the finger is close (high clean reading).
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub mu: f64,
    pub sigma_map: Vec<f64>,
    pub finger_suppression: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            mu: NOISE_MU,
            sigma_map: default_sigma_map(NOISE_SIGMA_INTERIOR, NOISE_SIGMA_EDGE),
            finger_suppression: 0.7,
        }
    }
}

impl NoiseModel {
    pub fn new(mu: f64, sigma_map: Vec<f64>, finger_suppression: f64) -> Result<Self> {
        if sigma_map.len() != PAD_COUNT {
            return Err(Error::DimensionMismatch {
                expected: PAD_COUNT,
                got: sigma_map.len(),
            });
        }
        if sigma_map.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidSpec("noise sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&finger_suppression) {
            return Err(Error::InvalidSpec(
                "finger_suppression must be in [0, 1]".into(),
            ));
        }
        Ok(Self { mu, sigma_map, finger_suppression })
    }

    /// Noise map taken from a sensor spec, with the given suppression.
    pub fn from_spec(spec: &SensorSpec, finger_suppression: f64) -> Result<Self> {
        Self::new(spec.noise_mu, spec.noise_sigma.clone(), finger_suppression)
    }

    /// Applies noise to a clean frame. Per-pad draws are independent and
    /// consumed in pad order, so the result is deterministic given the rng
    /// state. The noisy frame is re-clipped to `[0, 1]`.
    pub fn apply<R: Rng>(&self, clean: &SensorFrame, rng: &mut R) -> SensorFrame {
        let mut out = clean.clone();
        for (index, v) in out.as_mut_slice().iter_mut().enumerate() {
            let g: f64 = rng.sample(StandardNormal);
            let sigma = self.sigma_map[index] * (1.0 - self.finger_suppression * *v);
            *v = (*v + self.mu + sigma * g).clamp(0.0, 1.0);
        }
        out
    }

    /// Convenience wrapper seeding a fresh rng stream.
    pub fn apply_seeded(&self, clean: &SensorFrame, seed: u64) -> SensorFrame {
        let mut rng = StdRng::seed_from_u64(seed);
        self.apply(clean, &mut rng)
    }
}

/// Two poses that are far apart in pose space yet project to nearly the
/// same clean frame, plus the RMS distance between the two frames.
///
/// Found by construction: at pitch 0 all yaws are indistinguishable, and
/// beyond the sensing range every frame sits below the response floor.
pub fn ambiguous_pair(surrogate: &Surrogate) -> Result<(FingerPose, FingerPose, f64)> {
    let candidates = [
        (
            FingerPose::new(3.0, 5.0, 1.0, 0.0, 0.0),
            FingerPose::new(3.0, 5.0, 1.0, 0.0, 60.0),
        ),
        (
            FingerPose::new(3.0, 5.0, 6.0, 0.0, 0.0),
            FingerPose::new(3.0, 5.0, 8.0, 0.0, 0.0),
        ),
    ];
    for (a, b) in candidates {
        let separated = a.position_distance(&b) >= 1.0 || a.angle_distance(&b) >= 30.0;
        if !separated {
            continue;
        }
        let fa = surrogate.simulate_clean(&a)?;
        let fb = surrogate.simulate_clean(&b)?;
        let rms = fa.rms_distance(&fb);
        if rms < 0.005 {
            return Ok((a, b, rms));
        }
    }
    Err(Error::NotFound)
}
