//! Shared value types: finger pose, sensor frame, sensor geometry.
//!
//! Units are centimetres and degrees at every public interface; trig is done
//! in radians internally. Frames are stored row-major with the x pad index
//! varying fastest: pad `(i, j)` lives at `values[j * PADS_X + i]`.

use rand::Rng;

use crate::error::{Error, Result};

/// Pad columns along the screen x axis.
pub const PADS_X: usize = 10;
/// Pad rows along the screen y axis.
pub const PADS_Y: usize = 16;
/// Total pad count of one frame.
pub const PAD_COUNT: usize = PADS_X * PADS_Y;
/// Dimensions of the pose vector `[x, y, z, pitch, yaw]`.
pub const POSE_DIMS: usize = 5;

/// Screen width in cm.
pub const SCREEN_WIDTH: f64 = 6.1;
/// Screen height in cm.
pub const SCREEN_HEIGHT: f64 = 9.7;
/// Off-screen margin in cm within which poses are still considered valid.
pub const EDGE_MARGIN: f64 = 1.0;

/// A single-finger pose: fingertip position plus finger orientation.
///
/// `z` is the height of the lowest fingertip point above the screen plane.
/// `pitch` is the tilt from vertical (0 = perpendicular to the screen,
/// 90 = parallel). `yaw` is the rotation about the vertical axis with
/// 0 pointing along +y and negative values rotating to the left.
/// Roll is not modelled; it is unobservable for this sensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FingerPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl FingerPose {
    pub fn new(x: f64, y: f64, z: f64, pitch: f64, yaw: f64) -> Self {
        Self { x, y, z, pitch, yaw }
    }

    pub fn to_array(&self) -> [f64; POSE_DIMS] {
        [self.x, self.y, self.z, self.pitch, self.yaw]
    }

    pub fn from_array(a: [f64; POSE_DIMS]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    /// Euclidean distance between the two fingertip positions, in cm.
    pub fn position_distance(&self, other: &Self) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Largest absolute angular difference (pitch or yaw), in degrees.
    pub fn angle_distance(&self, other: &Self) -> f64 {
        (self.pitch - other.pitch)
            .abs()
            .max((self.yaw - other.yaw).abs())
    }
}

/// One violated pose bound, reported as data rather than as a failure.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub value: f64,
    pub min: f64,
    pub max: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}={} outside [{}, {}]",
            self.field, self.value, self.min, self.max
        )
    }
}

/// Checks every pose invariant and returns the violated bounds by name.
///
/// An empty list means the pose is valid. `z` has no upper validity bound;
/// sampling boxes are the business of [`PoseBounds`].
pub fn validate_pose(pose: &FingerPose) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut check = |field, value, min, max| {
        if !(min..=max).contains(&value) || !f64::is_finite(value) {
            violations.push(Violation { field, value, min, max });
        }
    };
    check("x", pose.x, -EDGE_MARGIN, SCREEN_WIDTH + EDGE_MARGIN);
    check("y", pose.y, -EDGE_MARGIN, SCREEN_HEIGHT + EDGE_MARGIN);
    check("z", pose.z, 0.0, f64::INFINITY);
    check("pitch", pose.pitch, 0.0, 90.0);
    check("yaw", pose.yaw, -90.0, 90.0);
    violations
}

/// Axis-aligned box in pose space, used as sampling prior and projection
/// target. Defaults to the valid pose region with `z` capped at 8 cm so
/// that out-of-range hypotheses stay representable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseBounds {
    pub min: [f64; POSE_DIMS],
    pub max: [f64; POSE_DIMS],
}

impl Default for PoseBounds {
    fn default() -> Self {
        Self {
            min: [-EDGE_MARGIN, -EDGE_MARGIN, 0.0, 0.0, -90.0],
            max: [
                SCREEN_WIDTH + EDGE_MARGIN,
                SCREEN_HEIGHT + EDGE_MARGIN,
                8.0,
                90.0,
                90.0,
            ],
        }
    }
}

impl PoseBounds {
    pub fn contains(&self, pose: &FingerPose) -> bool {
        let a = pose.to_array();
        (0..POSE_DIMS).all(|d| a[d] >= self.min[d] && a[d] <= self.max[d])
    }

    pub fn clamp(&self, pose: &FingerPose) -> FingerPose {
        let mut a = pose.to_array();
        for d in 0..POSE_DIMS {
            a[d] = a[d].clamp(self.min[d], self.max[d]);
        }
        FingerPose::from_array(a)
    }

    /// Reflects a coordinate back into `[min, max]`, mirror-style.
    pub fn reflect(&self, dim: usize, value: f64) -> f64 {
        let (lo, hi) = (self.min[dim], self.max[dim]);
        let mut v = value;
        while v < lo || v > hi {
            if v < lo {
                v = 2.0 * lo - v;
            } else {
                v = 2.0 * hi - v;
            }
        }
        v
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> FingerPose {
        let mut a = [0.0; POSE_DIMS];
        for d in 0..POSE_DIMS {
            a[d] = rng.random_range(self.min[d]..=self.max[d]);
        }
        FingerPose::from_array(a)
    }

    /// Per-dimension centre of the box.
    pub fn center(&self) -> [f64; POSE_DIMS] {
        let mut c = [0.0; POSE_DIMS];
        for d in 0..POSE_DIMS {
            c[d] = 0.5 * (self.min[d] + self.max[d]);
        }
        c
    }

    /// Per-dimension half width of the box.
    pub fn half_range(&self) -> [f64; POSE_DIMS] {
        let mut h = [0.0; POSE_DIMS];
        for d in 0..POSE_DIMS {
            h[d] = 0.5 * (self.max[d] - self.min[d]);
        }
        h
    }
}

/// One sensor frame: 160 normalized pad readings in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorFrame {
    values: [f64; PAD_COUNT],
}

impl SensorFrame {
    pub fn zeros() -> Self {
        Self { values: [0.0; PAD_COUNT] }
    }

    pub fn from_values(values: [f64; PAD_COUNT]) -> Self {
        Self { values }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != PAD_COUNT {
            return Err(Error::DimensionMismatch {
                expected: PAD_COUNT,
                got: values.len(),
            });
        }
        let mut buf = [0.0; PAD_COUNT];
        buf.copy_from_slice(values);
        Ok(Self { values: buf })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Reading of pad `(i, j)` with `i` along x and `j` along y.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * PADS_X + i]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the largest reading; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Root-mean-square difference to another frame over all pads.
    pub fn rms_distance(&self, other: &Self) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (sum / PAD_COUNT as f64).sqrt()
    }

    /// Intensity-weighted centroid in screen cm, `None` for an all-zero frame.
    pub fn centroid(&self, spec: &SensorSpec) -> Option<(f64, f64)> {
        let total: f64 = self.values.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut cx = 0.0;
        let mut cy = 0.0;
        for (index, v) in self.values.iter().enumerate() {
            let (px, py) = spec.pad_center(index).expect("index in range");
            cx += v * px;
            cy += v * py;
        }
        Some((cx / total, cy / total))
    }
}

/// Static description of the sensor: geometry, sampling, noise map and
/// dead pads. Pad centres form a uniform grid inset by half a pad pitch
/// from each edge.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorSpec {
    pub width: f64,
    pub height: f64,
    pub pads_x: usize,
    pub pads_y: usize,
    pub sample_rate: f64,
    pub max_range: f64,
    pub dead_pixels: Vec<usize>,
    pub noise_mu: f64,
    pub noise_sigma: Vec<f64>,
}

/// Default per-pad noise level at interior pads.
pub const NOISE_SIGMA_INTERIOR: f64 = 0.03;
/// Default per-pad noise level at edge pads (the edges are quieter).
pub const NOISE_SIGMA_EDGE: f64 = 0.015;
/// Default positive mean offset of the pad noise.
pub const NOISE_MU: f64 = 0.01;

impl Default for SensorSpec {
    fn default() -> Self {
        // Nonresponsive pads at the bottom-right and top-right corners.
        let dead_pixels = vec![PADS_X - 1, (PADS_Y - 1) * PADS_X + PADS_X - 1];
        Self {
            width: SCREEN_WIDTH,
            height: SCREEN_HEIGHT,
            pads_x: PADS_X,
            pads_y: PADS_Y,
            sample_rate: 60.0,
            max_range: 5.0,
            dead_pixels,
            noise_mu: NOISE_MU,
            noise_sigma: default_sigma_map(NOISE_SIGMA_INTERIOR, NOISE_SIGMA_EDGE),
        }
    }
}

/// Builds the default noise map: quiet edges, noisier interior.
pub fn default_sigma_map(interior: f64, edge: f64) -> Vec<f64> {
    let mut map = vec![interior; PAD_COUNT];
    for j in 0..PADS_Y {
        for i in 0..PADS_X {
            if i == 0 || i == PADS_X - 1 || j == 0 || j == PADS_Y - 1 {
                map[j * PADS_X + i] = edge;
            }
        }
    }
    map
}

impl SensorSpec {
    /// Centre of pad `index` in screen cm: `((i+0.5)·w/nx, (j+0.5)·h/ny)`.
    pub fn pad_center(&self, index: usize) -> Result<(f64, f64)> {
        let count = self.pads_x * self.pads_y;
        if index >= count {
            return Err(Error::IndexOutOfRange { index, count });
        }
        let i = index % self.pads_x;
        let j = index / self.pads_x;
        Ok((
            (i as f64 + 0.5) * self.width / self.pads_x as f64,
            (j as f64 + 0.5) * self.height / self.pads_y as f64,
        ))
    }

    /// Pad pitch (centre spacing) along x and y, in cm.
    pub fn pad_pitch(&self) -> (f64, f64) {
        (
            self.width / self.pads_x as f64,
            self.height / self.pads_y as f64,
        )
    }

    pub fn is_dead(&self, index: usize) -> bool {
        self.dead_pixels.contains(&index)
    }
}

/// Scales a whole collection of frames by its global maximum so the largest
/// value becomes 1. An all-zero collection is returned unchanged.
///
/// Values are expected to be non-negative; any NaN or infinity is an error.
pub fn normalize_frames(frames: &[SensorFrame]) -> Result<Vec<SensorFrame>> {
    let mut global_max = 0.0f64;
    for (fi, frame) in frames.iter().enumerate() {
        for (pi, v) in frame.as_slice().iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput { frame: fi, pad: pi });
            }
            global_max = global_max.max(*v);
        }
    }
    if global_max <= 0.0 {
        return Ok(frames.to_vec());
    }
    Ok(frames
        .iter()
        .map(|f| {
            let mut out = f.clone();
            for v in out.as_mut_slice() {
                *v /= global_max;
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interior_pose_is_valid() {
        let pose = FingerPose::new(3.0, 5.0, 1.0, 30.0, 0.0);
        assert!(validate_pose(&pose).is_empty());
    }

    #[test]
    fn negative_z_reports_violation() {
        let pose = FingerPose::new(3.0, 5.0, -0.1, 30.0, 0.0);
        let violations = validate_pose(&pose);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, "z");
    }

    #[test]
    fn pitch_above_limit_reports_violation() {
        let pose = FingerPose::new(3.0, 5.0, 1.0, 95.0, 0.0);
        let violations = validate_pose(&pose);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, "pitch");
    }

    #[test]
    fn multiple_violations_are_all_reported() {
        let pose = FingerPose::new(-5.0, 20.0, -1.0, 95.0, 100.0);
        assert_eq!(validate_pose(&pose).len(), 5);
    }

    #[test]
    fn pad_center_formula() {
        let spec = SensorSpec::default();
        // (i + 0.5) * width / 10, (j + 0.5) * height / 16
        let (x, y) = spec.pad_center(0).unwrap();
        assert_relative_eq!(x, 0.305, max_relative = 1e-12);
        assert_relative_eq!(y, 0.303125, max_relative = 1e-12);
        let (x, y) = spec.pad_center(15 * PADS_X + 9).unwrap();
        assert_relative_eq!(x, 5.795, max_relative = 1e-12);
        assert_relative_eq!(y, 9.396875, max_relative = 1e-12);
    }

    #[test]
    fn pad_center_out_of_range() {
        let spec = SensorSpec::default();
        assert!(matches!(
            spec.pad_center(PAD_COUNT),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn pad_centers_distinct_and_inside_screen() {
        let spec = SensorSpec::default();
        let centers: Vec<_> = (0..PAD_COUNT).map(|i| spec.pad_center(i).unwrap()).collect();
        for (a, &ca) in centers.iter().enumerate() {
            assert!(ca.0 > 0.0 && ca.0 < spec.width);
            assert!(ca.1 > 0.0 && ca.1 < spec.height);
            for &cb in centers.iter().skip(a + 1) {
                assert_ne!(ca, cb);
            }
        }
    }

    #[test]
    fn normalize_scales_by_global_max() {
        let mut frame = SensorFrame::zeros();
        frame.as_mut_slice()[0] = 0.5;
        frame.as_mut_slice()[1] = 1.0;
        frame.as_mut_slice()[2] = 2.0;
        let out = normalize_frames(&[frame]).unwrap();
        assert_relative_eq!(out[0].as_slice()[0], 0.25);
        assert_relative_eq!(out[0].as_slice()[1], 0.5);
        assert_relative_eq!(out[0].as_slice()[2], 1.0);
        assert_eq!(out[0].as_slice()[3], 0.0);
    }

    #[test]
    fn normalize_two_frames_shares_the_global_max() {
        let mut a = SensorFrame::zeros();
        a.as_mut_slice()[7] = 0.8;
        let mut b = SensorFrame::zeros();
        b.as_mut_slice()[3] = 0.4;
        // Direct arithmetic oracle: both divided by 0.8.
        let out = normalize_frames(&[a, b]).unwrap();
        assert_relative_eq!(out[0].max_value(), 1.0);
        assert_relative_eq!(out[1].max_value(), 0.5);
    }

    #[test]
    fn normalize_leaves_all_zero_unchanged() {
        let frames = vec![SensorFrame::zeros(), SensorFrame::zeros()];
        let out = normalize_frames(&frames).unwrap();
        assert_eq!(out, frames);
    }

    #[test]
    fn normalize_rejects_non_finite() {
        let mut frame = SensorFrame::zeros();
        frame.as_mut_slice()[5] = f64::NAN;
        assert!(matches!(
            normalize_frames(&[frame]),
            Err(Error::NonFiniteInput { frame: 0, pad: 5 })
        ));
    }

    #[test]
    fn normalize_is_idempotent() {
        let mut frame = SensorFrame::zeros();
        for (i, v) in frame.as_mut_slice().iter_mut().enumerate() {
            *v = (i % 7) as f64 * 0.1;
        }
        let once = normalize_frames(&[frame]).unwrap();
        let twice = normalize_frames(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn normalize_preserves_argmax() {
        let mut a = SensorFrame::zeros();
        a.as_mut_slice()[42] = 3.0;
        a.as_mut_slice()[10] = 1.0;
        let argmax = a.argmax();
        let out = normalize_frames(&[a]).unwrap();
        assert_eq!(out[0].argmax(), argmax);
    }

    #[test]
    fn reflect_stays_inside_bounds() {
        let bounds = PoseBounds::default();
        let v = bounds.reflect(2, -0.3);
        assert!((0.0..=8.0).contains(&v));
        assert_relative_eq!(v, 0.3);
        let v = bounds.reflect(2, 8.5);
        assert_relative_eq!(v, 7.5);
    }

    #[test]
    fn dead_pixels_default_to_right_corners() {
        let spec = SensorSpec::default();
        assert!(spec.is_dead(9));
        assert!(spec.is_dead(159));
        assert!(!spec.is_dead(0));
    }
}
