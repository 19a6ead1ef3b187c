//! Sequential Monte Carlo tracker over finger pose with two-stage
//! weighting: a forward-model likelihood on the predicted frame followed
//! by an inverse-model likelihood on the pose point estimate. Either stage
//! can be disabled, which is what the ablation harness does.
//!
//! Weights are renormalized after every stage. If a stage underflows to an
//! all-zero weight vector the filter falls back to uniform weights and
//! flags the step instead of failing; a tracker has to survive outlier
//! frames. Resampling is systematic (single uniform offset over the
//! cumulative ladder) and triggers when the effective sample size drops
//! below a configured fraction of the particle count.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{ForwardModel, InverseModel};
use crate::par::map_indexed;
use crate::types::{FingerPose, PoseBounds, SensorFrame, POSE_DIMS};

/// One weighted pose hypothesis with its per-frame velocity.
#[derive(Clone, Copy, Debug)]
pub struct Particle {
    pub pose: FingerPose,
    pub velocity: [f64; POSE_DIMS],
    pub weight: f64,
}

/// Tracker tuning constants. All invented defaults, surfaced in the config
/// file so runs are reproducible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PfConfig {
    /// Particle count N.
    pub particles: usize,
    /// Per-frame process noise for x and y, in cm.
    pub sigma_pos: f64,
    /// Per-frame process noise for z, in cm.
    pub sigma_z: f64,
    /// Per-frame process noise for pitch and yaw, in degrees.
    pub sigma_ang: f64,
    /// Forward likelihood scale in frame RMS units.
    pub sigma_f: f64,
    /// Inverse likelihood scales per pose dimension (cm, cm, cm, deg, deg).
    pub lambda: [f64; POSE_DIMS],
    /// Resample when ESS falls below this fraction of N.
    pub ess_fraction: f64,
    pub seed: u64,
}

impl Default for PfConfig {
    fn default() -> Self {
        Self {
            particles: 500,
            sigma_pos: 0.05,
            sigma_z: 0.05,
            sigma_ang: 1.5,
            sigma_f: 0.05,
            lambda: [0.3, 0.3, 0.2, 8.0, 8.0],
            ess_fraction: 0.5,
            seed: 0,
        }
    }
}

impl PfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 1 {
            return Err(Error::InvalidSpec("particle count must be >= 1".into()));
        }
        let scales = [self.sigma_f, self.ess_fraction];
        if scales.iter().any(|s| !(*s > 0.0)) || self.lambda.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidSpec("likelihood scales must be > 0".into()));
        }
        if self.sigma_pos < 0.0 || self.sigma_z < 0.0 || self.sigma_ang < 0.0 {
            return Err(Error::InvalidSpec("process noise must be >= 0".into()));
        }
        Ok(())
    }

    fn process_sigma(&self) -> [f64; POSE_DIMS] {
        [
            self.sigma_pos,
            self.sigma_pos,
            self.sigma_z,
            self.sigma_ang,
            self.sigma_ang,
        ]
    }

    /// Yaw is gated out of the inverse weighting below this pitch, where
    /// the inverse model cannot observe it.
    pub const YAW_GATE_PITCH: f64 = 5.0;
}

/// Weighted mean pose and per-dimension standard deviation.
#[derive(Clone, Copy, Debug)]
pub struct PoseEstimate {
    pub mean: FingerPose,
    pub std: [f64; POSE_DIMS],
}

/// Diagnostics for one tracker step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepReport {
    /// ESS after the weighting stages, before any resampling.
    pub ess_before: f64,
    /// ESS after conditional resampling.
    pub ess_after: f64,
    pub resampled: bool,
    /// Forward likelihoods underflowed; weights fell back to uniform.
    pub forward_degenerate: bool,
    /// Inverse likelihoods underflowed; weights fell back to uniform.
    pub inverse_degenerate: bool,
}

/// The models a tracker step consults. Leaving one side out disables that
/// weighting stage.
#[derive(Clone, Copy)]
pub struct PfModels<'a> {
    pub forward: Option<&'a dyn ForwardModel>,
    pub inverse: Option<&'a dyn InverseModel>,
}

impl<'a> PfModels<'a> {
    pub fn dual(forward: &'a dyn ForwardModel, inverse: &'a dyn InverseModel) -> Self {
        Self { forward: Some(forward), inverse: Some(inverse) }
    }

    pub fn forward_only(forward: &'a dyn ForwardModel) -> Self {
        Self { forward: Some(forward), inverse: None }
    }

    pub fn inverse_only(inverse: &'a dyn InverseModel) -> Self {
        Self { forward: None, inverse: Some(inverse) }
    }
}

/// Particle filter over finger pose.
pub struct ParticleFilter {
    cfg: PfConfig,
    bounds: PoseBounds,
    particles: Vec<Particle>,
    rng: StdRng,
}

impl ParticleFilter {
    /// N particles uniform over the prior box, zero velocity, weights 1/N.
    pub fn init(cfg: PfConfig, prior: PoseBounds) -> Result<Self> {
        cfg.validate()?;
        let mut rng = StdRng::seed_from_u64(cfg.seed);
        let weight = 1.0 / cfg.particles as f64;
        let particles = (0..cfg.particles)
            .map(|_| Particle {
                pose: prior.sample(&mut rng),
                velocity: [0.0; POSE_DIMS],
                weight,
            })
            .collect();
        Ok(Self { cfg, bounds: prior, particles, rng })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn config(&self) -> &PfConfig {
        &self.cfg
    }

    #[cfg(test)]
    pub(crate) fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.particles.len());
        for (p, w) in self.particles.iter_mut().zip(weights) {
            p.weight = *w;
        }
    }

    /// Effective sample size `1 / sum(w^2)`.
    pub fn ess(&self) -> f64 {
        let sq: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        if sq > 0.0 {
            1.0 / sq
        } else {
            0.0
        }
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Motion update: each pose moves by its velocity and is reflected at
    /// the prior bounds; the velocity is then refreshed from the process
    /// noise, making the pose a per-dimension random walk with scale sigma
    /// per frame. Weights are untouched.
    pub fn predict(&mut self) {
        let sigma = self.cfg.process_sigma();
        for particle in &mut self.particles {
            let mut pose = particle.pose.to_array();
            for d in 0..POSE_DIMS {
                pose[d] = self.bounds.reflect(d, pose[d] + particle.velocity[d]);
            }
            particle.pose = FingerPose::from_array(pose);
            for d in 0..POSE_DIMS {
                let g: f64 = self.rng.sample(StandardNormal);
                particle.velocity[d] = sigma[d] * g;
            }
        }
    }

    fn reweight_with(&mut self, log_likelihoods: &[f64]) -> bool {
        for (p, ll) in self.particles.iter_mut().zip(log_likelihoods) {
            p.weight *= ll.exp();
        }
        let sum = self.weight_sum();
        if !(sum > 0.0) || !sum.is_finite() {
            let uniform = 1.0 / self.particles.len() as f64;
            for p in &mut self.particles {
                p.weight = uniform;
            }
            return true;
        }
        for p in &mut self.particles {
            p.weight /= sum;
        }
        false
    }

    /// Forward-model weighting: `w *= exp(-rms^2 / (2 sigma_f^2))` with the
    /// RMS between the predicted and observed frame. Returns true when the
    /// stage underflowed and fell back to uniform weights.
    pub fn weight_forward(&mut self, observed: &SensorFrame, forward: &dyn ForwardModel) -> bool {
        let sigma_sq = 2.0 * self.cfg.sigma_f * self.cfg.sigma_f;
        let lls = map_indexed(&self.particles, |_, p| {
            let rms = forward.predict_frame(&p.pose).rms_distance(observed);
            -(rms * rms) / sigma_sq
        });
        self.reweight_with(&lls)
    }

    /// Inverse-model weighting against the regressor's point estimate,
    /// with the yaw term gated out when the estimated pitch is below
    /// [`PfConfig::YAW_GATE_PITCH`]. Returns true on underflow fallback.
    pub fn weight_inverse(&mut self, observed: &SensorFrame, inverse: &dyn InverseModel) -> bool {
        let estimate = inverse.predict_pose(observed).to_array();
        let skip_yaw = estimate[3] < Self::yaw_gate();
        let lambda = self.cfg.lambda;
        let lls: Vec<f64> = self
            .particles
            .iter()
            .map(|p| {
                let pose = p.pose.to_array();
                let mut q = 0.0;
                for d in 0..POSE_DIMS {
                    if d == 4 && skip_yaw {
                        continue;
                    }
                    let diff = pose[d] - estimate[d];
                    q += diff * diff / (2.0 * lambda[d] * lambda[d]);
                }
                -q
            })
            .collect();
        self.reweight_with(&lls)
    }

    fn yaw_gate() -> f64 {
        PfConfig::YAW_GATE_PITCH
    }

    /// Systematic (low-variance) resampling; output weights are uniform.
    /// The copy count of particle `i` is within one of `N * w_i`.
    pub fn resample_systematic(&mut self) {
        let n = self.particles.len();
        let offset: f64 = self.rng.random::<f64>();
        let mut resampled = Vec::with_capacity(n);
        let mut cumulative = self.particles[0].weight;
        let mut index = 0;
        for j in 0..n {
            let position = (offset + j as f64) / n as f64;
            while position >= cumulative && index + 1 < n {
                index += 1;
                cumulative += self.particles[index].weight;
            }
            resampled.push(self.particles[index]);
        }
        let uniform = 1.0 / n as f64;
        for p in &mut resampled {
            p.weight = uniform;
        }
        self.particles = resampled;
    }

    /// Weighted mean and per-dimension weighted standard deviation.
    pub fn estimate(&self) -> PoseEstimate {
        let mut mean = [0.0; POSE_DIMS];
        for p in &self.particles {
            let a = p.pose.to_array();
            for d in 0..POSE_DIMS {
                mean[d] += p.weight * a[d];
            }
        }
        let mut var = [0.0; POSE_DIMS];
        for p in &self.particles {
            let a = p.pose.to_array();
            for d in 0..POSE_DIMS {
                let diff = a[d] - mean[d];
                var[d] += p.weight * diff * diff;
            }
        }
        let mut std = [0.0; POSE_DIMS];
        for d in 0..POSE_DIMS {
            std[d] = var[d].max(0.0).sqrt();
        }
        PoseEstimate { mean: FingerPose::from_array(mean), std }
    }

    /// One predictor-corrector step: predict, weight against the forward
    /// model, weight against the inverse model, conditionally resample,
    /// then report the weighted estimate.
    pub fn step(&mut self, observed: &SensorFrame, models: &PfModels<'_>) -> (PoseEstimate, StepReport) {
        self.predict();
        let mut report = StepReport::default();
        if let Some(forward) = models.forward {
            report.forward_degenerate = self.weight_forward(observed, forward);
        }
        if let Some(inverse) = models.inverse {
            report.inverse_degenerate = self.weight_inverse(observed, inverse);
        }
        report.ess_before = self.ess();
        if report.ess_before < self.cfg.ess_fraction * self.particles.len() as f64 {
            self.resample_systematic();
            report.resampled = true;
        }
        report.ess_after = self.ess();
        (self.estimate(), report)
    }
}

/// Runs a filter over a frame stream, collecting per-step estimates.
pub fn track(
    filter: &mut ParticleFilter,
    frames: &[SensorFrame],
    models: &PfModels<'_>,
) -> Vec<(PoseEstimate, StepReport)> {
    frames.iter().map(|f| filter.step(f, models)).collect()
}

/// Header of the step-report CSV stream.
pub const TRACK_CSV_HEADER: &str = "t,x,y,z,pitch,yaw,sx,sy,sz,spitch,syaw,ess,resampled,flags";

/// Formats tracker output as CSV rows matching [`TRACK_CSV_HEADER`].
/// The `flags` column marks underflow fallbacks: F = forward stage,
/// I = inverse stage, `-` = clean step.
pub fn track_to_csv(steps: &[(PoseEstimate, StepReport)]) -> String {
    let mut out = String::from(TRACK_CSV_HEADER);
    out.push('\n');
    for (t, (estimate, report)) in steps.iter().enumerate() {
        let m = estimate.mean;
        let s = estimate.std;
        let mut flags = String::new();
        if report.forward_degenerate {
            flags.push('F');
        }
        if report.inverse_degenerate {
            flags.push('I');
        }
        if flags.is_empty() {
            flags.push('-');
        }
        out.push_str(&format!(
            "{t},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3},{},{flags}\n",
            m.x,
            m.y,
            m.z,
            m.pitch,
            m.yaw,
            s[0],
            s[1],
            s[2],
            s[3],
            s[4],
            report.ess_before,
            u8::from(report.resampled),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{FingerGeometry, Surrogate};
    use crate::types::SensorSpec;

    fn surrogate() -> Surrogate {
        Surrogate::new(SensorSpec::default(), FingerGeometry::default()).unwrap()
    }

    fn filter_with(n: usize, seed: u64) -> ParticleFilter {
        let cfg = PfConfig { particles: n, seed, ..PfConfig::default() };
        ParticleFilter::init(cfg, PoseBounds::default()).unwrap()
    }

    #[test]
    fn init_gives_uniform_weights() {
        let f = filter_with(4, 0);
        for p in f.particles() {
            assert_eq!(p.weight, 0.25);
        }
        assert!((f.weight_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_is_deterministic() {
        let a = filter_with(50, 9);
        let b = filter_with(50, 9);
        for (pa, pb) in a.particles().iter().zip(b.particles()) {
            assert_eq!(pa.pose, pb.pose);
        }
    }

    #[test]
    fn initial_z_mean_matches_prior_midpoint() {
        // Monte Carlo oracle: uniform draws over [0, 8] average to 4.
        let f = filter_with(10_000, 123);
        let mean: f64 =
            f.particles().iter().map(|p| p.pose.z).sum::<f64>() / f.particles().len() as f64;
        assert!((mean - 4.0).abs() < 0.04, "mean z {mean}");
    }

    #[test]
    fn zero_noise_zero_velocity_predict_is_identity() {
        let cfg = PfConfig {
            particles: 20,
            sigma_pos: 0.0,
            sigma_z: 0.0,
            sigma_ang: 0.0,
            ..PfConfig::default()
        };
        let mut f = ParticleFilter::init(cfg, PoseBounds::default()).unwrap();
        let before: Vec<FingerPose> = f.particles().iter().map(|p| p.pose).collect();
        f.predict();
        f.predict();
        let after: Vec<FingerPose> = f.particles().iter().map(|p| p.pose).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn outward_velocity_reflects_inward() {
        let cfg = PfConfig {
            particles: 1,
            sigma_pos: 0.0,
            sigma_z: 0.0,
            sigma_ang: 0.0,
            ..PfConfig::default()
        };
        let mut f = ParticleFilter::init(cfg, PoseBounds::default()).unwrap();
        f.particles[0].pose = FingerPose::new(3.0, 5.0, 0.05, 30.0, 0.0);
        f.particles[0].velocity = [0.0, 0.0, -0.2, 0.0, 0.0];
        f.predict();
        let z = f.particles()[0].pose.z;
        assert!((z - 0.15).abs() < 1e-12, "z={z}");
    }

    #[test]
    fn noise_only_variance_matches_random_walk_oracle() {
        // Random-walk oracle: after k noise-only steps the x variance is
        // (k - 1) * sigma^2 (the first step moves by the zero init
        // velocity), within 10% of k * sigma^2 for k = 100.
        let sigma = 0.05;
        let cfg = PfConfig {
            particles: 10_000,
            sigma_pos: sigma,
            sigma_z: 0.0,
            sigma_ang: 0.0,
            seed: 77,
            ..PfConfig::default()
        };
        // Wide x bounds so reflections cannot clip the walk.
        let mut prior = PoseBounds::default();
        prior.min[0] = -1e6;
        prior.max[0] = 1e6;
        let mut f = ParticleFilter::init(cfg, prior).unwrap();
        let start: Vec<f64> = f.particles().iter().map(|p| p.pose.x).collect();
        for _ in 0..100 {
            f.predict();
        }
        let displacements: Vec<f64> = f
            .particles()
            .iter()
            .zip(&start)
            .map(|(p, s)| p.pose.x - s)
            .collect();
        let mean: f64 = displacements.iter().sum::<f64>() / displacements.len() as f64;
        let var: f64 = displacements.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / displacements.len() as f64;
        let expected = 100.0 * sigma * sigma;
        assert!(
            (var - expected).abs() < 0.1 * expected,
            "var {var} vs {expected}"
        );
    }

    #[test]
    fn equal_likelihoods_leave_weights_uniform() {
        let sim = surrogate();
        let pose = FingerPose::new(3.0, 5.0, 1.0, 20.0, 0.0);
        let observed = sim.response(&pose);
        let mut f = filter_with(8, 1);
        for p in &mut f.particles {
            p.pose = pose;
        }
        let degenerate = f.weight_forward(&observed, &sim);
        assert!(!degenerate);
        for p in f.particles() {
            assert!((p.weight - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn near_true_particle_dominates() {
        // Two-particle closed form: w_true = 1 / (1 + exp(-r^2 / (2 s^2)))
        // where r is the frame RMS distance of the far particle.
        let sim = surrogate();
        let true_pose = FingerPose::new(3.0, 2.0, 0.0, 90.0, 0.0);
        let far_pose = FingerPose::new(3.0, 8.0, 6.0, 0.0, 0.0);
        let observed = sim.response(&true_pose);
        let r = sim.response(&far_pose).rms_distance(&observed);
        let sigma_f = PfConfig::default().sigma_f;
        let expected = 1.0 / (1.0 + (-r * r / (2.0 * sigma_f * sigma_f)).exp());
        let mut f = filter_with(2, 3);
        f.particles[0].pose = true_pose;
        f.particles[1].pose = far_pose;
        f.weight_forward(&observed, &sim);
        let w = f.particles()[0].weight;
        assert!((w - expected).abs() < 1e-9, "w {w} vs closed form {expected}");
        assert!(w > 0.99, "near-true particle weight {w}");
    }

    #[test]
    fn flat_forward_likelihood_changes_nothing() {
        let sim = surrogate();
        let observed = sim.response(&FingerPose::new(3.0, 5.0, 1.0, 20.0, 0.0));
        let cfg = PfConfig { particles: 10, sigma_f: 1e12, seed: 4, ..PfConfig::default() };
        let mut f = ParticleFilter::init(cfg, PoseBounds::default()).unwrap();
        let before: Vec<f64> = f.particles().iter().map(|p| p.weight).collect();
        f.weight_forward(&observed, &sim);
        for (p, b) in f.particles().iter().zip(&before) {
            assert!((p.weight - b).abs() < 1e-12);
        }
    }

    struct FixedInverse(FingerPose);

    impl InverseModel for FixedInverse {
        fn predict_pose(&self, _frame: &SensorFrame) -> FingerPose {
            self.0
        }
    }

    #[test]
    fn particles_at_the_estimate_stay_uniform() {
        let estimate = FingerPose::new(3.0, 5.0, 1.0, 30.0, 10.0);
        let mut f = filter_with(5, 8);
        for p in &mut f.particles {
            p.pose = estimate;
        }
        let degenerate = f.weight_inverse(&SensorFrame::zeros(), &FixedInverse(estimate));
        assert!(!degenerate);
        for p in f.particles() {
            assert!((p.weight - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn yaw_is_gated_at_low_pitch() {
        // With the estimate at pitch 0, two particles differing only in
        // yaw keep equal weights.
        let estimate = FingerPose::new(3.0, 5.0, 1.0, 0.0, 0.0);
        let mut f = filter_with(2, 8);
        f.particles[0].pose = FingerPose::new(3.0, 5.0, 1.0, 0.0, -60.0);
        f.particles[1].pose = FingerPose::new(3.0, 5.0, 1.0, 0.0, 60.0);
        f.weight_inverse(&SensorFrame::zeros(), &FixedInverse(estimate));
        let w = f.particles()[0].weight;
        assert!((w - 0.5).abs() < 1e-12, "yaw leaked into the weighting: {w}");
        // Above the gate the same yaw split must matter.
        let estimate = FingerPose::new(3.0, 5.0, 1.0, 45.0, 0.0);
        let mut f = filter_with(2, 8);
        f.particles[0].pose = FingerPose::new(3.0, 5.0, 1.0, 45.0, -60.0);
        f.particles[1].pose = FingerPose::new(3.0, 5.0, 1.0, 45.0, 0.0);
        f.weight_inverse(&SensorFrame::zeros(), &FixedInverse(estimate));
        assert!(f.particles()[1].weight > 0.99);
    }

    #[test]
    fn huge_lambda_changes_nothing() {
        let mut f = filter_with(10, 2);
        let mut cfg = *f.config();
        cfg.lambda = [1e12; POSE_DIMS];
        f.cfg = cfg;
        let before: Vec<f64> = f.particles().iter().map(|p| p.weight).collect();
        f.weight_inverse(
            &SensorFrame::zeros(),
            &FixedInverse(FingerPose::new(3.0, 5.0, 1.0, 45.0, 0.0)),
        );
        for (p, b) in f.particles().iter().zip(&before) {
            assert!((p.weight - b).abs() < 1e-12);
        }
    }

    #[test]
    fn underflow_falls_back_to_uniform() {
        let mut f = filter_with(3, 5);
        for p in &mut f.particles {
            p.pose = FingerPose::new(-1.0, -1.0, 8.0, 90.0, -90.0);
        }
        // Estimate maximally far away: every exponent underflows to zero.
        let degenerate =
            f.weight_inverse(&SensorFrame::zeros(), &FixedInverse(FingerPose::new(7.1, 10.7, 0.0, 0.0, 90.0)));
        let cfg = *f.config();
        let q: f64 = {
            let a = FingerPose::new(-1.0, -1.0, 8.0, 90.0, -90.0).to_array();
            let b = FingerPose::new(7.1, 10.7, 0.0, 0.0, 90.0).to_array();
            (0..POSE_DIMS)
                .map(|d| (a[d] - b[d]).powi(2) / (2.0 * cfg.lambda[d] * cfg.lambda[d]))
                .sum()
        };
        assert!(q > 745.0, "test setup must underflow exp(-{q})");
        assert!(degenerate);
        for p in f.particles() {
            assert!((p.weight - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn systematic_resampling_matches_closed_form() {
        // Weights (0.75, 0.25) on N = 4 give exactly 3 copies of particle 1
        // for any offset draw.
        for seed in 0..10 {
            let mut f = filter_with(4, seed);
            f.particles[0].pose = FingerPose::new(1.0, 2.0, 0.5, 0.0, 0.0);
            f.particles[1].pose = FingerPose::new(5.0, 9.0, 2.0, 60.0, 30.0);
            f.particles[2].pose = f.particles[0].pose;
            f.particles[3].pose = f.particles[1].pose;
            f.set_weights(&[0.75, 0.25, 0.0, 0.0]);
            f.resample_systematic();
            let copies_first = f
                .particles()
                .iter()
                .filter(|p| p.pose == FingerPose::new(1.0, 2.0, 0.5, 0.0, 0.0))
                .count();
            assert_eq!(copies_first, 3);
            for p in f.particles() {
                assert_eq!(p.weight, 0.25);
            }
        }
    }

    #[test]
    fn single_nonzero_weight_resamples_to_clones() {
        let mut f = filter_with(6, 3);
        let chosen = f.particles()[2].pose;
        f.set_weights(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        f.resample_systematic();
        for p in f.particles() {
            assert_eq!(p.pose, chosen);
        }
    }

    #[test]
    fn uniform_weights_keep_full_ess_after_resampling() {
        let mut f = filter_with(64, 12);
        assert!((f.ess() - 64.0).abs() < 1e-9);
        f.resample_systematic();
        assert!((f.ess() - 64.0).abs() < 1e-9);
    }

    #[test]
    fn single_particle_estimate_is_that_particle() {
        let sim = surrogate();
        let cfg = PfConfig { particles: 1, seed: 5, ..PfConfig::default() };
        let mut f = ParticleFilter::init(cfg, PoseBounds::default()).unwrap();
        let observed = sim.response(&FingerPose::new(3.0, 5.0, 1.0, 20.0, 0.0));
        let models = PfModels::forward_only(&sim);
        let (estimate, _) = f.step(&observed, &models);
        assert_eq!(estimate.mean, f.particles()[0].pose);
        assert_eq!(estimate.std, [0.0; POSE_DIMS]);
    }

    #[test]
    fn weights_stay_normalized_through_steps() {
        let sim = surrogate();
        let truth = FingerPose::new(3.0, 5.0, 1.0, 20.0, 0.0);
        let observed = sim.response(&truth);
        let cfg = PfConfig { particles: 100, seed: 6, ..PfConfig::default() };
        let mut f = ParticleFilter::init(cfg, PoseBounds::default()).unwrap();
        let models = PfModels::forward_only(&sim);
        for _ in 0..20 {
            f.step(&observed, &models);
            assert!((f.weight_sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tracking_is_deterministic() {
        let sim = surrogate();
        let truth = FingerPose::new(3.0, 5.0, 1.0, 20.0, 0.0);
        let frames: Vec<SensorFrame> = (0..10).map(|_| sim.response(&truth)).collect();
        let cfg = PfConfig { particles: 80, seed: 31, ..PfConfig::default() };
        let models = PfModels::forward_only(&sim);
        let mut a = ParticleFilter::init(cfg, PoseBounds::default()).unwrap();
        let mut b = ParticleFilter::init(cfg, PoseBounds::default()).unwrap();
        let csv_a = track_to_csv(&track(&mut a, &frames, &models));
        let csv_b = track_to_csv(&track(&mut b, &frames, &models));
        assert_eq!(csv_a, csv_b);
    }
}
