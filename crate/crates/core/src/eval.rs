//! Evaluation harness: RMSE-by-height tables, benchmark trajectories,
//! tracker-versus-regressor comparisons, emulator throughput measurement
//! and a closed-form ridge baseline.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dataset::{Sample, RANDOM_BOX_MAX, RANDOM_BOX_MIN};
use crate::error::{Error, Result};
use crate::filter::{track, ParticleFilter, PfConfig, PfModels};
use crate::model::{ForwardModel, InverseModel};
use crate::par::map_indexed;
use crate::sim::{NoiseModel, Surrogate};
use crate::types::{FingerPose, PoseBounds, SensorFrame, PAD_COUNT, POSE_DIMS};

/// Height bands of the error table, by true z in cm: `[lo, hi)`.
pub const HEIGHT_BANDS: [(&str, f64, f64); 4] = [
    ("0-1", 0.0, 1.0),
    ("1-3", 1.0, 3.0),
    ("3-5", 3.0, 5.0),
    ("5-10", 5.0, 10.0),
];

/// One row of the RMSE-by-height table. `xy` pools the x and y errors.
#[derive(Clone, Debug, PartialEq)]
pub struct RmseRow {
    pub band: String,
    pub count: usize,
    pub xy: f64,
    pub z: f64,
    pub pitch: f64,
    pub yaw: f64,
}

fn rmse_over(pairs: &[(&FingerPose, &FingerPose)]) -> RmseRow {
    let n = pairs.len() as f64;
    let mut sq = [0.0f64; POSE_DIMS];
    for (pred, truth) in pairs {
        let p = pred.to_array();
        let t = truth.to_array();
        for d in 0..POSE_DIMS {
            sq[d] += (p[d] - t[d]) * (p[d] - t[d]);
        }
    }
    RmseRow {
        band: String::new(),
        count: pairs.len(),
        xy: ((sq[0] + sq[1]) / (2.0 * n)).sqrt(),
        z: (sq[2] / n).sqrt(),
        pitch: (sq[3] / n).sqrt(),
        yaw: (sq[4] / n).sqrt(),
    }
}

/// Per-band RMSE table with band membership decided by the true z. Empty
/// bands are omitted; the final row aggregates everything.
pub fn rmse_by_height(predictions: &[FingerPose], truths: &[FingerPose]) -> Result<Vec<RmseRow>> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    let mut rows = Vec::new();
    if predictions.is_empty() {
        return Ok(rows);
    }
    for (name, lo, hi) in HEIGHT_BANDS {
        let pairs: Vec<(&FingerPose, &FingerPose)> = predictions
            .iter()
            .zip(truths)
            .filter(|(_, t)| t.z >= lo && t.z < hi)
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let mut row = rmse_over(&pairs);
        row.band = name.to_string();
        rows.push(row);
    }
    let all: Vec<(&FingerPose, &FingerPose)> = predictions.iter().zip(truths).collect();
    let mut row = rmse_over(&all);
    row.band = "all".to_string();
    rows.push(row);
    Ok(rows)
}

/// Renders the table in a fixed CSV schema.
pub fn rmse_table_to_csv(rows: &[RmseRow]) -> String {
    let mut out = String::from("band,count,xy_rmse,z_rmse,pitch_rmse,yaw_rmse\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6}\n",
            r.band, r.count, r.xy, r.z, r.pitch, r.yaw
        ));
    }
    out
}

/// The three scripted motions used as tracking benchmarks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// z descends 3 cm to touch and returns, minimum-jerk profile.
    ButtonPush,
    /// Pitch sweeps 0 to 75 degrees and back at fixed position.
    Pitching,
    /// Yaw sweeps -45 to +45 degrees and back at fixed pitch 45.
    Yawing,
}

impl TrajectoryKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::ButtonPush => "button-push",
            TrajectoryKind::Pitching => "pitching",
            TrajectoryKind::Yawing => "yawing",
        }
    }
}

/// A scripted pose stream sampled at 60 Hz with clean and noisy frames.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub poses: Vec<FingerPose>,
    pub clean: Vec<SensorFrame>,
    pub observed: Vec<SensorFrame>,
}

fn minimum_jerk(s: f64) -> f64 {
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// Out-and-back phase: 0 at both endpoints, exactly 1 at the midpoint.
fn mirrored_phase(tau: f64) -> f64 {
    if tau <= 0.5 {
        minimum_jerk(2.0 * tau)
    } else {
        minimum_jerk(2.0 - 2.0 * tau)
    }
}

/// Generates a benchmark trajectory of `duration` seconds at 60 Hz.
/// Observations come from the surrogate with additive noise; per-frame
/// noise streams derive from the seed, so the stream is reproducible.
pub fn benchmark_trajectory(
    kind: TrajectoryKind,
    duration: f64,
    surrogate: &Surrogate,
    noise: &NoiseModel,
    seed: u64,
) -> Trajectory {
    let n = ((duration * 60.0).round() as usize).max(2);
    let (cx, cy) = (3.05, 4.85);
    let poses: Vec<FingerPose> = (0..n)
        .map(|i| {
            let tau = i as f64 / (n - 1) as f64;
            let phase = mirrored_phase(tau);
            match kind {
                TrajectoryKind::ButtonPush => {
                    FingerPose::new(cx, cy, 3.0 * (1.0 - phase), 20.0, 0.0)
                }
                TrajectoryKind::Pitching => FingerPose::new(cx, cy, 1.5, 75.0 * phase, 0.0),
                TrajectoryKind::Yawing => {
                    FingerPose::new(cx, cy, 1.0, 45.0, -45.0 + 90.0 * phase)
                }
            }
        })
        .collect();
    let clean = surrogate.simulate_batch(&poses);
    let observed = map_indexed(&clean, |i, frame| {
        noise.apply_seeded(frame, seed.wrapping_add(i as u64))
    });
    Trajectory { kind, poses, clean, observed }
}

/// Per-dimension RMS of frame-to-frame estimate deltas; the smoothness
/// metric quoted alongside the RMSE comparison.
pub fn jitter(estimates: &[FingerPose]) -> [f64; POSE_DIMS] {
    let mut out = [0.0; POSE_DIMS];
    if estimates.len() < 2 {
        return out;
    }
    let n = (estimates.len() - 1) as f64;
    for pair in estimates.windows(2) {
        let a = pair[0].to_array();
        let b = pair[1].to_array();
        for d in 0..POSE_DIMS {
            out[d] += (b[d] - a[d]) * (b[d] - a[d]);
        }
    }
    for v in &mut out {
        *v = (*v / n).sqrt();
    }
    out
}

fn rmse_per_dim(estimates: &[FingerPose], truths: &[FingerPose]) -> [f64; POSE_DIMS] {
    let mut sq = [0.0; POSE_DIMS];
    for (e, t) in estimates.iter().zip(truths) {
        let a = e.to_array();
        let b = t.to_array();
        for d in 0..POSE_DIMS {
            sq[d] += (a[d] - b[d]) * (a[d] - b[d]);
        }
    }
    let n = estimates.len() as f64;
    let mut out = [0.0; POSE_DIMS];
    for d in 0..POSE_DIMS {
        out[d] = (sq[d] / n).sqrt();
    }
    out
}

/// Accuracy and smoothness of one estimator over a trajectory.
#[derive(Clone, Debug)]
pub struct EstimatorStats {
    pub name: &'static str,
    pub rmse: [f64; POSE_DIMS],
    pub jitter: [f64; POSE_DIMS],
}

/// Side-by-side report: per-frame direct inverse versus the particle
/// filter with dual, forward-only and inverse-only weighting.
#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub kind: TrajectoryKind,
    pub rows: Vec<EstimatorStats>,
    /// Estimate traces per estimator, same order as `rows`.
    pub traces: Vec<Vec<FingerPose>>,
}

impl ComparisonReport {
    pub fn row(&self, name: &str) -> Option<&EstimatorStats> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "estimator,x_rmse,y_rmse,z_rmse,pitch_rmse,yaw_rmse,x_jitter,y_jitter,z_jitter,pitch_jitter,yaw_jitter\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.name,
                r.rmse[0],
                r.rmse[1],
                r.rmse[2],
                r.rmse[3],
                r.rmse[4],
                r.jitter[0],
                r.jitter[1],
                r.jitter[2],
                r.jitter[3],
                r.jitter[4],
            ));
        }
        out
    }
}

/// Names of the comparison rows.
pub const ESTIMATOR_DIRECT: &str = "direct-inverse";
pub const ESTIMATOR_PF_DUAL: &str = "pf-dual";
pub const ESTIMATOR_PF_FORWARD: &str = "pf-forward-only";
pub const ESTIMATOR_PF_INVERSE: &str = "pf-inverse-only";

/// Runs all four estimators over a trajectory's observations.
pub fn compare_pf_vs_inverse(
    trajectory: &Trajectory,
    forward: &dyn ForwardModel,
    inverse: &dyn InverseModel,
    cfg: &PfConfig,
    bounds: &PoseBounds,
) -> Result<ComparisonReport> {
    let truths = &trajectory.poses;
    let mut rows = Vec::new();
    let mut traces = Vec::new();

    let direct: Vec<FingerPose> = trajectory
        .observed
        .iter()
        .map(|f| inverse.predict_pose(f))
        .collect();
    rows.push(EstimatorStats {
        name: ESTIMATOR_DIRECT,
        rmse: rmse_per_dim(&direct, truths),
        jitter: jitter(&direct),
    });
    traces.push(direct);

    let variants: [(&'static str, PfModels<'_>); 3] = [
        (ESTIMATOR_PF_DUAL, PfModels::dual(forward, inverse)),
        (ESTIMATOR_PF_FORWARD, PfModels::forward_only(forward)),
        (ESTIMATOR_PF_INVERSE, PfModels::inverse_only(inverse)),
    ];
    for (name, models) in variants {
        let mut filter = ParticleFilter::init(*cfg, *bounds)?;
        let steps = track(&mut filter, &trajectory.observed, &models);
        let estimates: Vec<FingerPose> = steps.iter().map(|(e, _)| e.mean).collect();
        rows.push(EstimatorStats {
            name,
            rmse: rmse_per_dim(&estimates, truths),
            jitter: jitter(&estimates),
        });
        traces.push(estimates);
    }
    Ok(ComparisonReport { kind: trajectory.kind, rows, traces })
}

/// Emulator accuracy and wall-clock throughput against the surrogate.
#[derive(Clone, Copy, Debug, Default)]
pub struct EmulatorBenchmark {
    /// RMSE of the net against the surrogate over fresh poses.
    pub rmse: Option<f64>,
    /// Net throughput divided by surrogate throughput.
    pub throughput_ratio: Option<f64>,
    pub net_per_sec: Option<f64>,
    pub surrogate_per_sec: Option<f64>,
}

impl EmulatorBenchmark {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        if let Some(v) = self.rmse {
            out.push_str(&format!("rmse,{v:.6}\n"));
        }
        if let Some(v) = self.net_per_sec {
            out.push_str(&format!("net_poses_per_sec,{v:.1}\n"));
        }
        if let Some(v) = self.surrogate_per_sec {
            out.push_str(&format!("surrogate_poses_per_sec,{v:.1}\n"));
        }
        if let Some(v) = self.throughput_ratio {
            out.push_str(&format!("throughput_ratio,{v:.1}\n"));
        }
        out
    }
}

/// Compares a forward net to the surrogate on `n` fresh poses drawn from
/// the corpus sampling box, and measures single-threaded throughput of
/// both. `n = 0` produces an empty report.
pub fn emulator_benchmark(
    net: &dyn ForwardModel,
    surrogate: &Surrogate,
    n: usize,
    seed: u64,
) -> EmulatorBenchmark {
    if n == 0 {
        return EmulatorBenchmark::default();
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let poses: Vec<FingerPose> = (0..n)
        .map(|_| {
            FingerPose::new(
                rng.random_range(RANDOM_BOX_MIN[0]..=RANDOM_BOX_MAX[0]),
                rng.random_range(RANDOM_BOX_MIN[1]..=RANDOM_BOX_MAX[1]),
                rng.random_range(RANDOM_BOX_MIN[2]..=RANDOM_BOX_MAX[2]),
                rng.random_range(0.0..=90.0),
                rng.random_range(-90.0..=90.0),
            )
        })
        .collect();

    let start = Instant::now();
    let net_frames: Vec<SensorFrame> = poses.iter().map(|p| net.predict_frame(p)).collect();
    let net_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let surrogate_frames: Vec<SensorFrame> = poses.iter().map(|p| surrogate.response(p)).collect();
    let surrogate_secs = start.elapsed().as_secs_f64();

    let mut sq = 0.0;
    for (a, b) in net_frames.iter().zip(&surrogate_frames) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            sq += (x - y) * (x - y);
        }
    }
    let rmse = (sq / (n * PAD_COUNT) as f64).sqrt();
    let net_rate = n as f64 / net_secs.max(1e-12);
    let surrogate_rate = n as f64 / surrogate_secs.max(1e-12);
    EmulatorBenchmark {
        rmse: Some(rmse),
        throughput_ratio: Some(net_rate / surrogate_rate),
        net_per_sec: Some(net_rate),
        surrogate_per_sec: Some(surrogate_rate),
    }
}

/// Closed-form ridge regression from frame to pose.
#[derive(Clone, Debug)]
pub struct RidgeModel {
    /// `(PAD_COUNT + 1) x POSE_DIMS` coefficients, bias last.
    coefficients: DMatrix<f64>,
    /// The regularization that actually produced the solution.
    pub lambda: f64,
    /// True when the requested lambda was singular and a larger one was
    /// substituted.
    pub fell_back: bool,
}

impl RidgeModel {
    pub fn predict(&self, frame: &SensorFrame) -> FingerPose {
        let mut out = [0.0; POSE_DIMS];
        for d in 0..POSE_DIMS {
            let col = self.coefficients.column(d);
            let mut acc = col[PAD_COUNT];
            for (p, v) in frame.as_slice().iter().enumerate() {
                acc += col[p] * v;
            }
            out[d] = acc;
        }
        FingerPose::from_array(out)
    }

    pub fn coefficient(&self, feature: usize, output: usize) -> f64 {
        self.coefficients[(feature, output)]
    }
}

/// Fits ridge regression `frame -> pose` with the normal equations and a
/// Cholesky solve. A singular system is retried with lambda scaled up by
/// 10 (reported via `fell_back`) before giving up.
pub fn fit_ridge(train: &[Sample], lambda: f64) -> Result<RidgeModel> {
    if train.is_empty() {
        return Err(Error::InvalidSpec("ridge fit needs a non-empty corpus".into()));
    }
    let dim = PAD_COUNT + 1;
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut moment = DMatrix::<f64>::zeros(dim, POSE_DIMS);
    let mut feature = vec![0.0f64; dim];
    for s in train {
        feature[..PAD_COUNT].copy_from_slice(s.frame.as_slice());
        feature[PAD_COUNT] = 1.0;
        let target = s.pose.to_array();
        for i in 0..dim {
            let fi = feature[i];
            if fi == 0.0 {
                continue;
            }
            for j in i..dim {
                gram[(i, j)] += fi * feature[j];
            }
            for d in 0..POSE_DIMS {
                moment[(i, d)] += fi * target[d];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let mut lambda_eff = lambda.max(0.0);
    let mut fell_back = false;
    for _ in 0..8 {
        let mut regularized = gram.clone();
        for i in 0..dim {
            regularized[(i, i)] += lambda_eff;
        }
        if let Some(chol) = regularized.cholesky() {
            let mut coefficients = DMatrix::<f64>::zeros(dim, POSE_DIMS);
            for d in 0..POSE_DIMS {
                let rhs = DVector::from_iterator(dim, (0..dim).map(|i| moment[(i, d)]));
                let sol = chol.solve(&rhs);
                coefficients.column_mut(d).copy_from(&sol);
            }
            return Ok(RidgeModel { coefficients, lambda: lambda_eff, fell_back });
        }
        fell_back = true;
        lambda_eff = if lambda_eff > 0.0 { lambda_eff * 10.0 } else { 1e-8 };
    }
    Err(Error::SingularSystem { lambda: lambda_eff })
}

/// Fits the ridge baseline on `train` and reports its RMSE-by-height table
/// on `test`.
pub fn linear_baseline(
    train: &[Sample],
    test: &[Sample],
    lambda: f64,
) -> Result<(RidgeModel, Vec<RmseRow>)> {
    let model = fit_ridge(train, lambda)?;
    let predictions: Vec<FingerPose> = test.iter().map(|s| model.predict(&s.frame)).collect();
    let truths: Vec<FingerPose> = test.iter().map(|s| s.pose).collect();
    let table = rmse_by_height(&predictions, &truths)?;
    Ok((model, table))
}
