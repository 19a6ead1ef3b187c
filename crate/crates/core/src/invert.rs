//! Gradient inversion of the differentiable forward emulator.
//!
//! Starting from random poses, projected gradient descent minimizes the
//! mean squared frame error between the emulator output and an observed
//! frame. Descent runs in the emulator's normalized input space, which
//! amounts to per-dimension step preconditioning; iterates stay clamped to
//! the unit box (the pose bounds for a standard emulator). Restarts are
//! independent and run in parallel; the returned ranking is deterministic.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::net::DenseNet;
use crate::par::map_indexed;
use crate::types::{FingerPose, SensorFrame, PAD_COUNT, POSE_DIMS};

/// Multi-restart descent settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvertOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Step size in normalized input units.
    pub step_size: f64,
    /// Convergence tolerance on the loss decrease per iteration.
    pub tol: f64,
    pub seed: u64,
}

impl Default for InvertOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 200,
            step_size: 0.1,
            tol: 1e-7,
            seed: 0,
        }
    }
}

/// One inversion result: the recovered pose, the frame RMS residual of the
/// emulator output against the observation, and where it came from.
#[derive(Clone, Debug)]
pub struct InverseSolution {
    pub pose: FingerPose,
    pub residual: f64,
    pub iterations: usize,
    pub restart: usize,
}

fn check_shape(net: &DenseNet) -> Result<()> {
    if net.input_dim() != POSE_DIMS {
        return Err(Error::DimensionMismatch {
            expected: POSE_DIMS,
            got: net.input_dim(),
        });
    }
    if net.output_dim() != PAD_COUNT {
        return Err(Error::DimensionMismatch {
            expected: PAD_COUNT,
            got: net.output_dim(),
        });
    }
    Ok(())
}

fn mse(prediction: &[f64], observed: &SensorFrame) -> f64 {
    prediction
        .iter()
        .zip(observed.as_slice())
        .map(|(p, o)| (p - o) * (p - o))
        .sum::<f64>()
        / PAD_COUNT as f64
}

fn pose_from_unit(net: &DenseNet, u: &[f64; POSE_DIMS]) -> [f64; POSE_DIMS] {
    let raw = net.input_norm().denormalize(u);
    [raw[0], raw[1], raw[2], raw[3], raw[4]]
}

fn run_restart(
    net: &DenseNet,
    observed: &SensorFrame,
    opts: &InvertOptions,
    restart: usize,
) -> InverseSolution {
    let mut rng = StdRng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
    let mut u = [0.0f64; POSE_DIMS];
    for v in &mut u {
        *v = rng.random_range(-1.0..=1.0);
    }
    let eval_loss = |u: &[f64; POSE_DIMS]| -> f64 {
        let raw = pose_from_unit(net, u);
        let out = net.forward(&raw).expect("shape checked");
        mse(&out, observed)
    };
    let mut loss = eval_loss(&u);
    let mut iterations = 0;
    for iter in 0..opts.max_iters {
        let raw = pose_from_unit(net, &u);
        let out = net.forward(&raw).expect("shape checked");
        let mut loss_grad = vec![0.0; PAD_COUNT];
        for (g, (p, o)) in loss_grad
            .iter_mut()
            .zip(out.iter().zip(observed.as_slice()))
        {
            *g = 2.0 * (p - o) / PAD_COUNT as f64;
        }
        let grads = net.backward(&raw, &loss_grad).expect("shape checked");
        // Gradient with respect to the normalized coordinates.
        let half = &net.input_norm().half_range;
        let mut grad_u = [0.0f64; POSE_DIMS];
        for d in 0..POSE_DIMS {
            grad_u[d] = grads.input[d] * half[d];
        }
        // Backtracking keeps the per-restart loss monotone non-increasing.
        let mut step = opts.step_size;
        let mut candidate = u;
        let mut candidate_loss = loss;
        loop {
            let mut trial = [0.0f64; POSE_DIMS];
            for d in 0..POSE_DIMS {
                trial[d] = (u[d] - step * grad_u[d]).clamp(-1.0, 1.0);
            }
            let trial_loss = eval_loss(&trial);
            if trial_loss <= loss {
                candidate = trial;
                candidate_loss = trial_loss;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                break;
            }
        }
        iterations = iter + 1;
        let improvement = loss - candidate_loss;
        u = candidate;
        loss = candidate_loss;
        if improvement < opts.tol {
            break;
        }
    }
    let raw = pose_from_unit(net, &u);
    InverseSolution {
        pose: FingerPose::from_array(raw),
        residual: loss.sqrt(),
        iterations,
        restart,
    }
}

/// Multi-restart gradient inversion; solutions sorted by residual
/// ascending, ties broken by restart index.
pub fn invert(
    net: &DenseNet,
    observed: &SensorFrame,
    opts: &InvertOptions,
) -> Result<Vec<InverseSolution>> {
    check_shape(net)?;
    if opts.restarts == 0 {
        return Err(Error::InvalidSpec("restarts must be >= 1".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidSpec("tol must be > 0".into()));
    }
    let indices: Vec<usize> = (0..opts.restarts).collect();
    let mut solutions = map_indexed(&indices, |_, &r| run_restart(net, observed, opts, r));
    solutions.sort_by(|a, b| {
        a.residual
            .partial_cmp(&b.residual)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.restart.cmp(&b.restart))
    });
    Ok(solutions)
}

/// Anomaly score: frame RMS between the forward prediction at `pose` and
/// the actual observation. High scores flag out-of-distribution frames.
pub fn forward_consistency(
    net: &DenseNet,
    pose: &FingerPose,
    observed: &SensorFrame,
) -> Result<f64> {
    check_shape(net)?;
    let out = net.forward(&pose.to_array())?;
    Ok(mse(&out, observed).sqrt())
}
