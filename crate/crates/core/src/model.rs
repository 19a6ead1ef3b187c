//! Forward/inverse model interfaces shared by the tracker and harness.
//!
//! The surrogate simulator and the trained emulator net expose the same
//! forward interface, so the particle filter can weight particles against
//! either one.

use crate::error::{Error, Result};
use crate::net::DenseNet;
use crate::sim::Surrogate;
use crate::types::{FingerPose, PoseBounds, SensorFrame, PAD_COUNT, POSE_DIMS};

/// Causal map from pose to the expected clean frame.
pub trait ForwardModel: Send + Sync {
    fn predict_frame(&self, pose: &FingerPose) -> SensorFrame;
}

/// Direct regression from an observed frame back to a pose point estimate.
pub trait InverseModel: Send + Sync {
    fn predict_pose(&self, frame: &SensorFrame) -> FingerPose;
}

impl ForwardModel for Surrogate {
    fn predict_frame(&self, pose: &FingerPose) -> SensorFrame {
        self.response(pose)
    }
}

/// A trained pose-to-frame net wrapped as a forward model.
///
/// Outputs are the raw network values; they may stray slightly outside
/// `[0, 1]` where the emulator is imperfect, which is fine for residuals.
pub struct EmulatorNet {
    net: DenseNet,
}

impl EmulatorNet {
    pub fn new(net: DenseNet) -> Result<Self> {
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
        Ok(Self { net })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn into_inner(self) -> DenseNet {
        self.net
    }
}

impl ForwardModel for EmulatorNet {
    fn predict_frame(&self, pose: &FingerPose) -> SensorFrame {
        let out = self
            .net
            .forward(&pose.to_array())
            .expect("dimensions checked at construction");
        SensorFrame::from_slice(&out).expect("output length checked at construction")
    }
}

/// A trained frame-to-pose net wrapped as an inverse model. Outputs are
/// clamped to the pose bounds at this reporting boundary only.
pub struct RegressorNet {
    net: DenseNet,
    bounds: PoseBounds,
}

impl RegressorNet {
    pub fn new(net: DenseNet, bounds: PoseBounds) -> Result<Self> {
        if net.input_dim() != PAD_COUNT {
            return Err(Error::DimensionMismatch {
                expected: PAD_COUNT,
                got: net.input_dim(),
            });
        }
        if net.output_dim() != POSE_DIMS {
            return Err(Error::DimensionMismatch {
                expected: POSE_DIMS,
                got: net.output_dim(),
            });
        }
        Ok(Self { net, bounds })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }
}

impl InverseModel for RegressorNet {
    fn predict_pose(&self, frame: &SensorFrame) -> FingerPose {
        let out = self
            .net
            .forward(frame.as_slice())
            .expect("dimensions checked at construction");
        let pose = FingerPose::new(out[0], out[1], out[2], out[3], out[4]);
        self.bounds.clamp(&pose)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::DEFAULT_LEAK;
    use crate::sim::FingerGeometry;
    use crate::types::SensorSpec;

    #[test]
    fn surrogate_implements_forward_model() {
        let sim = Surrogate::new(SensorSpec::default(), FingerGeometry::default()).unwrap();
        let pose = FingerPose::new(3.0, 5.0, 1.0, 20.0, 0.0);
        let via_trait: &dyn ForwardModel = &sim;
        assert_eq!(via_trait.predict_frame(&pose), sim.response(&pose));
    }

    #[test]
    fn emulator_rejects_wrong_shape() {
        let net = DenseNet::new(&[4, 8, 160], DEFAULT_LEAK, 0).unwrap();
        assert!(EmulatorNet::new(net).is_err());
        let net = DenseNet::new(&[5, 8, 100], DEFAULT_LEAK, 0).unwrap();
        assert!(EmulatorNet::new(net).is_err());
    }

    #[test]
    fn regressor_clamps_to_bounds() {
        // A zero net with a huge output bias lands outside the box.
        let mut net = DenseNet::new(&[160, 5], DEFAULT_LEAK, 0).unwrap();
        let _ = net;
        let weights = vec![vec![0.0; 160 * 5]];
        let biases = vec![vec![100.0, -100.0, 50.0, 500.0, -500.0]];
        let net = DenseNet::from_parts(
            &[160, 5],
            weights,
            biases,
            &[crate::net::Activation::Identity],
            DEFAULT_LEAK,
        )
        .unwrap();
        let bounds = PoseBounds::default();
        let model = RegressorNet::new(net, bounds).unwrap();
        let pose = model.predict_pose(&SensorFrame::zeros());
        assert!(bounds.contains(&pose));
    }
}
