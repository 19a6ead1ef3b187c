// Scratch: inverse-net regularization sweep. Not part of the deliverable.

use std::time::Instant;

use touchpose::dataset::{canonicalize_inverse_view, generate, split, DatasetSpec, SplitBy};
use touchpose::model::{InverseModel, RegressorNet};
use touchpose::net::{train, DenseNet, Normalizer, TrainConfig, DEFAULT_LEAK};
use touchpose::sim::{FingerGeometry, NoiseModel, Surrogate};
use touchpose::types::{PoseBounds, SensorSpec, POSE_DIMS};

fn rmse(reg: &RegressorNet, set: &[touchpose::dataset::Sample]) -> [f64; POSE_DIMS] {
    let mut sq = [0.0f64; POSE_DIMS];
    for s in set {
        let p = reg.predict_pose(&s.frame).to_array();
        let t = s.pose.to_array();
        for d in 0..POSE_DIMS {
            sq[d] += (p[d] - t[d]) * (p[d] - t[d]);
        }
    }
    let n = set.len() as f64;
    let mut out = [0.0; POSE_DIMS];
    for d in 0..POSE_DIMS {
        out[d] = (sq[d] / n).sqrt();
    }
    out
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let l2: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-4);
    let use_noise: bool = args.get(3).map(|s| s == "noise").unwrap_or(true);

    let sim = Surrogate::new(SensorSpec::default(), FingerGeometry::default()).unwrap();
    let noise = NoiseModel::default();
    let bounds = PoseBounds::default();

    let mut spec = DatasetSpec::default();
    spec.noise = use_noise;
    spec.seed = 1;
    let corpus = canonicalize_inverse_view(&generate(&spec, &sim, &noise).unwrap());
    let (train_set, val_set) = split(&corpus, 0.2, SplitBy::Random, 2).unwrap();
    let inputs: Vec<Vec<f64>> = train_set.iter().map(|s| s.frame.as_slice().to_vec()).collect();
    let targets: Vec<Vec<f64>> = train_set.iter().map(|s| s.pose.to_array().to_vec()).collect();

    let mut net = DenseNet::new(&[160, 256, 128, 5], DEFAULT_LEAK, 54321).unwrap();
    net.set_output_norm(Normalizer::from_bounds(&bounds)).unwrap();

    let mut done = 0;
    while done < epochs {
        let n = 25.min(epochs - done);
        let cfg = TrainConfig {
            epochs: n,
            l2,
            seed: 8 + done as u64,
            ..TrainConfig::default()
        };
        let t = Instant::now();
        let hist = train(&mut net, &inputs, &targets, &cfg).unwrap();
        done += n;
        let reg = RegressorNet::new(net.clone(), bounds).unwrap();
        let tr = rmse(&reg, &train_set);
        let va = rmse(&reg, &val_set);
        println!(
            "ep {done:4} l2 {l2:.0e} noise {use_noise}  mse {:.3e}  train[p {:.1} y {:.1}]  val[x {:.2} y {:.2} z {:.2} p {:.1} yaw {:.1}]  {:.1?}",
            hist.last().unwrap(), tr[3], tr[4], va[0], va[1], va[2], va[3], va[4], t.elapsed()
        );
        for (lo, hi) in [(0.0, 1.0), (1.0, 2.0), (2.0, 3.1)] {
            let band: Vec<_> = val_set
                .iter()
                .filter(|s| s.pose.z >= lo && s.pose.z < hi)
                .cloned()
                .collect();
            let b = rmse(&reg, &band);
            println!(
                "    z {lo}-{hi} (n={}): x {:.2} y {:.2} z {:.2} pitch {:.1} yaw {:.1}",
                band.len(), b[0], b[1], b[2], b[3], b[4]
            );
        }
    }
}
