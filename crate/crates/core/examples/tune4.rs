// Scratch: noise-augmented inverse training. Not part of the deliverable.

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
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let draws: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let l2: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-6);

    let sim = Surrogate::new(SensorSpec::default(), FingerGeometry::default()).unwrap();
    let noise = NoiseModel::default();
    let bounds = PoseBounds::default();

    // Clean corpus; augment with per-sample noise draws for training.
    let mut spec = DatasetSpec::default();
    spec.seed = 1;
    let corpus = canonicalize_inverse_view(&generate(&spec, &sim, &noise).unwrap());
    let (train_set, val_clean) = split(&corpus, 0.2, SplitBy::Random, 2).unwrap();
    // Validation uses noisy frames (deployment conditions).
    let val_noisy: Vec<_> = val_clean
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut out = s.clone();
            out.frame = noise.apply_seeded(&s.frame, 777 + i as u64);
            out
        })
        .collect();

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (i, s) in train_set.iter().enumerate() {
        for k in 0..draws.max(1) {
            let frame = if draws == 0 {
                s.frame.clone()
            } else {
                noise.apply_seeded(&s.frame, (i * 131 + k) as u64)
            };
            inputs.push(frame.as_slice().to_vec());
            targets.push(s.pose.to_array().to_vec());
        }
    }
    println!("training rows: {}", inputs.len());

    let mut net = DenseNet::new(&[160, 256, 128, 5], DEFAULT_LEAK, 54321).unwrap();
    net.set_output_norm(Normalizer::from_bounds(&bounds)).unwrap();

    let mut done = 0;
    while done < epochs {
        let n = 20.min(epochs - done);
        let cfg = TrainConfig { epochs: n, l2, seed: 8 + done as u64, ..TrainConfig::default() };
        let t = Instant::now();
        let hist = train(&mut net, &inputs, &targets, &cfg).unwrap();
        done += n;
        let reg = RegressorNet::new(net.clone(), bounds).unwrap();
        let va = rmse(&reg, &val_noisy);
        println!(
            "ep {done:4} draws {draws} l2 {l2:.0e}  mse {:.3e}  noisy-val[x {:.2} y {:.2} z {:.2} p {:.1} yaw {:.1}]  {:.1?}",
            hist.last().unwrap(), va[0], va[1], va[2], va[3], va[4], t.elapsed()
        );
        for (lo, hi) in [(0.0, 1.0), (1.0, 2.0)] {
            let band: Vec<_> = val_noisy
                .iter()
                .filter(|s| s.pose.z >= lo && s.pose.z < hi)
                .cloned()
                .collect();
            let b = rmse(&reg, &band);
            println!(
                "    z {lo}-{hi}: x {:.2} y {:.2} z {:.2} pitch {:.1} yaw {:.1}",
                b[0], b[1], b[2], b[3], b[4]
            );
        }
    }
}
