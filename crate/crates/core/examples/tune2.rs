// Scratch: throughput ratio + inverse net probing. Not part of the deliverable.

use std::time::Instant;

use touchpose::dataset::{canonicalize_inverse_view, generate, split, DatasetSpec, SplitBy};
use touchpose::eval::emulator_benchmark;
use touchpose::model::{EmulatorNet, InverseModel, RegressorNet};
use touchpose::net::{train, DenseNet, Normalizer, TrainConfig, DEFAULT_LEAK};
use touchpose::sim::{FingerGeometry, NoiseModel, Surrogate};
use touchpose::types::{PoseBounds, SensorSpec, POSE_DIMS};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let fwd_epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let inv_epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(60);

    let sim = Surrogate::new(SensorSpec::default(), FingerGeometry::default()).unwrap();
    let noise = NoiseModel::default();
    let bounds = PoseBounds::default();

    // Forward emulator on the clean corpus.
    let spec = DatasetSpec::default();
    let corpus = generate(&spec, &sim, &noise).unwrap();
    let (train_set, _) = split(&corpus, 0.2, SplitBy::Random, 1).unwrap();
    let inputs: Vec<Vec<f64>> = train_set.iter().map(|s| s.pose.to_array().to_vec()).collect();
    let targets: Vec<Vec<f64>> = train_set.iter().map(|s| s.frame.as_slice().to_vec()).collect();
    let mut fwd = DenseNet::new(&[5, 128, 128, 160], DEFAULT_LEAK, 12345).unwrap();
    fwd.set_input_norm(Normalizer::from_bounds(&bounds)).unwrap();
    let t = Instant::now();
    train(
        &mut fwd,
        &inputs,
        &targets,
        &TrainConfig { epochs: fwd_epochs, seed: 7, ..TrainConfig::default() },
    )
    .unwrap();
    println!("forward trained {fwd_epochs} epochs in {:.1?}", t.elapsed());

    let emulator = EmulatorNet::new(fwd).unwrap();
    let bench = emulator_benchmark(&emulator, &sim, 3000, 99);
    println!(
        "benchmark: rmse {:.5}  net/s {:.0}  surrogate/s {:.0}  ratio {:.1}",
        bench.rmse.unwrap(),
        bench.net_per_sec.unwrap(),
        bench.surrogate_per_sec.unwrap(),
        bench.throughput_ratio.unwrap()
    );

    // Inverse regressor on the noisy canonicalized corpus.
    let mut noisy_spec = DatasetSpec::default();
    noisy_spec.noise = true;
    noisy_spec.seed = 1;
    let noisy = generate(&noisy_spec, &sim, &noise).unwrap();
    let inv_corpus = canonicalize_inverse_view(&noisy);
    let (inv_train, inv_val) = split(&inv_corpus, 0.2, SplitBy::Random, 2).unwrap();
    let inputs: Vec<Vec<f64>> = inv_train.iter().map(|s| s.frame.as_slice().to_vec()).collect();
    let targets: Vec<Vec<f64>> = inv_train.iter().map(|s| s.pose.to_array().to_vec()).collect();
    let mut inv = DenseNet::new(&[160, 256, 128, 5], DEFAULT_LEAK, 54321).unwrap();
    inv.set_output_norm(Normalizer::from_bounds(&bounds)).unwrap();
    let t = Instant::now();
    let hist = train(
        &mut inv,
        &inputs,
        &targets,
        &TrainConfig { epochs: inv_epochs, seed: 8, ..TrainConfig::default() },
    )
    .unwrap();
    println!(
        "inverse trained {inv_epochs} epochs in {:.1?} (last mse {:.4e})",
        t.elapsed(),
        hist.last().unwrap()
    );
    let regressor = RegressorNet::new(inv, bounds).unwrap();
    let mut sq = [0.0f64; POSE_DIMS];
    for s in &inv_val {
        let p = regressor.predict_pose(&s.frame).to_array();
        let t = s.pose.to_array();
        for d in 0..POSE_DIMS {
            sq[d] += (p[d] - t[d]) * (p[d] - t[d]);
        }
    }
    let n = inv_val.len() as f64;
    println!(
        "inverse val rmse: x {:.3} y {:.3} z {:.3} pitch {:.2} yaw {:.2}",
        (sq[0] / n).sqrt(),
        (sq[1] / n).sqrt(),
        (sq[2] / n).sqrt(),
        (sq[3] / n).sqrt(),
        (sq[4] / n).sqrt()
    );
}

