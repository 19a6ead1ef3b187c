// Scratch harness for hyperparameter probing. Not part of the deliverable.

use std::time::Instant;

use touchpose::dataset::{generate, split, DatasetSpec, SplitBy};
use touchpose::net::{train, DenseNet, Normalizer, TrainConfig, DEFAULT_LEAK};
use touchpose::sim::{FingerGeometry, NoiseModel, Surrogate};
use touchpose::types::{PoseBounds, SensorSpec, PAD_COUNT};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let sim = Surrogate::new(SensorSpec::default(), FingerGeometry::default()).unwrap();
    let noise = NoiseModel::default();
    let spec = DatasetSpec::default();
    let t0 = Instant::now();
    let corpus = generate(&spec, &sim, &noise).unwrap();
    println!("generated {} samples in {:?}", corpus.len(), t0.elapsed());

    let (train_set, val_set) = split(&corpus, 0.2, SplitBy::Random, 1).unwrap();
    let inputs: Vec<Vec<f64>> = train_set.iter().map(|s| s.pose.to_array().to_vec()).collect();
    let targets: Vec<Vec<f64>> = train_set.iter().map(|s| s.frame.as_slice().to_vec()).collect();

    let mut net = DenseNet::new(&[5, 128, 128, 160], DEFAULT_LEAK, 12345).unwrap();
    net.set_input_norm(Normalizer::from_bounds(&PoseBounds::default())).unwrap();

    let chunk = 10usize;
    let mut done = 0;
    while done < epochs {
        let n = chunk.min(epochs - done);
        let cfg = TrainConfig {
            epochs: n,
            learning_rate: lr,
            seed: 7 + done as u64,
            ..TrainConfig::default()
        };
        let t = Instant::now();
        let hist = train(&mut net, &inputs, &targets, &cfg).unwrap();
        done += n;
        // held-out RMSE
        let mut sq = 0.0;
        for s in &val_set {
            let out = net.forward(&s.pose.to_array()).unwrap();
            for (p, o) in out.iter().zip(s.frame.as_slice()) {
                sq += (p - o) * (p - o);
            }
        }
        let rmse = (sq / (val_set.len() * PAD_COUNT) as f64).sqrt();
        println!(
            "epoch {done:4}  train_mse {:.6e}  val_rmse {:.5}  ({:.2?}/epoch)",
            hist.last().unwrap(),
            rmse,
            t.elapsed() / n as u32
        );
    }
}
