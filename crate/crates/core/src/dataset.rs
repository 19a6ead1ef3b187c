//! Corpus generation, splitting and CSV persistence.
//!
//! A corpus is a random block of poses drawn uniformly inside a bounding
//! box plus a structured grid: the Cartesian product of position axes with
//! pitch and yaw angle lists. Samples carry a session tag (one batch per
//! grid position, the random block is session 0) so corpora can be split
//! without leaking a session across the train/test boundary.
//!
//! CSV schema: `session,x,y,z,pitch,yaw,p000..p159`, floats with six
//! decimal places, pads row-major with x fastest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::sim::{NoiseModel, Surrogate};
use crate::types::{validate_pose, FingerPose, SensorFrame, PAD_COUNT};

/// Lower corner of the random sampling box `(x, y, z)` in cm.
pub const RANDOM_BOX_MIN: [f64; 3] = [1.0, 2.0, 0.3];
/// Upper corner of the random sampling box `(x, y, z)` in cm.
pub const RANDOM_BOX_MAX: [f64; 3] = [5.0, 10.0, 3.0];

/// One labelled example: pose, its (clean or noisy) frame, and the
/// generation batch it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub pose: FingerPose,
    pub frame: SensorFrame,
    pub session: u32,
}

/// Uniformly spaced grid axis; the origin is a parameter rather than a
/// hard-coded offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAxis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(start: f64, step: f64, count: usize) -> Self {
        Self { start, step, count }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.start + i as f64 * self.step)
    }
}

/// Everything needed to regenerate a corpus bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub random_count: usize,
    pub grid_x: GridAxis,
    pub grid_y: GridAxis,
    pub grid_z: GridAxis,
    pub pitch_list: Vec<f64>,
    pub yaw_list: Vec<f64>,
    pub noise: bool,
    pub seed: u64,
}

impl Default for DatasetSpec {
    /// Desk-scale default: 2 000 random poses plus a 5x5x4 position grid
    /// with 7 pitch and 9 yaw angles (6 300 grid samples, 8 300 total).
    fn default() -> Self {
        Self {
            random_count: 2000,
            grid_x: GridAxis::new(1.0, 1.0, 5),
            grid_y: GridAxis::new(2.0, 2.0, 5),
            grid_z: GridAxis::new(0.3, 0.9, 4),
            pitch_list: vec![0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0],
            yaw_list: vec![-45.0, -30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 45.0],
            noise: false,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn total_count(&self) -> usize {
        self.random_count
            + self.grid_x.count
                * self.grid_y.count
                * self.grid_z.count
                * self.pitch_list.len()
                * self.yaw_list.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_x.count == 0 || self.grid_y.count == 0 || self.grid_z.count == 0 {
            return Err(Error::InvalidSpec("grid axis counts must be > 0".into()));
        }
        if self.pitch_list.is_empty() || self.yaw_list.is_empty() {
            return Err(Error::InvalidSpec("angle lists must be non-empty".into()));
        }
        if self.total_count() == 0 {
            return Err(Error::InvalidSpec("spec generates no samples".into()));
        }
        // Pose validity factors per field, so checking the axis extremes
        // with nominal angles covers the whole product.
        for x in self.grid_x.values() {
            for y in self.grid_y.values() {
                for z in self.grid_z.values() {
                    let pose = FingerPose::new(x, y, z, 0.0, 0.0);
                    let violations = validate_pose(&pose);
                    if !violations.is_empty() {
                        return Err(Error::InvalidSpec(format!(
                            "grid pose out of bounds: {}",
                            violations[0]
                        )));
                    }
                }
            }
        }
        for &pitch in &self.pitch_list {
            if !(0.0..=90.0).contains(&pitch) {
                return Err(Error::InvalidSpec(format!("pitch {pitch} out of [0, 90]")));
            }
        }
        for &yaw in &self.yaw_list {
            if !(-90.0..=90.0).contains(&yaw) {
                return Err(Error::InvalidSpec(format!("yaw {yaw} out of [-90, 90]")));
            }
        }
        Ok(())
    }
}

/// Generates the corpus described by `spec`.
///
/// Poses are drawn sequentially from one seeded stream; frame simulation
/// and noise run per sample with a seed derived from the sample index, so
/// the output is identical for any worker count.
pub fn generate(
    spec: &DatasetSpec,
    surrogate: &Surrogate,
    noise: &NoiseModel,
) -> Result<Vec<Sample>> {
    spec.validate()?;
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let mut poses: Vec<(FingerPose, u32)> = Vec::with_capacity(spec.total_count());
    for _ in 0..spec.random_count {
        let pose = FingerPose::new(
            rng.random_range(RANDOM_BOX_MIN[0]..=RANDOM_BOX_MAX[0]),
            rng.random_range(RANDOM_BOX_MIN[1]..=RANDOM_BOX_MAX[1]),
            rng.random_range(RANDOM_BOX_MIN[2]..=RANDOM_BOX_MAX[2]),
            rng.random_range(0.0..=90.0),
            rng.random_range(-90.0..=90.0),
        );
        poses.push((pose, 0));
    }
    let mut session = 0u32;
    for x in spec.grid_x.values() {
        for y in spec.grid_y.values() {
            for z in spec.grid_z.values() {
                session += 1;
                for &pitch in &spec.pitch_list {
                    for &yaw in &spec.yaw_list {
                        poses.push((FingerPose::new(x, y, z, pitch, yaw), session));
                    }
                }
            }
        }
    }
    let with_noise = spec.noise;
    let base_seed = spec.seed;
    let samples = map_indexed(&poses, |index, (pose, session)| {
        let clean = surrogate.response(pose);
        let frame = if with_noise {
            noise.apply_seeded(&clean, base_seed.wrapping_add(1 + index as u64))
        } else {
            clean
        };
        Sample { pose: *pose, frame, session: *session }
    });
    Ok(samples)
}

/// How [`split`] assigns samples to the test half.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitBy {
    /// Whole sessions go to one side; no session straddles the boundary.
    Session,
    /// Uniform shuffle split over individual samples.
    Random,
}

/// Splits a corpus into `(train, test)` halves, disjoint and exhaustive.
pub fn split(
    samples: &[Sample],
    test_fraction: f64,
    by: SplitBy,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "test_fraction {test_fraction} must be in (0, 1)"
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    match by {
        SplitBy::Random => {
            let mut indices: Vec<usize> = (0..samples.len()).collect();
            indices.shuffle(&mut rng);
            let n_test = (test_fraction * samples.len() as f64).round() as usize;
            let mut test_mask = vec![false; samples.len()];
            for &i in indices.iter().take(n_test) {
                test_mask[i] = true;
            }
            let mut train = Vec::with_capacity(samples.len() - n_test);
            let mut test = Vec::with_capacity(n_test);
            for (i, s) in samples.iter().enumerate() {
                if test_mask[i] {
                    test.push(s.clone());
                } else {
                    train.push(s.clone());
                }
            }
            Ok((train, test))
        }
        SplitBy::Session => {
            let mut sessions: Vec<u32> = samples.iter().map(|s| s.session).collect();
            sessions.sort_unstable();
            sessions.dedup();
            if sessions.len() < 2 {
                return Err(Error::TooFewSessions(sessions.len()));
            }
            sessions.shuffle(&mut rng);
            let n_test = (test_fraction * sessions.len() as f64).round() as usize;
            let n_test = n_test.clamp(1, sessions.len() - 1);
            let test_sessions: Vec<u32> = sessions.into_iter().take(n_test).collect();
            let mut train = Vec::new();
            let mut test = Vec::new();
            for s in samples {
                if test_sessions.contains(&s.session) {
                    test.push(s.clone());
                } else {
                    train.push(s.clone());
                }
            }
            Ok((train, test))
        }
    }
}

/// Inverse-corpus view: yaw is canonicalized to 0 wherever pitch is 0,
/// because all yaws project to the same frame there. Frames are untouched;
/// the forward corpus keeps the original rows.
pub fn canonicalize_inverse_view(samples: &[Sample]) -> Vec<Sample> {
    samples
        .iter()
        .map(|s| {
            let mut out = s.clone();
            if out.pose.pitch == 0.0 {
                out.pose.yaw = 0.0;
            }
            out
        })
        .collect()
}

fn csv_header() -> String {
    let mut header = String::from("session,x,y,z,pitch,yaw");
    for p in 0..PAD_COUNT {
        header.push_str(&format!(",p{p:03}"));
    }
    header
}

/// Writes samples in the documented CSV schema.
pub fn write_csv<P: AsRef<Path>>(samples: &[Sample], path: P) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", csv_header())?;
    for s in samples {
        write!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.session, s.pose.x, s.pose.y, s.pose.z, s.pose.pitch, s.pose.yaw
        )?;
        for v in s.frame.as_slice() {
            write!(w, ",{v:.6}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

const CSV_COLUMNS: usize = 6 + PAD_COUNT;

/// Reads a sample CSV written by [`write_csv`]; malformed rows report the
/// 1-based line and column.
pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Vec<Sample>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    let expected_header = csv_header();
    for (line_index, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_index + 1;
        if line_index == 0 {
            if line != expected_header {
                return Err(Error::MalformedRow {
                    line: 1,
                    column: 1,
                    reason: "unexpected header".into(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != CSV_COLUMNS {
            return Err(Error::MalformedRow {
                line: line_no,
                column: fields.len(),
                reason: format!("expected {CSV_COLUMNS} columns, got {}", fields.len()),
            });
        }
        let parse = |column: usize, text: &str| -> Result<f64> {
            text.parse::<f64>().map_err(|_| Error::MalformedRow {
                line: line_no,
                column: column + 1,
                reason: format!("not a number: {text:?}"),
            })
        };
        let session: u32 = fields[0].parse().map_err(|_| Error::MalformedRow {
            line: line_no,
            column: 1,
            reason: format!("not a session tag: {:?}", fields[0]),
        })?;
        let pose = FingerPose::new(
            parse(1, fields[1])?,
            parse(2, fields[2])?,
            parse(3, fields[3])?,
            parse(4, fields[4])?,
            parse(5, fields[5])?,
        );
        let mut frame = SensorFrame::zeros();
        for p in 0..PAD_COUNT {
            frame.as_mut_slice()[p] = parse(6 + p, fields[6 + p])?;
        }
        samples.push(Sample { pose, frame, session });
    }
    Ok(samples)
}
