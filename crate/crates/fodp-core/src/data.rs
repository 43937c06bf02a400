//! Dataset ingestion: a deterministic synthetic blob generator for
//! desk-scale experiments, and a CIFAR-10 binary-format loader.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{FodpError, Result};
use crate::model::Example;
use crate::rng::StreamRng;

/// An immutable labeled dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub num_classes: usize,
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Expected Poisson lot size L = N * q.
    pub fn expected_lot(&self, q: f64) -> f64 {
        self.len() as f64 * q
    }
}

/// Parameters of the synthetic Gaussian-blob generator.
///
/// Class `k`'s center sits at a scaled hypercube corner: coordinate `j` is
/// `center_scale * (2 bit_j(k) - 1)` for the low `ceil(log2 c)` coordinates
/// and zero elsewhere. Points are the center plus isotropic Gaussian noise of
/// the given standard deviation, drawn from the data substream.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub cluster_std: f64,
    pub center_scale: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0
            || self.dim == 0
            || self.train_per_class == 0
            || self.test_per_class == 0
        {
            return Err(FodpError::InvalidConfig(
                "synthetic dataset counts must be positive".to_string(),
            ));
        }
        if self.cluster_std < 0.0 || self.center_scale <= 0.0 {
            return Err(FodpError::InvalidConfig(
                "cluster_std must be >= 0 and center_scale > 0".to_string(),
            ));
        }
        let bits = usize::BITS - (self.num_classes - 1).leading_zeros();
        if self.num_classes > 1 && bits as usize > self.dim {
            return Err(FodpError::InvalidConfig(
                "dim too small to place one hypercube corner per class".to_string(),
            ));
        }
        Ok(())
    }

    fn center(&self, class: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        if self.num_classes > 1 {
            let bits = (usize::BITS - (self.num_classes - 1).leading_zeros()) as usize;
            for (j, value) in c.iter_mut().enumerate().take(bits) {
                *value = if (class >> j) & 1 == 1 {
                    self.center_scale
                } else {
                    -self.center_scale
                };
            }
        }
        c
    }
}

/// Generate disjoint train and test splits. Draw order is fixed (per class:
/// all train points, then all test points), so the same seed reproduces the
/// same datasets exactly.
pub fn generate_synthetic(spec: &SyntheticSpec, rng: &mut StreamRng) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let mut train = Vec::with_capacity(spec.num_classes * spec.train_per_class);
    let mut test = Vec::with_capacity(spec.num_classes * spec.test_per_class);
    for class in 0..spec.num_classes {
        let center = spec.center(class);
        for _ in 0..spec.train_per_class {
            train.push(blob_point(&center, spec.cluster_std, class, rng));
        }
        for _ in 0..spec.test_per_class {
            test.push(blob_point(&center, spec.cluster_std, class, rng));
        }
    }
    Ok((
        Dataset {
            examples: train,
            num_classes: spec.num_classes,
            dim: spec.dim,
        },
        Dataset {
            examples: test,
            num_classes: spec.num_classes,
            dim: spec.dim,
        },
    ))
}

fn blob_point(center: &[f64], std: f64, label: usize, rng: &mut StreamRng) -> Example {
    let features = center
        .iter()
        .map(|c| {
            if std == 0.0 {
                *c
            } else {
                c + rng.next_gaussian(std)
            }
        })
        .collect();
    Example { features, label }
}

const CIFAR_PIXELS: usize = 3072;
const CIFAR_RECORD: usize = 1 + CIFAR_PIXELS;
const CIFAR_CHANNEL: usize = 1024;

/// How CIFAR pixel features are normalized after the [0, 1] rescale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Per-channel standardization with train-set statistics.
    Standardize,
    /// Keep the [0, 1] min-max scale.
    MinMax,
}

/// Load CIFAR-10 from the standard binary layout (per record: one label byte
/// followed by 3072 pixel bytes, channel-planar R/G/B).
///
/// `path` is the directory holding `data_batch_*.bin` and `test_batch.bin`.
/// The first `train_count` / `test_count` records are taken in file order;
/// requesting more than available yields what exists. Pixels are scaled to
/// [0, 1] and then, under [`Normalization::Standardize`], per-channel
/// standardized with statistics computed on the loaded training records.
pub fn load_cifar10_binary(
    path: &Path,
    train_count: usize,
    test_count: usize,
    normalization: Normalization,
) -> Result<(Dataset, Dataset)> {
    let mut train_files: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("data_batch_") && n.ends_with(".bin"))
        })
        .collect();
    train_files.sort();
    if train_files.is_empty() {
        return Err(FodpError::DataFormat(format!(
            "no data_batch_*.bin files under {}",
            path.display()
        )));
    }
    let test_file = path.join("test_batch.bin");
    if !test_file.exists() {
        return Err(FodpError::DataFormat(format!(
            "missing {}",
            test_file.display()
        )));
    }

    let mut train_raw = Vec::new();
    for file in &train_files {
        if train_raw.len() >= train_count {
            break;
        }
        read_records(file, train_count - train_raw.len(), &mut train_raw)?;
    }
    let mut test_raw = Vec::new();
    read_records(&test_file, test_count, &mut test_raw)?;

    if let Normalization::Standardize = normalization {
        let stats = channel_stats(&train_raw);
        standardize(&mut train_raw, &stats);
        standardize(&mut test_raw, &stats);
    }

    Ok((
        Dataset {
            examples: train_raw,
            num_classes: 10,
            dim: CIFAR_PIXELS,
        },
        Dataset {
            examples: test_raw,
            num_classes: 10,
            dim: CIFAR_PIXELS,
        },
    ))
}

fn read_records(file: &Path, limit: usize, out: &mut Vec<Example>) -> Result<()> {
    let bytes = fs::read(file)?;
    if bytes.len() % CIFAR_RECORD != 0 {
        return Err(FodpError::DataFormat(format!(
            "{}: length {} is not a multiple of the {}-byte record size",
            file.display(),
            bytes.len(),
            CIFAR_RECORD
        )));
    }
    for record in bytes.chunks_exact(CIFAR_RECORD).take(limit) {
        let label = record[0];
        if label > 9 {
            return Err(FodpError::DataFormat(format!(
                "{}: label byte {} out of range 0..=9",
                file.display(),
                label
            )));
        }
        let features = record[1..].iter().map(|&b| b as f64 / 255.0).collect();
        out.push(Example {
            features,
            label: label as usize,
        });
    }
    Ok(())
}

fn channel_stats(examples: &[Example]) -> [(f64, f64); 3] {
    let mut stats = [(0.0, 1.0); 3];
    if examples.is_empty() {
        return stats;
    }
    let count = (examples.len() * CIFAR_CHANNEL) as f64;
    for (ch, stat) in stats.iter_mut().enumerate() {
        let range = ch * CIFAR_CHANNEL..(ch + 1) * CIFAR_CHANNEL;
        let mean: f64 = examples
            .iter()
            .map(|e| e.features[range.clone()].iter().sum::<f64>())
            .sum::<f64>()
            / count;
        let var: f64 = examples
            .iter()
            .map(|e| {
                e.features[range.clone()]
                    .iter()
                    .map(|x| (x - mean) * (x - mean))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / count;
        *stat = (mean, var.sqrt().max(1e-12));
    }
    stats
}

fn standardize(examples: &mut [Example], stats: &[(f64, f64); 3]) {
    for example in examples {
        for (ch, (mean, std)) in stats.iter().enumerate() {
            for x in &mut example.features[ch * CIFAR_CHANNEL..(ch + 1) * CIFAR_CHANNEL] {
                *x = (*x - mean) / std;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{SeededRng, Substream};
    use std::io::Write;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            num_classes: 4,
            dim: 6,
            train_per_class: 25,
            test_per_class: 10,
            cluster_std: 0.3,
            center_scale: 1.0,
        }
    }

    #[test]
    fn same_seed_reproduces_datasets() {
        let master = SeededRng::new(100);
        let (tr1, te1) = generate_synthetic(&spec(), &mut master.substream(Substream::Data)).unwrap();
        let (tr2, te2) = generate_synthetic(&spec(), &mut master.substream(Substream::Data)).unwrap();
        assert_eq!(tr1.examples, tr2.examples);
        assert_eq!(te1.examples, te2.examples);
        assert_eq!(tr1.len(), 100);
        assert_eq!(te1.len(), 40);
    }

    #[test]
    fn zero_spread_collapses_to_centers_and_centroids_classify_perfectly() {
        let mut s = spec();
        s.cluster_std = 0.0;
        let mut rng = SeededRng::new(5).substream(Substream::Data);
        let (train, test) = generate_synthetic(&s, &mut rng).unwrap();
        for ex in &train.examples {
            assert_eq!(ex.features, s.center(ex.label));
        }
        // Nearest-centroid rule on the degenerate blobs is exact.
        let centers: Vec<Vec<f64>> = (0..s.num_classes).map(|k| s.center(k)).collect();
        let correct = test
            .examples
            .iter()
            .filter(|ex| {
                let nearest = centers
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        dist2(&ex.features, a)
                            .partial_cmp(&dist2(&ex.features, b))
                            .unwrap()
                    })
                    .unwrap()
                    .0;
                nearest == ex.label
            })
            .count();
        assert_eq!(correct, test.len());
    }

    #[test]
    fn moderate_spread_is_learnable_by_nearest_centroid() {
        let s = SyntheticSpec {
            num_classes: 10,
            dim: 64,
            train_per_class: 50,
            test_per_class: 20,
            cluster_std: 0.8,
            center_scale: 1.0,
        };
        let mut rng = SeededRng::new(7).substream(Substream::Data);
        let (train, test) = generate_synthetic(&s, &mut rng).unwrap();

        // Estimate centroids from train, classify test.
        let mut centroids = vec![vec![0.0; s.dim]; s.num_classes];
        let mut counts = vec![0usize; s.num_classes];
        for ex in &train.examples {
            counts[ex.label] += 1;
            for (c, x) in centroids[ex.label].iter_mut().zip(&ex.features) {
                *c += x;
            }
        }
        for (c, n) in centroids.iter_mut().zip(&counts) {
            for v in c {
                *v /= *n as f64;
            }
        }
        let correct = test
            .examples
            .iter()
            .filter(|ex| {
                let nearest = centroids
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        dist2(&ex.features, a)
                            .partial_cmp(&dist2(&ex.features, b))
                            .unwrap()
                    })
                    .unwrap()
                    .0;
                nearest == ex.label
            })
            .count();
        let accuracy = correct as f64 / test.len() as f64;
        assert!(accuracy > 0.5, "nearest-centroid accuracy {accuracy}");
    }

    fn dist2(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    fn write_records(path: &Path, records: &[(u8, u8)]) {
        // Each record: label byte + 3072 pixels all set to the given value.
        let mut f = fs::File::create(path).unwrap();
        for (label, fill) in records {
            f.write_all(&[*label]).unwrap();
            f.write_all(&vec![*fill; CIFAR_PIXELS]).unwrap();
        }
    }

    #[test]
    fn cifar_fixture_round_trip() {
        let dir = std::env::temp_dir().join(format!("fodp_cifar_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        write_records(&dir.join("data_batch_1.bin"), &[(3, 10), (7, 200)]);
        write_records(&dir.join("test_batch.bin"), &[(1, 128)]);

        let (train, test) =
            load_cifar10_binary(&dir, 5, 5, Normalization::MinMax).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(test.len(), 1);
        assert_eq!(train.examples[0].label, 3);
        assert_eq!(train.examples[1].label, 7);
        assert!((train.examples[0].features[0] - 10.0 / 255.0).abs() < 1e-15);
        assert!((train.examples[1].features[CIFAR_PIXELS - 1] - 200.0 / 255.0).abs() < 1e-15);

        // Requesting fewer records truncates deterministically.
        let (train1, _) = load_cifar10_binary(&dir, 1, 1, Normalization::MinMax).unwrap();
        assert_eq!(train1.len(), 1);

        // Standardization: per-channel train mean ~ 0.
        let (train_std, _) = load_cifar10_binary(&dir, 5, 5, Normalization::Standardize).unwrap();
        for ch in 0..3 {
            let mean: f64 = train_std
                .examples
                .iter()
                .flat_map(|e| e.features[ch * CIFAR_CHANNEL..(ch + 1) * CIFAR_CHANNEL].iter())
                .sum::<f64>()
                / (train_std.len() * CIFAR_CHANNEL) as f64;
            assert!(mean.abs() < 1e-6, "channel {ch} mean {mean}");
        }

        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn cifar_rejects_bad_label_and_truncation() {
        let dir = std::env::temp_dir().join(format!("fodp_cifar_bad_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        write_records(&dir.join("test_batch.bin"), &[(0, 1)]);

        write_records(&dir.join("data_batch_1.bin"), &[(255, 0)]);
        assert!(matches!(
            load_cifar10_binary(&dir, 1, 1, Normalization::MinMax),
            Err(FodpError::DataFormat(_))
        ));

        fs::write(dir.join("data_batch_1.bin"), vec![0u8; CIFAR_RECORD - 1]).unwrap();
        assert!(matches!(
            load_cifar10_binary(&dir, 1, 1, Normalization::MinMax),
            Err(FodpError::DataFormat(_))
        ));

        let missing = dir.join("nonexistent");
        assert!(load_cifar10_binary(&missing, 1, 1, Normalization::MinMax).is_err());

        fs::remove_dir_all(&dir).unwrap();
    }
}
