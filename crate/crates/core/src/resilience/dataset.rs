//! Labelled uint8 datasets and the synthetic blob generator.

use std::fs;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ResilienceError;

const MAGIC: &[u8; 8] = b"AXCDS001";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    shape: Vec<usize>,
    classes: usize,
    images: Vec<u8>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(shape: Vec<usize>, classes: usize, images: Vec<u8>, labels: Vec<u8>) -> Result<Self, ResilienceError> {
        let features: usize = shape.iter().product();
        if shape.is_empty() || features == 0 || images.len() != features * labels.len() {
            return Err(ResilienceError::Format(format!(
                "{} image bytes do not fit {} samples of shape {shape:?}",
                images.len(),
                labels.len()
            )));
        }
        if classes == 0 || classes > 256 || labels.iter().any(|&l| l as usize >= classes) {
            return Err(ResilienceError::Format(format!(
                "labels out of range for {classes} classes"
            )));
        }
        Ok(Dataset {
            shape,
            classes,
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn classes(&self) -> usize {
        self.classes
    }
    pub fn features(&self) -> usize {
        self.shape.iter().product()
    }
    pub fn image(&self, i: usize) -> &[u8] {
        let f = self.features();
        &self.images[i * f..(i + 1) * f]
    }
    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    /// `AXCDS001`, u32 count, u32 rank, rank x u32 dims, u32 classes, then
    /// all images (row-major uint8) followed by one uint8 label per image.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(24 + self.images.len() + self.labels.len());
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&(self.len() as u32).to_le_bytes());
        b.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &d in &self.shape {
            b.extend_from_slice(&(d as u32).to_le_bytes());
        }
        b.extend_from_slice(&(self.classes as u32).to_le_bytes());
        b.extend_from_slice(&self.images);
        b.extend_from_slice(&self.labels);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ResilienceError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ResilienceError::Format("dataset file: bad magic".into()));
        }
        let mut u32le = || -> Result<usize, ResilienceError> {
            let mut u = [0u8; 4];
            r.read_exact(&mut u)?;
            Ok(u32::from_le_bytes(u) as usize)
        };
        let n = u32le()?;
        let rank = u32le()?;
        if rank == 0 || rank > 4 {
            return Err(ResilienceError::Format(format!("dataset file: rank {rank}")));
        }
        let shape = (0..rank).map(|_| u32le()).collect::<Result<Vec<_>, _>>()?;
        let classes = u32le()?;
        let header = 8 + 4 * (3 + rank);
        let features: usize = shape.iter().product();
        let body = features.checked_mul(n).and_then(|x| x.checked_add(n));
        if body != Some(bytes.len() - header) {
            return Err(ResilienceError::Format(
                "dataset file: size does not match header".into(),
            ));
        }
        let images = bytes[header..header + features * n].to_vec();
        let labels = bytes[header + features * n..].to_vec();
        Dataset::new(shape, classes, images, labels)
    }

    pub fn save(&self, path: &Path) -> Result<(), ResilienceError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ResilienceError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Gaussian clusters in `[0, 1]^features`, quantized to uint8 as `round(255 x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobSpec {
    pub features: usize,
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Standard deviation of every coordinate around its class centre.
    pub spread: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            features: 16,
            classes: 4,
            train_per_class: 300,
            test_per_class: 250,
            spread: 0.2,
            seed: 1,
        }
    }
}

/// Train and test splits; samples are interleaved by class.
pub fn synthetic_blobs(spec: &BlobSpec) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centres: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..spec.features).map(|_| rng.random_range(0.2..0.8)).collect())
        .collect();
    let noise = Normal::new(0.0, spec.spread).expect("spread must be finite and non-negative");
    let mut split = |per_class: usize| {
        let mut images = Vec::with_capacity(per_class * spec.classes * spec.features);
        let mut labels = Vec::with_capacity(per_class * spec.classes);
        for _ in 0..per_class {
            for (c, centre) in centres.iter().enumerate() {
                for &m in centre {
                    let x: f64 = (m + noise.sample(&mut rng)).clamp(0.0, 1.0);
                    images.push((x * 255.0).round() as u8);
                }
                labels.push(c as u8);
            }
        }
        Dataset::new(vec![spec.features], spec.classes, images, labels).expect("generated data is consistent")
    };
    let train = split(spec.train_per_class);
    let test = split(spec.test_per_class);
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_deterministic_and_round_trip() {
        let spec = BlobSpec {
            train_per_class: 10,
            test_per_class: 5,
            ..Default::default()
        };
        let (a, t) = synthetic_blobs(&spec);
        let (b, _) = synthetic_blobs(&spec);
        assert_eq!(a, b);
        assert_eq!((a.len(), t.len(), a.features()), (40, 20, 16));
        assert_eq!(Dataset::from_bytes(&a.to_bytes()).unwrap(), a);
        let mut bytes = a.to_bytes();
        bytes.pop();
        assert!(Dataset::from_bytes(&bytes).is_err());
    }

    #[test]
    fn label_range_checked() {
        assert!(Dataset::new(vec![2], 2, vec![0, 0], vec![2]).is_err());
        assert!(Dataset::new(vec![2], 2, vec![0], vec![1]).is_err());
    }
}
