//! A small dense classifier trained in floating point and quantized to the
//! sign-magnitude 8-bit network format.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{synthetic_blobs, BlobSpec, Dataset};
use super::infer::{accuracy, LutAssignment};
use super::lut::MultiplierLut;
use super::network::{Affine, Layer, QuantizedNetwork};
use crate::num::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 32,
            epochs: 400,
            learning_rate: 0.5,
            seed: 7,
        }
    }
}

/// `inputs -> hidden (ReLU) -> outputs`; weights row-major `[out][in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatMlp<T> {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

fn pixels<T: Scalar>(image: &[u8]) -> Vec<T> {
    let s = T::lit(255.0);
    image.iter().map(|&v| T::from_u8(v).unwrap() / s).collect()
}

fn affine<T: Scalar>(w: &[T], b: &[T], x: &[T], out: usize) -> Vec<T> {
    let n = x.len();
    (0..out)
        .map(|o| {
            w[o * n..(o + 1) * n]
                .iter()
                .zip(x)
                .fold(b[o], |acc, (&w, &x)| acc + w * x)
        })
        .collect()
}

impl<T: Scalar> FloatMlp<T> {
    fn init(inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut he = |fan_in: usize, n: usize| {
            let d = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            (0..n).map(|_| T::lit(d.sample(&mut rng))).collect::<Vec<T>>()
        };
        FloatMlp {
            inputs,
            hidden,
            outputs,
            w1: he(inputs, hidden * inputs),
            b1: vec![T::zero(); hidden],
            w2: he(hidden, outputs * hidden),
            b2: vec![T::zero(); outputs],
        }
    }

    fn hidden_of(&self, x: &[T]) -> Vec<T> {
        affine(&self.w1, &self.b1, x, self.hidden)
            .into_iter()
            .map(|v| v.max(T::zero()))
            .collect()
    }

    pub fn logits(&self, image: &[u8]) -> Vec<T> {
        let h = self.hidden_of(&pixels(image));
        affine(&self.w2, &self.b2, &h, self.outputs)
    }

    pub fn predict(&self, image: &[u8]) -> usize {
        let z = self.logits(image);
        (0..z.len()).fold(0, |best, i| if z[i] > z[best] { i } else { best })
    }

    /// Top-1 accuracy in percent.
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        let ok = (0..data.len())
            .filter(|&i| self.predict(data.image(i)) == data.label(i) as usize)
            .count();
        100.0 * ok as f64 / data.len().max(1) as f64
    }

    /// Symmetric per-tensor weight quantization; inputs use scale 1/255 and
    /// the hidden scale maps the largest activation seen on `calibration` to 255.
    pub fn quantize(&self, calibration: &Dataset) -> QuantizedNetwork {
        let quant = |w: &[T]| {
            let max = w.iter().fold(0.0f64, |m, v| m.max(v.to_f64_lossy().abs()));
            let scale = if max > 0.0 { max / 127.0 } else { 1.0 };
            let q = w
                .iter()
                .map(|v| (v.to_f64_lossy() / scale).round().clamp(-127.0, 127.0) as i8)
                .collect();
            (q, scale)
        };
        let qbias = |b: &[T], scale: f64| {
            b.iter()
                .map(|v| {
                    (v.to_f64_lossy() / scale)
                        .round()
                        .clamp(i32::MIN as f64, i32::MAX as f64) as i32
                })
                .collect()
        };
        let peak = (0..calibration.len())
            .flat_map(|i| self.hidden_of(&pixels(calibration.image(i))))
            .fold(0.0f64, |m, v| m.max(v.to_f64_lossy()));
        let hidden_scale = if peak > 0.0 { peak / 255.0 } else { 1.0 };
        let input_scale = 1.0 / 255.0;
        let (q1, s1) = quant(&self.w1);
        let (q2, s2) = quant(&self.w2);
        let l1 = Affine {
            weights: q1,
            bias: qbias(&self.b1, input_scale * s1),
            scale_in: input_scale,
            weight_scale: s1,
            scale_out: Some(hidden_scale),
            tag: Some("D1".into()),
        };
        let l2 = Affine {
            weights: q2,
            bias: qbias(&self.b2, hidden_scale * s2),
            scale_in: hidden_scale,
            weight_scale: s2,
            scale_out: None,
            tag: Some("D2".into()),
        };
        QuantizedNetwork {
            input_shape: vec![self.inputs],
            classes: self.outputs,
            layers: vec![
                Layer::Dense {
                    inputs: self.inputs,
                    outputs: self.hidden,
                    affine: l1,
                },
                Layer::Relu,
                Layer::Dense {
                    inputs: self.hidden,
                    outputs: self.outputs,
                    affine: l2,
                },
            ],
        }
    }
}

/// Full-batch gradient descent on softmax cross-entropy.
pub fn train_mlp<T: Scalar>(data: &Dataset, cfg: &TrainConfig) -> FloatMlp<T> {
    let mut m = FloatMlp::<T>::init(data.features(), cfg.hidden, data.classes(), cfg.seed);
    let xs: Vec<Vec<T>> = (0..data.len()).map(|i| pixels(data.image(i))).collect();
    let n = T::from_usize(data.len().max(1)).unwrap();
    let lr = T::lit(cfg.learning_rate);
    let (ni, nh, no) = (m.inputs, m.hidden, m.outputs);
    for _ in 0..cfg.epochs {
        let mut gw1 = vec![T::zero(); nh * ni];
        let mut gb1 = vec![T::zero(); nh];
        let mut gw2 = vec![T::zero(); no * nh];
        let mut gb2 = vec![T::zero(); no];
        for (i, x) in xs.iter().enumerate() {
            let pre = affine(&m.w1, &m.b1, x, nh);
            let h: Vec<T> = pre.iter().map(|v| v.max(T::zero())).collect();
            let z = affine(&m.w2, &m.b2, &h, no);
            let top = z.iter().copied().fold(T::neg_infinity(), T::max);
            let e: Vec<T> = z.iter().map(|&v| (v - top).exp()).collect();
            let sum = e.iter().copied().fold(T::zero(), |a, b| a + b);
            let label = data.label(i) as usize;
            let dz: Vec<T> = (0..no)
                .map(|o| e[o] / sum - if o == label { T::one() } else { T::zero() })
                .collect();
            let mut dh = vec![T::zero(); nh];
            for o in 0..no {
                gb2[o] = gb2[o] + dz[o];
                for j in 0..nh {
                    gw2[o * nh + j] = gw2[o * nh + j] + dz[o] * h[j];
                    dh[j] = dh[j] + dz[o] * m.w2[o * nh + j];
                }
            }
            for j in 0..nh {
                if pre[j] <= T::zero() {
                    continue;
                }
                gb1[j] = gb1[j] + dh[j];
                for k in 0..ni {
                    gw1[j * ni + k] = gw1[j * ni + k] + dh[j] * x[k];
                }
            }
        }
        let step = |p: &mut [T], g: &[T]| p.iter_mut().zip(g).for_each(|(p, &g)| *p = *p - lr * g / n);
        step(&mut m.w1, &gw1);
        step(&mut m.b1, &gb1);
        step(&mut m.w2, &gw2);
        step(&mut m.b2, &gb2);
    }
    m
}

#[derive(Clone, Debug)]
pub struct TinyNet<T> {
    pub network: QuantizedNetwork,
    pub model: FloatMlp<T>,
    pub train: Dataset,
    pub test: Dataset,
    /// Real-arithmetic accuracy on the test split, percent.
    pub float_accuracy: f64,
    /// Exact-LUT quantized accuracy on the test split, percent.
    pub quantized_accuracy: f64,
}

/// Generates the blob data, trains, quantizes and scores the result.
pub fn train_tiny_net<T: Scalar>(spec: &BlobSpec, cfg: &TrainConfig) -> TinyNet<T> {
    let (train, test) = synthetic_blobs(spec);
    let model = train_mlp::<T>(&train, cfg);
    let network = model.quantize(&train);
    let float_accuracy = model.accuracy(&test);
    let exact = MultiplierLut::exact(8);
    let quantized_accuracy =
        accuracy(&network, &test, &LutAssignment::uniform(&network, &exact)).expect("quantized net matches its data");
    TinyNet {
        network,
        model,
        train,
        test,
        float_accuracy,
        quantized_accuracy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_learns_and_is_deterministic() {
        let spec = BlobSpec {
            train_per_class: 40,
            test_per_class: 40,
            ..Default::default()
        };
        let cfg = TrainConfig {
            epochs: 60,
            ..Default::default()
        };
        let a = train_tiny_net::<f64>(&spec, &cfg);
        let b = train_tiny_net::<f64>(&spec, &cfg);
        assert_eq!(a.network, b.network);
        a.network.validate().unwrap();
        assert!(a.float_accuracy > 50.0, "{}", a.float_accuracy);
        let c = train_tiny_net::<f32>(&spec, &cfg);
        c.network.validate().unwrap();
    }
}
