//! Integer inference with table-driven multiplication.

use rayon::prelude::*;

use super::dataset::Dataset;
use super::lut::MultiplierLut;
use super::network::{Affine, ConvShape, Layer, QuantizedNetwork};
use super::ResilienceError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inference {
    pub class: usize,
    pub logits: Vec<i32>,
}

/// Round half away from zero, then clamp to an unsigned byte.
#[inline]
pub fn requantize(x: f64) -> i32 {
    x.round().clamp(0.0, 255.0) as i32
}

/// First index of the maximum.
pub fn argmax(v: &[i32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

trait Multiply {
    fn mul(&self, slot: usize, w: i8, a: i32) -> i32;
}

struct Exact;

impl Multiply for Exact {
    #[inline]
    fn mul(&self, _: usize, w: i8, a: i32) -> i32 {
        w as i32 * a
    }
}

struct Tables<'a>(&'a [&'a MultiplierLut]);

impl Multiply for Tables<'_> {
    #[inline]
    fn mul(&self, slot: usize, w: i8, a: i32) -> i32 {
        debug_assert!((0..256).contains(&a));
        let p = self.0[slot].get(w.unsigned_abs() as u32, a as u32) as i32;
        if w < 0 {
            -p
        } else {
            p
        }
    }
}

/// Multiplier choice per multiplying layer.
#[derive(Clone, Debug)]
pub struct LutAssignment<'a> {
    /// One entry per network layer; `None` for layers that do not multiply.
    per_layer: Vec<Option<&'a MultiplierLut>>,
}

impl<'a> LutAssignment<'a> {
    /// The same table in every multiplying layer.
    pub fn uniform(net: &QuantizedNetwork, lut: &'a MultiplierLut) -> Self {
        let per_layer = net.layers.iter().map(|l| (l.mults() > 0).then_some(lut)).collect();
        LutAssignment { per_layer }
    }

    /// `base` everywhere except layer `layer`, which gets `lut`.
    pub fn single(net: &QuantizedNetwork, base: &'a MultiplierLut, layer: usize, lut: &'a MultiplierLut) -> Self {
        let mut a = Self::uniform(net, base);
        if a.per_layer.get(layer).is_some_and(Option::is_some) {
            a.per_layer[layer] = Some(lut);
        }
        a
    }

    fn check(&self) -> Result<(), ResilienceError> {
        for lut in self.per_layer.iter().flatten() {
            if lut.bits() != 8 {
                return Err(ResilienceError::LutWidth(lut.bits()));
            }
        }
        Ok(())
    }
}

fn conv<M: Multiply>(x: &[i32], s: &ConvShape, a: &Affine, slot: usize, m: &M) -> Vec<i64> {
    let (oh, ow) = s.out_hw();
    let k = s.kernel;
    let mut out = Vec::with_capacity(s.out_channels * oh * ow);
    for oc in 0..s.out_channels {
        let wbase = oc * s.in_channels * k * k;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = a.bias[oc] as i64;
                for ic in 0..s.in_channels {
                    for ky in 0..k {
                        let iy = (oy * s.stride + ky) as isize - s.padding as isize;
                        if iy < 0 || iy >= s.in_h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * s.stride + kx) as isize - s.padding as isize;
                            if ix < 0 || ix >= s.in_w as isize {
                                continue;
                            }
                            let v = x[(ic * s.in_h + iy as usize) * s.in_w + ix as usize];
                            let w = a.weights[wbase + (ic * k + ky) * k + kx];
                            acc += m.mul(slot, w, v) as i64;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

fn dense<M: Multiply>(x: &[i32], outputs: usize, a: &Affine, slot: usize, m: &M) -> Vec<i64> {
    let n = x.len();
    (0..outputs)
        .map(|o| {
            let row = &a.weights[o * n..(o + 1) * n];
            row.iter()
                .zip(x)
                .fold(a.bias[o] as i64, |acc, (&w, &v)| acc + m.mul(slot, w, v) as i64)
        })
        .collect()
}

/// Saturates the 64-bit running sum to the 32-bit accumulator.
fn acc32(v: i64) -> i32 {
    v.clamp(i32::MIN as i64, i32::MAX as i64) as i32
}

fn finish(acc: Vec<i64>, a: &Affine) -> Vec<i32> {
    match a.multiplier() {
        Some(m) => acc.into_iter().map(|v| requantize(acc32(v) as f64 * m)).collect(),
        None => acc.into_iter().map(acc32).collect(),
    }
}

fn forward<M: Multiply>(net: &QuantizedNetwork, input: &[u8], m: &M) -> Vec<i32> {
    let mut history: Vec<Vec<i32>> = Vec::with_capacity(net.layers.len());
    let mut shape = net.input_shape.clone();
    let mut x: Vec<i32> = input.iter().map(|&v| v as i32).collect();
    for (i, layer) in net.layers.iter().enumerate() {
        x = match layer {
            Layer::Conv2d { shape: s, affine } => {
                let (oh, ow) = s.out_hw();
                shape = vec![s.out_channels, oh, ow];
                finish(conv(&x, s, affine, i, m), affine)
            }
            Layer::Dense { outputs, affine, .. } => {
                shape = vec![*outputs];
                finish(dense(&x, *outputs, affine, i, m), affine)
            }
            Layer::Relu => x.into_iter().map(|v| v.max(0)).collect(),
            Layer::AvgPool { size } => {
                let (c, h, w) = (shape[0], shape[1], shape[2]);
                let (oh, ow) = (h / size, w / size);
                let count = (size * size) as f64;
                let mut out = Vec::with_capacity(c * oh * ow);
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut sum = 0i64;
                            for dy in 0..*size {
                                for dx in 0..*size {
                                    sum += x[(ch * h + oy * size + dy) * w + ox * size + dx] as i64;
                                }
                            }
                            out.push((sum as f64 / count).round() as i32);
                        }
                    }
                }
                shape = vec![c, oh, ow];
                out
            }
            Layer::ResidualAdd { from, skip_scale } => {
                let skip = &history[*from];
                x.iter()
                    .zip(skip)
                    .map(|(&a, &b)| requantize(a as f64 + skip_scale * b as f64))
                    .collect()
            }
            Layer::Flatten => {
                shape = vec![x.len()];
                x
            }
        };
        history.push(x.clone());
    }
    x
}

fn check_input(net: &QuantizedNetwork, input: &[u8]) -> Result<(), ResilienceError> {
    if input.len() != net.input_len() {
        return Err(ResilienceError::Shape(format!(
            "input has {} values, network expects {:?}",
            input.len(),
            net.input_shape
        )));
    }
    Ok(())
}

fn result(logits: Vec<i32>) -> Inference {
    Inference {
        class: argmax(&logits),
        logits,
    }
}

/// Every weight x activation product is `sign(w) * lut[|w|][a]`.
pub fn infer(net: &QuantizedNetwork, input: &[u8], lut: &MultiplierLut) -> Result<Inference, ResilienceError> {
    infer_assigned(net, input, &LutAssignment::uniform(net, lut))
}

pub fn infer_assigned(
    net: &QuantizedNetwork,
    input: &[u8],
    luts: &LutAssignment<'_>,
) -> Result<Inference, ResilienceError> {
    luts.check()?;
    check_input(net, input)?;
    Ok(result(run_tables(net, input, luts)))
}

fn run_tables(net: &QuantizedNetwork, input: &[u8], luts: &LutAssignment<'_>) -> Vec<i32> {
    // Non-multiplying slots are never read; fill them with any table.
    let any = luts.per_layer.iter().flatten().next().copied();
    match any {
        Some(fallback) => {
            let tables: Vec<&MultiplierLut> = luts.per_layer.iter().map(|l| l.unwrap_or(fallback)).collect();
            forward(net, input, &Tables(&tables))
        }
        None => forward(net, input, &Exact),
    }
}

/// Same arithmetic with native multiplication.
pub fn infer_reference(net: &QuantizedNetwork, input: &[u8]) -> Result<Inference, ResilienceError> {
    check_input(net, input)?;
    Ok(result(forward(net, input, &Exact)))
}

/// Top-1 accuracy in percent over the whole dataset.
pub fn accuracy(net: &QuantizedNetwork, data: &Dataset, luts: &LutAssignment<'_>) -> Result<f64, ResilienceError> {
    luts.check()?;
    if data.features() != net.input_len() {
        return Err(ResilienceError::Shape(format!(
            "dataset has {} features, network expects {}",
            data.features(),
            net.input_len()
        )));
    }
    let correct: usize = (0..data.len())
        .into_par_iter()
        .map(|i| usize::from(argmax(&run_tables(net, data.image(i), luts)) == data.label(i) as usize))
        .sum();
    Ok(100.0 * correct as f64 / data.len().max(1) as f64)
}
