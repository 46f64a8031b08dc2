//! Quantized feed-forward networks and their on-disk format.
//!
//! See `docs/network-format.md` for the byte layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ResilienceError;
use crate::NETWORK_FORMAT_VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_h: usize,
    pub in_w: usize,
}

impl ConvShape {
    pub fn out_hw(&self) -> (usize, usize) {
        let f = |x: usize| (x + 2 * self.padding).saturating_sub(self.kernel) / self.stride + 1;
        (f(self.in_h), f(self.in_w))
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn mults(&self) -> u64 {
        let (oh, ow) = self.out_hw();
        (self.weight_len() * oh * ow) as u64
    }
}

/// Integer weights and the scales that map the accumulator back to 8 bits.
///
/// Output value = round_half_away(acc * scale_in * weight_scale / scale_out)
/// clamped to [0, 255]; a layer without `scale_out` emits the raw
/// accumulator (only allowed as the last layer, giving logits).
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub weights: Vec<i8>,
    pub bias: Vec<i32>,
    pub scale_in: f64,
    pub weight_scale: f64,
    pub scale_out: Option<f64>,
    pub tag: Option<String>,
}

impl Affine {
    pub fn multiplier(&self) -> Option<f64> {
        self.scale_out.map(|s| self.scale_in * self.weight_scale / s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    /// Weights in `[out][in][kh][kw]` order.
    Conv2d {
        shape: ConvShape,
        affine: Affine,
    },
    /// Weights in `[out][in]` order.
    Dense {
        inputs: usize,
        outputs: usize,
        affine: Affine,
    },
    Relu,
    /// Non-overlapping `size x size` mean, rounded half away from zero.
    AvgPool {
        size: usize,
    },
    /// Adds `skip_scale` times the output of layer `from`, requantized like
    /// an affine output.
    ResidualAdd {
        from: usize,
        skip_scale: f64,
    },
    Flatten,
}

impl Layer {
    pub fn affine(&self) -> Option<&Affine> {
        match self {
            Layer::Conv2d { affine, .. } | Layer::Dense { affine, .. } => Some(affine),
            _ => None,
        }
    }

    pub fn mults(&self) -> u64 {
        match self {
            Layer::Conv2d { shape, .. } => shape.mults(),
            Layer::Dense { inputs, outputs, .. } => (inputs * outputs) as u64,
            _ => 0,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d { .. } => "conv2d",
            Layer::Dense { .. } => "dense",
            Layer::Relu => "relu",
            Layer::AvgPool { .. } => "avgpool",
            Layer::ResidualAdd { .. } => "residual_add",
            Layer::Flatten => "flatten",
        }
    }
}

/// Activation shape: `[n]` or `[c, h, w]`.
pub type Shape = Vec<usize>;

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedNetwork {
    pub input_shape: Shape,
    pub classes: usize,
    pub layers: Vec<Layer>,
}

fn shape_err(i: usize, m: impl std::fmt::Display) -> ResilienceError {
    ResilienceError::Shape(format!("layer {i}: {m}"))
}

impl QuantizedNetwork {
    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Output shape of every layer; fails on the first inconsistency.
    pub fn shapes(&self) -> Result<Vec<Shape>, ResilienceError> {
        if self.input_shape.is_empty() || self.input_shape.len() == 2 || self.input_shape.len() > 3 {
            return Err(ResilienceError::Shape(format!(
                "input shape {:?} must be [n] or [c, h, w]",
                self.input_shape
            )));
        }
        let mut out: Vec<Shape> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = out.last().unwrap_or(&self.input_shape).clone();
            if let Some(a) = layer.affine() {
                check_affine(i, a, i == last)?;
            }
            let next = match layer {
                Layer::Conv2d { shape, affine } => {
                    if cur != [shape.in_channels, shape.in_h, shape.in_w] {
                        return Err(shape_err(
                            i,
                            format!(
                                "conv expects {:?}, got {cur:?}",
                                [shape.in_channels, shape.in_h, shape.in_w]
                            ),
                        ));
                    }
                    if shape.kernel == 0
                        || shape.stride == 0
                        || shape.kernel > shape.in_h + 2 * shape.padding
                        || shape.kernel > shape.in_w + 2 * shape.padding
                    {
                        return Err(shape_err(i, "bad kernel geometry"));
                    }
                    if affine.weights.len() != shape.weight_len() || affine.bias.len() != shape.out_channels {
                        return Err(shape_err(i, "weight or bias length does not match the conv shape"));
                    }
                    let (oh, ow) = shape.out_hw();
                    vec![shape.out_channels, oh, ow]
                }
                Layer::Dense {
                    inputs,
                    outputs,
                    affine,
                } => {
                    if cur != [*inputs] {
                        return Err(shape_err(i, format!("dense expects [{inputs}], got {cur:?}")));
                    }
                    if affine.weights.len() != inputs * outputs || affine.bias.len() != *outputs {
                        return Err(shape_err(i, "weight or bias length does not match the dense shape"));
                    }
                    vec![*outputs]
                }
                Layer::Relu => cur,
                Layer::AvgPool { size } => {
                    if cur.len() != 3 || *size == 0 || cur[1] < *size || cur[2] < *size {
                        return Err(shape_err(i, format!("avgpool {size} does not fit {cur:?}")));
                    }
                    vec![cur[0], cur[1] / size, cur[2] / size]
                }
                Layer::ResidualAdd { from, skip_scale } => {
                    if *from >= i {
                        return Err(shape_err(i, format!("residual source {from} is not an earlier layer")));
                    }
                    if out[*from] != cur {
                        return Err(shape_err(
                            i,
                            format!("residual shapes differ: {:?} vs {cur:?}", out[*from]),
                        ));
                    }
                    if !(skip_scale.is_finite() && *skip_scale >= 0.0) {
                        return Err(shape_err(i, "skip_scale must be finite and non-negative"));
                    }
                    cur
                }
                Layer::Flatten => vec![cur.iter().product()],
            };
            out.push(next);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ResilienceError> {
        let shapes = self.shapes()?;
        let out = shapes.last().cloned().unwrap_or_else(|| self.input_shape.clone());
        if out != [self.classes] || self.classes == 0 {
            return Err(ResilienceError::Shape(format!(
                "network output {out:?} does not match {} classes",
                self.classes
            )));
        }
        if self.total_mults() == 0 {
            return Err(ResilienceError::Shape("network has no multiplications".into()));
        }
        Ok(())
    }

    pub fn mult_counts(&self) -> Vec<u64> {
        self.layers.iter().map(Layer::mults).collect()
    }

    pub fn total_mults(&self) -> u64 {
        self.mult_counts().iter().sum()
    }

    /// Indices of layers that multiply.
    pub fn mult_layers(&self) -> Vec<usize> {
        (0..self.layers.len()).filter(|&i| self.layers[i].mults() > 0).collect()
    }

    /// Share of all multiplications performed by layer `i`.
    pub fn mult_fraction(&self, i: usize) -> f64 {
        self.layers[i].mults() as f64 / self.total_mults() as f64
    }

    /// Display tag of layer `i`: the stored tag or `L{i}`.
    pub fn tag(&self, i: usize) -> String {
        self.layers[i]
            .affine()
            .and_then(|a| a.tag.clone())
            .unwrap_or_else(|| format!("L{i}"))
    }

    /// Writes `path` (JSON) and the weight blob next to it with extension `.bin`.
    pub fn save(&self, path: &Path) -> Result<(), ResilienceError> {
        self.validate()?;
        let blob_path = path.with_extension("bin");
        let blob_name = blob_path
            .file_name()
            .and_then(|s| s.to_str())
            .ok_or_else(|| ResilienceError::Format("bad path".into()))?
            .to_string();
        let (envelope, blob) = self.encode(blob_name);
        let mut text = serde_json::to_string_pretty(&envelope)?;
        text.push('\n');
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(&blob_path, blob)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ResilienceError> {
        let text = fs::read_to_string(path)?;
        let envelope: Envelope = serde_json::from_str(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let blob = fs::read(dir.join(&envelope.blob))?;
        Self::decode(envelope, &blob)
    }

    fn encode(&self, blob: String) -> (Envelope, Vec<u8>) {
        let mut bytes = Vec::new();
        let mut put = |data: &[u8]| {
            let r = BlobRef {
                offset: bytes.len() as u64,
                length: data.len() as u64,
            };
            bytes.extend_from_slice(data);
            r
        };
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mults = layer.mults();
            let mut refs = |a: &Affine| {
                let w: Vec<u8> = a.weights.iter().map(|&x| x as u8).collect();
                let b: Vec<u8> = a.bias.iter().flat_map(|x| x.to_le_bytes()).collect();
                (put(&w), put(&b))
            };
            layers.push(match layer {
                Layer::Conv2d { shape, affine } => {
                    let (weights_ref, bias_ref) = refs(affine);
                    LayerJson::Conv2d {
                        shape: *shape,
                        params: AffineJson::of(affine, weights_ref, bias_ref, mults),
                    }
                }
                Layer::Dense {
                    inputs,
                    outputs,
                    affine,
                } => {
                    let (weights_ref, bias_ref) = refs(affine);
                    LayerJson::Dense {
                        shape: DenseShape {
                            inputs: *inputs,
                            outputs: *outputs,
                        },
                        params: AffineJson::of(affine, weights_ref, bias_ref, mults),
                    }
                }
                Layer::Relu => LayerJson::Relu,
                Layer::AvgPool { size } => LayerJson::AvgPool { size: *size },
                Layer::ResidualAdd { from, skip_scale } => LayerJson::ResidualAdd {
                    from: *from,
                    skip_scale: *skip_scale,
                },
                Layer::Flatten => LayerJson::Flatten,
            });
        }
        let envelope = Envelope {
            version: NETWORK_FORMAT_VERSION,
            input_shape: self.input_shape.clone(),
            classes: self.classes,
            total_mults: self.total_mults(),
            blob: blob.into(),
            blob_len: bytes.len() as u64,
            layers,
        };
        (envelope, bytes)
    }

    fn decode(env: Envelope, blob: &[u8]) -> Result<Self, ResilienceError> {
        let bad = |m: String| Err(ResilienceError::Format(m));
        if env.version != NETWORK_FORMAT_VERSION {
            return bad(format!("unsupported network format version {}", env.version));
        }
        if env.blob_len != blob.len() as u64 {
            return bad(format!("blob is {} bytes, envelope says {}", blob.len(), env.blob_len));
        }
        let slice = |r: &BlobRef| -> Result<&[u8], ResilienceError> {
            let end = r.offset.checked_add(r.length).filter(|&e| e <= blob.len() as u64);
            match end {
                Some(e) => Ok(&blob[r.offset as usize..e as usize]),
                None => Err(ResilienceError::Format(format!(
                    "blob reference {}+{} out of range",
                    r.offset, r.length
                ))),
            }
        };
        let affine = |p: &AffineJson| -> Result<Affine, ResilienceError> {
            let w = slice(&p.weights_ref)?;
            let b = slice(&p.bias_ref)?;
            if b.len() % 4 != 0 {
                return Err(ResilienceError::Format("bias length is not a multiple of 4".into()));
            }
            Ok(Affine {
                weights: w.iter().map(|&x| x as i8).collect(),
                bias: b
                    .chunks_exact(4)
                    .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
                scale_in: p.scale_in,
                weight_scale: p.weight_scale,
                scale_out: p.scale_out,
                tag: p.tag.clone(),
            })
        };
        let mut layers = Vec::with_capacity(env.layers.len());
        let mut stored = Vec::with_capacity(env.layers.len());
        for l in &env.layers {
            let (layer, mults) = match l {
                LayerJson::Conv2d { shape, params } => (
                    Layer::Conv2d {
                        shape: *shape,
                        affine: affine(params)?,
                    },
                    params.mults,
                ),
                LayerJson::Dense { shape, params } => (
                    Layer::Dense {
                        inputs: shape.inputs,
                        outputs: shape.outputs,
                        affine: affine(params)?,
                    },
                    params.mults,
                ),
                LayerJson::Relu => (Layer::Relu, 0),
                LayerJson::AvgPool { size } => (Layer::AvgPool { size: *size }, 0),
                LayerJson::ResidualAdd { from, skip_scale } => (
                    Layer::ResidualAdd {
                        from: *from,
                        skip_scale: *skip_scale,
                    },
                    0,
                ),
                LayerJson::Flatten => (Layer::Flatten, 0),
            };
            layers.push(layer);
            stored.push(mults);
        }
        let net = QuantizedNetwork {
            input_shape: env.input_shape,
            classes: env.classes,
            layers,
        };
        net.validate()?;
        for (i, (&s, c)) in stored.iter().zip(net.mult_counts()).enumerate() {
            if s != c {
                return bad(format!(
                    "layer {i}: stored multiplication count {s} but shapes give {c}"
                ));
            }
        }
        if env.total_mults != net.total_mults() {
            return bad(format!(
                "stored total multiplications {} but layers give {}",
                env.total_mults,
                net.total_mults()
            ));
        }
        Ok(net)
    }
}

fn check_affine(i: usize, a: &Affine, is_last: bool) -> Result<(), ResilienceError> {
    if a.weights.contains(&i8::MIN) {
        return Err(shape_err(i, "weight magnitude exceeds 127"));
    }
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(a.scale_in) || !positive(a.weight_scale) || a.scale_out.is_some_and(|s| !positive(s)) {
        return Err(shape_err(i, "scales must be positive and finite"));
    }
    if a.scale_out.is_none() && !is_last {
        return Err(shape_err(i, "only the last layer may skip requantization"));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    version: u32,
    input_shape: Shape,
    classes: usize,
    total_mults: u64,
    blob: PathBuf,
    blob_len: u64,
    layers: Vec<LayerJson>,
}

#[derive(Serialize, Deserialize)]
struct BlobRef {
    offset: u64,
    length: u64,
}

#[derive(Serialize, Deserialize)]
struct DenseShape {
    inputs: usize,
    outputs: usize,
}

#[derive(Serialize, Deserialize)]
struct AffineJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tag: Option<String>,
    scale_in: f64,
    weight_scale: f64,
    scale_out: Option<f64>,
    weights_ref: BlobRef,
    bias_ref: BlobRef,
    mults: u64,
}

impl AffineJson {
    fn of(a: &Affine, weights_ref: BlobRef, bias_ref: BlobRef, mults: u64) -> Self {
        AffineJson {
            tag: a.tag.clone(),
            scale_in: a.scale_in,
            weight_scale: a.weight_scale,
            scale_out: a.scale_out,
            weights_ref,
            bias_ref,
            mults,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LayerJson {
    Conv2d {
        shape: ConvShape,
        #[serde(flatten)]
        params: AffineJson,
    },
    Dense {
        shape: DenseShape,
        #[serde(flatten)]
        params: AffineJson,
    },
    Relu,
    AvgPool {
        size: usize,
    },
    ResidualAdd {
        from: usize,
        skip_scale: f64,
    },
    Flatten,
}
