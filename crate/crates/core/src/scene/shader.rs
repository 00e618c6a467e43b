//! Weights and forward pass of the tiny view-dependent shading network.

use glam::DVec3;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const HIDDEN_UNITS: usize = 16;
pub const DEFAULT_FREQUENCIES: u32 = 4;
/// 3 diffuse + 4 feature channels.
pub const APPEARANCE_INPUTS: usize = 7;
pub const OUTPUTS: usize = 3;

/// One affine layer; `weights` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>, relu: bool) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let v = b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            out.push(if relu { v.max(0.0) } else { v });
        }
    }
}

/// Three dense layers (two ReLU hidden layers of 16 units, linear output)
/// mapping diffuse color, specular feature and the encoded view direction to
/// a residual color.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeferredShaderWeights {
    pub frequencies: u32,
    pub layers: Vec<DenseLayer>,
}

pub fn input_width(frequencies: u32) -> usize {
    APPEARANCE_INPUTS + 6 * frequencies as usize
}

/// `sin` then `cos` of the direction scaled by `2^k`, for `k = 0..frequencies`.
pub fn positional_encoding(d: DVec3, frequencies: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(6 * frequencies as usize);
    for k in 0..frequencies {
        let s = d * f64::from(1u32 << k);
        out.extend([s.x.sin(), s.y.sin(), s.z.sin()]);
        out.extend([s.x.cos(), s.y.cos(), s.z.cos()]);
    }
    out
}

impl DeferredShaderWeights {
    /// All-zero network: the residual vanishes and shading returns the diffuse color.
    pub fn zeros(frequencies: u32) -> Self {
        let n = input_width(frequencies);
        DeferredShaderWeights {
            frequencies,
            layers: vec![
                DenseLayer::zeros(n, HIDDEN_UNITS),
                DenseLayer::zeros(HIDDEN_UNITS, HIDDEN_UNITS),
                DenseLayer::zeros(HIDDEN_UNITS, OUTPUTS),
            ],
        }
    }

    /// Uniform weights in `[-scale, scale]`, deterministic in `seed`.
    pub fn random(seed: u64, scale: f64, frequencies: u32) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::zeros(frequencies);
        if scale > 0.0 {
            for layer in &mut w.layers {
                for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                    *v = rng.random_range(-scale..=scale);
                }
            }
        }
        w
    }

    /// Element-wise mean of several weight sets with identical shapes.
    pub fn average(sets: &[&DeferredShaderWeights]) -> Result<Self> {
        let first = sets
            .first()
            .ok_or_else(|| Error::InvalidWeights("nothing to average".into()))?;
        let mut out = (*first).clone();
        for s in &sets[1..] {
            if s.frequencies != out.frequencies || s.layers.len() != out.layers.len() {
                return Err(Error::InvalidWeights("cannot average differing shapes".into()));
            }
            for (a, b) in out.layers.iter_mut().zip(&s.layers) {
                if a.weights.len() != b.weights.len() || a.bias.len() != b.bias.len() {
                    return Err(Error::InvalidWeights("cannot average differing shapes".into()));
                }
                a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
                a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
            }
        }
        let inv = 1.0 / sets.len() as f64;
        for l in &mut out.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= inv);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWeights(m));
        if self.layers.len() != 3 {
            return bad(format!("expected 3 layers, found {}", self.layers.len()));
        }
        let widths = [
            input_width(self.frequencies),
            HIDDEN_UNITS,
            HIDDEN_UNITS,
            OUTPUTS,
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.inputs != widths[i] || layer.outputs != widths[i + 1] {
                return bad(format!(
                    "layer {i} is {}x{}, expected {}x{}",
                    layer.outputs,
                    layer.inputs,
                    widths[i + 1],
                    widths[i]
                ));
            }
            if layer.weights.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return bad(format!("layer {i} has inconsistent buffer sizes"));
            }
            if !layer
                .weights
                .iter()
                .chain(&layer.bias)
                .all(|v| v.is_finite())
            {
                return bad(format!("layer {i} holds non-finite values"));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|&v| v == 0.0))
    }

    /// Network output for the given appearance and view direction.
    pub fn residual(&self, diffuse: DVec3, feature: &[f64; 4], dir: DVec3) -> DVec3 {
        let mut input = Vec::with_capacity(input_width(self.frequencies));
        input.extend(diffuse.to_array());
        input.extend(feature);
        input.extend(positional_encoding(dir, self.frequencies));

        let mut a = Vec::with_capacity(HIDDEN_UNITS);
        let mut b = Vec::with_capacity(HIDDEN_UNITS);
        self.layers[0].forward(&input, &mut a, true);
        self.layers[1].forward(&a, &mut b, true);
        self.layers[2].forward(&b, &mut a, false);
        DVec3::new(a[0], a[1], a[2])
    }

    /// Diffuse color plus the view-dependent residual, clamped to `[0, 1]`.
    pub fn shade(&self, diffuse: DVec3, feature: &[f64; 4], dir: DVec3) -> DVec3 {
        (diffuse + self.residual(diffuse, feature, dir)).clamp(DVec3::ZERO, DVec3::ONE)
    }
}
