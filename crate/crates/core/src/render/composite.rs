//! Front-to-back accumulation inside a block, across blocks, and over a
//! single merged sample list.

use glam::DVec3;

use crate::scene::{BlockId, DeferredShaderWeights};
use crate::{Error, Result};

/// One ray-march sample. `alpha = 1 - exp(-sigma * delta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePoint {
    pub t: f64,
    pub delta: f64,
    pub sigma: f64,
    pub diffuse: DVec3,
    pub feature: [f64; 4],
    pub alpha: f64,
}

impl SamplePoint {
    pub fn new(t: f64, delta: f64, sigma: f64, diffuse: DVec3, feature: [f64; 4]) -> Self {
        SamplePoint {
            t,
            delta,
            sigma,
            diffuse,
            feature,
            alpha: 1.0 - (-sigma * delta).exp(),
        }
    }

    /// Sample with a prescribed opacity; `sigma` is back-derived for `delta = 1`.
    pub fn with_alpha(t: f64, alpha: f64, diffuse: DVec3, feature: [f64; 4]) -> Self {
        SamplePoint {
            t,
            delta: 1.0,
            sigma: -(1.0 - alpha).ln(),
            diffuse,
            feature,
            alpha,
        }
    }
}

/// Integration result of a ray over one block, premultiplied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RaySegmentResult {
    pub block: BlockId,
    pub entry_t: f64,
    pub diffuse: DVec3,
    pub feature: [f64; 4],
    pub alpha: f64,
    /// Shaded color, present after deferred shading.
    pub color: Option<DVec3>,
    /// Samples evaluated.
    pub evaluated: u32,
    /// Samples skipped as empty space.
    pub skipped: u32,
}

impl RaySegmentResult {
    pub fn empty(block: BlockId, entry_t: f64) -> Self {
        RaySegmentResult {
            block,
            entry_t,
            diffuse: DVec3::ZERO,
            feature: [0.0; 4],
            alpha: 0.0,
            color: None,
            evaluated: 0,
            skipped: 0,
        }
    }

    /// Applies the deferred shading network to the accumulated appearance.
    pub fn shade(&mut self, dir: DVec3, weights: &DeferredShaderWeights) -> Result<DVec3> {
        let c = deferred_shade(self, dir, weights)?;
        self.color = Some(c);
        Ok(c)
    }
}

/// Running front-to-back sums.
#[derive(Clone, Copy, Debug)]
pub struct Accumulator {
    pub diffuse: DVec3,
    pub feature: [f64; 4],
    pub alpha: f64,
    pub transmittance: f64,
}

impl Default for Accumulator {
    fn default() -> Self {
        Accumulator {
            diffuse: DVec3::ZERO,
            feature: [0.0; 4],
            alpha: 0.0,
            transmittance: 1.0,
        }
    }
}

impl Accumulator {
    #[inline]
    pub fn add(&mut self, s: &SamplePoint) {
        let w = self.transmittance * s.alpha;
        self.diffuse += w * s.diffuse;
        for (f, v) in self.feature.iter_mut().zip(s.feature) {
            *f += w * v;
        }
        self.alpha += w;
        self.transmittance *= 1.0 - s.alpha;
    }
}

/// Integrates a block's samples (already in ray order).
pub fn accumulate_segment(
    block: BlockId,
    entry_t: f64,
    samples: &[SamplePoint],
    min_transmittance: f64,
) -> RaySegmentResult {
    let mut acc = Accumulator::default();
    let mut evaluated = 0;
    for s in samples {
        acc.add(s);
        evaluated += 1;
        if acc.transmittance < min_transmittance {
            break;
        }
    }
    RaySegmentResult {
        block,
        entry_t,
        diffuse: acc.diffuse,
        feature: acc.feature,
        alpha: acc.alpha.min(1.0),
        color: None,
        evaluated,
        skipped: 0,
    }
}

/// `clamp(C_d + residual(C_d, F, PE(d)), 0, 1)`.
pub fn deferred_shade(
    seg: &RaySegmentResult,
    dir: DVec3,
    weights: &DeferredShaderWeights,
) -> Result<DVec3> {
    weights.validate()?;
    if (dir.length() - 1.0).abs() > crate::geometry::UNIT_TOLERANCE {
        return Err(Error::InvalidConfig("view direction must be unit length".into()));
    }
    Ok(weights.shade(seg.diffuse, &seg.feature, dir))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Composite {
    pub color: DVec3,
    pub feature: [f64; 4],
    pub alpha: f64,
}

fn check_alpha(a: f64) -> Result<()> {
    if (0.0..=1.0).contains(&a) {
        Ok(())
    } else {
        Err(Error::InvalidOpacity(a))
    }
}

/// Blends shaded segment colors front to back:
/// `C = sum_k prod_{j<k}(1 - a_j) C_k`, and the same weights for opacity.
/// Segments without a shaded color fall back to their diffuse color.
pub fn composite_blocks(segments: &[RaySegmentResult]) -> Result<Composite> {
    let mut color = DVec3::ZERO;
    let mut alpha = 0.0;
    let mut t = 1.0;
    for s in segments {
        check_alpha(s.alpha)?;
        color += t * s.color.unwrap_or(s.diffuse);
        alpha += t * s.alpha;
        t *= 1.0 - s.alpha;
    }
    Ok(Composite {
        color,
        feature: [0.0; 4],
        alpha: alpha.min(1.0),
    })
}

/// Same blending applied to the unshaded diffuse color and feature channels.
pub fn composite_appearance(segments: &[RaySegmentResult]) -> Result<Composite> {
    let mut color = DVec3::ZERO;
    let mut feature = [0.0; 4];
    let mut alpha = 0.0;
    let mut t = 1.0;
    for s in segments {
        check_alpha(s.alpha)?;
        color += t * s.diffuse;
        for (f, v) in feature.iter_mut().zip(s.feature) {
            *f += t * v;
        }
        alpha += t * s.alpha;
        t *= 1.0 - s.alpha;
    }
    Ok(Composite {
        color,
        feature,
        alpha: alpha.min(1.0),
    })
}

/// Reference volume rendering over all samples of a ray regardless of block
/// membership, with an optional single deferred shade at the end.
pub fn render_monolithic(
    samples: &[SamplePoint],
    shading: Option<(&DeferredShaderWeights, DVec3)>,
) -> Result<Composite> {
    for (i, w) in samples.windows(2).enumerate() {
        if !(w[0].t <= w[1].t) {
            return Err(Error::UnsortedSamples(i + 1));
        }
    }
    let mut diffuse = DVec3::ZERO;
    let mut feature = [0.0; 4];
    let mut opacity = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let transmittance: f64 = samples[..i].iter().map(|p| 1.0 - p.alpha).product();
        let w = transmittance * s.alpha;
        diffuse += w * s.diffuse;
        for k in 0..4 {
            feature[k] += w * s.feature[k];
        }
        opacity += w;
    }
    let color = match shading {
        Some((weights, dir)) => {
            weights.validate()?;
            weights.shade(diffuse, &feature, dir)
        }
        None => diffuse,
    };
    Ok(Composite {
        color,
        feature,
        alpha: opacity,
    })
}
