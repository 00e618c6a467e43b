//! Whole-ray and whole-frame rendering over a set of blocks, plus image I/O.

use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use glam::{DVec2, DVec3};
use rayon::prelude::*;

use super::camera::Camera;
use super::march::{march_block, BlockVolume, MarchOptions};
use crate::geometry::Ray;
use crate::scene::{BlockAssets, DeferredShaderWeights, DEFAULT_BACKGROUND};
use crate::{Error, Result};

/// A block plus the shading weights of its group.
pub trait RenderBlock: BlockVolume {
    fn shader(&self) -> &DeferredShaderWeights;
}

impl<T: RenderBlock> RenderBlock for &T {
    fn shader(&self) -> &DeferredShaderWeights {
        (**self).shader()
    }
}

impl<T: RenderBlock + Send> RenderBlock for Arc<T> {
    fn shader(&self) -> &DeferredShaderWeights {
        (**self).shader()
    }
}

/// Baked assets bound to shared shading weights.
#[derive(Clone, Debug)]
pub struct ShadedBlock {
    pub assets: Arc<BlockAssets>,
    pub shader: Arc<DeferredShaderWeights>,
}

impl BlockVolume for ShadedBlock {
    fn frame(&self) -> &crate::scene::BlockFrame {
        &self.assets.frame
    }
    fn occupancy(&self) -> Option<&crate::scene::OccupancyPyramid> {
        Some(&self.assets.occupancy)
    }
    fn attributes(&self, p: DVec3) -> crate::scene::Attributes {
        self.assets.query_attributes(p)
    }
}

impl RenderBlock for ShadedBlock {
    fn shader(&self) -> &DeferredShaderWeights {
        &self.shader
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShadingMode {
    /// Shade each block's segment with its own weights, then composite.
    #[default]
    PerBlock,
    /// Composite diffuse and feature channels, then shade once.
    PostComposite,
    /// No view-dependent residual.
    DiffuseOnly,
}

impl std::str::FromStr for ShadingMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "per-block" => Ok(ShadingMode::PerBlock),
            "post-composite" => Ok(ShadingMode::PostComposite),
            "diffuse" => Ok(ShadingMode::DiffuseOnly),
            _ => Err(format!("unknown shading mode {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    pub march: MarchOptions,
    pub shading: ShadingMode,
    pub background: DVec3,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            march: MarchOptions::default(),
            shading: ShadingMode::PerBlock,
            background: DVec3::from_array(DEFAULT_BACKGROUND),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RayOutput {
    /// Color before the background is blended in.
    pub premultiplied: DVec3,
    pub color: DVec3,
    pub alpha: f64,
    pub evaluated: u64,
    pub skipped: u64,
}

/// Indices of the blocks the ray enters, in compositing order: by xy distance
/// from block center to ray origin, or by entry parameter for vertical rays.
/// Ties go to the smaller `(lod, iy, ix)`.
pub fn order_blocks<B: BlockVolume>(ray: &Ray, blocks: &[B]) -> Vec<(usize, f64)> {
    let mut hits = Vec::new();
    order_blocks_into(ray, blocks, &mut hits);
    hits.into_iter().map(|(i, t0, _)| (i, t0)).collect()
}

fn order_blocks_into<B: BlockVolume>(ray: &Ray, blocks: &[B], hits: &mut Vec<(usize, f64, f64)>) {
    hits.clear();
    for (i, b) in blocks.iter().enumerate() {
        let f = b.frame();
        if let Some((t0, _)) = f.bounds.intersect(ray) {
            let c = f.bounds.center();
            let d = DVec2::new(c.x, c.y).distance(ray.origin.truncate());
            hits.push((i, t0, d));
        }
    }
    let vertical = ray.is_vertical();
    let key = |h: &(usize, f64, f64)| if vertical { h.1 } else { h.2 };
    hits.sort_unstable_by(|a, b| {
        key(a)
            .total_cmp(&key(b))
            .then_with(|| blocks[a.0].frame().id.cmp(&blocks[b.0].frame().id))
    });
}

/// Marches, shades and composites every block the ray enters, then blends the background.
pub fn render_ray<B: RenderBlock>(ray: &Ray, blocks: &[B], opts: &RenderOptions) -> RayOutput {
    render_ray_with(ray, blocks, opts, &mut Vec::new())
}

/// Blends segments front to back as they are produced:
/// `C = sum_k T_k C_k`, `alpha = sum_k T_k alpha_k`, `T_{k+1} = T_k (1 - alpha_k)`.
fn render_ray_with<B: RenderBlock>(
    ray: &Ray,
    blocks: &[B],
    opts: &RenderOptions,
    hits: &mut Vec<(usize, f64, f64)>,
) -> RayOutput {
    order_blocks_into(ray, blocks, hits);
    let mut out = RayOutput::default();
    let mut transmittance = 1.0;
    let mut color = DVec3::ZERO;
    let mut feature = [0.0; 4];
    let mut alpha = 0.0;
    let mut first_shader = None;
    for &(i, _, _) in hits.iter() {
        let seg = march_block(ray, &blocks[i], &opts.march);
        out.evaluated += u64::from(seg.evaluated);
        out.skipped += u64::from(seg.skipped);
        if seg.alpha <= 0.0 {
            continue;
        }
        let c = match opts.shading {
            ShadingMode::PerBlock => blocks[i].shader().shade(seg.diffuse, &seg.feature, ray.dir),
            _ => seg.diffuse,
        };
        first_shader.get_or_insert(i);
        color += transmittance * c;
        for (f, v) in feature.iter_mut().zip(seg.feature) {
            *f += transmittance * v;
        }
        alpha += transmittance * seg.alpha;
        transmittance *= 1.0 - seg.alpha;
        if transmittance < opts.march.min_transmittance {
            break;
        }
    }
    if opts.shading == ShadingMode::PostComposite {
        if let Some(first) = first_shader {
            color = blocks[first].shader().shade(color, &feature, ray.dir);
        }
    }
    out.premultiplied = color;
    out.alpha = alpha.clamp(0.0, 1.0);
    out.color = color + (1.0 - out.alpha) * opts.background;
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Framebuffer {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<[f32; 3]>,
    pub alpha: Vec<f32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub evaluated: u64,
    pub skipped: u64,
}

pub fn render_frame<B: RenderBlock>(
    camera: &Camera,
    blocks: &[B],
    opts: &RenderOptions,
) -> Result<Framebuffer> {
    render_frame_with_stats(camera, blocks, opts).map(|(f, _)| f)
}

/// Renders one ray per pixel; rows are processed in parallel.
pub fn render_frame_with_stats<B: RenderBlock>(
    camera: &Camera,
    blocks: &[B],
    opts: &RenderOptions,
) -> Result<(Framebuffer, RenderStats)> {
    if camera.width == 0 || camera.height == 0 {
        return Err(Error::ZeroArea);
    }
    camera.validate()?;
    let w = camera.width as usize;
    let rows: Vec<(Vec<RayOutput>, RenderStats)> = (0..camera.height)
        .into_par_iter()
        .map(|y| {
            let mut stats = RenderStats::default();
            let mut hits = Vec::new();
            let row = (0..camera.width)
                .map(|x| {
                    let o = render_ray_with(&camera.ray(x, y), blocks, opts, &mut hits);
                    stats.evaluated += o.evaluated;
                    stats.skipped += o.skipped;
                    o
                })
                .collect();
            (row, stats)
        })
        .collect();
    let mut fb = Framebuffer::new(camera.width, camera.height);
    let mut stats = RenderStats::default();
    for (y, (row, s)) in rows.into_iter().enumerate() {
        stats.evaluated += s.evaluated;
        stats.skipped += s.skipped;
        for (x, o) in row.into_iter().enumerate() {
            let i = y * w + x;
            fb.rgb[i] = o.color.as_vec3().to_array();
            fb.alpha[i] = o.alpha as f32;
        }
    }
    Ok((fb, stats))
}

pub const PSNR_CAP: f64 = 99.0;

/// `10 log10(1 / MSE)` over rgb, capped for identical images.
pub fn psnr(a: &Framebuffer, b: &Framebuffer) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let n = a.rgb.len() * 3;
    if n == 0 {
        return Err(Error::ZeroArea);
    }
    let sum: f64 = a
        .rgb
        .iter()
        .zip(&b.rgb)
        .flat_map(|(p, q)| (0..3).map(move |c| (f64::from(p[c]) - f64::from(q[c])).powi(2)))
        .sum();
    let mse = sum / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Per-channel absolute differences: (mean, max).
pub fn abs_diff(a: &Framebuffer, b: &Framebuffer) -> Result<(f64, f64)> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for (p, q) in a.rgb.iter().zip(&b.rgb) {
        for c in 0..3 {
            let d = (f64::from(p[c]) - f64::from(q[c])).abs();
            sum += d;
            max = max.max(d);
        }
    }
    Ok((sum / (a.rgb.len() * 3).max(1) as f64, max))
}

impl Framebuffer {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Framebuffer {
            width,
            height,
            rgb: vec![[0.0; 3]; n],
            alpha: vec![0.0; n],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        self.rgb[y as usize * self.width as usize + x as usize]
    }

    pub fn is_valid(&self) -> bool {
        self.rgb.iter().flatten().all(|v| v.is_finite())
            && self.alpha.iter().all(|a| (0.0..=1.0).contains(a))
    }

    /// 8-bit RGB bytes, row-major from the top.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.rgb
            .iter()
            .flatten()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::asset(path, e.to_string()))?;
        w.write_image_data(&self.to_rgb8())
            .map_err(|e| Error::asset(path, e.to_string()))?;
        w.finish().map_err(|e| Error::asset(path, e.to_string()))
    }

    /// PFM bytes: little-endian RGB floats, bottom row first.
    pub fn to_pfm(&self) -> Vec<u8> {
        let mut out = format!("PF\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        for y in (0..self.height as usize).rev() {
            let row = &self.rgb[y * self.width as usize..(y + 1) * self.width as usize];
            for v in row.iter().flatten() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_pfm(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("truncated PFM header".into());
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?);
        }
        pos += 1;
        if fields[0] != "PF" {
            return Err(format!("unsupported PFM type {:?}", fields[0]));
        }
        let width: u32 = fields[1].parse().map_err(|_| "bad PFM width")?;
        let height: u32 = fields[2].parse().map_err(|_| "bad PFM height")?;
        let scale: f32 = fields[3].parse().map_err(|_| "bad PFM scale")?;
        let little = scale < 0.0;
        let data = bytes.get(pos..).unwrap_or_default();
        let n = width as usize * height as usize;
        if data.len() != n * 12 {
            return Err(format!("PFM payload is {} bytes, expected {}", data.len(), n * 12));
        }
        let mut fb = Framebuffer::new(width, height);
        for (k, chunk) in data.chunks_exact(12).enumerate() {
            let y = height as usize - 1 - k / width as usize;
            let x = k % width as usize;
            let mut px = [0f32; 3];
            for (c, b) in chunk.chunks_exact(4).enumerate() {
                let b: [u8; 4] = b.try_into().unwrap();
                px[c] = if little {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                };
            }
            fb.rgb[y * width as usize + x] = px;
            fb.alpha[y * width as usize + x] = 1.0;
        }
        Ok(fb)
    }

    pub fn write_pfm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pfm()).map_err(|e| Error::io(path, e))
    }

    pub fn read_pfm(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_pfm(&bytes).map_err(|r| Error::asset(path, r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(w: u32, h: u32, v: f32) -> Framebuffer {
        let mut f = Framebuffer::new(w, h);
        f.rgb.fill([v; 3]);
        f
    }

    #[test]
    fn psnr_cases() {
        let a = uniform(4, 3, 0.3);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        assert!(psnr(&uniform(4, 3, 0.0), &uniform(4, 3, 1.0)).unwrap().abs() < 1e-12);
        let mut b = a.clone();
        for p in &mut b.rgb {
            for v in p {
                *v = (f64::from(*v) + 0.1) as f32;
            }
        }
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-5);
        assert!(matches!(
            psnr(&a, &uniform(3, 4, 0.3)),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn pfm_round_trip() {
        let mut f = Framebuffer::new(3, 2);
        for (i, p) in f.rgb.iter_mut().enumerate() {
            *p = [i as f32 * 0.1, -1.5, 1e-7 * i as f32];
        }
        f.alpha.fill(1.0);
        let g = Framebuffer::from_pfm(&f.to_pfm()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn shading_mode_parse() {
        assert_eq!("per-block".parse::<ShadingMode>(), Ok(ShadingMode::PerBlock));
        assert!("bogus".parse::<ShadingMode>().is_err());
    }
}
