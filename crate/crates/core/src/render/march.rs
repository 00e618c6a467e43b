//! Single-block ray marching with hierarchical empty-space skipping.

use glam::DVec3;

use super::composite::{Accumulator, RaySegmentResult, SamplePoint};
use crate::geometry::Ray;
use crate::scene::{Attributes, BlockAssets, BlockFrame, OccupancyPyramid};

/// Anything a ray can be marched through: baked assets or an analytic field.
pub trait BlockVolume: Sync {
    fn frame(&self) -> &BlockFrame;
    /// Skip structure; `None` forces exhaustive marching.
    fn occupancy(&self) -> Option<&OccupancyPyramid>;
    fn attributes(&self, p: DVec3) -> Attributes;
}

impl BlockVolume for BlockAssets {
    fn frame(&self) -> &BlockFrame {
        &self.frame
    }

    fn occupancy(&self) -> Option<&OccupancyPyramid> {
        Some(&self.occupancy)
    }

    fn attributes(&self, p: DVec3) -> Attributes {
        self.query_attributes(p)
    }
}

impl<T: BlockVolume + Send> BlockVolume for std::sync::Arc<T> {
    fn frame(&self) -> &BlockFrame {
        (**self).frame()
    }

    fn occupancy(&self) -> Option<&OccupancyPyramid> {
        (**self).occupancy()
    }

    fn attributes(&self, p: DVec3) -> Attributes {
        (**self).attributes(p)
    }
}

impl<T: BlockVolume> BlockVolume for &T {
    fn frame(&self) -> &BlockFrame {
        (**self).frame()
    }

    fn occupancy(&self) -> Option<&OccupancyPyramid> {
        (**self).occupancy()
    }

    fn attributes(&self, p: DVec3) -> Attributes {
        (**self).attributes(p)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SkipMode {
    /// Descend the pyramid from the coarsest level and jump over the
    /// largest empty cell.
    #[default]
    Hierarchical,
    /// Test every sample against level 0 only.
    Level0,
    /// Evaluate every lattice sample.
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarchOptions {
    pub skip: SkipMode,
    /// Stop once transmittance falls below this value. Zero disables the cutoff.
    pub min_transmittance: f64,
}

pub const DEFAULT_MIN_TRANSMITTANCE: f64 = 1e-4;

impl Default for MarchOptions {
    fn default() -> Self {
        MarchOptions {
            skip: SkipMode::Hierarchical,
            min_transmittance: DEFAULT_MIN_TRANSMITTANCE,
        }
    }
}

impl MarchOptions {
    pub fn exhaustive() -> Self {
        MarchOptions {
            skip: SkipMode::Exhaustive,
            ..Self::default()
        }
    }
}

/// Sample lattice of a ray inside one block: `t_i = entry + (i + 0.5) delta`, `t_i < exit`.
#[derive(Clone, Copy, Debug)]
pub struct Lattice {
    pub entry: f64,
    pub exit: f64,
    pub delta: f64,
    pub count: u64,
}

impl Lattice {
    pub fn new(ray: &Ray, frame: &BlockFrame) -> Option<Self> {
        let (entry, exit) = frame.bounds.intersect(ray)?;
        let delta = frame.step();
        let x = (exit - entry) / delta - 0.5;
        let count = if x > 0.0 { x.ceil() as u64 } else { 0 };
        Some(Lattice {
            entry,
            exit,
            delta,
            count,
        })
    }

    #[inline]
    pub fn t(&self, i: u64) -> f64 {
        self.entry + (i as f64 + 0.5) * self.delta
    }

    /// First index whose sample lies at or beyond `t`.
    #[inline]
    fn first_at_or_after(&self, t: f64) -> u64 {
        let x = (t - self.entry) / self.delta - 0.5;
        if !(x > 0.0) {
            return 0;
        }
        let k = x as u64;
        if (k as f64) < x {
            k + 1
        } else {
            k
        }
    }
}

/// Per-ray constants for skipping: the affine map from normalized grid
/// coordinates to world space inside the block box, and the reciprocal direction.
/// Bounded blocks also carry the ray in voxel coordinates, `g(t) = g0 + t gd`.
struct SkipContext<'a> {
    pyramid: &'a OccupancyPyramid,
    mode: SkipMode,
    origin: DVec3,
    inv_dir: DVec3,
    /// World point of unit coordinate 0 and world size of the unit cube.
    base: DVec3,
    scale: DVec3,
    /// Unit-space range of the block box.
    clip: (f64, f64),
    inv_dims: DVec3,
    grid: Option<GridRay>,
}

struct GridRay {
    g0: DVec3,
    gd: DVec3,
    inv_gd: DVec3,
    dims: [u32; 3],
}

impl GridRay {
    #[inline]
    fn cell_at(&self, t: f64) -> Option<[u32; 3]> {
        let g = self.g0 + t * self.gd;
        let mut out = [0u32; 3];
        for a in 0..3 {
            let d = self.dims[a];
            if !(g[a] >= -1.0 && g[a] < f64::from(d) + 1.0) {
                return None;
            }
            out[a] = (g[a].max(0.0) as u32).min(d - 1);
        }
        Some(out)
    }

    #[inline]
    fn cell_exit(&self, level: usize, cell: [u32; 3]) -> f64 {
        let size = 1u32 << level;
        let mut t = f64::INFINITY;
        for a in 0..3 {
            let inv = self.inv_gd[a];
            if !inv.is_finite() {
                continue;
            }
            let c = if inv > 0.0 { cell[a] + 1 } else { cell[a] };
            let w = f64::from((c * size).min(self.dims[a]));
            t = t.min((w - self.g0[a]) * inv);
        }
        t
    }
}

impl<'a> SkipContext<'a> {
    fn new(ray: &Ray, frame: &BlockFrame, pyramid: &'a OccupancyPyramid, mode: SkipMode) -> Self {
        let g = frame.grid_box();
        let clip = if frame.unbounded { (0.25, 0.75) } else { (0.0, 1.0) };
        let grid = (!frame.unbounded).then(|| {
            let k = frame.dims_f() / frame.bounds.size();
            let gd = ray.dir * k;
            GridRay {
                g0: (ray.origin - frame.bounds.min) * k,
                gd,
                inv_gd: gd.recip(),
                dims: frame.voxel_dims,
            }
        });
        SkipContext {
            pyramid,
            mode,
            origin: ray.origin,
            inv_dir: ray.dir.recip(),
            base: g.min,
            scale: g.size(),
            clip,
            inv_dims: frame.dims_f().recip(),
            grid,
        }
    }

    /// Ray parameter where the ray leaves cell `cell` of pyramid `level`,
    /// clipped to the block box.
    #[inline]
    fn cell_exit(&self, level: usize, cell: [u32; 3]) -> f64 {
        if let Some(g) = &self.grid {
            return g.cell_exit(level, cell);
        }
        let size = 1u32 << level;
        let mut t = f64::INFINITY;
        for a in 0..3 {
            let inv = self.inv_dir[a];
            if !inv.is_finite() {
                continue;
            }
            let c = if inv > 0.0 { cell[a] + 1 } else { cell[a] };
            let u = (f64::from(c * size) * self.inv_dims[a]).clamp(self.clip.0, self.clip.1);
            let w = self.base[a] + u * self.scale[a];
            t = t.min((w - self.origin[a]) * inv);
        }
        t
    }

    #[inline]
    fn classify(&self, frame: &BlockFrame, lattice: &Lattice, i: u64, p: DVec3) -> Step {
        let cell = match &self.grid {
            Some(g) => g.cell_at(lattice.t(i)),
            None => frame.cell_of(p),
        };
        let Some(cell) = cell else {
            return Step::Evaluate;
        };
        if self.pyramid.level0().get(cell[0], cell[1], cell[2]) {
            return Step::Evaluate;
        }
        if self.mode == SkipMode::Level0 {
            return Step::Jump(i + 1);
        }
        // Coarsest empty ancestor; level 0 is known to be empty.
        let mut level = 0;
        for k in (1..self.pyramid.level_count()).rev() {
            let c = cell.map(|v| v >> k);
            if !self.pyramid.level(k).get(c[0], c[1], c[2]) {
                level = k;
                break;
            }
        }
        let t_exit = self.cell_exit(level, cell.map(|v| v >> level));
        let margin = 1e-7 * lattice.delta;
        Step::Jump(lattice.first_at_or_after(t_exit - margin).max(i + 1))
    }
}

enum Step {
    Evaluate,
    /// Skip to this lattice index.
    Jump(u64),
}

/// Visits the lattice samples that survive empty-space skipping, in ray order.
/// Returns the number of skipped samples. The visitor returns `false` to stop.
pub fn for_each_sample<V: BlockVolume + ?Sized>(
    ray: &Ray,
    vol: &V,
    skip: SkipMode,
    mut visit: impl FnMut(SamplePoint) -> bool,
) -> Option<(Lattice, u64)> {
    let frame = vol.frame();
    let lattice = Lattice::new(ray, frame)?;
    let skipper = match skip {
        SkipMode::Exhaustive => None,
        _ => vol.occupancy().map(|pyr| SkipContext::new(ray, frame, pyr, skip)),
    };
    let mut skipped = 0;
    let mut i = 0;
    while i < lattice.count {
        let t = lattice.t(i);
        let p = ray.at(t);
        if let Some(sk) = &skipper {
            if let Step::Jump(next) = sk.classify(frame, &lattice, i, p) {
                let next = next.min(lattice.count);
                skipped += next - i;
                i = next;
                continue;
            }
        }
        let a = vol.attributes(p);
        if !visit(SamplePoint::new(t, lattice.delta, a.sigma, a.diffuse, a.feature)) {
            break;
        }
        i += 1;
    }
    Some((lattice, skipped))
}

/// Every evaluated sample of the ray inside the block, with its entry parameter.
pub fn collect_samples<V: BlockVolume + ?Sized>(
    ray: &Ray,
    vol: &V,
    skip: SkipMode,
) -> (f64, Vec<SamplePoint>) {
    let mut out = Vec::new();
    match for_each_sample(ray, vol, skip, |s| {
        out.push(s);
        true
    }) {
        Some((lattice, _)) => (lattice.entry, out),
        None => (f64::INFINITY, out),
    }
}

/// Front-to-back integration of the ray over one block. A ray that misses
/// the block box yields a zero segment.
pub fn march_block<V: BlockVolume + ?Sized>(
    ray: &Ray,
    vol: &V,
    opts: &MarchOptions,
) -> RaySegmentResult {
    let id = vol.frame().id;
    let mut acc = Accumulator::default();
    let mut evaluated = 0u32;
    let result = for_each_sample(ray, vol, opts.skip, |s| {
        acc.add(&s);
        evaluated += 1;
        acc.transmittance >= opts.min_transmittance
    });
    let Some((lattice, skipped)) = result else {
        return RaySegmentResult::empty(id, f64::INFINITY);
    };
    RaySegmentResult {
        block: id,
        entry_t: lattice.entry,
        diffuse: acc.diffuse,
        feature: acc.feature,
        alpha: acc.alpha.clamp(0.0, 1.0),
        color: None,
        evaluated,
        skipped: skipped as u32,
    }
}
