//! Per-block ray marching, depth-sorted compositing, deferred shading and
//! the single-pass reference integrator.

pub mod camera;
pub mod composite;
pub mod frame;
pub mod march;

pub use camera::{Camera, CameraFile};
pub use composite::{
    accumulate_segment, composite_appearance, composite_blocks, deferred_shade,
    render_monolithic, Composite, RaySegmentResult, SamplePoint,
};
pub use frame::{
    abs_diff, order_blocks, psnr, render_frame, render_frame_with_stats, render_ray,
    Framebuffer, RayOutput, RenderBlock, RenderOptions, RenderStats, ShadedBlock, ShadingMode,
};
pub use march::{collect_samples, march_block, BlockVolume, MarchOptions, SkipMode};
