//! Ground-truth fields and direct rendering through them.

use std::sync::Arc;

use glam::DVec3;

use crate::geometry::Aabb;
use crate::render::{BlockVolume, RenderBlock};
use crate::scene::{activate, Attributes, BlockFrame, BlockId, DeferredShaderWeights, OccupancyPyramid, CHANNELS};

/// Pure function from a world point to pre-activation channels.
pub trait FieldSource: Sync {
    fn pre_activations(&self, p: DVec3) -> [f64; CHANNELS];

    fn bounds(&self) -> Aabb;

    /// Blocks whose grids cover the contracted neighborhood of their box.
    fn is_unbounded(&self, _id: &BlockId) -> bool {
        false
    }
}

impl<F: FieldSource + ?Sized> FieldSource for &F {
    fn pre_activations(&self, p: DVec3) -> [f64; CHANNELS] {
        (**self).pre_activations(p)
    }
    fn bounds(&self) -> Aabb {
        (**self).bounds()
    }
    fn is_unbounded(&self, id: &BlockId) -> bool {
        (**self).is_unbounded(id)
    }
}

impl<F: FieldSource + ?Sized + Send> FieldSource for Arc<F> {
    fn pre_activations(&self, p: DVec3) -> [f64; CHANNELS] {
        (**self).pre_activations(p)
    }
    fn bounds(&self) -> Aabb {
        (**self).bounds()
    }
    fn is_unbounded(&self, id: &BlockId) -> bool {
        (**self).is_unbounded(id)
    }
}

/// Constant pre-activations everywhere.
#[derive(Clone, Debug)]
pub struct ConstantField {
    pub value: [f64; CHANNELS],
    pub bounds: Aabb,
}

impl FieldSource for ConstantField {
    fn pre_activations(&self, _p: DVec3) -> [f64; CHANNELS] {
        self.value
    }
    fn bounds(&self) -> Aabb {
        self.bounds
    }
}

/// A block rendered straight from the field, on the same sample lattice as
/// its baked counterpart. An optional pyramid enables skipping.
pub struct AnalyticBlock<F> {
    pub field: F,
    pub frame: BlockFrame,
    pub shader: Arc<DeferredShaderWeights>,
    pub occupancy: Option<OccupancyPyramid>,
}

impl<F: FieldSource> AnalyticBlock<F> {
    pub fn new(field: F, frame: BlockFrame, shader: Arc<DeferredShaderWeights>) -> Self {
        AnalyticBlock {
            field,
            frame,
            shader,
            occupancy: None,
        }
    }
}

impl<F: FieldSource> BlockVolume for AnalyticBlock<F> {
    fn frame(&self) -> &BlockFrame {
        &self.frame
    }

    fn occupancy(&self) -> Option<&OccupancyPyramid> {
        self.occupancy.as_ref()
    }

    fn attributes(&self, p: DVec3) -> Attributes {
        activate(&self.field.pre_activations(p))
    }
}

impl<F: FieldSource> RenderBlock for AnalyticBlock<F> {
    fn shader(&self) -> &DeferredShaderWeights {
        &self.shader
    }
}
