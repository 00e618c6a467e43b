//! Asset streaming: visibility culling, LOD selection, budgeted residency and
//! the HTTP asset service.

mod error;
pub mod policy;
pub mod resident;
pub mod server;

pub use error::{Error, Result};
pub use policy::{depth_sort, select_lod, visible, PlannedBlock, RenderPlan, SceneIndex};
pub use resident::{
    degrade_to_budget, ApplyReport, BudgetedPlan, DiskFetcher, Fetcher, Planner, ResidentSet,
    SharedSnapshot, SizeFetcher, Snapshot,
};
pub use server::{router, serve, spawn, AssetService};
