//! Budgeted residency: the set of loaded blocks, how a plan changes it, and
//! the snapshot handed to the renderer.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use blockfield_core::bake::{import_block, load_shaders};
use blockfield_core::render::{Camera, ShadedBlock};
use blockfield_core::scene::{BlockId, DeferredShaderWeights, SceneManifest};
use serde::Serialize;

use crate::policy::{select_lod, PlannedBlock, RenderPlan, SceneIndex};
use crate::{Error, Result};

/// Loads one block's assets.
pub trait Fetcher {
    type Asset;
    fn fetch(&mut self, id: &BlockId) -> Result<Self::Asset>;
}

/// Fetcher that loads nothing and records what was asked for.
#[derive(Clone, Debug, Default)]
pub struct SizeFetcher {
    pub log: Vec<BlockId>,
}

impl Fetcher for SizeFetcher {
    type Asset = ();
    fn fetch(&mut self, id: &BlockId) -> Result<()> {
        self.log.push(*id);
        Ok(())
    }
}

/// Reads and verifies block assets from an exported scene directory.
pub struct DiskFetcher {
    root: PathBuf,
    manifest: SceneManifest,
    shaders: BTreeMap<String, Arc<DeferredShaderWeights>>,
}

impl DiskFetcher {
    pub fn new(root: &Path) -> Result<Self> {
        let manifest = SceneManifest::load(root)?;
        let shaders = load_shaders(root, &manifest)?;
        Ok(DiskFetcher {
            root: root.to_path_buf(),
            manifest,
            shaders,
        })
    }

    pub fn manifest(&self) -> &SceneManifest {
        &self.manifest
    }
}

impl Fetcher for DiskFetcher {
    type Asset = ShadedBlock;
    fn fetch(&mut self, id: &BlockId) -> Result<ShadedBlock> {
        let entry = self.manifest.entry(id).ok_or(Error::UnknownBlock(*id))?;
        let shader = self.shaders.get(&entry.shader).cloned().ok_or_else(|| Error::Fetch {
            id: *id,
            reason: format!("unknown shader {}", entry.shader),
        })?;
        let assets = import_block(&self.root, &self.manifest, id)?;
        Ok(ShadedBlock {
            assets: Arc::new(assets),
            shader,
        })
    }
}

/// A plan after fitting it into the budget.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BudgetedPlan {
    pub plan: RenderPlan,
    /// Each entry replaced the listed blocks by their parent.
    pub degraded: Vec<(Vec<BlockId>, BlockId)>,
    /// Coarsest-level blocks left out because nothing coarser exists.
    pub dropped: Vec<BlockId>,
}

/// Replaces the farthest planned blocks by their parents until the plan fits
/// `budget`; every planned block under the chosen parent goes with it. A
/// parent that alone exceeds the budget is never chosen. When no block can be
/// coarsened the farthest block is dropped.
pub fn degrade_to_budget(plan: &RenderPlan, index: &SceneIndex, budget: u64) -> Result<BudgetedPlan> {
    if let Some(b) = plan.blocks.iter().find(|b| b.bytes > budget) {
        return Err(Error::AssetTooLarge {
            id: b.id,
            bytes: b.bytes,
            budget,
        });
    }
    let top = index.layout.lod_count;
    let eye = plan.eye.truncate();
    let mut blocks = plan.blocks.clone();
    let mut degraded = Vec::new();
    let mut dropped = Vec::new();
    while blocks.iter().map(|b| b.bytes).sum::<u64>() > budget {
        let mut target = None;
        for b in blocks.iter().rev() {
            if b.id.lod < top && index.bytes(&b.id.parent())? <= budget {
                target = Some(b.id.parent());
                break;
            }
        }
        let Some(parent) = target else {
            dropped.push(blocks.pop().expect("over budget implies a planned block").id);
            continue;
        };
        let replaced = blocks
            .iter()
            .filter(|b| parent.covers(&b.id))
            .map(|b| b.id)
            .collect();
        blocks.retain(|b| !parent.covers(&b.id));
        blocks.push(PlannedBlock {
            id: parent,
            distance: index.layout.center(&parent).distance(eye),
            bytes: index.bytes(&parent)?,
        });
        blocks.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
        degraded.push((replaced, parent));
    }
    Ok(BudgetedPlan {
        plan: RenderPlan {
            eye: plan.eye,
            load: blocks.iter().map(|b| b.id).collect(),
            blocks,
            evict: Vec::new(),
        },
        degraded,
        dropped,
    })
}

#[derive(Debug)]
struct Resident<A> {
    asset: Arc<A>,
    bytes: u64,
    last_used: u64,
}

impl<A> Clone for Resident<A> {
    fn clone(&self) -> Self {
        Resident {
            asset: self.asset.clone(),
            bytes: self.bytes,
            last_used: self.last_used,
        }
    }
}

/// Outcome of one plan application.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ApplyReport {
    /// The plan that was realized, with `load` and `evict` filled in.
    pub plan: BudgetedPlan,
    pub resident_bytes: u64,
    pub resident: Vec<BlockId>,
}

/// Loaded blocks under a byte budget.
#[derive(Debug)]
pub struct ResidentSet<A> {
    budget: u64,
    tick: u64,
    entries: BTreeMap<BlockId, Resident<A>>,
}

impl<A> ResidentSet<A> {
    pub fn new(budget: u64) -> Self {
        ResidentSet {
            budget,
            tick: 0,
            entries: BTreeMap::new(),
        }
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn bytes(&self) -> u64 {
        self.entries.values().map(|r| r.bytes).sum()
    }

    pub fn ids(&self) -> Vec<BlockId> {
        self.entries.keys().copied().collect()
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &BlockId) -> Option<&Arc<A>> {
        self.entries.get(id).map(|r| &r.asset)
    }

    /// Fits the plan into the budget, evicts unplanned blocks least recently
    /// used first (ties: larger id first) until the planned blocks fit beside
    /// the remainder, then fetches what is missing in plan order. On a fetch
    /// error the set is left unchanged.
    pub fn apply_plan<F>(&mut self, plan: &RenderPlan, index: &SceneIndex, fetcher: &mut F) -> Result<ApplyReport>
    where
        F: Fetcher<Asset = A>,
    {
        let mut fitted = degrade_to_budget(plan, index, self.budget)?;
        let planned: BTreeSet<BlockId> = fitted.plan.blocks.iter().map(|b| b.id).collect();
        let planned_bytes = fitted.plan.bytes();

        let mut unplanned: Vec<(&BlockId, &Resident<A>)> =
            self.entries.iter().filter(|(id, _)| !planned.contains(id)).collect();
        unplanned.sort_by_key(|(id, r)| (r.last_used, Reverse(**id)));
        let mut kept: u64 = unplanned.iter().map(|(_, r)| r.bytes).sum();
        let mut evict = Vec::new();
        for (id, r) in &unplanned {
            if planned_bytes + kept <= self.budget {
                break;
            }
            kept -= r.bytes;
            evict.push(**id);
        }

        let tick = self.tick + 1;
        let mut next = self.entries.clone();
        for id in &evict {
            next.remove(id);
        }
        let mut load = Vec::new();
        for b in &fitted.plan.blocks {
            match next.get_mut(&b.id) {
                Some(r) => r.last_used = tick,
                None => {
                    let asset = fetcher.fetch(&b.id)?;
                    next.insert(
                        b.id,
                        Resident {
                            asset: Arc::new(asset),
                            bytes: b.bytes,
                            last_used: tick,
                        },
                    );
                    load.push(b.id);
                }
            }
        }
        self.entries = next;
        self.tick = tick;
        debug_assert!(self.bytes() <= self.budget);
        fitted.plan.load = load;
        fitted.plan.evict = evict;
        Ok(ApplyReport {
            plan: fitted,
            resident_bytes: self.bytes(),
            resident: self.ids(),
        })
    }

    /// The planned blocks with their assets, in drawing order.
    pub fn snapshot(&self, plan: &RenderPlan) -> Snapshot<A> {
        let blocks = plan
            .blocks
            .iter()
            .filter_map(|b| self.entries.get(&b.id).map(|r| (b.id, r.asset.clone())))
            .collect();
        Snapshot {
            blocks,
            resident_bytes: self.bytes(),
        }
    }
}

/// What the renderer draws: planned blocks front-to-back with their assets.
#[derive(Debug)]
pub struct Snapshot<A> {
    pub blocks: Vec<(BlockId, Arc<A>)>,
    pub resident_bytes: u64,
}

impl<A> Default for Snapshot<A> {
    fn default() -> Self {
        Snapshot {
            blocks: Vec::new(),
            resident_bytes: 0,
        }
    }
}

impl<A> Snapshot<A> {
    pub fn assets(&self) -> Vec<Arc<A>> {
        self.blocks.iter().map(|(_, a)| a.clone()).collect()
    }
}

/// Atomically swapped snapshot shared between the planner and renderers.
#[derive(Debug)]
pub struct SharedSnapshot<A> {
    inner: Arc<RwLock<Arc<Snapshot<A>>>>,
}

impl<A> Clone for SharedSnapshot<A> {
    fn clone(&self) -> Self {
        SharedSnapshot {
            inner: self.inner.clone(),
        }
    }
}

impl<A> Default for SharedSnapshot<A> {
    fn default() -> Self {
        SharedSnapshot {
            inner: Arc::new(RwLock::new(Arc::new(Snapshot::default()))),
        }
    }
}

impl<A> SharedSnapshot<A> {
    pub fn load(&self) -> Arc<Snapshot<A>> {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn store(&self, snapshot: Snapshot<A>) {
        *self.inner.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snapshot);
    }
}

/// Single planning task: per camera pose, select blocks, update residency and
/// publish the new snapshot.
pub struct Planner<F: Fetcher> {
    pub index: SceneIndex,
    pub thresholds: Vec<f64>,
    pub resident: ResidentSet<F::Asset>,
    pub fetcher: F,
    pub shared: SharedSnapshot<F::Asset>,
}

impl<F: Fetcher> Planner<F> {
    pub fn new(index: SceneIndex, budget: u64, fetcher: F) -> Self {
        Planner {
            thresholds: index.thresholds.clone(),
            index,
            resident: ResidentSet::new(budget),
            fetcher,
            shared: SharedSnapshot::default(),
        }
    }

    pub fn step(&mut self, camera: &Camera) -> Result<ApplyReport> {
        let plan = select_lod(camera, &self.index, &self.thresholds)?;
        let report = self.resident.apply_plan(&plan, &self.index, &mut self.fetcher)?;
        self.shared.store(self.resident.snapshot(&report.plan.plan));
        Ok(report)
    }
}
