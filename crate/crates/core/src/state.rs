//! Assembly state, transition and reward.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Action, BrickCatalog, Cell, Dims, Footprint, VoxelGrid};

/// Default terminal penalty for a failed episode.
pub const DEFAULT_R_FAIL: f64 = -10.0;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Inventory {
    pub counts: Vec<u32>,
}

impl Inventory {
    pub fn new(counts: Vec<u32>) -> Self {
        Inventory { counts }
    }

    pub fn uniform(n_types: usize, count: u32) -> Self {
        Inventory { counts: vec![count; n_types] }
    }

    pub fn get(&self, brick: usize) -> u32 {
        self.counts.get(brick).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// What a brick rests on (or hangs from) across one interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Support {
    Ground,
    Brick(usize),
}

/// Knob connection between vertically adjacent bodies. Each `(x, y)` stud cell
/// shared by the two footprints is one knob.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub lower: Support,
    pub upper: usize,
    pub knobs: Vec<(usize, usize)>,
}

const NO_OWNER: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssemblyGraph {
    dims: Dims,
    placements: Vec<Action>,
    footprints: Vec<Footprint>,
    edges: Vec<Edge>,
    owner: Vec<u32>,
}

impl AssemblyGraph {
    pub fn new(dims: Dims) -> Self {
        AssemblyGraph {
            dims,
            placements: Vec::new(),
            footprints: Vec::new(),
            edges: Vec::new(),
            owner: vec![NO_OWNER; dims.cell_count()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn placements(&self) -> &[Action] {
        &self.placements
    }

    pub fn footprints(&self) -> &[Footprint] {
        &self.footprints
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn owner_at(&self, c: Cell) -> Option<usize> {
        match self.owner[self.dims.index(c)] {
            NO_OWNER => None,
            o => Some(o as usize),
        }
    }

    /// Edges a brick with footprint `fp` would form if added as placement `index`.
    /// Order: ground, then bricks below by index, then bricks above by index.
    pub fn edges_for(&self, fp: &Footprint, index: usize) -> Vec<Edge> {
        let mut edges = Vec::new();
        if fp.z == 0 {
            edges.push(Edge { lower: Support::Ground, upper: index, knobs: fp.cells().map(|c| (c.x, c.y)).collect() });
        } else {
            for (owner, knobs) in self.owners_in(&fp.at_layer(fp.z - 1)) {
                edges.push(Edge { lower: Support::Brick(owner), upper: index, knobs });
            }
        }
        if fp.z + 1 < self.dims.d {
            for (owner, knobs) in self.owners_in(&fp.at_layer(fp.z + 1)) {
                edges.push(Edge { lower: Support::Brick(index), upper: owner, knobs });
            }
        }
        edges
    }

    /// Bricks occupying any cell of `region`, ascending by index, with the shared cells.
    pub(crate) fn owners_in(&self, region: &Footprint) -> Vec<(usize, Vec<(usize, usize)>)> {
        let mut found: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
        for c in region.cells() {
            let o = self.owner[self.dims.index(c)];
            if o == NO_OWNER {
                continue;
            }
            let o = o as usize;
            match found.iter_mut().find(|(k, _)| *k == o) {
                Some((_, cells)) => cells.push((c.x, c.y)),
                None => found.push((o, vec![(c.x, c.y)])),
            }
        }
        found.sort_by_key(|(k, _)| *k);
        found
    }

    fn push(&mut self, action: Action, fp: Footprint) {
        let index = self.placements.len();
        let new_edges = self.edges_for(&fp, index);
        self.edges.extend(new_edges);
        for c in fp.cells() {
            self.owner[self.dims.index(c)] = index as u32;
        }
        self.placements.push(action);
        self.footprints.push(fp);
    }

    /// Rebuild the occupancy grid from placements alone.
    pub fn reconstruct(&self) -> VoxelGrid {
        let mut g = VoxelGrid::empty(self.dims);
        for fp in &self.footprints {
            for c in fp.cells() {
                g.set_bit(self.dims.index(c), true);
            }
        }
        g
    }

    /// True iff every placement reaches the ground through edges.
    pub fn all_grounded(&self) -> bool {
        grounded_flags(self.placements.len(), &self.edges).into_iter().all(|g| g)
    }
}

/// Ground reachability per body over an undirected edge list.
pub(crate) fn grounded_flags(n: usize, edges: &[Edge]) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    let mut grounded = vec![false; n];
    let mut stack = Vec::new();
    for e in edges {
        match e.lower {
            Support::Ground => {
                if !grounded[e.upper] {
                    grounded[e.upper] = true;
                    stack.push(e.upper);
                }
            }
            Support::Brick(l) => {
                adj[l].push(e.upper);
                adj[e.upper].push(l);
            }
        }
    }
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !grounded[j] {
                grounded[j] = true;
                stack.push(j);
            }
        }
    }
    grounded
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeOutcome {
    Success,
    Failure,
}

pub fn terminal_reward(outcome: EpisodeOutcome, r_fail: f64) -> f64 {
    match outcome {
        EpisodeOutcome::Success => 0.0,
        EpisodeOutcome::Failure => r_fail,
    }
}

/// Full MDP state: target, current shape, brick graph, inventory and step counter.
#[derive(Debug, Clone)]
pub struct AssemblyState {
    target: Arc<VoxelGrid>,
    catalog: Arc<BrickCatalog>,
    initial_inventory: Arc<Inventory>,
    current: VoxelGrid,
    graph: AssemblyGraph,
    inventory: Inventory,
    step: usize,
}

impl AssemblyState {
    pub fn new(target: VoxelGrid, inventory: Inventory, catalog: Arc<BrickCatalog>) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::EmptyTarget);
        }
        Self::new_allow_empty(target, inventory, catalog)
    }

    /// Like [`AssemblyState::new`] but accepts an empty target, whose episode is
    /// complete before any placement.
    pub fn new_allow_empty(target: VoxelGrid, inventory: Inventory, catalog: Arc<BrickCatalog>) -> Result<Self> {
        if inventory.counts.len() != catalog.len() {
            return Err(Error::InvalidConfig(format!(
                "inventory has {} entries but the catalog has {} brick types",
                inventory.counts.len(),
                catalog.len()
            )));
        }
        let dims = target.dims();
        Ok(AssemblyState {
            target: Arc::new(target),
            catalog,
            initial_inventory: Arc::new(inventory.clone()),
            current: VoxelGrid::empty(dims),
            graph: AssemblyGraph::new(dims),
            inventory,
            step: 0,
        })
    }

    pub fn dims(&self) -> Dims {
        self.target.dims()
    }

    pub fn target(&self) -> &VoxelGrid {
        &self.target
    }

    pub fn catalog(&self) -> &BrickCatalog {
        &self.catalog
    }

    pub fn catalog_arc(&self) -> &Arc<BrickCatalog> {
        &self.catalog
    }

    pub fn current(&self) -> &VoxelGrid {
        &self.current
    }

    pub fn graph(&self) -> &AssemblyGraph {
        &self.graph
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn initial_inventory(&self) -> &Inventory {
        &self.initial_inventory
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn footprint(&self, action: &Action) -> Result<Footprint> {
        action.footprint(&self.catalog, self.dims())
    }

    /// Transition: place `action`, returning the successor state.
    pub fn apply(&self, action: &Action) -> Result<AssemblyState> {
        let mut next = self.clone();
        next.apply_in_place(action)?;
        Ok(next)
    }

    pub fn apply_in_place(&mut self, action: &Action) -> Result<()> {
        let fp = self.footprint(action)?;
        let dims = self.dims();
        if let Some(c) = fp.cells().find(|&c| self.current.bit(dims.index(c))) {
            return Err(Error::Collision { cell: c.pos() });
        }
        if self.inventory.get(action.brick) == 0 {
            return Err(Error::InventoryEmpty { brick: self.catalog.get(action.brick)?.name.clone() });
        }
        for c in fp.cells() {
            self.current.set_bit(dims.index(c), true);
        }
        self.graph.push(*action, fp);
        self.inventory.counts[action.brick] -= 1;
        self.step += 1;
        Ok(())
    }

    /// Fraction of the target newly covered by `action`.
    pub fn instant_reward(&self, action: &Action) -> Result<f64> {
        let target_cells = self.target.count();
        if target_cells == 0 {
            return Err(Error::EmptyTarget);
        }
        Ok(self.new_target_cells(action)? as f64 / target_cells as f64)
    }

    pub(crate) fn new_target_cells(&self, action: &Action) -> Result<usize> {
        let fp = self.footprint(action)?;
        let dims = self.dims();
        Ok(fp
            .cells()
            .map(|c| dims.index(c))
            .filter(|&i| !self.current.bit(i) && self.target.bit(i))
            .count())
    }

    pub fn is_complete(&self) -> bool {
        self.target.is_subset_of(&self.current)
    }

    /// Cells of the target still unfilled.
    pub fn remaining(&self) -> usize {
        self.target.count() - self.target.intersection(&self.current).map(|g| g.count()).unwrap_or(0)
    }
}
