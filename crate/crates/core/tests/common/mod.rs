#![allow(dead_code)]

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use brickseq::mask::{heuristic_stable, mask, MaskConfig, MaskVariant};
use brickseq::{Action, ActionSpace, AssemblyState, BrickCatalog, Cell, Dims, Inventory, Orientation, VoxelGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn catalog() -> Arc<BrickCatalog> {
    Arc::new(BrickCatalog::default())
}

/// Random grid no larger than 4x4x3.
pub fn small_dims(rng: &mut impl Rng) -> Dims {
    if rng.gen_bool(0.2) {
        return Dims::new(rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=3)).unwrap();
    }
    Dims::new(rng.gen_range(2..=4), rng.gen_range(3..=4), rng.gen_range(2..=3)).unwrap()
}

/// Either the full grid or a random non-empty subset of it.
pub fn random_target(rng: &mut impl Rng, dims: Dims) -> VoxelGrid {
    if rng.gen_bool(0.5) {
        return VoxelGrid::full(dims);
    }
    let density = rng.gen_range(0.4..0.95);
    let mut g = VoxelGrid::empty(dims);
    for i in 0..dims.cell_count() {
        if rng.gen_bool(density) {
            g.set(dims.cell(i), true).unwrap();
        }
    }
    if g.is_empty() {
        g.set(Cell::new(0, 0, 0), true).unwrap();
    }
    g
}

pub fn random_inventory(rng: &mut impl Rng, n: usize) -> Inventory {
    Inventory::new((0..n).map(|_| if rng.gen_bool(0.15) { 0 } else { rng.gen_range(1..=6) }).collect())
}

/// Actions passing `variant` from `state`, by brute force.
pub fn valid_actions(state: &AssemblyState, variant: MaskVariant) -> Vec<Action> {
    let cfg = MaskConfig::new(variant);
    ActionSpace::new(state.dims(), state.catalog().len())
        .actions()
        .filter(|a| mask(state, a, &cfg).overall)
        .collect()
}

/// A state reached by up to `max_steps` random placements, each valid under
/// `variant` at the time it was made.
pub fn random_rollout(rng: &mut impl Rng, initial: &AssemblyState, variant: MaskVariant, max_steps: usize) -> (AssemblyState, Vec<Action>) {
    let mut s = initial.clone();
    let mut actions = Vec::new();
    let steps = rng.gen_range(0..=max_steps);
    for _ in 0..steps {
        let valid = valid_actions(&s, variant);
        let Some(a) = valid.choose(rng) else { break };
        s.apply_in_place(a).unwrap();
        actions.push(*a);
    }
    (s, actions)
}

/// Random reachable state on a grid of at most 4x4x3. Most placements are
/// grounded (heuristic mask) so stacked structures form; the rest only need
/// the intuitive mask, so floating and inoperable situations occur too.
pub fn random_state(seed: u64) -> AssemblyState {
    let mut r = rng(seed);
    let cat = catalog();
    let dims = small_dims(&mut r);
    let target = random_target(&mut r, dims);
    let inv = random_inventory(&mut r, cat.len());
    let mut s = AssemblyState::new(target, inv, cat).unwrap();
    for _ in 0..r.gen_range(0..=8) {
        let variant = if r.gen_bool(0.8) { MaskVariant::Heuristic } else { MaskVariant::Intuitive };
        let valid = valid_actions(&s, variant);
        let Some(a) = valid.choose(&mut r) else { break };
        s.apply_in_place(a).unwrap();
    }
    s
}

/// Random structure on the full grid. Almost every placement keeps every brick
/// connected to the ground; a few may land anywhere collision-free.
pub fn random_structure(seed: u64, dims: Dims, max_bricks: usize) -> (AssemblyState, Vec<Action>) {
    let mut r = rng(seed);
    let cat = catalog();
    let mut s = AssemblyState::new(VoxelGrid::full(dims), Inventory::uniform(cat.len(), 50), cat).unwrap();
    let mut actions = Vec::new();
    let n = r.gen_range(1..=max_bricks);
    let space = ActionSpace::new(dims, s.catalog().len());
    for _ in 0..n {
        let grounded = r.gen_bool(0.97);
        let fitting: Vec<Action> = space
            .actions()
            .filter(|a| s.footprint(a).is_ok() && s.apply(a).is_ok() && (!grounded || heuristic_stable(&s, a)))
            .collect();
        let Some(a) = fitting.choose(&mut r) else { break };
        s.apply_in_place(a).unwrap();
        actions.push(*a);
    }
    (s, actions)
}

/// Rebuild `actions` on a fresh state with the given catalog.
pub fn rebuild(dims: Dims, actions: &[Action], catalog: Arc<BrickCatalog>) -> AssemblyState {
    let n = catalog.len();
    let mut s = AssemblyState::new(VoxelGrid::full(dims), Inventory::uniform(n, 50), catalog).unwrap();
    for a in actions {
        s.apply_in_place(a).unwrap();
    }
    s
}

/// Reflect placements about the x mid-plane (`flip_x`) or the y mid-plane.
pub fn mirror(actions: &[Action], dims: Dims, catalog: &BrickCatalog, flip_x: bool) -> Vec<Action> {
    actions
        .iter()
        .map(|a| {
            let (ex, ey) = a.extents(catalog).unwrap();
            let mut m = *a;
            if flip_x {
                m.x = dims.h - a.x - ex;
            } else {
                m.y = dims.w - a.y - ey;
            }
            m
        })
        .collect()
}

pub const LANDSCAPE: Orientation = Orientation::Landscape;
pub const PORTRAIT: Orientation = Orientation::Portrait;
