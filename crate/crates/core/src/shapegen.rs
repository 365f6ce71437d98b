//! Random buildable target shapes grown by masked construction, and the
//! voxel-count / unsupported-ratio complexity metrics.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Action, ActionSpace, BrickCatalog, Cell, Dims, Orientation, VoxelGrid};
use crate::mask::{MaskConfig, MaskContext, MaskVariant};
use crate::state::{AssemblyState, Inventory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub dims: [usize; 3],
    pub steps_min: usize,
    pub steps_max: usize,
    pub eps_x: usize,
    pub eps_y: usize,
    pub inventory: Inventory,
    pub mask: MaskConfig,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(dims: Dims, inventory: Inventory, seed: u64) -> Self {
        GenConfig {
            dims: [dims.h, dims.w, dims.d],
            steps_min: 1,
            steps_max: 30,
            eps_x: 2,
            eps_y: 2,
            inventory,
            mask: MaskConfig::new(MaskVariant::Full),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_min == 0 || self.steps_max < self.steps_min {
            return Err(Error::InvalidConfig(format!("invalid step range {}..={}", self.steps_min, self.steps_max)));
        }
        Ok(())
    }
}

/// Which cells count as unsupported in the structural metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportRule {
    /// Unsupported unless every cell beneath it in its column is occupied.
    #[default]
    FullColumn,
    /// Unsupported when the cell directly beneath it is empty.
    CellBelow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complexity {
    pub c_v: usize,
    pub c_s: f64,
}

pub fn complexity(shape: &VoxelGrid, rule: SupportRule) -> Result<Complexity> {
    if shape.is_empty() {
        return Err(Error::EmptyShape);
    }
    let occupied = |x, y, z| shape.get(Cell::new(x, y, z)).unwrap_or(false);
    let unsupported = shape
        .cells()
        .filter(|c| match rule {
            SupportRule::FullColumn => (0..c.z).any(|z| !occupied(c.x, c.y, z)),
            SupportRule::CellBelow => c.z > 0 && !occupied(c.x, c.y, c.z - 1),
        })
        .count();
    let c_v = shape.count();
    Ok(Complexity { c_v, c_s: unsupported as f64 / c_v as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedShape {
    pub target: VoxelGrid,
    pub witness: Vec<Action>,
    pub sampled_steps: usize,
    pub complexity: Complexity,
}

pub fn generate(cfg: &GenConfig, catalog: &Arc<BrickCatalog>) -> Result<GeneratedShape> {
    cfg.validate()?;
    let [h, w, d] = cfg.dims;
    let dims = Dims::new(h, w, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps = rng.gen_range(cfg.steps_min..=cfg.steps_max);
    // no target exists yet, so the whole grid stands in for it
    let mut state = AssemblyState::new(VoxelGrid::full(dims), cfg.inventory.clone(), catalog.clone())?;
    let space = ActionSpace::new(dims, catalog.len());
    let mut witness: Vec<Action> = Vec::new();
    for _ in 0..steps {
        let ctx = MaskContext::new(&state, &cfg.mask);
        let (xs, ys) = match witness.last() {
            None => (0..h, 0..w),
            Some(p) => (p.x.saturating_sub(cfg.eps_x)..(p.x + cfg.eps_x + 1).min(h), p.y.saturating_sub(cfg.eps_y)..(p.y + cfg.eps_y + 1).min(w)),
        };
        let mut candidates = Vec::new();
        for x in xs {
            for y in ys.clone() {
                for z in 0..d {
                    for b in 0..catalog.len() {
                        for o in [Orientation::Landscape, Orientation::Portrait] {
                            let a = Action::new(b, x, y, z, o);
                            if ctx.is_valid(space.index(&a)) {
                                candidates.push(a);
                            }
                        }
                    }
                }
            }
        }
        let Some(&a) = candidates.choose(&mut rng) else { break };
        state.apply_in_place(&a)?;
        witness.push(a);
    }
    let target = state.current().clone();
    let complexity = if target.is_empty() { Complexity { c_v: 0, c_s: 0.0 } } else { complexity(&target, SupportRule::default())? };
    Ok(GeneratedShape { target, witness, sampled_steps: steps, complexity })
}
