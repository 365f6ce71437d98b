//! Physics-aware action mask and its weaker baseline variants.
//!
//! Components are evaluated in the fixed order T → C → I → O → S → U:
//!
//! * **T** task-oriented: the footprint lies inside the target.
//! * **C** collision-free: the footprint is empty in the current shape.
//! * **I** inventory: a brick of the type is left.
//! * **O** operable: the footprint's extent one layer above or below is empty
//!   (the plate counts as occupied below layer 0).
//! * **S** stable next structure, either by the force-balance program (`Full`,
//!   `Robot`) or by a ground-path heuristic (`Heuristic`).
//! * **U** robot manipulable: clearance volume free and the structure survives
//!   the insertion press (`Robot` only).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Action, ActionSpace, Cell, Footprint};
use crate::stability::{
    self, build_force_model, ComponentResult, ExtraBody, Grasp, Links, StabilityConfig, DEFAULT_PRESS_WEIGHT,
};
use crate::state::{grounded_flags, AssemblyState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskVariant {
    /// T ∧ C ∧ I
    Intuitive,
    /// T ∧ C ∧ I ∧ O
    Operable,
    /// T ∧ C ∧ I ∧ O ∧ ground-path heuristic
    Heuristic,
    /// T ∧ C ∧ I ∧ O ∧ S
    #[default]
    Full,
    /// T ∧ C ∧ I ∧ O ∧ S ∧ U
    Robot,
}

impl MaskVariant {
    pub const ALL: [MaskVariant; 5] =
        [MaskVariant::Intuitive, MaskVariant::Operable, MaskVariant::Heuristic, MaskVariant::Full, MaskVariant::Robot];

    pub fn name(self) -> &'static str {
        match self {
            MaskVariant::Intuitive => "intuitive",
            MaskVariant::Operable => "operable",
            MaskVariant::Heuristic => "heuristic",
            MaskVariant::Full => "full",
            MaskVariant::Robot => "robot",
        }
    }

    fn checks_operability(self) -> bool {
        !matches!(self, MaskVariant::Intuitive)
    }

    fn checks_heuristic(self) -> bool {
        matches!(self, MaskVariant::Heuristic)
    }

    fn checks_stability(self) -> bool {
        matches!(self, MaskVariant::Full | MaskVariant::Robot)
    }

    fn checks_robot(self) -> bool {
        matches!(self, MaskVariant::Robot)
    }
}

impl fmt::Display for MaskVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaskVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MaskVariant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown mask variant `{s}`")))
    }
}

/// Volume the robot occupies while placing a brick, relative to its footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClearanceTemplate {
    /// Every cell on the grasp side of the footprint up to the grid boundary.
    pub column: bool,
    /// Width of the ring around the footprint at its own layer.
    pub ring: usize,
    /// Extra `[dx, dy, dz]` offsets applied to every footprint cell.
    pub offsets: Vec<[i64; 3]>,
}

impl Default for ClearanceTemplate {
    fn default() -> Self {
        ClearanceTemplate { column: true, ring: 1, offsets: Vec::new() }
    }
}

impl ClearanceTemplate {
    /// Clearance cells inside the grid for a footprint, excluding the footprint itself.
    pub fn cells(&self, fp: &Footprint, grasp: Grasp, dims: crate::geometry::Dims) -> Vec<Cell> {
        let mut out = Vec::new();
        let mut push = |x: i64, y: i64, z: i64| {
            if dims.contains(x, y, z) {
                let c = Cell::new(x as usize, y as usize, z as usize);
                let inside = c.z == fp.z && (fp.x0..fp.x0 + fp.ex).contains(&c.x) && (fp.y0..fp.y0 + fp.ey).contains(&c.y);
                if !inside && !out.contains(&c) {
                    out.push(c);
                }
            }
        };
        if self.column {
            for c in fp.cells() {
                match grasp {
                    Grasp::Top => (c.z + 1..dims.d).for_each(|z| push(c.x as i64, c.y as i64, z as i64)),
                    Grasp::Bottom => (0..c.z).for_each(|z| push(c.x as i64, c.y as i64, z as i64)),
                }
            }
        }
        let r = self.ring as i64;
        if r > 0 {
            let z = fp.z as i64;
            for x in fp.x0 as i64 - r..(fp.x0 + fp.ex) as i64 + r {
                for y in fp.y0 as i64 - r..(fp.y0 + fp.ey) as i64 + r {
                    push(x, y, z);
                }
            }
        }
        for c in fp.cells() {
            for o in &self.offsets {
                push(c.x as i64 + o[0], c.y as i64 + o[1], c.z as i64 + o[2]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    pub press_weight: f64,
    pub grasp: Grasp,
    pub clearance: ClearanceTemplate,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams { press_weight: DEFAULT_PRESS_WEIGHT, grasp: Grasp::Top, clearance: ClearanceTemplate::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskConfig {
    pub variant: MaskVariant,
    pub stability: StabilityConfig,
    pub robot: RobotParams,
}

impl MaskConfig {
    pub fn new(variant: MaskVariant) -> Self {
        MaskConfig { variant, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Pass,
    Fail,
    Skipped,
}

impl Check {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Check::Pass
        } else {
            Check::Fail
        }
    }

    pub fn is_fail(self) -> bool {
        self == Check::Fail
    }
}

/// Mask component names in evaluation order, plus the two pre-checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// Footprint leaves the grid.
    Bounds,
    /// Portrait twin of a square brick.
    Redundant,
    T,
    C,
    I,
    O,
    S,
    U,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskVerdict {
    pub in_bounds: bool,
    pub redundant: bool,
    pub t: Check,
    pub c: Check,
    pub i: Check,
    pub o: Check,
    pub s: Check,
    pub u: Check,
    pub overall: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl MaskVerdict {
    fn skipped() -> Self {
        MaskVerdict {
            in_bounds: true,
            redundant: false,
            t: Check::Skipped,
            c: Check::Skipped,
            i: Check::Skipped,
            o: Check::Skipped,
            s: Check::Skipped,
            u: Check::Skipped,
            overall: false,
            diagnostic: None,
        }
    }

    /// First failing component in evaluation order.
    pub fn first_failure(&self) -> Option<Constraint> {
        if !self.in_bounds {
            return Some(Constraint::Bounds);
        }
        if self.redundant {
            return Some(Constraint::Redundant);
        }
        [
            (self.t, Constraint::T),
            (self.c, Constraint::C),
            (self.i, Constraint::I),
            (self.o, Constraint::O),
            (self.s, Constraint::S),
            (self.u, Constraint::U),
        ]
        .into_iter()
        .find(|(c, _)| c.is_fail())
        .map(|(_, k)| k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AuditMode {
    #[default]
    ShortCircuit,
    /// Evaluate every configured component regardless of earlier failures.
    Full,
}

/// Wall-clock accounting for mask evaluation, shareable across threads.
#[derive(Debug, Default)]
pub struct MaskTimers {
    pub mask_ns: AtomicU64,
    pub stability_ns: AtomicU64,
    pub mask_calls: AtomicU64,
    pub stability_calls: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimerSnapshot {
    pub mask_secs: f64,
    pub stability_secs: f64,
    pub mask_calls: u64,
    pub stability_calls: u64,
}

impl MaskTimers {
    pub fn snapshot(&self) -> TimerSnapshot {
        TimerSnapshot {
            mask_secs: self.mask_ns.load(Ordering::Relaxed) as f64 * 1e-9,
            stability_secs: self.stability_ns.load(Ordering::Relaxed) as f64 * 1e-9,
            mask_calls: self.mask_calls.load(Ordering::Relaxed),
            stability_calls: self.stability_calls.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        for a in [&self.mask_ns, &self.stability_ns, &self.mask_calls, &self.stability_calls] {
            a.store(0, Ordering::Relaxed);
        }
    }
}

/// Footprint ⊆ target. An out-of-bounds footprint is never task-oriented.
pub fn task_oriented(state: &AssemblyState, action: &Action) -> bool {
    let dims = state.dims();
    match state.footprint(action) {
        Ok(fp) => fp.cells().all(|c| state.target().bit(dims.index(c))),
        Err(_) => false,
    }
}

/// Footprint ∩ current = ∅.
pub fn collision_free(state: &AssemblyState, action: &Action) -> bool {
    match state.footprint(action) {
        Ok(fp) => fp.occupied_in(state.current()) == 0,
        Err(_) => false,
    }
}

pub fn inventory_ok(state: &AssemblyState, action: &Action) -> bool {
    state.inventory().get(action.brick) > 0
}

/// Occupied cells of the footprint's extent one layer above and below.
/// Below layer 0 the plate counts as fully occupied; above the top layer is empty.
pub fn operability_counts(state: &AssemblyState, fp: &Footprint) -> (usize, usize) {
    let above = if fp.z + 1 < state.dims().d { fp.at_layer(fp.z + 1).occupied_in(state.current()) } else { 0 };
    let below = if fp.z == 0 { fp.len() } else { fp.at_layer(fp.z - 1).occupied_in(state.current()) };
    (above, below)
}

pub fn operable(state: &AssemblyState, action: &Action) -> bool {
    match state.footprint(action) {
        Ok(fp) => {
            let (above, below) = operability_counts(state, &fp);
            above == 0 || below == 0
        }
        Err(_) => false,
    }
}

fn candidate_body(state: &AssemblyState, action: &Action) -> Result<ExtraBody> {
    Ok(ExtraBody {
        footprint: state.footprint(action)?,
        weight: state.catalog().get(action.brick)?.weight(),
        links: Links::Geometric,
    })
}

/// Full stability of `G_t ∪ {action}`, solving every component from scratch.
pub fn stable_next(state: &AssemblyState, action: &Action, cfg: &StabilityConfig) -> Result<bool> {
    let body = candidate_body(state, action)?;
    Ok(stability::assess_stability(state.graph(), state.catalog(), &[body], cfg)?.stable)
}

/// Every brick of `G_t ∪ {action}` has a path to the ground.
pub fn heuristic_stable(state: &AssemblyState, action: &Action) -> bool {
    let Ok(fp) = state.footprint(action) else { return false };
    let graph = state.graph();
    let n = graph.len();
    let mut edges = graph.edges().to_vec();
    edges.extend(graph.edges_for(&fp, n));
    grounded_flags(n + 1, &edges).into_iter().all(|g| g)
}

/// Clearance volume free and the structure survives the insertion press.
pub fn robot_manipulable(
    state: &AssemblyState,
    action: &Action,
    robot: &RobotParams,
    cfg: &StabilityConfig,
) -> Result<bool> {
    let fp = state.footprint(action)?;
    let dims = state.dims();
    let clear = robot.clearance.cells(&fp, robot.grasp, dims).into_iter().all(|c| !state.current().bit(dims.index(c)));
    if !clear {
        return Ok(false);
    }
    let r = stability::dynamic_stability_robot(state.graph(), action, state.catalog(), robot.press_weight, robot.grasp, cfg)?;
    Ok(r.stable)
}

/// Short-circuit mask evaluation of one action.
pub fn mask(state: &AssemblyState, action: &Action, config: &MaskConfig) -> MaskVerdict {
    evaluate(state, action, config, AuditMode::ShortCircuit, &mut |s, a| stable_next(s, a, &config.stability), None)
}

/// Evaluate every configured component, even after a failure.
pub fn mask_audit(state: &AssemblyState, action: &Action, config: &MaskConfig) -> MaskVerdict {
    evaluate(state, action, config, AuditMode::Full, &mut |s, a| stable_next(s, a, &config.stability), None)
}

type StableFn<'a> = dyn FnMut(&AssemblyState, &Action) -> Result<bool> + 'a;

fn evaluate(
    state: &AssemblyState,
    action: &Action,
    config: &MaskConfig,
    mode: AuditMode,
    stable: &mut StableFn<'_>,
    timers: Option<&MaskTimers>,
) -> MaskVerdict {
    let start = Instant::now();
    let mut v = MaskVerdict::skipped();
    if action.brick >= state.catalog().len() || state.footprint(action).is_err() {
        v.in_bounds = false;
    } else if action.is_redundant(state.catalog()) {
        v.redundant = true;
    } else {
        let variant = config.variant;
        let mut ok = true;
        let go = |ok: bool| ok || mode == AuditMode::Full;
        v.t = Check::from_bool(task_oriented(state, action));
        ok &= !v.t.is_fail();
        if go(ok) {
            v.c = Check::from_bool(collision_free(state, action));
            ok &= !v.c.is_fail();
        }
        if go(ok) {
            v.i = Check::from_bool(inventory_ok(state, action));
            ok &= !v.i.is_fail();
        }
        if variant.checks_operability() && go(ok) {
            v.o = Check::from_bool(operable(state, action));
            ok &= !v.o.is_fail();
        }
        if variant.checks_heuristic() && go(ok) {
            v.s = Check::from_bool(heuristic_stable(state, action));
            ok &= !v.s.is_fail();
        }
        if variant.checks_stability() && go(ok) {
            let t0 = Instant::now();
            let r = stable(state, action);
            if let Some(tm) = timers {
                tm.stability_ns.fetch_add(t0.elapsed().as_nanos() as u64, Ordering::Relaxed);
                tm.stability_calls.fetch_add(1, Ordering::Relaxed);
            }
            v.s = match r {
                Ok(b) => Check::from_bool(b),
                Err(e) => {
                    log::warn!("stability evaluation failed for {action:?}: {e}");
                    v.diagnostic = Some(format!("S: {e}"));
                    Check::Fail
                }
            };
            ok &= !v.s.is_fail();
        }
        if variant.checks_robot() && go(ok) {
            v.u = match robot_manipulable(state, action, &config.robot, &config.stability) {
                Ok(b) => Check::from_bool(b),
                Err(e) => {
                    log::warn!("robot check failed for {action:?}: {e}");
                    v.diagnostic = Some(format!("U: {e}"));
                    Check::Fail
                }
            };
            ok &= !v.u.is_fail();
        }
        v.overall = ok;
    }
    if let Some(tm) = timers {
        tm.mask_ns.fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        tm.mask_calls.fetch_add(1, Ordering::Relaxed);
    }
    v
}

/// Packed validity bits over the flat action space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionBitmap {
    len: usize,
    words: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleBitmap {
    pub len: usize,
    /// `[start, length]` runs of set bits.
    pub runs: Vec<[usize; 2]>,
}

impl ActionBitmap {
    pub fn new(len: usize) -> Self {
        ActionBitmap { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut b = Self::new(bits.len());
        for (i, &v) in bits.iter().enumerate() {
            if v {
                b.set(i);
            }
        }
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn none(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }

    pub fn to_rle(&self) -> RleBitmap {
        let mut runs: Vec<[usize; 2]> = Vec::new();
        for i in self.ones() {
            match runs.last_mut() {
                Some(r) if r[0] + r[1] == i => r[1] += 1,
                _ => runs.push([i, 1]),
            }
        }
        RleBitmap { len: self.len, runs }
    }

    pub fn from_rle(rle: &RleBitmap) -> Result<Self> {
        let mut b = Self::new(rle.len);
        for &[start, n] in &rle.runs {
            if start + n > rle.len {
                return Err(Error::Malformed(format!("run {start}+{n} exceeds bitmap length {}", rle.len)));
            }
            (start..start + n).for_each(|i| b.set(i));
        }
        Ok(b)
    }
}

/// Per-state evaluator that reuses stability results of components the
/// candidate brick does not touch.
pub struct MaskContext<'a> {
    state: &'a AssemblyState,
    config: &'a MaskConfig,
    base: HashMap<Vec<usize>, ComponentResult>,
    timers: Option<&'a MaskTimers>,
}

impl<'a> MaskContext<'a> {
    pub fn new(state: &'a AssemblyState, config: &'a MaskConfig) -> Self {
        Self::with_timers(state, config, None)
    }

    pub fn with_timers(state: &'a AssemblyState, config: &'a MaskConfig, timers: Option<&'a MaskTimers>) -> Self {
        let mut base = HashMap::new();
        if config.variant.checks_stability() && !state.graph().is_empty() {
            let t0 = Instant::now();
            let solved = build_force_model(state.graph(), state.catalog(), &[])
                .and_then(|m| m.solve_with(&config.stability, |_| None));
            match solved {
                Ok((_, results)) => base.extend(results),
                Err(e) => log::warn!("base stability evaluation failed: {e}"),
            }
            if let Some(tm) = timers {
                tm.stability_ns.fetch_add(t0.elapsed().as_nanos() as u64, Ordering::Relaxed);
            }
        }
        MaskContext { state, config, base, timers }
    }

    pub fn state(&self) -> &AssemblyState {
        self.state
    }

    pub fn space(&self) -> ActionSpace {
        ActionSpace::new(self.state.dims(), self.state.catalog().len())
    }

    fn stable_incremental(&self, action: &Action) -> Result<bool> {
        let body = candidate_body(self.state, action)?;
        let model = build_force_model(self.state.graph(), self.state.catalog(), &[body])?;
        let (report, _) = model.solve_with(&self.config.stability, |comp| self.base.get(comp).cloned())?;
        Ok(report.stable)
    }

    pub fn evaluate(&self, action: &Action, mode: AuditMode) -> MaskVerdict {
        evaluate(self.state, action, self.config, mode, &mut |_, a| self.stable_incremental(a), self.timers)
    }

    pub fn is_valid(&self, index: usize) -> bool {
        self.evaluate(&self.space().action(index), AuditMode::ShortCircuit).overall
    }

    /// Validity bitmap over the whole action space.
    pub fn enumerate(&self) -> ActionBitmap {
        let space = self.space();
        let bits: Vec<bool> = (0..space.size()).into_par_iter().map(|i| self.is_valid(i)).collect();
        ActionBitmap::from_bools(&bits)
    }

    /// First valid action index in `order`, evaluating lazily.
    pub fn first_valid(&self, order: impl IntoIterator<Item = usize>) -> Option<usize> {
        order.into_iter().find(|&i| self.is_valid(i))
    }
}

pub fn enumerate_valid(state: &AssemblyState, config: &MaskConfig) -> ActionBitmap {
    MaskContext::new(state, config).enumerate()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{BrickCatalog, Dims, Orientation::*, VoxelGrid};
    use crate::state::Inventory;

    const B11: usize = 0;
    const B12: usize = 1;
    const B14: usize = 2;
    const B18: usize = 4;
    const B24: usize = 6;

    fn state_with(dims: Dims, target: Option<&[(usize, usize, usize)]>, inv: Inventory, actions: &[Action]) -> AssemblyState {
        let t = match target {
            Some(cells) => VoxelGrid::from_cells(dims, cells.iter().map(|&(x, y, z)| Cell::new(x, y, z))).unwrap(),
            None => VoxelGrid::full(dims),
        };
        let mut s = AssemblyState::new(t, inv, Arc::new(BrickCatalog::default())).unwrap();
        for a in actions {
            s.apply_in_place(a).unwrap();
        }
        s
    }

    fn open(dims: Dims, actions: &[Action]) -> AssemblyState {
        state_with(dims, None, Inventory::uniform(8, 20), actions)
    }

    #[test]
    fn task_oriented_cases() {
        let dims = Dims::new(4, 4, 2).unwrap();
        let s = state_with(dims, Some(&[(0, 0, 0), (0, 1, 0), (0, 2, 0)]), Inventory::uniform(8, 2), &[]);
        assert!(task_oriented(&s, &Action::new(B12, 0, 0, 0, Landscape)));
        assert!(!task_oriented(&s, &Action::new(B12, 0, 0, 0, Portrait)));
        // 1x4 with three cells inside the target and one outside
        assert!(!task_oriented(&s, &Action::new(B14, 0, 0, 0, Landscape)));
    }

    #[test]
    fn collision_cases() {
        let dims = Dims::new(4, 4, 2).unwrap();
        let s = open(dims, &[]);
        assert!(collision_free(&s, &Action::new(B24, 0, 0, 0, Landscape)));
        let s = open(dims, &[Action::new(B11, 1, 3, 0, Landscape)]);
        assert!(!collision_free(&s, &Action::new(B11, 1, 3, 0, Landscape)));
        assert!(!collision_free(&s, &Action::new(B24, 0, 0, 0, Landscape)));
        assert!(collision_free(&s, &Action::new(B24, 2, 0, 0, Landscape)));
    }

    #[test]
    fn inventory_cases() {
        let dims = Dims::new(4, 4, 2).unwrap();
        let mut inv = Inventory::uniform(8, 0);
        inv.counts[B11] = 3;
        inv.counts[B12] = 1;
        let s = state_with(dims, None, inv, &[]);
        assert!(inventory_ok(&s, &Action::new(B11, 0, 0, 0, Landscape)));
        assert!(!inventory_ok(&s, &Action::new(B14, 0, 0, 0, Landscape)));
        let a = Action::new(B12, 0, 0, 0, Landscape);
        assert!(inventory_ok(&s, &a));
        let s = s.apply(&a).unwrap();
        assert!(!inventory_ok(&s, &Action::new(B12, 2, 0, 0, Landscape)));
    }

    #[test]
    fn operability_cases() {
        let dims = Dims::new(1, 4, 3).unwrap();
        let s = open(dims, &[]);
        assert!(operable(&s, &Action::new(B12, 0, 0, 0, Landscape)));
        // pocket: floor at z=0, roof at z=2, insert at z=1 with both sides occupied
        let s = open(
            dims,
            &[
                Action::new(B14, 0, 0, 0, Landscape),
                Action::new(B11, 0, 0, 1, Landscape),
                Action::new(B11, 0, 3, 1, Landscape),
                Action::new(B14, 0, 0, 2, Landscape),
            ],
        );
        assert!(!operable(&s, &Action::new(B12, 0, 1, 1, Landscape)));
        // bridge over two pillars with nothing above
        let s = open(dims, &[Action::new(B11, 0, 0, 0, Landscape), Action::new(B11, 0, 3, 0, Landscape)]);
        assert!(operable(&s, &Action::new(B14, 0, 0, 1, Landscape)));
        // layer 0 under an overhang: plate below, brick above
        let s = open(dims, &[Action::new(B11, 0, 0, 0, Landscape), Action::new(B12, 0, 0, 1, Landscape)]);
        assert!(!operable(&s, &Action::new(B11, 0, 1, 0, Landscape)));
    }

    #[test]
    fn stability_cases() {
        let dims = Dims::new(2, 8, 3).unwrap();
        let cfg = StabilityConfig::default();
        let s = open(dims, &[]);
        assert!(stable_next(&s, &Action::new(B11, 0, 0, 0, Landscape), &cfg).unwrap());
        assert!(!stable_next(&s, &Action::new(B12, 0, 0, 2, Landscape), &cfg).unwrap());
        let s = open(dims, &[Action::new(B11, 0, 0, 0, Landscape)]);
        assert!(!stable_next(&s, &Action::new(B18, 0, 0, 1, Landscape), &cfg).unwrap());
    }

    #[test]
    fn heuristic_accepts_connected_cantilever() {
        let dims = Dims::new(2, 8, 3).unwrap();
        let s = open(dims, &[]);
        assert!(heuristic_stable(&s, &Action::new(B11, 0, 0, 0, Landscape)));
        assert!(!heuristic_stable(&s, &Action::new(B11, 0, 0, 2, Landscape)));
        let s = open(dims, &[Action::new(B12, 0, 0, 0, Landscape)]);
        let a = Action::new(B18, 0, 0, 1, Landscape);
        assert!(heuristic_stable(&s, &a));
        assert!(!stable_next(&s, &a, &StabilityConfig::default()).unwrap());
        let full = mask(&s, &a, &MaskConfig::new(MaskVariant::Full));
        let heur = mask(&s, &a, &MaskConfig::new(MaskVariant::Heuristic));
        assert!(heur.overall && !full.overall);
        assert_eq!(full.first_failure(), Some(Constraint::S));
    }

    #[test]
    fn robot_clearance_cases() {
        let dims = Dims::new(1, 4, 3).unwrap();
        let robot = RobotParams::default();
        let cfg = StabilityConfig::default();
        let s = open(dims, &[]);
        assert!(robot_manipulable(&s, &Action::new(B12, 0, 0, 0, Landscape), &robot, &cfg).unwrap());
        // a 1x2 overhangs y=1 at z=1, so the column above (0,1,0) is blocked
        let s = open(dims, &[Action::new(B11, 0, 0, 0, Landscape), Action::new(B12, 0, 0, 1, Landscape)]);
        assert!(!robot_manipulable(&s, &Action::new(B11, 0, 1, 0, Landscape), &robot, &cfg).unwrap());
    }

    #[test]
    fn robot_mask_fails_on_occupied_clearance() {
        // the neighbouring 1x1 at (0,0,1) sits in the gripper ring of (0,1,1)
        let dims = Dims::new(1, 4, 3).unwrap();
        let s = open(dims, &[Action::new(B14, 0, 0, 0, Landscape), Action::new(B11, 0, 0, 1, Landscape)]);
        let a = Action::new(B11, 0, 1, 1, Landscape);
        let full = mask(&s, &a, &MaskConfig::new(MaskVariant::Full));
        assert!(full.overall);
        let robot = mask(&s, &a, &MaskConfig::new(MaskVariant::Robot));
        assert!(!robot.overall);
        assert_eq!(robot.u, Check::Fail);
    }

    #[test]
    fn verdict_short_circuits_after_first_failure() {
        let dims = Dims::new(4, 4, 2).unwrap();
        let s = state_with(dims, Some(&[(0, 0, 0)]), Inventory::uniform(8, 1), &[]);
        let cfg = MaskConfig::new(MaskVariant::Full);
        let v = mask(&s, &Action::new(B11, 3, 3, 0, Landscape), &cfg);
        assert_eq!(v.t, Check::Fail);
        assert_eq!((v.c, v.i, v.o, v.s, v.u), (Check::Skipped, Check::Skipped, Check::Skipped, Check::Skipped, Check::Skipped));
        assert!(!v.overall);
        let audit = mask_audit(&s, &Action::new(B11, 3, 3, 0, Landscape), &cfg);
        assert_eq!(audit.c, Check::Pass);
        assert_eq!(audit.s, Check::Pass);
        assert!(!audit.overall);
        let ok = mask(&s, &Action::new(B11, 0, 0, 0, Landscape), &cfg);
        assert!(ok.overall);
        assert_eq!((ok.t, ok.c, ok.i, ok.o, ok.s), (Check::Pass, Check::Pass, Check::Pass, Check::Pass, Check::Pass));
    }

    #[test]
    fn square_portrait_twin_is_redundant() {
        let dims = Dims::new(2, 2, 1).unwrap();
        let s = open(dims, &[]);
        let v = mask(&s, &Action::new(B11, 0, 0, 0, Portrait), &MaskConfig::new(MaskVariant::Intuitive));
        assert!(v.redundant && !v.overall);
        assert_eq!(v.first_failure(), Some(Constraint::Redundant));
    }

    #[test]
    fn enumerate_small_layer_with_unit_bricks() {
        let dims = Dims::new(2, 2, 1).unwrap();
        let mut inv = Inventory::uniform(8, 0);
        inv.counts[B11] = 4;
        let s = state_with(dims, None, inv, &[]);
        let bm = enumerate_valid(&s, &MaskConfig::new(MaskVariant::Full));
        assert_eq!(bm.len(), 2 * 2 * 8 * 2);
        // brute force over the whole action space
        let brute: Vec<usize> =
            (0..bm.len()).filter(|&i| mask(&s, &ActionSpace::new(dims, 8).action(i), &MaskConfig::default()).overall).collect();
        assert_eq!(brute.len(), 4);
        assert_eq!(bm.ones().collect::<Vec<_>>(), brute);
    }

    #[test]
    fn enumerate_empty_cases() {
        let dims = Dims::new(2, 2, 1).unwrap();
        let s = state_with(dims, None, Inventory::uniform(8, 0), &[]);
        assert!(enumerate_valid(&s, &MaskConfig::default()).none());
        let s = state_with(dims, None, Inventory::uniform(8, 4), &[Action::new(5, 0, 0, 0, Landscape)]);
        assert!(s.is_complete());
        assert!(enumerate_valid(&s, &MaskConfig::default()).none());
    }

    #[test]
    fn rle_roundtrip() {
        let bm = ActionBitmap::from_bools(&[false, true, true, false, true, false, false, true, true, true]);
        let rle = bm.to_rle();
        assert_eq!(rle.runs, vec![[1, 2], [4, 1], [7, 3]]);
        assert_eq!(ActionBitmap::from_rle(&rle).unwrap(), bm);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("FULL".parse::<MaskVariant>().unwrap(), MaskVariant::Full);
        assert!("bogus".parse::<MaskVariant>().is_err());
    }
}
