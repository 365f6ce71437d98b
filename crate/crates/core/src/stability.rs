//! Static stability of brick structures.
//!
//! Every shared stud cell between two vertically adjacent bodies (or between a
//! body and the base plate) is a knob carrying one signed vertical force `f`:
//! positive values push the upper body up (compression), negative values pull
//! it down (interlock tension). Each body must satisfy vertical force balance
//! and moment balance about both horizontal axes through its centroid.
//!
//! The solver looks for the force distribution that minimizes the worst
//! normalized tension:
//!
//! ```text
//! minimize m  s.t.  equilibrium(f),  f_k ≥ -m · T_pull  ∀k,  m ≥ 0
//! ```
//!
//! A structure is stable when the program is feasible and `m* < 1 - ε`.
//! Bodies that are not linked by knobs decouple, so each connected component
//! is solved as its own program.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Action, BrickCatalog, Footprint};
use crate::lp::{self, LinearProgram, LpStatus};
use crate::state::{AssemblyGraph, Edge, Support};

pub const DEFAULT_T_PULL: f64 = 4.0;
pub const DEFAULT_EPS_STAB: f64 = 1e-6;
/// Press load of the robot modelled as a virtual brick, in brick weight units.
pub const DEFAULT_PRESS_WEIGHT: f64 = 98.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    /// Largest tension one knob sustains. Zero models frictionless stacking.
    pub t_pull: f64,
    pub eps_stab: f64,
    /// Simplex iteration cap as a multiple of `variables + constraints`.
    pub iteration_factor: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { t_pull: DEFAULT_T_PULL, eps_stab: DEFAULT_EPS_STAB, iteration_factor: 10 }
    }
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_pull >= 0.0 && self.t_pull.is_finite()) {
            return Err(Error::InvalidConfig(format!("t_pull must be finite and >= 0, got {}", self.t_pull)));
        }
        if !(self.eps_stab >= 0.0 && self.eps_stab < 1.0) {
            return Err(Error::InvalidConfig(format!("eps_stab must lie in [0, 1), got {}", self.eps_stab)));
        }
        if self.iteration_factor == 0 {
            return Err(Error::InvalidConfig("iteration_factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BodyKind {
    Placement(usize),
    /// A body added on top of the graph: candidate brick or virtual load.
    Extra(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub footprint: Footprint,
    pub weight: f64,
    pub kind: BodyKind,
}

impl Body {
    fn centroid(&self) -> (f64, f64) {
        let fp = &self.footprint;
        (fp.x0 as f64 + fp.ex as f64 / 2.0, fp.y0 as f64 + fp.ey as f64 / 2.0)
    }
}

/// How an extra body attaches to the rest of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Links {
    /// Knobs wherever it touches placed bricks, the plate, or earlier geometric extras.
    Geometric,
    /// Knobs only to the given model body, across the full shared extent.
    Only(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtraBody {
    pub footprint: Footprint,
    pub weight: f64,
    pub links: Links,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    /// `None` is the base plate.
    pub lower: Option<usize>,
    pub upper: usize,
    pub knobs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquationKind {
    Force,
    /// Moment about the x axis (lever arms along y).
    MomentX,
    /// Moment about the y axis (lever arms along x).
    MomentY,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub body: usize,
    pub kind: EquationKind,
    /// `(knob variable, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Equation {
    /// All coefficients vanish, e.g. moments of a one-stud-wide brick.
    pub fn is_degenerate(&self) -> bool {
        self.coeffs.iter().all(|&(_, c)| c.abs() < 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceModel {
    pub bodies: Vec<Body>,
    pub interfaces: Vec<Interface>,
    /// First knob variable of each interface.
    offsets: Vec<usize>,
    /// Interfaces touching each body.
    incident: Vec<Vec<usize>>,
    n_knobs: usize,
}

fn interface_from_edge(e: &Edge) -> Interface {
    Interface {
        lower: match e.lower {
            Support::Ground => None,
            Support::Brick(i) => Some(i),
        },
        upper: e.upper,
        knobs: e.knobs.clone(),
    }
}

fn overlap(a: &Footprint, b: &Footprint) -> Vec<(usize, usize)> {
    let x0 = a.x0.max(b.x0);
    let x1 = (a.x0 + a.ex).min(b.x0 + b.ex);
    let y0 = a.y0.max(b.y0);
    let y1 = (a.y0 + a.ey).min(b.y0 + b.ey);
    let mut knobs = Vec::new();
    for x in x0..x1 {
        for y in y0..y1 {
            knobs.push((x, y));
        }
    }
    knobs
}

/// Assemble the force model of `graph` plus `extras` (appended after the placements).
pub fn build_force_model(graph: &AssemblyGraph, catalog: &BrickCatalog, extras: &[ExtraBody]) -> Result<ForceModel> {
    let mut bodies = Vec::with_capacity(graph.len() + extras.len());
    for (i, (a, fp)) in graph.placements().iter().zip(graph.footprints()).enumerate() {
        bodies.push(Body { footprint: *fp, weight: catalog.get(a.brick)?.weight(), kind: BodyKind::Placement(i) });
    }
    let mut interfaces: Vec<Interface> = graph.edges().iter().map(interface_from_edge).collect();
    let dims = graph.dims();
    for (j, extra) in extras.iter().enumerate() {
        let index = bodies.len();
        let fp = extra.footprint;
        match extra.links {
            Links::Geometric => {
                let in_grid = fp.x0 + fp.ex <= dims.h && fp.y0 + fp.ey <= dims.w && fp.z < dims.d;
                if !in_grid {
                    return Err(Error::OutOfBounds { cell: [fp.x0 as i64, fp.y0 as i64, fp.z as i64], dims });
                }
                interfaces.extend(graph.edges_for(&fp, index).iter().map(interface_from_edge));
                for (k, prev) in extras[..j].iter().enumerate() {
                    if prev.links != Links::Geometric {
                        continue;
                    }
                    let other = graph.len() + k;
                    if prev.footprint.z + 1 == fp.z {
                        let knobs = overlap(&prev.footprint, &fp);
                        if !knobs.is_empty() {
                            interfaces.push(Interface { lower: Some(other), upper: index, knobs });
                        }
                    } else if fp.z + 1 == prev.footprint.z {
                        let knobs = overlap(&prev.footprint, &fp);
                        if !knobs.is_empty() {
                            interfaces.push(Interface { lower: Some(index), upper: other, knobs });
                        }
                    }
                }
            }
            Links::Only(target) => {
                let t = bodies
                    .get(target)
                    .ok_or_else(|| Error::InvalidConfig(format!("extra body links to missing body {target}")))?;
                let knobs = overlap(&t.footprint, &fp);
                if t.footprint.z + 1 == fp.z {
                    interfaces.push(Interface { lower: Some(target), upper: index, knobs });
                } else if fp.z + 1 == t.footprint.z {
                    interfaces.push(Interface { lower: Some(index), upper: target, knobs });
                }
            }
        }
        bodies.push(Body { footprint: fp, weight: extra.weight, kind: BodyKind::Extra(j) });
    }
    let mut offsets = Vec::with_capacity(interfaces.len());
    let mut incident = vec![Vec::new(); bodies.len()];
    let mut n_knobs = 0;
    for (k, itf) in interfaces.iter().enumerate() {
        offsets.push(n_knobs);
        n_knobs += itf.knobs.len();
        incident[itf.upper].push(k);
        if let Some(l) = itf.lower {
            incident[l].push(k);
        }
    }
    Ok(ForceModel { bodies, interfaces, offsets, incident, n_knobs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrickScore {
    /// Worst tension over capacity; may exceed 1.
    pub raw: f64,
    /// `raw` clipped to `[0, 1]` for reporting.
    pub clipped: f64,
    pub over_capacity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub runtime_us: u64,
    pub components: usize,
    pub lp_solves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub feasible: bool,
    /// One entry per model body (placements first); absent when infeasible.
    pub scores: Option<Vec<BrickScore>>,
    /// Largest raw score; infinite when infeasible.
    pub max_score: f64,
    pub stable: bool,
    pub stats: SolveStats,
}

/// Outcome of one connected component's program.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentResult {
    pub feasible: bool,
    /// Knob forces for the component's interfaces, in model interface order.
    pub forces: Vec<(usize, Vec<f64>)>,
    pub iterations: usize,
}

impl ForceModel {
    pub fn n_knobs(&self) -> usize {
        self.n_knobs
    }

    /// All equilibrium equations, three per body, including degenerate ones.
    pub fn equations(&self) -> Vec<Equation> {
        (0..self.bodies.len()).flat_map(|i| self.body_equations(i)).collect()
    }

    /// Force balance and the two moment balances of body `i`.
    pub fn body_equations(&self, i: usize) -> [Equation; 3] {
        let b = &self.bodies[i];
        let (cx, cy) = b.centroid();
        let mut force = Vec::new();
        let mut mx = Vec::new();
        let mut my = Vec::new();
        for &k in &self.incident[i] {
            let itf = &self.interfaces[k];
            let off = self.offsets[k];
            let sign = if itf.upper == i { 1.0 } else { -1.0 };
            for (j, &(kx, ky)) in itf.knobs.iter().enumerate() {
                force.push((off + j, sign));
                mx.push((off + j, sign * (ky as f64 + 0.5 - cy)));
                my.push((off + j, sign * (kx as f64 + 0.5 - cx)));
            }
        }
        [
            Equation { body: i, kind: EquationKind::Force, coeffs: force, rhs: b.weight },
            Equation { body: i, kind: EquationKind::MomentX, coeffs: mx, rhs: 0.0 },
            Equation { body: i, kind: EquationKind::MomentY, coeffs: my, rhs: 0.0 },
        ]
    }

    /// Connected components over brick-to-brick interfaces, each sorted ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.bodies.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for itf in &self.interfaces {
            if let Some(l) = itf.lower {
                let (a, b) = (find(&mut parent, l), find(&mut parent, itf.upper));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
        comps.sort_by_key(|c| c[0]);
        comps
    }

    /// Solve the min–max program restricted to `bodies` (one component).
    pub fn solve_component(&self, bodies: &[usize], cfg: &StabilityConfig) -> Result<ComponentResult> {
        let member = |i: usize| bodies.binary_search(&i).is_ok();
        let itfs: Vec<usize> = (0..self.interfaces.len()).filter(|&k| member(self.interfaces[k].upper)).collect();
        let mut local = HashMap::new();
        let mut n_local = 0;
        for &k in &itfs {
            for j in 0..self.interfaces[k].knobs.len() {
                local.insert(self.offsets[k] + j, n_local);
                n_local += 1;
            }
        }
        let eqs: Vec<Equation> = bodies
            .iter()
            .flat_map(|&i| self.body_equations(i))
            .filter(|e| !(e.is_degenerate() && e.rhs == 0.0))
            .collect();
        if eqs.iter().any(|e| e.is_degenerate()) {
            // unsupported load with no knob to carry it
            return Ok(ComponentResult { feasible: false, forces: Vec::new(), iterations: 0 });
        }
        let with_m = cfg.t_pull > 0.0;
        let n_vars = n_local + usize::from(with_m);
        let mut program = LinearProgram::new(n_vars);
        if with_m {
            program.objective[n_local] = 1.0;
        }
        for e in &eqs {
            let mut row = vec![0.0; n_vars];
            let mut sum = 0.0;
            for &(var, c) in &e.coeffs {
                row[local[&var]] += c;
                sum += c;
            }
            if with_m {
                // f = g - T·m with g ≥ 0
                row[n_local] = -cfg.t_pull * sum;
            }
            program.add_eq(row, e.rhs);
        }
        let cap = cfg.iteration_factor * (program.n_vars + program.rows.len()).max(1);
        let sol = lp::solve_with_cap(&program, cap)?;
        if sol.status != LpStatus::Optimal {
            return Ok(ComponentResult { feasible: false, forces: Vec::new(), iterations: sol.iterations });
        }
        let m = if with_m { sol.x[n_local] } else { 0.0 };
        let mut forces = Vec::with_capacity(itfs.len());
        for &k in &itfs {
            let f = (0..self.interfaces[k].knobs.len())
                .map(|j| sol.x[local[&(self.offsets[k] + j)]] - cfg.t_pull * m)
                .collect();
            forces.push((k, f));
        }
        Ok(ComponentResult { feasible: true, forces, iterations: sol.iterations })
    }

    /// Solve every component; `cached` may supply results for components already solved.
    pub fn solve_with(
        &self,
        cfg: &StabilityConfig,
        mut cached: impl FnMut(&[usize]) -> Option<ComponentResult>,
    ) -> Result<(StabilityReport, Vec<(Vec<usize>, ComponentResult)>)> {
        let start = Instant::now();
        let mut stats = SolveStats::default();
        let mut results = Vec::new();
        for comp in self.components() {
            let r = match cached(&comp) {
                Some(r) => r,
                None => {
                    stats.lp_solves += 1;
                    self.solve_component(&comp, cfg)?
                }
            };
            stats.iterations += r.iterations;
            stats.components += 1;
            results.push((comp, r));
        }
        let feasible = results.iter().all(|(_, r)| r.feasible);
        let mut report = StabilityReport { feasible, scores: None, max_score: f64::INFINITY, stable: false, stats };
        if feasible {
            let mut raw = vec![0.0f64; self.bodies.len()];
            if cfg.t_pull > 0.0 {
                for (_, r) in &results {
                    for (k, f) in &r.forces {
                        let itf = &self.interfaces[*k];
                        let worst = f.iter().fold(0.0f64, |acc, &v| acc.max(-v)) / cfg.t_pull;
                        raw[itf.upper] = raw[itf.upper].max(worst);
                        if let Some(l) = itf.lower {
                            raw[l] = raw[l].max(worst);
                        }
                    }
                }
            }
            let max_score = raw.iter().copied().fold(0.0, f64::max);
            report.scores = Some(
                raw.iter()
                    .map(|&r| BrickScore { raw: r, clipped: r.clamp(0.0, 1.0), over_capacity: r >= 1.0 })
                    .collect(),
            );
            report.max_score = max_score;
            report.stable = max_score < 1.0 - cfg.eps_stab;
        }
        report.stats.runtime_us = start.elapsed().as_micros() as u64;
        Ok((report, results))
    }

    pub fn solve(&self, cfg: &StabilityConfig) -> Result<StabilityReport> {
        self.solve_with(cfg, |_| None).map(|(r, _)| r)
    }
}

pub fn assess_stability(
    graph: &AssemblyGraph,
    catalog: &BrickCatalog,
    extras: &[ExtraBody],
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    build_force_model(graph, catalog, extras)?.solve(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grasp {
    /// Robot holds the brick from above and presses down.
    #[default]
    Top,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotStability {
    pub stable: bool,
    pub support: Option<Action>,
}

/// Stability while a robot forces `action` into place.
///
/// The press is a heavy virtual copy of the brick one layer above (top grasp)
/// or below (bottom grasp). If the loaded structure fails, a supporting
/// virtual brick of the same type with negative weight is searched bottom-up,
/// row-major over every free in-bounds position.
pub fn dynamic_stability_robot(
    graph: &AssemblyGraph,
    action: &Action,
    catalog: &BrickCatalog,
    press_weight: f64,
    grasp: Grasp,
    cfg: &StabilityConfig,
) -> Result<RobotStability> {
    let dims = graph.dims();
    let fp = action.footprint(catalog, dims)?;
    let weight = catalog.get(action.brick)?.weight();
    let candidate = ExtraBody { footprint: fp, weight, links: Links::Geometric };
    let cand_index = graph.len();
    let press = match grasp {
        Grasp::Top => Some(ExtraBody { footprint: fp.at_layer(fp.z + 1), weight: press_weight, links: Links::Only(cand_index) }),
        // pressing against the plate transfers the load straight to ground
        Grasp::Bottom if fp.z == 0 => None,
        Grasp::Bottom => Some(ExtraBody { footprint: fp.at_layer(fp.z - 1), weight: press_weight, links: Links::Only(cand_index) }),
    };
    let mut extras = vec![candidate];
    extras.extend(press);
    if assess_stability(graph, catalog, &extras, cfg)?.stable {
        return Ok(RobotStability { stable: true, support: None });
    }
    let Some(press) = press else {
        return Ok(RobotStability { stable: false, support: None });
    };
    let occupied = |x: usize, y: usize, z: usize| {
        let c = crate::geometry::Cell::new(x, y, z);
        graph.owner_at(c).is_some() || fp.cells().any(|f| f == c) || press.footprint.cells().any(|p| p == c)
    };
    for z in 0..dims.d {
        for x in 0..dims.h {
            for y in 0..dims.w {
                let support = Action { x, y, z, ..*action };
                let Ok(sfp) = support.footprint(catalog, dims) else { continue };
                if sfp.cells().any(|c| occupied(c.x, c.y, c.z)) {
                    continue;
                }
                let touches = z == 0
                    || overlaps_layer(graph, &sfp, z.wrapping_sub(1))
                    || overlaps_layer(graph, &sfp, z + 1)
                    || ((fp.z + 1 == z || z + 1 == fp.z) && !overlap(&fp, &sfp).is_empty());
                if !touches {
                    continue;
                }
                let mut with_support = extras.clone();
                with_support.push(ExtraBody { footprint: sfp, weight: -press_weight, links: Links::Geometric });
                if assess_stability(graph, catalog, &with_support, cfg)?.stable {
                    return Ok(RobotStability { stable: true, support: Some(support) });
                }
            }
        }
    }
    Ok(RobotStability { stable: false, support: None })
}

fn overlaps_layer(graph: &AssemblyGraph, fp: &Footprint, z: usize) -> bool {
    z < graph.dims().d && !graph.owners_in(&fp.at_layer(z)).is_empty()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{Dims, Orientation::*, VoxelGrid};
    use crate::state::{AssemblyState, Inventory};

    fn build(dims: Dims, actions: &[Action]) -> AssemblyState {
        let cat = Arc::new(BrickCatalog::default());
        let mut s = AssemblyState::new(VoxelGrid::full(dims), Inventory::uniform(8, 50), cat).unwrap();
        for a in actions {
            s.apply_in_place(a).unwrap();
        }
        s
    }

    fn assess(s: &AssemblyState, cfg: &StabilityConfig) -> StabilityReport {
        assess_stability(s.graph(), s.catalog(), &[], cfg).unwrap()
    }

    const B11: usize = 0;
    const B12: usize = 1;
    const B14: usize = 2;
    const B18: usize = 4;
    const B24: usize = 6;

    #[test]
    fn single_brick_model_shape() {
        let s = build(Dims::new(4, 4, 3).unwrap(), &[Action::new(B11, 0, 0, 0, Landscape)]);
        let m = build_force_model(s.graph(), s.catalog(), &[]).unwrap();
        assert_eq!(m.n_knobs(), 1);
        let eqs = m.equations();
        assert_eq!(eqs.len(), 3);
        assert_eq!(eqs.iter().filter(|e| e.is_degenerate()).count(), 2);
    }

    #[test]
    fn bridge_on_two_pillars_splits_load() {
        let s = build(
            Dims::new(4, 4, 3).unwrap(),
            &[
                Action::new(B11, 0, 0, 0, Landscape),
                Action::new(B11, 0, 1, 0, Landscape),
                Action::new(B12, 0, 0, 1, Landscape),
            ],
        );
        let m = build_force_model(s.graph(), s.catalog(), &[]).unwrap();
        let comps = m.components();
        assert_eq!(comps, vec![vec![0, 1, 2]]);
        let r = m.solve_component(&comps[0], &StabilityConfig::default()).unwrap();
        let bridge: Vec<f64> = r
            .forces
            .iter()
            .filter(|(k, _)| m.interfaces[*k].upper == 2)
            .flat_map(|(_, f)| f.clone())
            .collect();
        assert_eq!(bridge.len(), 2);
        // W = 2 shared equally by the two knobs
        for f in bridge {
            assert!((f - 1.0).abs() < 1e-9, "{f}");
        }
        assert!(assess(&s, &StabilityConfig::default()).stable);
    }

    #[test]
    fn bricks_on_plate_need_no_tension() {
        let s = build(
            Dims::new(6, 8, 2).unwrap(),
            &[Action::new(B24, 0, 0, 0, Landscape), Action::new(B18, 2, 0, 0, Landscape), Action::new(B11, 5, 7, 0, Landscape)],
        );
        let r = assess(&s, &StabilityConfig::default());
        assert!(r.feasible && r.stable);
        assert!(r.scores.unwrap().iter().all(|v| v.raw.abs() < 1e-12));
    }

    #[test]
    fn floating_brick_is_infeasible() {
        let s = build(Dims::new(4, 4, 3).unwrap(), &[Action::new(B12, 0, 0, 2, Landscape)]);
        let r = assess(&s, &StabilityConfig::default());
        assert!(!r.feasible && !r.stable && r.scores.is_none());
    }

    #[test]
    fn one_knob_cantilever_is_unstable() {
        // 1x8 held by a single 1x1 at its end: no couple can balance the 3.5-stud arm
        let s = build(
            Dims::new(2, 8, 3).unwrap(),
            &[Action::new(B11, 0, 0, 0, Landscape), Action::new(B18, 0, 0, 1, Landscape)],
        );
        assert!(!assess(&s, &StabilityConfig::default()).stable);
    }

    #[test]
    fn two_knob_cantilever_scores_match_hand_solution() {
        // 1x4 on a 1x2 at one end: knobs at y=0.5 and 1.5, centroid at 2.0, W=4.
        // f0 + f1 = 4, -1.5 f0 - 0.5 f1 = 0  =>  f1 = 6, f0 = -2, score 2/4
        let s = build(
            Dims::new(2, 8, 3).unwrap(),
            &[Action::new(B12, 0, 0, 0, Landscape), Action::new(B14, 0, 0, 1, Landscape)],
        );
        let r = assess(&s, &StabilityConfig::default());
        assert!(r.stable);
        assert!((r.max_score - 0.5).abs() < 1e-9, "{}", r.max_score);
        // same with a 1x8: f1 = 28, f0 = -20, score 5
        let s = build(
            Dims::new(2, 8, 3).unwrap(),
            &[Action::new(B12, 0, 0, 0, Landscape), Action::new(B18, 0, 0, 1, Landscape)],
        );
        let r = assess(&s, &StabilityConfig::default());
        assert!(!r.stable);
        assert!((r.max_score - 5.0).abs() < 1e-9, "{}", r.max_score);
        assert!(r.scores.unwrap()[1].over_capacity);
    }

    #[test]
    fn frictionless_stacking() {
        let cfg = StabilityConfig { t_pull: 0.0, ..Default::default() };
        let s = build(
            Dims::new(2, 8, 3).unwrap(),
            &[Action::new(B12, 0, 0, 0, Landscape), Action::new(B14, 0, 0, 1, Landscape)],
        );
        assert!(!assess(&s, &cfg).stable);
        let s = build(
            Dims::new(2, 8, 3).unwrap(),
            &[Action::new(B14, 0, 0, 0, Landscape), Action::new(B12, 0, 1, 1, Landscape)],
        );
        assert!(assess(&s, &cfg).stable);
    }

    #[test]
    fn pressing_onto_plate_is_stable() {
        let s = build(Dims::new(4, 4, 3).unwrap(), &[]);
        let r = dynamic_stability_robot(
            s.graph(),
            &Action::new(B12, 1, 1, 0, Landscape),
            s.catalog(),
            DEFAULT_PRESS_WEIGHT,
            Grasp::Top,
            &StabilityConfig::default(),
        )
        .unwrap();
        assert_eq!(r, RobotStability { stable: true, support: None });
    }

    #[test]
    fn press_on_cantilever_needs_support_below() {
        // 1x4 cantilevered off a 1x2 (score 0.5); a 1x1 on its third stud adds
        // load at y = 2.5, giving score 0.75 statically. The 98-unit press pushes
        // the end knob far past capacity; a support under (0,2) cancels it.
        let dims = Dims::new(1, 4, 3).unwrap();
        let s = build(dims, &[Action::new(B12, 0, 0, 0, Landscape), Action::new(B14, 0, 0, 1, Landscape)]);
        let cfg = StabilityConfig::default();
        let action = Action::new(B11, 0, 2, 2, Landscape);
        let fp = action.footprint(s.catalog(), dims).unwrap();
        let stat = assess_stability(s.graph(), s.catalog(), &[ExtraBody { footprint: fp, weight: 1.0, links: Links::Geometric }], &cfg)
            .unwrap();
        assert!(stat.stable && (stat.max_score - 0.75).abs() < 1e-9, "{}", stat.max_score);
        let loaded = [
            ExtraBody { footprint: fp, weight: 1.0, links: Links::Geometric },
            ExtraBody { footprint: fp.at_layer(3), weight: DEFAULT_PRESS_WEIGHT, links: Links::Only(2) },
        ];
        assert!(!assess_stability(s.graph(), s.catalog(), &loaded, &cfg).unwrap().stable);
        let r = dynamic_stability_robot(s.graph(), &action, s.catalog(), DEFAULT_PRESS_WEIGHT, Grasp::Top, &cfg).unwrap();
        assert_eq!(r, RobotStability { stable: true, support: Some(Action::new(B11, 0, 2, 0, Landscape)) });
    }

    #[test]
    fn press_with_no_rescue_fails() {
        // a 1x4 cantilevered off a 1x2 in the first row of a 4x4x3 grid; every
        // same-shape support either collides, overlaps the press, or touches
        // nothing but the plate
        let dims = Dims::new(4, 4, 3).unwrap();
        let s = build(dims, &[Action::new(B12, 0, 0, 0, Landscape)]);
        let cfg = StabilityConfig::default();
        let action = Action::new(B14, 0, 0, 1, Landscape);
        let fp = action.footprint(s.catalog(), dims).unwrap();
        let stat = assess_stability(s.graph(), s.catalog(), &[ExtraBody { footprint: fp, weight: 4.0, links: Links::Geometric }], &cfg)
            .unwrap();
        assert!(stat.stable);
        let r = dynamic_stability_robot(s.graph(), &action, s.catalog(), DEFAULT_PRESS_WEIGHT, Grasp::Top, &cfg).unwrap();
        assert_eq!(r, RobotStability { stable: false, support: None });
    }
}
