use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use brickseq::io::{self, SequenceEntry, ShapeFile};
use brickseq::mask::{mask_audit, MaskConfig, MaskContext, MaskVariant, RleBitmap};
use brickseq::mcts::{plan_sequence, MctsConfig};
use brickseq::plan::PlanOutcome;
use brickseq::rl::{greedy_plan, train, EnvMode, PolicyFile, TrainConfig};
use brickseq::shapegen::{generate, GenConfig};
use brickseq::stability::{assess_stability, StabilityConfig};
use brickseq::validate::{replay_validate, run_benchmark, BenchShape, PlannerSpec, ReplayOutcome};
use brickseq::{Action, AssemblyState, BrickCatalog, Dims, Inventory, VoxelGrid};

use crate::{overrides, Command, Engine, MaskArg, Problem};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(brickseq::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use brickseq::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(
                E::Io(_)
                | E::Json(_)
                | E::Malformed(_)
                | E::InvalidConfig(_)
                | E::UnknownBrick(_)
                | E::EmptyTarget
                | E::EmptyShape
                | E::DimsMismatch(..)
                | E::OutOfBounds { .. },
            ) => 2,
            CliError::Lib(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<brickseq::Error> for CliError {
    fn from(e: brickseq::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv: {e}"))
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn configure<T: Serialize + for<'de> Deserialize<'de>>(base: &T, sets: &[String]) -> Result<T> {
    overrides::apply(base, sets).map_err(CliError::Usage)
}

/// Record of how a run was configured, written next to its outputs.
#[derive(Serialize)]
struct Resolved<'a, C: Serialize> {
    command: &'a str,
    inputs: BTreeMap<&'a str, String>,
    config: &'a C,
}

fn write_resolved<C: Serialize>(dir: &Path, command: &str, inputs: &[(&'static str, String)], config: &C) -> Result<()> {
    let r = Resolved { command, inputs: inputs.iter().cloned().collect(), config };
    io::write_json(&dir.join("resolved-config.json"), &r)?;
    Ok(())
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn catalog() -> Arc<BrickCatalog> {
    Arc::new(BrickCatalog::default())
}

fn load_problem(p: &Problem, cat: &Arc<BrickCatalog>) -> Result<AssemblyState> {
    let target = io::read_shape(&p.shape)?;
    let inv = io::read_inventory(&p.inv, cat)?;
    Ok(AssemblyState::new_allow_empty(target, inv, cat.clone())?)
}

fn mask_config(m: MaskArg) -> MaskConfig {
    MaskConfig::new(m.into())
}

fn parse_dims(s: &str) -> Result<Dims> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("dims must look like 6x6x4, got `{s}`")))?;
    match parts[..] {
        [h, w, d] => Ok(Dims::new(h, w, d)?),
        _ => Err(CliError::Usage(format!("dims must look like 6x6x4, got `{s}`"))),
    }
}

fn parse_action(s: &str, cat: &BrickCatalog) -> Result<Action> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::Usage(format!("action must be `brick,x,y,z,orient`, got `{s}`"));
    let [b, x, y, z, o] = parts[..] else { return Err(bad()) };
    let num = |v: &str| v.parse::<usize>().map_err(|_| bad());
    let o = num(o)?;
    let orient = brickseq::Orientation::from_u8(o.min(255) as u8)?;
    Ok(Action::new(cat.by_name(b)?.id, num(x)?, num(y)?, num(z)?, orient))
}

pub fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::GenShapes { count, seed, dims, inv, out, sets } => gen_shapes(count, seed, &dims, inv, &out, &sets),
        Command::Plan { problem, engine, mask, seed, policy, out, sets } => plan(&problem, engine, mask, seed, policy, &out, &sets),
        Command::Train { problem, mask, vanilla, seed, steps, out, sets } => train_cmd(&problem, mask, vanilla, seed, steps, &out, &sets),
        Command::Validate { problem, seq, mask, dead_end, report, sets } => validate(&problem, &seq, mask, dead_end, report, &sets),
        Command::CheckStability { shape, seq, out, sets } => check_stability(&shape, &seq, out, &sets),
        Command::MaskAudit { problem, seq, mask, action, out, sets } => mask_audit_cmd(&problem, seq, mask, action, out, &sets),
        Command::Bench { planner, shapes, inv, seeds, out, sets } => bench(&planner, &shapes, inv, seeds, &out, &sets),
        Command::Export { shape, seq, layers, out } => export(&shape, seq, layers, out),
    }
}

#[derive(Serialize)]
struct ManifestRow<'a> {
    name: &'a str,
    c_v: usize,
    c_s: f64,
    witness_len: usize,
    sampled_steps: usize,
}

fn gen_shapes(count: usize, seed: u64, dims: &str, inv: Option<PathBuf>, out: &Path, sets: &[String]) -> Result<u8> {
    let cat = catalog();
    let dims = parse_dims(dims)?;
    let inventory = match &inv {
        Some(p) => io::read_inventory(p, &cat)?,
        None => Inventory::uniform(cat.len(), 10),
    };
    let cfg = configure(&GenConfig::new(dims, inventory, seed), sets)?;
    ensure_dir(out)?;
    let mut inputs = vec![("count", count.to_string()), ("out", show(out))];
    if let Some(p) = &inv {
        inputs.push(("inv", show(p)));
    }
    write_resolved(out, "gen-shapes", &inputs, &cfg)?;
    io::write_inventory(&out.join("inventory.json"), &cfg.inventory, &cat)?;
    let mut manifest = csv::Writer::from_path(out.join("manifest.csv"))?;
    for i in 0..count {
        let shape_cfg = GenConfig { seed: cfg.seed.wrapping_add(i as u64), ..cfg.clone() };
        let g = generate(&shape_cfg, &cat)?;
        let name = format!("shape_{i:04}");
        io::write_shape(&out.join(format!("{name}.json")), &g.target)?;
        io::write_sequence(&out.join(format!("{name}.witness.json")), &g.witness, &cat)?;
        manifest.serialize(ManifestRow {
            name: &name,
            c_v: g.complexity.c_v,
            c_s: g.complexity.c_s,
            witness_len: g.witness.len(),
            sampled_steps: g.sampled_steps,
        })?;
    }
    manifest.flush()?;
    println!("wrote {count} shapes to {}", out.display());
    Ok(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DeployConfig {
    mask: MaskConfig,
    max_episode_steps: usize,
}

impl Default for DeployConfig {
    fn default() -> Self {
        DeployConfig { mask: MaskConfig::default(), max_episode_steps: 60 }
    }
}

fn outcome_code(outcome: PlanOutcome) -> u8 {
    if outcome.is_completed() {
        0
    } else {
        1
    }
}

fn plan(problem: &Problem, engine: Engine, mask: MaskArg, seed: u64, policy: Option<PathBuf>, out: &Path, sets: &[String]) -> Result<u8> {
    let cat = catalog();
    let state = load_problem(problem, &cat)?;
    ensure_dir(out)?;
    let mut inputs = vec![("shape", show(&problem.shape)), ("inv", show(&problem.inv)), ("out", show(out))];
    let (plan, stats) = match engine {
        Engine::Mcts => {
            let cfg = configure(&MctsConfig { mask: mask_config(mask), seed, ..Default::default() }, sets)?;
            write_resolved(out, "plan", &inputs, &cfg)?;
            let p = plan_sequence(&state, &cfg, None)?;
            (p.plan, serde_json::to_value(&p.stats).map_err(brickseq::Error::from)?)
        }
        Engine::Policy => {
            let path = policy.ok_or_else(|| CliError::Usage("--engine policy requires --policy".into()))?;
            inputs.push(("policy", show(&path)));
            let cfg = configure(&DeployConfig { mask: mask_config(mask), ..Default::default() }, sets)?;
            write_resolved(out, "plan", &inputs, &cfg)?;
            let net = io::read_json::<PolicyFile>(&path)?.into_net()?;
            let p = greedy_plan(&state, &net, &cfg.mask, cfg.max_episode_steps, None)?;
            (p, serde_json::Value::Null)
        }
    };
    io::write_sequence(&out.join("sequence.json"), &plan.actions, &cat)?;
    io::write_json(&out.join("search-stats.json"), &serde_json::json!({ "outcome": plan.outcome, "steps": stats }))?;
    println!("{:?} after {} steps", plan.outcome, plan.actions.len());
    Ok(outcome_code(plan.outcome))
}

#[derive(Serialize)]
struct CurveRow {
    update: usize,
    env_steps: usize,
    episodes: usize,
    mean_return: Option<f64>,
    rolling_return: Option<f64>,
    success_rate: Option<f64>,
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
}

fn train_cmd(problem: &Problem, mask: MaskArg, vanilla: bool, seed: u64, steps: Option<usize>, out: &Path, sets: &[String]) -> Result<u8> {
    let cat = catalog();
    let state = load_problem(problem, &cat)?;
    let mut base = TrainConfig { mask: mask_config(mask), seed, mode: if vanilla { EnvMode::Vanilla } else { EnvMode::Masked }, ..Default::default() };
    if let Some(s) = steps {
        base.total_steps = s;
    }
    let cfg = configure(&base, sets)?;
    ensure_dir(out)?;
    write_resolved(out, "train", &[("shape", show(&problem.shape)), ("inv", show(&problem.inv)), ("out", show(out))], &cfg)?;
    let res = train(&state, &cfg, |p| {
        log::info!("update {} steps {} rolling {:?}", p.update, p.env_steps, p.rolling_return);
    })?;
    io::write_json(&out.join("policy.json"), &PolicyFile::new(res.net.clone()))?;
    let mut w = csv::Writer::from_path(out.join("reward_curve.csv"))?;
    for p in &res.curve {
        w.serialize(CurveRow {
            update: p.update,
            env_steps: p.env_steps,
            episodes: p.episodes,
            mean_return: p.mean_return,
            rolling_return: p.rolling_return,
            success_rate: p.success_rate,
            policy_loss: p.policy_loss,
            value_loss: p.value_loss,
            entropy: p.entropy,
        })?;
    }
    w.flush()?;
    let greedy = greedy_plan(&state, &res.net, &cfg.mask, cfg.ppo.max_episode_steps, None)?;
    let dead = matches!(greedy.outcome, PlanOutcome::DeadEnd { .. });
    let replay = replay_validate(&state, &greedy.actions, &cfg.mask, dead)?;
    let report = serde_json::json!({
        "env_steps": res.env_steps,
        "episodes": res.episodes,
        "reached_at": res.reached_at,
        "best_rolling_return": res.best_rolling,
        "final_rolling_return": res.curve.last().and_then(|p| p.rolling_return),
        "greedy_outcome": greedy.outcome,
        "greedy_steps": greedy.actions.len(),
        "greedy_replay": replay.outcome,
    });
    io::write_json(&out.join("train-report.json"), &report)?;
    println!(
        "trained {} steps, {} episodes, best rolling return {:?}; greedy {:?}",
        res.env_steps, res.episodes, res.best_rolling, greedy.outcome
    );
    Ok(0)
}

fn validate(problem: &Problem, seq: &Path, mask: MaskArg, dead_end: bool, report: Option<PathBuf>, sets: &[String]) -> Result<u8> {
    let cat = catalog();
    let state = load_problem(problem, &cat)?;
    let actions = io::read_sequence(seq, &cat)?;
    let cfg = configure(&mask_config(mask), sets)?;
    let r = replay_validate(&state, &actions, &cfg, dead_end)?;
    if let Some(p) = report {
        io::write_json(&p, &r)?;
    }
    match r.outcome {
        ReplayOutcome::Violation { step, constraint } => println!("Violation at step {step}: constraint {constraint}"),
        o => println!("{o:?} (coverage {:.3})", r.coverage),
    }
    Ok(if r.outcome.is_success() { 0 } else { 1 })
}

fn check_stability(shape: &Path, seq: &Path, out: Option<PathBuf>, sets: &[String]) -> Result<u8> {
    let cat = catalog();
    let target = io::read_shape(shape)?;
    let actions = io::read_sequence(seq, &cat)?;
    let mut counts = vec![0u32; cat.len()];
    for a in &actions {
        counts[a.brick] += 1;
    }
    let mut state = AssemblyState::new_allow_empty(target, Inventory::new(counts), cat.clone())?;
    for a in &actions {
        state.apply_in_place(a)?;
    }
    let cfg = configure(&StabilityConfig::default(), sets)?;
    let report = assess_stability(state.graph(), &cat, &[], &cfg)?;
    let text = serde_json::to_string_pretty(&report).map_err(brickseq::Error::from)?;
    match out {
        Some(p) => io::write_json(&p, &report)?,
        None => println!("{text}"),
    }
    eprintln!("{} (max score {})", if report.stable { "stable" } else { "unstable" }, report.max_score);
    Ok(if report.stable { 0 } else { 1 })
}

#[derive(Serialize)]
struct Enumeration {
    valid: usize,
    actions: Vec<SequenceEntry>,
    bitmap: RleBitmap,
}

fn mask_audit_cmd(problem: &Problem, seq: Option<PathBuf>, mask: MaskArg, action: Option<String>, out: Option<PathBuf>, sets: &[String]) -> Result<u8> {
    let cat = catalog();
    let mut state = load_problem(problem, &cat)?;
    if let Some(p) = &seq {
        for a in io::read_sequence(p, &cat)? {
            state.apply_in_place(&a)?;
        }
    }
    let cfg = configure(&mask_config(mask), sets)?;
    let (value, code) = match action {
        Some(s) => {
            let a = parse_action(&s, &cat)?;
            let v = mask_audit(&state, &a, &cfg);
            let code = if v.overall { 0 } else { 1 };
            (serde_json::to_value(&v).map_err(brickseq::Error::from)?, code)
        }
        None => {
            let bits = MaskContext::new(&state, &cfg).enumerate();
            let space = brickseq::ActionSpace::new(state.dims(), cat.len());
            let valid: Vec<Action> = bits.ones().map(|i| space.action(i)).collect();
            let mut entries = io::sequence_to_entries(&valid, &cat)?;
            entries.iter_mut().enumerate().for_each(|(i, e)| e.step = i);
            let e = Enumeration { valid: valid.len(), actions: entries, bitmap: bits.to_rle() };
            (serde_json::to_value(&e).map_err(brickseq::Error::from)?, 0)
        }
    };
    match out {
        Some(p) => io::write_json(&p, &value)?,
        None => println!("{}", serde_json::to_string_pretty(&value).map_err(brickseq::Error::from)?),
    }
    Ok(code)
}

#[derive(Serialize)]
struct BenchRow<'a> {
    shape: &'a str,
    seed: u64,
    c_v: usize,
    c_s: f64,
    planner_outcome: String,
    replay: String,
    steps: usize,
    train_secs: f64,
    plan_secs: f64,
    mask_secs: f64,
    stability_secs: f64,
    own_mask_valid: bool,
}

fn parse_planner(spec: &str, sets: &[String]) -> Result<PlannerSpec> {
    let (engine, mask) = spec.split_once('-').ok_or_else(|| CliError::Usage(format!("planner must be <engine>-<mask>, got `{spec}`")))?;
    let variant: MaskVariant = mask.parse().map_err(|e: brickseq::Error| CliError::Usage(e.to_string()))?;
    match engine {
        "mcts" => Ok(PlannerSpec::Mcts(configure(&MctsConfig { mask: MaskConfig::new(variant), ..Default::default() }, sets)?)),
        "rl" => Ok(PlannerSpec::Rl(configure(
            &TrainConfig { mask: MaskConfig::new(variant), target_return: Some(0.95), ..Default::default() },
            sets,
        )?)),
        _ => Err(CliError::Usage(format!("unknown planner engine `{engine}`"))),
    }
}

fn bench(planner: &str, dir: &Path, inv: Option<PathBuf>, seeds: u64, out: &Path, sets: &[String]) -> Result<u8> {
    let cat = catalog();
    let spec = parse_planner(planner, sets)?;
    let inv_path = inv.unwrap_or_else(|| dir.join("inventory.json"));
    let inventory = io::read_inventory(&inv_path, &cat)?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json") && !name.ends_with(".witness.json") && name != "inventory.json" && name != "resolved-config.json"
        })
        .collect();
    paths.sort();
    let mut shapes = Vec::new();
    for p in &paths {
        let name = p.file_stem().and_then(|n| n.to_str()).unwrap_or("shape").to_string();
        shapes.push(BenchShape { name, target: io::read_shape(p)?, inventory: inventory.clone() });
    }
    ensure_dir(out)?;
    write_resolved(out, "bench", &[("planner", planner.to_string()), ("shapes", show(dir)), ("inv", show(&inv_path)), ("seeds", seeds.to_string())], &spec)?;
    let seed_list: Vec<u64> = (0..seeds).collect();
    let result = run_benchmark(&spec, &shapes, &seed_list, planner)?;
    let mut w = csv::Writer::from_path(out.join("bench.csv"))?;
    for r in &result.runs {
        w.serialize(BenchRow {
            shape: &r.name,
            seed: r.seed,
            c_v: r.c_v,
            c_s: r.c_s,
            planner_outcome: format!("{:?}", r.planner_outcome),
            replay: match r.replay {
                ReplayOutcome::Violation { step, constraint } => format!("Violation({step},{constraint})"),
                o => format!("{o:?}"),
            },
            steps: r.steps,
            train_secs: r.train_secs,
            plan_secs: r.plan_secs,
            mask_secs: r.mask_secs,
            stability_secs: r.stability_secs,
            own_mask_valid: r.own_mask_valid,
        })?;
    }
    w.flush()?;
    io::write_json(&out.join("bench.json"), &result)?;
    println!(
        "{}: success {} over {} runs, {} violations, stability share {}",
        planner,
        result.success_rate_label(),
        result.runs.len(),
        result.violations,
        result.stability_share.map_or_else(|| "N/A".to_string(), |s| format!("{:.1}%", 100.0 * s))
    );
    Ok(0)
}

/// Layers with `#` for placed cells, `+` for target cells still missing and
/// `.` for empty cells.
fn render(target: &VoxelGrid, current: &VoxelGrid) -> String {
    let d = target.dims();
    let mut out = String::new();
    for z in 0..d.d {
        out.push_str(&format!("z={z}\n"));
        for x in 0..d.h {
            for y in 0..d.w {
                let c = brickseq::Cell::new(x, y, z);
                let ch = match (current.get(c).unwrap_or(false), target.get(c).unwrap_or(false)) {
                    (true, _) => '#',
                    (false, true) => '+',
                    _ => '.',
                };
                out.push(ch);
            }
            out.push('\n');
        }
    }
    out
}

fn export(shape: &Path, seq: Option<PathBuf>, layers: bool, out: Option<PathBuf>) -> Result<u8> {
    let cat = catalog();
    let target = io::read_shape(shape)?;
    let built = match &seq {
        Some(p) => {
            let actions = io::read_sequence(p, &cat)?;
            let mut counts = vec![0u32; cat.len()];
            actions.iter().for_each(|a| counts[a.brick] += 1);
            let mut s = AssemblyState::new_allow_empty(target.clone(), Inventory::new(counts), cat.clone())?;
            for a in &actions {
                s.apply_in_place(a)?;
            }
            Some(s.current().clone())
        }
        None => None,
    };
    if layers {
        match &built {
            Some(cur) => print!("{}", render(&target, cur)),
            None => print!("{}", target.render_layers()),
        }
    }
    if let Some(p) = out {
        io::write_json(&p, &ShapeFile::from_grid(built.as_ref().unwrap_or(&target)))?;
    }
    if !layers && built.is_none() {
        println!("{}", serde_json::to_string(&ShapeFile::from_grid(&target)).map_err(brickseq::Error::from)?);
    }
    Ok(0)
}
