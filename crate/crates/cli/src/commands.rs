//! Batch subcommands. Each returns a [`CliError`] whose class decides the
//! process exit code.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hawk_core::eval;
use hawk_core::fusion::{FusionConfig, FusionEngine, RuleSet};
use hawk_core::geometry::{Aabb, Obstacle};
use hawk_core::gesture::synth::{self, LabeledTrace};
use hawk_core::gesture::{classify, trace_file, GestureConfig};
use hawk_core::model::WorldModel;
use hawk_core::planning::{build_trajectory, plan_path_detailed, RrtConfig, TrajectoryConfig};
use hawk_core::session::{self, Session, SessionError, SessionMode};
use hawk_core::sim::{
    self, metrics, parse_scenario, reference_script, MissionMetrics, OperatorScript, ScenarioConfig,
};
use hawk_core::speech::Grammar;
use hawk_core::Vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct CliError {
    pub class: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(class: &'static str, message: impl Into<String>) -> Self {
        Self { class, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class {
            "check_failed" => 1,
            "usage" => 2,
            "io" => 3,
            "invalid_scenario" | "invalid_script" | "invalid_input" => 4,
            "corrupt_trace" => 5,
            "simulation" | "planning" | "classification" => 6,
            _ => 70,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error[{}]: {}", self.class, self.message)
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        let class = match e {
            SessionError::InvalidScenario(_) => "invalid_scenario",
            SessionError::SessionClosed => "simulation",
            SessionError::OutOfOrder { .. } | SessionError::CorruptTrace { .. } => "corrupt_trace",
        };
        CliError::new(class, e.to_string())
    }
}

impl From<sim::SimError> for CliError {
    fn from(e: sim::SimError) -> Self {
        let class = match e {
            sim::SimError::Scenario(_) => "invalid_scenario",
            sim::SimError::Script(_) => "invalid_script",
            sim::SimError::Templates(_) => "classification",
        };
        CliError::new(class, e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// `N` for a single seed, `a..b` for a half-open range.
pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::new("usage", format!("bad seed range `{s}`; expected N or a..b"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b <= a {
            return Err(bad());
        }
        Ok((a..b).collect())
    } else {
        Ok(vec![s.trim().parse().map_err(|_| bad())?])
    }
}

pub fn load_scenario(path: Option<&Path>) -> CliResult<ScenarioConfig> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => {
            let text = read(p)?;
            let cfg = parse_scenario(&text)
                .map_err(|e| CliError::new("invalid_scenario", format!("{}: {e}", p.display())))?;
            Ok(cfg)
        }
    }
}

fn load_script(path: &Path) -> CliResult<OperatorScript> {
    let text = read(path)?;
    OperatorScript::parse(&text).map_err(|e| CliError::new("invalid_script", format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct SimRunArgs {
    pub scenario: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub seeds: Option<String>,
    pub drones: Vec<usize>,
    pub report: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub drones: usize,
    pub seed: u64,
    pub metrics: MissionMetrics,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimReport {
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<metrics::FleetSummary>,
}

/// Plays a script through a headless session and returns it closed.
pub fn headless_session(cfg: &ScenarioConfig, script: &OperatorScript) -> CliResult<Session> {
    script.validate(cfg).map_err(|e| CliError::new("invalid_script", e.to_string()))?;
    let mut s = Session::open("headless", cfg.clone(), SessionMode::Headless)?;
    for e in &script.events {
        s.submit(e.clone())?;
    }
    s.advance_to(cfg.deadline);
    s.close()?;
    Ok(s)
}

pub fn sim_run(args: &SimRunArgs, out: &mut String) -> CliResult {
    let base = load_scenario(args.scenario.as_deref())?;
    let seeds = match &args.seeds {
        Some(s) => parse_seeds(s)?,
        None => vec![base.seed],
    };
    let fleets = if args.drones.is_empty() { vec![base.drones] } else { args.drones.clone() };
    let given = args.script.as_deref().map(load_script).transpose()?;
    if args.log.is_some() && seeds.len() * fleets.len() != 1 {
        return Err(CliError::new("usage", "--log needs exactly one seed and one fleet size"));
    }

    let templates = sim::operator_templates(&base, &GestureConfig::default())?;
    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    for &drones in &fleets {
        let mut per = Vec::new();
        for &seed in &seeds {
            let cfg = ScenarioConfig { drones, seed, ..base.clone() };
            cfg.validate().map_err(|e| CliError::new("invalid_scenario", e.to_string()))?;
            let script = given.clone().unwrap_or_else(|| reference_script(&cfg));
            let m = if let Some(path) = &args.log {
                let s = headless_session(&cfg, &script)?;
                write(path, &s.log_text())?;
                s.mission().metrics().clone()
            } else {
                sim::run_headless_with(&cfg, &script, &templates)?
            };
            per.push(m.clone());
            runs.push(RunRecord { drones, seed, metrics: m });
        }
        summaries.push(metrics::summarize(drones, &per));
    }

    if runs.len() == 1 {
        out.push_str(&runs[0].metrics.table());
    } else {
        out.push_str(&metrics::comparison_table(&summaries));
    }
    if let Some(p) = &args.report {
        write(p, &to_json(&SimReport { runs, summaries }))?;
    }
    Ok(())
}

pub fn sim_script(scenario: Option<&Path>, out_path: Option<&Path>, out: &mut String) -> CliResult {
    let cfg = load_scenario(scenario)?;
    let text = reference_script(&cfg).to_text();
    match out_path {
        Some(p) => write(p, &text),
        None => {
            out.push_str(&text);
            Ok(())
        }
    }
}

fn load_traces(path: &Path) -> CliResult<Vec<LabeledTrace>> {
    let text = read(path)?;
    let records = trace_file::parse(&text)
        .map_err(|e| CliError::new("corrupt_trace", format!("{}: {e}", path.display())))?;
    Ok(trace_file::segments(&records))
}

#[derive(Debug, Clone)]
pub struct GestureEvalArgs {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub emit_confusion: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub seed: u64,
}

/// Synthetic corpus used when no trace files are given: ten operators, one
/// template each per label, thirty probes per label.
pub fn default_gesture_corpus(seed: u64) -> synth::Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth::corpus(10, 30, 0.05, &mut rng)
}

pub fn gesture_eval(args: &GestureEvalArgs, out: &mut String) -> CliResult {
    let (train, test) = match (&args.train, &args.test) {
        (Some(a), Some(b)) => (load_traces(a)?, load_traces(b)?),
        (None, None) => {
            let c = default_gesture_corpus(args.seed);
            (c.train, c.test)
        }
        _ => return Err(CliError::new("usage", "--train and --test go together")),
    };
    let cfg = GestureConfig::default();
    let ts = eval::gesture::train(&train, &cfg).map_err(|e| CliError::new("classification", e.to_string()))?;
    let report = eval::gesture::evaluate(&ts, &test, &cfg).map_err(|e| CliError::new("classification", e.to_string()))?;
    out.push_str(&report.table());
    if let Some(p) = &args.emit_confusion {
        write(p, &report.confusion_csv())?;
    }
    if let Some(p) = &args.report {
        write(p, &to_json(&report))?;
    }
    Ok(())
}

pub fn gesture_synth(train: &Path, test: &Path, seed: u64) -> CliResult {
    let c = default_gesture_corpus(seed);
    write(train, &trace_file::serialize(&trace_file::records_for(&c.train)))?;
    write(test, &trace_file::serialize(&trace_file::records_for(&c.test)))
}

fn fusion_engine() -> FusionEngine {
    FusionEngine::new(RuleSet::default_rules(), FusionConfig::default())
}

pub fn default_paired_corpus(seed: u64) -> CliResult<eval::fusion::PairedCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eval::fusion::generate(&eval::fusion::PairedCorpusSpec::default(), &mut rng)
        .map_err(|e| CliError::new("classification", e.to_string()))
}

pub fn fuse_eval(corpus: Option<&Path>, seed: u64, report: Option<&Path>, out: &mut String) -> CliResult {
    let corpus = match corpus {
        Some(p) => {
            let text = read(p)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::new("invalid_input", format!("{}: {e}", p.display())))?
        }
        None => default_paired_corpus(seed)?,
    };
    let r = eval::fusion::evaluate(&corpus, &Grammar::default_grammar(), &fusion_engine())
        .map_err(|e| CliError::new("classification", e.to_string()))?;
    writeln!(out, "items            {}", r.items).unwrap();
    writeln!(out, "speech only      {:.1}%  ({} corrupted)", 100.0 * r.speech_accuracy, r.speech_corrupted).unwrap();
    writeln!(out, "gesture only     {:.1}%  ({} corrupted)", 100.0 * r.gesture_accuracy, r.gesture_corrupted).unwrap();
    writeln!(out, "fused            {:.1}%", 100.0 * r.fused_accuracy).unwrap();
    if let Some(p) = report {
        write(p, &to_json(&r))?;
    }
    Ok(())
}

pub fn fuse_synth(path: &Path, seed: u64) -> CliResult {
    write(path, &to_json(&default_paired_corpus(seed)?))
}

/// Input of `plan demo`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanRequest {
    pub world: WorldModel,
    pub start: Vec3,
    pub goal: Vec3,
    #[serde(default)]
    pub rrt: RrtConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
}

impl Default for PlanRequest {
    fn default() -> Self {
        let mut world = WorldModel::empty(Aabb::new(Vec3::zeros(), Vec3::new(120.0, 120.0, 60.0)));
        world.obstacles = vec![
            Obstacle::cuboid(Vec3::new(40.0, 0.0, 0.0), Vec3::new(50.0, 80.0, 45.0)),
            Obstacle::cuboid(Vec3::new(75.0, 40.0, 0.0), Vec3::new(85.0, 120.0, 45.0)),
            Obstacle::sphere(Vec3::new(100.0, 20.0, 20.0), 8.0),
        ];
        Self {
            world,
            start: Vec3::new(10.0, 10.0, 20.0),
            goal: Vec3::new(110.0, 110.0, 20.0),
            rrt: RrtConfig { step: 4.0, gamma: 40.0, ..RrtConfig::default() },
            trajectory: TrajectoryConfig::default(),
        }
    }
}

#[derive(Debug, Serialize)]
struct PlanExport<'a> {
    path: &'a hawk_core::planning::Path,
    raw: &'a hawk_core::planning::Path,
    history: Vec<(usize, Option<f64>)>,
    duration: f64,
    /// `[t, x, y, z]` rows.
    samples: Vec<[f64; 4]>,
}

pub fn plan_demo(world: Option<&Path>, export: Option<&Path>, dt: f64, out: &mut String) -> CliResult {
    let req: PlanRequest = match world {
        Some(p) => {
            let text = read(p)?;
            serde_json::from_str(&text).map_err(|e| CliError::new("invalid_input", format!("{}: {e}", p.display())))?
        }
        None => PlanRequest::default(),
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::new("usage", "--dt must be positive"));
    }
    let plan = plan_path_detailed(req.start, req.goal, &req.world, &req.rrt)
        .map_err(|e| CliError::new("planning", e.to_string()))?;
    let traj = build_trajectory(&plan.path, &req.trajectory).map_err(|e| CliError::new("planning", e.to_string()))?;
    let km = traj.knot_mismatch();
    let (vmax, amax) = traj.peaks(64);
    let straight = (req.goal - req.start).norm();
    writeln!(out, "tree nodes       {}", plan.nodes).unwrap();
    writeln!(out, "raw cost         {:.2} m", plan.raw.cost).unwrap();
    writeln!(out, "smoothed cost    {:.2} m ({:.3} x straight line)", plan.path.cost, plan.path.cost / straight).unwrap();
    writeln!(out, "waypoints        {}", plan.path.waypoints.len()).unwrap();
    writeln!(out, "duration         {:.2} s", traj.duration()).unwrap();
    writeln!(out, "peak speed       {vmax:.2} m/s").unwrap();
    writeln!(out, "peak accel       {amax:.2} m/s^2").unwrap();
    writeln!(out, "knot mismatch    {:.2e}", km.max()).unwrap();
    if let Some(p) = export {
        let samples = traj.sample(dt).into_iter().map(|(t, q)| [t, q.x, q.y, q.z]).collect();
        let history = plan.history.iter().map(|&(i, c)| (i, c.is_finite().then_some(c))).collect();
        let e = PlanExport { path: &plan.path, raw: &plan.raw, history, duration: traj.duration(), samples };
        write(p, &to_json(&e))?;
    }
    Ok(())
}

/// Replays a session log, or classifies the segments of an armband trace.
pub fn trace_replay(path: &Path, check: bool, out_path: Option<&Path>, out: &mut String) -> CliResult {
    let text = read(path)?;
    if text.starts_with(trace_file::HEADER) {
        return classify_trace(&text, out);
    }
    let Some(s) = session::replay(&text)? else {
        out.push_str("empty trace: no mission\n");
        return Ok(());
    };
    let replayed = s.log_text();
    if let Some(p) = out_path {
        write(p, &replayed)?;
    }
    let m = s.mission().metrics();
    writeln!(out, "events           {}", s.log().len()).unwrap();
    writeln!(out, "clock            {:.2} s", s.clock()).unwrap();
    writeln!(out, "victims          {}/{}", m.detected, m.victims).unwrap();
    if check {
        if replayed != text {
            let at = replayed.bytes().zip(text.bytes()).take_while(|(a, b)| a == b).count();
            return Err(CliError::new("check_failed", format!("replayed log differs from the recording at byte {at}")));
        }
        out.push_str("replay identical\n");
    }
    Ok(())
}

fn classify_trace(text: &str, out: &mut String) -> CliResult {
    let records = trace_file::parse(text).map_err(|e| CliError::new("corrupt_trace", e.to_string()))?;
    let cfg = GestureConfig::default();
    let ts = sim::operator_templates(&ScenarioConfig::default(), &cfg)?;
    let segs = trace_file::segments(&records);
    let mut correct = 0;
    let mut labelled = 0;
    for (i, seg) in segs.iter().enumerate() {
        let nb = classify(&seg.trace, &ts, &cfg).map_err(|e| CliError::new("classification", e.to_string()))?;
        let top = nb.top().expect("templates present");
        let truth = seg.label.map(|l| l.name()).unwrap_or("-");
        if let Some(l) = seg.label {
            labelled += 1;
            correct += usize::from(l == top.item);
        }
        writeln!(out, "{i:>4}  {:<24} {:.3}  truth {truth}", top.item.name(), top.score).unwrap();
    }
    if labelled > 0 {
        writeln!(out, "accuracy {correct}/{labelled}").unwrap();
    }
    Ok(())
}
