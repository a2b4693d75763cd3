//! Experiment plans: an ordered list of stages run into one output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use subspace_core::precoding::{BdOptions, InnerKind};
use subspace_core::{Scenario, ScenarioConfig};

use crate::compare::compare_report;
use crate::failure::{Failure, Outcome};
use crate::provenance::{file_hash, json_hash, write_bytes, write_json};
use crate::stages::{self, Design, EstimateOptions, EvaluateOptions, Evaluation, OptimizeOptions, OverheadOptions, RefineStageOptions, Stored};

/// Draw count used by the desk preset when a stage does not set one.
pub const DESK_DRAWS: usize = 2000;

/// Bisection tolerance of the desk preset; desk `γ*` is of order 1e-4.
pub const DESK_EPSILON_BISECT: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Stage {
    Generate,
    Estimate(EstimateOptions),
    BdBaseline(BdOptions),
    Optimize(OptimizeOptions),
    Refine(RefineStageOptions),
    Evaluate(EvaluateOptions),
    Overhead(OverheadOptions),
    Compare,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Estimate(_) => "estimate",
            Stage::BdBaseline(_) => "bd-baseline",
            Stage::Optimize(_) => "optimize",
            Stage::Refine(_) => "refine",
            Stage::Evaluate(_) => "evaluate",
            Stage::Overhead(_) => "overhead",
            Stage::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default = "version_one")]
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub desk_scale: bool,
    /// Fields overriding the basic (or desk) scenario configuration.
    #[serde(default)]
    pub scenario: Map<String, Value>,
    /// Existing scenario container used instead of a `generate` stage.
    #[serde(default)]
    pub scenario_file: Option<PathBuf>,
    pub stages: Vec<Stage>,
}

fn version_one() -> u32 {
    1
}

fn schema(e: impl std::fmt::Display) -> Failure {
    Failure::config(format!("plan schema error: {e}"))
}

/// Reads a plan, resolving `config` references relative to the plan file and
/// filling stage seeds and draw counts that the plan leaves unset.
pub fn load_plan(path: &Path, desk_override: bool) -> Outcome<ExperimentPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let mut raw: Value = serde_json::from_str(&text).map_err(schema)?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(&mut raw, base, desk_override)?;
    let plan: ExperimentPlan = serde_json::from_value(raw).map_err(schema)?;
    if plan.version != 1 {
        return Err(schema(format!("unsupported plan version {}", plan.version)));
    }
    Ok(plan)
}

fn resolve(raw: &mut Value, base: &Path, desk_override: bool) -> Outcome<()> {
    let obj = raw.as_object_mut().ok_or_else(|| schema("plan must be a JSON object"))?;
    if desk_override {
        obj.insert("desk_scale".into(), Value::Bool(true));
    }
    let desk = obj.get("desk_scale").and_then(Value::as_bool).unwrap_or(false);
    let seed = obj.get("seed").and_then(Value::as_u64).ok_or_else(|| schema("missing unsigned integer 'seed'"))?;
    let stages = obj
        .get_mut("stages")
        .and_then(Value::as_array_mut)
        .ok_or_else(|| schema("missing 'stages' list"))?;
    for (i, stage) in stages.iter_mut().enumerate() {
        let s = stage.as_object_mut().ok_or_else(|| schema(format!("stage {i} is not an object")))?;
        if let Some(reference) = s.remove("config") {
            let file = base.join(reference.as_str().ok_or_else(|| schema(format!("stage {i}: 'config' must be a path")))?);
            let text = std::fs::read_to_string(&file)
                .map_err(|e| Failure::config(format!("stage {i}: cannot read {}: {e}", file.display())))?;
            let referenced: Map<String, Value> = serde_json::from_str(&text).map_err(schema)?;
            for (k, v) in referenced {
                s.entry(k).or_insert(v);
            }
        }
        let offset = match s.get("stage").and_then(Value::as_str) {
            Some("estimate") => Some(0),
            Some("refine") => Some(1),
            Some("evaluate") => Some(2),
            _ => None,
        };
        if let Some(o) = offset {
            s.entry("seed").or_insert(Value::from(seed.wrapping_add(o)));
        }
        if desk {
            match s.get("stage").and_then(Value::as_str) {
                Some("evaluate") => {
                    s.entry("draws").or_insert(Value::from(DESK_DRAWS));
                }
                Some("optimize" | "refine") => {
                    s.entry("epsilon_bisect").or_insert(Value::from(DESK_EPSILON_BISECT));
                }
                _ => {}
            }
        }
    }
    Ok(())
}

impl ExperimentPlan {
    pub fn hash(&self) -> Outcome<String> {
        json_hash(self)
    }

    /// Basic or desk configuration with the plan's overrides and seed.
    pub fn scenario_config(&self) -> Outcome<ScenarioConfig> {
        let base = if self.desk_scale {
            ScenarioConfig::desk_scale()
        } else {
            ScenarioConfig::default()
        };
        let mut v = serde_json::to_value(base)?;
        let obj = v.as_object_mut().expect("config serializes to an object");
        obj.insert("rng_seed".into(), Value::from(self.seed));
        for (k, val) in &self.scenario {
            obj.insert(k.clone(), val.clone());
        }
        let cfg: ScenarioConfig = serde_json::from_value(v).map_err(|e| schema(format!("scenario: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that every stage's inputs are produced by an earlier stage.
    pub fn validate(&self) -> Outcome<()> {
        let mut scenario = self.scenario_file.is_some();
        let (mut bd, mut design, mut evaluated) = (false, false, false);
        for (i, stage) in self.stages.iter().enumerate() {
            let missing = |what: &str| Err(Failure::config(format!("stage {i} ({}) needs {what} from an earlier stage", stage.name())));
            match stage {
                Stage::Generate => scenario = true,
                Stage::Estimate(_) | Stage::Optimize(_) | Stage::BdBaseline(_) if !scenario => return missing("a scenario"),
                Stage::BdBaseline(_) => {
                    bd = true;
                    design = true;
                }
                Stage::Optimize(_) => design = true,
                Stage::Estimate(_) => {}
                Stage::Refine(_) if !bd => return missing("a bd-baseline"),
                Stage::Refine(_) => design = true,
                Stage::Evaluate(_) | Stage::Overhead(_) if !design => return missing("a precoder"),
                Stage::Evaluate(_) => evaluated = true,
                Stage::Overhead(_) => {}
                Stage::Compare if !evaluated => return missing("an evaluation"),
                Stage::Compare => {}
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct State {
    /// Scenario with the model covariances; used for evaluation.
    truth: Option<Stored<Scenario>>,
    /// Estimated scenario, when an `estimate` stage ran; used for design.
    estimated: Option<Stored<Scenario>>,
    bd: Option<Stored<Design>>,
    optimized: Option<Stored<Design>>,
    refined: Option<Stored<Design>>,
    evaluations: Vec<Evaluation>,
}

impl State {
    fn design_scenario(&self) -> &Stored<Scenario> {
        self.estimated.as_ref().or(self.truth.as_ref()).expect("validated")
    }

    /// Designs in comparison order: optimized, refined, BD.
    fn designs(&self) -> Vec<&Stored<Design>> {
        [&self.optimized, &self.refined, &self.bd].into_iter().flatten().collect()
    }
}

#[derive(Debug, Serialize)]
struct StageRecord {
    index: usize,
    stage: String,
    outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
struct PlanSummary {
    tool: String,
    plan_hash: String,
    seed: u64,
    stages: Vec<StageRecord>,
    /// Relative path to SHA-256 of every artifact.
    artifacts: BTreeMap<String, String>,
}

/// Runs every stage in order and returns the output directory.
pub fn run_plan(plan: &ExperimentPlan, out: &Path) -> Outcome<PathBuf> {
    plan.validate()?;
    let hash = plan.hash()?;
    let ph = Some(hash.as_str());
    std::fs::create_dir_all(out)?;
    let mut state = State::default();
    if let Some(f) = &plan.scenario_file {
        state.truth = Some(stages::read_scenario(f)?);
    }
    let mut records = Vec::new();
    for (i, stage) in plan.stages.iter().enumerate() {
        log::info!("stage {i}: {}", stage.name());
        let outputs = run_stage(plan, stage, &mut state, out, ph).map_err(|e| e.in_stage(i, stage.name()))?;
        records.push(StageRecord {
            index: i,
            stage: stage.name().into(),
            outputs,
        });
    }
    let mut artifacts = BTreeMap::new();
    for r in &records {
        for o in &r.outputs {
            artifacts.insert(o.clone(), file_hash(&out.join(o))?);
        }
    }
    write_json(
        &out.join("summary.json"),
        &PlanSummary {
            tool: crate::provenance::TOOL.into(),
            plan_hash: hash,
            seed: plan.seed,
            stages: records,
            artifacts,
        },
    )?;
    Ok(out.to_path_buf())
}

fn container_outputs(name: &str) -> Vec<String> {
    vec![format!("{name}.bin"), format!("{name}.json")]
}

fn run_stage(plan: &ExperimentPlan, stage: &Stage, st: &mut State, out: &Path, ph: Option<&str>) -> Outcome<Vec<String>> {
    match stage {
        Stage::Generate => {
            let cfg = plan.scenario_config()?;
            st.truth = Some(stages::generate(&cfg, &out.join("scenario.bin"), ph)?);
            st.estimated = None;
            Ok(container_outputs("scenario"))
        }
        Stage::Estimate(o) => {
            let truth = st.truth.as_ref().expect("validated");
            st.estimated = Some(stages::estimate(truth, o, &out.join("estimated.bin"), ph)?);
            Ok(container_outputs("estimated"))
        }
        Stage::BdBaseline(o) => {
            st.bd = Some(stages::precode_bd(st.design_scenario(), o, &out.join("bd.bin"), ph)?);
            Ok(container_outputs("bd"))
        }
        Stage::Optimize(o) => {
            st.optimized = Some(stages::optimize(st.design_scenario(), o, &out.join("optimized.bin"), ph)?);
            Ok(container_outputs("optimized"))
        }
        Stage::Refine(o) => {
            let bd = st.bd.as_ref().expect("validated");
            st.refined = Some(stages::refine(st.design_scenario(), bd, o, &out.join("refined.bin"), ph)?);
            Ok(container_outputs("refined"))
        }
        Stage::Evaluate(o) => {
            let truth = st.truth.as_ref().expect("validated");
            let designs = st.designs();
            // all schemes are scored against the same level
            let target = o.gamma.or_else(|| designs.iter().find_map(|d| d.value.gamma));
            let mut runs: Vec<(&Stored<Design>, String, InnerKind)> = designs
                .iter()
                .map(|d| (*d, d.value.scheme.clone(), o.inner))
                .collect();
            if let Some(bd) = &st.bd {
                runs.retain(|(_, s, _)| s != "bd");
                runs.push((bd, "bd-zf".into(), InnerKind::Zf));
                runs.push((bd, "bd-rzf".into(), InnerKind::Rzf(None)));
            }
            let mut outputs = Vec::new();
            let mut evaluations = Vec::new();
            for (design, scheme, inner) in runs {
                let opts = EvaluateOptions {
                    gamma: target,
                    inner,
                    scheme: Some(scheme.clone()),
                    ..o.clone()
                };
                let dir = out.join("eval").join(&scheme);
                evaluations.push(stages::evaluate(truth, design, &opts, &dir, ph)?);
                for f in ["report.json", "users.csv", "histogram.csv"] {
                    outputs.push(format!("eval/{scheme}/{f}"));
                }
            }
            st.evaluations = evaluations;
            Ok(outputs)
        }
        Stage::Overhead(o) => {
            let design = st.designs()[0];
            stages::overhead(st.truth.as_ref().expect("validated"), design, o, &out.join("overhead.json"), ph)?;
            Ok(vec!["overhead.json".into()])
        }
        Stage::Compare => {
            let table = compare_report(&st.evaluations, ph)?;
            write_json(&out.join("compare.json"), &table)?;
            write_bytes(&out.join("compare.csv"), table.to_csv()?.as_bytes())?;
            print!("{}", table.render());
            Ok(vec!["compare.json".into(), "compare.csv".into()])
        }
    }
}
