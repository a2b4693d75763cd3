//! Stage implementations shared by the subcommands and the plan runner.
//!
//! Every stage writes its artifact (container or report directory) plus a
//! JSON summary carrying a [`Provenance`] block.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use subspace_core::container::Container;
use subspace_core::estimation::estimate_scenario;
use subspace_core::evaluation::montecarlo::{bound_check, summarize};
use subspace_core::evaluation::{collect_sinr, overhead_ledger, EvaluationReport, Histogram, MonteCarloOptions, OverheadInputs, OverheadLedger};
use subspace_core::linalg::frobenius;
use subspace_core::optimizer::{
    bca, build_constants_with, projectors, refine_delta, BcaOptions, DirectGain, DualOptions, GammaAggregate,
    RefineOptions,
};
use subspace_core::precoding::{bd_prebeamforming, bd_residual, BdOptions, InnerKind};
use subspace_core::{Scenario, ScenarioConfig, SubspaceControl};

use crate::failure::{Failure, Outcome};
use crate::provenance::{file_hash, summary_path, write_bytes, write_json, Provenance};

/// A value together with the hash of the bytes it was stored as.
#[derive(Debug, Clone)]
pub struct Stored<T> {
    pub value: T,
    pub hash: String,
}

pub fn read_scenario(path: &Path) -> Outcome<Stored<Scenario>> {
    let value = Scenario::read(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    Ok(Stored {
        value,
        hash: file_hash(path)?,
    })
}

fn store_scenario(scenario: &Scenario, prov: &Provenance, out: &Path) -> Outcome<String> {
    let mut c = scenario.to_container()?;
    if let Some(meta) = c.meta.as_object_mut() {
        meta.insert("provenance".into(), serde_json::to_value(prov)?);
    }
    write_bytes(out, &c.to_bytes()?)
}

pub fn generate(config: &ScenarioConfig, out: &Path, plan: Option<&str>) -> Outcome<Stored<Scenario>> {
    config.validate()?;
    let scenario = Scenario::generate(config)?;
    let prov = Provenance::new("generate", config, Some(config.rng_seed))?.plan(plan);
    let hash = store_scenario(&scenario, &prov, out)?;
    let topo = &scenario.topology;
    write_json(
        &summary_path(out)?,
        &json!({
            "provenance": prov,
            "container": hash,
            "base_stations": topo.num_bs,
            "users": topo.num_users(),
            "clusters": topo.num_clusters(),
            "links": scenario.links.len(),
            "antennas": scenario.antennas(),
            "invariants": scenario.check_invariants()?,
        }),
    )?;
    Ok(Stored { value: scenario, hash })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateOptions {
    /// Statistics samples per link.
    pub tp: usize,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self { tp: 20, seed: 0 }
    }
}

pub fn estimate(
    scenario: &Stored<Scenario>,
    opts: &EstimateOptions,
    out: &Path,
    plan: Option<&str>,
) -> Outcome<Stored<Scenario>> {
    let est = estimate_scenario(&scenario.value, opts.tp, opts.seed)?;
    let prov = Provenance::new("estimate", opts, Some(opts.seed))?
        .plan(plan)
        .input("scenario", &scenario.hash);
    let hash = store_scenario(&est, &prov, out)?;
    let errors: Vec<f64> = scenario
        .value
        .thetas
        .iter()
        .zip(&est.thetas)
        .map(|(t, e)| frobenius(&(e - t)) / frobenius(t))
        .collect();
    write_json(
        &summary_path(out)?,
        &json!({
            "provenance": prov,
            "container": hash,
            "tp": opts.tp,
            "max_rank": est.links.iter().map(|l| l.rank).max(),
            "mean_relative_error": errors.iter().sum::<f64>() / errors.len().max(1) as f64,
            "max_relative_error": errors.iter().copied().fold(0.0, f64::max),
        }),
    )?;
    Ok(Stored { value: est, hash })
}

/// A set of outer precoders and what is known about how they were designed.
#[derive(Debug, Clone)]
pub struct Design {
    pub scheme: String,
    pub control: SubspaceControl,
    /// Largest `γ` for which the restriction holds, when finite.
    pub gamma: Option<f64>,
    pub tightness_residual: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct DesignMeta {
    #[serde(default)]
    scheme: Option<String>,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    tightness_residual: Option<f64>,
}

pub fn read_design(path: &Path) -> Outcome<Stored<Design>> {
    let c = Container::read(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let control = SubspaceControl::from_container(&c)?;
    let meta: DesignMeta = c
        .meta
        .get("extra")
        .filter(|e| !e.is_null())
        .map(|e| serde_json::from_value(e.clone()))
        .transpose()?
        .unwrap_or_default();
    Ok(Stored {
        value: Design {
            scheme: meta.scheme.unwrap_or_else(|| "custom".into()),
            control,
            gamma: meta.gamma,
            tightness_residual: meta.tightness_residual,
        },
        hash: file_hash(path)?,
    })
}

/// Writes the control container (plus optional extra matrices) and its summary.
fn store_design(
    design: &Design,
    prov: &Provenance,
    details: serde_json::Value,
    extra_matrices: Vec<(String, subspace_core::linalg::CMatrix)>,
    out: &Path,
) -> Outcome<String> {
    let extra = json!({
        "provenance": prov,
        "scheme": design.scheme,
        "gamma": design.gamma,
        "tightness_residual": design.tightness_residual,
    });
    let mut c = design.control.to_container(extra)?;
    for (name, m) in extra_matrices {
        c.push(name, m);
    }
    let hash = write_bytes(out, &c.to_bytes()?)?;
    let mut summary = json!({
        "provenance": prov,
        "container": hash,
        "scheme": design.scheme,
        "dims": design.control.dims(),
        "gamma": design.gamma,
        "tightness_residual": design.tightness_residual,
    });
    if let (Some(s), Some(d)) = (summary.as_object_mut(), details.as_object()) {
        s.extend(d.clone());
    }
    write_json(&summary_path(out)?, &summary)?;
    Ok(hash)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn precode_bd(
    scenario: &Stored<Scenario>,
    opts: &BdOptions,
    out: &Path,
    plan: Option<&str>,
) -> Outcome<Stored<Design>> {
    let bd = bd_prebeamforming(&scenario.value, opts)?;
    let problem = build_constants_with(&scenario.value, DirectGain::default())?;
    let design = Design {
        scheme: "bd".into(),
        gamma: finite(problem.gamma_limit(&projectors(&bd.control))),
        control: bd.control.clone(),
        tightness_residual: None,
    };
    let prov = Provenance::new("bd-baseline", opts, None)?
        .plan(plan)
        .input("scenario", &scenario.hash);
    let details = json!({ "truncated": bd.truncated, "residual": bd_residual(&bd) });
    let hash = store_design(&design, &prov, details, Vec::new(), out)?;
    Ok(Stored { value: design, hash })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    pub epsilon_bisect: f64,
    pub max_doublings: usize,
    pub dual: DualOptions,
    pub direct_gain: DirectGain,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        let b = BcaOptions::default();
        Self {
            epsilon_bisect: b.epsilon_bisect,
            max_doublings: b.max_doublings,
            dual: b.dual,
            direct_gain: DirectGain::default(),
        }
    }
}

impl OptimizeOptions {
    fn bca(&self) -> BcaOptions {
        BcaOptions {
            epsilon_bisect: self.epsilon_bisect,
            max_doublings: self.max_doublings,
            dual: self.dual.clone(),
        }
    }
}

pub fn optimize(
    scenario: &Stored<Scenario>,
    opts: &OptimizeOptions,
    out: &Path,
    plan: Option<&str>,
) -> Outcome<Stored<Design>> {
    let problem = build_constants_with(&scenario.value, opts.direct_gain)?;
    let r = bca(&problem, &opts.bca())?;
    let prov = Provenance::new("optimize", opts, None)?
        .plan(plan)
        .input("scenario", &scenario.hash);
    let details = json!({
        "feasible": r.feasible,
        "gamma_floor": r.gamma_floor,
        "gamma_upper": r.gamma_upper,
        "iterations": r.iterations,
        "iteration_bound": r.iteration_bound(opts.epsilon_bisect),
        "trace": r.trace,
    });
    let Some(control) = r.control.clone() else {
        write_json(&summary_path(out)?, &json!({ "provenance": prov, "scheme": "optimized", "details": details }))?;
        return Err(Failure::infeasible(format!(
            "QoS floor {} is infeasible; admission control must drop users",
            r.gamma_floor
        )));
    };
    let design = Design {
        scheme: "optimized".into(),
        control,
        gamma: Some(r.gamma),
        tightness_residual: Some(r.tightness_residual),
    };
    let w: Vec<_> = r
        .w
        .iter()
        .flatten()
        .enumerate()
        .map(|(n, w)| (format!("W/{n}"), w.clone()))
        .collect();
    let hash = store_design(&design, &prov, details, w, out)?;
    Ok(Stored { value: design, hash })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineStageOptions {
    pub draws: usize,
    pub seed: u64,
    pub aggregate: GammaAggregate,
    pub delta_min: f64,
    pub delta_max: f64,
    pub epsilon_bisect: f64,
    pub direct_gain: DirectGain,
}

impl Default for RefineStageOptions {
    fn default() -> Self {
        let r = RefineOptions::default();
        Self {
            draws: r.draws,
            seed: r.seed,
            aggregate: r.aggregate,
            delta_min: r.delta_min,
            delta_max: r.delta_max,
            epsilon_bisect: BcaOptions::default().epsilon_bisect,
            direct_gain: DirectGain::default(),
        }
    }
}

pub fn refine(
    scenario: &Stored<Scenario>,
    bd: &Stored<Design>,
    opts: &RefineStageOptions,
    out: &Path,
    plan: Option<&str>,
) -> Outcome<Stored<Design>> {
    let problem = build_constants_with(&scenario.value, opts.direct_gain)?;
    let refined = refine_delta(
        &problem,
        &scenario.value,
        &bd.value.control,
        &RefineOptions {
            draws: opts.draws,
            seed: opts.seed,
            delta_min: opts.delta_min,
            delta_max: opts.delta_max,
            aggregate: opts.aggregate,
            ..Default::default()
        },
    )?;
    let r = bca(
        &refined.problem,
        &BcaOptions {
            epsilon_bisect: opts.epsilon_bisect,
            ..Default::default()
        },
    )?;
    let prov = Provenance::new("refine", opts, Some(opts.seed))?
        .plan(plan)
        .input("scenario", &scenario.hash)
        .input("bd", &bd.hash);
    let details = json!({
        "gamma_bd": finite(refined.gamma_bd),
        "deltas_before": refined.deltas_before,
        "deltas_after": refined.deltas_after,
        "kept": refined.skipped,
        "iterations": r.iterations,
    });
    let Some(control) = r.control else {
        return Err(Failure::infeasible(format!("refined problem is infeasible at the floor {}", r.gamma_floor)));
    };
    let design = Design {
        scheme: "optimized+refined".into(),
        control,
        gamma: Some(r.gamma),
        tightness_residual: Some(r.tightness_residual),
    };
    let hash = store_design(&design, &prov, details, Vec::new(), out)?;
    Ok(Stored { value: design, hash })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateOptions {
    pub draws: usize,
    pub seed: u64,
    pub sigma_e: f64,
    pub inner: InnerKind,
    /// Target QoS level; defaults to the design level of the precoder.
    pub gamma: Option<f64>,
    /// Effective rank `R` for the overhead ledger; defaults to the largest link rank.
    pub rank: Option<usize>,
    /// Overrides the scheme name stored with the precoder.
    pub scheme: Option<String>,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            draws: 10_000,
            seed: 0,
            sigma_e: 0.0,
            inner: InnerKind::Zf,
            gamma: None,
            rank: None,
            scheme: None,
        }
    }
}

/// Contents of `report.json` in an evaluation directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub provenance: Provenance,
    pub scheme: String,
    pub scenario_hash: String,
    pub precoder_hash: String,
    pub draws: usize,
    pub draw_seed: u64,
    pub inner: InnerKind,
    pub design_gamma: Option<f64>,
    pub target_gamma: f64,
    /// `min_k Φ̌_k(ε_k) / w_k`.
    pub achieved_gamma: f64,
    pub tightness_residual: Option<f64>,
    pub report: EvaluationReport,
}

fn ledger_for(scenario: &Scenario, control: &SubspaceControl, rank: Option<usize>) -> Outcome<OverheadLedger> {
    let rank = rank.unwrap_or_else(|| scenario.links.iter().map(|l| l.rank).max().unwrap_or(0));
    let cfg = &scenario.config;
    let inputs = OverheadInputs::from_topology(
        &scenario.topology,
        cfg.users_per_cell,
        scenario.antennas(),
        &control.dims(),
        rank,
        cfg.stat_samples,
        cfg.slots_per_epoch,
    )?;
    Ok(overhead_ledger(&inputs)?)
}

pub fn evaluate(
    scenario: &Stored<Scenario>,
    design: &Stored<Design>,
    opts: &EvaluateOptions,
    dir: &Path,
    plan: Option<&str>,
) -> Outcome<Evaluation> {
    let sc = &scenario.value;
    let d = &design.value;
    let target = opts.gamma.or(d.gamma).ok_or_else(|| {
        Failure::config(format!(
            "precoder '{}' has no design QoS level; pass a target gamma",
            d.scheme
        ))
    })?;
    d.control.validate(sc, 1e-8)?;
    let mc = MonteCarloOptions {
        draws: opts.draws,
        seed: opts.seed,
        inner: opts.inner,
        sigma_e: opts.sigma_e,
        ..Default::default()
    };
    if opts.draws < 100 {
        return Err(Failure::config(format!("need at least 100 draws, got {}", opts.draws)));
    }
    let samples = collect_sinr(sc, &d.control, &mc)?;
    let outage = summarize(sc, &samples, target);
    let achieved = outage
        .users
        .iter()
        .map(|u| u.sinr_at_epsilon / sc.weights[u.user])
        .fold(f64::INFINITY, f64::min);
    let scheme = opts.scheme.clone().unwrap_or_else(|| d.scheme.clone());
    let report = EvaluationReport {
        scheme: scheme.clone(),
        interference: Some(bound_check(sc, &d.control, &samples)),
        overhead: Some(ledger_for(sc, &d.control, opts.rank)?),
        outage,
        sigma_e: opts.sigma_e,
        seed: opts.seed,
    };
    let prov = Provenance::new("evaluate", opts, Some(opts.seed))?
        .plan(plan)
        .input("scenario", &scenario.hash)
        .input("precoder", &design.hash);
    let eval = Evaluation {
        provenance: prov,
        scheme,
        scenario_hash: scenario.hash.clone(),
        precoder_hash: design.hash.clone(),
        draws: opts.draws,
        draw_seed: opts.seed,
        inner: opts.inner,
        design_gamma: d.gamma,
        target_gamma: target,
        achieved_gamma: achieved,
        tightness_residual: d.tightness_residual,
        report,
    };
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), &eval)?;
    write_bytes(&dir.join("users.csv"), eval.report.users_csv()?.as_bytes())?;
    let sat: Vec<f64> = eval.report.outage.users.iter().map(|u| u.satisfaction).collect();
    let hist = Histogram::new(&sat, 10, 0.9, 1.0)?;
    write_bytes(&dir.join("histogram.csv"), hist.to_csv()?.as_bytes())?;
    Ok(eval)
}

pub fn read_evaluation(path: &Path) -> Outcome<Evaluation> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| Failure::config(format!("cannot read {}: {e}", file.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", file.display())))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverheadOptions {
    pub rank: Option<usize>,
}

pub fn overhead(
    scenario: &Stored<Scenario>,
    design: &Stored<Design>,
    opts: &OverheadOptions,
    out: &Path,
    plan: Option<&str>,
) -> Outcome<OverheadLedger> {
    let ledger = ledger_for(&scenario.value, &design.value.control, opts.rank)?;
    let prov = Provenance::new("overhead", opts, None)?
        .plan(plan)
        .input("scenario", &scenario.hash)
        .input("precoder", &design.hash);
    write_json(out, &json!({ "provenance": prov, "ledger": ledger }))?;
    Ok(ledger)
}

/// `dir/name` unless `explicit` is given.
pub fn output_path(explicit: Option<PathBuf>, root: &Path, name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| root.join(name))
}
