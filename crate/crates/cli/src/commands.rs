use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use uamplan::env::{Env, EnvConfig};
use uamplan::eval::{compare as run_compare, compute_metrics, Contender, Metrics};
use uamplan::msha::{MshaConfig, MshaPolicy};
use uamplan::planners::{run_classical, Method};
use uamplan::ppo::{greedy_rollout, train as run_train, CurveRow, EnvTask, TrainConfig};
use uamplan::rng::stream;
use uamplan::{build_map as make_map, load_scenario, ChannelParams, Error, RadioMap, Scenario};

use crate::manifest::{Outputs, RunManifest};
use crate::Common;

/// Contents of the `--config` override file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub model: MshaConfig,
    pub train: TrainConfig,
    /// Save a checkpoint every this many episodes; 0 keeps only the final one.
    pub checkpoint_every: usize,
}

const CONNECTIVITY_SAMPLING: &str = "cell at the end of each slot";

fn read_config(a: &Common) -> Result<(RunConfig, Option<serde_json::Value>)> {
    let Some(path) = &a.config else {
        return Ok((RunConfig::default(), None));
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let cfg: RunConfig = serde_json::from_value(raw.clone()).with_context(|| format!("parsing {}", path.display()))?;
    Ok((cfg, Some(raw)))
}

fn scenario(a: &Common) -> Result<Scenario> {
    let mut s = match a.scenario.as_str() {
        "builtin:desk" => uamplan::synth::desk_scenario(),
        path => load_scenario(path).with_context(|| format!("loading scenario {path}"))?,
    };
    if a.threshold_db.len() == 1 {
        s.sinr_threshold_db = a.threshold_db[0];
    }
    Ok(s)
}

fn single_threshold(a: &Common) -> Result<()> {
    if a.threshold_db.len() > 1 {
        return Err(Error::Config("this command takes at most one --threshold-db".into()).into());
    }
    Ok(())
}

fn radio_map(a: &Common, s: &Scenario) -> Result<RadioMap> {
    match &a.map {
        Some(path) => {
            let map = RadioMap::load(path).with_context(|| format!("loading map {}", path.display()))?;
            if map.grid != s.grid() {
                return Err(Error::Config(format!("map {} does not match the scenario grid", path.display())).into());
            }
            Ok(map)
        }
        None => Ok(make_map(s, &ChannelParams::for_scenario(s))?),
    }
}

fn manifest(command: &str, a: &Common, overrides: Option<serde_json::Value>, seed: Option<u64>, parameters: serde_json::Value) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        scenario: a.scenario.clone(),
        map: a.map.as_ref().map(|p| p.display().to_string()),
        config_overrides: overrides,
        seed,
        out: a.out.display().to_string(),
        parameters,
        artifacts: Vec::new(),
    }
}

fn metrics_json(method: &str, threshold_db: f64, m: &Metrics) -> Result<String> {
    Ok(serde_json::to_string_pretty(&json!({
        "method": method,
        "threshold_db": threshold_db,
        "metrics": m,
        "connectivity_sampling": CONNECTIVITY_SAMPLING,
    }))? + "\n")
}

pub fn build_map(a: &Common) -> Result<()> {
    single_threshold(a)?;
    let s = scenario(a)?;
    let map = make_map(&s, &ChannelParams::for_scenario(&s))?;
    let mut out = Outputs::create(&a.out)?;
    let mut bin = Vec::new();
    map.write_to(&mut bin)?;
    out.write("map.bin", bin)?;
    out.write("map.csv", map.to_csv())?;
    println!("built {0}x{0} map", map.n());
    out.finish(manifest("build-map", a, None, None, json!({})))
}

fn one_method(a: &Common) -> Result<Method> {
    match a.method.as_slice() {
        [m] => Ok(m.parse()?),
        [] => Err(Error::Config("--method is required".into()).into()),
        _ => Err(Error::Config("plan takes one --method".into()).into()),
    }
}

pub fn plan(a: &Common) -> Result<()> {
    single_threshold(a)?;
    let s = scenario(a)?;
    let map = radio_map(a, &s)?;
    let method = one_method(a)?;
    let run = run_classical(&s, &map, method, s.sinr_threshold_db)?;
    let metrics = compute_metrics(&run.trace, &s)?;
    let mut out = Outputs::create(&a.out)?;
    out.write("trace.csv", run.trace.to_csv())?;
    out.write("metrics.json", metrics_json(method.name(), s.sinr_threshold_db, &metrics)?)?;
    let plans: Vec<_> = run
        .plans
        .iter()
        .map(|(slot, seq)| json!({ "slot": slot, "sequence": seq.to_string() }))
        .collect();
    let route = json!({
        "executed": run.executed.to_string(),
        "plans": plans,
        "route_cost_cells": run.route_cost.map(|c| c.to_string()),
        "waypoints": run.route.points.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
    });
    out.write("plan.json", serde_json::to_string_pretty(&route)? + "\n")?;
    println!("{method}: {} TD {:.1} m PR {}%", run.executed, metrics.td, metrics.pr);
    out.finish(manifest(
        "plan",
        a,
        None,
        None,
        json!({ "method": method.name(), "threshold_db": s.sinr_threshold_db }),
    ))
}

/// Model dimensions follow the environment and the scenario.
fn fit_model(model: &MshaConfig, env: &EnvConfig, s: &Scenario) -> MshaConfig {
    MshaConfig {
        window_side: env.window_side,
        history_len: env.history_len,
        passengers: s.passengers.len(),
        actions: s.heading_count(),
        ..model.clone()
    }
}

pub fn train(a: &Common) -> Result<()> {
    single_threshold(a)?;
    let (mut cfg, overrides) = read_config(a)?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    let s = scenario(a)?;
    let map = radio_map(a, &s)?;
    let model = fit_model(&cfg.model, &cfg.env, &s);
    let mut policy = MshaPolicy::new(model.clone(), &mut stream(cfg.train.seed, "init"))?;
    let mut task = EnvTask::new(Env::new(&s, &map, cfg.env.clone()));
    let mut out = Outputs::create(&a.out)?;
    let mut curve: Vec<CurveRow> = Vec::new();
    let mut saved = Vec::new();
    let every = cfg.checkpoint_every;
    let report = run_train(&mut policy, &mut task, &cfg.train, |p, row| {
        curve.push(row.clone());
        if every > 0 && (row.episode + 1) % every == 0 {
            let name = format!("checkpoint_{:06}.ckpt", row.episode + 1);
            p.save(out.path(&name))?;
            saved.push(name);
        }
        Ok(())
    })?;
    for name in &saved {
        out.register(name)?;
    }
    let mut csv = format!("{}\n", CurveRow::CSV_HEADER);
    for r in &report.curve {
        csv.push_str(&r.csv());
        csv.push('\n');
    }
    out.write("curve.csv", csv)?;
    let mut ckpt = Vec::new();
    policy.write(&mut ckpt)?;
    out.write("policy.ckpt", ckpt)?;
    let resolved = RunConfig {
        model,
        ..cfg.clone()
    };
    out.write("run_config.json", serde_json::to_string_pretty(&resolved)? + "\n")?;
    if let Some(last) = report.curve.last() {
        println!(
            "trained {} episodes, last reward {:.2}, PR {}%",
            report.curve.len(),
            last.total_reward,
            last.pr
        );
    }
    out.finish(manifest(
        "train",
        a,
        overrides,
        Some(cfg.train.seed),
        json!({ "threshold_db": s.sinr_threshold_db, "parameters": policy.param_count() }),
    ))
}

fn load_policy(a: &Common) -> Result<MshaPolicy> {
    let Some(path) = &a.checkpoint else {
        return Err(Error::Config("--checkpoint is required".into()).into());
    };
    MshaPolicy::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Environment settings that agree with the checkpoint's input sizes.
fn env_for(policy: &MshaPolicy, base: &EnvConfig, s: &Scenario) -> Result<EnvConfig> {
    let c = &policy.config;
    if c.passengers != s.passengers.len() || c.actions != s.heading_count() {
        return Err(Error::Config(format!(
            "checkpoint expects {} passengers and {} actions, scenario has {} and {}",
            c.passengers,
            c.actions,
            s.passengers.len(),
            s.heading_count()
        ))
        .into());
    }
    Ok(EnvConfig {
        window_side: c.window_side,
        history_len: c.history_len,
        ..base.clone()
    })
}

pub fn eval(a: &Common) -> Result<()> {
    single_threshold(a)?;
    let (cfg, overrides) = read_config(a)?;
    let s = scenario(a)?;
    let map = radio_map(a, &s)?;
    let policy = load_policy(a)?;
    let env_cfg = env_for(&policy, &cfg.env, &s)?;
    let trace = greedy_rollout(&policy, &Env::new(&s, &map, env_cfg))?;
    let metrics = compute_metrics(&trace, &s)?;
    let mut out = Outputs::create(&a.out)?;
    out.write("trace.csv", trace.to_csv())?;
    out.write("metrics.json", metrics_json("msha", s.sinr_threshold_db, &metrics)?)?;
    println!(
        "msha: TD {:.1} m PR {}% connectivity {:.1}%",
        metrics.td, metrics.pr, metrics.connectivity
    );
    out.finish(manifest(
        "eval",
        a,
        overrides,
        None,
        json!({ "threshold_db": s.sinr_threshold_db, "checkpoint": a.checkpoint }),
    ))
}

pub fn compare(a: &Common) -> Result<()> {
    let (cfg, overrides) = read_config(a)?;
    let mut s = scenario(a)?;
    let thresholds = if a.threshold_db.is_empty() {
        vec![s.sinr_threshold_db]
    } else {
        a.threshold_db.clone()
    };
    s.sinr_threshold_db = thresholds[0];
    let map = radio_map(a, &s)?;
    let policy = a.checkpoint.as_ref().map(|_| load_policy(a)).transpose()?;
    let names: Vec<String> = if a.method.is_empty() {
        let mut v: Vec<String> = Method::ALL.iter().map(|m| m.name().to_string()).collect();
        if policy.is_some() {
            v.push("msha".into());
        }
        v
    } else {
        a.method.clone()
    };
    let mut contenders = Vec::new();
    for name in &names {
        if name == "msha" {
            let Some(p) = &policy else {
                bail!(Error::Config("method msha needs --checkpoint".into()));
            };
            contenders.push(Contender::Policy {
                name: "msha".into(),
                policy: p,
                config: env_for(p, &cfg.env, &s)?,
            });
        } else {
            contenders.push(Contender::Classical(name.parse()?));
        }
    }
    let table = run_compare(&s, &map, &contenders, &thresholds)?;
    let mut out = Outputs::create(&a.out)?;
    out.write("compare.csv", table.to_csv())?;
    out.write("compare_long.csv", table.to_long_csv())?;
    let doc = json!({ "rows": table.rows, "connectivity_sampling": CONNECTIVITY_SAMPLING });
    out.write("compare.json", serde_json::to_string_pretty(&doc)? + "\n")?;
    print!("{}", table.to_csv());
    out.finish(manifest(
        "compare",
        a,
        overrides,
        None,
        json!({ "methods": names, "thresholds_db": thresholds }),
    ))
}
