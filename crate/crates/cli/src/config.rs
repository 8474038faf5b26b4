//! Run configuration: a flat JSON object holding every [`TrainConfig`] field
//! plus the CLI-only knobs of [`RunOptions`], with `--key value` overrides.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use podpo_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Knobs that only affect artifacts, never the training trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// Save a checkpoint every this many iterations (0: only at the end).
    pub checkpoint_interval: usize,
    /// Fill the `wall_ms` column. Off by default so metrics files stay
    /// byte-identical across runs.
    pub record_wall_time: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            checkpoint_interval: 50,
            record_wall_time: false,
        }
    }
}

const OPTION_KEYS: [&str; 2] = ["checkpoint_interval", "record_wall_time"];
/// Keys whose override value is a comma-separated list.
const LIST_KEYS: [&str; 2] = ["temps", "hidden"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub options: RunOptions,
}

impl RunConfig {
    /// Reads the optional config file, applies the overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut map = match path {
            Some(p) => {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                match serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", p.display()))?
                {
                    Value::Object(m) => m,
                    _ => bail!("{}: config must be a JSON object", p.display()),
                }
            }
            None => Map::new(),
        };
        for (key, value) in parse_overrides(overrides)? {
            set_path(&mut map, &key, value);
        }
        Self::from_map(map)
    }

    pub fn from_map(mut map: Map<String, Value>) -> Result<Self> {
        let mut opts = Map::new();
        for k in OPTION_KEYS {
            if let Some(v) = map.remove(k) {
                opts.insert(k.to_owned(), v);
            }
        }
        let options: RunOptions = serde_json::from_value(Value::Object(opts))?;
        let train: TrainConfig =
            serde_json::from_value(Value::Object(map)).context("invalid configuration")?;
        train.validate().context("invalid configuration")?;
        Ok(Self { train, options })
    }

    /// Complete, flat snapshot: loading it back reproduces this config exactly.
    pub fn to_json(&self) -> String {
        let Value::Object(mut map) = serde_json::to_value(&self.train).expect("serializable")
        else {
            unreachable!("TrainConfig serializes to an object")
        };
        let Value::Object(opts) = serde_json::to_value(&self.options).expect("serializable") else {
            unreachable!("RunOptions serializes to an object")
        };
        map.extend(opts);
        let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("serializable");
        s.push('\n');
        s
    }
}

fn normalize_key(raw: &str) -> String {
    let k = raw.replace('-', "_");
    if k == "G" {
        "num_candidates".to_owned()
    } else {
        k
    }
}

fn parse_value(key: &str, raw: &str) -> Result<Value> {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    if LIST_KEYS.contains(&leaf) && !raw.trim_start().starts_with('[') {
        let items = raw
            .split(',')
            .map(|s| {
                serde_json::from_str::<Value>(s.trim())
                    .with_context(|| format!("--{key}: bad list item `{s}`"))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Value::Array(items));
    }
    Ok(serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned())))
}

/// Turns `--key value`, bare `--flag` (true) and `--no-flag` (false) into
/// key/value pairs. Dashes become underscores; dots address nested objects.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, Value)>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let Some(raw) = args[i].strip_prefix("--") else {
            bail!("expected an option starting with `--`, found `{}`", args[i]);
        };
        let (raw_key, inline) = match raw.split_once('=') {
            Some((k, v)) => (k, Some(v.to_owned())),
            None => (raw, None),
        };
        let key = normalize_key(raw_key);
        let has_value = inline.is_some()
            || args
                .get(i + 1)
                .is_some_and(|n| !n.starts_with("--") || n.parse::<f64>().is_ok());
        if let Some(v) = inline {
            out.push((key.clone(), parse_value(&key, &v)?));
            i += 1;
        } else if has_value {
            out.push((key.clone(), parse_value(&key, &args[i + 1])?));
            i += 2;
        } else if let Some(flag) = key.strip_prefix("no_") {
            out.push((flag.to_owned(), Value::Bool(false)));
            i += 1;
        } else {
            out.push((key, Value::Bool(true)));
            i += 1;
        }
    }
    Ok(out)
}

fn set_path(map: &mut Map<String, Value>, key: &str, value: Value) {
    match key.split_once('.') {
        None => {
            if key == "num_candidates" {
                map.remove("G");
            }
            map.insert(key.to_owned(), value);
        }
        Some((head, rest)) => {
            let child = map
                .entry(head.to_owned())
                .or_insert_with(|| Value::Object(Map::new()));
            if !child.is_object() {
                *child = Value::Object(Map::new());
            }
            set_path(child.as_object_mut().expect("object"), rest, value);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use podpo_core::envs::EnvKind;
    use podpo_core::trainer::Algorithm;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn empty_config_is_all_defaults() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.options, RunOptions::default());
    }

    #[test]
    fn ablation_flags() {
        let c = RunConfig::load(
            None,
            &args("--no-advantage-weighting --temps 0.02 --G 4 --algorithm ppo_baseline"),
        )
        .unwrap();
        assert!(!c.train.advantage_weighting);
        assert_eq!(c.train.temps, vec![0.02]);
        assert_eq!(c.train.num_candidates, 4);
        assert_eq!(c.train.algorithm, Algorithm::PpoBaseline);
    }

    #[test]
    fn nested_lists_and_options() {
        let c = RunConfig::load(
            None,
            &args("--env point_mass --hidden 32,16 --env_params.point_mass.horizon 8 --record-wall-time --seed=7 --beta -0.0"),
        )
        .unwrap();
        assert_eq!(c.train.env, EnvKind::PointMass);
        assert_eq!(c.train.hidden, vec![32, 16]);
        assert_eq!(c.train.env_params.point_mass.horizon, 8);
        assert!(c.options.record_wall_time);
        assert_eq!(c.train.seed, 7);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = RunConfig::load(None, &args("--G 0")).unwrap_err();
        assert!(format!("{err:#}").contains("num_candidates"), "{err:#}");
        let err = RunConfig::load(None, &args("--bogus 1")).unwrap_err();
        assert!(format!("{err:#}").contains("bogus"), "{err:#}");
        let err = RunConfig::load(None, &args("--actor-lr -1")).unwrap_err();
        assert!(format!("{err:#}").contains("actor_lr"), "{err:#}");
    }

    #[test]
    fn snapshot_round_trips() {
        let c = RunConfig::load(
            None,
            &args("--G 16 --temps 0.15,2.0 --checkpoint-interval 3"),
        )
        .unwrap();
        let map = match serde_json::from_str(&c.to_json()).unwrap() {
            Value::Object(m) => m,
            _ => unreachable!(),
        };
        assert_eq!(RunConfig::from_map(map).unwrap(), c);
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"G": 4, "iterations": 5, "env": "point_mass"}"#).unwrap();
        let c = RunConfig::load(Some(&p), &args("--G 16")).unwrap();
        assert_eq!(c.train.num_candidates, 16);
        assert_eq!(c.train.iterations, 5);
    }
}
