use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::building_sim::ScenarioConfig;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::pipeline::PipelineConfig;
use crate::training::TrainConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Full,
    Tiny,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Central interval probabilities to report coverage for.
    pub central_levels: Vec<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { central_levels: vec![0.9, 0.95, 0.99] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub forecasts: PathBuf,
    pub metrics_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            dataset: "data/dataset.csv".into(),
            checkpoint: "runs/model.hvf".into(),
            forecasts: "runs/forecasts.csv".into(),
            metrics_dir: "runs/metrics".into(),
        }
    }
}

/// Everything a run needs. `seed` drives the simulator, forecast noise,
/// weight initialisation and shuffling unless `model.rng_seed` or
/// `training.seed` are set explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub profile: Profile,
    pub simulator: ScenarioConfig,
    pub pipeline: PipelineConfig,
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub evaluation: EvaluationConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Full)
    }
}

/// Command-line values layered over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub profile: Option<Profile>,
    /// `section.key=value` assignments; values are TOML literals, bare
    /// words are taken as strings.
    pub set: Vec<String>,
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (model, training) = match profile {
            Profile::Full => (ModelConfig::full(), TrainConfig::default()),
            Profile::Tiny => (ModelConfig::tiny(), TrainConfig { batch_size: 32, ..TrainConfig::default() }),
        };
        Self {
            seed: 0,
            profile,
            simulator: ScenarioConfig::default(),
            pipeline: PipelineConfig::default(),
            model,
            training,
            evaluation: EvaluationConfig::default(),
            paths: PathsConfig::default(),
        }
    }

    /// Profile defaults, then the file, then `--set`, then `--seed` and
    /// `--profile`. The result is fully validated.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<Table>().map_err(|e| Error::config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for assignment in &overrides.set {
            apply_assignment(&mut table, assignment)?;
        }
        if let Some(seed) = overrides.seed {
            table.insert("seed".into(), Value::Integer(seed as i64));
        }
        if let Some(p) = overrides.profile {
            table.insert("profile".into(), Value::try_from(p).map_err(|e| Error::config(e.to_string()))?);
        }
        Self::from_table(table)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(text.parse::<Table>().map_err(|e| Error::config(e.to_string()))?)
    }

    fn from_table(table: Table) -> Result<Self> {
        let profile = match table.get("profile") {
            Some(v) => v.clone().try_into::<Profile>().map_err(|_| {
                Error::config(format!("profile must be \"full\" or \"tiny\", got {v}"))
            })?,
            None => Profile::Full,
        };
        let explicit = |section: &str, key: &str| {
            table.get(section).and_then(Value::as_table).is_some_and(|t| t.contains_key(key))
        };
        let (model_seed, train_seed) = (explicit("model", "rng_seed"), explicit("training", "seed"));
        let base = Value::try_from(Self::for_profile(profile)).map_err(|e| Error::config(e.to_string()))?;
        let Value::Table(mut merged) = base else { unreachable!("config serializes to a table") };
        merge(&mut merged, table, "")?;
        let mut cfg: RunConfig = Value::Table(merged).try_into().map_err(|e: toml::de::Error| {
            Error::config(e.to_string().trim().to_string())
        })?;
        if !model_seed {
            cfg.model.rng_seed = cfg.seed;
        }
        if !train_seed {
            cfg.training.seed = cfg.seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulator.validate()?;
        self.pipeline.validate()?;
        self.model.validate()?;
        self.training.validate()?;
        for &c in &self.evaluation.central_levels {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::config(format!("evaluation.central_levels entries must lie in (0, 1), got {c}")));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }
}

/// SHA-256 of the canonical JSON form of `value`.
pub fn config_hash(value: &impl Serialize) -> Result<String> {
    let json = serde_json::to_vec(value).map_err(|e| Error::config(e.to_string()))?;
    Ok(Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect())
}

fn merge(base: &mut Table, over: Table, prefix: &str) -> Result<()> {
    for (k, v) in over {
        let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o, &name)?,
            (Some(Value::Table(_)), other) => {
                return Err(Error::config(format!("`{name}` is a section, got the value {other}")));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    Ok(())
}

fn apply_assignment(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("--set expects section.key=value, got `{assignment}`")))?;
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("--set key `{key}` is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::config(format!("--set: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_full_profile() {
        let c = RunConfig::load(None, &Overrides::default()).unwrap();
        assert_eq!(c.model.n_past, 672);
        assert_eq!(c.model.n_future, 96);
        assert_eq!(c.model.mha_heads, 4);
        assert_eq!(c.model.rnn_units, 200);
        assert_eq!(c.model.dropout_rate, 0.3);
        assert_eq!(c.training.batch_size, 256);
    }

    #[test]
    fn tiny_profile_with_file_overrides() {
        let c = RunConfig::from_toml_str("profile = \"tiny\"\nseed = 5\n[model]\nrnn_units = 8\n").unwrap();
        assert_eq!((c.model.n_past, c.model.n_future, c.model.d_model), (48, 12, 32));
        assert_eq!(c.model.rnn_units, 8);
        assert_eq!(c.training.batch_size, 32);
        assert_eq!((c.model.rng_seed, c.training.seed), (5, 5));
    }

    #[test]
    fn explicit_seeds_are_kept() {
        let c = RunConfig::from_toml_str("seed = 5\n[training]\nseed = 9\n").unwrap();
        assert_eq!((c.model.rng_seed, c.training.seed), (5, 9));
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["bogus = 1", "[model]\nlayers = 3", "[simulator.building]\nfloors = 2", "[extra]\nx = 1"] {
            let e = RunConfig::from_toml_str(text).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{text}: {e}");
        }
        let e = RunConfig::from_toml_str("[model]\nlayers = 3").unwrap_err().to_string();
        assert!(e.contains("layers"), "{e}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let e = RunConfig::from_toml_str("[simulator]\ndays = 0").unwrap_err().to_string();
        assert!(e.contains("simulator.days"), "{e}");
        let e = RunConfig::from_toml_str("[model]\nd_model = 30").unwrap_err().to_string();
        assert!(e.contains("mha_heads"), "{e}");
    }

    #[test]
    fn set_overrides_and_flags() {
        let o = Overrides {
            seed: Some(3),
            profile: Some(Profile::Tiny),
            set: vec!["simulator.days=30".into(), "training.max_epochs = 2".into(), "paths.dataset=x.csv".into()],
        };
        let c = RunConfig::load(None, &o).unwrap();
        assert_eq!(c.simulator.days, 30);
        assert_eq!(c.training.max_epochs, 2);
        assert_eq!(c.paths.dataset, PathBuf::from("x.csv"));
        assert_eq!(c.seed, 3);
        assert_eq!(c.profile, Profile::Tiny);
        assert!(RunConfig::load(None, &Overrides { set: vec!["novalue".into()], ..Default::default() }).is_err());
    }

    #[test]
    fn serialized_config_reloads_identically() {
        let c = RunConfig::from_toml_str("profile = \"tiny\"\nseed = 17").unwrap();
        let back = RunConfig::from_toml_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(config_hash(&back).unwrap(), config_hash(&c).unwrap());
    }
}
