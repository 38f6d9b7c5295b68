use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{Architecture, ModelKind};
use crate::icesim::{ScenarioKind, SimConfig};
use crate::pipeline::{EdgeMode, SplitSpec, TrainConfig};

/// One run of the workflow, read from a TOML file.
///
/// `sim` and `arch` hold partial overrides applied on top of the scenario
/// preset and the default architecture of `model`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    /// Scenario parameters; the preset sweep when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    #[serde(default)]
    pub edge_mode: EdgeMode,
    /// Score only ice-covered nodes.
    #[serde(default = "default_masked")]
    pub masked: bool,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub sim: toml::Table,
    #[serde(default)]
    pub arch: toml::Table,
    #[serde(default)]
    pub train: TrainConfig,
    /// The preset split of the scenario when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}
fn default_threads() -> usize {
    1
}
fn default_model() -> ModelKind {
    ModelKind::Egcn
}
fn default_masked() -> bool {
    true
}
fn default_repetitions() -> usize {
    3
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub model: Option<ModelKind>,
    pub scenario: Option<ScenarioKind>,
    pub epochs: Option<usize>,
    pub all_nodes: bool,
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

impl RunConfig {
    pub fn preset(scenario: ScenarioKind) -> Self {
        RunConfig {
            scenario,
            seed: 0,
            out: default_out(),
            threads: default_threads(),
            model: default_model(),
            params: None,
            edge_mode: EdgeMode::default(),
            masked: true,
            repetitions: default_repetitions(),
            sim: toml::Table::new(),
            arch: toml::Table::new(),
            train: TrainConfig::default(),
            split: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_owned()),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::TomlDe(e) => Error::format(path, e.to_string()),
            other => other,
        })
    }

    /// Applies flag overrides. `--seed` reseeds the mesh, the model, the
    /// shuffle and the split together.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.scenario {
            self.scenario = s;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
            self.train.seed = seed;
            if let Some(split) = &mut self.split {
                split.seed = seed;
            }
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
        if let Some(m) = o.model {
            self.model = m;
        }
        if let Some(e) = o.epochs {
            self.train.epochs = e;
        }
        if o.all_nodes {
            self.masked = false;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
        }
        if matches!(&self.params, Some(p) if p.is_empty()) {
            return Err(Error::InvalidConfig("the parameter grid is empty".into()));
        }
        self.train.validate()?;
        self.sim_config()?;
        self.architecture(self.model)?;
        let split = self.split_spec();
        split.validate()?;
        for p in self.param_grid() {
            self.scenario.params(p)?;
        }
        Ok(())
    }

    pub fn param_grid(&self) -> Vec<f64> {
        self.params.clone().unwrap_or_else(|| self.scenario.default_grid())
    }

    pub fn split_spec(&self) -> SplitSpec {
        self.split.clone().unwrap_or_else(|| {
            let mut s = SplitSpec::preset(self.scenario);
            s.seed = self.seed;
            s
        })
    }

    /// Scenario preset with the `sim` overrides applied.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let preset = SimConfig::preset(self.scenario);
        let mut table = toml::Table::try_from(&preset)?;
        merge(&mut table, &self.sim);
        let cfg: SimConfig = toml::Value::Table(table).try_into()?;
        if cfg.scenario != self.scenario {
            return Err(Error::InvalidConfig(
                "sim.scenario must match the run scenario".into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default architecture of `kind` with the `arch` overrides applied.
    pub fn architecture(&self, kind: ModelKind) -> Result<Architecture> {
        if self.arch.contains_key("kind") {
            return Err(Error::InvalidConfig("set the model with `model`, not arch.kind".into()));
        }
        let mut table = toml::Table::try_from(Architecture::new(kind))?;
        merge(&mut table, &self.arch);
        let arch: Architecture = toml::Value::Table(table).try_into()?;
        arch.validate()?;
        Ok(arch)
    }
}
