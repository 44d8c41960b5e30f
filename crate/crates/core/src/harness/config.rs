use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mechanism::MechanismSpec;
use crate::zo::{TaskSpec, TrainConfig};
use crate::{Error, Result};

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// A complete experiment: task, mechanism, optimizer and replication seeds.
///
/// ```toml
/// seeds = [0, 1, 2]
///
/// [task]
/// name = "separable-blobs"
///
/// [mechanism]
/// variant = { kind = "paczero-mi", mi_total = 0.33 }
///
/// [train]
/// steps = 500
/// learning_rate = 0.05
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub task: TaskSpec,
    pub mechanism: MechanismSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn new(task: TaskSpec, mechanism: MechanismSpec, train: TrainConfig) -> Self {
        Self { task, mechanism, train, output_dir: None, seeds: default_seeds() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let field = e.span().map_or_else(|| "<config>".to_string(), |s| locate(text, s.start));
            Error::Config { field, message: e.message().to_string() }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.mechanism.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        Ok(())
    }
}

/// `line L, column C` of a byte offset, for error messages.
fn locate(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    format!("line {line}, column {col}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::Variant;

    const EXAMPLE: &str = r#"
seeds = [0, 1, 2]

[task]
name = "separable-blobs"

[mechanism]
variant = { kind = "paczero-mi", mi_total = 0.33 }

[train]
steps = 500
learning_rate = 0.05
"#;

    #[test]
    fn parses_the_documented_example() {
        let c = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(c.seeds, vec![0, 1, 2]);
        assert_eq!(c.mechanism.variant, Variant::PaczeroMi { mi_total: 0.33 });
        assert_eq!(c.train.smoothing, 1e-3);
        assert_eq!(c.train.dev_eval_interval, 25);
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_fields_point_at_their_line() {
        let bad = EXAMPLE.replace("steps = 500", "stepz = 500");
        match ExperimentConfig::from_toml(&bad) {
            Err(Error::Config { field, message }) => {
                assert!(field.starts_with("line "), "{field}");
                assert!(message.contains("stepz"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let bad = EXAMPLE.replace("mi_total = 0.33", "mi_total = -1.0");
        match ExperimentConfig::from_toml(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "mechanism.variant.mi_total"),
            other => panic!("{other:?}"),
        }
        let bad = EXAMPLE.replace("seeds = [0, 1, 2]", "seeds = []");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let bad = EXAMPLE.replace("separable-blobs", "cifar");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }
}
