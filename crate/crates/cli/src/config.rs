//! Flat key-value configuration file with section prefixes (`synth.`,
//! `rf.`, `ann.`, `lmem.`). Unknown keys are rejected so typos fail loudly.

use std::path::Path;
use std::str::FromStr;

use emns_core::error::{Error, Result};
use emns_core::forest::ForestHyperparams;
use emns_core::net::{MlpArchitecture, TrainSpec};
use emns_core::synth::{CurrentProfile, SynthEmnsConfig};

/// Resolved settings: defaults overridden by the config file; command-line
/// flags are applied on top by each command.
#[derive(Debug, Clone)]
pub struct Settings {
    pub synth: SynthEmnsConfig,
    /// Number of current vectors `generate` produces by default.
    pub n_current_vectors: usize,
    pub rf: ForestHyperparams,
    pub ann_arch: MlpArchitecture,
    pub ann_spec: TrainSpec,
    pub lmem_max_degree: usize,
    pub lmem_current_cap_a: f64,
    /// Raw config file text (empty when no file was given); hashed into
    /// the run manifest.
    pub raw: String,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            synth: SynthEmnsConfig::default(),
            n_current_vectors: 3590,
            rf: ForestHyperparams::default(),
            ann_arch: MlpArchitecture::default(),
            ann_spec: TrainSpec::default(),
            lmem_max_degree: 3,
            lmem_current_cap_a: 5.0,
            raw: String::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse value '{value}' for key '{key}'")))
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Settings> {
        let mut settings = Settings::default();
        let Some(path) = path else {
            return Ok(settings);
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.into(),
                line: idx + 1,
                detail: "expected `key = value`".into(),
            })?;
            settings.apply(key.trim(), value.trim())?;
        }
        settings.raw = text;
        settings.synth.validate()?;
        settings.rf.validate()?;
        settings.ann_arch.validate()?;
        settings.ann_spec.validate()?;
        Ok(settings)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "synth.seed" => self.synth.seed = parse(key, value)?,
            "synth.n_current_vectors" => self.n_current_vectors = parse(key, value)?,
            "synth.max_current_a" => self.synth.max_current_a = parse(key, value)?,
            "synth.saturation" => self.synth.saturation = parse(key, value)?,
            "synth.current_profile" => {
                self.synth.current_profile = match value {
                    "uniform" => CurrentProfile::Uniform,
                    "level-stratified" => CurrentProfile::LevelStratified,
                    other => {
                        return Err(Error::Config(format!(
                            "unknown current profile '{other}' (expected 'uniform' or 'level-stratified')"
                        )))
                    }
                }
            }
            "synth.field_noise_sd_t" => self.synth.field_noise_sd_t = parse(key, value)?,
            "synth.current_noise_sd_a" => self.synth.current_noise_sd_a = parse(key, value)?,
            "synth.resistance_per_coil_ohm" => {
                self.synth.resistance_per_coil_ohm = parse(key, value)?
            }
            "rf.n_trees" => self.rf.n_trees = parse(key, value)?,
            "rf.max_depth" => self.rf.max_depth = parse(key, value)?,
            "rf.min_samples_split" => self.rf.min_samples_split = parse(key, value)?,
            "rf.max_features" => self.rf.max_features = parse(key, value)?,
            "rf.min_samples_leaf" => self.rf.min_samples_leaf = parse(key, value)?,
            "rf.seed" => self.rf.seed = parse(key, value)?,
            "ann.batch_size" => self.ann_spec.batch_size = parse(key, value)?,
            "ann.max_epochs" => self.ann_spec.max_epochs = parse(key, value)?,
            "ann.patience" => self.ann_spec.patience = parse(key, value)?,
            "ann.learning_rate" => self.ann_spec.learning_rate = parse(key, value)?,
            "ann.validation_fraction" => self.ann_spec.validation_fraction = parse(key, value)?,
            "ann.seed" => self.ann_spec.seed = parse(key, value)?,
            "ann.hidden_layers" => {
                let mut layers = vec![emns_core::NUM_FEATURES];
                for w in value.split(',') {
                    layers.push(parse(key, w)?);
                }
                layers.push(3);
                self.ann_arch = MlpArchitecture { layers };
            }
            "lmem.max_degree" => self.lmem_max_degree = parse(key, value)?,
            "lmem.current_cap_a" => self.lmem_current_cap_a = parse(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown configuration key '{other}'")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_text(text: &str) -> Result<Settings> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emns.conf");
        std::fs::write(&path, text).unwrap();
        Settings::load(Some(&path))
    }

    #[test]
    fn defaults_without_config_file() {
        let s = Settings::load(None).unwrap();
        assert_eq!(s.n_current_vectors, 3590);
        assert_eq!(s.rf.n_trees, 100);
        assert_eq!(s.ann_spec.batch_size, 128);
        assert_eq!(s.lmem_current_cap_a, 5.0);
    }

    #[test]
    fn prefixed_keys_override_defaults() {
        let s = load_text(
            "# comment\n\
             synth.seed = 9\n\
             synth.n_current_vectors = 12\n\
             rf.n_trees = 7\n\
             ann.learning_rate = 0.01\n\
             ann.hidden_layers = 20,10\n\
             lmem.max_degree = 2\n",
        )
        .unwrap();
        assert_eq!(s.synth.seed, 9);
        assert_eq!(s.n_current_vectors, 12);
        assert_eq!(s.rf.n_trees, 7);
        assert_eq!(s.ann_spec.learning_rate, 0.01);
        assert_eq!(s.ann_arch.layers, vec![11, 20, 10, 3]);
        assert_eq!(s.lmem_max_degree, 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(load_text("rf.number_of_trees = 10\n").is_err());
        assert!(load_text("bogus = 1\n").is_err());
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(load_text("rf.n_trees 10\n").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(load_text("rf.n_trees = ten\n").is_err());
        assert!(load_text("rf.max_features = 12\n").is_err());
        assert!(load_text("synth.current_profile = gaussian\n").is_err());
    }
}
