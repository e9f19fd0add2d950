use std::fs;
use std::path::Path;

use pu3_core::dataset::GenerateOptions;
use pu3_core::net::NetConfig;
use pu3_core::trainer::TrainConfig;
use pu3_core::LossConfig;

use crate::CliError;

/// Every tunable setting, merged from built-in defaults, an optional
/// `key = value` file and command-line flags, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub net: NetConfig,
    pub train: TrainConfig,
    pub data: GenerateOptions,
    pub coverage: f64,
    pub input_level: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            net: NetConfig::default(),
            train: TrainConfig::default(),
            data: GenerateOptions::default(),
            coverage: 3.0,
            input_level: 1,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Validation(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Keys accepted in configuration files.
    pub const KEYS: &'static [&'static str] = &[
        "levels",
        "seed",
        "curves",
        "n0",
        "test_fraction",
        "compress_width",
        "growth",
        "blocks",
        "dense_layers",
        "feature_k",
        "interp_k",
        "expand_hidden",
        "activation",
        "use_feature_knn",
        "use_dense_links",
        "patch_size",
        "batch_size",
        "learning_rate",
        "steps_per_stage",
        "rotate",
        "scale_min",
        "scale_max",
        "noise_fraction",
        "delta_multiplier",
        "loss_all_levels",
        "coverage",
        "input_level",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "levels" => {
                let l: usize = parse(key, value)?;
                self.net.levels = l;
                self.train.levels = l;
                self.data.levels = l;
            }
            "seed" => {
                let s: u64 = parse(key, value)?;
                self.train.seed = s;
                self.data.seed = s;
            }
            "curves" => self.data.curves = parse(key, value)?,
            "n0" => self.data.n0 = parse(key, value)?,
            "test_fraction" => self.data.test_fraction = parse(key, value)?,
            "compress_width" | "growth" | "blocks" | "dense_layers" | "feature_k" | "interp_k"
            | "expand_hidden" | "activation" | "use_feature_knn" | "use_dense_links" => self
                .net
                .set(key, value)
                .map_err(|e| CliError::Validation(e.to_string()))?,
            "patch_size" => self.train.patch_size = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "learning_rate" => self.train.learning_rate = parse(key, value)?,
            "steps_per_stage" => self.train.steps_per_stage = parse(key, value)?,
            "rotate" => self.train.augmentation.rotate = parse(key, value)?,
            "scale_min" => self.train.augmentation.scale_range.0 = parse(key, value)?,
            "scale_max" => self.train.augmentation.scale_range.1 = parse(key, value)?,
            "noise_fraction" => self.train.augmentation.noise_fraction = parse(key, value)?,
            "delta_multiplier" => {
                self.train.loss = LossConfig {
                    delta_multiplier: parse(key, value)?,
                }
            }
            "loss_all_levels" => self.train.loss_all_levels = parse(key, value)?,
            "coverage" => self.coverage = parse(key, value)?,
            "input_level" => self.input_level = parse(key, value)?,
            _ => {
                return Err(CliError::Validation(format!(
                    "unknown configuration key {key:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies a flat `key = value` file. `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    no + 1
                ))
            })?;
            self.set(k.trim(), v)
                .map_err(|e| CliError::Validation(format!("{}:{}: {e}", path.display(), no + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = |e: pu3_core::Error| CliError::Validation(e.to_string());
        self.net.validate().map_err(v)?;
        self.train.validate().map_err(v)?;
        if self.data.n0 < self.net.feature_k {
            return Err(CliError::Validation(format!(
                "n0 = {} is below the neighborhood size feature_k = {}",
                self.data.n0, self.net.feature_k
            )));
        }
        if self.train.patch_size < self.net.feature_k {
            return Err(CliError::Validation(format!(
                "patch_size = {} is below the neighborhood size feature_k = {}",
                self.train.patch_size, self.net.feature_k
            )));
        }
        if !(self.coverage > 0.0 && self.coverage.is_finite()) {
            return Err(CliError::Validation(format!("coverage {}", self.coverage)));
        }
        if !(0.0..=1.0).contains(&self.data.test_fraction) {
            return Err(CliError::Validation(format!(
                "test_fraction {}",
                self.data.test_fraction
            )));
        }
        if self.data.curves == 0 {
            return Err(CliError::Validation("curves must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_key_is_settable() {
        let samples = [
            ("levels", "2"),
            ("seed", "3"),
            ("curves", "8"),
            ("n0", "40"),
            ("test_fraction", "0.5"),
            ("compress_width", "8"),
            ("growth", "4"),
            ("blocks", "2"),
            ("dense_layers", "3"),
            ("feature_k", "16"),
            ("interp_k", "4"),
            ("expand_hidden", "32,16"),
            ("activation", "leaky_relu"),
            ("use_feature_knn", "false"),
            ("use_dense_links", "false"),
            ("patch_size", "40"),
            ("batch_size", "4"),
            ("learning_rate", "0.01"),
            ("steps_per_stage", "10"),
            ("rotate", "false"),
            ("scale_min", "0.9"),
            ("scale_max", "1.1"),
            ("noise_fraction", "0"),
            ("delta_multiplier", "4"),
            ("loss_all_levels", "true"),
            ("coverage", "2"),
            ("input_level", "0"),
        ];
        assert_eq!(samples.len(), RunConfig::KEYS.len());
        let mut c = RunConfig::default();
        for (k, v) in samples {
            assert!(RunConfig::KEYS.contains(&k));
            c.set(k, v).unwrap();
        }
        c.validate().unwrap();
        assert_eq!(c.net.levels, 2);
        assert_eq!(c.train.levels, 2);
        assert_eq!(c.data.seed, 3);
        assert_eq!(c.net.expand_hidden, vec![32, 16]);
        assert!(!c.train.augmentation.rotate);
    }

    #[test]
    fn file_parsing_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# comment\nlevels = 2\n\nbatch_size = 4 # inline\n").unwrap();
        let mut c = RunConfig::default();
        c.apply_file(&path).unwrap();
        assert_eq!(c.train.batch_size, 4);
        assert_eq!(c.train.levels, 2);

        fs::write(&path, "bogus = 1\n").unwrap();
        let err = RunConfig::default().apply_file(&path).unwrap_err();
        assert!(err.to_string().contains("run.cfg:1"));
        fs::write(&path, "levels 2\n").unwrap();
        assert!(RunConfig::default().apply_file(&path).is_err());
    }

    #[test]
    fn small_inputs_are_rejected() {
        let mut c = RunConfig::default();
        c.set("n0", "2").unwrap();
        assert!(c.validate().is_err());
    }
}
