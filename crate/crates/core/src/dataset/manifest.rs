use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    build_example, generate_curve, read_points, write_points, CurveKind, CurveSpec, TrainingExample,
};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub split: Split,
    /// Seed that produced the curve (after any self-intersection retries).
    pub seed: u64,
    pub curve: CurveSpec,
    /// Paths relative to the manifest's directory.
    pub input: PathBuf,
    pub references: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator_seed: u64,
    pub n0: usize,
    pub levels: usize,
    pub examples: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    pub curves: usize,
    pub n0: usize,
    pub levels: usize,
    pub seed: u64,
    pub test_fraction: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            curves: 80,
            n0: 50,
            levels: 4,
            seed: 0,
            test_fraction: 0.2,
        }
    }
}

/// Writes one directory per curve (`P0.xyz`, `T1.xyz`, …) plus
/// `manifest.toml` under `out_dir`. Curve `i` has kind `i mod 4` and seed
/// `seed + i`; the last `round(curves · test_fraction)` curves form the
/// test split.
pub fn generate_dataset(out_dir: &Path, opts: &GenerateOptions) -> Result<DatasetManifest> {
    if opts.curves == 0 || opts.levels == 0 {
        return Err(Error::Config(
            "need at least one curve and one level".into(),
        ));
    }
    if !(0.0..=1.0).contains(&opts.test_fraction) {
        return Err(Error::Config(format!(
            "test fraction {}",
            opts.test_fraction
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let n_test = (opts.curves as f64 * opts.test_fraction).round() as usize;
    let n_train = opts.curves - n_test;
    let mut examples = Vec::with_capacity(opts.curves);
    let mut next_seed = opts.seed;
    for i in 0..opts.curves {
        let kind = CurveKind::ALL[i % CurveKind::ALL.len()];
        let (curve, used) = generate_curve(kind, next_seed.max(opts.seed + i as u64))?;
        next_seed = used + 1;
        let ex = build_example(&curve, opts.n0, opts.levels)?;
        let name = format!("curve_{i:03}");
        let dir = out_dir.join(&name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let input = PathBuf::from(&name).join("P0.xyz");
        write_points(out_dir.join(&input), &ex.input)?;
        let mut references = Vec::with_capacity(opts.levels);
        for (l, r) in ex.references.iter().enumerate() {
            let rel = PathBuf::from(&name).join(format!("T{}.xyz", l + 1));
            write_points(out_dir.join(&rel), r)?;
            references.push(rel);
        }
        examples.push(ManifestEntry {
            name,
            split: if i < n_train {
                Split::Train
            } else {
                Split::Test
            },
            seed: used,
            curve: curve.spec().clone(),
            input,
            references,
        });
    }
    let manifest = DatasetManifest {
        generator_seed: opts.seed,
        n0: opts.n0,
        levels: opts.levels,
        examples,
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Accepts either the manifest file or the dataset directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let manifest: DatasetManifest = toml::from_str(&text).map_err(|e| Error::Parse {
            path: file.clone(),
            line: e
                .span()
                .map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })?;
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, root))
    }

    /// Loads the examples of one split (or all), with references up to `levels`.
    pub fn load_examples(
        &self,
        root: &Path,
        split: Option<Split>,
        levels: usize,
    ) -> Result<Vec<TrainingExample>> {
        if levels > self.levels {
            return Err(Error::Config(format!(
                "dataset has references up to level {}, {levels} requested",
                self.levels
            )));
        }
        self.examples
            .iter()
            .filter(|e| split.is_none_or(|s| s == e.split))
            .map(|e| {
                let input = read_points(root.join(&e.input))?;
                let refs = e.references[..levels]
                    .iter()
                    .map(|r| read_points(root.join(r)))
                    .collect::<Result<Vec<_>>>()?;
                TrainingExample::new(input, refs, Some(e.curve.clone().build()?))
            })
            .collect()
    }
}
