//! Progressive multi-stage training: schedule, augmentation, batched
//! steps and the stage loop with checkpointing.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataset::TrainingExample;
use crate::diffcore::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::geom::PointSet;
use crate::lossmetrics::{modified_chamfer_var, LossConfig};
use crate::net::{cascade_train_forward, save_checkpoint, Checkpoint, NetworkParams};

/// File name of the per-step loss log inside an output directory.
pub const LOG_FILE: &str = "train_log.csv";

pub fn checkpoint_name(stage: usize) -> String {
    format!("ckpt_stage{stage}.bin")
}

/// One training stage. Units are numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSpec {
    pub index: usize,
    pub target: usize,
    pub frozen: Vec<usize>,
}

/// The first unit trains alone; every later unit `u` gets a stage with
/// units `1..u` frozen and then a joint stage, both targeting level `u`.
pub fn build_schedule(levels: usize) -> Vec<StageSpec> {
    let mut stages = Vec::with_capacity(2 * levels.saturating_sub(1) + 1);
    for u in 1..=levels {
        if u > 1 {
            stages.push(StageSpec {
                index: stages.len() + 1,
                target: u,
                frozen: (1..u).collect(),
            });
        }
        stages.push(StageSpec {
            index: stages.len() + 1,
            target: u,
            frozen: Vec::new(),
        });
    }
    stages
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    pub rotate: bool,
    pub scale_range: (f64, f64),
    /// Noise standard deviation as a fraction of the input's bounding-box
    /// diagonal.
    pub noise_fraction: f64,
}

impl Default for Augmentation {
    fn default() -> Self {
        Augmentation {
            rotate: true,
            scale_range: (0.8, 1.2),
            noise_fraction: 0.0025,
        }
    }
}

impl Augmentation {
    pub fn none() -> Self {
        Augmentation {
            rotate: false,
            scale_range: (1.0, 1.0),
            noise_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub levels: usize,
    pub patch_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub steps_per_stage: usize,
    pub augmentation: Augmentation,
    pub loss: LossConfig,
    /// Adds the loss of every level below the target.
    pub loss_all_levels: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            levels: 4,
            patch_size: 50,
            batch_size: 28,
            learning_rate: 1e-3,
            steps_per_stage: 500,
            augmentation: Augmentation::default(),
            loss: LossConfig::default(),
            loss_all_levels: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.levels == 0 {
            return fail("levels must be at least 1");
        }
        if self.patch_size == 0 {
            return fail("patch size must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be finite and non-negative");
        }
        let (lo, hi) = self.augmentation.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return fail("scale range must satisfy 0 < low <= high");
        }
        let nf = self.augmentation.noise_fraction;
        if !(nf >= 0.0 && nf.is_finite()) {
            return fail("noise fraction must be finite and non-negative");
        }
        self.loss.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub stage: usize,
    /// 1-based within the stage.
    pub step: usize,
    pub target_level: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub stage: usize,
    pub target_level: usize,
    pub steps: usize,
    pub mean_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub stages: Vec<StageSummary>,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str = "stage,step,target_level,loss";

    pub fn csv_line(r: &StepRecord) -> String {
        format!("{},{},{},{:e}", r.stage, r.step, r.target_level, r.loss)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.steps {
            s.push_str(&Self::csv_line(r));
            s.push('\n');
        }
        s
    }

    pub fn losses(&self, stage: usize) -> Vec<f64> {
        self.steps
            .iter()
            .filter(|r| r.stage == stage)
            .map(|r| r.loss)
            .collect()
    }
}

fn rotate_all(sets: &mut [&mut PointSet], m: &[f64], dim: usize) {
    for set in sets.iter_mut() {
        set.map_points(|p| {
            let v = p.to_vec();
            for (r, out) in p.iter_mut().enumerate() {
                *out = (0..dim).map(|c| m[r * dim + c] * v[c]).sum();
            }
        });
    }
}

fn random_rotation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    if dim == 2 {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let (s, c) = a.sin_cos();
        return vec![c, -s, s, c];
    }
    // Normalized Gaussian 4-vector: a uniformly distributed unit quaternion.
    let q: Vec<f64> = (0..4).map(|_| StandardNormal.sample(rng)).collect();
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    vec![
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ]
}

/// Random rotation about the origin and uniform scale applied to the input
/// and every reference, then Gaussian jitter on the input only.
pub fn augment_example<R: Rng + ?Sized>(
    example: &TrainingExample,
    aug: &Augmentation,
    rng: &mut R,
) -> TrainingExample {
    let mut out = example.clone();
    let dim = out.input.dim();
    if aug.rotate {
        let m = random_rotation(dim, rng);
        let mut sets: Vec<&mut PointSet> = std::iter::once(&mut out.input)
            .chain(out.references.iter_mut())
            .collect();
        rotate_all(&mut sets, &m, dim);
    }
    let (lo, hi) = aug.scale_range;
    let s = if lo < hi {
        rng.random_range(lo..=hi)
    } else {
        lo
    };
    if s != 1.0 {
        for set in std::iter::once(&mut out.input).chain(out.references.iter_mut()) {
            set.map_points(|p| p.iter_mut().for_each(|v| *v *= s));
        }
    }
    if aug.noise_fraction > 0.0 {
        let sigma = aug.noise_fraction * out.input.bbox_diagonal();
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
            out.input
                .map_points(|p| p.iter_mut().for_each(|v| *v += normal.sample(rng)));
            out.noise_free = false;
        }
    }
    out
}

fn apply_freezing(params: &mut NetworkParams, stage: &StageSpec) {
    for u in 0..params.units() {
        params.set_frozen(u, stage.frozen.contains(&(u + 1)));
    }
}

/// One optimizer step on a batch: every member is augmented, patched and
/// pushed through the cascade; the mean loss is differentiated and Adam
/// updates the parameters of active, unfrozen units. Returns the mean loss.
#[allow(clippy::too_many_arguments)]
pub fn train_step<R: Rng + ?Sized>(
    params: &mut NetworkParams,
    batch: &[&TrainingExample],
    stage: &StageSpec,
    cfg: &TrainConfig,
    rng: &mut R,
    adam: &mut AdamState,
    step: usize,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    apply_freezing(params, stage);
    let scale = 1.0 / batch.len() as f64;
    let mut grads: Vec<Option<Vec<f64>>> = vec![None; params.tensors().len()];
    let mut total = 0.0;
    for member in batch {
        let ex = augment_example(member, &cfg.augmentation, rng);
        let mut fw = match cascade_train_forward(&ex, params, stage.target, cfg.patch_size, rng) {
            Err(Error::NonFinite(_)) => {
                return Err(Error::NonFiniteLoss {
                    step,
                    query: Vec::new(),
                })
            }
            r => r?,
        };
        let tape = &mut fw.tape;
        if tape.value(fw.prediction).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                step,
                query: fw.query_point,
            });
        }
        let mut loss = modified_chamfer_var(tape, fw.prediction, &fw.reference, &cfg.loss)?;
        if cfg.loss_all_levels {
            for (pred, reference) in &fw.intermediate {
                let extra = modified_chamfer_var(tape, *pred, reference, &cfg.loss)?;
                loss = tape.add(loss, extra)?;
            }
        }
        let value = tape.tensor(loss).item();
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                query: fw.query_point,
            });
        }
        total += value;
        tape.backward(loss)?;
        for (i, var) in fw.vars.iter().enumerate() {
            let Some(var) = var else { continue };
            let Some(g) = tape.grad(*var) else { continue };
            let acc = grads[i].get_or_insert_with(|| vec![0.0; g.len()]);
            for (a, b) in acc.iter_mut().zip(g) {
                *a += scale * b;
            }
        }
    }
    let refs: Vec<Option<&[f64]>> = grads.iter().map(|g| g.as_deref()).collect();
    adam.step(params.tensors_mut(), &refs)?;
    Ok(total * scale)
}

fn check_dataset(
    dataset: &[TrainingExample],
    params: &NetworkParams,
    cfg: &TrainConfig,
) -> Result<()> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if params.units() < cfg.levels {
        return Err(Error::Config(format!(
            "network has {} units, training needs {}",
            params.units(),
            cfg.levels
        )));
    }
    for (i, ex) in dataset.iter().enumerate() {
        if ex.levels() < cfg.levels {
            return Err(Error::Config(format!(
                "example {i} has references up to level {}, training needs {}",
                ex.levels(),
                cfg.levels
            )));
        }
        if ex.input.len() < cfg.patch_size {
            return Err(Error::InsufficientPoints {
                needed: cfg.patch_size,
                available: ex.input.len(),
            });
        }
        if ex.input.dim() != params.config().dim {
            return Err(Error::shape(format!(
                "example {i} has dimension {}, network expects {}",
                ex.input.dim(),
                params.config().dim
            )));
        }
    }
    Ok(())
}

fn stage_rng(seed: u64, stage: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}

fn append_log(dir: &Path, records: &[StepRecord]) -> Result<()> {
    let path = dir.join(LOG_FILE);
    let fresh = !path.exists();
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(TrainLog::CSV_HEADER);
        text.push('\n');
    }
    for r in records {
        text.push_str(&TrainLog::csv_line(r));
        text.push('\n');
    }
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(&path, e))
}

/// Where progress goes. With `out_dir` set, each finished stage writes
/// `ckpt_stage{s}.bin` and appends its steps to the CSV log.
#[derive(Debug, Clone, Default)]
pub struct TrainOutput {
    pub out_dir: Option<PathBuf>,
}

/// Runs the schedule from stage 1 on freshly initialized `params`.
pub fn progressive_train(
    dataset: &[TrainingExample],
    params: NetworkParams,
    cfg: &TrainConfig,
    output: &TrainOutput,
) -> Result<(NetworkParams, TrainLog)> {
    run_stages(dataset, params, 1, cfg, output)
}

/// Continues after the stage recorded in `checkpoint`.
pub fn resume_training(
    dataset: &[TrainingExample],
    checkpoint: Checkpoint,
    cfg: &TrainConfig,
    output: &TrainOutput,
) -> Result<(NetworkParams, TrainLog)> {
    run_stages(
        dataset,
        checkpoint.params,
        checkpoint.stage + 1,
        cfg,
        output,
    )
}

// Each stage draws from its own seeded stream and starts a fresh Adam
// state, so a checkpoint plus its stage index is enough to resume exactly.
fn run_stages(
    dataset: &[TrainingExample],
    mut params: NetworkParams,
    first_stage: usize,
    cfg: &TrainConfig,
    output: &TrainOutput,
) -> Result<(NetworkParams, TrainLog)> {
    check_dataset(dataset, &params, cfg)?;
    if let Some(dir) = &output.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut log = TrainLog::default();
    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    for stage in build_schedule(cfg.levels).into_iter().skip(first_stage - 1) {
        let mut rng = stage_rng(cfg.seed, stage.index);
        let mut adam = AdamState::new(adam_cfg, params.tensors());
        let mut order: Vec<usize> = Vec::new();
        let mut records = Vec::with_capacity(cfg.steps_per_stage);
        for step in 1..=cfg.steps_per_stage {
            let mut batch = Vec::with_capacity(cfg.batch_size);
            while batch.len() < cfg.batch_size {
                if order.is_empty() {
                    order = (0..dataset.len()).collect();
                    order.shuffle(&mut rng);
                    order.reverse();
                }
                batch.push(&dataset[order.pop().expect("refilled")]);
            }
            let loss = train_step(&mut params, &batch, &stage, cfg, &mut rng, &mut adam, step)?;
            records.push(StepRecord {
                stage: stage.index,
                step,
                target_level: stage.target,
                loss,
            });
        }
        apply_freezing(
            &mut params,
            &StageSpec {
                frozen: Vec::new(),
                ..stage.clone()
            },
        );
        if let Some(dir) = &output.out_dir {
            save_checkpoint(
                &dir.join(checkpoint_name(stage.index)),
                &params,
                stage.index,
            )?;
            append_log(dir, &records)?;
        }
        if !records.is_empty() {
            let n = records.len() as f64;
            log.stages.push(StageSummary {
                stage: stage.index,
                target_level: stage.target,
                steps: records.len(),
                mean_loss: records.iter().map(|r| r.loss).sum::<f64>() / n,
                final_loss: records.last().expect("nonempty").loss,
            });
        }
        log.steps.extend(records);
    }
    Ok((params, log))
}
