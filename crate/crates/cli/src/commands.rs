use std::fs;
use std::path::{Path, PathBuf};

use pu3_core::dataset::{generate_dataset, read_points, write_points, DatasetManifest, Split};
use pu3_core::lossmetrics::{run_sweep, sweep_csv, Perturbation, SweepCase};
use pu3_core::net::{cascade_infer, init_network, load_checkpoint, Checkpoint};
use pu3_core::trainer::{
    build_schedule, checkpoint_name, progressive_train, resume_training, TrainOutput, LOG_FILE,
};
use pu3_core::{MetricsReport, PointSet};

use crate::svg::scatter_svg;
use crate::{CliError, ConfigArg, EvalArgs, GenDataArgs, RunConfig, TrainArgs, UpsampleArgs};

fn base_config(arg: &ConfigArg) -> Result<RunConfig, CliError> {
    let mut rc = RunConfig::default();
    if let Some(path) = &arg.config {
        rc.apply_file(path)?;
    }
    Ok(rc)
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{}: no such file",
            path.display()
        )))
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Units trained once `stage` has finished.
fn trained_levels(stage: usize) -> usize {
    stage / 2 + 1
}

pub fn gen_data(a: &GenDataArgs) -> Result<(), CliError> {
    let mut rc = base_config(&a.config)?;
    if let Some(v) = a.curves {
        rc.data.curves = v;
    }
    if let Some(v) = a.n0 {
        rc.data.n0 = v;
    }
    if let Some(v) = a.levels {
        rc.set("levels", &v.to_string())?;
    }
    if let Some(v) = a.seed {
        rc.set("seed", &v.to_string())?;
    }
    if let Some(v) = a.test_fraction {
        rc.data.test_fraction = v;
    }
    rc.validate()?;
    let manifest = generate_dataset(&a.out, &rc.data)?;
    println!(
        "wrote {} examples to {}",
        manifest.examples.len(),
        a.out.display()
    );
    Ok(())
}

fn load_split(
    data: &Path,
    split: Option<Split>,
    levels: usize,
) -> Result<Vec<pu3_core::TrainingExample>, CliError> {
    let (manifest, root) = DatasetManifest::load(data).map_err(|e| match e {
        pu3_core::Error::Io { .. } => CliError::Validation(format!("cannot read dataset: {e}")),
        e => e.into(),
    })?;
    let examples = manifest.load_examples(&root, split, levels)?;
    if examples.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: selected split is empty",
            data.display()
        )));
    }
    Ok(examples)
}

fn latest_checkpoint(dir: &Path) -> Option<(usize, PathBuf)> {
    let entries = fs::read_dir(dir).ok()?;
    entries
        .filter_map(|e| {
            let name = e.ok()?.file_name().into_string().ok()?;
            let stage = name
                .strip_prefix("ckpt_stage")?
                .strip_suffix(".bin")?
                .parse()
                .ok()?;
            Some((stage, dir.join(name)))
        })
        .max_by_key(|(s, _)| *s)
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let mut rc = base_config(&a.config)?;
    if let Some(v) = a.levels {
        rc.set("levels", &v.to_string())?;
    }
    if let Some(v) = a.patch_size {
        rc.train.patch_size = v;
    }
    if let Some(v) = a.steps_per_stage {
        rc.train.steps_per_stage = v;
    }
    if let Some(v) = a.batch {
        rc.train.batch_size = v;
    }
    if let Some(v) = a.lr {
        rc.train.learning_rate = v;
    }
    if let Some(v) = a.seed {
        rc.set("seed", &v.to_string())?;
    }
    rc.train.loss_all_levels |= a.loss_all_levels;
    if a.no_feature_knn {
        rc.net.use_feature_knn = false;
    }
    if a.no_dense_links {
        rc.net.use_dense_links = false;
    }
    rc.validate()?;
    let examples = load_split(&a.data, Some(Split::Train), rc.train.levels)?;
    rc.net.dim = examples[0].input.dim();

    let output = TrainOutput {
        out_dir: Some(a.out.clone()),
    };
    let resume = if a.resume {
        latest_checkpoint(&a.out)
    } else {
        None
    };
    let (_, log) = match resume {
        Some((stage, path)) => {
            let ck = load_checkpoint(&path)?;
            if ck.params.config() != &rc.net {
                return Err(CliError::Validation(format!(
                    "{} was trained with a different network configuration",
                    path.display()
                )));
            }
            let total = build_schedule(rc.train.levels).len();
            if stage >= total {
                println!("all {total} stages already complete");
                return Ok(());
            }
            println!("resuming after stage {stage}");
            resume_training(&examples, ck, &rc.train, &output)?
        }
        None => {
            let log_path = a.out.join(LOG_FILE);
            if log_path.exists() {
                fs::remove_file(&log_path)
                    .map_err(|e| CliError::Runtime(format!("{}: {e}", log_path.display())))?;
            }
            let params = init_network(&rc.net, rc.train.seed)?;
            progressive_train(&examples, params, &rc.train, &output)?
        }
    };
    for s in &log.stages {
        println!(
            "stage {} (target level {}): {} steps, mean loss {:.4e}, final loss {:.4e}",
            s.stage, s.target_level, s.steps, s.mean_loss, s.final_loss
        );
    }
    let last = build_schedule(rc.train.levels).len();
    println!("checkpoint {}", a.out.join(checkpoint_name(last)).display());
    Ok(())
}

fn open_checkpoint(path: &Path, levels: Option<usize>) -> Result<(Checkpoint, usize), CliError> {
    require_file(path)?;
    let ck = load_checkpoint(path).map_err(|e| CliError::Validation(e.to_string()))?;
    let trained = trained_levels(ck.stage).min(ck.params.units());
    let levels = levels.unwrap_or(trained);
    if levels == 0 || levels > trained {
        return Err(CliError::Validation(format!(
            "{levels} levels requested but {} holds {trained} trained units",
            path.display()
        )));
    }
    Ok((ck, levels))
}

pub fn upsample(a: &UpsampleArgs) -> Result<(), CliError> {
    let mut rc = base_config(&a.config)?;
    if let Some(v) = a.coverage {
        rc.coverage = v;
    }
    if let Some(v) = a.patch_size {
        rc.train.patch_size = v;
    }
    rc.validate()?;
    require_file(&a.input)?;
    let (ck, levels) = open_checkpoint(&a.ckpt, a.levels)?;
    let input = read_points(&a.input)?;
    let out = cascade_infer(&input, &ck.params, levels, rc.train.patch_size, rc.coverage)?;
    write_points(&a.out, &out).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("{}", out.len());
    Ok(())
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("--{flag}: cannot parse {s:?}")))
        })
        .collect()
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let mut rc = base_config(&a.config)?;
    if let Some(v) = a.seed {
        rc.set("seed", &v.to_string())?;
    }
    rc.validate()?;
    if a.sweep_noise.is_some() || a.sweep_drop.is_some() {
        return eval_sweep(a, &rc);
    }
    let (Some(pred), Some(reference)) = (&a.pred, &a.reference) else {
        return Err(CliError::Validation(
            "eval needs --pred and --ref, or a sweep with --ckpt and --data".into(),
        ));
    };
    require_file(pred)?;
    require_file(reference)?;
    let p = read_points(pred)?;
    let q = read_points(reference)?;
    if p.dim() != q.dim() {
        return Err(CliError::Validation(format!(
            "prediction is {}-d but reference is {}-d",
            p.dim(),
            q.dim()
        )));
    }
    let curve = match (&a.data, &a.example) {
        (Some(data), Some(name)) => {
            let (manifest, _) = DatasetManifest::load(data)?;
            let entry = manifest
                .examples
                .iter()
                .find(|e| &e.name == name)
                .ok_or_else(|| CliError::Validation(format!("no example named {name:?}")))?;
            Some(entry.curve.clone().build()?)
        }
        (None, None) => None,
        _ => {
            return Err(CliError::Validation(
                "--data and --example go together".into(),
            ))
        }
    };
    let report = MetricsReport::compute(&p, &q, curve.as_ref())?;
    write_text(&a.out, &report.to_record())?;
    if let Some(plot) = &a.plot {
        write_text(plot, &scatter_svg(&p, &q))?;
    }
    Ok(())
}

fn eval_sweep(a: &EvalArgs, rc: &RunConfig) -> Result<(), CliError> {
    let (Some(ckpt), Some(data)) = (&a.ckpt, &a.data) else {
        return Err(CliError::Validation("sweeps need --ckpt and --data".into()));
    };
    let split = match a.split.as_str() {
        "train" => Some(Split::Train),
        "test" => Some(Split::Test),
        "all" => None,
        s => return Err(CliError::Validation(format!("unknown split {s:?}"))),
    };
    let mut settings = Vec::new();
    if let Some(t) = &a.sweep_noise {
        settings.extend(
            parse_list("sweep-noise", t)?
                .into_iter()
                .map(Perturbation::Noise),
        );
    }
    if let Some(t) = &a.sweep_drop {
        settings.extend(
            parse_list("sweep-drop", t)?
                .into_iter()
                .map(Perturbation::Drop),
        );
    }
    for s in &settings {
        let v = s.level();
        let ok = match s {
            Perturbation::Noise(_) => v >= 0.0 && v.is_finite(),
            Perturbation::Drop(_) => (0.0..1.0).contains(&v),
        };
        if !ok {
            return Err(CliError::Validation(format!("invalid sweep setting {s}")));
        }
    }
    let (ck, levels) = open_checkpoint(ckpt, a.levels)?;
    let examples = load_split(data, split, rc.input_level + levels)?;
    let input_of = |ex: &pu3_core::TrainingExample| -> PointSet {
        match rc.input_level {
            0 => ex.input.clone(),
            l => ex.references[l - 1].clone(),
        }
    };
    let inputs: Vec<PointSet> = examples.iter().map(input_of).collect();
    let cases: Vec<SweepCase<'_>> = examples
        .iter()
        .zip(&inputs)
        .map(|(ex, input)| SweepCase {
            input,
            reference: &ex.references[rc.input_level + levels - 1],
            curve: ex.curve.as_ref(),
        })
        .collect();
    let (n, coverage) = (rc.train.patch_size, rc.coverage);
    let rows = run_sweep(&cases, &settings, rc.train.seed, |p| {
        cascade_infer(p, &ck.params, levels, n, coverage)
    })?;
    write_text(&a.out, &sweep_csv(&rows))?;
    if let Some(plot) = &a.plot {
        let out = cascade_infer(cases[0].input, &ck.params, levels, n, coverage)?;
        write_text(plot, &scatter_svg(&out, cases[0].reference))?;
    }
    println!("{} settings over {} shapes", rows.len(), cases.len());
    Ok(())
}
