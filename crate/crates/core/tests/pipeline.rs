use pu3_core::dataset::{generate_dataset, DatasetManifest, GenerateOptions, Split};
use pu3_core::lossmetrics::MetricsReport;
use pu3_core::net::{cascade_infer, init_network, load_checkpoint, NetConfig};
use pu3_core::trainer::{
    checkpoint_name, progressive_train, resume_training, TrainConfig, TrainOutput, LOG_FILE,
};

fn dataset(
    dir: &std::path::Path,
) -> (
    Vec<pu3_core::TrainingExample>,
    Vec<pu3_core::TrainingExample>,
) {
    let opts = GenerateOptions {
        curves: 8,
        levels: 2,
        test_fraction: 0.25,
        ..GenerateOptions::default()
    };
    generate_dataset(dir, &opts).unwrap();
    let (manifest, root) = DatasetManifest::load(dir).unwrap();
    (
        manifest
            .load_examples(&root, Some(Split::Train), 2)
            .unwrap(),
        manifest.load_examples(&root, Some(Split::Test), 2).unwrap(),
    )
}

fn config() -> TrainConfig {
    TrainConfig {
        levels: 2,
        steps_per_stage: 4,
        batch_size: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn generate_train_checkpoint_and_infer() {
    let tmp = tempfile::tempdir().unwrap();
    let (train, test) = dataset(&tmp.path().join("data"));
    assert_eq!((train.len(), test.len()), (6, 2));
    let net = NetConfig {
        levels: 2,
        dim: 2,
        ..NetConfig::default()
    };
    let out = tmp.path().join("run");
    let cfg = config();
    let (params, log) = progressive_train(
        &train,
        init_network(&net, 0).unwrap(),
        &cfg,
        &TrainOutput {
            out_dir: Some(out.clone()),
        },
    )
    .unwrap();
    assert_eq!(log.steps.len(), 3 * cfg.steps_per_stage);
    assert!(log.steps.iter().all(|r| r.loss.is_finite()));
    let csv = std::fs::read_to_string(out.join(LOG_FILE)).unwrap();
    assert_eq!(csv, log.to_csv());

    let ck = load_checkpoint(&out.join(checkpoint_name(3))).unwrap();
    assert_eq!(ck.stage, 3);
    let ex = &test[0];
    let a = cascade_infer(&ex.input, &params, 2, 50, 3.0).unwrap();
    let b = cascade_infer(&ex.input, &ck.params, 2, 50, 3.0).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 4 * ex.input.len());
    let report = MetricsReport::compute(&a, &ex.references[1], ex.curve.as_ref()).unwrap();
    assert!(report.chamfer.is_finite() && report.point_to_curve.unwrap().is_finite());
}

#[test]
fn resuming_matches_an_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (train, _) = dataset(&tmp.path().join("data"));
    let net = NetConfig {
        levels: 2,
        dim: 2,
        ..NetConfig::default()
    };
    let cfg = config();
    let out = tmp.path().join("run");
    let (full, log) = progressive_train(
        &train,
        init_network(&net, 0).unwrap(),
        &cfg,
        &TrainOutput {
            out_dir: Some(out.clone()),
        },
    )
    .unwrap();
    let ck = load_checkpoint(&out.join(checkpoint_name(2))).unwrap();
    let (resumed, tail) = resume_training(&train, ck, &cfg, &TrainOutput::default()).unwrap();
    assert_eq!(resumed.tensors(), full.tensors());
    assert_eq!(tail.steps, log.steps[2 * cfg.steps_per_stage..].to_vec());
}
