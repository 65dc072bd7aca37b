//! Training loop and evaluation on small generated corpora.

use eabnet_dsp::StftConfig;
use eabnet_io::{read_records, SchemaHeader};
use eabnet_model::{Model, ModelConfig};
use eabnet_room::{build_corpus, read_manifest, CorpusConfig, SamplerConfig};
use eabnet_train::*;

fn corpus(count: usize, seed: u64, secs: f64) -> CorpusConfig {
    CorpusConfig {
        count,
        seed,
        duration_secs: secs,
        sampler: SamplerConfig { mics: 2, ..SamplerConfig::default() }.with_snr_grid(&SNR_BUCKETS),
        ..Default::default()
    }
}

fn utterances(cfg: &CorpusConfig) -> Vec<Utterance> {
    cfg.generate_all().unwrap().into_iter().map(|s| Utterance::from_scene(s).unwrap()).collect()
}

fn examples(cfg: &CorpusConfig, model: &ModelConfig) -> Vec<Example> {
    prepare_examples(&utterances(cfg), model, &StftConfig::default()).unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, batch_size: 2, shuffle_seed: 5, ..Default::default() }
}

#[test]
fn examples_have_model_shapes() {
    let cfg = ModelConfig::tiny();
    let ex = examples(&corpus(2, 1, 0.25), &cfg);
    assert_eq!(ex.len(), 2);
    let t = ex[0].input.shape()[2];
    assert_eq!(ex[0].input.shape(), [1, 4, t, 161]);
    assert_eq!(ex[0].target.shape(), [1, 2, t, 161]);
}

#[test]
fn stack_batch_concatenates_items() {
    let cfg = ModelConfig::tiny();
    let ex = examples(&corpus(2, 1, 0.25), &cfg);
    let b = stack_batch(&[&ex[0].input, &ex[1].input]).unwrap();
    assert_eq!(b.shape()[0], 2);
    let n = ex[0].input.numel();
    assert_eq!(&b.data()[..n], ex[0].input.data());
    assert_eq!(&b.data()[n..], ex[1].input.data());
    let short = eabnet_tensor::Tensor::zeros(vec![1, 4, 3, 161]);
    assert!(stack_batch(&[&ex[0].input, &short]).is_err());
    assert!(stack_batch(&[]).is_err());
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let cfg = ModelConfig::tiny();
    let ex = examples(&corpus(3, 2, 0.25), &cfg);
    let mut model = Model::new(cfg, 1).unwrap();
    let before = model.to_checkpoint();
    let mut tc = quick(2);
    tc.adam.learning_rate = 0.0;
    let out = train(&mut model, &ex, &[], &tc).unwrap();
    assert_eq!(model.to_checkpoint(), before);
    let (a, b) = (out.curve[0].train.total, out.curve[1].train.total);
    assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
}

#[test]
fn training_is_deterministic_and_keeps_best() {
    let cfg = ModelConfig::tiny();
    let ex = examples(&corpus(4, 3, 0.25), &cfg);
    let valid = examples(&corpus(1, 99, 0.25), &cfg);
    let run = || {
        let mut model = Model::new(cfg.clone(), 7).unwrap();
        let out = train(&mut model, &ex, &valid, &quick(3)).unwrap();
        (out, model.to_checkpoint())
    };
    let (a, ma) = run();
    let (b, mb) = run();
    assert_eq!(a.curve, b.curve);
    assert_eq!(ma, mb);
    assert_eq!(a.best, b.best);
    assert_eq!(a.curve.len(), 3);
    let monitored: Vec<f64> = a.curve.iter().map(|r| r.valid.unwrap().total).collect();
    let min = monitored.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(a.best_loss, min);
    assert_eq!(monitored[a.best_epoch - 1], min);
    assert!(a.curve[a.best_epoch - 1].best);
    // the best checkpoint reproduces its validation loss.
    let best = Model::from_checkpoint(&a.best).unwrap();
    assert_eq!(mean_loss(&best, &valid, LossWeights::default()).unwrap().total, min);
}

#[test]
fn training_reduces_loss_on_a_few_utterances() {
    let cfg = ModelConfig::tiny();
    let ex = examples(&corpus(2, 4, 0.25), &cfg);
    let mut model = Model::new(cfg, 2).unwrap();
    let mut tc = quick(6);
    tc.adam.learning_rate = 2e-3;
    let out = train(&mut model, &ex, &[], &tc).unwrap();
    let first = out.curve[0].train.total;
    let last = out.curve.last().unwrap().train.total;
    assert!(last < first, "{first} -> {last}");
    assert!(out.curve.windows(2).all(|w| w[1].learning_rate <= w[0].learning_rate));
}

#[test]
fn parallel_gradients_match_serial() {
    let cfg = ModelConfig::tiny();
    let ex = examples(&corpus(2, 5, 0.25), &cfg);
    let run = |parallel: bool| {
        let mut model = Model::new(cfg.clone(), 3).unwrap();
        let tc = TrainConfig { parallel, ..quick(1) };
        let out = train(&mut model, &ex, &[], &tc).unwrap();
        (out.curve[0].train.total, model.to_checkpoint())
    };
    let (ls, ms) = run(false);
    let (lp, mp) = run(true);
    assert!((ls - lp).abs() < 1e-12 * ls);
    for (a, b) in ms.tensors.iter().zip(&mp.tensors) {
        assert!(a.tensor.max_abs_diff(&b.tensor) < 1e-9, "{}", a.name);
    }
    assert_eq!(run(true).1, mp);
}

#[test]
fn divergence_names_epoch_and_batch() {
    let cfg = ModelConfig::tiny();
    let mut ex = examples(&corpus(4, 6, 0.25), &cfg);
    for e in &mut ex {
        e.input.data_mut()[0] = f64::NAN;
    }
    let mut model = Model::new(cfg, 1).unwrap();
    match train(&mut model, &ex, &[], &quick(2)) {
        Err(TrainError::Diverged { epoch, batch, loss }) => {
            assert_eq!((epoch, batch), (1, 1));
            assert!(loss.is_nan());
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn invalid_training_setups_are_rejected() {
    let cfg = ModelConfig::tiny();
    let mut model = Model::new(cfg, 1).unwrap();
    assert!(train(&mut model, &[], &[], &quick(1)).is_err());
    let ex = examples(&corpus(1, 1, 0.25), &ModelConfig::tiny());
    let tc = TrainConfig { batch_size: 0, ..quick(1) };
    assert!(matches!(train(&mut model, &ex, &[], &tc), Err(TrainError::Config(_))));
}

#[test]
fn identity_and_oracle_target_systems() {
    let utts = utterances(&corpus(4, 8, 0.5));
    let opts = EvalOptions { with_oracle: false, ..Default::default() };
    for r in evaluate(System::Identity, &utts, &opts).unwrap() {
        assert_eq!(r.enhanced, r.noisy);
        assert_eq!(r.delta_si_snr_db, 0.0);
        assert!(r.oracle_mvdr.is_none());
    }
    for r in evaluate(System::OracleTarget, &utts, &opts).unwrap() {
        assert_eq!(r.enhanced.si_snr_db, SATURATION_DB);
        assert!(r.enhanced.saturated);
        assert!(r.noisy.si_snr_db.is_finite() && !r.noisy.saturated);
    }
}

#[test]
fn model_and_oracle_rows_are_ordered_and_repeatable() {
    let utts = utterances(&corpus(3, 9, 0.5));
    let model = Model::new(ModelConfig::tiny(), 4).unwrap();
    let rows = evaluate(System::Model(&model), &utts, &EvalOptions::default()).unwrap();
    assert_eq!(rows.iter().map(|r| r.scene).collect::<Vec<_>>(), [0, 1, 2]);
    for r in &rows {
        assert!(r.enhanced.si_snr_db.is_finite());
        assert!(r.oracle_mvdr.is_some());
        assert_eq!(r.system, "eabnet[R-BF]");
    }
    assert_eq!(evaluate(System::Model(&model), &utts, &EvalOptions::default()).unwrap(), rows);
    let mvdr = evaluate(System::OracleMvdr, &utts, &EvalOptions::default()).unwrap();
    for (m, r) in mvdr.iter().zip(&rows) {
        assert_eq!(Some(m.enhanced), r.oracle_mvdr);
    }
}

#[test]
fn summary_buckets_and_table() {
    let utts = utterances(&corpus(8, 10, 0.25));
    let rows = evaluate(System::Identity, &utts, &EvalOptions { with_oracle: false, ..Default::default() }).unwrap();
    let sums = summarize(&rows);
    let all = sums.last().unwrap();
    assert_eq!(all.bucket, "all");
    assert_eq!(all.scenes, 8);
    assert_eq!(sums[..sums.len() - 1].iter().map(|s| s.scenes).sum::<usize>(), 8);
    let mean = rows.iter().map(|r| r.noisy.si_snr_db).sum::<f64>() / 8.0;
    assert!((all.noisy_si_snr_db - mean).abs() < 1e-12);
    assert!(all.oracle_si_snr_db.is_none());
    let table = render_table("identity", &sums);
    let lines: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(lines.len(), sums.len() + 1);
    let width = lines[0].chars().count();
    assert!(lines.iter().all(|l| l.chars().count() == width), "{table}");
    assert!(summarize(&[]).is_empty());
}

#[test]
fn records_round_trip_and_disk_loading() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = corpus(3, 11, 0.25);
    let records = build_corpus(&cfg, dir.path()).unwrap();
    let disk = load_from_disk(dir.path(), &read_manifest(dir.path().join("manifest.jsonl")).unwrap()).unwrap();
    let mem = load_regenerated(&cfg, &records).unwrap();
    for (d, m) in disk.iter().zip(&mem) {
        assert_eq!(d.id, m.id);
        assert!(d.images.is_none() && m.images.is_some());
        assert_eq!(d.mixture.num_channels(), 2);
        let err = d.mixture.channel(1).iter().zip(m.mixture.channel(1)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6);
    }
    let opts = EvalOptions::default();
    assert!(matches!(evaluate(System::OracleMvdr, &disk, &opts), Err(TrainError::Data(_))));

    let rows = evaluate(System::Identity, &disk, &EvalOptions { with_oracle: false, ..opts }).unwrap();
    let path = dir.path().join("metrics.jsonl");
    write_metrics(&path, &rows).unwrap();
    let back: Vec<MetricsRow> = read_records(&path, &SchemaHeader::new(METRICS_SCHEMA, METRICS_VERSION)).unwrap();
    assert_eq!(back, rows);

    let ex = prepare_examples(&disk, &ModelConfig::tiny(), &StftConfig::default()).unwrap();
    let mut model = Model::new(ModelConfig::tiny(), 1).unwrap();
    let out = train(&mut model, &ex, &[], &quick(1)).unwrap();
    let curve = dir.path().join("curve.jsonl");
    write_loss_curve(&curve, &out.curve).unwrap();
    let back: Vec<EpochRecord> =
        read_records(&curve, &SchemaHeader::new(LOSS_CURVE_SCHEMA, LOSS_CURVE_VERSION)).unwrap();
    assert_eq!(back, out.curve);
}
