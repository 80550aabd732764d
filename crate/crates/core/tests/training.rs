use groupim::baselines::evaluate_popularity;
use groupim::data::{split_groups, synthesize_dataset, SynthConfig, DEFAULT_RATIOS};
use groupim::evaluation::{evaluate, mean_ndcg_at_k};
use groupim::model::{init_params, ModelDims, ParamId};
use groupim::objectives::{evaluate_objective, sample_negatives, Batch, Terms};
use groupim::rng::{stream_rng, Stream};
use groupim::training::{
    adam_update, initial_state, pretrain_encoder, train, train_from, AdamConfig, Moments, PretrainedEncoder, Trainer,
};
use groupim::{DatasetSplit, LossMode, ModelState, TrainConfig};

fn small_split() -> DatasetSplit {
    let cfg = SynthConfig {
        n_users: 60,
        n_items: 40,
        n_groups: 150,
        seed: 3,
        ..SynthConfig::default()
    };
    let (users, groups) = synthesize_dataset(&cfg).unwrap();
    split_groups(&groups, &users, DEFAULT_RATIOS, 1).unwrap()
}

fn small_cfg(mode: LossMode) -> TrainConfig {
    TrainConfig {
        embed_dim: 16,
        epochs: 5,
        pretrain_epochs: 3,
        batch_size_groups: 16,
        batch_size_users: 16,
        learning_rate: 5e-3,
        mode,
        seed: 7,
        ..TrainConfig::default()
    }
}

fn dims(split: &DatasetSplit, cfg: &TrainConfig) -> ModelDims {
    ModelDims {
        num_items: split.users.num_items(),
        embed_dim: cfg.embed_dim,
        aggregator: cfg.aggregator,
    }
}

fn adam(cfg: &TrainConfig) -> AdamConfig {
    AdamConfig {
        learning_rate: cfg.learning_rate,
        beta1: cfg.adam_betas.0,
        beta2: cfg.adam_betas.1,
        eps: cfg.adam_eps,
    }
}

/// One first-step Adam update on the tensors selected by `include`.
fn manual_step(model: &mut ModelState, grads: &groupim::model::Gradients, cfg: &TrainConfig, include: fn(ParamId) -> bool) {
    let g: Vec<(ParamId, Vec<f64>)> = grads.tensors().into_iter().map(|(id, t)| (id, t.to_vec())).collect();
    for ((id, p), (_, g)) in model.tensors_mut().into_iter().zip(&g) {
        if include(id) {
            adam_update(p, g, &mut Moments::default(), 1, &adam(cfg));
        }
    }
}

#[test]
fn zero_pretrain_epochs_keep_initialization() {
    let split = small_split();
    let mut cfg = small_cfg(LossMode::GroupimFull);
    cfg.pretrain_epochs = 0;
    let a = initial_state(&split.users, &cfg).unwrap();
    let b = init_params(dims(&split, &cfg), cfg.hyper(), cfg.seed).unwrap();
    assert_eq!(a, b);
    let pre = pretrain_encoder(&split.users, &cfg).unwrap();
    assert_eq!(pre.w1, b.encoder.w1);
    assert_eq!(pre.b1, b.encoder.b1);
}

#[test]
fn pretraining_lowers_user_loss_deterministically() {
    let split = small_split();
    let cfg = small_cfg(LossMode::GroupimFull);
    let start = PretrainedEncoder::initial(split.users.num_items(), &cfg).unwrap();
    let a = pretrain_encoder(&split.users, &cfg).unwrap();
    let b = pretrain_encoder(&split.users, &cfg).unwrap();
    assert_eq!(a.w1, b.w1);
    assert_eq!(a.head, b.head);
    let before = start.mean_user_loss(&split.users);
    let after = a.mean_user_loss(&split.users);
    assert!(after < before, "{after} !< {before}");

    let model = initial_state(&split.users, &cfg).unwrap();
    assert_eq!(model.encoder.w1, a.w1);
    assert_eq!(model.encoder.b1, a.b1);
}

#[test]
fn first_batch_matches_manual_adam() {
    let split = small_split();
    let cfg = small_cfg(LossMode::BaseLg);
    let init = initial_state(&split.users, &cfg).unwrap();
    let groups: Vec<_> = split.train.iter().take(4).collect();

    let mut trainer = Trainer::new(init.clone(), cfg.clone(), &split.users).unwrap();
    trainer.train_batch(&groups, &[], 1).unwrap();

    let batch = Batch {
        groups: groups.clone(),
        ..Batch::default()
    };
    let report = evaluate_objective(&init, &split.users, &batch, &Terms::only_group(), None).unwrap();
    let mut expected = init.clone();
    manual_step(&mut expected, &report.gradients, &cfg, ParamId::in_recommender_step);
    assert_eq!(trainer.model(), &expected);
    assert_eq!(trainer.model().discriminator, init.discriminator);
}

#[test]
fn steps_update_only_their_tensors() {
    let split = small_split();
    let cfg = small_cfg(LossMode::GroupimFull);
    let init = initial_state(&split.users, &cfg).unwrap();
    let groups: Vec<_> = split.train.iter().take(4).collect();
    let epoch = 2;

    let mut trainer = Trainer::new(init.clone(), cfg.clone(), &split.users).unwrap();
    trainer.train_batch(&groups, &[], epoch).unwrap();

    let mut terms = LossMode::GroupimFull.terms(cfg.lambda);
    terms.mi = 0.0;
    let rec_batch = Batch {
        groups: groups.clone(),
        ..Batch::default()
    };
    let rec = evaluate_objective(&init, &split.users, &rec_batch, &terms, None).unwrap();
    let mut expected = init.clone();
    manual_step(&mut expected, &rec.gradients, &cfg, ParamId::in_recommender_step);
    assert_eq!(expected.discriminator, init.discriminator);

    let after_one = expected.clone();
    let negatives = groups
        .iter()
        .map(|g| {
            let mut rng = stream_rng(cfg.seed, Stream::Negatives, &[epoch as u64, g.group_id]);
            sample_negatives(g, &split.users, cfg.eta, cfg.negatives_per_member, &mut rng).unwrap()
        })
        .collect();
    let mi_batch = Batch {
        groups,
        negatives,
        users: Vec::new(),
    };
    let mi = evaluate_objective(&after_one, &split.users, &mi_batch, &Terms::only_mi(), None).unwrap();
    manual_step(&mut expected, &mi.gradients, &cfg, ParamId::in_discriminator_step);
    assert_eq!(expected.predictor, after_one.predictor);
    assert_ne!(expected.discriminator, after_one.discriminator);
    assert_eq!(trainer.model(), &expected);
}

#[test]
fn epoch_loss_decreases_early() {
    let split = small_split();
    for mode in [LossMode::BaseLg, LossMode::GroupimFull] {
        let mut cfg = small_cfg(mode);
        cfg.epochs = 5;
        let mut trainer = Trainer::new(initial_state(&split.users, &cfg).unwrap(), cfg, &split.users).unwrap();
        let totals: Vec<f64> = (1..=5).map(|e| trainer.run_epoch(&split.train, e).unwrap().l_g).collect();
        assert!(totals.windows(2).all(|w| w[1] < w[0]), "{mode}: {totals:?}");
    }
}

#[test]
fn training_is_reproducible() {
    let split = small_split();
    let cfg = small_cfg(LossMode::GroupimFull);
    let (a, log_a) = train(&split, &cfg).unwrap();
    let (b, log_b) = train(&split, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(log_a.without_timing(), log_b.without_timing());
    assert_eq!(log_a.to_jsonl().lines().count(), cfg.epochs);

    let mut other = cfg.clone();
    other.seed += 1;
    let (c, _) = train(&split, &other).unwrap();
    assert_ne!(a, c);
}

#[test]
fn returned_model_is_best_on_validation() {
    let split = small_split();
    let mut cfg = small_cfg(LossMode::UniformW);
    cfg.epochs = 6;
    let (model, log) = train(&split, &cfg).unwrap();
    let scores: Vec<f64> = log.epochs.iter().map(|e| e.val_ndcg20.unwrap()).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first_best = scores.iter().position(|&s| s == best).unwrap() + 1;
    assert_eq!(log.best_epoch, Some(first_best));
    assert_eq!(mean_ndcg_at_k(&model, &split.val, &split.users, 20).unwrap(), best);
}

#[test]
fn no_validation_returns_last_epoch() {
    let mut split = small_split();
    split.val.clear();
    let cfg = small_cfg(LossMode::BaseLg);
    let init = initial_state(&split.users, &cfg).unwrap();
    let (model, log) = train_from(&split, &cfg, init.clone()).unwrap();
    assert_eq!(log.best_epoch, Some(cfg.epochs));
    assert!(log.epochs.iter().all(|e| e.val_ndcg20.is_none()));

    let mut trainer = Trainer::new(init, cfg.clone(), &split.users).unwrap();
    for e in 1..=cfg.epochs {
        trainer.run_epoch(&split.train, e).unwrap();
    }
    assert_eq!(trainer.model(), &model);
}

#[test]
fn training_beats_flat_head() {
    let split = small_split();
    let cfg = small_cfg(LossMode::GroupimFull);
    let mut flat = init_params(dims(&split, &cfg), cfg.hyper(), cfg.seed).unwrap();
    flat.predictor.weight.fill(0.0);
    let (trained, _) = train(&split, &cfg).unwrap();
    let before = evaluate(&flat, &split.test, &split.users, &[20]).unwrap();
    let after = evaluate(&trained, &split.test, &split.users, &[20]).unwrap();
    assert!(after.at(20).unwrap().ndcg > before.at(20).unwrap().ndcg);
    assert!(evaluate_popularity(&split, &split.test, &[20]).unwrap().at(20).unwrap().ndcg > 0.0);
}

#[test]
fn invalid_config_rejected() {
    let split = small_split();
    let mut cfg = small_cfg(LossMode::GroupimFull);
    cfg.lambda = 100.0;
    assert!(train(&split, &cfg).is_err());
    cfg.lambda = 1.0;
    cfg.embed_dim = 0;
    assert!(train(&split, &cfg).is_err());
}
